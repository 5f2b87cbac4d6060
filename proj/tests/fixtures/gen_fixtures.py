#!/usr/bin/env python3
"""Regenerates the binary image fixtures.

The JPEG expectations come from Pillow, which acts as the independent
reference codec. Run from this directory: python3 gen_fixtures.py
"""
import io

import numpy as np
from PIL import Image


def save_ppm(path, arr):
    h, w, _ = arr.shape
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (w, h))
        f.write(arr.astype(np.uint8).tobytes())


def main():
    # 1x1 white PNG.
    Image.new("RGB", (1, 1), (255, 255, 255)).save("white_1x1.png")

    # 4x3 8-bit grayscale PNG, every sample = 10.
    Image.fromarray(np.full((3, 4), 10, dtype=np.uint8), mode="L").save(
        "gray10_4x3.png")

    # Deterministic natural-ish 64x64 RGB image: smooth gradients + blobs +
    # mild texture.
    rng = np.random.default_rng(20250809)
    size = 64
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    img = np.zeros((size, size, 3))
    for c in range(3):
        img[:, :, c] = 0.35 + 0.1 * np.cos(
            2 * np.pi * (0.7 + 0.3 * c) * (xx * np.cos(0.4 + c) + yy * np.sin(0.4 + c)) / size)
    for _ in range(6):
        cx, cy = rng.uniform(0, size, 2)
        r = rng.uniform(4, 9)
        amp = rng.uniform(0.2, 0.45)
        color = rng.uniform(0.7, 1.3, 3)
        d = np.sqrt((xx - cx) ** 2 + (yy - cy) ** 2)
        t = np.clip((r + 1.5 - d) / 3.0, 0, 1)
        mask = t * t * (3 - 2 * t)
        for c in range(3):
            img[:, :, c] += amp * color[c] * mask
    img += rng.normal(0, 0.015, img.shape)
    u8 = np.clip(img * 255.0 + 0.5, 0, 255).astype(np.uint8)
    Image.fromarray(u8, mode="RGB").save("photo_64.png")

    # Reference JPEG encode (quality 85, 4:4:4 is NOT used: Pillow keeps the
    # libjpeg default 4:2:0 at subsampling=2) and its reference decode.
    pil = Image.fromarray(u8, mode="RGB")
    pil.save("photo_64.jpg", quality=85, subsampling=2)
    decoded = np.asarray(Image.open("photo_64.jpg").convert("RGB"))
    save_ppm("photo_64_jpg_decoded.ppm", decoded)

    # Reference Q60 round trip of the PNG pixels.
    buf = io.BytesIO()
    pil.save(buf, format="JPEG", quality=60, subsampling=2)
    buf.seek(0)
    rt = np.asarray(Image.open(buf).convert("RGB"))
    save_ppm("photo_64_q60_roundtrip.ppm", rt)


if __name__ == "__main__":
    main()

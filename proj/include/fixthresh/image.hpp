#ifndef FIXTHRESH_IMAGE_HPP
#define FIXTHRESH_IMAGE_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace fixthresh::imaging {

// 8-bit RGB image, row-major, channel-interleaved.
struct ImageU8 {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  std::uint8_t& at(int y, int x, int c) { return data[(y * width + x) * 3 + c]; }
  std::uint8_t at(int y, int x, int c) const { return data[(y * width + x) * 3 + c]; }
  void validate() const;
};

// unit: samples in [0,1]. normalized: ImageNet-style standardized values.
// signal: unconstrained finite values (e.g. the output of a high-pass
// filter, which is zero-mean and can go negative).
enum class Range { unit, normalized, signal };

// Real-valued RGB image.
struct ImageTensor {
  int height = 0;
  int width = 0;
  Range range_tag = Range::unit;
  std::vector<double> data;  // row-major, channel-interleaved, 3 channels

  static ImageTensor zeros(int h, int w, Range tag = Range::unit);
  static ImageTensor constant(int h, int w, double value, Range tag = Range::unit);
  double& at(int y, int x, int c) { return data[(y * width + x) * 3 + c]; }
  double at(int y, int x, int c) const { return data[(y * width + x) * 3 + c]; }
  void validate() const;
};

// Per-channel standardization constants.
struct NormStats {
  double mean[3];
  double std[3];
};

// ImageNet statistics.
NormStats imagenet_stats();

// Decodes a PNG or JPEG file (sniffed by magic bytes). Grayscale inputs are
// replicated to 3 channels; alpha is dropped.
ImageU8 load_image(const std::string& path);

// 8-bit RGB PNG without ancillary chunks.
void save_png(const std::string& path, const ImageU8& img);

ImageTensor to_unit(const ImageU8& img);

// round(clamp(x,0,1)*255) per sample.
ImageU8 to_u8(const ImageTensor& img);

// Catmull-Rom bicubic (a = -0.5), half-pixel center mapping, edge clamp.
// Separable application; unit-tagged outputs are clamped back to [0,1].
ImageTensor resize_bicubic(const ImageTensor& img, int out_h, int out_w);

// out[c] = (in[c] - mean[c]) / std[c]. Requires a unit-tagged input.
ImageTensor normalize(const ImageTensor& img, const NormStats& stats);

// Inverse of normalize.
ImageTensor denormalize(const ImageTensor& img, const NormStats& stats);

}  // namespace fixthresh::imaging

#endif

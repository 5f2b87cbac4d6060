#include "fixthresh/image.hpp"

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>

#include <jpeglib.h>
#include <png.h>

#include "fixthresh/error.hpp"

namespace fixthresh::imaging {

void ImageU8::validate() const {
  require(height >= 1 && width >= 1, ErrorCode::invalid_argument,
          "ImageU8: empty dimensions");
  require(data.size() == static_cast<std::size_t>(height) * width * 3,
          ErrorCode::invalid_argument, "ImageU8: data length mismatch");
}

ImageTensor ImageTensor::zeros(int h, int w, Range tag) {
  return constant(h, w, 0.0, tag);
}

ImageTensor ImageTensor::constant(int h, int w, double value, Range tag) {
  ImageTensor t;
  t.height = h;
  t.width = w;
  t.range_tag = tag;
  t.data.assign(static_cast<std::size_t>(h) * w * 3, value);
  return t;
}

void ImageTensor::validate() const {
  require(height >= 1 && width >= 1, ErrorCode::invalid_argument,
          "ImageTensor: empty dimensions");
  require(data.size() == static_cast<std::size_t>(height) * width * 3,
          ErrorCode::invalid_argument, "ImageTensor: data length mismatch");
  for (double v : data)
    require(std::isfinite(v), ErrorCode::invalid_argument,
            "ImageTensor: non-finite sample");
  if (range_tag == Range::unit) {
    for (double v : data)
      require(v >= 0.0 && v <= 1.0, ErrorCode::invalid_argument,
              "ImageTensor: unit-tagged sample outside [0,1]");
  }
}

NormStats imagenet_stats() {
  return NormStats{{0.485, 0.456, 0.406}, {0.229, 0.224, 0.225}};
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { if (f) std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

ImageU8 load_png_file(const std::string& path, std::FILE* f) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  require(png != nullptr, ErrorCode::internal, "libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    raise(ErrorCode::internal, "libpng info init failed");
  }
  std::vector<std::uint8_t*> row_ptrs;
  ImageU8 img;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    raise(ErrorCode::format, "PNG decode failed: " + path);
  }
  png_init_io(png, f);
  png_read_info(png, info);

  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  img.height = static_cast<int>(png_get_image_height(png, info));
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.data.resize(static_cast<std::size_t>(img.height) * img.width * 3);
  row_ptrs.resize(img.height);
  for (int y = 0; y < img.height; ++y)
    row_ptrs[y] = img.data.data() + static_cast<std::size_t>(y) * img.width * 3;
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

struct JpegErrorMgr {
  jpeg_error_mgr pub;
  jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* mgr = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  longjmp(mgr->jump, 1);
}

ImageU8 decode_jpeg_common(jpeg_decompress_struct& cinfo) {
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  ImageU8 img;
  img.height = static_cast<int>(cinfo.output_height);
  img.width = static_cast<int>(cinfo.output_width);
  img.data.resize(static_cast<std::size_t>(img.height) * img.width * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = img.data.data() +
                   static_cast<std::size_t>(cinfo.output_scanline) * img.width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  return img;
}

ImageU8 load_jpeg_file(const std::string& path, std::FILE* f) {
  jpeg_decompress_struct cinfo;
  JpegErrorMgr err;
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = jpeg_error_exit;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    raise(ErrorCode::format, "JPEG decode failed: " + path);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, f);
  ImageU8 img = decode_jpeg_common(cinfo);
  jpeg_destroy_decompress(&cinfo);
  return img;
}

}  // namespace

ImageU8 load_image(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  require(f != nullptr, ErrorCode::io, "cannot open file: " + path);
  unsigned char magic[4] = {0};
  const std::size_t got = std::fread(magic, 1, 4, f.get());
  require(got == 4, ErrorCode::io, "cannot read file header: " + path);
  std::rewind(f.get());
  if (magic[0] == 0x89 && magic[1] == 'P' && magic[2] == 'N' && magic[3] == 'G') {
    return load_png_file(path, f.get());
  }
  if (magic[0] == 0xFF && magic[1] == 0xD8) {
    return load_jpeg_file(path, f.get());
  }
  raise(ErrorCode::format, "unsupported image format (need PNG or JPEG): " + path);
}

void save_png(const std::string& path, const ImageU8& img) {
  img.validate();
  FilePtr f(std::fopen(path.c_str(), "wb"));
  require(f != nullptr, ErrorCode::io, "cannot open file for writing: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  require(png != nullptr, ErrorCode::internal, "libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    raise(ErrorCode::internal, "libpng info init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    raise(ErrorCode::io, "PNG encode failed: " + path);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(
        img.data.data() + static_cast<std::size_t>(y) * img.width * 3));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

ImageTensor to_unit(const ImageU8& img) {
  img.validate();
  ImageTensor t;
  t.height = img.height;
  t.width = img.width;
  t.range_tag = Range::unit;
  t.data.resize(img.data.size());
  for (std::size_t i = 0; i < img.data.size(); ++i) t.data[i] = img.data[i] / 255.0;
  return t;
}

ImageU8 to_u8(const ImageTensor& img) {
  ImageU8 out;
  out.height = img.height;
  out.width = img.width;
  out.data.resize(img.data.size());
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const double v = std::clamp(img.data[i], 0.0, 1.0) * 255.0;
    out.data[i] = static_cast<std::uint8_t>(std::lround(v));
  }
  return out;
}

namespace {

// Catmull-Rom weight, a = -0.5.
inline double cubic_weight(double t) {
  t = std::fabs(t);
  if (t <= 1.0) return ((1.5 * t - 2.5) * t) * t + 1.0;
  if (t < 2.0) return (((-0.5 * t + 2.5) * t) - 4.0) * t + 2.0;
  return 0.0;
}

// One separable pass along the given axis.
void resize_axis(const std::vector<double>& src, int src_n, int other_n,
                 int dst_n, bool along_x, std::vector<double>& dst) {
  const double scale = static_cast<double>(src_n) / dst_n;
  std::vector<int> idx(4);
  std::vector<double> w(4);
  for (int o = 0; o < dst_n; ++o) {
    const double center = (o + 0.5) * scale - 0.5;
    const int base = static_cast<int>(std::floor(center));
    const double frac = center - base;
    for (int k = 0; k < 4; ++k) {
      idx[k] = std::clamp(base - 1 + k, 0, src_n - 1);
      w[k] = cubic_weight(frac - (k - 1));
    }
    for (int j = 0; j < other_n; ++j) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int k = 0; k < 4; ++k) {
          const std::size_t src_off = along_x
              ? (static_cast<std::size_t>(j) * src_n + idx[k]) * 3 + c
              : (static_cast<std::size_t>(idx[k]) * other_n + j) * 3 + c;
          acc += w[k] * src[src_off];
        }
        const std::size_t dst_off = along_x
            ? (static_cast<std::size_t>(j) * dst_n + o) * 3 + c
            : (static_cast<std::size_t>(o) * other_n + j) * 3 + c;
        dst[dst_off] = acc;
      }
    }
  }
}

}  // namespace

ImageTensor resize_bicubic(const ImageTensor& img, int out_h, int out_w) {
  img.validate();
  require(out_h >= 1 && out_w >= 1, ErrorCode::invalid_argument,
          "resize_bicubic: output dims must be >= 1");

  // x pass then y pass; the tensor-product kernel makes the order irrelevant.
  std::vector<double> mid(static_cast<std::size_t>(img.height) * out_w * 3);
  resize_axis(img.data, img.width, img.height, out_w, /*along_x=*/true, mid);

  ImageTensor out;
  out.height = out_h;
  out.width = out_w;
  out.range_tag = img.range_tag;
  out.data.resize(static_cast<std::size_t>(out_h) * out_w * 3);
  resize_axis(mid, img.height, out_w, out_h, /*along_x=*/false, out.data);

  if (out.range_tag == Range::unit) {
    for (double& v : out.data) v = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

ImageTensor normalize(const ImageTensor& img, const NormStats& stats) {
  img.validate();
  require(img.range_tag == Range::unit, ErrorCode::invalid_argument,
          "normalize: input must be unit-range");
  for (int c = 0; c < 3; ++c)
    require(stats.std[c] > 0.0, ErrorCode::invalid_argument,
            "normalize: std components must be > 0");
  ImageTensor out = img;
  out.range_tag = Range::normalized;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const int c = static_cast<int>(i % 3);
    out.data[i] = (img.data[i] - stats.mean[c]) / stats.std[c];
  }
  return out;
}

ImageTensor denormalize(const ImageTensor& img, const NormStats& stats) {
  img.validate();
  require(img.range_tag == Range::normalized, ErrorCode::invalid_argument,
          "denormalize: input must be normalized");
  ImageTensor out = img;
  out.range_tag = Range::unit;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const int c = static_cast<int>(i % 3);
    // Clamp away sub-epsilon excursions so the unit tag stays honest.
    out.data[i] = std::clamp(img.data[i] * stats.std[c] + stats.mean[c], 0.0, 1.0);
  }
  return out;
}

}  // namespace fixthresh::imaging

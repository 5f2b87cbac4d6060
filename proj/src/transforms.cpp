#include "fixthresh/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <csetjmp>
#include <cstdio>
#include <cstdlib>
#include <mutex>

#include <fftw3.h>
#include <jpeglib.h>

#include "fixthresh/error.hpp"

namespace fixthresh::transforms {

using imaging::ImageU8;
using imaging::Range;

Condition Condition::clean() { return {ConditionKind::clean, 0.0}; }
Condition Condition::jpeg(int quality) {
  return {ConditionKind::jpeg, static_cast<double>(quality)};
}
Condition Condition::blur(double sigma) { return {ConditionKind::blur, sigma}; }
Condition Condition::downscale(double factor) {
  return {ConditionKind::downscale, factor};
}

void Condition::validate() const {
  switch (kind) {
    case ConditionKind::clean:
      return;
    case ConditionKind::jpeg: {
      const int q = static_cast<int>(parameter);
      require(parameter == q && q >= 1 && q <= 100, ErrorCode::invalid_argument,
              "Condition: jpeg quality must be an integer in [1,100]");
      return;
    }
    case ConditionKind::blur:
      require(parameter > 0.0, ErrorCode::invalid_argument,
              "Condition: blur sigma must be > 0");
      return;
    case ConditionKind::downscale:
      require(parameter > 0.0 && parameter <= 1.0, ErrorCode::invalid_argument,
              "Condition: downscale factor must be in (0,1]");
      return;
  }
  raise(ErrorCode::invalid_argument, "Condition: unknown kind");
}

std::string Condition::name() const {
  char buf[32];
  switch (kind) {
    case ConditionKind::clean:
      return "clean";
    case ConditionKind::jpeg:
      std::snprintf(buf, sizeof buf, "jpeg_q%d", static_cast<int>(parameter));
      return buf;
    case ConditionKind::blur:
      if (parameter == static_cast<int>(parameter)) {
        std::snprintf(buf, sizeof buf, "blur_s%d", static_cast<int>(parameter));
      } else {
        std::snprintf(buf, sizeof buf, "blur_s%g", parameter);
      }
      return buf;
    case ConditionKind::downscale:
      std::snprintf(buf, sizeof buf, "down_x%03d",
                    static_cast<int>(std::lround(parameter * 100)));
      return buf;
  }
  return "unknown";
}

std::string Condition::display_name() const {
  char buf[32];
  switch (kind) {
    case ConditionKind::clean:
      return "Clean";
    case ConditionKind::jpeg:
      std::snprintf(buf, sizeof buf, "JPEG Q%d", static_cast<int>(parameter));
      return buf;
    case ConditionKind::blur:
      std::snprintf(buf, sizeof buf, "Blur s=%g", parameter);
      return buf;
    case ConditionKind::downscale:
      std::snprintf(buf, sizeof buf, "Resize %.2fx", parameter);
      return buf;
  }
  return "unknown";
}

Condition Condition::from_name(const std::string& name) {
  Condition c;
  if (name == "clean") {
    c = Condition::clean();
  } else if (name.rfind("jpeg_q", 0) == 0) {
    c = Condition::jpeg(std::atoi(name.c_str() + 6));
  } else if (name.rfind("blur_s", 0) == 0) {
    c = Condition::blur(std::atof(name.c_str() + 6));
  } else if (name.rfind("down_x", 0) == 0) {
    c = Condition::downscale(std::atoi(name.c_str() + 6) / 100.0);
  } else {
    raise(ErrorCode::invalid_argument, "unknown condition name: " + name);
  }
  c.validate();
  return c;
}

ConditionGrid ConditionGrid::default_grid() {
  ConditionGrid g;
  g.conditions = {
      Condition::clean(),
      Condition::jpeg(95), Condition::jpeg(85), Condition::jpeg(75), Condition::jpeg(60),
      Condition::blur(3.0), Condition::blur(5.0), Condition::blur(7.0),
      Condition::downscale(0.75), Condition::downscale(0.5),
  };
  return g;
}

ConditionGrid ConditionGrid::from_names(const std::vector<std::string>& names) {
  ConditionGrid g;
  g.conditions.reserve(names.size());
  for (const auto& n : names) g.conditions.push_back(Condition::from_name(n));
  g.validate();
  return g;
}

void ConditionGrid::validate() const {
  require(!conditions.empty(), ErrorCode::invalid_argument, "ConditionGrid: empty");
  require(conditions.front().kind == ConditionKind::clean,
          ErrorCode::invalid_argument, "ConditionGrid: clean must come first");
  int n_clean = 0;
  for (const auto& c : conditions) {
    c.validate();
    n_clean += (c.kind == ConditionKind::clean);
  }
  require(n_clean == 1, ErrorCode::invalid_argument,
          "ConditionGrid: clean must appear exactly once");
}

namespace {

struct JpegErrorMgr {
  jpeg_error_mgr pub;
  jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* mgr = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  longjmp(mgr->jump, 1);
}

struct JpegBuffer {
  unsigned char* data = nullptr;
  unsigned long size = 0;
  ~JpegBuffer() { std::free(data); }
};

void encode_jpeg(const ImageU8& img, int quality, JpegBuffer& out) {
  jpeg_compress_struct cinfo;
  JpegErrorMgr err;
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = jpeg_error_exit;
  if (setjmp(err.jump)) {
    jpeg_destroy_compress(&cinfo);
    raise(ErrorCode::transform, "JPEG encode failed");
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, &out.data, &out.size);
  cinfo.image_width = static_cast<JDIMENSION>(img.width);
  cinfo.image_height = static_cast<JDIMENSION>(img.height);
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  // 4:2:0 below Q90, 4:4:4 at and above.
  const int samp = quality >= 90 ? 1 : 2;
  cinfo.comp_info[0].h_samp_factor = samp;
  cinfo.comp_info[0].v_samp_factor = samp;
  cinfo.comp_info[1].h_samp_factor = 1;
  cinfo.comp_info[1].v_samp_factor = 1;
  cinfo.comp_info[2].h_samp_factor = 1;
  cinfo.comp_info[2].v_samp_factor = 1;
  jpeg_start_compress(&cinfo, TRUE);
  while (cinfo.next_scanline < cinfo.image_height) {
    JSAMPROW row = const_cast<JSAMPROW>(
        img.data.data() + static_cast<std::size_t>(cinfo.next_scanline) * img.width * 3);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
}

ImageU8 decode_jpeg(const JpegBuffer& buf) {
  jpeg_decompress_struct cinfo;
  JpegErrorMgr err;
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = jpeg_error_exit;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    raise(ErrorCode::transform, "JPEG decode failed");
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, buf.data, buf.size);
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
  jpeg_destroy_decompress(&cinfo);
  return img;
}

}  // namespace

ImageTensor jpeg_roundtrip(const ImageTensor& img, int quality) {
  img.validate();
  require(img.range_tag == Range::unit, ErrorCode::invalid_argument,
          "jpeg_roundtrip: input must be unit-range");
  require(quality >= 1 && quality <= 100, ErrorCode::invalid_argument,
          "jpeg_roundtrip: quality outside [1,100]");
  JpegBuffer buf;
  encode_jpeg(imaging::to_u8(img), quality, buf);
  const ImageU8 decoded = decode_jpeg(buf);
  require(decoded.height == img.height && decoded.width == img.width,
          ErrorCode::transform, "jpeg_roundtrip: dimension change");
  return imaging::to_unit(decoded);
}

ImageTensor gaussian_blur(const ImageTensor& img, double sigma) {
  img.validate();
  require(sigma > 0.0, ErrorCode::invalid_argument,
          "gaussian_blur: sigma must be > 0");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
    sum += kernel[i + radius];
  }
  for (double& k : kernel) k /= sum;

  const int h = img.height, w = img.width;
  std::vector<double> mid(img.data.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          const int xx = std::clamp(x + i, 0, w - 1);
          acc += kernel[i + radius] * img.at(y, xx, c);
        }
        mid[(static_cast<std::size_t>(y) * w + x) * 3 + c] = acc;
      }
    }
  }
  ImageTensor out = img;
  const bool clamp_unit = img.range_tag == Range::unit;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          const int yy = std::clamp(y + i, 0, h - 1);
          acc += kernel[i + radius] * mid[(static_cast<std::size_t>(yy) * w + x) * 3 + c];
        }
        // Convex combination; clamp away rounding excursions only.
        out.at(y, x, c) = clamp_unit ? std::clamp(acc, 0.0, 1.0) : acc;
      }
    }
  }
  return out;
}

ImageTensor downscale(const ImageTensor& img, double factor) {
  img.validate();
  require(factor > 0.0 && factor <= 1.0, ErrorCode::invalid_argument,
          "downscale: factor must be in (0,1]");
  if (factor == 1.0) return img;
  const int small_h = std::max(1, static_cast<int>(std::lround(img.height * factor)));
  const int small_w = std::max(1, static_cast<int>(std::lround(img.width * factor)));
  const ImageTensor small = imaging::resize_bicubic(img, small_h, small_w);
  return imaging::resize_bicubic(small, img.height, img.width);
}

namespace {

// FFTW planning is not thread safe; execution of a ready plan is.
std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}

// Centered integer frequency for index k of an n-point transform.
inline int centered_freq(int k, int n) {
  return k <= n / 2 ? k : k - n;
}

}  // namespace

ImageTensor highpass_fft(const ImageTensor& img, double cutoff_frac) {
  img.validate();
  require(cutoff_frac > 0.0 && cutoff_frac < 0.5, ErrorCode::invalid_argument,
          "highpass_fft: cutoff_frac outside (0,0.5)");
  const int h = img.height, w = img.width;
  const double cutoff = cutoff_frac * std::min(h, w);
  const double cutoff_sq = cutoff * cutoff;
  const int w_half = w / 2 + 1;

  std::vector<double> plane(static_cast<std::size_t>(h) * w);
  std::vector<std::complex<double>> freq(static_cast<std::size_t>(h) * w_half);

  fftw_plan fwd, inv;
  {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex());
    fwd = fftw_plan_dft_r2c_2d(h, w, plane.data(),
                               reinterpret_cast<fftw_complex*>(freq.data()),
                               FFTW_ESTIMATE);
    inv = fftw_plan_dft_c2r_2d(h, w,
                               reinterpret_cast<fftw_complex*>(freq.data()),
                               plane.data(), FFTW_ESTIMATE);
  }

  ImageTensor out = img;
  out.range_tag = Range::signal;  // zero-mean output, can go negative
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        plane[static_cast<std::size_t>(y) * w + x] = img.at(y, x, c);
    fftw_execute(fwd);
    for (int fy = 0; fy < h; ++fy) {
      const int cy = centered_freq(fy, h);
      for (int fx = 0; fx < w_half; ++fx) {
        const int cx = centered_freq(fx, w);
        if (static_cast<double>(cy) * cy + static_cast<double>(cx) * cx < cutoff_sq) {
          freq[static_cast<std::size_t>(fy) * w_half + fx] = 0.0;
        }
      }
    }
    fftw_execute(inv);
    const double scale = 1.0 / (static_cast<double>(h) * w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out.at(y, x, c) = plane[static_cast<std::size_t>(y) * w + x] * scale;
  }

  {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(inv);
  }
  return out;
}

SpectralSplit spectral_energy_split(const ImageTensor& img, double cutoff_frac) {
  img.validate();
  const int h = img.height, w = img.width;
  const double cutoff = cutoff_frac * std::min(h, w);
  const double cutoff_sq = cutoff * cutoff;
  const int w_half = w / 2 + 1;

  std::vector<double> plane(static_cast<std::size_t>(h) * w);
  std::vector<std::complex<double>> freq(static_cast<std::size_t>(h) * w_half);
  fftw_plan fwd;
  {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex());
    fwd = fftw_plan_dft_r2c_2d(h, w, plane.data(),
                               reinterpret_cast<fftw_complex*>(freq.data()),
                               FFTW_ESTIMATE);
  }
  SpectralSplit split;
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        plane[static_cast<std::size_t>(y) * w + x] = img.at(y, x, c);
    fftw_execute(fwd);
    for (int fy = 0; fy < h; ++fy) {
      const int cy = centered_freq(fy, h);
      for (int fx = 0; fx < w_half; ++fx) {
        const int cx = centered_freq(fx, w);
        // The r2c half-plane holds one of each conjugate pair except the
        // self-conjugate columns; double the shared columns' weight.
        const bool self_conj = (fx == 0) || (w % 2 == 0 && fx == w_half - 1);
        const double weight = self_conj ? 1.0 : 2.0;
        const double power = weight * std::norm(freq[static_cast<std::size_t>(fy) * w_half + fx]);
        if (static_cast<double>(cy) * cy + static_cast<double>(cx) * cx < cutoff_sq) {
          split.inside += power;
        } else {
          split.outside += power;
        }
      }
    }
  }
  {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex());
    fftw_destroy_plan(fwd);
  }
  return split;
}

ImageTensor apply_condition(const ImageTensor& img, const Condition& cond) {
  cond.validate();
  switch (cond.kind) {
    case ConditionKind::clean:
      return img;
    case ConditionKind::jpeg:
      return jpeg_roundtrip(img, static_cast<int>(cond.parameter));
    case ConditionKind::blur:
      return gaussian_blur(img, cond.parameter);
    case ConditionKind::downscale:
      return downscale(img, cond.parameter);
  }
  raise(ErrorCode::invalid_argument, "apply_condition: unknown kind");
}

}  // namespace fixthresh::transforms

#ifndef FIXTHRESH_TRANSFORMS_HPP
#define FIXTHRESH_TRANSFORMS_HPP

#include <string>
#include <vector>

#include "fixthresh/image.hpp"

namespace fixthresh::transforms {

using imaging::ImageTensor;

enum class ConditionKind { clean, jpeg, blur, downscale };

// One degradation. parameter means: quality for jpeg, sigma in pixels for
// blur, scale factor in (0,1] for downscale; unused for clean.
struct Condition {
  ConditionKind kind = ConditionKind::clean;
  double parameter = 0.0;

  static Condition clean();
  static Condition jpeg(int quality);
  static Condition blur(double sigma);
  static Condition downscale(double factor);

  // Machine name, e.g. "clean", "jpeg_q60", "blur_s3", "down_x050".
  std::string name() const;
  // Human form, e.g. "JPEG Q60", "Blur s=3", "Resize 0.50x".
  std::string display_name() const;
  static Condition from_name(const std::string& name);

  void validate() const;
  bool operator==(const Condition& o) const {
    return kind == o.kind && parameter == o.parameter;
  }
};

// Ordered list of conditions; contains `clean` exactly once, first.
struct ConditionGrid {
  std::vector<Condition> conditions;

  // {clean, Q95, Q85, Q75, Q60, sigma 3/5/7, 0.75x, 0.5x}
  static ConditionGrid default_grid();
  static ConditionGrid from_names(const std::vector<std::string>& names);
  void validate() const;
};

// Baseline JPEG encode/decode round trip at the given quality. 4:2:0 chroma
// subsampling below quality 90, 4:4:4 at and above.
ImageTensor jpeg_roundtrip(const ImageTensor& img, int quality);

// Separable Gaussian, kernel radius ceil(3*sigma), normalized to sum 1,
// edge clamp.
ImageTensor gaussian_blur(const ImageTensor& img, double sigma);

// Bicubic resize to (round(H*f), round(W*f)) and back, so output dims equal
// input dims.
ImageTensor downscale(const ImageTensor& img, double factor);

// Per channel: 2-D FFT, zero every coefficient whose centered radial
// distance from DC is below cutoff_frac * min(H, W), inverse FFT, real part.
// The DC bin is always zeroed.
ImageTensor highpass_fft(const ImageTensor& img, double cutoff_frac = 0.06);

ImageTensor apply_condition(const ImageTensor& img, const Condition& cond);

// Spectral power (|F|^2) summed inside / outside the cutoff disk; used by
// tests and the synthetic-cue statistics.
struct SpectralSplit {
  double inside = 0.0;
  double outside = 0.0;
};
SpectralSplit spectral_energy_split(const ImageTensor& img, double cutoff_frac);

}  // namespace fixthresh::transforms

#endif

#ifndef FIXTHRESH_SYNTHGEN_HPP
#define FIXTHRESH_SYNTHGEN_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "fixthresh/image.hpp"

namespace fixthresh::synthgen {

// Synthetic two-class scenes with separable cues. The "real" class is smooth
// random blob scenes; the "ai" class adds (a) a high-frequency periodic grid
// whose energy dies under JPEG/blur — the forensic cue — and (b) a vertical
// blob-arrangement bias that survives them — the semantic cue. A global
// average pooled CNN is structurally blind to the arrangement bias, while a
// patch model with learned positions can read it, which is what lets the
// forensic-semantic spectrum show up at desk scale.
struct CueSpec {
  // Grid amplitude. The default sits below the JPEG Q60 quantization floor
  // (the cue survives Q95 but dies at Q60) while staying easy on clean images.
  double forensic_strength = 0.03;
  double forensic_period = 2.5;     // grid period in pixels
  double semantic_strength = 0.75;  // arrangement bias in [0,1]
  int image_size = 64;
  int n_per_class = 1500;
  std::uint64_t seed = 42;

  void validate() const;
};

struct CueStats {
  double band_energy = 0.0;  // spectral energy fraction near the grid frequency
  double layout_stat = 0.0;  // brightness-weighted vertical centroid in [0,1]
};

struct GeneratedItem {
  imaging::ImageU8 image;
  int label = 0;     // 1 = ai
  std::string name;  // file stem, e.g. "ai_000042"
  CueStats cues;
};

// Deterministic in spec.seed; per-image counter-derived RNG streams, so
// generation order does not matter.
std::vector<GeneratedItem> generate(const CueSpec& spec);
GeneratedItem generate_item(const CueSpec& spec, int label, int index);

// Cue statistics measurable on any image (degraded or not).
double band_energy_stat(const imaging::ImageTensor& img, double period);
double layout_stat(const imaging::ImageTensor& img);

struct ManifestEntry {
  std::string path;  // relative
  int label = 0;
};

struct SplitResult {
  std::vector<ManifestEntry> train;
  std::vector<ManifestEntry> val;
  std::vector<ManifestEntry> test;
};

// Label-stratified, seed-deterministic, disjoint partition. fractions must
// sum to 1.
SplitResult split(const std::vector<ManifestEntry>& manifest, double train_frac,
                  double val_frac, double test_frac, std::uint64_t seed);

// PNGs under dir/images plus manifest.csv, cues.csv, and per-split
// train/val/test manifests.
void write_dataset(const std::string& dir, const CueSpec& spec,
                   double train_frac, double val_frac, double test_frac);

}  // namespace fixthresh::synthgen

#endif

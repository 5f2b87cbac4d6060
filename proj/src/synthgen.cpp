#include "fixthresh/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>

#include "fixthresh/csv.hpp"
#include "fixthresh/error.hpp"
#include "fixthresh/transforms.hpp"

namespace fixthresh::synthgen {

using imaging::ImageTensor;
using imaging::ImageU8;

void CueSpec::validate() const {
  require(forensic_strength >= 0.0 && forensic_strength <= 1.0 &&
              semantic_strength >= 0.0 && semantic_strength <= 1.0,
          ErrorCode::invalid_argument, "CueSpec: strengths must lie in [0,1]");
  require(forensic_strength > 0.0 || semantic_strength > 0.0,
          ErrorCode::invalid_argument, "CueSpec: at least one cue must be active");
  require(forensic_period >= 2.0, ErrorCode::invalid_argument,
          "CueSpec: forensic_period must be >= 2 pixels");
  require(image_size >= 16, ErrorCode::invalid_argument, "CueSpec: image_size too small");
  require(n_per_class >= 1, ErrorCode::invalid_argument, "CueSpec: n_per_class >= 1");
}

namespace {

struct SplitMix64 {
  std::uint64_t state;
  explicit SplitMix64(std::uint64_t seed) : state(seed) {}
  std::uint64_t next() {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  std::uint64_t below(std::uint64_t n) { return next() % n; }
};

std::uint64_t mix_keys(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  SplitMix64 rng(a * 0xD1B54A32D192ED03ULL + b * 0x8CB92BA72F3D8DD7ULL + c);
  return rng.next();
}

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace

GeneratedItem generate_item(const CueSpec& spec, int label, int index) {
  spec.validate();
  require(label == 0 || label == 1, ErrorCode::invalid_argument,
          "generate_item: label must be 0 or 1");
  // Per-image stream so generation is order-independent.
  SplitMix64 rng(mix_keys(spec.seed, static_cast<std::uint64_t>(label) + 1,
                          static_cast<std::uint64_t>(index)));
  const int S = spec.image_size;
  ImageTensor img = ImageTensor::zeros(S, S, imaging::Range::unit);

  // Smooth background: a base level plus three low-frequency waves with a
  // gentle per-channel tint.
  const double base = 0.3 + 0.1 * rng.uniform();
  double wave_amp[3], wave_freq[3], wave_angle[3], wave_phase[3];
  for (int j = 0; j < 3; ++j) {
    wave_amp[j] = 0.03 + 0.04 * rng.uniform();
    wave_freq[j] = 0.5 + 1.0 * rng.uniform();  // cycles per image
    wave_angle[j] = kTwoPi * rng.uniform();
    wave_phase[j] = kTwoPi * rng.uniform();
  }
  double tint[3];
  for (int c = 0; c < 3; ++c) tint[c] = 0.95 + 0.1 * rng.uniform();

  for (int y = 0; y < S; ++y) {
    for (int x = 0; x < S; ++x) {
      double v = base;
      for (int j = 0; j < 3; ++j) {
        const double u = (x * std::cos(wave_angle[j]) + y * std::sin(wave_angle[j])) / S;
        v += wave_amp[j] * std::cos(kTwoPi * wave_freq[j] * u + wave_phase[j]);
      }
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = v * tint[c];
    }
  }

  // Soft-edged disk blobs. Both classes draw identical count/size/amplitude
  // distributions; only the vertical arrangement differs: ai blobs stay in
  // the top band of height (1 - 0.5*s), and a real image always places its
  // first blob below that band, so the arrangement alone identifies the
  // class while count/size statistics stay matched.
  const int n_blobs = 5 + static_cast<int>(rng.below(3));
  const double band = 1.0 - 0.5 * spec.semantic_strength;
  for (int bidx = 0; bidx < n_blobs; ++bidx) {
    const double cx = rng.uniform() * S;
    double cy;
    if (spec.semantic_strength > 0.0 && label == 1) {
      cy = rng.uniform() * S * band;
    } else if (spec.semantic_strength > 0.0 && bidx == 0) {
      cy = S * (band + rng.uniform() * (1.0 - band));
    } else {
      cy = rng.uniform() * S;
    }
    const double radius = 3.0 + 4.0 * rng.uniform();
    const double amp = 0.25 + 0.25 * rng.uniform();
    double color[3];
    for (int c = 0; c < 3; ++c) color[c] = 0.8 + 0.4 * rng.uniform();
    const double edge = 1.5;
    const int x0 = std::max(0, static_cast<int>(cx - radius - edge - 1));
    const int x1 = std::min(S - 1, static_cast<int>(cx + radius + edge + 1));
    const int y0 = std::max(0, static_cast<int>(cy - radius - edge - 1));
    const int y1 = std::min(S - 1, static_cast<int>(cy + radius + edge + 1));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double d = std::hypot(x - cx, y - cy);
        double t = std::clamp((radius + edge - d) / (2.0 * edge), 0.0, 1.0);
        t = t * t * (3.0 - 2.0 * t);
        if (t > 0.0)
          for (int c = 0; c < 3; ++c) img.at(y, x, c) += amp * color[c] * t;
      }
    }
  }

  // Forensic cue: high-frequency grid on the ai class, built from two
  // orthogonal gratings of period p with random orientation and phases. The
  // radial frequency is fixed (the band statistic keys on it) while the
  // orientation varies per image.
  if (label == 1 && spec.forensic_strength > 0.0) {
    const double p = spec.forensic_period;
    const double theta = kTwoPi * rng.uniform();
    const double ct = std::cos(theta), st = std::sin(theta);
    const double phi_u = kTwoPi * rng.uniform();
    const double phi_v = kTwoPi * rng.uniform();
    const double amp = spec.forensic_strength / std::sqrt(2.0);
    for (int y = 0; y < S; ++y) {
      for (int x = 0; x < S; ++x) {
        const double u = x * ct + y * st;
        const double v = -x * st + y * ct;
        const double g = amp * (std::sin(kTwoPi * u / p + phi_u) +
                                std::sin(kTwoPi * v / p + phi_v));
        for (int c = 0; c < 3; ++c) img.at(y, x, c) += g;
      }
    }
  }

  for (double& v : img.data) v = std::clamp(v, 0.0, 1.0);

  GeneratedItem item;
  item.label = label;
  char name[32];
  std::snprintf(name, sizeof name, "%s_%06d", label == 1 ? "ai" : "real", index);
  item.name = name;
  item.cues.band_energy = band_energy_stat(img, spec.forensic_period);
  item.cues.layout_stat = layout_stat(img);
  item.image = imaging::to_u8(img);
  return item;
}

std::vector<GeneratedItem> generate(const CueSpec& spec) {
  spec.validate();
  std::vector<GeneratedItem> items;
  items.resize(static_cast<std::size_t>(2) * spec.n_per_class);
  #pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(items.size()); ++i) {
    const int label = i < spec.n_per_class ? 0 : 1;
    const int index = label == 0 ? static_cast<int>(i)
                                 : static_cast<int>(i) - spec.n_per_class;
    items[i] = generate_item(spec, label, index);
  }
  return items;
}

double band_energy_stat(const ImageTensor& img, double period) {
  require(period >= 2.0, ErrorCode::invalid_argument, "band_energy_stat: period");
  const int S = std::min(img.height, img.width);
  const double grid_freq = std::hypot(S / period, S / period);
  // Fraction of non-DC energy in the annulus around the grid's radial
  // frequency, measured against everything outside a small DC disk.
  const auto in_band = transforms::spectral_energy_split(img, (grid_freq * 1.15) / S);
  const auto below_band = transforms::spectral_energy_split(img, (grid_freq * 0.85) / S);
  const auto non_dc = transforms::spectral_energy_split(img, 1.5 / S);
  const double annulus = below_band.outside - in_band.outside;
  const double total = non_dc.outside;
  return total > 0.0 ? annulus / total : 0.0;
}

double layout_stat(const ImageTensor& img) {
  // Vertical centroid of the above-mean brightness mass. Squared excess
  // weighting keeps the smooth background from diluting the blob positions.
  double mean = 0.0;
  for (double v : img.data) mean += v;
  mean /= static_cast<double>(img.data.size());
  double num = 0.0, den = 0.0;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double lum = 0.0;
      for (int c = 0; c < 3; ++c) lum += img.at(y, x, c);
      lum /= 3.0;
      const double excess = std::max(lum - mean, 0.0);
      const double w = excess * excess;
      num += w * y;
      den += w;
    }
  }
  if (den == 0.0) return 0.5;
  return (num / den) / std::max(1, img.height - 1);
}

SplitResult split(const std::vector<ManifestEntry>& manifest, double train_frac,
                  double val_frac, double test_frac, std::uint64_t seed) {
  require(std::fabs(train_frac + val_frac + test_frac - 1.0) < 1e-9,
          ErrorCode::generation, "split: fractions must sum to 1");
  require(!manifest.empty(), ErrorCode::generation, "split: empty manifest");

  SplitResult out;
  for (int label = 0; label <= 1; ++label) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < manifest.size(); ++i)
      if (manifest[i].label == label) idx.push_back(i);
    if (idx.empty()) continue;
    SplitMix64 rng(mix_keys(seed, 0x51u, static_cast<std::uint64_t>(label)));
    for (std::size_t i = idx.size() - 1; i > 0; --i) {
      const std::size_t j = rng.below(i + 1);
      std::swap(idx[i], idx[j]);
    }
    const std::size_t n = idx.size();
    const std::size_t n_train = static_cast<std::size_t>(std::lround(train_frac * n));
    const std::size_t n_val = static_cast<std::size_t>(std::lround(val_frac * n));
    require(n_train + n_val <= n, ErrorCode::generation, "split: fractions overflow");
    for (std::size_t k = 0; k < n; ++k) {
      const ManifestEntry& e = manifest[idx[k]];
      if (k < n_train) out.train.push_back(e);
      else if (k < n_train + n_val) out.val.push_back(e);
      else out.test.push_back(e);
    }
  }
  auto by_path = [](const ManifestEntry& a, const ManifestEntry& b) {
    return a.path < b.path;
  };
  std::sort(out.train.begin(), out.train.end(), by_path);
  std::sort(out.val.begin(), out.val.end(), by_path);
  std::sort(out.test.begin(), out.test.end(), by_path);
  return out;
}

namespace {

void write_manifest(const std::string& path,
                    const std::vector<ManifestEntry>& entries) {
  csv::Table t;
  t.header = {"path", "label"};
  for (const auto& e : entries)
    t.rows.push_back({e.path, std::to_string(e.label)});
  csv::write_file(path, t);
}

}  // namespace

void write_dataset(const std::string& dir, const CueSpec& spec,
                   double train_frac, double val_frac, double test_frac) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "images");
  fs::create_directories(fs::path(dir) / "train");
  fs::create_directories(fs::path(dir) / "val");
  fs::create_directories(fs::path(dir) / "test");

  const auto items = generate(spec);
  std::vector<ManifestEntry> manifest;
  csv::Table cues;
  cues.header = {"path", "label", "band_energy", "layout_stat"};
  for (const auto& item : items) {
    const std::string rel = "images/" + item.name + ".png";
    imaging::save_png((fs::path(dir) / rel).string(), item.image);
    manifest.push_back({rel, item.label});
    cues.rows.push_back({rel, std::to_string(item.label),
                         csv::format_double(item.cues.band_energy),
                         csv::format_double(item.cues.layout_stat)});
  }
  write_manifest((fs::path(dir) / "manifest.csv").string(), manifest);
  csv::write_file((fs::path(dir) / "cues.csv").string(), cues);

  const SplitResult splits = split(manifest, train_frac, val_frac, test_frac, spec.seed);
  auto relocate = [](std::vector<ManifestEntry> v) {
    for (auto& e : v) e.path = "../" + e.path;
    return v;
  };
  write_manifest((fs::path(dir) / "train" / "manifest.csv").string(),
                 relocate(splits.train));
  write_manifest((fs::path(dir) / "val" / "manifest.csv").string(),
                 relocate(splits.val));
  write_manifest((fs::path(dir) / "test" / "manifest.csv").string(),
                 relocate(splits.test));
}

}  // namespace fixthresh::synthgen

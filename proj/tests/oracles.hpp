// Independent reference implementations used to freeze expected values.
// Everything here recomputes results from first principles and must stay
// independent of the library code paths it checks.

#ifndef FIXTHRESH_TESTS_ORACLES_HPP
#define FIXTHRESH_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "fixthresh/metrics.hpp"

namespace oracles {

// AUROC by brute-force pair counting: P(s_pos > s_neg) + 0.5 P(equal).
inline double pair_count_auroc(const fixthresh::metrics::ScoreSet& s) {
  double wins = 0.0;
  std::int64_t pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.labels[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (s.labels[j] != 0) continue;
      ++pairs;
      if (s.scores[i] > s.scores[j]) wins += 1.0;
      else if (s.scores[i] == s.scores[j]) wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

struct SweepEntry {
  double tau;
  std::int64_t tp, fp, tn, fn;
  double tpr, fpr, precision, recall, f1, accuracy, youden;
};

// Every candidate threshold (distinct scores plus a sentinel above the max),
// each evaluated by direct counting over the whole set.
inline std::vector<SweepEntry> exhaustive_sweep(const fixthresh::metrics::ScoreSet& s) {
  std::vector<double> taus = s.scores;
  std::sort(taus.begin(), taus.end(), std::greater<>());
  taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
  taus.insert(taus.begin(), *std::max_element(s.scores.begin(), s.scores.end()) + 1.0);

  std::vector<SweepEntry> entries;
  for (double tau : taus) {
    SweepEntry e{};
    e.tau = tau;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const bool pred = s.scores[i] >= tau;
      if (s.labels[i] == 1) pred ? ++e.tp : ++e.fn;
      else pred ? ++e.fp : ++e.tn;
    }
    const std::int64_t pos = e.tp + e.fn, neg = e.fp + e.tn;
    e.tpr = pos ? static_cast<double>(e.tp) / pos : 0.0;
    e.fpr = neg ? static_cast<double>(e.fp) / neg : 0.0;
    if (e.tp + e.fp == 0) e.precision = (e.fn == 0) ? 1.0 : 0.0;
    else e.precision = static_cast<double>(e.tp) / (e.tp + e.fp);
    e.recall = pos ? static_cast<double>(e.tp) / pos : 1.0;
    e.f1 = (e.precision + e.recall) > 0.0
               ? 2.0 * e.precision * e.recall / (e.precision + e.recall) : 0.0;
    e.accuracy = static_cast<double>(e.tp + e.tn) / static_cast<double>(s.size());
    e.youden = e.tpr - e.fpr;
    entries.push_back(e);
  }
  return entries;
}

// Low-FPR rule: feasible (fpr <= target), maximize TPR, ties -> smaller FPR.
inline double sweep_low_fpr(const fixthresh::metrics::ScoreSet& s, double target) {
  const auto entries = exhaustive_sweep(s);
  const SweepEntry* best = nullptr;
  for (const auto& e : entries) {
    if (e.fpr > target) continue;
    if (!best || e.tpr > best->tpr || (e.tpr == best->tpr && e.fpr < best->fpr))
      best = &e;
  }
  return best->tau;
}

// Youden rule: maximize TPR - FPR, ties -> higher TPR, then smaller tau.
inline double sweep_youden(const fixthresh::metrics::ScoreSet& s) {
  const auto entries = exhaustive_sweep(s);
  const SweepEntry* best = nullptr;
  for (const auto& e : entries) {
    if (!best || e.youden > best->youden ||
        (e.youden == best->youden && e.tpr > best->tpr) ||
        (e.youden == best->youden && e.tpr == best->tpr && e.tau < best->tau))
      best = &e;
  }
  return best->tau;
}

// Best-F1 rule: maximize F1, ties -> higher recall, then smaller tau.
inline double sweep_best_f1(const fixthresh::metrics::ScoreSet& s) {
  const auto entries = exhaustive_sweep(s);
  const SweepEntry* best = nullptr;
  for (const auto& e : entries) {
    if (!best || e.f1 > best->f1 || (e.f1 == best->f1 && e.recall > best->recall) ||
        (e.f1 == best->f1 && e.recall == best->recall && e.tau < best->tau))
      best = &e;
  }
  return best->tau;
}

inline double sweep_best_accuracy_value(const fixthresh::metrics::ScoreSet& s) {
  const auto entries = exhaustive_sweep(s);
  double best = 0.0;
  for (const auto& e : entries) best = std::max(best, e.accuracy);
  return best;
}

// Seeded ScoreSet generator with deliberate score duplication.
struct MiniRng {
  std::uint64_t state;
  explicit MiniRng(std::uint64_t seed) : state(seed) {}
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

inline fixthresh::metrics::ScoreSet random_scoreset(MiniRng& rng, int max_n = 200) {
  fixthresh::metrics::ScoreSet s;
  const int n = 2 + static_cast<int>(rng.below(max_n - 1));
  // Quantized scores so ties actually happen.
  const int levels = 2 + static_cast<int>(rng.below(40));
  for (int i = 0; i < n; ++i) {
    s.scores.push_back(static_cast<double>(rng.below(levels)) / levels);
    s.labels.push_back(static_cast<int>(rng.below(2)));
  }
  // Ensure both classes are present.
  s.labels[0] = 0;
  s.labels[n - 1] = 1;
  return s;
}

// Catmull-Rom weight (a = -0.5).
inline double catmull_rom(double t) {
  t = std::fabs(t);
  if (t <= 1.0) return 1.5 * t * t * t - 2.5 * t * t + 1.0;
  if (t < 2.0) return -0.5 * t * t * t + 2.5 * t * t - 4.0 * t + 2.0;
  return 0.0;
}

// Direct (non-separable) bicubic evaluation with half-pixel centers and edge
// clamping, straight from the formula.
inline double bicubic_sample(const std::vector<double>& img, int h, int w, int ch,
                             double out_y, double out_x, int out_h, int out_w) {
  const double sy = static_cast<double>(h) / out_h;
  const double sx = static_cast<double>(w) / out_w;
  const double cy = (out_y + 0.5) * sy - 0.5;
  const double cx = (out_x + 0.5) * sx - 0.5;
  const int by = static_cast<int>(std::floor(cy));
  const int bx = static_cast<int>(std::floor(cx));
  double acc = 0.0;
  for (int m = -1; m <= 2; ++m) {
    for (int n = -1; n <= 2; ++n) {
      const int yy = std::clamp(by + m, 0, h - 1);
      const int xx = std::clamp(bx + n, 0, w - 1);
      const double wgt = catmull_rom(cy - (by + m)) * catmull_rom(cx - (bx + n));
      acc += wgt * img[(static_cast<std::size_t>(yy) * w + xx) * 3 + ch];
    }
  }
  return acc;
}

}  // namespace oracles

#endif

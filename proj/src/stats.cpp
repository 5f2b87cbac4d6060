#include "fixthresh/stats.hpp"

#include <cmath>
#include <limits>

#include "fixthresh/error.hpp"

namespace fixthresh::stats {

namespace {

// Continued-fraction evaluation of the regularized incomplete beta function
// (modified Lentz), even/odd coefficient pairs.
double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 3e-16;
  constexpr double kFpMin = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

double reg_inc_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_cf(a, b, x) / a;
  }
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

}  // namespace

double t_cdf(double t, int df) {
  require(df >= 1, ErrorCode::invalid_argument, "t_cdf: df must be >= 1");
  const double v = static_cast<double>(df);
  const double x = v / (v + t * t);
  const double half_tail = 0.5 * reg_inc_beta(0.5 * v, 0.5, x);
  return t >= 0.0 ? 1.0 - half_tail : half_tail;
}

double t_quantile(double p, int df) {
  require(p > 0.0 && p < 1.0, ErrorCode::invalid_argument,
          "t_quantile: p outside (0,1)");
  require(df >= 1, ErrorCode::invalid_argument, "t_quantile: df must be >= 1");
  if (p == 0.5) return 0.0;
  // Solve for the upper-half quantile, then mirror.
  const double q = p > 0.5 ? p : 1.0 - p;
  double lo = 0.0, hi = 2.0;
  while (t_cdf(hi, df) < q) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (t_cdf(mid, df) < q) lo = mid; else hi = mid;
    if (hi - lo < 1e-13 * (1.0 + hi)) break;
  }
  const double t = 0.5 * (lo + hi);
  return p > 0.5 ? t : -t;
}

SummaryRow summarize(const std::vector<double>& values) {
  const int n = static_cast<int>(values.size());
  require(n >= 2, ErrorCode::stats, "summarize: need at least 2 values");
  double mean = 0.0;
  for (double v : values) {
    require(std::isfinite(v), ErrorCode::stats, "summarize: non-finite value");
    mean += v;
  }
  mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double stddev = std::sqrt(ss / (n - 1));
  return summarize_from_moments(mean, stddev, n);
}

SummaryRow summarize(const SeedSeries& series) {
  return summarize(series.values);
}

SummaryRow summarize_from_moments(double mean, double stddev, int n) {
  require(n >= 2, ErrorCode::stats, "summarize: need n >= 2");
  require(stddev >= 0.0, ErrorCode::stats, "summarize: negative std");
  SummaryRow row;
  row.mean = mean;
  row.stddev = stddev;
  row.n = n;
  const double half_width = t_quantile(0.975, n - 1) * stddev / std::sqrt(n);
  row.ci_lo = mean - half_width;
  row.ci_hi = mean + half_width;
  return row;
}

}  // namespace fixthresh::stats

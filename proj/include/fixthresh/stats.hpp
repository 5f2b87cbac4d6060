#ifndef FIXTHRESH_STATS_HPP
#define FIXTHRESH_STATS_HPP

#include <string>
#include <vector>

namespace fixthresh::stats {

// One metric observed across seeds.
struct SeedSeries {
  std::string metric;
  std::vector<double> values;
  std::vector<int> seeds;
};

// mean +- t(0.975, n-1) * std / sqrt(n), sample std (n-1 denominator).
struct SummaryRow {
  double mean = 0.0;
  double stddev = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  int n = 0;
};

// Inverse CDF of Student's t. Bisection on the regularized incomplete beta
// form of the CDF; absolute accuracy well below 1e-6 for df <= 30.
double t_quantile(double p, int df);

// Student's t CDF, exposed for tests.
double t_cdf(double t, int df);

SummaryRow summarize(const SeedSeries& series);
SummaryRow summarize(const std::vector<double>& values);

// 95% CI from an already-computed mean/std pair (e.g. printed table values).
SummaryRow summarize_from_moments(double mean, double stddev, int n);

}  // namespace fixthresh::stats

#endif

#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace ionchan {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  std::size_t count = 0;
};

MeanSe mean_se(std::span<const double> x);
double sample_sd(std::span<const double> x);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // root-mean-square residual in log space
  int points = 0;
};

/// Least squares of log(value) on log(h). Throws on nonpositive input or < 2 points.
SlopeFit loglog_slope(std::span<const std::pair<double, double>> points);

/// sup_x |F_n(x) - (1 - e^{-rate x})|.
double ks_statistic_exponential(std::vector<double> samples, double rate);
/// Asymptotic 1% critical value of the one-sample KS statistic.
double ks_critical_1pct(std::size_t n);

struct HistogramBin {
  double lo;
  double hi;
  std::int64_t count;
};
std::vector<HistogramBin> histogram(std::span<const double> x, int bins);

/// Pearson chi-square statistic of `observed` against expected counts.
double chi_square(std::span<const double> observed, std::span<const double> expected);

}  // namespace ionchan

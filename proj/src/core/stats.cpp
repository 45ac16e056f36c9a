#include "ionchan/stats.hpp"

#include <algorithm>
#include <cmath>

#include "ionchan/error.hpp"

namespace ionchan {

MeanSe mean_se(std::span<const double> x) {
  MeanSe r;
  r.count = x.size();
  if (x.empty()) return r;
  double s = 0.0;
  for (double v : x) s += v;
  r.mean = s / x.size();
  if (x.size() > 1) r.se = sample_sd(x) / std::sqrt(static_cast<double>(x.size()));
  return r;
}

double sample_sd(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= x.size();
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / (x.size() - 1));
}

SlopeFit loglog_slope(std::span<const std::pair<double, double>> points) {
  if (points.size() < 2) throw ModelError("slope fit needs at least two points");
  double sx = 0, sy = 0;
  for (const auto& [h, v] : points) {
    if (!(h > 0.0) || !(v > 0.0)) throw ModelError("log-log fit needs positive h and values");
    sx += std::log(h);
    sy += std::log(v);
  }
  const double m = static_cast<double>(points.size());
  const double mx = sx / m, my = sy / m;
  double sxx = 0, sxy = 0;
  for (const auto& [h, v] : points) {
    const double dx = std::log(h) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(v) - my);
  }
  if (sxx == 0.0) throw ModelError("log-log fit needs at least two distinct h values");
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (const auto& [h, v] : points) {
    const double e = std::log(v) - (fit.intercept + fit.slope * std::log(h));
    rss += e * e;
  }
  fit.residual = std::sqrt(rss / m);
  fit.points = static_cast<int>(points.size());
  return fit;
}

double ks_statistic_exponential(std::vector<double> samples, double rate) {
  if (samples.empty()) throw ModelError("KS statistic needs samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t q = 0; q < samples.size(); ++q) {
    const double F = 1.0 - std::exp(-rate * samples[q]);
    d = std::max({d, (q + 1) / n - F, F - q / n});
  }
  return d;
}

double ks_critical_1pct(std::size_t n) { return 1.628 / std::sqrt(static_cast<double>(n)); }

std::vector<HistogramBin> histogram(std::span<const double> x, int bins) {
  if (bins < 1) throw ModelError("histogram needs at least one bin");
  std::vector<HistogramBin> out;
  if (x.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
  double lo = *lo_it, hi = *hi_it;
  if (hi == lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double width = (hi - lo) / bins;
  for (int b = 0; b < bins; ++b) out.push_back({lo + b * width, b == bins - 1 ? hi : lo + (b + 1) * width, 0});
  for (double v : x) {
    int b = static_cast<int>((v - lo) / width);
    out[std::clamp(b, 0, bins - 1)].count++;
  }
  return out;
}

double chi_square(std::span<const double> observed, std::span<const double> expected) {
  if (observed.size() != expected.size()) throw ModelError("chi-square needs matching bins");
  double s = 0.0;
  for (std::size_t q = 0; q < observed.size(); ++q) {
    if (expected[q] <= 0.0) continue;
    const double d = observed[q] - expected[q];
    s += d * d / expected[q];
  }
  return s;
}

}  // namespace ionchan

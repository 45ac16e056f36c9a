#include "ionchan/averaging.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <shared_mutex>

#include "ionchan/error.hpp"
#include "ionchan/rng.hpp"

namespace ionchan {

int window_size(double h, double p) {
  if (!(h > 0.0)) throw ModelError("window size needs h > 0");
  if (!(p >= 0.0 && p < 1.0)) throw ModelError("averaging exponent p must lie in [0, 1)");
  const double half = std::pow(h, p - 1.0) / 2.0;
  // pow can land just below an exact integer (e.g. 64^{1/2} / 2 = 4)
  const double m = std::floor(half * (1.0 + 1e-12));
  if (m > 1e8) throw ModelError("averaging window is unreasonably large");
  return 2 * static_cast<int>(m) + 1;
}

int clamp_window(int N, int n, bool* clamped) {
  const int largest = n % 2 == 1 ? n : n - 1;
  const bool c = N > largest;
  if (clamped) *clamped = c;
  return c ? std::max(1, largest) : N;
}

double bump_ramp(double h, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= h) return 1.0;
  const double rise = std::exp(-h / x);
  const double fall = std::exp(-1.0 / (1.0 - x / h));
  return rise / (fall + rise);
}

namespace {

double bump_at_distance(double h, int N, double d) {
  const double r = h * (N - 1) / 2.0;
  const double tol = 1e-9 * h;
  if (d <= r + tol) return 1.0;
  if (d >= r + h - tol) return 0.0;
  return bump_ramp(h, r + h - d);
}

}  // namespace

double bump_eval(double h, double p, double x) {
  if (!(h > 0.0 && h < 1.0)) throw ModelError("bump needs 0 < h < 1");
  return bump_at_distance(h, window_size(h, p), std::fabs(x));
}

double bump_eval(double h, double p, double x, double L) {
  if (!(h > 0.0 && h < 1.0)) throw ModelError("bump needs 0 < h < 1");
  return bump_at_distance(h, window_size(h, p), std::fabs(std::remainder(x, L)));
}

// ---------------------------------------------------------------------------
// local averages

double LocalAverage::eval(double x, int i, int j) const {
  const int M = (N - 1) / 2;
  const double c = x / h;
  const long lo = static_cast<long>(std::floor(c)) - M - 1;
  const long hi = static_cast<long>(std::ceil(c)) + M + 1;
  double acc = 0.0;
  for (long s = lo; s <= hi; ++s) {
    long k = s % n;
    if (k < 0) k += n;
    const auto zk = z[(static_cast<std::size_t>(k) * types + i) * configs + j];
    if (!zk) continue;
    acc += bump_at_distance(h, N, std::fabs(x - h * static_cast<double>(s)));
  }
  return acc / N;
}

LocalAverage local_average_window(const SystemState& state, const CircleLattice& lattice, int N) {
  if (N < 1 || N % 2 == 0) throw ModelError("averaging window must be a positive odd count");
  const int n = lattice.n();
  if (state.size() != n || !state.one_hot_valid()) throw ModelError("occupancy does not match the lattice");
  LocalAverage avg;
  avg.n = n;
  avg.types = state.types;
  avg.configs = state.configs;
  avg.h = lattice.h();
  avg.L = lattice.L();
  avg.N = clamp_window(N, n, &avg.clamped);
  if (avg.clamped)
    avg.warning = "averaging window " + std::to_string(N) + " exceeds the circle; clamped to " +
                  std::to_string(avg.N);
  avg.z = state.one_hot();
  const int I = state.types, J = state.configs, M = (avg.N - 1) / 2;
  const std::size_t w = static_cast<std::size_t>(I) * J;
  avg.zbar.assign(static_cast<std::size_t>(n) * w, 0.0);
  // sliding window counts per (i, j)
  std::vector<int> count(w, 0);
  for (int d = -M; d <= M; ++d) {
    const int k = lattice.wrap(d);
    for (std::size_t q = 0; q < w; ++q) count[q] += avg.z[k * w + q];
  }
  for (int k = 0; k < n; ++k) {
    for (std::size_t q = 0; q < w; ++q) avg.zbar[k * w + q] = static_cast<double>(count[q]) / avg.N;
    const int out = lattice.wrap(static_cast<long>(k) - M), in = lattice.wrap(static_cast<long>(k) + M + 1);
    for (std::size_t q = 0; q < w; ++q) count[q] += avg.z[in * w + q] - avg.z[out * w + q];
  }
  return avg;
}

LocalAverage local_average(const SystemState& state, const CircleLattice& lattice, double p) {
  auto avg = local_average_window(state, lattice, window_size(lattice.h(), p));
  avg.p = p;
  return avg;
}

// ---------------------------------------------------------------------------
// corrector

std::vector<double> corrector_profile(int N, int n) {
  if (N < 1 || N % 2 == 0) throw ModelError("corrector window must be odd, got " + std::to_string(N));
  if (N > n) throw ModelError("corrector window exceeds the lattice");
  std::vector<double> nu(n, 0.0);
  const int M = (N - 1) / 2;
  // sum_{j=1}^{M} sum_{l,i=1}^{j} [k = l - i]: offset d collects (M - |d|)(M - |d| + 1) / 2
  for (int d = -(M - 1); d <= M - 1; ++d) {
    const int m = M - std::abs(d);
    int k = d % n;
    if (k < 0) k += n;
    nu[k] -= static_cast<double>(m) * (m + 1) / 2.0 / N;
  }
  return nu;
}

double profile_l1(const std::vector<double>& nu) {
  const int n = static_cast<int>(nu.size());
  long double worst = 0.0L;
  for (int k = 0; k < n; ++k) {
    long double s = 0.0L;
    for (int m = 0; m < n; ++m) s += std::fabs(static_cast<long double>(nu[((k - m) % n + n) % n]));
    worst = std::max(worst, s);
  }
  return static_cast<double>(worst);
}

std::shared_ptr<const std::vector<double>> cached_corrector_profile(int N, int n) {
  static std::shared_mutex mutex;
  static std::map<std::pair<int, int>, std::shared_ptr<const std::vector<double>>> cache;
  const auto key = std::make_pair(N, n);
  {
    std::shared_lock lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  auto profile = std::make_shared<const std::vector<double>>(corrector_profile(N, n));
  std::unique_lock lock(mutex);
  return cache.emplace(key, std::move(profile)).first->second;
}

CorrectorCeilings corrector_ceilings(int N, double D) {
  const double q = static_cast<double>(N) * N - 1.0;
  return {q / 24.0 / D, q / (4.0 * N) / D, q / (8.0 * N) / D};
}

namespace {

void check_rhs(const SystemState& state, const LocalAverage& avg) {
  const std::size_t w = static_cast<std::size_t>(avg.types) * avg.configs;
  for (std::size_t q = 0; q < w; ++q) {
    double s = 0.0;
    for (int k = 0; k < avg.n; ++k) s += avg.zbar[k * w + q] - avg.z[k * w + q];
    if (std::fabs(s) > 1e-9 * avg.n)
      throw ModelError("corrector right-hand side does not sum to zero (sum = " + std::to_string(s) + ")");
  }
  if (state.size() != avg.n || state.types != avg.types || state.configs != avg.configs)
    throw ModelError("local average does not match the occupancy field");
}

void subtract_mean(std::vector<double>& chi, int n, std::size_t w) {
  for (std::size_t q = 0; q < w; ++q) {
    double mean = 0.0;
    for (int k = 0; k < n; ++k) mean += chi[k * w + q];
    mean /= n;
    for (int k = 0; k < n; ++k) chi[k * w + q] -= mean;
  }
}

void solve_direct(const SystemState& state, const LocalAverage& avg, CorrectorField& f) {
  const int n = avg.n;
  const std::size_t w = static_cast<std::size_t>(avg.types) * avg.configs;
  const auto nu = cached_corrector_profile(avg.N, n);
  std::vector<std::pair<int, double>> taps;
  for (int d = 0; d < n; ++d)
    if ((*nu)[d] != 0.0) taps.emplace_back(d, (*nu)[d]);
  const auto z = state.one_hot();
  for (int k = 0; k < n; ++k) {
    for (const auto& [d, value] : taps) {
      // nu_m[k] = nu_0[k - m]; m = k - d
      int m = k - d;
      if (m < 0) m += n;
      const double c = -value / f.D;
      for (std::size_t q = 0; q < w; ++q)
        if (z[m * w + q]) f.chi[k * w + q] += c;
    }
  }
  subtract_mean(f.chi, n, w);
}

void solve_spectral(const LocalAverage& avg, CorrectorField& f) {
  const int n = avg.n;
  const std::size_t w = static_cast<std::size_t>(avg.types) * avg.configs;
  const int modes = n / 2 + 1;
  double* in = fftw_alloc_real(n);
  fftw_complex* spec = fftw_alloc_complex(modes);
  static std::mutex plan_mutex;  // planner calls are not thread safe
  fftw_plan forward, backward;
  {
    std::lock_guard lock(plan_mutex);
    forward = fftw_plan_dft_r2c_1d(n, in, spec, FFTW_ESTIMATE);
    backward = fftw_plan_dft_c2r_1d(n, spec, in, FFTW_ESTIMATE);
  }
  for (std::size_t q = 0; q < w; ++q) {
    for (int k = 0; k < n; ++k) in[k] = avg.zbar[k * w + q] - avg.z[k * w + q];
    fftw_execute(forward);
    spec[0][0] = spec[0][1] = 0.0;
    for (int m = 1; m < modes; ++m) {
      const double eig = f.D * (2.0 * std::cos(2.0 * std::numbers::pi * m / n) - 2.0);
      spec[m][0] /= eig * n;
      spec[m][1] /= eig * n;
    }
    fftw_execute(backward);
    for (int k = 0; k < n; ++k) f.chi[k * w + q] = in[k];
  }
  {
    std::lock_guard lock(plan_mutex);
    fftw_destroy_plan(forward);
    fftw_destroy_plan(backward);
  }
  fftw_free(in);
  fftw_free(spec);
  subtract_mean(f.chi, n, w);
}

}  // namespace

CorrectorField solve_corrector(const SystemState& state, const LocalAverage& avg, const CircleLattice& lattice,
                               CorrectorMethod method) {
  if (!(lattice.D() > 0.0)) throw ModelError("corrector needs D > 0");
  if (lattice.n() != avg.n) throw ModelError("local average does not match the lattice");
  check_rhs(state, avg);
  CorrectorField f;
  f.n = avg.n;
  f.types = avg.types;
  f.configs = avg.configs;
  f.N = avg.N;
  f.D = lattice.D();
  f.chi.assign(avg.zbar.size(), 0.0);
  if (method == CorrectorMethod::Automatic)
    method = avg.n < 512 ? CorrectorMethod::Direct : CorrectorMethod::Spectral;
  if (method == CorrectorMethod::Direct) solve_direct(state, avg, f);
  else solve_spectral(avg, f);
  return f;
}

double corrector_residual(const CorrectorField& chi, const LocalAverage& avg) {
  const int n = chi.n;
  const std::size_t w = static_cast<std::size_t>(chi.types) * chi.configs;
  double worst = 0.0;
  for (int k = 0; k < n; ++k) {
    const int l = k == 0 ? n - 1 : k - 1, r = k == n - 1 ? 0 : k + 1;
    for (std::size_t q = 0; q < w; ++q) {
      const double lap = chi.chi[r * w + q] - 2.0 * chi.chi[k * w + q] + chi.chi[l * w + q];
      const double target = avg.zbar[k * w + q] - avg.z[k * w + q];
      worst = std::max(worst, std::fabs(chi.D * lap - target));
    }
  }
  return worst;
}

BoundReport corrector_bound_report(int n, double p, int trials, std::uint64_t seed, double L, double D) {
  if (trials < 1) throw ModelError("bound report needs at least one trial");
  const CircleLattice lattice(n, L, D);
  BoundReport rep;
  rep.n = n;
  rep.p = p;
  rep.N = clamp_window(window_size(lattice.h(), p), n, &rep.clamped);
  rep.ceiling = corrector_ceilings(rep.N, D);
  Rng rng(seed);
  SystemState state(n, 1, 2);
  const double slack = 1e-12;
  for (int t = 0; t < trials; ++t) {
    for (int k = 0; k < n; ++k) state.occupancy(k, 0) = rng.index(2);
    const auto before = solve_corrector(state, local_average_window(state, lattice, rep.N), lattice);
    double mx = 0.0, diff = 0.0;
    for (int k = 0; k < n; ++k) {
      const int r = k == n - 1 ? 0 : k + 1;
      for (int j = 0; j < 2; ++j) {
        mx = std::max(mx, std::fabs(before.at(k, 0, j)));
        diff = std::max(diff, std::fabs(before.at(r, 0, j) - before.at(k, 0, j)));
      }
    }
    const int site = rng.index(n);
    state.occupancy(site, 0) = 1 - state.occupancy(site, 0);
    const auto after = solve_corrector(state, local_average_window(state, lattice, rep.N), lattice);
    double jump = 0.0;
    for (std::size_t q = 0; q < after.chi.size(); ++q) jump = std::max(jump, std::fabs(after.chi[q] - before.chi[q]));
    rep.violations += (mx > rep.ceiling.l1 + slack) + (diff > rep.ceiling.diff + slack) +
                      (jump > rep.ceiling.jump + slack);
    rep.observed_l1 = std::max(rep.observed_l1, mx);
    rep.observed_diff = std::max(rep.observed_diff, diff);
    rep.observed_jump = std::max(rep.observed_jump, jump);
  }
  return rep;
}

}  // namespace ionchan

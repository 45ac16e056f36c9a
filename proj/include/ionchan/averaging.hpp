#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ionchan/lattice.hpp"
#include "ionchan/model.hpp"

namespace ionchan {

/// N = 2 floor(h^{p-1} / 2) + 1, the number of compartments in one averaging window.
int window_size(double h, double p);

/// Largest odd count <= n; sets *clamped when N had to shrink.
int clamp_window(int N, int n, bool* clamped = nullptr);

/// Smooth ramp on [0, h]: 0 at 0, 1 at h.
double bump_ramp(double h, double x);

/// Phi_{h,p} on the line, centered at 0: 1 for |x| <= r, 0 for |x| >= r + h,
/// ramp in between, with r = h (N - 1) / 2. Lattice points hit the plateaus exactly.
double bump_eval(double h, double p, double x);
/// Same on the circle of circumference L (x measured from the center).
double bump_eval(double h, double p, double x, double L);

/// Window averages of the occupancy. zbar is n x I x J, row-major.
struct LocalAverage {
  int n = 0;
  int types = 0;
  int configs = 0;
  int N = 1;
  double h = 0.0;
  double p = 0.0;
  double L = 0.0;
  bool clamped = false;
  std::string warning;
  std::vector<double> zbar;
  std::vector<std::uint8_t> z;  // one-hot copy of the input, for the interpolant

  double at(int k, int i, int j) const {
    return zbar[(static_cast<std::size_t>(k) * types + i) * configs + j];
  }
  /// (1/N) sum_k Phi(x - hk) Z[k][i][j]: equals at(k, i, j) on lattice points.
  double eval(double x, int i, int j) const;
};

LocalAverage local_average(const SystemState& state, const CircleLattice& lattice, double p);
/// With an explicit (odd) window.
LocalAverage local_average_window(const SystemState& state, const CircleLattice& lattice, int N);

/// nu_0 of the window-N corrector on an n-site circle, indexed by offset
/// (entry k holds offset k mod n). nu_m is its rotation by m. Satisfies
/// nu[k+1] - 2 nu[k] + nu[k-1] = delta_0[k] - (1/N) 1{|k| <= (N-1)/2}.
std::vector<double> corrector_profile(int N, int n);

/// max_k sum_m |nu_m[k]| over all rotations nu_m of the profile, accumulated in
/// extended precision so the identity with (N^2 - 1) / 24 holds to 1e-12 at N in the hundreds.
double profile_l1(const std::vector<double>& nu);

/// Shared, cached copy of corrector_profile; safe for concurrent callers.
std::shared_ptr<const std::vector<double>> cached_corrector_profile(int N, int n);

/// Solution of D (chi[k+1] - 2 chi[k] + chi[k-1]) = Zbar[k] - Z[k] with zero mean per slice.
struct CorrectorField {
  int n = 0;
  int types = 0;
  int configs = 0;
  int N = 1;
  double D = 1.0;
  std::vector<double> chi;  // n x I x J

  double at(int k, int i, int j) const {
    return chi[(static_cast<std::size_t>(k) * types + i) * configs + j];
  }
};

enum class CorrectorMethod { Automatic, Direct, Spectral };

/// Direct: chi = -(1/D) sum_m Z[m] nu_m, then mean-subtracted (O(nN)).
/// Spectral: Fourier inversion of the discrete Laplacian on Zbar - Z (O(n log n)).
/// Automatic picks Direct below n = 512.
CorrectorField solve_corrector(const SystemState& state, const LocalAverage& avg, const CircleLattice& lattice,
                               CorrectorMethod method = CorrectorMethod::Automatic);

/// Max over (k, i, j) of |D (chi[k+1] - 2 chi[k] + chi[k-1]) - (Zbar - Z)|.
double corrector_residual(const CorrectorField& chi, const LocalAverage& avg);

struct CorrectorCeilings {
  double l1;    // (N^2 - 1) / 24 / D
  double diff;  // (N^2 - 1) / (4N) / D
  double jump;  // (N^2 - 1) / (8N) / D
};
CorrectorCeilings corrector_ceilings(int N, double D = 1.0);

struct BoundReport {
  int n = 0;
  double p = 0.0;
  int N = 1;
  bool clamped = false;
  CorrectorCeilings ceiling{};
  double observed_l1 = 0.0;
  double observed_diff = 0.0;
  double observed_jump = 0.0;
  std::int64_t violations = 0;
};

/// Random one-hot fields (I = 1, J = 2): max |chi|, max |chi[k+1] - chi[k]| and
/// the largest change of chi under one random single-site flip, per trial.
BoundReport corrector_bound_report(int n, double p, int trials, std::uint64_t seed, double L = 1.0,
                                   double D = 1.0);

}  // namespace ionchan

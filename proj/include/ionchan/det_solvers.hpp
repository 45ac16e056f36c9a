#pragma once

#include <span>
#include <vector>

#include "ionchan/model.hpp"

namespace ionchan {

/// D (v[k+1] - 2 v[k] + v[k-1]) / h^2 with periodic indices.
std::vector<double> discrete_laplacian(std::span<const double> v, const CircleLattice& lattice);

/// Solves (I - c S) x = r, S the unscaled periodic second-difference matrix,
/// c >= 0. Uses a Neumann series when 4c is tiny and a cyclic Thomas sweep
/// (Sherman-Morrison) otherwise. `x` may alias `r`.
class CirculantSolver {
 public:
  enum class Method { Automatic, Neumann, Thomas };

  explicit CirculantSolver(int n = 0) { resize(n); }
  void resize(int n);
  void solve(std::span<const double> r, double c, std::span<double> x,
             Method method = Method::Automatic);

 private:
  void solve_thomas(std::span<const double> r, double c, std::span<double> x);
  void solve_neumann(std::span<const double> r, double c, std::span<double> x);

  int n_ = 0;
  std::vector<double> work_, z_, cp_, term_;
};

/// Advances V with the occupancy frozen using a second-order IMEX scheme:
/// Crank-Nicolson for the stiff diffusion, explicit trapezoid (Heun) for the
/// reaction sum. Buffers are reused across calls; one instance per trajectory.
class FrozenIntegrator {
 public:
  FrozenIntegrator(const CircleLattice& lattice, const ChannelModel& model);

  /// Integrates state.V from state.t to t_end in equal substeps <= dt_max.
  void advance(SystemState& state, double t_end, double dt_max);
  /// One IMEX step of length dt.
  void step(SystemState& state, double dt);

  std::int64_t steps_taken() const noexcept { return steps_; }

 private:
  void reaction(const SystemState& state, std::span<const double> v, std::span<double> out) const;

  const CircleLattice* lattice_;
  const ChannelModel* model_;
  CirculantSolver solver_;
  std::vector<double> r0_, r1_, rhs_, vstar_;
  std::int64_t steps_ = 0;
};

/// Free-function form: advances `state` to t_end and returns the new V.
std::vector<double> integrate_frozen(SystemState& state, const CircleLattice& lattice,
                                     const ChannelModel& model, double t_end, double dt_max);

/// Recorded mean-field solution: voltage U and occupancy fractions S.
struct MeanFieldTrajectory {
  int n = 0;
  int types = 0;
  int configs = 0;
  std::vector<double> times;
  std::vector<double> U;  // rows of n
  std::vector<double> S;  // rows of n*I*J; empty when occupancy was not kept

  std::size_t rows() const noexcept { return times.size(); }
  std::span<const double> voltage(std::size_t row) const {
    return {U.data() + row * n, static_cast<std::size_t>(n)};
  }
  std::span<const double> occupancy(std::size_t row) const {
    const std::size_t w = static_cast<std::size_t>(n) * types * configs;
    return {S.data() + row * w, w};
  }
  /// Linear interpolation of U at time t (clamped to the recorded span).
  void voltage_at(double t, std::span<double> out) const;
  void occupancy_at(double t, std::span<double> out) const;
};

struct MeanFieldOptions {
  int record_stride = 1;      // keep every k-th step (first and last always kept)
  bool keep_occupancy = true;
};

/// Integrates dU/dt = Laplacian(U) + sum S g(U), dS[k][i]/dt = A_i(U[k])^T S[k][i]
/// with the same IMEX scheme; S initialized from z0(hk), U from v0(hk).
MeanFieldTrajectory solve_mean_field(const CircleLattice& lattice, const ChannelModel& model,
                                     const InitialData& init, double T, double dt,
                                     MeanFieldOptions options = {});

/// Same, from explicit initial arrays (S is n*I*J).
MeanFieldTrajectory solve_mean_field(const CircleLattice& lattice, const ChannelModel& model,
                                     std::vector<double> U0, std::vector<double> S0, double T,
                                     double dt, MeanFieldOptions options = {});

/// Transition density of Brownian motion with variance 2Dt on the circle of
/// length L: (4 pi D t)^{-1/2} sum_k exp(-(y - x + L k)^2 / (4 D t)).
double heat_kernel(double t, double x, double y, double D, double L);

/// e^{t D Laplacian} applied to samples on the uniform grid x_j = j L / m, by
/// periodic quadrature against heat_kernel. Falls back to the exact Fourier
/// multiplier when the kernel is narrower than two grid cells.
std::vector<double> apply_heat_semigroup(std::span<const double> samples, double t, double D, double L);

}  // namespace ionchan

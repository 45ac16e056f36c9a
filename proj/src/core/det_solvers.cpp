#include "ionchan/det_solvers.hpp"

#include "ionchan/error.hpp"

#include <algorithm>
#include <string>
#include <cmath>
#include <complex>
#include <numbers>

namespace ionchan {

std::vector<double> discrete_laplacian(std::span<const double> v, const CircleLattice& lattice) {
  const int n = static_cast<int>(v.size());
  std::vector<double> out(n, 0.0);
  if (n < 2) return out;
  const double scale = lattice.D() / (lattice.h() * lattice.h());
  for (int k = 0; k < n; ++k) {
    const double left = v[k == 0 ? n - 1 : k - 1];
    const double right = v[k == n - 1 ? 0 : k + 1];
    out[k] = scale * (right - 2.0 * v[k] + left);
  }
  return out;
}

// ---------------------------------------------------------------------------
// circulant solve

void CirculantSolver::resize(int n) {
  n_ = n;
  work_.assign(n, 0.0);
  z_.assign(n, 0.0);
  cp_.assign(n, 0.0);
  term_.assign(n, 0.0);
}

void CirculantSolver::solve(std::span<const double> r, double c, std::span<double> x, Method method) {
  const int n = static_cast<int>(r.size());
  if (n != n_) resize(n);
  if (c == 0.0 || n == 1) {
    if (x.data() != r.data()) std::copy(r.begin(), r.end(), x.begin());
    return;
  }
  if (n == 2) {
    // S = [[-2, 2], [2, -2]]
    const double a = 1.0 + 2.0 * c, b = -2.0 * c;
    const double det = a * a - b * b;
    const double r0 = r[0], r1 = r[1];
    x[0] = (a * r0 - b * r1) / det;
    x[1] = (a * r1 - b * r0) / det;
    return;
  }
  if (method == Method::Automatic) method = 4.0 * c <= 1e-2 ? Method::Neumann : Method::Thomas;
  if (method == Method::Neumann && 4.0 * c >= 0.5) method = Method::Thomas;
  if (method == Method::Neumann) solve_neumann(r, c, x);
  else solve_thomas(r, c, x);
}

void CirculantSolver::solve_neumann(std::span<const double> r, double c, std::span<double> x) {
  // x = sum_k (cS)^k r, evaluated by Horner; terms shrink at least like (4c)^k.
  const int n = n_;
  const int terms = std::clamp(static_cast<int>(std::ceil(std::log(1e-17) / std::log(4.0 * c))), 1, 60);
  std::copy(r.begin(), r.end(), work_.begin());
  std::copy(r.begin(), r.end(), term_.begin());
  double* cur = term_.data();
  double* nxt = z_.data();
  const double* rr = work_.data();
  for (int it = 0; it < terms; ++it) {
    nxt[0] = rr[0] + c * (cur[1] - 2.0 * cur[0] + cur[n - 1]);
    for (int k = 1; k < n - 1; ++k) nxt[k] = rr[k] + c * (cur[k + 1] - 2.0 * cur[k] + cur[k - 1]);
    nxt[n - 1] = rr[n - 1] + c * (cur[0] - 2.0 * cur[n - 1] + cur[n - 2]);
    std::swap(cur, nxt);
  }
  std::copy(cur, cur + n, x.begin());
}

void CirculantSolver::solve_thomas(std::span<const double> r, double c, std::span<double> x) {
  // Cyclic tridiagonal (off-diagonals a, diagonal b, corners a) by Sherman-Morrison.
  const int n = n_;
  const double a = -c, b = 1.0 + 2.0 * c;
  const double gamma = -b;
  auto diag = [&](int i) {
    if (i == 0) return b - gamma;
    if (i == n - 1) return b - a * a / gamma;
    return b;
  };
  double* d = work_.data();  // modified right-hand side for x
  double* z = z_.data();     // modified right-hand side for the correction vector
  double* cp = cp_.data();
  double m = diag(0);
  cp[0] = a / m;
  d[0] = r[0] / m;
  z[0] = gamma / m;
  for (int i = 1; i < n; ++i) {
    m = diag(i) - a * cp[i - 1];
    const double inv = 1.0 / m;
    cp[i] = a * inv;
    d[i] = (r[i] - a * d[i - 1]) * inv;
    const double u = i == n - 1 ? a : 0.0;
    z[i] = (u - a * z[i - 1]) * inv;
  }
  for (int i = n - 2; i >= 0; --i) {
    d[i] -= cp[i] * d[i + 1];
    z[i] -= cp[i] * z[i + 1];
  }
  const double fact = (d[0] + a * d[n - 1] / gamma) / (1.0 + z[0] + a * z[n - 1] / gamma);
  for (int i = 0; i < n; ++i) x[i] = d[i] - fact * z[i];
}

// ---------------------------------------------------------------------------
// frozen-occupancy integration

FrozenIntegrator::FrozenIntegrator(const CircleLattice& lattice, const ChannelModel& model)
    : lattice_(&lattice), model_(&model), solver_(lattice.n()) {
  const int n = lattice.n();
  r0_.resize(n);
  r1_.resize(n);
  rhs_.resize(n);
  vstar_.resize(n);
}

void FrozenIntegrator::reaction(const SystemState& state, std::span<const double> v,
                                std::span<double> out) const {
  const int n = static_cast<int>(v.size());
  for (int k = 0; k < n; ++k) out[k] = model_->reaction(state.occupied(k), v[k]);
}

void FrozenIntegrator::step(SystemState& state, double dt) {
  const int n = state.size();
  auto& v = state.V;
  const double c = n >= 2 ? dt * lattice_->D() / (2.0 * lattice_->h() * lattice_->h()) : 0.0;
  reaction(state, v, r0_);
  if (n >= 2 && c > 0.0) {
    rhs_[0] = v[0] + c * (v[1] - 2.0 * v[0] + v[n - 1]) + dt * r0_[0];
    for (int k = 1; k < n - 1; ++k) rhs_[k] = v[k] + c * (v[k + 1] - 2.0 * v[k] + v[k - 1]) + dt * r0_[k];
    if (n > 1) rhs_[n - 1] = v[n - 1] + c * (v[0] - 2.0 * v[n - 1] + v[n - 2]) + dt * r0_[n - 1];
    solver_.solve(rhs_, c, vstar_);
  } else {
    for (int k = 0; k < n; ++k) vstar_[k] = v[k] + dt * r0_[k];
  }
  reaction(state, vstar_, r1_);
  double check = 0.0;
  for (int k = 0; k < n; ++k) rhs_[k] = 0.5 * dt * (r1_[k] - r0_[k]);
  if (c > 0.0) solver_.solve(rhs_, c, rhs_);
  for (int k = 0; k < n; ++k) {
    v[k] = vstar_[k] + rhs_[k];
    check += v[k];
  }
  state.t += dt;
  ++steps_;
  if (!std::isfinite(check))
    throw IntegrationError("voltage became non-finite at t = " + std::to_string(state.t), state.t);
}

void FrozenIntegrator::advance(SystemState& state, double t_end, double dt_max) {
  const double span = t_end - state.t;
  if (!(span > 0.0)) return;
  if (!(dt_max > 0.0)) throw IntegrationError("dt_max must be positive", state.t);
  // the slack keeps round-off in t_end from adding a near-empty substep
  const auto substeps = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(span / dt_max - 1e-9)));
  const double dt = span / static_cast<double>(substeps);
  for (std::int64_t s = 0; s < substeps; ++s) step(state, dt);
  state.t = t_end;
}

std::vector<double> integrate_frozen(SystemState& state, const CircleLattice& lattice,
                                     const ChannelModel& model, double t_end, double dt_max) {
  FrozenIntegrator integrator(lattice, model);
  integrator.advance(state, t_end, dt_max);
  return state.V;
}

// ---------------------------------------------------------------------------
// mean field

void MeanFieldTrajectory::voltage_at(double t, std::span<double> out) const {
  const std::size_t rows_ = rows();
  if (rows_ == 0) return;
  if (t <= times.front() || rows_ == 1) {
    std::copy_n(U.begin(), n, out.begin());
    return;
  }
  if (t >= times.back()) {
    auto last = voltage(rows_ - 1);
    std::copy(last.begin(), last.end(), out.begin());
    return;
  }
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t hi = static_cast<std::size_t>(it - times.begin());
  const std::size_t lo = hi - 1;
  const double w = (t - times[lo]) / (times[hi] - times[lo]);
  auto a = voltage(lo), b = voltage(hi);
  for (int k = 0; k < n; ++k) out[k] = (1.0 - w) * a[k] + w * b[k];
}

void MeanFieldTrajectory::occupancy_at(double t, std::span<double> out) const {
  if (S.empty()) throw ModelError("mean-field occupancy was not recorded");
  const std::size_t w = static_cast<std::size_t>(n) * types * configs;
  if (t <= times.front() || rows() == 1) {
    std::copy_n(S.begin(), w, out.begin());
    return;
  }
  if (t >= times.back()) {
    auto last = occupancy(rows() - 1);
    std::copy(last.begin(), last.end(), out.begin());
    return;
  }
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t hi = static_cast<std::size_t>(it - times.begin());
  const std::size_t lo = hi - 1;
  const double f = (t - times[lo]) / (times[hi] - times[lo]);
  auto a = occupancy(lo), b = occupancy(hi);
  for (std::size_t q = 0; q < w; ++q) out[q] = (1.0 - f) * a[q] + f * b[q];
}

namespace {

constexpr double kSimplexTol = 1e-8;

class MeanFieldStepper {
 public:
  MeanFieldStepper(const CircleLattice& lattice, const ChannelModel& model)
      : lattice_(lattice), model_(model), solver_(lattice.n()) {
    const int n = lattice.n();
    const std::size_t w = static_cast<std::size_t>(n) * model.types() * model.configs();
    r0_.resize(n);
    r1_.resize(n);
    rhs_.resize(n);
    ustar_.resize(n);
    f0_.resize(w);
    f1_.resize(w);
    sstar_.resize(w);
  }

  void step(std::vector<double>& U, std::vector<double>& S, double dt) {
    const int n = lattice_.n();
    const double c = n >= 2 ? dt * lattice_.D() / (2.0 * lattice_.h() * lattice_.h()) : 0.0;
    evaluate(U, S, r0_, f0_);
    if (c > 0.0) {
      for (int k = 0; k < n; ++k) {
        const double l = U[k == 0 ? n - 1 : k - 1], r = U[k == n - 1 ? 0 : k + 1];
        rhs_[k] = U[k] + c * (r - 2.0 * U[k] + l) + dt * r0_[k];
      }
      solver_.solve(rhs_, c, ustar_);
    } else {
      for (int k = 0; k < n; ++k) ustar_[k] = U[k] + dt * r0_[k];
    }
    for (std::size_t q = 0; q < S.size(); ++q) sstar_[q] = S[q] + dt * f0_[q];
    evaluate(ustar_, sstar_, r1_, f1_);
    for (int k = 0; k < n; ++k) rhs_[k] = 0.5 * dt * (r1_[k] - r0_[k]);
    if (c > 0.0) solver_.solve(rhs_, c, rhs_);
    for (int k = 0; k < n; ++k) U[k] = ustar_[k] + rhs_[k];
    for (std::size_t q = 0; q < S.size(); ++q) S[q] += 0.5 * dt * (f0_[q] + f1_[q]);
  }

 private:
  void evaluate(std::span<const double> U, std::span<const double> S, std::span<double> r,
                std::span<double> f) const {
    const int n = lattice_.n(), I = model_.types(), J = model_.configs();
    std::fill(f.begin(), f.end(), 0.0);
    for (int k = 0; k < n; ++k) {
      const double v = U[k];
      double react = 0.0;
      for (int i = 0; i < I; ++i) {
        const std::size_t base = (static_cast<std::size_t>(k) * I + i) * J;
        for (int a = 0; a < J; ++a) {
          const double sa = S[base + a];
          if (model_.has_drift(i, a)) react += sa * model_.drift(i, a, v);
          for (const auto& e : model_.outgoing(i, a)) {
            const double flow = sa * model_.rate_slot(e.slot, v);
            f[base + e.to] += flow;
            f[base + a] -= flow;
          }
        }
      }
      r[k] = react;
    }
  }

  const CircleLattice& lattice_;
  const ChannelModel& model_;
  CirculantSolver solver_;
  std::vector<double> r0_, r1_, rhs_, ustar_, f0_, f1_, sstar_;
};

void check_simplex(const std::vector<double>& S, int J, double t) {
  for (std::size_t base = 0; base < S.size(); base += J) {
    double total = 0.0;
    for (int j = 0; j < J; ++j) {
      const double s = S[base + j];
      if (!(s >= -kSimplexTol))
        throw IntegrationError("mean-field occupancy went negative at t = " + std::to_string(t) +
                                   "; reduce the step size",
                               t);
      total += s;
    }
    if (!(std::fabs(total - 1.0) <= kSimplexTol))
      throw IntegrationError("mean-field occupancy left the simplex at t = " + std::to_string(t) +
                                 "; reduce the step size",
                             t);
  }
}

}  // namespace

MeanFieldTrajectory solve_mean_field(const CircleLattice& lattice, const ChannelModel& model,
                                     std::vector<double> U, std::vector<double> S, double T,
                                     double dt, MeanFieldOptions options) {
  if (!(dt > 0.0)) throw IntegrationError("mean-field step must be positive", 0.0);
  if (!(T >= 0.0)) throw IntegrationError("mean-field horizon must be nonnegative", 0.0);
  const int n = lattice.n(), I = model.types(), J = model.configs();
  if (U.size() != static_cast<std::size_t>(n) || S.size() != static_cast<std::size_t>(n) * I * J)
    throw ModelError("mean-field initial arrays have the wrong size");
  check_simplex(S, J, 0.0);
  MeanFieldTrajectory traj;
  traj.n = n;
  traj.types = I;
  traj.configs = J;
  auto record = [&](double t) {
    traj.times.push_back(t);
    traj.U.insert(traj.U.end(), U.begin(), U.end());
    if (options.keep_occupancy) traj.S.insert(traj.S.end(), S.begin(), S.end());
  };
  record(0.0);
  const auto steps = static_cast<std::int64_t>(std::ceil(T / dt - 1e-9));
  if (steps == 0) return traj;
  const double step = T / static_cast<double>(steps);
  const int stride = std::max(1, options.record_stride);
  MeanFieldStepper stepper(lattice, model);
  for (std::int64_t s = 1; s <= steps; ++s) {
    stepper.step(U, S, step);
    const double t = s == steps ? T : step * static_cast<double>(s);
    for (int k = 0; k < n; ++k)
      if (!std::isfinite(U[k]))
        throw IntegrationError("mean-field voltage became non-finite at t = " + std::to_string(t), t);
    check_simplex(S, J, t);
    if (s % stride == 0 || s == steps) record(t);
  }
  return traj;
}

MeanFieldTrajectory solve_mean_field(const CircleLattice& lattice, const ChannelModel& model,
                                     const InitialData& init, double T, double dt,
                                     MeanFieldOptions options) {
  const int n = lattice.n(), I = model.types(), J = model.configs();
  if (!init.v0) throw ModelError("initial data has no voltage profile");
  if (init.z0.size() != static_cast<std::size_t>(I) * J)
    throw ModelError("initial occupation table must have I*J entries");
  std::vector<double> U(n), S(static_cast<std::size_t>(n) * I * J);
  for (int k = 0; k < n; ++k) {
    const double x = lattice.position(k);
    U[k] = init.v0(x);
    for (int q = 0; q < I * J; ++q) {
      const auto& f = init.z0[q];
      S[static_cast<std::size_t>(k) * I * J + q] = f ? f(x) : 0.0;
    }
  }
  return solve_mean_field(lattice, model, std::move(U), std::move(S), T, dt, options);
}

// ---------------------------------------------------------------------------
// heat kernel

double heat_kernel(double t, double x, double y, double D, double L) {
  if (!(t > 0.0)) throw ModelError("heat kernel needs t > 0");
  if (!(D > 0.0) || !(L > 0.0)) throw ModelError("heat kernel needs D > 0 and L > 0");
  const double s = 4.0 * D * t;
  const double d = std::remainder(y - x, L);
  double sum = std::exp(-d * d / s);
  for (int k = 1;; ++k) {
    const double a = d + L * k, b = d - L * k;
    const double pair = std::exp(-a * a / s) + std::exp(-b * b / s);
    sum += pair;
    if (pair <= 1e-16 * sum) break;
    if (k > 100000) break;
  }
  return sum / std::sqrt(std::numbers::pi * s);
}

std::vector<double> apply_heat_semigroup(std::span<const double> samples, double t, double D, double L) {
  if (!(t >= 0.0)) throw ModelError("heat semigroup needs t >= 0");
  const int m = static_cast<int>(samples.size());
  std::vector<double> out(samples.begin(), samples.end());
  if (t == 0.0 || m == 0 || D == 0.0) return out;
  const double dx = L / m;
  if (std::sqrt(2.0 * D * t) < 2.0 * dx) {
    // kernel unresolved on the grid: apply e^{-D (2 pi q / L)^2 t} mode by mode
    using cd = std::complex<double>;
    std::vector<cd> coef(m);
    for (int q = 0; q < m; ++q) {
      cd acc = 0.0;
      for (int j = 0; j < m; ++j) acc += samples[j] * std::polar(1.0, -2.0 * std::numbers::pi * q * j / m);
      const int wave = q <= m / 2 ? q : q - m;
      const double kx = 2.0 * std::numbers::pi * wave / L;
      coef[q] = acc * std::exp(-D * kx * kx * t) / static_cast<double>(m);
    }
    for (int j = 0; j < m; ++j) {
      cd acc = 0.0;
      for (int q = 0; q < m; ++q) acc += coef[q] * std::polar(1.0, 2.0 * std::numbers::pi * q * j / m);
      out[j] = acc.real();
    }
    return out;
  }
  std::vector<double> w(m);
  for (int d = 0; d < m; ++d) w[d] = dx * heat_kernel(t, 0.0, d * dx, D, L);
  for (int i = 0; i < m; ++i) {
    double acc = 0.0;
    for (int j = 0; j < m; ++j) {
      int d = j - i;
      if (d < 0) d += m;
      acc += w[d] * samples[j];
    }
    out[i] = acc;
  }
  return out;
}

}  // namespace ionchan

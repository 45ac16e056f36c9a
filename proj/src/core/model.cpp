#include "ionchan/model.hpp"

#include <cmath>

#include "ionchan/det_solvers.hpp"
#include "ionchan/rng.hpp"

namespace ionchan {

ChannelModel::ChannelModel(std::string name, int types, int configs)
    : name_(std::move(name)), I_(types), J_(configs) {
  if (types < 1 || configs < 1) throw ModelError("model needs I >= 1 and J >= 1");
  g_.resize(static_cast<std::size_t>(I_) * J_);
  rates_.resize(static_cast<std::size_t>(I_) * J_ * J_);
  out_.resize(static_cast<std::size_t>(I_) * J_);
  declared_bound_.resize(I_);
}

void ChannelModel::set_drift(int i, int j, ScalarFn g) {
  if (i < 0 || i >= I_ || j < 0 || j >= J_) throw ModelError("drift index out of range");
  g_[idx(i, j)] = std::move(g);
}

void ChannelModel::set_rate(int i, int a, int b, ScalarFn rate) {
  if (i < 0 || i >= I_ || a < 0 || a >= J_ || b < 0 || b >= J_)
    throw ModelError("rate index out of range");
  if (a == b) throw ModelError("diagonal rates are derived, not set");
  const bool had = static_cast<bool>(rates_[ridx(i, a, b)]);
  rates_[ridx(i, a, b)] = std::move(rate);
  auto& edges = out_[idx(i, a)];
  const int slot = static_cast<int>(ridx(i, a, b));
  if (!had && rates_[slot]) edges.push_back({b, slot});
  if (had && !rates_[slot]) std::erase_if(edges, [&](const Edge& e) { return e.to == b; });
}

void ChannelModel::set_range(VoltageRange range) {
  if (!(range.min <= range.max)) throw ModelError("voltage range must satisfy min <= max");
  range_ = range;
}

void ChannelModel::set_declared_bound(int i, double lambda) {
  if (i < 0 || i >= I_) throw ModelError("type index out of range");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ModelError("declared bound must be finite");
  declared_bound_[i] = lambda;
}

void ChannelModel::set_thinning_slots(int slots) {
  if (slots < 1) throw ModelError("thinning slots must be positive");
  slots_ = slots;
}

double ChannelModel::checked(const ScalarFn& f, double v, int i, int a, int b) const {
  if (!f) return 0.0;
  const double r = f(v);
  if (!(r >= 0.0)) {
    throw ModelError("rate A_{" + std::to_string(i + 1) + ",(" + std::to_string(a + 1) + "," +
                     std::to_string(b + 1) + ")}(" + std::to_string(v) + ") = " +
                     std::to_string(r) + " is negative or not a number");
  }
  return r;
}

double ChannelModel::rate_slot(int slot, double v) const {
  const int b = slot % J_;
  const int a = (slot / J_) % J_;
  const int i = slot / (J_ * J_);
  return checked(rates_[slot], v, i, a, b);
}

double ChannelModel::exit_rate(int i, int a, double v) const {
  double total = 0.0;
  for (const Edge& e : outgoing(i, a)) total += rate_slot(e.slot, v);
  return total;
}

bool ChannelModel::stochastic(int i) const {
  for (int a = 0; a < J_; ++a)
    if (!out_[idx(i, a)].empty()) return true;
  return false;
}

RateMatrix transition_rates(const ChannelModel& model, double v, int i) {
  if (i < 0 || i >= model.types()) throw ModelError("type index out of range");
  const int J = model.configs();
  RateMatrix m{J, std::vector<double>(static_cast<std::size_t>(J) * J, 0.0)};
  for (int a = 0; a < J; ++a) {
    double row = 0.0;
    for (int b = 0; b < J; ++b) {
      if (a == b) continue;
      const double r = model.rate(i, a, b, v);
      m.entries[static_cast<std::size_t>(a) * J + b] = r;
      row += r;
    }
    m.entries[static_cast<std::size_t>(a) * J + a] = -row;
  }
  return m;
}

std::vector<std::uint8_t> SystemState::one_hot() const {
  const int n = size();
  std::vector<std::uint8_t> z(static_cast<std::size_t>(n) * types * configs, 0);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < types; ++i)
      z[(static_cast<std::size_t>(k) * types + i) * configs + occupancy(k, i)] = 1;
  return z;
}

bool SystemState::one_hot_valid() const {
  if (occ.size() != V.size() * static_cast<std::size_t>(types)) return false;
  for (int c : occ)
    if (c < 0 || c >= configs) return false;
  return true;
}

std::vector<double> drift_rhs(const CircleLattice& lattice, const ChannelModel& model,
                              const SystemState& state) {
  auto out = discrete_laplacian(state.V, lattice);
  for (int k = 0; k < state.size(); ++k) out[k] += model.reaction(state.occupied(k), state.V[k]);
  return out;
}

namespace {

constexpr double kSimplexTol = 1e-12;

int draw_category(std::span<const double> weights, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  int last = 0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    if (weights[j] <= 0.0) continue;
    acc += weights[j];
    last = static_cast<int>(j);
    if (u < acc) return last;
  }
  return last;  // u landed in the rounding gap at the top
}

}  // namespace

SystemState sample_initial_state(const CircleLattice& lattice, const ChannelModel& model,
                                 const InitialData& init, Rng& rng) {
  const int n = lattice.n();
  const int I = model.types();
  const int J = model.configs();
  SystemState s(n, I, J);
  if (!init.v0) throw ModelError("initial data has no voltage profile");
  if (!init.joint && init.z0.size() != static_cast<std::size_t>(I) * J)
    throw ModelError("initial occupation table must have I*J entries");
  std::vector<double> w(J);
  for (int k = 0; k < n; ++k) {
    const double x = lattice.position(k);
    s.V[k] = init.v0(x);
    if (init.joint) {
      init.joint(x, rng, {s.occ.data() + static_cast<std::size_t>(k) * I, static_cast<std::size_t>(I)});
      continue;
    }
    for (int i = 0; i < I; ++i) {
      double total = 0.0;
      for (int j = 0; j < J; ++j) {
        const auto& f = init.z0[static_cast<std::size_t>(i) * J + j];
        w[j] = f ? f(x) : 0.0;
        if (!(w[j] >= -kSimplexTol && w[j] <= 1.0 + kSimplexTol))
          throw ModelError("initial probability z0[" + std::to_string(i + 1) + "][" +
                           std::to_string(j + 1) + "] = " + std::to_string(w[j]) +
                           " outside [0,1] at x = " + std::to_string(x));
        total += w[j];
      }
      if (std::fabs(total - 1.0) > kSimplexTol)
        throw ModelError("initial probabilities of type " + std::to_string(i + 1) + " sum to " +
                         std::to_string(total) + " at x = " + std::to_string(x));
      s.occupancy(k, i) = draw_category(w, rng);
    }
  }
  if (!s.one_hot_valid()) throw ModelError("joint initial sampler produced an invalid configuration");
  return s;
}

SystemState sample_initial_state(const CircleLattice& lattice, const ChannelModel& model,
                                 const InitialData& init, std::uint64_t seed) {
  Rng rng(seed);
  return sample_initial_state(lattice, model, init, rng);
}

}  // namespace ionchan

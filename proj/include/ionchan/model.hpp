#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ionchan/lattice.hpp"

namespace ionchan {

class Rng;

using ScalarFn = std::function<double(double)>;

struct VoltageRange {
  double min = 0.0;
  double max = 1.0;
  friend bool operator==(const VoltageRange&, const VoltageRange&) = default;
};

/// Dense J x J rate matrix, row-major; row a holds the rates out of configuration a.
struct RateMatrix {
  int J = 0;
  std::vector<double> entries;
  double operator()(int a, int b) const { return entries[static_cast<std::size_t>(a) * J + b]; }
};

/// The (I, J) channel structure: per-configuration drifts g_{i,j}(v) and
/// off-diagonal transition rates A_{i,(a,b)}(v). Unset functions are zero.
/// Indices are zero-based here; files and the config use one-based i, j.
class ChannelModel {
 public:
  struct Edge {
    int to;
    int slot;  // index into the rate table
  };

  ChannelModel(std::string name, int types, int configs);

  const std::string& name() const noexcept { return name_; }
  int types() const noexcept { return I_; }
  int configs() const noexcept { return J_; }

  void set_drift(int i, int j, ScalarFn g);
  void set_rate(int i, int a, int b, ScalarFn rate);
  void set_range(VoltageRange range);
  /// Fixes the per-site bound lambda_i instead of deriving it from the range.
  void set_declared_bound(int i, double lambda);
  /// Number of bounding Poisson slots charged per stochastic type and site
  /// (2 reproduces the Lambda = 2 n L lambda accounting of the two-state model).
  void set_thinning_slots(int slots);

  VoltageRange range() const noexcept { return range_; }
  std::optional<double> declared_bound(int i) const { return declared_bound_[i]; }
  int thinning_slots() const noexcept { return slots_; }

  bool has_drift(int i, int j) const { return static_cast<bool>(g_[idx(i, j)]); }
  double drift(int i, int j, double v) const {
    const auto& g = g_[idx(i, j)];
    return g ? g(v) : 0.0;
  }

  bool has_rate(int i, int a, int b) const { return static_cast<bool>(rates_[ridx(i, a, b)]); }
  /// A_{i,(a,b)}(v) for a != b; throws ModelError on a negative value.
  double rate(int i, int a, int b, double v) const { return checked(rates_[ridx(i, a, b)], v, i, a, b); }
  double rate_slot(int slot, double v) const;
  std::span<const Edge> outgoing(int i, int a) const { return out_[idx(i, a)]; }
  /// Total exit rate of configuration a of type i.
  double exit_rate(int i, int a, double v) const;
  /// True when type i has at least one nonzero rate function.
  bool stochastic(int i) const;

  /// Sum over types of g_{i, occupied}(v) for one compartment.
  double reaction(std::span<const int> occupied, double v) const {
    double r = 0.0;
    for (int i = 0; i < I_; ++i) {
      const auto& g = g_[idx(i, occupied[i])];
      if (g) r += g(v);
    }
    return r;
  }

 private:
  std::size_t idx(int i, int j) const { return static_cast<std::size_t>(i) * J_ + j; }
  std::size_t ridx(int i, int a, int b) const {
    return (static_cast<std::size_t>(i) * J_ + a) * J_ + b;
  }
  double checked(const ScalarFn& f, double v, int i, int a, int b) const;

  std::string name_;
  int I_;
  int J_;
  std::vector<ScalarFn> g_;
  std::vector<ScalarFn> rates_;
  std::vector<std::vector<Edge>> out_;
  std::vector<std::optional<double>> declared_bound_;
  VoltageRange range_{};
  int slots_ = 1;
};

/// The realized rate matrix A_i(v) with the diagonal set so rows sum to zero.
RateMatrix transition_rates(const ChannelModel& model, double v, int i);

/// Voltage vector plus one-hot occupancy. The occupancy is stored as the index
/// of the occupied configuration per (compartment, type), which makes the
/// one-hot property structural.
struct SystemState {
  double t = 0.0;
  std::vector<double> V;
  std::vector<int> occ;  // n * I entries
  int types = 0;
  int configs = 0;

  SystemState() = default;
  SystemState(int n, int types_, int configs_)
      : V(n, 0.0), occ(static_cast<std::size_t>(n) * types_, 0), types(types_), configs(configs_) {}

  int size() const noexcept { return static_cast<int>(V.size()); }
  int occupancy(int k, int i) const { return occ[static_cast<std::size_t>(k) * types + i]; }
  int& occupancy(int k, int i) { return occ[static_cast<std::size_t>(k) * types + i]; }
  std::span<const int> occupied(int k) const {
    return {occ.data() + static_cast<std::size_t>(k) * types, static_cast<std::size_t>(types)};
  }
  /// Z[k][i][j] as 0/1.
  int z(int k, int i, int j) const { return occupancy(k, i) == j ? 1 : 0; }
  /// Full n x I x J tensor, row-major.
  std::vector<std::uint8_t> one_hot() const;
  bool one_hot_valid() const;
};

/// v0 on the circle plus per-(i,j) initial occupation probabilities z0. A
/// preset may install a joint sampler that fills all types of one compartment.
struct InitialData {
  ScalarFn v0;
  std::vector<ScalarFn> z0;  // I * J, zero-based (i, j) row-major
  std::function<void(double x, Rng& rng, std::span<int> occupied)> joint;
};

/// A model together with its initial data.
struct ModelSpec {
  ChannelModel model;
  InitialData init;
};

/// D (V[k+1] - 2V[k] + V[k-1]) / h^2 + sum_i g_{i, occ}(V[k]).
std::vector<double> drift_rhs(const CircleLattice& lattice, const ChannelModel& model,
                              const SystemState& state);

/// V[k] = v0(hk); Z[k][i] drawn one-hot with category weights z0[i][.](hk).
SystemState sample_initial_state(const CircleLattice& lattice, const ChannelModel& model,
                                 const InitialData& init, Rng& rng);
SystemState sample_initial_state(const CircleLattice& lattice, const ChannelModel& model,
                                 const InitialData& init, std::uint64_t seed);

}  // namespace ionchan

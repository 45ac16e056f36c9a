#pragma once

#include <optional>
#include <string_view>
#include <variant>
#include <vector>

#include "ionchan/model.hpp"

namespace ionchan {

/// One gate (open/closed) per compartment driving an f-channel, plus a
/// deterministic always-open leak channel g. Configuration 1 of type 1 is open.
struct ToyParams {
  ScalarFn alpha;  // closed -> open
  ScalarFn beta;   // open -> closed
  ScalarFn f;      // drift while open
  ScalarFn g;      // leak, enters as -g(v)
  VoltageRange range{0.0, 1.0};
  ScalarFn v0;                           // defaults to the centered Gaussian bump
  ScalarFn open_probability;             // defaults to alpha/(alpha+beta) at v0
  std::optional<CircleLattice> lattice;  // centers the default bump at (L-h)/2

  /// alpha = e^{10(v-1/2)}, beta = e^{-10(v-1/2)}, f = 1 - v, g = v/10.
  static ToyParams standard();
};

/// Product of two independent binary gates encoded as a 4-state chain.
struct TwoGateParams {
  ScalarFn alpha, beta;              // first gate
  ScalarFn alpha2, beta2;            // second gate
  ScalarFn f;                        // drift when both gates are open (configuration 4)
  ScalarFn q1, q2;                   // initial open probabilities of the two gates
  ScalarFn v0;
  VoltageRange range{0.0, 1.0};

  static TwoGateParams standard();
};

/// Sodium (3 m + 1 h gates), potassium (4 n gates) and leak on the 16-vertex
/// hypercube. The gate-rate functions are injected; `textbook()` supplies the
/// classical squid-axon expressions (mV, ms, rest near -65 mV).
struct HodgkinHuxleyParams {
  ScalarFn alpha_m, beta_m, alpha_h, beta_h, alpha_n, beta_n;
  double g_na = 120.0, g_k = 36.0, g_l = 0.3;
  double e_na = 50.0, e_k = -77.0, e_l = -54.387;
  ScalarFn v0;                 // defaults to -65
  ScalarFn z_m, z_h, z_n;      // initial gate-open probabilities; default steady state at v0
  VoltageRange range{-100.0, 60.0};

  static HodgkinHuxleyParams textbook();
};

/// Either the gated f-channel or the always-open g-channel sits in each
/// compartment, never both.
struct ExclusiveParams {
  ScalarFn alpha1, beta1, alpha2, beta2;
  ScalarFn f, g;
  double p = 0.5;
  ScalarFn v0;
  VoltageRange range{0.0, 1.0};

  static ExclusiveParams standard();
};

/// One gated channel present with probability p(x) and initially open with
/// probability q(x).
struct MacroDensityParams {
  ScalarFn alpha, beta, f;
  ScalarFn p, q;
  ScalarFn v0;
  double L = 1.0;  // circumference over which p and q are validated
  VoltageRange range{0.0, 1.0};

  static MacroDensityParams standard();
};

using PresetParams =
    std::variant<ToyParams, TwoGateParams, HodgkinHuxleyParams, ExclusiveParams, MacroDensityParams>;

/// Preset ids: toy, two-gate-product, hodgkin-huxley, exclusive, macro-density.
ModelSpec preset_model(std::string_view name, const PresetParams& params);
const std::vector<std::string_view>& preset_names();

ModelSpec make_toy(const ToyParams& p);
ModelSpec make_two_gate(const TwoGateParams& p);
ModelSpec make_hodgkin_huxley(const HodgkinHuxleyParams& p);
ModelSpec make_exclusive(const ExclusiveParams& p);
ModelSpec make_macro_density(const MacroDensityParams& p);

/// Hypercube adjacency on zero-based configuration labels (bits of the label).
bool hypercube_adjacent(int a, int b);

}  // namespace ionchan

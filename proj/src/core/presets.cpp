#include "ionchan/presets.hpp"

#include <bit>
#include <cmath>

#include "ionchan/rng.hpp"

namespace ionchan {

namespace {

ScalarFn constant(double c) {
  return [c](double) { return c; };
}

// x / (exp(x/y) - 1) with the removable singularity at x = 0 filled in.
double vtrap(double x, double y) {
  if (std::fabs(x / y) < 1e-6) return y * (1.0 - x / y / 2.0);
  return x / std::expm1(x / y);
}

void require(const ScalarFn& f, const char* what) {
  if (!f) throw ModelError(std::string("preset parameter '") + what + "' is missing");
}

void check_probability_field(const ScalarFn& f, double L, const char* what) {
  constexpr int kGrid = 1024;
  for (int s = 0; s < kGrid; ++s) {
    const double x = L * s / kGrid;
    const double v = f(x);
    if (!(v >= 0.0 && v <= 1.0))
      throw ModelError(std::string("probability field '") + what + "' = " + std::to_string(v) +
                       " outside [0,1] at x = " + std::to_string(x));
  }
}

// Rates of the 4-state product chain e1=(0,0), e2=(1,0), e3=(0,1), e4=(1,1).
void wire_two_gates(ChannelModel& m, int i, const ScalarFn& a, const ScalarFn& b,
                    const ScalarFn& a2, const ScalarFn& b2) {
  if (a) {
    m.set_rate(i, 0, 1, a);
    m.set_rate(i, 2, 3, a);
  }
  if (b) {
    m.set_rate(i, 1, 0, b);
    m.set_rate(i, 3, 2, b);
  }
  if (a2) {
    m.set_rate(i, 0, 2, a2);
    m.set_rate(i, 1, 3, a2);
  }
  if (b2) {
    m.set_rate(i, 2, 0, b2);
    m.set_rate(i, 3, 1, b2);
  }
}

}  // namespace

ToyParams ToyParams::standard() {
  ToyParams p;
  p.alpha = [](double v) { return std::exp(10.0 * (v - 0.5)); };
  p.beta = [](double v) { return std::exp(-10.0 * (v - 0.5)); };
  p.f = [](double v) { return 1.0 - v; };
  p.g = [](double v) { return v / 10.0; };
  return p;
}

TwoGateParams TwoGateParams::standard() {
  TwoGateParams p;
  p.alpha = [](double v) { return std::exp(10.0 * (v - 0.5)); };
  p.beta = [](double v) { return std::exp(-10.0 * (v - 0.5)); };
  p.alpha2 = p.alpha;
  p.beta2 = p.beta;
  p.f = [](double v) { return 1.0 - v; };
  p.q1 = constant(0.5);
  p.q2 = constant(0.5);
  return p;
}

HodgkinHuxleyParams HodgkinHuxleyParams::textbook() {
  HodgkinHuxleyParams p;
  p.alpha_m = [](double v) { return 0.1 * vtrap(-(v + 40.0), 10.0); };
  p.beta_m = [](double v) { return 4.0 * std::exp(-(v + 65.0) / 18.0); };
  p.alpha_h = [](double v) { return 0.07 * std::exp(-(v + 65.0) / 20.0); };
  p.beta_h = [](double v) { return 1.0 / (1.0 + std::exp(-(v + 35.0) / 10.0)); };
  p.alpha_n = [](double v) { return 0.01 * vtrap(-(v + 55.0), 10.0); };
  p.beta_n = [](double v) { return 0.125 * std::exp(-(v + 65.0) / 80.0); };
  return p;
}

ExclusiveParams ExclusiveParams::standard() {
  ExclusiveParams p;
  p.alpha1 = [](double v) { return std::exp(10.0 * (v - 0.5)); };
  p.beta1 = [](double v) { return std::exp(-10.0 * (v - 0.5)); };
  p.alpha2 = p.alpha1;
  p.beta2 = p.beta1;
  p.f = [](double v) { return 1.0 - v; };
  p.g = [](double v) { return v / 10.0; };
  return p;
}

MacroDensityParams MacroDensityParams::standard() {
  MacroDensityParams p;
  p.alpha = [](double v) { return std::exp(10.0 * (v - 0.5)); };
  p.beta = [](double v) { return std::exp(-10.0 * (v - 0.5)); };
  p.f = [](double v) { return 1.0 - v; };
  p.p = constant(0.8);
  p.q = constant(0.5);
  return p;
}

bool hypercube_adjacent(int a, int b) { return std::popcount(static_cast<unsigned>(a ^ b)) == 1; }

ModelSpec make_toy(const ToyParams& p) {
  require(p.alpha, "alpha");
  require(p.beta, "beta");
  require(p.f, "f");
  require(p.g, "g");
  ChannelModel m("toy", 2, 2);
  m.set_drift(0, 0, p.f);
  auto leak = p.g;
  m.set_drift(1, 0, [leak](double v) { return -leak(v); });
  m.set_rate(0, 0, 1, p.beta);
  m.set_rate(0, 1, 0, p.alpha);
  m.set_range(p.range);
  // The bound used by the two-state thinning: lambda = alpha(v_max) + beta(v_min).
  m.set_declared_bound(0, p.alpha(p.range.max) + p.beta(p.range.min));
  m.set_thinning_slots(2);

  InitialData init;
  if (p.v0) {
    init.v0 = p.v0;
  } else if (p.lattice) {
    const double center = (p.lattice->L() - p.lattice->h()) / 2.0;
    init.v0 = [center](double x) { return std::exp(-(x - center) * (x - center)); };
  } else {
    throw ModelError("toy preset needs either v0 or a lattice to center the initial bump");
  }
  ScalarFn open = p.open_probability;
  if (!open) {
    auto a = p.alpha, b = p.beta, v0 = init.v0;
    open = [a, b, v0](double x) {
      const double v = v0(x);
      return a(v) / (a(v) + b(v));
    };
  }
  init.z0 = {open, [open](double x) { return 1.0 - open(x); }, constant(1.0), constant(0.0)};
  return {std::move(m), std::move(init)};
}

ModelSpec make_two_gate(const TwoGateParams& p) {
  require(p.alpha, "alpha");
  require(p.beta, "beta");
  require(p.alpha2, "alpha2");
  require(p.beta2, "beta2");
  ChannelModel m("two-gate-product", 1, 4);
  wire_two_gates(m, 0, p.alpha, p.beta, p.alpha2, p.beta2);
  if (p.f) m.set_drift(0, 3, p.f);
  m.set_range(p.range);
  InitialData init;
  init.v0 = p.v0 ? p.v0 : constant(0.0);
  const ScalarFn q1 = p.q1 ? p.q1 : constant(0.5);
  const ScalarFn q2 = p.q2 ? p.q2 : constant(0.5);
  init.z0 = {
      [q1, q2](double x) { return (1 - q1(x)) * (1 - q2(x)); },
      [q1, q2](double x) { return q1(x) * (1 - q2(x)); },
      [q1, q2](double x) { return (1 - q1(x)) * q2(x); },
      [q1, q2](double x) { return q1(x) * q2(x); },
  };
  return {std::move(m), std::move(init)};
}

ModelSpec make_hodgkin_huxley(const HodgkinHuxleyParams& p) {
  require(p.alpha_m, "alpha_m");
  require(p.beta_m, "beta_m");
  require(p.alpha_h, "alpha_h");
  require(p.beta_h, "beta_h");
  require(p.alpha_n, "alpha_n");
  require(p.beta_n, "beta_n");
  ChannelModel m("hodgkin-huxley", 3, 16);
  for (int a = 0; a < 16; ++a) {
    for (int b = 0; b < 16; ++b) {
      if (!hypercube_adjacent(a, b)) continue;
      const int d = b - a;
      // sodium: bits 0-2 are m gates, bit 3 (|b-a| = 8) is the h gate
      if (d > 0 && d < 8) m.set_rate(0, a, b, p.alpha_m);
      else if (d < 0 && d > -8) m.set_rate(0, a, b, p.beta_m);
      else if (d == 8) m.set_rate(0, a, b, p.alpha_h);
      else if (d == -8) m.set_rate(0, a, b, p.beta_h);
      // potassium: four n gates
      m.set_rate(1, a, b, d > 0 ? p.alpha_n : p.beta_n);
    }
  }
  const double gna = p.g_na, ena = p.e_na, gk = p.g_k, ek = p.e_k, gl = p.g_l, el = p.e_l;
  m.set_drift(0, 15, [gna, ena](double v) { return -gna * (v - ena); });
  m.set_drift(1, 15, [gk, ek](double v) { return -gk * (v - ek); });
  m.set_drift(2, 0, [gl, el](double v) { return -gl * (v - el); });
  m.set_range(p.range);

  InitialData init;
  init.v0 = p.v0 ? p.v0 : constant(-65.0);
  auto steady = [v0 = init.v0](ScalarFn a, ScalarFn b) -> ScalarFn {
    return [v0, a, b](double x) {
      const double v = v0(x);
      return a(v) / (a(v) + b(v));
    };
  };
  const ScalarFn zm = p.z_m ? p.z_m : steady(p.alpha_m, p.beta_m);
  const ScalarFn zh = p.z_h ? p.z_h : steady(p.alpha_h, p.beta_h);
  const ScalarFn zn = p.z_n ? p.z_n : steady(p.alpha_n, p.beta_n);
  init.z0.resize(3 * 16);
  for (int c = 0; c < 16; ++c) {
    init.z0[c] = [zm, zh, c](double x) {
      const double m_open = zm(x), h_open = zh(x);
      double prob = 1.0;
      for (int bit = 0; bit < 3; ++bit) prob *= (c >> bit & 1) ? m_open : 1.0 - m_open;
      return prob * ((c >> 3 & 1) ? h_open : 1.0 - h_open);
    };
    init.z0[16 + c] = [zn, c](double x) {
      const double n_open = zn(x);
      double prob = 1.0;
      for (int bit = 0; bit < 4; ++bit) prob *= (c >> bit & 1) ? n_open : 1.0 - n_open;
      return prob;
    };
    init.z0[32 + c] = constant(c == 0 ? 1.0 : 0.0);
  }
  return {std::move(m), std::move(init)};
}

ModelSpec make_exclusive(const ExclusiveParams& p) {
  require(p.alpha1, "alpha1");
  require(p.beta1, "beta1");
  require(p.alpha2, "alpha2");
  require(p.beta2, "beta2");
  require(p.f, "f");
  require(p.g, "g");
  if (!(p.p >= 0.0 && p.p <= 1.0)) throw ModelError("probability p outside [0,1]");
  ChannelModel m("exclusive", 2, 4);
  wire_two_gates(m, 0, p.alpha1, p.beta1, nullptr, nullptr);
  wire_two_gates(m, 1, p.alpha2, p.beta2, nullptr, nullptr);
  auto g = p.g;
  m.set_drift(0, 3, p.f);
  m.set_drift(1, 2, [g](double v) { return -g(v); });
  m.set_drift(1, 3, [g](double v) { return -g(v); });
  m.set_range(p.range);

  const double q = p.p;
  const std::vector<double> first{(1 - q) * (1 - q), (1 - q) * q, (1 - q) * q, q * q};
  InitialData init;
  init.v0 = p.v0 ? p.v0 : constant(0.0);
  // type 2 is a deterministic relabelling of type 1: e3->e1, e4->e2, e1->e3, e2->e4
  static constexpr int kPartner[4] = {2, 3, 0, 1};
  init.joint = [first](double, Rng& rng, std::span<int> occupied) {
    const double u = rng.uniform();
    double acc = 0.0;
    int pick = 3;
    for (int j = 0; j < 4; ++j) {
      acc += first[j];
      if (u < acc) {
        pick = j;
        break;
      }
    }
    occupied[0] = pick;
    occupied[1] = kPartner[pick];
  };
  init.z0.resize(8);
  for (int j = 0; j < 4; ++j) {
    init.z0[j] = constant(first[j]);
    init.z0[4 + kPartner[j]] = constant(first[j]);
  }
  return {std::move(m), std::move(init)};
}

ModelSpec make_macro_density(const MacroDensityParams& p) {
  require(p.alpha, "alpha");
  require(p.beta, "beta");
  require(p.f, "f");
  require(p.p, "p");
  require(p.q, "q");
  check_probability_field(p.p, p.L, "p");
  check_probability_field(p.q, p.L, "q");
  ChannelModel m("macro-density", 1, 4);
  wire_two_gates(m, 0, p.alpha, p.beta, nullptr, nullptr);
  m.set_drift(0, 3, p.f);
  m.set_range(p.range);
  InitialData init;
  init.v0 = p.v0 ? p.v0 : constant(0.0);
  auto pf = p.p, qf = p.q;
  init.z0 = {
      [pf, qf](double x) { return (1 - pf(x)) * (1 - qf(x)); },
      [pf, qf](double x) { return (1 - pf(x)) * qf(x); },
      [pf, qf](double x) { return pf(x) * (1 - qf(x)); },
      [pf, qf](double x) { return pf(x) * qf(x); },
  };
  return {std::move(m), std::move(init)};
}

const std::vector<std::string_view>& preset_names() {
  static const std::vector<std::string_view> names{"toy", "two-gate-product", "hodgkin-huxley",
                                                   "exclusive", "macro-density"};
  return names;
}

ModelSpec preset_model(std::string_view name, const PresetParams& params) {
  auto mismatch = [&] {
    return ModelError("parameters do not belong to preset '" + std::string(name) + "'");
  };
  if (name == "toy") {
    if (auto* p = std::get_if<ToyParams>(&params)) return make_toy(*p);
    throw mismatch();
  }
  if (name == "two-gate-product") {
    if (auto* p = std::get_if<TwoGateParams>(&params)) return make_two_gate(*p);
    throw mismatch();
  }
  if (name == "hodgkin-huxley") {
    if (auto* p = std::get_if<HodgkinHuxleyParams>(&params)) return make_hodgkin_huxley(*p);
    throw mismatch();
  }
  if (name == "exclusive") {
    if (auto* p = std::get_if<ExclusiveParams>(&params)) return make_exclusive(*p);
    throw mismatch();
  }
  if (name == "macro-density") {
    if (auto* p = std::get_if<MacroDensityParams>(&params)) return make_macro_density(*p);
    throw mismatch();
  }
  throw ModelError("unknown preset '" + std::string(name) + "'");
}

}  // namespace ionchan

#pragma once

#include <cmath>
#include <vector>

#include "ionchan/model.hpp"
#include "ionchan/presets.hpp"

namespace testing {

inline ionchan::ScalarFn constant(double c) {
  return [c](double) { return c; };
}

// One binary channel per site with constant rates and no drift.
inline ionchan::ChannelModel two_state(double open_rate, double close_rate) {
  ionchan::ChannelModel m("two-state", 1, 2);
  if (open_rate > 0) m.set_rate(0, 0, 1, constant(open_rate));
  if (close_rate > 0) m.set_rate(0, 1, 0, constant(close_rate));
  return m;
}

inline ionchan::ModelSpec toy(const ionchan::CircleLattice& lattice) {
  auto p = ionchan::ToyParams::standard();
  p.lattice = lattice;
  return ionchan::make_toy(p);
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::fabs(a[k] - b[k]));
  return m;
}

}  // namespace testing

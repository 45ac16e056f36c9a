#pragma once

#include <cmath>
#include <cstddef>

#include "ionchan/error.hpp"

namespace ionchan {

/// The discretized circle: n equal compartments of length h on a circle of
/// circumference L, with axial diffusivity D. Compartment k sits at x = k*h.
class CircleLattice {
 public:
  CircleLattice(int n, double L, double D) : n_(n), D_(D) {
    if (n < 1) throw ModelError("lattice needs at least one compartment");
    if (!(L > 0.0) || !std::isfinite(L)) throw ModelError("lattice circumference must be positive");
    if (!(D >= 0.0) || !std::isfinite(D)) throw ModelError("diffusivity must be nonnegative");
    h_ = L / n;
    L_ = h_ * n;  // keeps h*n == L exact in the stored representation
  }

  /// Lattice with compartment length as close to `h` as an integer count allows.
  static CircleLattice from_spacing(double h, double L, double D) {
    if (!(h > 0.0)) throw ModelError("compartment length must be positive");
    const double count = std::round(L / h);
    if (count < 1.0) throw ModelError("compartment length exceeds circumference");
    return CircleLattice(static_cast<int>(count), L, D);
  }

  int n() const noexcept { return n_; }
  double L() const noexcept { return L_; }
  double h() const noexcept { return h_; }
  double D() const noexcept { return D_; }
  double position(int k) const noexcept { return h_ * k; }

  int wrap(long k) const noexcept {
    long r = k % n_;
    return static_cast<int>(r < 0 ? r + n_ : r);
  }

  friend bool operator==(const CircleLattice&, const CircleLattice&) = default;

 private:
  int n_;
  double L_ = 0.0;
  double h_ = 0.0;
  double D_;
};

}  // namespace ionchan

#pragma once

#include <utility>

#include "wavegrad/net_core.hpp"

namespace wavegrad {

/// One classical fourth-order Runge-Kutta step of y' = f(t, y).
template <class F>
Vec rk4_step(F&& f, double t, const Vec& y, double dt) {
  const Vec k1 = f(t, y);
  const Vec k2 = f(t + 0.5 * dt, Vec(y + 0.5 * dt * k1));
  const Vec k3 = f(t + 0.5 * dt, Vec(y + 0.5 * dt * k2));
  const Vec k4 = f(t + dt, Vec(y + dt * k3));
  return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

template <class F>
Vec euler_step(F&& f, double t, const Vec& y, double dt) {
  return y + dt * f(t, y);
}

/// LDL^T factorization of a symmetric matrix without pivoting. For a
/// positive definite matrix every pivot d_i is positive.
struct SpdFactor {
  Mat lower;  // unit lower triangular
  Vec pivots;

  double smallest_pivot() const { return pivots.size() ? pivots.minCoeff() : 0.0; }
  double largest_pivot() const { return pivots.size() ? pivots.maxCoeff() : 0.0; }
  /// All pivots exceed `rel_tol` times the largest one.
  bool positive_definite(double rel_tol = 1e-10) const;
  Vec solve(const Vec& rhs) const;
};

SpdFactor factor_spd(const Mat& a);

}  // namespace wavegrad

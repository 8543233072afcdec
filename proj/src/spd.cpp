#include <cmath>

#include "wavegrad/errors.hpp"
#include "wavegrad/ode.hpp"

namespace wavegrad {

SpdFactor factor_spd(const Mat& a) {
  if (a.rows() != a.cols()) throw ShapeError("factor_spd: matrix must be square");
  const Eigen::Index n = a.rows();
  SpdFactor f{Mat::Identity(n, n), Vec::Zero(n)};
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j);
    for (Eigen::Index k = 0; k < j; ++k) d -= f.lower(j, k) * f.lower(j, k) * f.pivots(k);
    f.pivots(j) = d;
    if (!(d > 0.0)) {
      // Leave the remaining rows of the factor untouched; callers inspect
      // the pivots before solving.
      for (Eigen::Index r = j + 1; r < n; ++r) f.pivots(r) = 0.0;
      return f;
    }
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= f.lower(i, k) * f.lower(j, k) * f.pivots(k);
      f.lower(i, j) = s / d;
    }
  }
  return f;
}

bool SpdFactor::positive_definite(double rel_tol) const {
  if (pivots.size() == 0) return true;
  const double top = largest_pivot();
  return top > 0.0 && smallest_pivot() > rel_tol * top;
}

Vec SpdFactor::solve(const Vec& rhs) const {
  const Eigen::Index n = pivots.size();
  if (rhs.size() != n) throw ShapeError("SpdFactor::solve: rhs size mismatch");
  Vec z = rhs;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < i; ++k) z(i) -= lower(i, k) * z(k);
  }
  for (Eigen::Index i = 0; i < n; ++i) z(i) /= pivots(i);
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    for (Eigen::Index k = i + 1; k < n; ++k) z(i) -= lower(k, i) * z(k);
  }
  return z;
}

}  // namespace wavegrad

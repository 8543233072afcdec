#pragma once

#include <vector>

#include "wavegrad/net_core.hpp"

namespace wavegrad {

/// Supervision loss on the output layer. Only the half squared error
/// V(x, y) = 1/2 |x - y|^2 is supported.
struct LossSpec {
  enum class Kind { half_squared_error };
  Kind kind = Kind::half_squared_error;
  int width = 1;

  double value(const Vec& x, const Vec& y) const;
  /// dV/dx
  Vec gradient(const Vec& x, const Vec& y) const;
};

/// Activations of the instantaneous map (time collapsed): x_0 = u,
/// x_{l+1} = sigma(W_l x_l).
std::vector<Vec> forward_instant(const LayeredNet& net, const Vec& u);

/// dV/dW_l for l = 0..L-1 by a reverse sweep.
std::vector<Mat> backprop_exact(const LayeredNet& net, const Vec& u, const Vec& y, const LossSpec& loss);

/// Central-difference estimate of dV/dW_l, one weight at a time.
std::vector<Mat> grad_fd(const LayeredNet& net, const Vec& u, const Vec& y, const LossSpec& loss,
                         double eps = 1e-5);

/// Loss of the instantaneous map at (u, y).
double instant_loss(const LayeredNet& net, const Vec& u, const Vec& y, const LossSpec& loss);

/// ||a - b||_F / ||b||_F, or the absolute difference when ||b||_F == 0.
double relative_error(const Mat& a, const Mat& b);

}  // namespace wavegrad

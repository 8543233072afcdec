#pragma once

#include <functional>
#include <vector>

#include "wavegrad/bp_oracle.hpp"
#include "wavegrad/constraint_net.hpp"

namespace wavegrad {

// Limits of the constrained dynamics that collapse onto gradient methods.

/// Solves T delta = -V_x by back-substitution, T(i, j) = dG^j/dxi^i (unit
/// upper triangular in the feedforward case). delta is the limit of
/// exp(-theta t) lambda as the masses vanish. Refuses cyclic nets.
Vec bp_limit_deltas(const ConstraintNet& net, const Vec& xi, const Vec& v_x);

/// Weight rate of the massless limit on every arc,
///   Wdot_ij = (1/gamma) sigma'(a_i) delta_i xi_j,
/// which with delta from bp_limit_deltas equals -(1/gamma) dV/dw_ij.
Mat bp_limit_weight_rate(const ConstraintNet& net, const Vec& xi, const Vec& delta, double gamma);

/// Chain-of-layers wiring of a layered net: layer l occupies a contiguous
/// block of neuron indices, inputs first, outputs last, and every entry of
/// W_l becomes an arc.
ConstraintNet encode_layered(const LayeredNet& net, const SignalSpec& signal);

/// Places per-layer matrices (shaped like W_l) into one nu x nu matrix
/// with the indexing of encode_layered.
Mat embed_layered(const LayeredNet& net, const std::vector<Mat>& per_layer);

/// Time-dependent potential Vbar(t, w) over a flat weight vector.
struct Potential {
  std::function<double(double, const Vec&)> value;
  std::function<Vec(double, const Vec&)> gradient;
};

/// Concatenation of the W_l in column-major order, layer by layer.
Vec flatten_weights(const std::vector<Mat>& w);
std::vector<Mat> unflatten_weights(const Vec& flat, const LayeredNet& like);

/// Vbar(t, w) = 1/2 |y(t) - f_w(e(t))|^2 over the weights of `net`, with
/// the gradient from backprop_exact.
Potential supervised_potential(const LayeredNet& net, const SignalSpec& signal, const LossSpec& loss);

enum class Stepper { euler, rk4 };

struct FlowPoint {
  double t;
  Vec w;
  Vec w_dot;
  double loss;
};

/// Wdot = -(1/gamma) Vbar_W.
std::vector<FlowPoint> gradient_flow(const Potential& pot, const Vec& w0, double gamma, double dt, long steps,
                                     Stepper stepper = Stepper::rk4);

/// Wddot + theta Wdot = -(1/m_W) Vbar_W, started at rest (RK4).
std::vector<FlowPoint> damped_second_order(const Potential& pot, const Vec& w0, double m_w, double theta, double dt,
                                           long steps);

/// max over the shared grid of |w_a(t) - w_b(t)|_2.
double sup_distance(const std::vector<FlowPoint>& a, const std::vector<FlowPoint>& b);

}  // namespace wavegrad

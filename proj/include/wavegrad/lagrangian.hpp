#pragma once

#include <optional>
#include <vector>

#include "wavegrad/bp_oracle.hpp"
#include "wavegrad/constraint_net.hpp"

namespace wavegrad {

/// Generalized coordinates and parameters of the constrained dynamics.
/// The weighting is varpi(t) = exp(theta t).
struct ELState {
  Vec x;
  Vec x_dot;
  Mat w;
  Mat w_dot;
  double t = 0.0;
  double m_x = 1.0;
  double m_w = 1.0;
  double theta = 0.0;
  double gamma = 1.0;

  double varpi() const;
  double varpi_dot() const;
};

/// A lambda = v with A_ij = G^i_xi . G^j_xi / m_x + G^i_M . G^j_M / m_W.
struct MultiplierSystem {
  Mat a;
  Vec v;
  Vec lambda;
  Vec pivots;  // LDL^T pivots of A
};

/// Assembles and solves the multiplier system for F = -varpi V, with V the
/// half squared error between output neurons and y(t) (no loss: F = 0).
/// With `stabilize = beta` the constraints obey g'' = -beta (2 g' + g)
/// instead of g'' = 0. Throws SingularityError if A is not positive
/// definite, DomainError for non-positive masses or cyclic wiring.
MultiplierSystem solve_multipliers(const ConstraintNet& net, const ELState& state,
                                   const std::optional<LossSpec>& loss, std::optional<double> stabilize = {});

struct Acceleration {
  Vec x_ddot;
  Mat w_ddot;
};

/// Accelerations from the Euler-Lagrange equations given the multipliers.
Acceleration el_rhs(const ConstraintNet& net, const ELState& state, const Vec& lambda,
                    const std::optional<LossSpec>& loss);

struct IntegrateOptions {
  std::optional<double> stabilize;
  double drift_abort = 1e-2;
  /// Keep every n-th step in the trajectory (the final step is always kept).
  int record_every = 1;
};

struct TrajectoryPoint {
  double t;
  Vec x;
  Mat w;
  Vec lambda;
  double drift;  // max_i |g_i(t)|
};

struct Trajectory {
  std::vector<TrajectoryPoint> points;
  ELState final_state;
  double max_drift = 0.0;
};

/// Fixed-step RK4 integration of the constrained second-order system.
/// Throws ConsistencyError if state0 violates G = 0 or g' = 0 beyond 1e-10,
/// DivergenceError once the drift exceeds options.drift_abort.
Trajectory integrate(const ConstraintNet& net, const ELState& state0, const std::optional<LossSpec>& loss,
                     double dt, long steps, const IntegrateOptions& options = {});

struct InitParams {
  double t0 = 0.0;
  double m_x = 1.0;
  double m_w = 1.0;
  double theta = 1.0;
  double gamma = 1.0;
};

/// Cauchy data with W(0) = net.weights(), W'(0) = 0, x(0) from the
/// forward solve, x'(0) = 0 on every non-input neuron and x'(0) = e'(0) on
/// input neurons (zero when e'(0) = 0). Throws ConsistencyError when some
/// constraint still has g'(0) != 0, i.e. a nonzero weight leaves an input
/// whose signal is moving at t0.
ELState consistent_init(const ConstraintNet& net, const std::optional<LossSpec>& loss,
                        const InitParams& params = {});

/// dV/dx on every neuron (nonzero on outputs only).
Vec loss_gradient_x(const ConstraintNet& net, double tau, const Vec& x, const std::optional<LossSpec>& loss);

}  // namespace wavegrad

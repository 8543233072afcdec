#pragma once

#include <vector>

#include "wavegrad/net_core.hpp"
#include "wavegrad/signals.hpp"

namespace wavegrad {

/// Arc k -> j carrying weight m_jk. Indices are 0-based.
struct Arc {
  int to;
  int from;
  friend bool operator==(const Arc&, const Arc&) = default;
};

/// Neural network on a digraph of nu neurons, described by one algebraic
/// constraint per neuron:
///
///   G^j = xi_j - e_j(tau)              for input neurons j < omega
///   G^j = xi_j - sigma(sum_k m_jk xi_k) otherwise
///
/// Output neurons are the last eta indices. The input stream e(tau) and
/// the supervision y(tau) come from `signal` (input width omega, output
/// width eta). Weights live only on arcs; M is zero elsewhere.
class ConstraintNet {
 public:
  ConstraintNet(int nu, int omega, int eta, std::vector<Arc> arcs, Mat weights, Activation activation,
                SignalSpec signal);

  int nu() const noexcept { return nu_; }
  int omega() const noexcept { return omega_; }
  int eta() const noexcept { return eta_; }
  const std::vector<Arc>& arcs() const noexcept { return arcs_; }
  const Mat& weights() const noexcept { return weights_; }
  Activation activation() const noexcept { return activation_; }
  const SignalSpec& signal() const noexcept { return signal_; }

  bool is_input(int j) const noexcept { return j < omega_; }
  int first_output() const noexcept { return nu_ - eta_; }
  /// Every arc goes from a lower to a higher index (M strictly lower
  /// triangular).
  bool feedforward() const noexcept { return feedforward_; }
  /// 1 on arc entries of M, 0 elsewhere.
  const Mat& arc_mask() const noexcept { return mask_; }

  ConstraintNet with_weights(Mat weights) const;
  ConstraintNet with_signal(SignalSpec signal) const;

  /// Arc weights in arc order, and back.
  Vec pack_weights(const Mat& m) const;
  Mat unpack_weights(const Vec& w) const;

  /// {"nu", "omega", "eta", "arcs": [[j, k], ...], "M": [[...]], "activation"}
  nlohmann::json to_json() const;
  static ConstraintNet from_json(const nlohmann::json& doc, SignalSpec signal);

 private:
  int nu_;
  int omega_;
  int eta_;
  std::vector<Arc> arcs_;
  Mat weights_;
  Activation activation_;
  SignalSpec signal_;
  Mat mask_;
  bool feedforward_ = true;
};

/// G(tau, xi, M), one entry per neuron.
Vec eval_constraints(const ConstraintNet& net, double tau, const Vec& xi, const Mat& m);

/// T with T(i, j) = dG^j / dxi^i. Unit diagonal; upper triangular for
/// feedforward nets.
Mat jacobian_xi(const ConstraintNet& net, const Vec& xi, const Mat& m);

/// dG^j / dm_ab. Only a == j can be nonzero, so the array is stored as a
/// nu x nu matrix `row` with row(j, b) = dG^j / dm_jb (zero off arcs).
struct WeightJacobian {
  Mat row;
  double operator()(int j, int a, int b) const { return a == j ? row(j, b) : 0.0; }
};

WeightJacobian jacobian_M(const ConstraintNet& net, const Vec& xi, const Mat& m);

/// (nu + |A|) x nu matrix whose column j is the gradient of G^j with
/// respect to (xi, arc weights).
Mat stacked_jacobian(const ConstraintNet& net, const Vec& xi, const Mat& m);

/// Rank of the stacked Jacobian equals nu, decided by column-pivoted QR
/// with threshold 1e-10 relative to the largest pivot.
bool check_full_rank(const ConstraintNet& net, const Vec& xi, const Mat& m);

struct GramCheck {
  bool positive_definite = false;
  double smallest_pivot = 0.0;
  double largest_pivot = 0.0;
};

/// Gram matrix of `vectors` factored as LDL^T; positive definite when the
/// smallest pivot exceeds 1e-10 times the largest.
GramCheck gram_check(const std::vector<Vec>& vectors);
bool gram_posdef_check(const std::vector<Vec>& vectors);

/// Constraint gradients scaled by 1/sqrt(mass); their Gram matrix is the
/// multiplier matrix A.
std::vector<Vec> multiplier_gram_vectors(const ConstraintNet& net, const Vec& xi, const Mat& m, double m_x,
                                         double m_w);

/// Second time derivative of g(t) = G(t, x(t), W(t)) excluding the
/// acceleration terms, split by the partial derivatives it comes from.
struct ConstraintCurvature {
  Vec tau_tau;   // G_tautau
  Vec tau_xi;    // G_tauxi . xdot
  Vec tau_m;     // G_taum . wdot
  Vec xi_m;      // G_xim xdot wdot
  Vec xi_xi;     // G_xixi xdot xdot
  Vec m_m;       // G_mm wdot wdot

  Vec total() const { return tau_tau + 2.0 * (tau_xi + tau_m + xi_m) + xi_xi + m_m; }
};

ConstraintCurvature constraint_curvature(const ConstraintNet& net, double tau, const Vec& xi, const Mat& m,
                                         const Vec& xi_dot, const Mat& m_dot);

/// dG/dtau: -e_dot on input neurons, 0 elsewhere.
Vec constraint_time_rate(const ConstraintNet& net, double tau);

/// First time derivative of g along (xi_dot, m_dot).
Vec constraint_rate(const ConstraintNet& net, double tau, const Vec& xi, const Mat& m, const Vec& xi_dot,
                    const Mat& m_dot);

/// Neuron values satisfying G = 0 at time tau, computed in index order.
/// Feedforward nets only.
Vec forward_solve(const ConstraintNet& net, double tau, const Mat& m);

}  // namespace wavegrad

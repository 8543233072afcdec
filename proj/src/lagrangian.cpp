#include "wavegrad/lagrangian.hpp"

#include <algorithm>
#include <cmath>

#include "wavegrad/errors.hpp"
#include "wavegrad/ode.hpp"

namespace wavegrad {

double ELState::varpi() const { return std::exp(theta * t); }
double ELState::varpi_dot() const { return theta * std::exp(theta * t); }

namespace {

void check_dynamics(const ConstraintNet& net, const ELState& s, const std::optional<LossSpec>& loss) {
  if (!net.feedforward()) throw DomainError("constrained dynamics require feedforward wiring");
  if (!(s.m_x > 0.0) || !(s.m_w > 0.0)) throw DomainError("masses must be positive (use the limit reductions)");
  if (s.x.size() != net.nu() || s.x_dot.size() != net.nu()) throw ShapeError("state x must have nu entries");
  if (s.w.rows() != net.nu() || s.w.cols() != net.nu() || s.w_dot.rows() != net.nu() ||
      s.w_dot.cols() != net.nu()) {
    throw ShapeError("state W must be nu x nu");
  }
  if (loss && loss->width != net.eta()) throw ShapeError("loss width must equal the output count");
}

}  // namespace

Vec loss_gradient_x(const ConstraintNet& net, double tau, const Vec& x, const std::optional<LossSpec>& loss) {
  Vec vx = Vec::Zero(net.nu());
  if (!loss || net.eta() == 0) return vx;
  const Vec y = net.signal().jet(tau).y;
  vx.tail(net.eta()) = loss->gradient(x.tail(net.eta()), y);
  return vx;
}

MultiplierSystem solve_multipliers(const ConstraintNet& net, const ELState& s, const std::optional<LossSpec>& loss,
                                   std::optional<double> stabilize) {
  check_dynamics(net, s, loss);
  const Mat t = jacobian_xi(net, s.x, s.w);
  const WeightJacobian gm = jacobian_M(net, s.x, s.w);
  const Mat w_dot = s.w_dot.cwiseProduct(net.arc_mask());
  const double pw = s.varpi();
  const double pw_dot = s.varpi_dot();

  MultiplierSystem sys;
  // G^i_M . G^j_M vanishes for i != j: each constraint owns its weight row.
  sys.a = t.transpose() * t / s.m_x;
  sys.a.diagonal() += gm.row.rowwise().squaredNorm() / s.m_w;

  Vec curvature = constraint_curvature(net, s.t, s.x, s.w, s.x_dot, w_dot).total();
  if (stabilize) {
    const Vec g = eval_constraints(net, s.t, s.x, s.w);
    const Vec g_dot = constraint_rate(net, s.t, s.x, s.w, s.x_dot, w_dot);
    curvature += *stabilize * (2.0 * g_dot + g);
  }
  const Vec velocity_proj = t.transpose() * s.x_dot + gm.row.cwiseProduct(w_dot).rowwise().sum();
  // L^x_F = -varpi V_x; L^W_F = 0.
  const Vec lx = -pw * loss_gradient_x(net, s.t, s.x, loss);
  sys.v = pw * curvature - pw_dot * velocity_proj + t.transpose() * lx / s.m_x;

  const SpdFactor f = factor_spd(sys.a);
  sys.pivots = f.pivots;
  if (!f.positive_definite(1e-10)) {
    throw SingularityError("multiplier matrix is not positive definite (smallest pivot " +
                               std::to_string(f.smallest_pivot()) + ")",
                           f.smallest_pivot());
  }
  sys.lambda = f.solve(sys.v);
  return sys;
}

Acceleration el_rhs(const ConstraintNet& net, const ELState& s, const Vec& lambda,
                    const std::optional<LossSpec>& loss) {
  check_dynamics(net, s, loss);
  if (lambda.size() != net.nu()) throw ShapeError("el_rhs: lambda must have nu entries");
  const Mat t = jacobian_xi(net, s.x, s.w);
  const WeightJacobian gm = jacobian_M(net, s.x, s.w);
  const double pw = s.varpi();
  const double pw_dot = s.varpi_dot();
  const Vec lx = -pw * loss_gradient_x(net, s.t, s.x, loss);

  Acceleration acc;
  acc.x_ddot = (-s.m_x * pw_dot * s.x_dot - t * lambda + lx) / (s.m_x * pw);
  // sum_j lambda_j dG^j/dm_ab = lambda_a row(a, b)
  const Mat w_dot = s.w_dot.cwiseProduct(net.arc_mask());
  acc.w_ddot = (-s.m_w * pw_dot * w_dot - lambda.asDiagonal() * gm.row) / (s.m_w * pw);
  acc.w_ddot = acc.w_ddot.cwiseProduct(net.arc_mask());
  return acc;
}

namespace {

// Packed state: [x, x_dot, w_arcs, w_dot_arcs].
struct Packing {
  Eigen::Index nu;
  Eigen::Index na;

  Vec pack(const ConstraintNet& net, const ELState& s) const {
    Vec y(2 * nu + 2 * na);
    y << s.x, s.x_dot, net.pack_weights(s.w), net.pack_weights(s.w_dot);
    return y;
  }
  void unpack(const ConstraintNet& net, const Vec& y, ELState& s) const {
    s.x = y.segment(0, nu);
    s.x_dot = y.segment(nu, nu);
    s.w = net.unpack_weights(y.segment(2 * nu, na));
    s.w_dot = net.unpack_weights(y.segment(2 * nu + na, na));
  }
};

double drift_of(const ConstraintNet& net, const ELState& s) {
  return eval_constraints(net, s.t, s.x, s.w).lpNorm<Eigen::Infinity>();
}

}  // namespace

Trajectory integrate(const ConstraintNet& net, const ELState& state0, const std::optional<LossSpec>& loss,
                     double dt, long steps, const IntegrateOptions& options) {
  check_dynamics(net, state0, loss);
  if (!(dt > 0.0)) throw DomainError("integrate: dt must be positive");
  if (steps < 0) throw DomainError("integrate: steps must be nonnegative");
  if (options.record_every < 1) throw DomainError("integrate: record_every must be >= 1");

  const double g0 = drift_of(net, state0);
  const double gd0 =
      constraint_rate(net, state0.t, state0.x, state0.w, state0.x_dot, state0.w_dot).lpNorm<Eigen::Infinity>();
  if (g0 > 1e-10 || gd0 > 1e-10) {
    throw ConsistencyError("integrate: initial state violates the Cauchy conditions (|g| = " + std::to_string(g0) +
                           ", |g'| = " + std::to_string(gd0) + ")");
  }
  const Packing pk{net.nu(), static_cast<Eigen::Index>(net.arcs().size())};
  ELState scratch = state0;
  auto rhs = [&](double t, const Vec& y) {
    scratch.t = t;
    pk.unpack(net, y, scratch);
    const MultiplierSystem sys = solve_multipliers(net, scratch, loss, options.stabilize);
    const Acceleration acc = el_rhs(net, scratch, sys.lambda, loss);
    Vec dy(y.size());
    dy << scratch.x_dot, acc.x_ddot, net.pack_weights(scratch.w_dot), net.pack_weights(acc.w_ddot);
    return dy;
  };

  Trajectory traj;
  ELState cur = state0;
  auto record = [&](const ELState& s, double drift) {
    const MultiplierSystem sys = solve_multipliers(net, s, loss, options.stabilize);
    traj.points.push_back({s.t, s.x, s.w, sys.lambda, drift});
  };
  record(cur, g0);
  traj.max_drift = g0;

  Vec y = pk.pack(net, cur);
  for (long k = 1; k <= steps; ++k) {
    const double t_prev = state0.t + static_cast<double>(k - 1) * dt;
    y = rk4_step(rhs, t_prev, y, dt);
    cur.t = state0.t + static_cast<double>(k) * dt;
    pk.unpack(net, y, cur);
    if (!y.allFinite()) throw DivergenceError("integrate: state became non-finite", cur.t, INFINITY);
    const double drift = drift_of(net, cur);
    traj.max_drift = std::max(traj.max_drift, drift);
    if (drift > options.drift_abort) {
      throw DivergenceError("integrate: constraint drift " + std::to_string(drift) + " exceeds abort threshold",
                            cur.t, drift);
    }
    if (k % options.record_every == 0 || k == steps) record(cur, drift);
  }
  traj.final_state = cur;
  return traj;
}

ELState consistent_init(const ConstraintNet& net, const std::optional<LossSpec>& loss, const InitParams& p) {
  if (!net.feedforward()) throw DomainError("consistent_init: network has cycles");
  if (loss && loss->width != net.eta()) throw ShapeError("loss width must equal the output count");
  ELState s;
  s.t = p.t0;
  s.m_x = p.m_x;
  s.m_w = p.m_w;
  s.theta = p.theta;
  s.gamma = p.gamma;
  s.w = net.weights();
  s.w_dot = Mat::Zero(net.nu(), net.nu());
  s.x = forward_solve(net, p.t0, s.w);
  s.x_dot = Vec::Zero(net.nu());
  s.x_dot.head(net.omega()) = net.signal().jet(p.t0).u_dot;

  const Vec rate = constraint_rate(net, s.t, s.x, s.w, s.x_dot, s.w_dot);
  for (int j = 0; j < net.nu(); ++j) {
    if (std::abs(rate(j)) > 1e-10) {
      std::string culprits;
      for (const Arc& a : net.arcs()) {
        if (a.to == j && a.from < net.omega() && s.w(a.to, a.from) != 0.0 && s.x_dot(a.from) != 0.0) {
          culprits += " m(" + std::to_string(a.to) + "," + std::to_string(a.from) + ")";
        }
      }
      throw ConsistencyError("consistent_init: g'(0) = " + std::to_string(rate(j)) + " at neuron " +
                             std::to_string(j) + "; the input is moving at t0, so these weights must vanish:" +
                             culprits);
    }
  }
  return s;
}

}  // namespace wavegrad

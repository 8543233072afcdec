#include "wavegrad/bp_limit.hpp"

#include <algorithm>
#include <cmath>

#include "wavegrad/errors.hpp"
#include "wavegrad/ode.hpp"

namespace wavegrad {

Vec bp_limit_deltas(const ConstraintNet& net, const Vec& xi, const Vec& v_x) {
  if (!net.feedforward()) throw DomainError("bp_limit_deltas: T is only triangular for feedforward nets");
  if (v_x.size() != net.nu()) throw ShapeError("bp_limit_deltas: V_x must have nu entries");
  const Mat t = jacobian_xi(net, xi, net.weights());
  const int n = net.nu();
  Vec delta = Vec::Zero(n);
  for (int i = n - 1; i >= 0; --i) {
    double acc = -v_x(i);
    for (int j = i + 1; j < n; ++j) acc -= t(i, j) * delta(j);
    delta(i) = acc / t(i, i);
  }
  return delta;
}

Mat bp_limit_weight_rate(const ConstraintNet& net, const Vec& xi, const Vec& delta, double gamma) {
  if (!(gamma > 0.0)) throw DomainError("bp_limit_weight_rate: gamma must be positive");
  if (xi.size() != net.nu() || delta.size() != net.nu()) throw ShapeError("bp_limit_weight_rate: size mismatch");
  const Mat mm = net.weights().cwiseProduct(net.arc_mask());
  const Vec a = mm * xi;
  Mat rate = Mat::Zero(net.nu(), net.nu());
  for (const Arc& arc : net.arcs()) {
    rate(arc.to, arc.from) = net.activation().d1(a(arc.to)) * delta(arc.to) * xi(arc.from) / gamma;
  }
  return rate;
}

namespace {

std::vector<int> layer_offsets(const LayeredNet& net) {
  std::vector<int> off{0};
  for (int n : net.widths()) off.push_back(off.back() + n);
  return off;
}

}  // namespace

ConstraintNet encode_layered(const LayeredNet& net, const SignalSpec& signal) {
  const auto off = layer_offsets(net);
  const int nu = off.back();
  Mat m = Mat::Zero(nu, nu);
  std::vector<Arc> arcs;
  for (int l = 0; l < net.depth(); ++l) {
    const Mat& w = net.weight(l);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        const int j = off[static_cast<std::size_t>(l) + 1] + static_cast<int>(r);
        const int k = off[static_cast<std::size_t>(l)] + static_cast<int>(c);
        arcs.push_back({j, k});
        m(j, k) = w(r, c);
      }
    }
  }
  return ConstraintNet(nu, net.width(0), net.width(net.depth()), std::move(arcs), std::move(m), net.activation(),
                       signal);
}

Mat embed_layered(const LayeredNet& net, const std::vector<Mat>& per_layer) {
  if (per_layer.size() != static_cast<std::size_t>(net.depth())) throw ShapeError("embed_layered: layer count");
  const auto off = layer_offsets(net);
  Mat m = Mat::Zero(off.back(), off.back());
  for (std::size_t l = 0; l < per_layer.size(); ++l) {
    const Mat& g = per_layer[l];
    if (g.rows() != net.width(static_cast<int>(l) + 1) || g.cols() != net.width(static_cast<int>(l))) {
      throw ShapeError("embed_layered: matrix shape does not match W_l");
    }
    m.block(off[l + 1], off[l], g.rows(), g.cols()) = g;
  }
  return m;
}

Vec flatten_weights(const std::vector<Mat>& w) {
  Eigen::Index n = 0;
  for (const Mat& m : w) n += m.size();
  Vec out(n);
  Eigen::Index at = 0;
  for (const Mat& m : w) {
    out.segment(at, m.size()) = Eigen::Map<const Vec>(m.data(), m.size());
    at += m.size();
  }
  return out;
}

std::vector<Mat> unflatten_weights(const Vec& flat, const LayeredNet& like) {
  std::vector<Mat> out;
  Eigen::Index at = 0;
  for (const Mat& m : like.weights()) {
    if (at + m.size() > flat.size()) throw ShapeError("unflatten_weights: vector too short");
    out.push_back(Eigen::Map<const Mat>(flat.data() + at, m.rows(), m.cols()));
    at += m.size();
  }
  if (at != flat.size()) throw ShapeError("unflatten_weights: vector too long");
  return out;
}

Potential supervised_potential(const LayeredNet& net, const SignalSpec& signal, const LossSpec& loss) {
  Potential p;
  p.value = [=](double t, const Vec& w) {
    const auto jet = signal.jet(t);
    return instant_loss(net.with_weights(unflatten_weights(w, net)), jet.u, jet.y, loss);
  };
  p.gradient = [=](double t, const Vec& w) {
    const auto jet = signal.jet(t);
    return flatten_weights(backprop_exact(net.with_weights(unflatten_weights(w, net)), jet.u, jet.y, loss));
  };
  return p;
}

std::vector<FlowPoint> gradient_flow(const Potential& pot, const Vec& w0, double gamma, double dt, long steps,
                                     Stepper stepper) {
  if (!(gamma > 0.0)) throw DomainError("gradient_flow: gamma must be positive");
  if (!(dt > 0.0) || steps < 0) throw DomainError("gradient_flow: need dt > 0 and steps >= 0");
  auto rhs = [&](double t, const Vec& w) { return Vec(-pot.gradient(t, w) / gamma); };

  std::vector<FlowPoint> out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  Vec w = w0;
  for (long k = 0;; ++k) {
    const double t = static_cast<double>(k) * dt;
    out.push_back({t, w, rhs(t, w), pot.value(t, w)});
    if (k == steps) break;
    w = stepper == Stepper::rk4 ? rk4_step(rhs, t, w, dt) : euler_step(rhs, t, w, dt);
    require_finite(w, "gradient_flow");
  }
  return out;
}

std::vector<FlowPoint> damped_second_order(const Potential& pot, const Vec& w0, double m_w, double theta, double dt,
                                           long steps) {
  if (!(m_w > 0.0)) throw DomainError("damped_second_order: m_W must be positive");
  if (!(theta >= 0.0)) throw DomainError("damped_second_order: theta must be nonnegative");
  if (!(dt > 0.0) || steps < 0) throw DomainError("damped_second_order: need dt > 0 and steps >= 0");
  const Eigen::Index n = w0.size();
  auto rhs = [&](double t, const Vec& y) {
    Vec dy(2 * n);
    dy.head(n) = y.tail(n);
    dy.tail(n) = -theta * y.tail(n) - pot.gradient(t, y.head(n)) / m_w;
    return dy;
  };

  std::vector<FlowPoint> out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  Vec y = Vec::Zero(2 * n);
  y.head(n) = w0;
  for (long k = 0;; ++k) {
    const double t = static_cast<double>(k) * dt;
    out.push_back({t, y.head(n), y.tail(n), pot.value(t, y.head(n))});
    if (k == steps) break;
    y = rk4_step(rhs, t, y, dt);
    require_finite(y, "damped_second_order");
  }
  return out;
}

double sup_distance(const std::vector<FlowPoint>& a, const std::vector<FlowPoint>& b) {
  if (a.size() != b.size()) throw ShapeError("sup_distance: trajectories have different lengths");
  double best = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::abs(a[i].t - b[i].t) > 1e-12) throw DomainError("sup_distance: trajectories on different grids");
    best = std::max(best, (a[i].w - b[i].w).norm());
  }
  return best;
}

}  // namespace wavegrad

#include "wavegrad/constraint_net.hpp"

#include <set>
#include <utility>

#include "wavegrad/errors.hpp"
#include "wavegrad/ode.hpp"

namespace wavegrad {

ConstraintNet::ConstraintNet(int nu, int omega, int eta, std::vector<Arc> arcs, Mat weights,
                             Activation activation, SignalSpec signal)
    : nu_(nu),
      omega_(omega),
      eta_(eta),
      arcs_(std::move(arcs)),
      weights_(std::move(weights)),
      activation_(activation),
      signal_(std::move(signal)) {
  if (nu_ < 1) throw ShapeError("constraint net needs at least one neuron");
  if (omega_ < 0 || eta_ < 0 || omega_ + eta_ > nu_) throw ShapeError("constraint net: need omega + eta <= nu");
  if (weights_.rows() != nu_ || weights_.cols() != nu_) throw ShapeError("constraint net: M must be nu x nu");
  if (signal_.input_width() != omega_ || signal_.output_width() != eta_) {
    throw ShapeError("constraint net: signal widths must be (omega, eta)");
  }
  require_finite(weights_, "constraint net weights");

  mask_ = Mat::Zero(nu_, nu_);
  std::set<std::pair<int, int>> seen;
  for (const Arc& a : arcs_) {
    if (a.to < 0 || a.to >= nu_ || a.from < 0 || a.from >= nu_) throw ShapeError("arc index out of range");
    if (a.to == a.from) throw ShapeError("self loops are not allowed");
    if (a.to < omega_) throw ShapeError("input neurons cannot have incoming arcs");
    if (!seen.emplace(a.to, a.from).second) throw ShapeError("duplicate arc");
    mask_(a.to, a.from) = 1.0;
    if (a.from > a.to) feedforward_ = false;
  }
  for (Eigen::Index j = 0; j < nu_; ++j) {
    for (Eigen::Index k = 0; k < nu_; ++k) {
      if (mask_(j, k) == 0.0 && weights_(j, k) != 0.0) {
        throw ShapeError("weight m(" + std::to_string(j) + "," + std::to_string(k) + ") is not on an arc");
      }
    }
  }
}

ConstraintNet ConstraintNet::with_weights(Mat weights) const {
  return ConstraintNet(nu_, omega_, eta_, arcs_, std::move(weights), activation_, signal_);
}

ConstraintNet ConstraintNet::with_signal(SignalSpec signal) const {
  return ConstraintNet(nu_, omega_, eta_, arcs_, weights_, activation_, std::move(signal));
}

Vec ConstraintNet::pack_weights(const Mat& m) const {
  Vec w(static_cast<Eigen::Index>(arcs_.size()));
  for (std::size_t i = 0; i < arcs_.size(); ++i) w(static_cast<Eigen::Index>(i)) = m(arcs_[i].to, arcs_[i].from);
  return w;
}

Mat ConstraintNet::unpack_weights(const Vec& w) const {
  if (w.size() != static_cast<Eigen::Index>(arcs_.size())) throw ShapeError("unpack_weights: size mismatch");
  Mat m = Mat::Zero(nu_, nu_);
  for (std::size_t i = 0; i < arcs_.size(); ++i) m(arcs_[i].to, arcs_[i].from) = w(static_cast<Eigen::Index>(i));
  return m;
}

nlohmann::json ConstraintNet::to_json() const {
  nlohmann::json arcs = nlohmann::json::array();
  for (const Arc& a : arcs_) arcs.push_back({a.to, a.from});
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < nu_; ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < nu_; ++c) row.push_back(weights_(r, c));
    rows.push_back(std::move(row));
  }
  return {{"nu", nu_},   {"omega", omega_}, {"eta", eta_}, {"arcs", std::move(arcs)},
          {"M", rows}, {"activation", activation_.name()}};
}

ConstraintNet ConstraintNet::from_json(const nlohmann::json& doc, SignalSpec signal) {
  try {
    const int nu = doc.at("nu").get<int>();
    std::vector<Arc> arcs;
    for (const auto& a : doc.at("arcs")) {
      if (a.size() != 2) throw ParseError("arc must be a [j, k] pair");
      arcs.push_back({a.at(0).get<int>(), a.at(1).get<int>()});
    }
    Mat m = Mat::Zero(nu, nu);
    if (doc.contains("M")) {
      const auto& rows = doc.at("M");
      if (static_cast<int>(rows.size()) != nu) throw ParseError("M must have nu rows");
      for (int r = 0; r < nu; ++r) {
        const auto& row = rows.at(static_cast<std::size_t>(r));
        if (static_cast<int>(row.size()) != nu) throw ParseError("M must have nu columns");
        for (int c = 0; c < nu; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
      }
    }
    return ConstraintNet(nu, doc.at("omega").get<int>(), doc.at("eta").get<int>(), std::move(arcs), std::move(m),
                         Activation::parse(doc.value("activation", std::string("tanh"))), std::move(signal));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("constraint net json: ") + e.what());
  }
}

namespace {

void check_args(const ConstraintNet& net, const Vec& xi, const Mat& m) {
  if (xi.size() != net.nu()) throw ShapeError("neuron vector must have nu entries");
  if (m.rows() != net.nu() || m.cols() != net.nu()) throw ShapeError("weight matrix must be nu x nu");
}

// Pre-activations a_j = sum_k m_jk xi_k restricted to arcs.
Vec pre_activations(const ConstraintNet& net, const Vec& xi, const Mat& m) {
  return m.cwiseProduct(net.arc_mask()) * xi;
}

}  // namespace

Vec eval_constraints(const ConstraintNet& net, double tau, const Vec& xi, const Mat& m) {
  check_args(net, xi, m);
  const Vec e = net.signal().jet(tau).u;
  const Vec a = pre_activations(net, xi, m);
  Vec g(net.nu());
  for (int j = 0; j < net.nu(); ++j) {
    g(j) = net.is_input(j) ? xi(j) - e(j) : xi(j) - net.activation().value(a(j));
  }
  return g;
}

Mat jacobian_xi(const ConstraintNet& net, const Vec& xi, const Mat& m) {
  check_args(net, xi, m);
  const Vec a = pre_activations(net, xi, m);
  const Mat mm = m.cwiseProduct(net.arc_mask());
  Mat t = Mat::Identity(net.nu(), net.nu());
  for (int j = net.omega(); j < net.nu(); ++j) {
    const double s1 = net.activation().d1(a(j));
    for (int i = 0; i < net.nu(); ++i) t(i, j) -= s1 * mm(j, i);
  }
  return t;
}

WeightJacobian jacobian_M(const ConstraintNet& net, const Vec& xi, const Mat& m) {
  check_args(net, xi, m);
  const Vec a = pre_activations(net, xi, m);
  WeightJacobian jac{Mat::Zero(net.nu(), net.nu())};
  for (int j = net.omega(); j < net.nu(); ++j) {
    const double s1 = net.activation().d1(a(j));
    for (int b = 0; b < net.nu(); ++b) {
      if (net.arc_mask()(j, b) != 0.0) jac.row(j, b) = -s1 * xi(b);
    }
  }
  return jac;
}

Mat stacked_jacobian(const ConstraintNet& net, const Vec& xi, const Mat& m) {
  const Mat t = jacobian_xi(net, xi, m);
  const WeightJacobian gm = jacobian_M(net, xi, m);
  const auto n_arcs = static_cast<Eigen::Index>(net.arcs().size());
  Mat s = Mat::Zero(net.nu() + n_arcs, net.nu());
  s.topRows(net.nu()) = t;
  for (Eigen::Index k = 0; k < n_arcs; ++k) {
    const Arc& arc = net.arcs()[static_cast<std::size_t>(k)];
    s(net.nu() + k, arc.to) = gm.row(arc.to, arc.from);
  }
  return s;
}

bool check_full_rank(const ConstraintNet& net, const Vec& xi, const Mat& m) {
  Eigen::ColPivHouseholderQR<Mat> qr(stacked_jacobian(net, xi, m));
  qr.setThreshold(1e-10);
  return qr.rank() == net.nu();
}

GramCheck gram_check(const std::vector<Vec>& vectors) {
  const auto n = static_cast<Eigen::Index>(vectors.size());
  if (n == 0) return {true, 0.0, 0.0};
  Mat gram(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& vi = vectors[static_cast<std::size_t>(i)];
      const auto& vj = vectors[static_cast<std::size_t>(j)];
      if (vi.size() != vj.size()) throw ShapeError("gram_check: vectors differ in length");
      gram(i, j) = vi.dot(vj);
    }
  }
  const SpdFactor f = factor_spd(gram);
  return {f.positive_definite(1e-10), f.smallest_pivot(), f.largest_pivot()};
}

bool gram_posdef_check(const std::vector<Vec>& vectors) { return gram_check(vectors).positive_definite; }

std::vector<Vec> multiplier_gram_vectors(const ConstraintNet& net, const Vec& xi, const Mat& m, double m_x,
                                         double m_w) {
  if (!(m_x > 0.0) || !(m_w > 0.0)) throw DomainError("multiplier_gram_vectors: masses must be positive");
  const Mat s = stacked_jacobian(net, xi, m);
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(net.nu()));
  for (int j = 0; j < net.nu(); ++j) {
    Vec v = s.col(j);
    v.head(net.nu()) /= std::sqrt(m_x);
    v.tail(v.size() - net.nu()) /= std::sqrt(m_w);
    out.push_back(std::move(v));
  }
  return out;
}

Vec constraint_time_rate(const ConstraintNet& net, double tau) {
  const Vec e_dot = net.signal().jet(tau).u_dot;
  Vec g = Vec::Zero(net.nu());
  g.head(net.omega()) = -e_dot;
  return g;
}

ConstraintCurvature constraint_curvature(const ConstraintNet& net, double tau, const Vec& xi, const Mat& m,
                                         const Vec& xi_dot, const Mat& m_dot) {
  check_args(net, xi, m);
  check_args(net, xi_dot, m_dot);
  const int nu = net.nu();
  const Mat& mask = net.arc_mask();
  const Mat mm = m.cwiseProduct(mask);
  const Mat md = m_dot.cwiseProduct(mask);
  const Vec a = mm * xi;
  const Vec m_xdot = mm * xi_dot;  // sum_k m_jk xdot_k
  const Vec wdot_x = md * xi;      // sum_k wdot_jk xi_k
  const Vec wdot_xdot = md * xi_dot;

  ConstraintCurvature c{Vec::Zero(nu), Vec::Zero(nu), Vec::Zero(nu), Vec::Zero(nu), Vec::Zero(nu), Vec::Zero(nu)};
  c.tau_tau.head(net.omega()) = -net.signal().jet(tau).u_ddot;
  // The constraint family depends on time only through e(tau), which does
  // not couple to xi or M: tau_xi and tau_m stay zero.
  for (int j = net.omega(); j < nu; ++j) {
    const double s1 = net.activation().d1(a(j));
    const double s2 = net.activation().d2(a(j));
    c.xi_xi(j) = -s2 * m_xdot(j) * m_xdot(j);
    c.m_m(j) = -s2 * wdot_x(j) * wdot_x(j);
    c.xi_m(j) = -s2 * m_xdot(j) * wdot_x(j) - s1 * wdot_xdot(j);
  }
  return c;
}

Vec constraint_rate(const ConstraintNet& net, double tau, const Vec& xi, const Mat& m, const Vec& xi_dot,
                    const Mat& m_dot) {
  const Mat t = jacobian_xi(net, xi, m);
  const WeightJacobian gm = jacobian_M(net, xi, m);
  Vec rate = constraint_time_rate(net, tau) + t.transpose() * xi_dot;
  rate += gm.row.cwiseProduct(m_dot).rowwise().sum();
  return rate;
}

Vec forward_solve(const ConstraintNet& net, double tau, const Mat& m) {
  if (!net.feedforward()) throw DomainError("forward_solve: network has cycles");
  if (m.rows() != net.nu() || m.cols() != net.nu()) throw ShapeError("weight matrix must be nu x nu");
  const Vec e = net.signal().jet(tau).u;
  const Mat mm = m.cwiseProduct(net.arc_mask());
  Vec xi = Vec::Zero(net.nu());
  for (int j = 0; j < net.nu(); ++j) {
    xi(j) = net.is_input(j) ? e(j) : net.activation().value(mm.row(j).dot(xi));
  }
  return xi;
}

}  // namespace wavegrad

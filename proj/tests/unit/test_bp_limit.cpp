#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "test_util.hpp"
#include "wavegrad/bp_limit.hpp"
#include "wavegrad/bp_oracle.hpp"
#include "wavegrad/errors.hpp"
#include "wavegrad/lagrangian.hpp"
#include "wavegrad/wave_engine.hpp"

using namespace wavegrad;

namespace {

const Activation kId(Activation::Kind::identity);
const Activation kTanh(Activation::Kind::tanh);

SignalSpec scalar_pair(double u, double y) { return SignalSpec(ConstantSignal{Vec::Constant(1, u), Vec::Constant(1, y)}); }

TEST(BpLimitDeltas, HandBackSubstitution) {
  const auto net = fixtures::chain({3.0, 2.0}, kId, scalar_pair(1.0, 0.0));
  const Vec xi = forward_solve(net, 0.0, net.weights());
  Vec vx(3);
  vx << 0.0, 0.0, 1.0;
  const Vec d = bp_limit_deltas(net, xi, vx);
  EXPECT_DOUBLE_EQ(d(0), -6.0);
  EXPECT_DOUBLE_EQ(d(1), -2.0);
  EXPECT_DOUBLE_EQ(d(2), -1.0);
  EXPECT_TRUE(bp_limit_deltas(net, xi, Vec::Zero(3)).isZero());
}

TEST(BpLimitDeltas, ChainFormulas) {
  const double w21 = 0.9, w32 = -0.7;
  const auto net = fixtures::chain({w21, w32}, kTanh, scalar_pair(0.4, 0.3));
  const Vec xi = forward_solve(net, 0.0, net.weights());
  const Vec vx = loss_gradient_x(net, 0.0, xi, LossSpec{LossSpec::Kind::half_squared_error, 1});
  const Vec d = bp_limit_deltas(net, xi, vx);
  auto sp = [](double a) { return 1.0 - std::tanh(a) * std::tanh(a); };
  EXPECT_DOUBLE_EQ(d(2), -vx(2));
  EXPECT_NEAR(d(1), sp(w32 * xi(1)) * w32 * d(2), 1e-16);
  EXPECT_NEAR(d(0), sp(w21 * xi(0)) * w21 * d(1), 1e-16);
}

TEST(BpLimitDeltas, RefusesCycles) {
  const SignalSpec sig = scalar_pair(0.0, 0.0);
  const ConstraintNet cyc(3, 1, 1, {{1, 2}, {2, 1}}, Mat::Zero(3, 3), kTanh, sig);
  EXPECT_THROW(bp_limit_deltas(cyc, Vec::Zero(3), Vec::Zero(3)), DomainError);
}

TEST(BpLimitWeightRate, ZeroDeltaAndSupport) {
  std::mt19937_64 rng(1);
  const auto net = fixtures::random_feedforward(rng, 6, 2, 1, kTanh, fixtures::constant_signal(rng, 2, 1));
  const Vec xi = forward_solve(net, 0.0, net.weights());
  EXPECT_TRUE(bp_limit_weight_rate(net, xi, Vec::Zero(6), 1.0).isZero());
  const Mat rate = bp_limit_weight_rate(net, xi, fixtures::random_vec(rng, 6), 1.0);
  EXPECT_TRUE(rate.cwiseProduct((Mat::Ones(6, 6) - net.arc_mask())).isZero());
  EXPECT_THROW(bp_limit_weight_rate(net, xi, Vec::Zero(6), 0.0), DomainError);
}

// The massless reduction against the instantaneous backprop oracle on the
// layered net that the constraint net encodes.
void expect_reduction_matches(const LayeredNet& layered, const Vec& u, const Vec& y, double gamma, double tol) {
  const SignalSpec sig(ConstantSignal{u, y});
  const ConstraintNet net = encode_layered(layered, sig);
  const LossSpec loss{LossSpec::Kind::half_squared_error, net.eta()};
  const Vec xi = forward_solve(net, 0.0, net.weights());
  const Mat rate = bp_limit_weight_rate(net, xi, bp_limit_deltas(net, xi, loss_gradient_x(net, 0.0, xi, loss)), gamma);
  const Mat want = -embed_layered(layered, backprop_exact(layered, u, y, loss)) / gamma;
  for (const Arc& a : net.arcs()) {
    const double ref = want(a.to, a.from);
    const double err = std::abs(rate(a.to, a.from) - ref);
    EXPECT_LE(err, tol * std::abs(ref)) << "arc " << a.to << "<-" << a.from;
  }
}

TEST(BpLimitWeightRate, ChainsMatchOracle) {
  for (int len : {3, 10}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto layered = new_layered(std::vector<int>(static_cast<std::size_t>(len), 1), kTanh, UniformInit{seed, 1.0});
      expect_reduction_matches(layered, Vec::Constant(1, 0.8), Vec::Constant(1, -0.3), 1.0, len == 3 ? 1e-12 : 1e-10);
    }
  }
}

TEST(BpLimitWeightRate, LayeredNetsMatchOracle) {
  std::mt19937_64 rng(8);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto layered = new_layered({3, 4, 5, 2}, kTanh, UniformInit{seed, 0.8});
    expect_reduction_matches(layered, fixtures::random_vec(rng, 3), fixtures::random_vec(rng, 2), 2.5, 1e-12);
  }
}

TEST(BpLimitWeightRate, RateDescendsTheLoss) {
  const auto layered = new_layered({2, 3, 1}, kTanh, UniformInit{3, 0.8});
  const Vec u = Vec::LinSpaced(2, -0.5, 0.7);
  const Vec y = Vec::Constant(1, 0.9);
  const ConstraintNet net = encode_layered(layered, SignalSpec(ConstantSignal{u, y}));
  const LossSpec loss{LossSpec::Kind::half_squared_error, 1};
  const Vec xi = forward_solve(net, 0.0, net.weights());
  const Mat rate = bp_limit_weight_rate(net, xi, bp_limit_deltas(net, xi, loss_gradient_x(net, 0.0, xi, loss)), 1.0);
  const Mat grad = embed_layered(layered, backprop_exact(layered, u, y, loss));
  EXPECT_LT(rate.cwiseProduct(grad).sum(), 0.0);
  auto value = [&](const Mat& m) { return loss.value(forward_solve(net, 0.0, m).tail(1), y); };
  EXPECT_LT(value(net.weights() + 1e-3 * rate), value(net.weights()));
}

// Wave deltas fold sigma' into delta; the massless deltas apply it in the
// weight rate. Both yield the same weight gradient.
TEST(ConventionBridge, WaveGradientEqualsMasslessRate) {
  const int L = 5;
  const auto layered = new_layered(std::vector<int>(static_cast<std::size_t>(L) + 1, 1), kTanh, UniformInit{12, 1.0});
  const Vec u = Vec::Constant(1, 0.6);
  const Vec y = Vec::Constant(1, -0.2);
  const SignalSpec sig(ConstantSignal{u, y});
  const auto wr = run(layered, sig, 2 * L + 2);
  const auto& g = wr.trace.back().grad;

  const ConstraintNet net = encode_layered(layered, sig);
  const LossSpec loss{LossSpec::Kind::half_squared_error, 1};
  const Vec xi = forward_solve(net, 0.0, net.weights());
  const Mat rate = bp_limit_weight_rate(net, xi, bp_limit_deltas(net, xi, loss_gradient_x(net, 0.0, xi, loss)), 1.0);
  for (int l = 1; l <= L; ++l) {
    ASSERT_TRUE(g.valid[static_cast<std::size_t>(l)]);
    EXPECT_NEAR(g.g[static_cast<std::size_t>(l)](0, 0), -rate(l, l - 1), 1e-15 + 1e-12 * std::abs(rate(l, l - 1)));
  }
}

TEST(EmbedLayered, PlacesBlocksAndChecksShapes) {
  const auto layered = new_layered({2, 3, 1}, kTanh, UniformInit{1});
  const Mat m = embed_layered(layered, layered.weights());
  EXPECT_EQ(m.block(2, 0, 3, 2), layered.weight(0));
  EXPECT_EQ(m.block(5, 2, 1, 3), layered.weight(1));
  EXPECT_EQ(m, encode_layered(layered, SignalSpec(ConstantSignal{Vec::Zero(2), Vec::Zero(1)})).weights());
  EXPECT_THROW(embed_layered(layered, {Mat::Zero(3, 2)}), ShapeError);
}

Potential quadratic() {
  return {[](double, const Vec& w) { return 0.5 * w.squaredNorm(); }, [](double, const Vec& w) { return w; }};
}

TEST(GradientFlow, QuadraticDecaysExponentially) {
  const Vec w0 = Vec::LinSpaced(3, -1.0, 2.0);
  const auto rk = gradient_flow(quadratic(), w0, 1.0, 1e-3, 1000, Stepper::rk4);
  EXPECT_LT((rk.back().w - w0 * std::exp(-1.0)).lpNorm<Eigen::Infinity>(), 1e-10);
  const auto eu = gradient_flow(quadratic(), w0, 1.0, 1e-3, 1000, Stepper::euler);
  EXPECT_LT((eu.back().w - w0 * std::exp(-1.0)).lpNorm<Eigen::Infinity>(), 1e-3);
  EXPECT_EQ(rk.size(), 1001u);
  EXPECT_THROW(gradient_flow(quadratic(), w0, 0.0, 1e-3, 10), DomainError);
}

TEST(GradientFlow, StationaryPointStaysPut) {
  const auto traj = gradient_flow(quadratic(), Vec::Zero(2), 1.0, 1e-2, 50);
  for (const auto& p : traj) EXPECT_TRUE(p.w.isZero());
}

TEST(GradientFlow, ScalarRegressionLossDecreases) {
  const auto layered = new_layered({1, 1}, kTanh, ExplicitInit{{Mat::Constant(1, 1, -0.3)}});
  const Potential pot = supervised_potential(layered, scalar_pair(0.9, 0.5), {LossSpec::Kind::half_squared_error, 1});
  const auto traj = gradient_flow(pot, flatten_weights(layered.weights()), 0.5, 1e-2, 300);
  for (std::size_t k = 1; k < traj.size(); ++k) EXPECT_LT(traj[k].loss, traj[k - 1].loss);
}

TEST(DampedSecondOrder, UndampedOscillatorConservesEnergy) {
  const Vec w0 = Vec::Constant(1, 1.0);
  const double dt = 1e-3;
  const long steps = std::lround(2.0 * std::numbers::pi / dt);
  const auto traj = damped_second_order(quadratic(), w0, 1.0, 0.0, dt, steps);
  for (const auto& p : traj) {
    const double energy = 0.5 * p.w_dot.squaredNorm() + 0.5 * p.w.squaredNorm();
    EXPECT_NEAR(energy, 0.5, 1e-6);
  }
  EXPECT_NEAR(traj.back().w(0), 1.0, 1e-5);
}

TEST(DampedSecondOrder, RestAtStationaryPoint) {
  const auto traj = damped_second_order(quadratic(), Vec::Zero(2), 1.0, 3.0, 1e-2, 50);
  for (const auto& p : traj) EXPECT_TRUE(p.w.isZero());
  EXPECT_THROW(damped_second_order(quadratic(), Vec::Zero(2), 0.0, 1.0, 1e-2, 5), DomainError);
  EXPECT_THROW(damped_second_order(quadratic(), Vec::Zero(2), 1.0, -1.0, 1e-2, 5), DomainError);
}

TEST(DampedSecondOrder, ApproachesGradientFlowAsDampingGrows) {
  const Vec w0 = Vec::Constant(1, 1.0);
  const double gamma = 1.0, dt = 1e-4;
  const long steps = 10000;
  const auto flow = gradient_flow(quadratic(), w0, gamma, dt, steps);
  double prev = INFINITY;
  for (double theta : {10.0, 100.0, 1000.0}) {
    const double d = sup_distance(damped_second_order(quadratic(), w0, gamma / theta, theta, dt, steps), flow);
    EXPECT_LT(d, prev) << "theta " << theta;
    prev = d;
  }
}

TEST(FlattenWeights, RoundTrip) {
  const auto layered = new_layered({2, 3, 4}, kTanh, UniformInit{6});
  const auto back = unflatten_weights(flatten_weights(layered.weights()), layered);
  EXPECT_EQ(back, layered.weights());
  EXPECT_THROW(unflatten_weights(Vec::Zero(3), layered), ShapeError);
}

}  // namespace

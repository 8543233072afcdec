#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "test_util.hpp"
#include "wavegrad/bp_oracle.hpp"
#include "wavegrad/errors.hpp"
#include "wavegrad/wave_engine.hpp"

using namespace wavegrad;

namespace {

const Activation kId(Activation::Kind::identity);
const Activation kTanh(Activation::Kind::tanh);

LayeredNet deep_net(int depth = 9, int width = 8, std::uint64_t seed = 4) {
  return new_layered(std::vector<int>(static_cast<std::size_t>(depth) + 1, width), kTanh, UniformInit{seed});
}

TEST(WaveEngine, FillTimesAndFrameTags) {
  const int L = 9;
  const auto net = deep_net(L);
  std::mt19937_64 rng(1);
  const SignalSpec spec(SinusoidSignal{fixtures::random_vec(rng, 8), fixtures::random_vec(rng, 8), 0.5, 17.0, 0.0});
  const auto wr = run(net, spec, 3 * L);
  for (const auto& rec : wr.trace) {
    const long t = rec.state.t;
    for (int l = 0; l <= L; ++l) {
      EXPECT_EQ(rec.state.filled_fwd(l), t >= l) << "t " << t << " l " << l;
      EXPECT_EQ(rec.state.filled_bwd(l), t >= 2 * L - l) << "t " << t << " l " << l;
      if (rec.state.filled_fwd(l)) {
        EXPECT_EQ(*rec.state.x_frame[static_cast<std::size_t>(l)], t - l);
      }
      if (rec.state.filled_bwd(l)) {
        EXPECT_EQ(*rec.state.delta_frame[static_cast<std::size_t>(l)], t - (L - l));
      }
    }
  }
}

TEST(WaveEngine, GradientFrameIndicesAndSynchronization) {
  const int L = 9;
  const auto net = deep_net(L);
  std::mt19937_64 rng(2);
  const SignalSpec spec(StepwiseSignal{{{fixtures::random_vec(rng, 8), fixtures::random_vec(rng, 8)},
                                        {fixtures::random_vec(rng, 8), fixtures::random_vec(rng, 8)}},
                                       3,
                                       1});
  const auto wr = run(net, spec, 40);
  const int ls = *sync_layer(L);
  long valid_at_sync = 0;
  for (const auto& rec : wr.trace) {
    const auto& g = rec.grad;
    for (int l = 1; l <= L; ++l) {
      const auto li = static_cast<std::size_t>(l);
      if (!g.valid[li]) continue;
      EXPECT_EQ(*g.frame_fwd[li], g.t - l + 1);
      EXPECT_EQ(*g.frame_bwd[li], g.t - L + l);
      EXPECT_EQ(*g.frame_fwd[li] - *g.frame_bwd[li], (L - l) - (l - 1));
      EXPECT_EQ(std::abs(*g.frame_fwd[li] - *g.frame_bwd[li]), frame_mismatch(l, L));
      EXPECT_EQ(g.g[li], Mat(rec.state.delta[li] * rec.state.x[li - 1].transpose()));
      if (l == ls) ++valid_at_sync;
    }
  }
  EXPECT_GT(valid_at_sync, 20);
}

TEST(WaveEngine, DepthOneIsExactFromSecondTick) {
  const auto net = new_layered({3, 2}, kTanh, UniformInit{8});
  const Vec u = Vec::LinSpaced(3, -0.4, 0.9);
  const Vec y = Vec::LinSpaced(2, 0.3, -0.2);
  const SignalSpec spec(ConstantSignal{u, y});
  const auto wr = run(net, spec, 6);
  const LossSpec loss{LossSpec::Kind::half_squared_error, 2};
  const Mat ref = backprop_exact(net, u, y, loss)[0];
  EXPECT_FALSE(wr.trace[0].grad.valid[1]);
  for (std::size_t k = 1; k < wr.trace.size(); ++k) {
    ASSERT_TRUE(wr.trace[k].grad.valid[1]);
    EXPECT_LT(relative_error(wr.trace[k].grad.g[1], ref), 1e-12);
  }
}

TEST(WaveEngine, IdentityChainArrivesAtTickTwo) {
  const auto net = new_layered({1, 1, 1}, kId, ExplicitInit{{Mat::Ones(1, 1), Mat::Ones(1, 1)}});
  const auto wr = run(net, SignalSpec(ConstantSignal{Vec::Ones(1), Vec::Zero(1)}), 4);
  EXPECT_FALSE(wr.trace[1].state.filled_fwd(2));
  EXPECT_TRUE(wr.trace[2].state.filled_fwd(2));
  EXPECT_EQ(wr.trace[2].state.x[2](0), 1.0);
}

TEST(WaveEngine, ConstantStreamMatchesOracleEveryValidTick) {
  const int L = 9;
  const auto net = deep_net(L, 8, 21);
  std::mt19937_64 rng(3);
  const Vec u = fixtures::random_vec(rng, 8);
  const Vec y = fixtures::random_vec(rng, 8);
  const auto wr = run(net, SignalSpec(ConstantSignal{u, y}), 2 * L + 2);
  const auto ref = backprop_exact(net, u, y, {LossSpec::Kind::half_squared_error, 8});
  int checked = 0;
  for (const auto& rec : wr.trace) {
    for (int l = 1; l <= L; ++l) {
      const auto li = static_cast<std::size_t>(l);
      if (!rec.grad.valid[li]) continue;
      EXPECT_LT(relative_error(rec.grad.g[li], ref[li - 1]), 1e-10);
      ++checked;
    }
  }
  // Every layer is valid on the last tick.
  for (int l = 1; l <= L; ++l) EXPECT_TRUE(wr.trace.back().grad.valid[static_cast<std::size_t>(l)]);
  EXPECT_GT(checked, L);
}

TEST(WaveEngine, ArrivedOutputEqualsInstantForward) {
  const int L = 9;
  const auto net = deep_net(L, 5, 6);
  const Vec u = Vec::LinSpaced(5, -1, 1);
  const auto wr = run(net, SignalSpec(ConstantSignal{u, Vec::Zero(5)}), L + 1);
  EXPECT_EQ(wr.trace[static_cast<std::size_t>(L)].state.x[static_cast<std::size_t>(L)], forward_instant(net, u).back());
}

TEST(WaveEngine, TickReadsOnlyLocalSlots) {
  const int L = 4;
  const auto net = deep_net(L, 3, 2);
  WaveState st = WaveState::empty(net);
  const LossSpec loss{LossSpec::Kind::half_squared_error, 3};
  AccessLog log;
  for (int k = 0; k < 2 * L + 1; ++k) {
    log.targets.clear();
    tick(net, st, Vec::Ones(3), Vec::Zero(3), loss, &log);
  }
  using Slot = AccessLog::Slot;
  int forward = 0, backward = 0;
  for (const auto& target : log.targets) {
    std::set<std::pair<int, int>> reads;
    for (const auto& r : target.reads) reads.insert({static_cast<int>(r.slot), r.layer});
    std::set<std::pair<int, int>> allowed;
    const int l = target.layer;
    if (target.forward) {
      ++forward;
      if (l == 0) {
        allowed = {{static_cast<int>(Slot::input), 0}};
      } else {
        allowed = {{static_cast<int>(Slot::x), l - 1}, {static_cast<int>(Slot::weight), l - 1}};
      }
    } else {
      ++backward;
      if (l == L) {
        allowed = {{static_cast<int>(Slot::x), L}, {static_cast<int>(Slot::target), L}};
      } else {
        allowed = {{static_cast<int>(Slot::delta), l + 1}, {static_cast<int>(Slot::weight), l}};
        if (l > 0) allowed.insert({static_cast<int>(Slot::x), l});
      }
    }
    EXPECT_TRUE(std::includes(allowed.begin(), allowed.end(), reads.begin(), reads.end()))
        << (target.forward ? "forward" : "backward") << " target layer " << l;
  }
  EXPECT_EQ(forward, L + 1);
  EXPECT_EQ(backward, L + 1);
}

TEST(WaveEngine, ShapeErrors) {
  const auto net = deep_net(2, 3);
  WaveState st = WaveState::empty(net);
  const LossSpec loss{LossSpec::Kind::half_squared_error, 3};
  EXPECT_THROW(tick(net, st, Vec::Zero(2), Vec::Zero(3), loss), ShapeError);
  EXPECT_THROW(tick(net, st, Vec::Zero(3), Vec::Zero(4), loss), ShapeError);
  WaveState other = WaveState::empty(deep_net(3, 3));
  EXPECT_THROW(tick(net, other, Vec::Zero(3), Vec::Zero(3), loss), ShapeError);
}

TEST(WaveRun, TickCountSemantics) {
  const auto net = deep_net(2, 2);
  const SignalSpec spec(ConstantSignal{Vec::Ones(2), Vec::Zero(2)});
  EXPECT_THROW(run(net, spec, 0), DomainError);
  EXPECT_EQ(run(net, spec, 1).trace.size(), 1u);
  EXPECT_THROW(run(net, SignalSpec(ConstantSignal{Vec::Ones(3), Vec::Zero(2)}), 3), ShapeError);
}

TEST(WaveRun, StaircaseWavefrontDuringFill) {
  const int L = 9;
  const auto net = deep_net(L);
  const SignalSpec spec(SinusoidSignal{Vec::Zero(8), Vec::Zero(8), 1.0, 50.0, 0.0});
  const auto wr = run(net, spec, 2 * L);
  for (long t = 0; t <= L; ++t) {
    const auto& st = wr.trace[static_cast<std::size_t>(t)].state;
    int filled = 0;
    for (int l = 0; l <= L; ++l) filled += st.filled_fwd(l) ? 1 : 0;
    EXPECT_EQ(filled, t + 1);
  }
}

// Online diffusion learning on a 2-layer scalar net versus plain gradient
// descent with the oracle gradient, started from the weights in effect once
// every layer is valid.
TEST(WaveRun, LearningTracksGradientDescentAfterFill) {
  const auto net = new_layered({1, 1, 1}, kTanh, ExplicitInit{{Mat::Constant(1, 1, 0.7), Mat::Constant(1, 1, -0.4)}});
  const Vec u = Vec::Constant(1, 0.9);
  const Vec y = Vec::Constant(1, 0.5);
  const double eta = 1e-5;
  const long ticks = 60;
  const auto wr = run(net, SignalSpec(ConstantSignal{u, y}), ticks, eta);
  const LossSpec loss{LossSpec::Kind::half_squared_error, 1};

  std::size_t k0 = 0;
  while (!(wr.trace[k0].grad.valid[1] && wr.trace[k0].grad.valid[2])) ++k0;
  LayeredNet gd = wr.nets[k0];
  double prev_loss = instant_loss(gd, u, y, loss);
  for (std::size_t k = k0; k < wr.trace.size(); ++k) {
    const auto& wave_net = k + 1 < wr.nets.size() ? wr.nets[k + 1] : wr.final_net;
    const auto g = backprop_exact(gd, u, y, loss);
    gd = gd.with_weights({Mat(gd.weight(0) - eta * g[0]), Mat(gd.weight(1) - eta * g[1])});
    for (int l = 0; l < 2; ++l) EXPECT_NEAR(wave_net.weight(l)(0, 0), gd.weight(l)(0, 0), 1e-8) << "tick " << k;
    const double cur = instant_loss(wave_net, u, y, loss);
    EXPECT_LT(cur, prev_loss);
    prev_loss = cur;
  }
}

TEST(SyncHelpers, Examples) {
  EXPECT_EQ(sync_layer(9), 5);
  EXPECT_EQ(sync_layer(1), 1);
  EXPECT_EQ(sync_layer(3), 2);
  EXPECT_FALSE(sync_layer(4).has_value());
  EXPECT_THROW(sync_layer(0), DomainError);

  EXPECT_EQ(frame_mismatch(5, 9), 0);
  EXPECT_EQ(frame_mismatch(1, 9), 8);
  EXPECT_EQ(frame_mismatch(9, 9), 8);
  EXPECT_THROW(frame_mismatch(0, 9), DomainError);
  EXPECT_THROW(frame_mismatch(10, 9), DomainError);

  EXPECT_DOUBLE_EQ(sync_interval(8.0, 9), 1.0);
  EXPECT_DOUBLE_EQ(sync_interval(1.0, 2), 1.0);
  EXPECT_NEAR(sync_interval(0.27, 10), 0.03, 1e-15);
  EXPECT_THROW(sync_interval(1.0, 1), DomainError);

  EXPECT_EQ(sync_delay(9), 4);
  EXPECT_EQ(sync_delay(1), 0);
  EXPECT_EQ(sync_delay(3), 1);
  EXPECT_THROW(sync_delay(4), DomainError);
}

}  // namespace

#include "wavegrad/wave_engine.hpp"

#include <cstdlib>

#include "wavegrad/errors.hpp"

namespace wavegrad {

WaveState WaveState::empty(const LayeredNet& net) {
  WaveState s;
  const auto n = static_cast<std::size_t>(net.depth()) + 1;
  s.x.resize(n);
  s.pre.resize(n);
  s.delta.resize(n);
  for (std::size_t l = 0; l < n; ++l) {
    s.x[l] = Vec::Zero(net.width(static_cast<int>(l)));
    s.pre[l] = Vec::Zero(net.width(static_cast<int>(l)));
    s.delta[l] = Vec::Zero(net.width(static_cast<int>(l)));
  }
  s.x_frame.assign(n, std::nullopt);
  s.delta_frame.assign(n, std::nullopt);
  return s;
}

namespace {

void check_state(const LayeredNet& net, const WaveState& s) {
  const auto n = static_cast<std::size_t>(net.depth()) + 1;
  if (s.x.size() != n || s.pre.size() != n || s.delta.size() != n || s.x_frame.size() != n ||
      s.delta_frame.size() != n) {
    throw ShapeError("wave state depth does not match the network");
  }
  for (std::size_t l = 0; l < n; ++l) {
    const int w = net.width(static_cast<int>(l));
    if (s.x[l].size() != w || s.delta[l].size() != w || s.pre[l].size() != w) {
      throw ShapeError("wave state layer " + std::to_string(l) + " has the wrong width");
    }
  }
}

}  // namespace

WaveGradient tick(const LayeredNet& net, WaveState& state, const Vec& u, const Vec& y, const LossSpec& loss,
                  AccessLog* log) {
  const int depth = net.depth();
  const Activation act = net.activation();
  check_state(net, state);
  if (u.size() != net.width(0)) throw ShapeError("tick: input width mismatch");
  if (y.size() != net.width(depth)) throw ShapeError("tick: target width mismatch");

  using Slot = AccessLog::Slot;
  auto begin = [&](bool forward, int layer) {
    if (log != nullptr) log->targets.push_back({forward, layer, {}});
  };
  auto note = [&](Slot slot, int layer) {
    if (log != nullptr) log->targets.back().reads.push_back({slot, layer});
  };

  const long now = state.t + 1;
  WaveState next = state;
  next.t = now;

  // Forward: x[l+1] <- sigma(W_l x[l]).
  begin(true, 0);
  note(Slot::input, 0);
  next.x[0] = u;
  next.x_frame[0] = now;
  for (int l = 0; l < depth; ++l) {
    const auto src = static_cast<std::size_t>(l);
    begin(true, l + 1);
    note(Slot::x, l);
    note(Slot::weight, l);
    if (!state.x_frame[src]) {
      next.x[src + 1].setZero();
      next.pre[src + 1].setZero();
      next.x_frame[src + 1].reset();
      continue;
    }
    next.pre[src + 1] = net.weight(l) * state.x[src];
    next.x[src + 1] = act.value(next.pre[src + 1]);
    next.x_frame[src + 1] = state.x_frame[src];
  }

  // Backward: delta[l] <- sigma'_l W_l^T delta[l+1]; the input layer has no
  // nonlinearity.
  for (int l = depth - 1; l >= 0; --l) {
    const auto dst = static_cast<std::size_t>(l);
    begin(false, l);
    note(Slot::delta, l + 1);
    note(Slot::weight, l);
    if (!state.delta_frame[dst + 1]) {
      next.delta[dst].setZero();
      next.delta_frame[dst].reset();
      continue;
    }
    Vec back = net.weight(l).transpose() * state.delta[dst + 1];
    if (l > 0) {
      note(Slot::x, l);
      back = back.cwiseProduct(act.d1(state.pre[dst]));
    }
    next.delta[dst] = std::move(back);
    next.delta_frame[dst] = state.delta_frame[dst + 1];
  }

  // Output delta launched from the activation that just arrived at layer L.
  const auto top = static_cast<std::size_t>(depth);
  begin(false, depth);
  note(Slot::x, depth);
  note(Slot::target, depth);
  if (next.x_frame[top]) {
    next.delta[top] = loss.gradient(next.x[top], y).cwiseProduct(act.d1(next.pre[top]));
    next.delta_frame[top] = now;
  } else {
    next.delta[top].setZero();
    next.delta_frame[top].reset();
  }

  for (int l = 0; l <= depth; ++l) {
    require_finite(next.x[static_cast<std::size_t>(l)], "wave activation");
    require_finite(next.delta[static_cast<std::size_t>(l)], "wave delta");
  }
  state = std::move(next);

  WaveGradient out;
  out.t = now;
  out.g.resize(top + 1);
  out.valid.assign(top + 1, false);
  out.frame_fwd.assign(top + 1, std::nullopt);
  out.frame_bwd.assign(top + 1, std::nullopt);
  for (std::size_t l = 1; l <= top; ++l) {
    out.frame_fwd[l] = state.x_frame[l - 1];
    out.frame_bwd[l] = state.delta_frame[l];
    out.valid[l] = out.frame_fwd[l].has_value() && out.frame_bwd[l].has_value();
    out.g[l] = out.valid[l] ? Mat(state.delta[l] * state.x[l - 1].transpose())
                            : Mat::Zero(net.width(static_cast<int>(l)), net.width(static_cast<int>(l) - 1));
  }
  return out;
}

WaveRun run(const LayeredNet& net, const SignalSpec& spec, long ticks, std::optional<double> learning_rate) {
  if (ticks < 1) throw DomainError("run: ticks must be >= 1");
  if (spec.input_width() != net.width(0) || spec.output_width() != net.width(net.depth())) {
    throw ShapeError("run: signal widths do not match the network");
  }
  if (learning_rate && !(*learning_rate > 0.0)) throw DomainError("run: learning rate must be positive");

  const LossSpec loss{LossSpec::Kind::half_squared_error, net.width(net.depth())};
  WaveRun out{{}, net, {}};
  out.trace.reserve(static_cast<std::size_t>(ticks));
  WaveState state = WaveState::empty(net);
  for (long t = 0; t < ticks; ++t) {
    const auto s = spec.sample(t);
    if (learning_rate) out.nets.push_back(out.final_net);
    WaveGradient g = tick(out.final_net, state, s.u, s.y, loss);
    if (learning_rate) {
      std::vector<Mat> w = out.final_net.weights();
      for (int l = 1; l <= g.depth(); ++l) {
        if (g.valid[static_cast<std::size_t>(l)]) {
          w[static_cast<std::size_t>(l - 1)] -= *learning_rate * g.g[static_cast<std::size_t>(l)];
        }
      }
      out.final_net = out.final_net.with_weights(std::move(w));
    }
    out.trace.push_back({state, std::move(g)});
  }
  return out;
}

std::optional<int> sync_layer(int depth) {
  if (depth < 1) throw DomainError("sync_layer: depth must be >= 1");
  if (depth % 2 == 0) return std::nullopt;
  return (depth + 1) / 2;
}

int frame_mismatch(int layer, int depth) {
  if (layer < 1 || layer > depth) throw DomainError("frame_mismatch: layer out of range");
  return std::abs((layer - 1) - (depth - layer));
}

double sync_interval(double tau_s, int depth) {
  if (depth < 2) throw DomainError("sync_interval: depth must be >= 2");
  if (!(tau_s > 0.0)) throw DomainError("sync_interval: tau_s must be positive");
  return tau_s / (depth - 1);
}

int sync_delay(int depth) {
  if (depth < 1 || depth % 2 == 0) throw DomainError("sync_delay: depth must be odd and positive");
  return (depth - 1) / 2;
}

}  // namespace wavegrad

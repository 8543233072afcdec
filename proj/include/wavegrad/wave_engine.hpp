#pragma once

#include <optional>
#include <vector>

#include "wavegrad/bp_oracle.hpp"
#include "wavegrad/net_core.hpp"
#include "wavegrad/signals.hpp"

namespace wavegrad {

/// Launch time of the value sitting at a layer; empty before the wave
/// reaches it.
using FrameTag = std::optional<long>;

/// One time slice of the time-delayed network. Forward activations and
/// backward deltas for every layer are co-resident.
///
/// Timing: the first tick produces t = 0 and loads u_0 into x[0]. The
/// forward wave climbs one layer per tick, so x[l] carries input frame
/// t - l once filled (from t = l). The output delta is launched at t = L
/// from x[L] and y_t and descends one layer per tick, so delta[l] carries
/// supervision frame t - (L - l) once filled (from t = 2L - l).
struct WaveState {
  long t = -1;
  std::vector<Vec> x;       // x[l] = x_{t,l}; x[0] is the input slot
  std::vector<Vec> pre;     // pre-activation that produced x[l] (unused for l = 0)
  std::vector<Vec> delta;   // delta[l] = delta_{t,l}
  std::vector<FrameTag> x_frame;
  std::vector<FrameTag> delta_frame;

  static WaveState empty(const LayeredNet& net);

  int depth() const noexcept { return static_cast<int>(x.size()) - 1; }
  bool filled_fwd(int l) const { return x_frame.at(static_cast<std::size_t>(l)).has_value(); }
  bool filled_bwd(int l) const { return delta_frame.at(static_cast<std::size_t>(l)).has_value(); }
};

/// g[l] = delta[l] x[l-1]^T for l = 1..L (index 0 unused). g[l] has the
/// shape of W_{l-1} and is the loss gradient, so descent is along -g.
struct WaveGradient {
  long t = -1;
  std::vector<Mat> g;
  std::vector<bool> valid;
  std::vector<FrameTag> frame_fwd;  // input frame of x[l-1]:       t - l + 1
  std::vector<FrameTag> frame_bwd;  // supervision frame of delta[l]: t - L + l

  int depth() const noexcept { return static_cast<int>(g.size()) - 1; }
};

/// Records which slots a tick reads to produce each new value.
struct AccessLog {
  enum class Slot { x, delta, weight, input, target };
  struct Read {
    Slot slot;
    int layer;
  };
  struct Target {
    bool forward;  // true: new x[layer]; false: new delta[layer]
    int layer;
    std::vector<Read> reads;
  };
  std::vector<Target> targets;
};

/// Advances both waves by one layer. All new values are computed from the
/// old slice, then committed together. Throws ShapeError on width mismatch.
WaveGradient tick(const LayeredNet& net, WaveState& state, const Vec& u, const Vec& y, const LossSpec& loss,
                  AccessLog* log = nullptr);

struct TraceRecord {
  WaveState state;
  WaveGradient grad;
};

struct WaveRun {
  std::vector<TraceRecord> trace;
  LayeredNet final_net;
  /// Weights in effect at each tick (before that tick's update), only
  /// recorded when learning.
  std::vector<LayeredNet> nets;
};

/// Drives `ticks` ticks with (u_t, y_t) = spec.sample(t). With a learning
/// rate, W_{l-1} <- W_{l-1} - rate * g[l] after each tick where g[l] is valid.
/// The loss is the half squared error on the output layer.
WaveRun run(const LayeredNet& net, const SignalSpec& spec, long ticks, std::optional<double> learning_rate = {});

/// Layer where forward and backward step counts coincide: (L + 1) / 2 for
/// odd L, none for even L.
std::optional<int> sync_layer(int depth);

/// |(l - 1) - (L - l)|: steps separating the frames that meet at layer l.
int frame_mismatch(int layer, int depth);

/// Per-layer time step needed for the stream to be nearly constant over
/// tau_s = (L - 1) dt.
double sync_interval(double tau_s, int depth);

/// Ticks by which the gradient at the synchronization layer lags its
/// frame: (L - 1) / 2. Odd depth only.
int sync_delay(int depth);

}  // namespace wavegrad

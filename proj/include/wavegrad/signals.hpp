#pragma once

#include <variant>
#include <vector>

#include "wavegrad/net_core.hpp"

namespace wavegrad {

struct SignalSample {
  Vec u;
  Vec y;
};

/// Input with its first two time derivatives, plus the supervision, at a
/// continuous time.
struct SignalJet {
  Vec u;
  Vec u_dot;
  Vec u_ddot;
  Vec y;
};

struct ConstantSignal {
  Vec u;
  Vec y;
};

/// Cycles through `levels`, holding each for `dwell` ticks. Entering a new
/// level the value moves linearly from the previous level and arrives after
/// `ramp` ticks (ramp = 1 is a plain jump).
struct StepwiseSignal {
  std::vector<SignalSample> levels;
  int dwell = 1;
  int ramp = 1;
};

/// u(t) = u0 + amplitude * sin(2 pi t / period + phase), same for y.
struct SinusoidSignal {
  Vec u0;
  Vec y0;
  double amplitude = 1.0;
  double period = 1.0;
  double phase = 0.0;
};

/// Paired input/supervision stream sharing one clock.
class SignalSpec {
 public:
  using Kind = std::variant<ConstantSignal, StepwiseSignal, SinusoidSignal>;

  explicit SignalSpec(Kind kind);

  const Kind& kind() const noexcept { return kind_; }
  int input_width() const noexcept { return input_width_; }
  int output_width() const noexcept { return output_width_; }

  /// Sample at integer tick t >= 0.
  SignalSample sample(long t) const;
  /// Value and derivatives at continuous time. Stepwise signals are only
  /// piecewise smooth: derivatives are one-sided at ramp corners.
  SignalJet jet(double tau) const;

  /// Length after which the stream repeats; 0 when constant.
  double period() const noexcept;

 private:
  Kind kind_;
  int input_width_ = 0;
  int output_width_ = 0;
};

/// Largest sup-norm change of (u, y) between two ticks at most `window`
/// apart. A stream is slow for depth L when speed_measure(spec, L - 1) is
/// negligible.
double speed_measure(const SignalSpec& spec, int window);

}  // namespace wavegrad

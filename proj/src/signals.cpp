#include "wavegrad/signals.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "wavegrad/errors.hpp"

namespace wavegrad {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

void check_pair(const Vec& u, const Vec& y, int& in, int& out) {
  if (in < 0) {
    in = static_cast<int>(u.size());
    out = static_cast<int>(y.size());
  }
  if (u.size() != in || y.size() != out) throw ShapeError("signal: inconsistent vector widths");
  require_finite(u, "signal input");
  require_finite(y, "signal target");
}

}  // namespace

SignalSpec::SignalSpec(Kind kind) : kind_(std::move(kind)) {
  int in = -1;
  int out = -1;
  std::visit(overloaded{
                 [&](const ConstantSignal& c) { check_pair(c.u, c.y, in, out); },
                 [&](const StepwiseSignal& s) {
                   if (s.levels.empty()) throw DomainError("stepwise signal needs at least one level");
                   if (s.dwell < 1) throw DomainError("stepwise dwell must be >= 1");
                   if (s.ramp < 1 || s.ramp > s.dwell) throw DomainError("stepwise ramp must be in [1, dwell]");
                   for (const auto& lv : s.levels) check_pair(lv.u, lv.y, in, out);
                 },
                 [&](const SinusoidSignal& s) {
                   if (!(s.period > 0.0) || !std::isfinite(s.period)) {
                     throw DomainError("sinusoid period must be positive and finite");
                   }
                   if (!std::isfinite(s.amplitude) || !std::isfinite(s.phase)) {
                     throw DomainError("sinusoid amplitude/phase must be finite");
                   }
                   check_pair(s.u0, s.y0, in, out);
                 },
             },
             kind_);
  input_width_ = in;
  output_width_ = out;
}

double SignalSpec::period() const noexcept {
  return std::visit(overloaded{
                        [](const ConstantSignal&) { return 0.0; },
                        [](const StepwiseSignal& s) { return double(s.dwell) * double(s.levels.size()); },
                        [](const SinusoidSignal& s) { return s.period; },
                    },
                    kind_);
}

namespace {

// Interpolation weight of the current level within a stepwise segment, and
// the indices of the previous/current levels.
struct StepPosition {
  std::size_t prev;
  std::size_t cur;
  double weight;  // 0 -> prev, 1 -> cur
  double rate;    // d weight / d tau
};

StepPosition step_position(const StepwiseSignal& s, double tau) {
  const double dwell = s.dwell;
  const double seg = std::floor(tau / dwell);
  const double p = tau - seg * dwell;
  const auto n = s.levels.size();
  const auto k = static_cast<std::size_t>(std::max(seg, 0.0));
  const std::size_t cur = k % n;
  if (k == 0) return {cur, cur, 1.0, 0.0};
  const std::size_t prev = (k + n - 1) % n;
  if (p >= s.ramp) return {prev, cur, 1.0, 0.0};
  return {prev, cur, p / s.ramp, 1.0 / s.ramp};
}

}  // namespace

SignalSample SignalSpec::sample(long t) const {
  if (t < 0) throw DomainError("signal sample: negative tick");
  return std::visit(overloaded{
                        [](const ConstantSignal& c) { return SignalSample{c.u, c.y}; },
                        [t](const StepwiseSignal& s) {
                          const auto pos = step_position(s, static_cast<double>(t));
                          const auto& a = s.levels[pos.prev];
                          const auto& b = s.levels[pos.cur];
                          if (pos.weight == 1.0) return SignalSample{b.u, b.y};
                          return SignalSample{Vec(a.u + pos.weight * (b.u - a.u)),
                                              Vec(a.y + pos.weight * (b.y - a.y))};
                        },
                        [t](const SinusoidSignal& s) {
                          // Reduce modulo the period first so sample(t + P) == sample(t)
                          // bit for bit when P is integral.
                          const double ph = std::fmod(static_cast<double>(t), s.period) / s.period;
                          const double v = s.amplitude * std::sin(2.0 * std::numbers::pi * ph + s.phase);
                          return SignalSample{Vec(s.u0.array() + v), Vec(s.y0.array() + v)};
                        },
                    },
                    kind_);
}

SignalJet SignalSpec::jet(double tau) const {
  const Vec zu = Vec::Zero(input_width_);
  return std::visit(overloaded{
                        [&](const ConstantSignal& c) { return SignalJet{c.u, zu, zu, c.y}; },
                        [&](const StepwiseSignal& s) {
                          const auto pos = step_position(s, std::max(tau, 0.0));
                          const auto& a = s.levels[pos.prev];
                          const auto& b = s.levels[pos.cur];
                          return SignalJet{Vec(a.u + pos.weight * (b.u - a.u)), Vec(pos.rate * (b.u - a.u)), zu,
                                           Vec(a.y + pos.weight * (b.y - a.y))};
                        },
                        [&](const SinusoidSignal& s) {
                          const double w = 2.0 * std::numbers::pi / s.period;
                          const double arg = w * std::fmod(tau, s.period) + s.phase;
                          const double v = s.amplitude * std::sin(arg);
                          const double dv = s.amplitude * w * std::cos(arg);
                          const double ddv = -s.amplitude * w * w * std::sin(arg);
                          return SignalJet{Vec(s.u0.array() + v), Vec::Constant(input_width_, dv),
                                           Vec::Constant(input_width_, ddv), Vec(s.y0.array() + v)};
                        },
                    },
                    kind_);
}

double speed_measure(const SignalSpec& spec, int window) {
  if (window < 1) throw DomainError("speed_measure: window must be >= 1");
  if (std::holds_alternative<ConstantSignal>(spec.kind())) return 0.0;

  // Both remaining kinds are periodic (stepwise after its first segment), so
  // scanning two periods covers every pair of ticks.
  const long horizon = 2 * static_cast<long>(std::ceil(spec.period())) + 1;
  std::vector<Vec> stream;
  stream.reserve(static_cast<std::size_t>(horizon + window));
  for (long t = 0; t < horizon + window; ++t) {
    auto s = spec.sample(t);
    Vec joined(s.u.size() + s.y.size());
    joined << s.u, s.y;
    stream.push_back(std::move(joined));
  }
  double best = 0.0;
  for (long t = 0; t < horizon; ++t) {
    for (int d = 1; d <= window; ++d) {
      const auto& a = stream[static_cast<std::size_t>(t)];
      const auto& b = stream[static_cast<std::size_t>(t + d)];
      best = std::max(best, (b - a).lpNorm<Eigen::Infinity>());
    }
  }
  return best;
}

}  // namespace wavegrad

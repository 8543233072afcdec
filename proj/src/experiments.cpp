#include "wavegrad/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

#include "wavegrad/bp_limit.hpp"
#include "wavegrad/bp_oracle.hpp"
#include "wavegrad/errors.hpp"
#include "wavegrad/lagrangian.hpp"

namespace wavegrad {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open output file " + path.string());
  f << text;
  if (!f) throw ParseError("failed writing " + path.string());
}

Mode parse_mode(std::string_view name) {
  if (name == "wave-run") return Mode::wave_run;
  if (name == "sweep") return Mode::sweep;
  if (name == "lagrangian-run") return Mode::lagrangian_run;
  if (name == "bp-limit-check") return Mode::bp_limit_check;
  throw ParseError("unknown mode '" + std::string(name) + "'");
}

std::string mode_name(Mode mode) {
  switch (mode) {
    case Mode::wave_run:
      return "wave-run";
    case Mode::sweep:
      return "sweep";
    case Mode::lagrangian_run:
      return "lagrangian-run";
    case Mode::bp_limit_check:
      return "bp-limit-check";
  }
  return "?";
}

std::uint64_t effective_seed(std::uint64_t config_seed) {
  const char* env = std::getenv("WAVEGRAD_SEED");
  if (env == nullptr || *env == '\0') return config_seed;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (end == env || *end != '\0') throw ParseError("WAVEGRAD_SEED must be a nonnegative integer");
  return v;
}

namespace {

template <class T>
T require_positive(const json& doc, const char* key, T fallback) {
  const T v = doc.value(key, fallback);
  if (!(v > T{0})) throw ParseError(std::string("config field '") + key + "' must be positive");
  return v;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

ExperimentConfig parse_config(const json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) throw ParseError("config must be a JSON object");
  try {
    ExperimentConfig c;
    c.mode = parse_mode(doc.at("mode").get<std::string>());
    c.seed = effective_seed(doc.value("seed", std::uint64_t{0}));

    if (doc.contains("net")) {
      const json& n = doc.at("net");
      if (n.contains("file")) {
        c.net.file = resolve(base_dir, n.at("file").get<std::string>());
        if (!fs::exists(*c.net.file)) throw ParseError("net file not found: " + c.net.file->string());
      } else if (n.contains("chain_length")) {
        const int len = n.at("chain_length").get<int>();
        if (len < 2) throw ParseError("chain_length must be >= 2");
        c.net.widths.assign(static_cast<std::size_t>(len), 1);
      } else if (n.contains("widths")) {
        c.net.widths = n.at("widths").get<std::vector<int>>();
      }
      c.net.activation = n.value("activation", c.net.activation);
      c.net.weight_scale = require_positive(n, "weight_scale", c.net.weight_scale);
    }
    if (doc.contains("signal")) c.signal = doc.at("signal");
    if (!c.signal.is_object()) throw ParseError("signal must be an object");

    if (c.mode == Mode::wave_run || c.mode == Mode::sweep) {
      c.ticks = require_positive(doc, "ticks", 0L);
      if (c.net.widths.empty() && !c.net.file) throw ParseError("wave runs need net.widths or net.file");
    }
    if (doc.contains("learning_rate")) c.learning_rate = require_positive(doc, "learning_rate", 0.0);
    if (c.mode == Mode::sweep) {
      for (const json& p : doc.at("periods")) {
        if (p.is_string() && p.get<std::string>() == "constant") {
          c.periods.push_back(0.0);
        } else {
          const double v = p.get<double>();
          if (!(v >= 0.0) || !std::isfinite(v)) throw ParseError("sweep periods must be finite and >= 0");
          c.periods.push_back(v);
        }
      }
      if (c.periods.empty()) throw ParseError("sweep needs at least one period");
    }

    if (doc.contains("constraint_net")) c.constraint_net = doc.at("constraint_net");
    c.dt = require_positive(doc, "dt", c.dt);
    c.steps = doc.value("steps", 0L);
    if (c.steps < 0) throw ParseError("steps must be >= 0");
    c.m_x = require_positive(doc, "m_x", c.m_x);
    c.m_w = require_positive(doc, "m_w", c.m_w);
    c.theta = doc.value("theta", c.theta);
    if (!(c.theta >= 0.0)) throw ParseError("theta must be >= 0");
    c.gamma = require_positive(doc, "gamma", c.gamma);
    if (doc.contains("stabilize") && !doc.at("stabilize").is_null()) c.stabilize = doc.at("stabilize").get<double>();
    c.supervised = doc.value("supervised", c.supervised);
    c.drift_tolerance = require_positive(doc, "drift_tolerance", c.drift_tolerance);
    c.record_every = require_positive(doc, "record_every", c.record_every);
    c.tau = doc.value("tau", c.tau);
    if (doc.contains("tolerance")) c.tolerance = require_positive(doc, "tolerance", 0.0);
    if ((c.mode == Mode::lagrangian_run || c.mode == Mode::bp_limit_check) && c.net.widths.empty() &&
        !c.net.file && !c.constraint_net) {
      throw ParseError(mode_name(c.mode) + " needs net.widths, net.chain_length, net.file or constraint_net");
    }

    if (doc.contains("output")) {
      const json& o = doc.at("output");
      if (o.contains("csv")) c.out.csv = resolve(base_dir, o.at("csv").get<std::string>());
      if (o.contains("frames")) c.out.frames = resolve(base_dir, o.at("frames").get<std::string>());
      if (o.contains("report")) c.out.report = resolve(base_dir, o.at("report").get<std::string>());
    }
    return c;
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
}

ExperimentConfig load_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ParseError("cannot read config " + file.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("config " + file.string() + ": " + e.what());
  }
  return parse_config(doc, file.has_parent_path() ? file.parent_path() : fs::path("."));
}

LayeredNet make_net(const NetSource& src, std::uint64_t seed) {
  if (src.file) {
    std::ifstream in(*src.file);
    if (!in) throw ParseError("cannot read net file " + src.file->string());
    try {
      return LayeredNet::from_json(json::parse(in));
    } catch (const json::exception& e) {
      throw ParseError("net file " + src.file->string() + ": " + e.what());
    }
  }
  return new_layered(src.widths, Activation::parse(src.activation), UniformInit{seed, src.weight_scale});
}

namespace {

// Signal draws use their own stream so that changing the signal never
// changes the weights.
std::mt19937_64 signal_rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x5167u};
  return std::mt19937_64(seq);
}

Vec draw_vec(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = dist(rng);
  return v;
}

Vec read_vec(const json& doc, const char* key, int n, std::mt19937_64& rng) {
  if (!doc.contains(key)) return draw_vec(rng, n);
  const auto vals = doc.at(key).get<std::vector<double>>();
  if (static_cast<int>(vals.size()) != n) {
    throw ParseError(std::string("signal field '") + key + "' must have " + std::to_string(n) + " entries");
  }
  return Eigen::Map<const Vec>(vals.data(), n);
}

}  // namespace

SignalSpec make_signal(const json& doc, int input_width, int output_width, std::uint64_t seed) {
  auto rng = signal_rng(seed);
  try {
    const std::string kind = doc.value("kind", std::string("constant"));
    if (kind == "constant") {
      Vec u = read_vec(doc, "u", input_width, rng);
      Vec y = read_vec(doc, "y", output_width, rng);
      return SignalSpec(ConstantSignal{std::move(u), std::move(y)});
    }
    if (kind == "stepwise") {
      StepwiseSignal s;
      s.dwell = doc.at("dwell").get<int>();
      s.ramp = doc.value("ramp", 1);
      if (doc.contains("levels")) {
        for (const json& lv : doc.at("levels")) {
          s.levels.push_back({read_vec(lv, "u", input_width, rng), read_vec(lv, "y", output_width, rng)});
        }
      } else {
        const int count = doc.value("level_count", 4);
        if (count < 1) throw ParseError("level_count must be >= 1");
        for (int k = 0; k < count; ++k) {
          Vec u = draw_vec(rng, input_width);
          Vec y = draw_vec(rng, output_width);
          s.levels.push_back({std::move(u), std::move(y)});
        }
      }
      return SignalSpec(std::move(s));
    }
    if (kind == "sinusoid") {
      SinusoidSignal s;
      s.u0 = read_vec(doc, "u0", input_width, rng);
      s.y0 = read_vec(doc, "y0", output_width, rng);
      s.amplitude = doc.value("amplitude", 1.0);
      s.period = doc.at("period").get<double>();
      s.phase = doc.value("phase", 0.0);
      return SignalSpec(std::move(s));
    }
    throw ParseError("unknown signal kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw ParseError(std::string("signal: ") + e.what());
  } catch (const DomainError& e) {
    throw ParseError(std::string("signal: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Wave experiments

WaveAnalysis analyze_wave_run(const LayeredNet& net, const SignalSpec& spec, const WaveRun& run) {
  const int depth = net.depth();
  const LossSpec loss{LossSpec::Kind::half_squared_error, net.width(depth)};
  WaveAnalysis out;
  std::vector<double> num(static_cast<std::size_t>(depth) + 1, 0.0);
  std::vector<double> den(num.size(), 0.0);
  out.layers.resize(static_cast<std::size_t>(depth));
  for (int l = 1; l <= depth; ++l) {
    auto& le = out.layers[static_cast<std::size_t>(l) - 1];
    le.layer = l;
    le.mismatch = frame_mismatch(l, depth);
    le.frames_synced = true;
  }

  for (std::size_t k = 0; k < run.trace.size(); ++k) {
    const WaveGradient& g = run.trace[k].grad;
    const LayeredNet& at = run.nets.empty() ? net : run.nets[k];
    std::vector<double> row(static_cast<std::size_t>(depth) + 1, std::numeric_limits<double>::quiet_NaN());
    for (int l = 1; l <= depth; ++l) {
      const auto li = static_cast<std::size_t>(l);
      if (!g.valid[li]) continue;
      auto& le = out.layers[li - 1];
      if (*g.frame_fwd[li] != *g.frame_bwd[li]) le.frames_synced = false;
      const SignalSample s = spec.sample(*g.frame_bwd[li]);
      const Mat ref = backprop_exact(at, s.u, s.y, loss)[li - 1];
      const double diff = (g.g[li] - ref).norm();
      num[li] += diff;
      den[li] += ref.norm();
      row[li] = relative_error(g.g[li], ref);
      ++le.samples;
    }
    out.rel_err.push_back(std::move(row));
  }
  for (auto& le : out.layers) {
    const auto li = static_cast<std::size_t>(le.layer);
    le.mean_rel_error = den[li] > 0.0 ? num[li] / den[li] : num[li];
    if (le.samples == 0) le.frames_synced = false;
  }
  return out;
}

std::string wave_trace_csv(const WaveRun& run, const WaveAnalysis& analysis) {
  std::ostringstream os;
  os << "t,l,frame_fwd,frame_bwd,valid,norm_x,norm_delta,norm_g,rel_err\n";
  auto tag = [](const FrameTag& f) { return f ? std::to_string(*f) : std::string(); };
  for (std::size_t k = 0; k < run.trace.size(); ++k) {
    const auto& rec = run.trace[k];
    for (int l = 1; l <= rec.grad.depth(); ++l) {
      const auto li = static_cast<std::size_t>(l);
      const bool valid = rec.grad.valid[li];
      os << rec.grad.t << ',' << l << ',' << tag(rec.grad.frame_fwd[li]) << ',' << tag(rec.grad.frame_bwd[li]) << ','
         << (valid ? 1 : 0) << ',' << format_double(rec.state.x[li].norm()) << ','
         << format_double(rec.state.delta[li].norm()) << ',';
      if (valid) os << format_double(rec.grad.g[li].norm()) << ',' << format_double(analysis.rel_err[k][li]);
      else os << ',';
      os << '\n';
    }
  }
  return os.str();
}

json wave_frames_json(const LayeredNet& net, const WaveRun& run) {
  auto tags = [](const std::vector<FrameTag>& v) {
    json a = json::array();
    for (const auto& f : v) a.push_back(f ? json(*f) : json(nullptr));
    return a;
  };
  json frames = json::array();
  for (const auto& rec : run.trace) {
    json valid = json::array();
    for (int l = 1; l <= rec.grad.depth(); ++l) valid.push_back(static_cast<bool>(rec.grad.valid[static_cast<std::size_t>(l)]));
    frames.push_back({{"t", rec.state.t},
                      {"x_frame", tags(rec.state.x_frame)},
                      {"delta_frame", tags(rec.state.delta_frame)},
                      {"valid", valid}});
  }
  return {{"depth", net.depth()}, {"widths", net.widths()}, {"frames", frames}};
}

namespace {

json layers_json(const std::vector<LayerError>& layers) {
  json a = json::array();
  for (const auto& le : layers) {
    a.push_back({{"layer", le.layer},
                 {"mismatch", le.mismatch},
                 {"mean_rel_error", le.mean_rel_error},
                 {"samples", le.samples},
                 {"frames_synced", le.frames_synced}});
  }
  return a;
}

}  // namespace

json ErrorReport::to_json() const {
  json doc{{"depth", depth},
           {"sync_layer", sync_layer ? json(*sync_layer) : json(nullptr)},
           {"layers", layers_json(layers)},
           {"failures", failures},
           {"passed", passed()}};
  if (!sweep.empty()) {
    json rows = json::array();
    for (const auto& r : sweep) {
      rows.push_back({{"period", r.period},
                      {"resolvable", r.resolvable},
                      {"mean_error", r.resolvable ? json(r.mean_error) : json(nullptr)},
                      {"layers", layers_json(r.layers)}});
    }
    doc["sweep"] = rows;
  }
  if (sweep_monotone) doc["sweep_monotone"] = *sweep_monotone;
  return doc;
}

namespace {

bool is_constant(const SignalSpec& spec) { return std::holds_alternative<ConstantSignal>(spec.kind()); }

void check_sync(ErrorReport& rep, const std::vector<LayerError>& layers) {
  if (!rep.sync_layer || layers.empty()) return;
  const auto& le = layers.at(static_cast<std::size_t>(*rep.sync_layer) - 1);
  if (le.samples > 0 && !le.frames_synced) {
    rep.failures.push_back("frame tags differ at the synchronization layer " + std::to_string(*rep.sync_layer));
  }
}

}  // namespace

ErrorReport run_wave_experiment(const ExperimentConfig& config) {
  const LayeredNet net = make_net(config.net, config.seed);
  const SignalSpec spec = make_signal(config.signal, net.width(0), net.width(net.depth()), config.seed);
  const WaveRun wr = run(net, spec, config.ticks, config.learning_rate);
  const WaveAnalysis an = analyze_wave_run(net, spec, wr);

  ErrorReport rep;
  rep.depth = net.depth();
  rep.sync_layer = sync_layer(net.depth());
  rep.layers = an.layers;
  check_sync(rep, rep.layers);
  if (is_constant(spec) && !config.learning_rate) {
    for (const auto& le : rep.layers) {
      if (le.samples > 0 && !(le.mean_rel_error < 1e-10)) {
        rep.failures.push_back("constant stream but layer " + std::to_string(le.layer) + " error " +
                               format_double(le.mean_rel_error) + " >= 1e-10");
      }
    }
  }
  if (config.out.csv) write_text(*config.out.csv, wave_trace_csv(wr, an));
  if (config.out.frames) write_text(*config.out.frames, wave_frames_json(net, wr).dump(1) + "\n");
  if (config.out.report) write_text(*config.out.report, rep.to_json().dump(2) + "\n");
  return rep;
}

ErrorReport run_frequency_sweep(const ExperimentConfig& config) {
  const LayeredNet net = make_net(config.net, config.seed);
  const SignalSpec base = make_signal(config.signal, net.width(0), net.width(net.depth()), config.seed);
  // The sweep varies the period of one sinusoid; a constant base supplies
  // the centre and a unit amplitude.
  SinusoidSignal sin_base;
  if (const auto* s = std::get_if<SinusoidSignal>(&base.kind())) {
    sin_base = *s;
  } else if (const auto* c = std::get_if<ConstantSignal>(&base.kind())) {
    sin_base = SinusoidSignal{c->u, c->y, 1.0, 1.0, 0.0};
  } else {
    throw ParseError("sweep needs a sinusoid or constant base signal");
  }

  ErrorReport rep;
  rep.depth = net.depth();
  rep.sync_layer = sync_layer(net.depth());
  rep.sweep.resize(config.periods.size());

  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(config.periods.size(), std::thread::hardware_concurrency()));
  std::atomic<std::size_t> next{0};
  std::vector<std::string> errors(config.periods.size());
  auto work = [&] {
    for (std::size_t i = next++; i < config.periods.size(); i = next++) {
      SweepRow& row = rep.sweep[i];
      row.period = config.periods[i];
      if (row.period != 0.0 && row.period < 2.0) {
        row.resolvable = false;
        continue;
      }
      try {
        SinusoidSignal s = sin_base;
        s.period = row.period;
        const SignalSpec spec =
            row.period == 0.0 ? SignalSpec(ConstantSignal{s.u0, s.y0}) : SignalSpec(std::move(s));
        const WaveRun wr = run(net, spec, config.ticks, config.learning_rate);
        row.layers = analyze_wave_run(net, spec, wr).layers;
        double sum = 0.0;
        int n = 0;
        for (const auto& le : row.layers) {
          if (le.mismatch > 0) {
            sum += le.mean_rel_error;
            ++n;
          }
        }
        row.mean_error = n > 0 ? sum / n : 0.0;
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (!e.empty()) throw std::runtime_error(e);
  }

  for (const auto& row : rep.sweep) {
    if (!row.resolvable) {
      rep.failures.push_back("period " + format_double(row.period) + " is unresolvable (< 2 ticks)");
    }
  }
  // Slowest first: constant, then decreasing period.
  std::vector<const SweepRow*> order;
  for (const auto& row : rep.sweep) {
    if (row.resolvable) order.push_back(&row);
  }
  std::stable_sort(order.begin(), order.end(), [](const SweepRow* a, const SweepRow* b) {
    const double fa = a->period == 0.0 ? 0.0 : 1.0 / a->period;
    const double fb = b->period == 0.0 ? 0.0 : 1.0 / b->period;
    return fa < fb;
  });
  bool monotone = true;
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (order[i]->mean_error < order[i - 1]->mean_error) monotone = false;
  }
  rep.sweep_monotone = monotone;
  if (!monotone) rep.failures.push_back("mean error is not nondecreasing in signal frequency");
  for (const auto& row : rep.sweep) check_sync(rep, row.layers);
  if (config.out.report) write_text(*config.out.report, rep.to_json().dump(2) + "\n");
  return rep;
}

// ---------------------------------------------------------------------------
// Constrained dynamics

namespace {

ConstraintNet make_constraint_net(const ExperimentConfig& config) {
  if (config.constraint_net) {
    const json& doc = *config.constraint_net;
    int omega = 0;
    int eta = 0;
    try {
      omega = doc.at("omega").get<int>();
      eta = doc.at("eta").get<int>();
    } catch (const json::exception& e) {
      throw ParseError(std::string("constraint net json: ") + e.what());
    }
    ConstraintNet net = ConstraintNet::from_json(doc, make_signal(config.signal, omega, eta, config.seed));
    if (!doc.contains("M")) {
      // Weights drawn from the seed, one per arc in arc order.
      std::mt19937_64 rng(config.seed);
      std::uniform_real_distribution<double> dist(-config.net.weight_scale, config.net.weight_scale);
      Vec w(static_cast<Eigen::Index>(net.arcs().size()));
      for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = dist(rng);
      net = net.with_weights(net.unpack_weights(w));
    }
    return net;
  }
  const LayeredNet layered = make_net(config.net, config.seed);
  return encode_layered(layered,
                        make_signal(config.signal, layered.width(0), layered.width(layered.depth()), config.seed));
}

}  // namespace

json LagrangianReport::to_json() const {
  return {{"steps", steps},
          {"final_time", final_time},
          {"max_drift", max_drift},
          {"failures", failures},
          {"passed", passed()}};
}

LagrangianReport run_lagrangian(const ExperimentConfig& config) {
  const ConstraintNet net = make_constraint_net(config);
  std::optional<LossSpec> loss;
  if (config.supervised) loss = LossSpec{LossSpec::Kind::half_squared_error, net.eta()};
  const ELState s0 = consistent_init(net, loss, {config.tau, config.m_x, config.m_w, config.theta, config.gamma});

  IntegrateOptions opts;
  opts.stabilize = config.stabilize;
  opts.record_every = config.record_every;
  opts.drift_abort = std::max(1e-2, config.drift_tolerance);

  LagrangianReport rep;
  rep.steps = config.steps;
  Trajectory traj;
  try {
    traj = integrate(net, s0, loss, config.dt, config.steps, opts);
  } catch (const DivergenceError& e) {
    rep.final_time = e.time();
    rep.max_drift = e.drift();
    rep.failures.push_back(e.what());
    if (config.out.report) write_text(*config.out.report, rep.to_json().dump(2) + "\n");
    return rep;
  }
  rep.final_time = traj.final_state.t;
  rep.max_drift = traj.max_drift;
  if (!(rep.max_drift < config.drift_tolerance)) {
    rep.failures.push_back("max drift " + format_double(rep.max_drift) + " >= tolerance " +
                           format_double(config.drift_tolerance));
  }

  if (config.out.csv) {
    std::ostringstream os;
    os << 't';
    for (int i = 0; i < net.nu(); ++i) os << ",x" << i;
    for (const Arc& a : net.arcs()) os << ",W" << a.to << '_' << a.from;
    for (int i = 0; i < net.nu(); ++i) os << ",lambda" << i;
    os << ",drift\n";
    for (const auto& p : traj.points) {
      os << format_double(p.t);
      for (Eigen::Index i = 0; i < p.x.size(); ++i) os << ',' << format_double(p.x(i));
      for (const Arc& a : net.arcs()) os << ',' << format_double(p.w(a.to, a.from));
      for (Eigen::Index i = 0; i < p.lambda.size(); ++i) os << ',' << format_double(p.lambda(i));
      os << ',' << format_double(p.drift) << '\n';
    }
    write_text(*config.out.csv, os.str());
  }
  if (config.out.report) write_text(*config.out.report, rep.to_json().dump(2) + "\n");
  return rep;
}

// ---------------------------------------------------------------------------
// Backprop limit

json BpLimitReport::to_json() const {
  return {{"oracle", oracle},
          {"max_rel_error", max_rel_error},
          {"tolerance", tolerance},
          {"failures", failures},
          {"passed", passed()}};
}

double max_entrywise_rel_error(const ConstraintNet& net, const Mat& a, const Mat& b) {
  double worst = 0.0;
  for (const Arc& arc : net.arcs()) {
    const double ref = b(arc.to, arc.from);
    const double diff = std::abs(a(arc.to, arc.from) - ref);
    worst = std::max(worst, ref != 0.0 ? diff / std::abs(ref) : diff);
  }
  return worst;
}

BpLimitReport run_bp_limit_check(const ExperimentConfig& config) {
  BpLimitReport rep;
  std::optional<LayeredNet> layered;
  if (!config.constraint_net) layered = make_net(config.net, config.seed);
  const ConstraintNet net = make_constraint_net(config);
  if (!net.feedforward()) throw DomainError("bp-limit-check: network has cycles, T is not triangular");

  const LossSpec loss{LossSpec::Kind::half_squared_error, net.eta()};
  const Vec xi = forward_solve(net, config.tau, net.weights());
  const Vec v_x = loss_gradient_x(net, config.tau, xi, loss);
  const Mat rate = bp_limit_weight_rate(net, xi, bp_limit_deltas(net, xi, v_x), config.gamma);

  Mat grad;
  if (layered) {
    rep.oracle = "backprop";
    const SignalJet jet = net.signal().jet(config.tau);
    grad = embed_layered(*layered, backprop_exact(*layered, jet.u, jet.y, loss));
    rep.tolerance = config.tolerance.value_or(1e-10);
  } else {
    rep.oracle = "finite-difference";
    const double eps = 1e-6;
    auto value = [&](const Mat& m) {
      const Vec x = forward_solve(net, config.tau, m);
      return loss.value(x.tail(net.eta()), net.signal().jet(config.tau).y);
    };
    grad = Mat::Zero(net.nu(), net.nu());
    for (const Arc& a : net.arcs()) {
      Mat plus = net.weights();
      Mat minus = net.weights();
      plus(a.to, a.from) += eps;
      minus(a.to, a.from) -= eps;
      grad(a.to, a.from) = (value(plus) - value(minus)) / (2.0 * eps);
    }
    rep.tolerance = config.tolerance.value_or(1e-6);
  }
  rep.max_rel_error = max_entrywise_rel_error(net, rate, Mat(-grad / config.gamma));
  if (!(rep.max_rel_error < rep.tolerance)) {
    rep.failures.push_back("max entrywise relative error " + format_double(rep.max_rel_error) + " >= " +
                           format_double(rep.tolerance));
  }
  if (config.out.report) write_text(*config.out.report, rep.to_json().dump(2) + "\n");
  return rep;
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

struct RenderFrame {
  long t;
  std::vector<std::optional<long>> x;
  std::vector<std::optional<long>> d;
};

std::vector<std::optional<long>> read_tags(const json& a, std::size_t n, const char* what) {
  if (!a.is_array() || a.size() != n) throw ParseError(std::string("trace: ") + what + " must have depth+1 entries");
  std::vector<std::optional<long>> out;
  for (const json& v : a) {
    if (v.is_null()) out.emplace_back();
    else out.emplace_back(v.get<long>());
  }
  return out;
}

char cell(const RenderFrame& f, std::size_t l) {
  const bool fx = f.x[l].has_value();
  const bool fd = f.d[l].has_value();
  return fx && fd ? '#' : fx ? '>' : fd ? '<' : '.';
}

}  // namespace

std::string render_frames(const json& doc) {
  std::vector<RenderFrame> frames;
  std::size_t n = 0;
  try {
    const int depth = doc.at("depth").get<int>();
    if (depth < 1) throw ParseError("trace: depth must be >= 1");
    n = static_cast<std::size_t>(depth) + 1;
    for (const json& f : doc.at("frames")) {
      frames.push_back({f.at("t").get<long>(), read_tags(f.at("x_frame"), n, "x_frame"),
                        read_tags(f.at("delta_frame"), n, "delta_frame")});
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("trace: ") + e.what());
  }

  auto tag = [](const std::optional<long>& v) { return v ? std::to_string(*v) : std::string("-"); };
  std::ostringstream os;
  for (const auto& f : frames) {
    os << "tick " << f.t << '\n';
    for (std::size_t l = n; l-- > 0;) {
      char line[96];
      std::snprintf(line, sizeof line, "  l%-3zu %c  x@%-6s d@%s\n", l, cell(f, l), tag(f.x[l]).c_str(),
                    tag(f.d[l]).c_str());
      os << line;
    }
    os << '\n';
  }
  os << "occupancy (> forward, < backward, # both, . empty)\n";
  for (std::size_t l = n; l-- > 0;) {
    char head[16];
    std::snprintf(head, sizeof head, "  l%-3zu ", l);
    os << head;
    for (const auto& f : frames) os << cell(f, l);
    os << '\n';
  }
  return os.str();
}

}  // namespace wavegrad

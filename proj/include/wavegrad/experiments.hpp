#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wavegrad/constraint_net.hpp"
#include "wavegrad/net_core.hpp"
#include "wavegrad/signals.hpp"
#include "wavegrad/wave_engine.hpp"

namespace wavegrad {

enum class Mode { wave_run, sweep, lagrangian_run, bp_limit_check };

Mode parse_mode(std::string_view name);
std::string mode_name(Mode mode);

/// Layered net either read from a file (LayeredNet JSON) or drawn from the
/// seed with weights uniform in [-weight_scale, weight_scale].
struct NetSource {
  std::vector<int> widths;
  std::string activation = "tanh";
  double weight_scale = 0.5;
  std::optional<std::filesystem::path> file;
};

/// Relative paths are resolved against the directory of the config file.
struct OutputPaths {
  std::optional<std::filesystem::path> csv;
  std::optional<std::filesystem::path> frames;
  std::optional<std::filesystem::path> report;
};

struct ExperimentConfig {
  Mode mode = Mode::wave_run;
  std::uint64_t seed = 0;
  NetSource net;
  /// Signal description; missing levels are drawn from the seed.
  nlohmann::json signal = nlohmann::json::object();
  long ticks = 0;
  std::optional<double> learning_rate;
  /// Sweep periods in ticks; 0 stands for the constant stream.
  std::vector<double> periods;

  std::optional<nlohmann::json> constraint_net;
  double dt = 1e-3;
  long steps = 0;
  double m_x = 1.0;
  double m_w = 1.0;
  double theta = 1.0;
  double gamma = 1.0;
  std::optional<double> stabilize;
  bool supervised = true;
  double drift_tolerance = 1e-6;
  int record_every = 1;
  double tau = 0.0;
  std::optional<double> tolerance;

  OutputPaths out;
};

/// Reads and validates a config. WAVEGRAD_SEED, when set, replaces the seed.
/// Throws ParseError on malformed input or missing referenced files.
ExperimentConfig load_config(const std::filesystem::path& file);
ExperimentConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);

/// The seed after applying the WAVEGRAD_SEED override.
std::uint64_t effective_seed(std::uint64_t config_seed);

LayeredNet make_net(const NetSource& src, std::uint64_t seed);
SignalSpec make_signal(const nlohmann::json& doc, int input_width, int output_width, std::uint64_t seed);

struct LayerError {
  int layer = 0;
  int mismatch = 0;
  /// sum_t |g_t - g*_t| / sum_t |g*_t| over valid ticks, g* the oracle
  /// gradient at the supervision frame of delta[l].
  double mean_rel_error = 0.0;
  long samples = 0;
  bool frames_synced = false;  // frame_fwd == frame_bwd at every valid tick
};

struct SweepRow {
  double period = 0.0;  // 0: constant
  bool resolvable = true;
  std::vector<LayerError> layers;
  double mean_error = 0.0;  // over layers with nonzero mismatch
};

struct ErrorReport {
  int depth = 0;
  std::optional<int> sync_layer;
  std::vector<LayerError> layers;
  std::vector<SweepRow> sweep;
  std::optional<bool> sweep_monotone;
  std::vector<std::string> failures;

  bool passed() const noexcept { return failures.empty(); }
  nlohmann::json to_json() const;
};

/// Per-tick oracle comparison of a wave run. `rel_err[k][l]` is the
/// relative error at trace record k and layer l (NaN when invalid).
struct WaveAnalysis {
  std::vector<LayerError> layers;
  std::vector<std::vector<double>> rel_err;
};

WaveAnalysis analyze_wave_run(const LayeredNet& net, const SignalSpec& spec, const WaveRun& run);

std::string wave_trace_csv(const WaveRun& run, const WaveAnalysis& analysis);
nlohmann::json wave_frames_json(const LayeredNet& net, const WaveRun& run);

ErrorReport run_wave_experiment(const ExperimentConfig& config);
ErrorReport run_frequency_sweep(const ExperimentConfig& config);

struct LagrangianReport {
  long steps = 0;
  double final_time = 0.0;
  double max_drift = 0.0;
  std::vector<std::string> failures;

  bool passed() const noexcept { return failures.empty(); }
  nlohmann::json to_json() const;
};

/// Integrates the constrained dynamics from consistent Cauchy data and
/// writes the trajectory CSV (t, x..., W..., lambda..., drift).
LagrangianReport run_lagrangian(const ExperimentConfig& config);

struct BpLimitReport {
  std::string oracle;  // "backprop" or "finite-difference"
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  std::vector<std::string> failures;

  bool passed() const noexcept { return failures.empty(); }
  nlohmann::json to_json() const;
};

/// Builds the constraint net of the config (layered widths, chain length
/// via widths of ones, or an inline ConstraintNet), runs the massless
/// reduction at the forward-solved state and compares it with
/// -(1/gamma) times the oracle gradient.
BpLimitReport run_bp_limit_check(const ExperimentConfig& config);

/// Max over arcs of |a - b| / |b| (|a - b| where b vanishes).
double max_entrywise_rel_error(const ConstraintNet& net, const Mat& a, const Mat& b);

/// Text rendering of a frames document: one block per tick plus a
/// layer-by-tick occupancy grid. Throws ParseError on malformed input.
std::string render_frames(const nlohmann::json& frames);

/// Writes text to a path, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);

/// printf("%.17g") rendering used for every emitted number.
std::string format_double(double v);

}  // namespace wavegrad

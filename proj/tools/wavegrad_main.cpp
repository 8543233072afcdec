// wavegrad: experiment driver. Exit codes: 0 pass, 1 criteria not met,
// 2 usage or config error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "wavegrad/errors.hpp"
#include "wavegrad/experiments.hpp"

namespace {

using namespace wavegrad;

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kUsage = 2;

void print_layers(const std::vector<LayerError>& layers) {
  std::printf("%-6s %-9s %-24s %-8s %s\n", "layer", "mismatch", "mean_rel_error", "samples", "synced");
  for (const auto& le : layers) {
    std::printf("%-6d %-9d %-24s %-8ld %s\n", le.layer, le.mismatch, format_double(le.mean_rel_error).c_str(),
                le.samples, le.frames_synced ? "yes" : "no");
  }
}

int finish(const std::vector<std::string>& failures) {
  for (const auto& f : failures) std::printf("FAIL: %s\n", f.c_str());
  std::printf("%s\n", failures.empty() ? "PASS" : "FAIL");
  return failures.empty() ? kPass : kFail;
}

int wave_run(const std::string& path) {
  const ExperimentConfig cfg = load_config(path);
  if (cfg.mode != Mode::wave_run) throw ParseError("config mode is " + mode_name(cfg.mode) + ", not wave-run");
  const ErrorReport rep = run_wave_experiment(cfg);
  std::printf("depth %d, sync layer %s\n", rep.depth, rep.sync_layer ? std::to_string(*rep.sync_layer).c_str() : "none");
  print_layers(rep.layers);
  return finish(rep.failures);
}

int sweep(const std::string& path) {
  const ExperimentConfig cfg = load_config(path);
  if (cfg.mode != Mode::sweep) throw ParseError("config mode is " + mode_name(cfg.mode) + ", not sweep");
  const ErrorReport rep = run_frequency_sweep(cfg);
  std::printf("%-10s %-12s %s\n", "period", "resolvable", "mean_error");
  for (const auto& row : rep.sweep) {
    std::printf("%-10s %-12s %s\n", row.period == 0.0 ? "constant" : format_double(row.period).c_str(),
                row.resolvable ? "yes" : "unresolvable", row.resolvable ? format_double(row.mean_error).c_str() : "-");
  }
  return finish(rep.failures);
}

int lagrangian_run(const std::string& path) {
  const ExperimentConfig cfg = load_config(path);
  if (cfg.mode != Mode::lagrangian_run) {
    throw ParseError("config mode is " + mode_name(cfg.mode) + ", not lagrangian-run");
  }
  const LagrangianReport rep = run_lagrangian(cfg);
  std::printf("steps %ld, final t %s, max drift %s\n", rep.steps, format_double(rep.final_time).c_str(),
              format_double(rep.max_drift).c_str());
  return finish(rep.failures);
}

int bp_limit_check(const std::string& path) {
  const ExperimentConfig cfg = load_config(path);
  if (cfg.mode != Mode::bp_limit_check) {
    throw ParseError("config mode is " + mode_name(cfg.mode) + ", not bp-limit-check");
  }
  const BpLimitReport rep = run_bp_limit_check(cfg);
  std::printf("oracle %s, max entrywise relative error %s (tolerance %s)\n", rep.oracle.c_str(),
              format_double(rep.max_rel_error).c_str(), format_double(rep.tolerance).c_str());
  return finish(rep.failures);
}

int render(const std::string& trace, const std::string& out) {
  std::ifstream in(trace);
  if (!in) throw ParseError("cannot read trace " + trace);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("trace " + trace + ": " + e.what());
  }
  const std::string text = render_frames(doc);
  if (out.empty()) std::fwrite(text.data(), 1, text.size(), stdout);
  else write_text(out, text);
  return kPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Backprop diffusion waves and constrained learning dynamics"};
  app.require_subcommand(1);

  std::string config;
  std::string trace;
  std::string out;
  auto add_run = [&](const char* name, const char* help) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    return sub;
  };
  auto* wave = add_run("wave-run", "run the wave engine against the backprop oracle");
  auto* sw = add_run("sweep", "gradient error across sinusoid periods");
  auto* lag = add_run("lagrangian-run", "integrate the constrained Euler-Lagrange dynamics");
  auto* bpl = add_run("bp-limit-check", "compare the massless limit with backprop");
  auto* ren = app.add_subcommand("render", "render a frames JSON as text");
  ren->add_option("--trace", trace, "frames JSON written by wave-run")->required()->check(CLI::ExistingFile);
  ren->add_option("--out", out, "write to a file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kPass : kUsage;
  }

  try {
    if (*wave) return wave_run(config);
    if (*sw) return sweep(config);
    if (*lag) return lagrangian_run(config);
    if (*bpl) return bp_limit_check(config);
    if (*ren) return render(trace, out);
  } catch (const ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const ConsistencyError& e) {
    std::fprintf(stderr, "inconsistent initial data: %s\n", e.what());
    return kUsage;
  } catch (const ShapeError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const DomainError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "run failed: %s\n", e.what());
    return kFail;
  }
  return kUsage;
}

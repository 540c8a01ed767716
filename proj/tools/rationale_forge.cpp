#include <atomic>
#include <csignal>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rforge/config.hpp"
#include "rforge/error.hpp"
#include "rforge/jsonl.hpp"
#include "rforge/losskernel.hpp"
#include "rforge/pipeline.hpp"
#include "rforge/synth.hpp"

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

struct StageArgs {
  std::string config;
  std::string workdir = "work";
  bool force = false;
  bool dry_run = false;
  std::optional<std::uint64_t> seed_override;
  std::string method;
  std::string input;
};

void add_stage_flags(CLI::App* cmd, StageArgs& args) {
  cmd->add_option("--config", args.config, "Pipeline config (JSON)");
  cmd->add_option("--workdir", args.workdir, "Work directory")->capture_default_str();
  cmd->add_flag("--force", args.force, "Rerun even when inputs are unchanged");
  cmd->add_flag("--dry-run", args.dry_run, "Mock every provider; no network");
  cmd->add_option("--seed-override", args.seed_override, "Derive every seed from this base");
}

rforge::Pipeline make_pipeline(const StageArgs& args) {
  if (args.config.empty()) {
    throw rforge::Error(rforge::ErrorCode::kInvalidConfig, "--config is required");
  }
  rforge::RunOptions opts;
  opts.workdir = args.workdir;
  opts.force = args.force;
  opts.dry_run = args.dry_run;
  opts.seed_override = args.seed_override;
  if (!args.method.empty()) opts.method = rforge::parse_method(args.method);
  return rforge::Pipeline(rforge::load_config(args.config), opts);
}

void print_result(const rforge::StageResult& r) {
  std::cout << rforge::to_string(r.stage) << ": ";
  if (r.cached) {
    std::cout << "cached\n";
  } else {
    std::cout << "done in " << r.manifest.value("duration_ms", 0) << " ms\n";
  }
}

int run_stage(const std::string& name, const StageArgs& args) {
  if (name == "loss-check" && !args.input.empty()) {
    std::cout << rforge::loss_check(rforge::read_json_file(args.input)).dump(2) << "\n";
    return 0;
  }
  auto pipeline = make_pipeline(args);
  if (name == "all") {
    for (const auto& r : pipeline.run_all()) print_result(r);
  } else if (name == "review-serve") {
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    pipeline.serve_review(g_stop, [&](int port) {
      std::cout << "review service listening on " << pipeline.config().review.host << ":" << port
                << "\n"
                << std::flush;
    });
  } else {
    print_result(pipeline.run(rforge::parse_stage(name)));
  }
  std::cerr << "provider calls: " << pipeline.provider_calls() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Builds rationale-augmented instruction-tuning data."};
  app.require_subcommand(1);

  StageArgs args;
  std::string selected;
  std::vector<std::string> names;
  for (auto stage : rforge::all_stages()) names.emplace_back(rforge::to_string(stage));
  names.emplace_back("all");
  for (const auto& name : names) {
    auto* cmd = app.add_subcommand(name, name == "all" ? "Run ingest through report"
                                                       : "Run the " + name + " stage");
    add_stage_flags(cmd, args);
    if (name == "emit") cmd->add_option("--method", args.method, "Emit only this method");
    if (name == "loss-check") {
      cmd->add_option("--input", args.input, "TokenLossBatch JSON; print the report and exit");
    }
    cmd->callback([&selected, name] { selected = name; });
  }

  std::string verify_dir = "work";
  auto* verify = app.add_subcommand("verify", "Check a work directory's manifest chain");
  verify->add_option("--workdir", verify_dir, "Work directory")->capture_default_str();

  std::string synth_dir;
  std::size_t synth_samples = 200;
  std::uint64_t synth_seed = 7;
  std::size_t synth_cap = 25000;
  auto* synth = app.add_subcommand("synth", "Write a synthetic workspace wired to mock providers");
  synth->add_option("--out", synth_dir, "Output directory")->required();
  synth->add_option("--samples", synth_samples, "Total records")->capture_default_str();
  synth->add_option("--seed", synth_seed, "Generator seed")->capture_default_str();
  synth->add_option("--train-cap", synth_cap, "Configured training cap")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (verify->parsed()) {
      const auto result = rforge::verify_workdir(verify_dir);
      for (const auto& p : result.problems) std::cout << "problem: " << p << "\n";
      std::cout << (result.ok ? "ok" : "FAILED") << " (" << result.manifests << " manifests)\n";
      return result.ok ? 0 : 2;
    }
    if (synth->parsed()) {
      const auto ws = rforge::write_synthetic_workspace(synth_dir, synth_samples, synth_seed,
                                                        synth_cap);
      std::cout << ws.config.string() << "\n";
      return 0;
    }
    return run_stage(selected, args);
  } catch (const rforge::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return rforge::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

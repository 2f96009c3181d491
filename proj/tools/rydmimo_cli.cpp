// SPDX-License-Identifier: Apache-2.0
#include "rydmimo/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kNumeric = 3, kIo = 4 };

using Overrides = std::vector<std::pair<std::string, std::string>>;

Overrides collect_overrides(const std::vector<std::string>& kv, const std::vector<std::string>& extras) {
  Overrides out;
  for (const auto& item : kv) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0)
      throw rydmimo::ConfigError("--override", "expected key=value, got '" + item + "'");
    out.emplace_back(item.substr(0, eq), item.substr(eq + 1));
  }
  // Remaining flags mirror field paths: --dims.nt 8 or --dims.nt=8.
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& flag = extras[i];
    if (flag.rfind("--", 0) != 0 || flag.size() <= 2) throw rydmimo::ConfigError(flag, "unrecognized argument");
    const std::string body = flag.substr(2);
    const auto eq = body.find('=');
    if (eq != std::string::npos) {
      out.emplace_back(body.substr(0, eq), body.substr(eq + 1));
    } else {
      if (i + 1 >= extras.size()) throw rydmimo::ConfigError(body, "missing value");
      out.emplace_back(body, extras[++i]);
    }
  }
  return out;
}

int report(int code, const std::string& kind, const std::string& message) {
  std::cerr << "rydmimo: " << kind << ": " << message << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rydberg-receiver MIMO simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  std::string format;
  std::uint64_t seed = 0;
  unsigned jobs = 0;
  std::vector<std::string> override_items;

  auto* run = app.add_subcommand("run", "run an experiment and write per-trial results");
  run->add_option("--config", config_path, "experiment config (JSON)")->required();
  run->add_option("--out", out_path, "output file (overrides output.path)");
  run->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  auto* seed_opt = run->add_option("--seed", seed, "base seed; trial t uses seed + t");
  run->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  run->add_option("--override", override_items, "key=value, key is a dotted field path");
  run->allow_extras();

  auto* val = app.add_subcommand("validate", "check a config without running it");
  val->add_option("--config", config_path, "experiment config (JSON)")->required();
  val->add_option("--override", override_items, "key=value, key is a dotted field path");
  val->allow_extras();

  auto* list = app.add_subcommand("list-experiments", "print the experiment catalog");

  CLI11_PARSE(app, argc, argv);

  if (list->parsed()) {
    for (const auto& e : rydmimo::experiment_catalog())
      std::cout << e.id << "\t" << e.sweep_axis << "\t" << e.description << '\n';
    return kOk;
  }

  try {
    const CLI::App* active = run->parsed() ? run : val;
    Overrides overrides = collect_overrides(override_items, active->remaining());
    if (run->parsed()) {
      if (!out_path.empty()) overrides.emplace_back("output.path", nlohmann::json(out_path).dump());
      if (!format.empty()) overrides.emplace_back("output.format", nlohmann::json(format).dump());
      if (*seed_opt) overrides.emplace_back("seed", std::to_string(seed));
      if (jobs != 0) overrides.emplace_back("jobs", std::to_string(jobs));
    }
    const rydmimo::ExperimentConfig cfg = rydmimo::load_config(config_path, overrides);
    if (val->parsed()) {
      std::cout << "ok: " << rydmimo::experiment_info(cfg.experiment).id << ", " << cfg.grid.size()
                << " sweep points, " << cfg.trials << " trials\n";
      return kOk;
    }
    if (cfg.output_path.empty()) throw rydmimo::ConfigError("output.path", "required (or pass --out)");

    const auto records = rydmimo::run_experiment(cfg);
    rydmimo::emit_results(records, cfg.format, cfg.output_path);
    std::cout << rydmimo::format_aggregates_csv(rydmimo::aggregate(records));
    return kOk;
  } catch (const rydmimo::ConfigError& e) {
    return report(kConfig, "config error", e.what());
  } catch (const rydmimo::InvalidArgument& e) {
    return report(kConfig, "invalid argument", e.what());
  } catch (const rydmimo::IoError& e) {
    return report(kIo, "I/O error", e.what());
  } catch (const std::exception& e) {
    return report(kNumeric, "numeric error", e.what());
  }
}

// SPDX-License-Identifier: Apache-2.0
//
// Config-driven Monte-Carlo experiments and their CSV / JSON output.
#pragma once

#include "rydmimo/channel.hpp"
#include "rydmimo/frontend.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rydmimo {

/// Invalid experiment configuration; the message starts with the field path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ExperimentKind { DofSlope, MiVsRsnr, RateVsSnr, RateVsNr, Convergence };

struct ExperimentInfo {
  ExperimentKind kind;
  std::string_view id;
  std::string_view sweep_axis;
  std::string_view description;
};

const std::vector<ExperimentInfo>& experiment_catalog();
const ExperimentInfo& experiment_info(ExperimentKind kind);
std::optional<ExperimentKind> parse_experiment(std::string_view id);

enum class OutputFormat { Csv, Json };

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::RateVsSnr;
  ChannelConfig channel;  // nt, nr and noise variance live here
  int ns = 1;
  int nrf = 1;
  int nrf_sc = 0;  // SC chains for the convergence experiment; 0 means nrf
  std::vector<double> grid;
  std::size_t trials = 1000;
  std::uint64_t seed = 0;
  double receive_snr_db = 0.0;  // fixed value when it is not the sweep axis
  double rsnr_db = 20.0;
  MiOptions mi;
  double altmin_tol = 1e-6;
  int max_iter_fc = 500;
  int max_iter_sc = 100;
  int restarts = 1;
  std::string output_path;
  OutputFormat format = OutputFormat::Csv;
  std::string trace_dir;  // convergence traces; empty disables them
  unsigned jobs = 1;
};

/// Configuration JSON with every field at its default value.
nlohmann::json default_config_json(ExperimentKind kind);

/// Sets the dotted `path` (e.g. "dims.nt") of `config`. The value is parsed
/// as JSON when possible and kept as a string otherwise.
void apply_override(nlohmann::json& config, const std::string& path, const std::string& value);

/// Merges defaults, validates every field and the cross-field dimension
/// constraints. Throws ConfigError.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path, const std::vector<std::pair<std::string, std::string>>& overrides = {});

/// Cross-field checks (also run by parse_config).
void validate(const ExperimentConfig& cfg);

struct TrialRecord {
  std::string experiment;
  double sweep_value = 0.0;
  std::size_t trial = 0;
  std::map<std::string, double> metrics;
  std::uint64_t seed = 0;

  bool operator==(const TrialRecord&) const = default;
};

/// Runs every trial (trial t uses seed + t) on `cfg.jobs` workers. Records
/// are ordered by sweep point, then trial, independent of the worker count.
std::vector<TrialRecord> run_experiment(const ExperimentConfig& cfg);

struct Aggregate {
  double sweep_value = 0.0;
  std::string metric;
  std::size_t count = 0;
  double mean = 0.0;
  double standard_error = 0.0;  // sample standard deviation / sqrt(count); 0 for one trial
};

std::vector<Aggregate> aggregate(const std::vector<TrialRecord>& records);

/// CSV: experiment,sweep_value,trial,metric,value,seed with one row per
/// metric. JSON: array of records. Numbers use 17 significant digits.
std::string format_records(const std::vector<TrialRecord>& records, OutputFormat format);
void emit_results(const std::vector<TrialRecord>& records, OutputFormat format, const std::string& path);
std::vector<TrialRecord> parse_records_json(const std::string& text);

std::string format_aggregates_csv(const std::vector<Aggregate>& aggregates);

}  // namespace rydmimo

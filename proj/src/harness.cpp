// SPDX-License-Identifier: Apache-2.0
#include "rydmimo/harness.hpp"

#include "rydmimo/hybrid.hpp"
#include "rydmimo/numerics.hpp"
#include "rydmimo/precoding.hpp"
#include "rydmimo/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace rydmimo {

namespace {

using nlohmann::json;

const std::vector<ExperimentInfo> kCatalog = {
    {ExperimentKind::DofSlope, "dof_slope", "snr_db",
     "high-SNR capacity slope dC/dlog2(SNR): atomic IQ-aware, in-phase only, phase-coherent classical"},
    {ExperimentKind::MiVsRsnr, "mi_vs_rsnr", "rsnr_db",
     "Monte-Carlo mutual information of the magnitude detector vs the linearized closed form"},
    {ExperimentKind::RateVsSnr, "rate_vs_snr", "receive_snr_db",
     "achievable rate of IQ-aware digital, classical digital, FC and SC hybrid precoding vs receive SNR"},
    {ExperimentKind::RateVsNr, "rate_vs_nr", "nr",
     "achievable rate of the same precoders vs number of receive antennas"},
    {ExperimentKind::Convergence, "convergence", "receive_snr_db",
     "alternating-minimization objective traces of the FC and SC hybrid algorithms"},
};

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

const std::vector<ExperimentInfo>& experiment_catalog() { return kCatalog; }

const ExperimentInfo& experiment_info(ExperimentKind kind) {
  for (const auto& e : kCatalog)
    if (e.kind == kind) return e;
  throw InvalidArgument("unknown experiment kind");
}

std::optional<ExperimentKind> parse_experiment(std::string_view id) {
  for (const auto& e : kCatalog)
    if (e.id == id) return e.kind;
  return std::nullopt;
}

json default_config_json(ExperimentKind kind) {
  json j = {
      {"experiment", std::string(experiment_info(kind).id)},
      {"channel", {{"wavelength", 10.83e-3}, {"spacing", 10e-3}, {"paths", 10}, {"noise_variance", 1.0}}},
      {"dims", {{"nt", 48}, {"nr", 12}, {"ns", 3}, {"nrf", 12}, {"nrf_sc", 0}}},
      {"sweep", {{"axis", std::string(experiment_info(kind).sweep_axis)}, {"grid", {-5.0, 0.0, 5.0, 10.0}}}},
      {"trials", 1000},
      {"seed", 1},
      {"receive_snr_db", 0.0},
      {"rsnr_db", 20.0},
      {"mc", {{"samples", 100000}, {"inner_samples", 1000}, {"batches", 20}}},
      {"altmin", {{"tol", 1e-6}, {"max_iter_fc", 500}, {"max_iter_sc", 100}, {"restarts", 1}}},
      {"output", {{"path", ""}, {"format", "csv"}, {"trace_dir", ""}}},
      {"jobs", 1},
  };
  switch (kind) {
    case ExperimentKind::DofSlope:
      j["dims"] = {{"nt", 2}, {"nr", 4}, {"ns", 1}, {"nrf", 1}, {"nrf_sc", 0}};
      j["sweep"]["grid"] = {30.0, 35.0, 40.0};
      break;
    case ExperimentKind::MiVsRsnr:
      j["dims"] = {{"nt", 1}, {"nr", 1}, {"ns", 1}, {"nrf", 1}, {"nrf_sc", 0}};
      j["sweep"]["grid"] = {-5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0};
      j["trials"] = 1;
      break;
    case ExperimentKind::RateVsSnr:
      break;
    case ExperimentKind::RateVsNr:
      j["sweep"]["grid"] = {8.0, 12.0, 16.0, 20.0, 24.0, 28.0, 32.0};
      break;
    case ExperimentKind::Convergence:
      j["dims"] = {{"nt", 32}, {"nr", 12}, {"ns", 2}, {"nrf", 8}, {"nrf_sc", 16}};
      j["sweep"]["grid"] = {0.0};
      j["trials"] = 1;
      break;
  }
  return j;
}

void apply_override(json& config, const std::string& path, const std::string& value) {
  if (path.empty()) throw ConfigError("<override>", "empty key");
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::parse_error&) {
    parsed = value;
  }
  json* node = &config;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError(path, "malformed key");
    if (!node->is_object()) throw ConfigError(path, "parent is not an object");
    if (dot == std::string::npos) {
      (*node)[key] = parsed;
      return;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

namespace {

void reject_unknown(const json& user, const json& defaults, const std::string& prefix) {
  if (!user.is_object()) throw ConfigError(prefix.empty() ? "<root>" : prefix, "expected an object");
  for (const auto& [key, value] : user.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!defaults.contains(key)) throw ConfigError(path, "unknown field");
    if (defaults.at(key).is_object()) reject_unknown(value, defaults.at(key), path);
  }
}

template <typename T>
T get_field(const json& j, const std::string& path) {
  const json* node = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    node = &node->at(path.substr(start, dot == std::string::npos ? std::string::npos : dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  try {
    if constexpr (std::is_integral_v<T>) {
      if (!node->is_number_integer() && !node->is_number_unsigned()) throw ConfigError(path, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (node->is_number_integer() && node->get<long long>() < 0) throw ConfigError(path, "must be nonnegative");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!node->is_number()) throw ConfigError(path, "expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!node->is_string()) throw ConfigError(path, "expected a string");
    }
    return node->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(path, e.what());
  }
}

void require_field(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw ConfigError(path, what);
}

bool is_digital(ExperimentKind k) {
  return k == ExperimentKind::RateVsSnr || k == ExperimentKind::RateVsNr || k == ExperimentKind::Convergence;
}

}  // namespace

void validate(const ExperimentConfig& cfg) {
  const auto& info = experiment_info(cfg.experiment);
  const ChannelConfig& ch = cfg.channel;
  require_field(ch.nt >= 1, "dims.nt", "must be >= 1");
  require_field(ch.nr >= 1, "dims.nr", "must be >= 1");
  require_field(ch.paths >= 1, "channel.paths", "must be >= 1");
  require_field(ch.wavelength > 0, "channel.wavelength", "must be positive");
  require_field(ch.spacing > 0, "channel.spacing", "must be positive");
  require_field(ch.noise_variance > 0, "channel.noise_variance", "must be positive");
  require_field(!cfg.grid.empty(), "sweep.grid", "must be nonempty");
  for (std::size_t i = 0; i < cfg.grid.size(); ++i) require_field(std::isfinite(cfg.grid[i]), "sweep.grid", "must be finite");
  for (std::size_t i = 1; i < cfg.grid.size(); ++i)
    require_field(cfg.grid[i] > cfg.grid[i - 1], "sweep.grid", "must be strictly increasing");
  require_field(cfg.trials >= 1, "trials", "must be >= 1");
  require_field(cfg.jobs >= 1, "jobs", "must be >= 1");
  require_field(std::isfinite(cfg.receive_snr_db), "receive_snr_db", "must be finite");
  require_field(std::isfinite(cfg.rsnr_db), "rsnr_db", "must be finite");

  if (cfg.experiment == ExperimentKind::DofSlope)
    require_field(cfg.grid.size() >= 2, "sweep.grid", "dof_slope needs at least two SNR points");

  if (cfg.experiment == ExperimentKind::MiVsRsnr) {
    require_field(cfg.mi.batches >= 2, "mc.batches", "must be >= 2");
    require_field(cfg.mi.samples >= cfg.mi.batches, "mc.samples", "must be >= mc.batches");
    require_field(cfg.mi.inner_samples >= 1, "mc.inner_samples", "must be >= 1");
  }

  if (is_digital(cfg.experiment)) {
    require_field(cfg.ns >= 1, "dims.ns", "must be >= 1");
    std::vector<int> nrs;
    if (cfg.experiment == ExperimentKind::RateVsNr) {
      for (double v : cfg.grid) {
        require_field(v >= 1 && v == std::floor(v), "sweep.grid", "nr values must be positive integers");
        nrs.push_back(static_cast<int>(v));
      }
    } else {
      nrs.push_back(ch.nr);
    }
    for (int nr : nrs)
      require_field(2 * cfg.ns <= std::min(nr, 2 * ch.nt), "dims.ns",
                    "2ns=" + std::to_string(2 * cfg.ns) + " exceeds min(nr, 2nt)=" + std::to_string(std::min(nr, 2 * ch.nt)));
    require_field(cfg.nrf >= cfg.ns && cfg.nrf <= ch.nt, "dims.nrf", "need ns <= nrf <= nt");
    require_field(ch.nt % cfg.nrf == 0, "dims.nrf",
                  "nt=" + std::to_string(ch.nt) + " is not divisible by nrf=" + std::to_string(cfg.nrf));
    if (cfg.nrf_sc != 0) {
      require_field(cfg.nrf_sc >= cfg.ns && cfg.nrf_sc <= ch.nt, "dims.nrf_sc", "need ns <= nrf_sc <= nt");
      require_field(ch.nt % cfg.nrf_sc == 0, "dims.nrf_sc",
                    "nt=" + std::to_string(ch.nt) + " is not divisible by nrf_sc=" + std::to_string(cfg.nrf_sc));
    }
    require_field(cfg.altmin_tol >= 0, "altmin.tol", "must be nonnegative");
    require_field(cfg.max_iter_fc >= 1, "altmin.max_iter_fc", "must be >= 1");
    require_field(cfg.max_iter_sc >= 1, "altmin.max_iter_sc", "must be >= 1");
    require_field(cfg.restarts >= 1, "altmin.restarts", "must be >= 1");
  }
  (void)info;
}

ExperimentConfig parse_config(const json& user) {
  if (!user.is_object()) throw ConfigError("<root>", "expected an object");
  if (!user.contains("experiment")) throw ConfigError("experiment", "required");
  if (!user.at("experiment").is_string()) throw ConfigError("experiment", "expected a string");
  const auto kind = parse_experiment(user.at("experiment").get<std::string>());
  if (!kind) throw ConfigError("experiment", "unknown experiment '" + user.at("experiment").get<std::string>() + "'");

  json j = default_config_json(*kind);
  reject_unknown(user, j, "");
  j.merge_patch(user);

  ExperimentConfig cfg;
  cfg.experiment = *kind;
  const std::string axis = get_field<std::string>(j, "sweep.axis");
  if (axis != experiment_info(*kind).sweep_axis)
    throw ConfigError("sweep.axis", "experiment " + std::string(experiment_info(*kind).id) + " sweeps '" +
                                        std::string(experiment_info(*kind).sweep_axis) + "', not '" + axis + "'");
  if (!j.at("sweep").at("grid").is_array()) throw ConfigError("sweep.grid", "expected an array");
  for (std::size_t i = 0; i < j["sweep"]["grid"].size(); ++i) {
    const auto& v = j["sweep"]["grid"][i];
    if (!v.is_number()) throw ConfigError("sweep.grid[" + std::to_string(i) + "]", "expected a number");
    cfg.grid.push_back(v.get<double>());
  }

  cfg.channel.wavelength = get_field<double>(j, "channel.wavelength");
  cfg.channel.spacing = get_field<double>(j, "channel.spacing");
  cfg.channel.paths = get_field<int>(j, "channel.paths");
  cfg.channel.noise_variance = get_field<double>(j, "channel.noise_variance");
  cfg.channel.nt = get_field<int>(j, "dims.nt");
  cfg.channel.nr = get_field<int>(j, "dims.nr");
  cfg.ns = get_field<int>(j, "dims.ns");
  cfg.nrf = get_field<int>(j, "dims.nrf");
  cfg.nrf_sc = get_field<int>(j, "dims.nrf_sc");
  cfg.trials = get_field<std::size_t>(j, "trials");
  cfg.seed = get_field<std::uint64_t>(j, "seed");
  cfg.receive_snr_db = get_field<double>(j, "receive_snr_db");
  cfg.rsnr_db = get_field<double>(j, "rsnr_db");
  cfg.mi.samples = get_field<std::size_t>(j, "mc.samples");
  cfg.mi.inner_samples = get_field<std::size_t>(j, "mc.inner_samples");
  cfg.mi.batches = get_field<std::size_t>(j, "mc.batches");
  cfg.altmin_tol = get_field<double>(j, "altmin.tol");
  cfg.max_iter_fc = get_field<int>(j, "altmin.max_iter_fc");
  cfg.max_iter_sc = get_field<int>(j, "altmin.max_iter_sc");
  cfg.restarts = get_field<int>(j, "altmin.restarts");
  cfg.output_path = get_field<std::string>(j, "output.path");
  cfg.trace_dir = get_field<std::string>(j, "output.trace_dir");
  const std::string format = get_field<std::string>(j, "output.format");
  if (format == "csv") {
    cfg.format = OutputFormat::Csv;
  } else if (format == "json") {
    cfg.format = OutputFormat::Json;
  } else {
    throw ConfigError("output.format", "expected 'csv' or 'json'");
  }
  cfg.jobs = get_field<unsigned>(j, "jobs");
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path, const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("malformed JSON: ") + e.what());
  }
  for (const auto& [key, value] : overrides) apply_override(j, key, value);
  return parse_config(j);
}

namespace {

/// Channel, transmit power and reference calibrated for one sweep point:
/// power hits the receive SNR under uniform covariance, then the reference
/// magnitude hits the RSNR for that signal power.
struct Calibrated {
  ComplexMatrix h;
  ComplexVector r;
  double power = 0.0;
  LinearizedChannel lc;
  double receive_snr_db = 0.0;
  double rsnr_db = 0.0;
};

Calibrated calibrate(const ChannelRealization& ch, double noise, double receive_snr, double rsnr) {
  Calibrated c;
  c.h = ch.h;
  c.power = power_for_receive_snr(ch.h, receive_snr, noise);
  const double signal = c.power * ch.h.squaredNorm() / static_cast<double>(ch.h.cols());
  const double gain = reference_gain_for_rsnr(static_cast<int>(ch.h.rows()), signal, noise, rsnr);
  c.r = ch.r * (gain / ch.config.reference_gain);
  c.lc = linearize(c.h, c.r);
  c.receive_snr_db = receive_snr_db(c.h, c.power, noise);
  c.rsnr_db = rsnr_db(c.h, c.r, c.power, noise);
  return c;
}

double relative_residual(const RealMatrix& f_bar, const HybridPrecoder& p) {
  return (f_bar - p.effective()).norm() / f_bar.norm();
}

struct TrialContext {
  const ExperimentConfig& cfg;
  std::size_t trial;
  std::uint64_t seed;
  std::string id;
};

TrialRecord make_record(const TrialContext& ctx, double sweep_value) {
  TrialRecord rec;
  rec.experiment = ctx.id;
  rec.sweep_value = sweep_value;
  rec.trial = ctx.trial;
  rec.seed = ctx.seed;
  return rec;
}

AltMinOptions altmin_options(const ExperimentConfig& cfg, double power, int max_iter, std::uint64_t seed) {
  AltMinOptions o;
  o.power = power;
  o.tol = cfg.altmin_tol;
  o.max_iter = max_iter;
  o.seed = seed;
  o.restarts = cfg.restarts;
  return o;
}

void rate_point(const TrialContext& ctx, const ChannelConfig& channel, double receive_snr, std::size_t point,
                TrialRecord& rec) {
  const auto& cfg = ctx.cfg;
  const double noise = channel.noise_variance;
  const ChannelRealization ch = generate_channel(channel, ctx.seed);
  const Calibrated c = calibrate(ch, noise, receive_snr, cfg.rsnr_db);

  const DigitalPrecoder iq = iq_digital_precoder(c.lc.real, c.power, noise, cfg.ns);
  const ClassicalPrecoder classical = classical_precoder(c.lc.rotated, c.power, noise, cfg.ns);
  const std::uint64_t hseed = Rng::derive(ctx.seed, 1000 + point);
  const auto fc = alg1_fc(iq.f, cfg.nrf, altmin_options(cfg, c.power, cfg.max_iter_fc, hseed));
  const auto sc = alg2_sc(iq.f, cfg.nrf, altmin_options(cfg, c.power, cfg.max_iter_sc, hseed));

  rec.metrics["rate_iq_digital"] = achievable_rate(c.lc.real, iq.covariance(), noise);
  rec.metrics["rate_classical_digital"] = achievable_rate(c.lc.real, classical.covariance(), noise);
  rec.metrics["rate_fc_hybrid"] = achievable_rate(c.lc.real, fc.precoder.covariance(), noise);
  rec.metrics["rate_sc_hybrid"] = achievable_rate(c.lc.real, sc.precoder.covariance(), noise);
  rec.metrics["receive_snr_db"] = c.receive_snr_db;
  rec.metrics["rsnr_db"] = c.rsnr_db;
  rec.metrics["transmit_power"] = c.power;
}

std::vector<TrialRecord> run_trial(const TrialContext& ctx) {
  const auto& cfg = ctx.cfg;
  std::vector<TrialRecord> out;
  const double noise = cfg.channel.noise_variance;

  switch (cfg.experiment) {
    case ExperimentKind::DofSlope: {
      const DofSlopes s = dof_trial(cfg.channel, cfg.grid, ctx.seed);
      for (std::size_t i = 0; i < s.at_snr_db.size(); ++i) {
        TrialRecord rec = make_record(ctx, s.at_snr_db[i]);
        rec.metrics["slope_atomic"] = s.atomic[i];
        rec.metrics["slope_inphase"] = s.inphase[i];
        rec.metrics["slope_classical"] = s.classical[i];
        out.push_back(std::move(rec));
      }
      break;
    }
    case ExperimentKind::MiVsRsnr: {
      const ChannelRealization ch = generate_channel(cfg.channel, ctx.seed);
      for (std::size_t i = 0; i < cfg.grid.size(); ++i) {
        const Calibrated c = calibrate(ch, noise, cfg.receive_snr_db, cfg.grid[i]);
        const int streams = static_cast<int>(std::min<Eigen::Index>(
            std::min(cfg.channel.nr, 2 * cfg.channel.nt), svd(c.lc.real).rank()));
        const RealMatrix q_bar = svd_precoder(c.lc.real, c.power, noise, streams).covariance();
        // The reference is rescaled (same phases, same H_bar) so that the RSNR
        // holds for the covariance actually transmitted.
        const RealMatrix h_full = real_equivalent(c.h);
        const double signal = (h_full * q_bar * h_full.transpose()).trace();
        const double gain = reference_gain_for_rsnr(cfg.channel.nr, signal, noise, cfg.grid[i]);
        const ComplexVector r = ch.r * (gain / ch.config.reference_gain);
        const double rsnr = 10.0 * std::log10(r.squaredNorm() / (signal + cfg.channel.nr * noise));
        MiOptions mi = cfg.mi;
        mi.jobs = cfg.trials == 1 ? cfg.jobs : 1;
        const double linear = mi_linearized(c.lc.real, q_bar, noise);
        const MiEstimate est = mi_nonlinear_mc(c.h, r, noise, q_bar, mi, Rng::derive(ctx.seed, 2000 + i));
        TrialRecord rec = make_record(ctx, cfg.grid[i]);
        rec.metrics["mi_linearized"] = linear;
        rec.metrics["mi_nonlinear"] = est.value;
        rec.metrics["mi_nonlinear_se"] = est.standard_error;
        rec.metrics["relative_error"] = std::abs(est.value - linear) / linear;
        rec.metrics["rsnr_db"] = rsnr;
        rec.metrics["receive_snr_db"] = c.receive_snr_db;
        out.push_back(std::move(rec));
      }
      break;
    }
    case ExperimentKind::RateVsSnr: {
      for (std::size_t i = 0; i < cfg.grid.size(); ++i) {
        TrialRecord rec = make_record(ctx, cfg.grid[i]);
        rate_point(ctx, cfg.channel, cfg.grid[i], i, rec);
        out.push_back(std::move(rec));
      }
      break;
    }
    case ExperimentKind::RateVsNr: {
      for (std::size_t i = 0; i < cfg.grid.size(); ++i) {
        ChannelConfig channel = cfg.channel;
        channel.nr = static_cast<int>(cfg.grid[i]);
        TrialRecord rec = make_record(ctx, cfg.grid[i]);
        rate_point(ctx, channel, cfg.receive_snr_db, i, rec);
        out.push_back(std::move(rec));
      }
      break;
    }
    case ExperimentKind::Convergence: {
      const ChannelRealization ch = generate_channel(cfg.channel, ctx.seed);
      for (std::size_t i = 0; i < cfg.grid.size(); ++i) {
        const Calibrated c = calibrate(ch, noise, cfg.grid[i], cfg.rsnr_db);
        const DigitalPrecoder iq = iq_digital_precoder(c.lc.real, c.power, noise, cfg.ns);
        const std::uint64_t hseed = Rng::derive(ctx.seed, 3000 + i);
        const int nrf_sc = cfg.nrf_sc == 0 ? cfg.nrf : cfg.nrf_sc;
        const auto fc = alg1_fc(iq.f, cfg.nrf, altmin_options(cfg, c.power, cfg.max_iter_fc, hseed));
        const auto sc = alg2_sc(iq.f, nrf_sc, altmin_options(cfg, c.power, cfg.max_iter_sc, hseed));
        TrialRecord rec = make_record(ctx, cfg.grid[i]);
        const std::pair<const char*, const HybridResult*> runs[] = {{"fc", &fc}, {"sc", &sc}};
        for (const auto& [tag, run] : runs) {
          const std::string p(tag);
          rec.metrics[p + "_objective"] = run->trace.objective.back();
          rec.metrics[p + "_relative_residual"] = relative_residual(iq.f, run->precoder);
          rec.metrics[p + "_iterations"] = run->trace.iterations;
          rec.metrics[p + "_converged"] = run->trace.converged ? 1.0 : 0.0;
          rec.metrics[p + "_monotone"] = run->trace.monotone() ? 1.0 : 0.0;
          if (!cfg.trace_dir.empty()) {
            const auto file = std::filesystem::path(cfg.trace_dir) /
                              ("convergence_" + p + "_point" + std::to_string(i) + "_trial" + std::to_string(ctx.trial) + ".csv");
            std::ofstream os(file);
            if (!os) throw IoError("cannot write trace file '" + file.string() + "'");
            run->trace.write_csv(os);
          }
        }
        out.push_back(std::move(rec));
      }
      break;
    }
  }
  for (const auto& rec : out)
    for (const auto& [name, value] : rec.metrics)
      if (!std::isfinite(value)) throw NumericError("metric " + name + " is not finite");
  return out;
}

}  // namespace

std::vector<TrialRecord> run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  if (!cfg.trace_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.trace_dir, ec);
    if (ec) throw IoError("cannot create trace directory '" + cfg.trace_dir + "': " + ec.message());
  }
  const std::string id(experiment_info(cfg.experiment).id);
  std::vector<std::vector<TrialRecord>> per_trial(cfg.trials);
  std::vector<std::exception_ptr> errors(cfg.trials);

  auto work = [&](std::size_t t) {
    try {
      per_trial[t] = run_trial(TrialContext{cfg, t, cfg.seed + t, id});
    } catch (...) {
      errors[t] = std::current_exception();
    }
  };

  const unsigned jobs = static_cast<unsigned>(std::min<std::size_t>(cfg.jobs, cfg.trials));
  if (jobs <= 1) {
    for (std::size_t t = 0; t < cfg.trials; ++t) work(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> workers;
    for (unsigned w = 0; w < jobs; ++w)
      workers.emplace_back([&] {
        for (std::size_t t = next++; t < cfg.trials; t = next++) work(t);
      });
  }

  for (std::size_t t = 0; t < cfg.trials; ++t) {
    if (!errors[t]) continue;
    const std::string where = "trial " + std::to_string(t) + " (seed " + std::to_string(cfg.seed + t) + "): ";
    try {
      std::rethrow_exception(errors[t]);
    } catch (const IoError& e) {
      throw IoError(where + e.what());
    } catch (const std::exception& e) {
      throw NumericError(where + e.what());
    }
  }

  // Sweep-major order: every trial produces its points in grid order.
  std::vector<TrialRecord> records;
  const std::size_t points = per_trial.empty() ? 0 : per_trial.front().size();
  for (std::size_t p = 0; p < points; ++p)
    for (auto& trial : per_trial) records.push_back(std::move(trial.at(p)));
  return records;
}

std::vector<Aggregate> aggregate(const std::vector<TrialRecord>& records) {
  // Keyed by (sweep value, metric) in first-seen order.
  std::vector<Aggregate> out;
  std::vector<std::vector<double>> values;
  for (const auto& rec : records) {
    for (const auto& [name, value] : rec.metrics) {
      auto it = std::find_if(out.begin(), out.end(),
                             [&](const Aggregate& a) { return a.sweep_value == rec.sweep_value && a.metric == name; });
      if (it == out.end()) {
        out.push_back({rec.sweep_value, name, 0, 0.0, 0.0});
        values.emplace_back();
        it = out.end() - 1;
      }
      values[static_cast<std::size_t>(it - out.begin())].push_back(value);
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& v = values[i];
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    out[i].count = v.size();
    out[i].mean = mean;
    out[i].standard_error = v.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  }
  return out;
}

std::string format_records(const std::vector<TrialRecord>& records, OutputFormat format) {
  std::ostringstream os;
  if (format == OutputFormat::Csv) {
    os << "experiment,sweep_value,trial,metric,value,seed\n";
    for (const auto& rec : records)
      for (const auto& [name, value] : rec.metrics)
        os << rec.experiment << ',' << fmt_double(rec.sweep_value) << ',' << rec.trial << ',' << name << ','
           << fmt_double(value) << ',' << rec.seed << '\n';
    return os.str();
  }
  os << "[";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    os << (i == 0 ? "\n" : ",\n") << "  {\"experiment\": " << json(rec.experiment).dump()
       << ", \"sweep_value\": " << fmt_double(rec.sweep_value) << ", \"trial\": " << rec.trial << ", \"metrics\": {";
    bool first = true;
    for (const auto& [name, value] : rec.metrics) {
      os << (first ? "" : ", ") << json(name).dump() << ": " << fmt_double(value);
      first = false;
    }
    os << "}, \"seed\": " << rec.seed << "}";
  }
  os << "\n]\n";
  return os.str();
}

void emit_results(const std::vector<TrialRecord>& records, OutputFormat format, const std::string& path) {
  if (records.empty()) throw InvalidArgument("emit_results: no records to write");
  for (const auto& rec : records)
    for (const auto& [name, value] : rec.metrics)
      if (!std::isfinite(value)) throw NumericError("emit_results: metric " + name + " is not finite");
  const std::string text = format_records(records, format);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  out.close();
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::vector<TrialRecord> parse_records_json(const std::string& text) {
  const json j = json::parse(text);
  std::vector<TrialRecord> out;
  for (const auto& item : j) {
    TrialRecord rec;
    rec.experiment = item.at("experiment").get<std::string>();
    rec.sweep_value = item.at("sweep_value").get<double>();
    rec.trial = item.at("trial").get<std::size_t>();
    rec.seed = item.at("seed").get<std::uint64_t>();
    for (const auto& [name, value] : item.at("metrics").items()) rec.metrics[name] = value.get<double>();
    out.push_back(std::move(rec));
  }
  return out;
}

std::string format_aggregates_csv(const std::vector<Aggregate>& aggregates) {
  std::ostringstream os;
  os << "sweep_value,metric,count,mean,standard_error\n";
  for (const auto& a : aggregates)
    os << fmt_double(a.sweep_value) << ',' << a.metric << ',' << a.count << ',' << fmt_double(a.mean) << ','
       << fmt_double(a.standard_error) << '\n';
  return os.str();
}

}  // namespace rydmimo

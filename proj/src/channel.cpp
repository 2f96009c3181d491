// SPDX-License-Identifier: Apache-2.0
#include "rydmimo/channel.hpp"

#include "rydmimo/numerics.hpp"
#include "rydmimo/rng.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace rydmimo {

namespace {

constexpr std::uint64_t kPathStream = 0;
constexpr std::uint64_t kReferenceStream = 1;

double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw InvalidArgument(field + ": " + what);
}

}  // namespace

void ChannelConfig::validate() const {
  require(nt >= 1, "nt", "must be >= 1");
  require(nr >= 1, "nr", "must be >= 1");
  require(paths >= 1, "paths", "must be >= 1");
  require(wavelength > 0 && std::isfinite(wavelength), "wavelength", "must be positive");
  require(spacing > 0 && std::isfinite(spacing), "spacing", "must be positive");
  require(reference_gain > 0 && std::isfinite(reference_gain), "reference_gain", "must be positive");
  require(noise_variance > 0 && std::isfinite(noise_variance), "noise_variance", "must be positive");
  require(transmit_power > 0 && std::isfinite(transmit_power), "transmit_power", "must be positive");
}

ComplexMatrix channel_from_paths(const ChannelConfig& cfg, const std::vector<PathParams>& paths) {
  ComplexMatrix h = ComplexMatrix::Zero(cfg.nr, cfg.nt);
  const double k = 2.0 * std::numbers::pi * cfg.spacing / cfg.wavelength;
  for (const auto& p : paths) {
    const double sa = std::sin(deg2rad(p.arrival_deg));
    const double sd = std::sin(deg2rad(p.departure_deg));
    for (int m = 0; m < cfg.nr; ++m)
      for (int n = 0; n < cfg.nt; ++n) h(m, n) += p.gain * std::polar(1.0, k * (m * sa + n * sd));
  }
  return h;
}

ChannelRealization generate_channel(const ChannelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng = Rng::substream(seed, kPathStream);
  ChannelRealization out;
  out.paths.reserve(static_cast<std::size_t>(cfg.paths));
  for (int l = 0; l < cfg.paths; ++l) {
    PathParams p;
    p.gain = rng.complex_normal(1.0);
    p.arrival_deg = rng.uniform(-90.0, 90.0);
    p.departure_deg = rng.uniform(-90.0, 90.0);
    out.paths.push_back(p);
  }
  out.h = channel_from_paths(cfg, out.paths);
  out.r = generate_reference(cfg, seed);
  out.seed = seed;
  out.config = cfg;
  return out;
}

ComplexVector generate_reference(const ChannelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng = Rng::substream(seed, kReferenceStream);
  ComplexVector r(cfg.nr);
  for (int m = 0; m < cfg.nr; ++m) r(m) = std::polar(cfg.reference_gain, rng.uniform(0.0, 2.0 * std::numbers::pi));
  return r;
}

double signal_power(const ComplexMatrix& h, const ComplexMatrix& q) {
  if (q.rows() != h.cols() || q.cols() != h.cols()) throw InvalidArgument("signal_power: covariance must be nt x nt");
  return (h * q * h.adjoint()).trace().real();
}

double signal_power_real(const ComplexMatrix& h, const RealMatrix& q_bar) {
  if (q_bar.rows() != 2 * h.cols() || q_bar.cols() != 2 * h.cols())
    throw InvalidArgument("signal_power_real: covariance must be 2nt x 2nt");
  const RealMatrix hr = real_equivalent(h);
  return (hr * q_bar * hr.transpose()).trace();
}

double receive_snr_db(const ComplexMatrix& h, const ComplexMatrix& q, double noise_variance) {
  if (!(noise_variance > 0)) throw InvalidArgument("receive_snr_db: noise variance must be positive");
  return 10.0 * std::log10(signal_power(h, q) / (static_cast<double>(h.rows()) * noise_variance));
}

double receive_snr_db(const ComplexMatrix& h, double power, double noise_variance) {
  const ComplexMatrix q = ComplexMatrix::Identity(h.cols(), h.cols()) * (power / static_cast<double>(h.cols()));
  return receive_snr_db(h, q, noise_variance);
}

double rsnr_db(const ComplexMatrix& h, const ComplexVector& r, const ComplexMatrix& q, double noise_variance) {
  if (noise_variance < 0) throw InvalidArgument("rsnr_db: noise variance must be nonnegative");
  const double denom = signal_power(h, q) + static_cast<double>(h.rows()) * noise_variance;
  if (!(denom > 0)) throw NumericError("rsnr_db: zero signal-plus-noise power");
  return 10.0 * std::log10(r.squaredNorm() / denom);
}

double rsnr_db(const ComplexMatrix& h, const ComplexVector& r, double power, double noise_variance) {
  const ComplexMatrix q = ComplexMatrix::Identity(h.cols(), h.cols()) * (power / static_cast<double>(h.cols()));
  return rsnr_db(h, r, q, noise_variance);
}

double power_for_receive_snr(const ComplexMatrix& h, double snr_db, double noise_variance) {
  const double gain = h.squaredNorm();
  if (!(gain > 0)) throw NumericError("power_for_receive_snr: zero channel");
  const double target = std::pow(10.0, snr_db / 10.0) * static_cast<double>(h.rows()) * noise_variance;
  return target * static_cast<double>(h.cols()) / gain;
}

double reference_gain_for_rsnr(int nr, double signal_power, double noise_variance, double rsnr_db) {
  const double denom = signal_power + nr * noise_variance;
  if (!(denom > 0)) throw NumericError("reference_gain_for_rsnr: zero signal-plus-noise power");
  return std::sqrt(std::pow(10.0, rsnr_db / 10.0) * denom / nr);
}

nlohmann::json to_json(const ChannelConfig& cfg) {
  return {{"nt", cfg.nt},
          {"nr", cfg.nr},
          {"paths", cfg.paths},
          {"wavelength", cfg.wavelength},
          {"spacing", cfg.spacing},
          {"reference_gain", cfg.reference_gain},
          {"noise_variance", cfg.noise_variance},
          {"transmit_power", cfg.transmit_power}};
}

ChannelConfig channel_config_from_json(const nlohmann::json& j) {
  ChannelConfig cfg;
  cfg.nt = j.value("nt", cfg.nt);
  cfg.nr = j.value("nr", cfg.nr);
  cfg.paths = j.value("paths", cfg.paths);
  cfg.wavelength = j.value("wavelength", cfg.wavelength);
  cfg.spacing = j.value("spacing", cfg.spacing);
  cfg.reference_gain = j.value("reference_gain", cfg.reference_gain);
  cfg.noise_variance = j.value("noise_variance", cfg.noise_variance);
  cfg.transmit_power = j.value("transmit_power", cfg.transmit_power);
  return cfg;
}

namespace {
nlohmann::json complex_pair(Complex c) { return nlohmann::json::array({c.real(), c.imag()}); }
Complex complex_from(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }
}  // namespace

nlohmann::json to_json(const ChannelRealization& ch) {
  nlohmann::json h = nlohmann::json::array();
  for (Eigen::Index m = 0; m < ch.h.rows(); ++m) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index n = 0; n < ch.h.cols(); ++n) row.push_back(complex_pair(ch.h(m, n)));
    h.push_back(row);
  }
  nlohmann::json r = nlohmann::json::array();
  for (Eigen::Index m = 0; m < ch.r.size(); ++m) r.push_back(complex_pair(ch.r(m)));
  nlohmann::json paths = nlohmann::json::array();
  for (const auto& p : ch.paths)
    paths.push_back({{"gain", complex_pair(p.gain)}, {"arrival_deg", p.arrival_deg}, {"departure_deg", p.departure_deg}});
  return {{"rows", ch.h.rows()}, {"cols", ch.h.cols()}, {"seed", ch.seed}, {"config", to_json(ch.config)},
          {"h", h},          {"r", r},               {"paths", paths}};
}

ChannelRealization channel_from_json(const nlohmann::json& j) {
  ChannelRealization ch;
  ch.config = channel_config_from_json(j.at("config"));
  ch.seed = j.value("seed", std::uint64_t{0});
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  ch.h.resize(rows, cols);
  const auto& h = j.at("h");
  if (static_cast<Eigen::Index>(h.size()) != rows) throw InvalidArgument("h: row count does not match rows");
  for (Eigen::Index m = 0; m < rows; ++m) {
    if (static_cast<Eigen::Index>(h.at(m).size()) != cols) throw InvalidArgument("h: column count does not match cols");
    for (Eigen::Index n = 0; n < cols; ++n) ch.h(m, n) = complex_from(h.at(m).at(n));
  }
  const auto& r = j.at("r");
  ch.r.resize(static_cast<Eigen::Index>(r.size()));
  for (std::size_t m = 0; m < r.size(); ++m) ch.r(static_cast<Eigen::Index>(m)) = complex_from(r.at(m));
  for (const auto& p : j.value("paths", nlohmann::json::array()))
    ch.paths.push_back({complex_from(p.at("gain")), p.at("arrival_deg").get<double>(), p.at("departure_deg").get<double>()});
  return ch;
}

}  // namespace rydmimo

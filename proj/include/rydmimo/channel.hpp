// SPDX-License-Identifier: Apache-2.0
//
// Saleh-Valenzuela channels between a ULA transmitter and a ULA of atomic
// receive antennas, local-oscillator reference vectors, and the SNR / RSNR
// metrics used to calibrate experiments.
#pragma once

#include "rydmimo/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <vector>

namespace rydmimo {

struct ChannelConfig {
  int nt = 2;
  int nr = 2;
  int paths = 10;
  double wavelength = 10.83e-3;  // m
  double spacing = 10e-3;        // m
  double reference_gain = 1.0;   // |r_m|
  double noise_variance = 1.0;
  double transmit_power = 1.0;

  /// Throws InvalidArgument naming the offending field.
  void validate() const;
};

struct PathParams {
  Complex gain;
  double arrival_deg = 0.0;
  double departure_deg = 0.0;
};

struct ChannelRealization {
  ComplexMatrix h;  // nr x nt
  ComplexVector r;  // nr
  std::vector<PathParams> paths;
  std::uint64_t seed = 0;
  ChannelConfig config;
};

/// H(m, n) = sum_l gain_l * exp(j 2 pi (d / lambda) (m sin(arrival_l) + n sin(departure_l))),
/// antennas indexed from zero.
ComplexMatrix channel_from_paths(const ChannelConfig& cfg, const std::vector<PathParams>& paths);

/// Draws gains from CN(0, 1) and both angles from U(-90, 90) degrees, then
/// attaches the reference vector of generate_reference(cfg, seed).
ChannelRealization generate_channel(const ChannelConfig& cfg, std::uint64_t seed);

/// r_m = reference_gain * exp(j theta_m), theta_m ~ U(0, 2 pi).
ComplexVector generate_reference(const ChannelConfig& cfg, std::uint64_t seed);

/// E||Hx||^2 for x ~ CN(0, q).
double signal_power(const ComplexMatrix& h, const ComplexMatrix& q);
/// E||Hx||^2 for real-form input x_bar = (x_I; x_Q) ~ N(0, q_bar).
double signal_power_real(const ComplexMatrix& h, const RealMatrix& q_bar);

double receive_snr_db(const ComplexMatrix& h, const ComplexMatrix& q, double noise_variance);
/// Uniform covariance (power / nt) I.
double receive_snr_db(const ComplexMatrix& h, double power, double noise_variance);

double rsnr_db(const ComplexMatrix& h, const ComplexVector& r, const ComplexMatrix& q, double noise_variance);
double rsnr_db(const ComplexMatrix& h, const ComplexVector& r, double power, double noise_variance);

/// Transmit power giving `snr_db` receive SNR under uniform covariance.
double power_for_receive_snr(const ComplexMatrix& h, double snr_db, double noise_variance);

/// Per-antenna reference magnitude giving `rsnr_db` for the given received
/// signal power E||Hx||^2.
double reference_gain_for_rsnr(int nr, double signal_power, double noise_variance, double rsnr_db);

nlohmann::json to_json(const ChannelConfig& cfg);
ChannelConfig channel_config_from_json(const nlohmann::json& j);

/// Complex entries are written as [re, im] pairs.
nlohmann::json to_json(const ChannelRealization& ch);
ChannelRealization channel_from_json(const nlohmann::json& j);

}  // namespace rydmimo

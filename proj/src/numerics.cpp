// SPDX-License-Identifier: Apache-2.0
#include "rydmimo/numerics.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace rydmimo {

WaterFillResult water_fill(std::span<const double> gains, double total, double noise) {
  if (!(total > 0) || !std::isfinite(total)) throw InvalidArgument("water_fill: total power must be positive");
  if (!(noise > 0) || !std::isfinite(noise)) throw InvalidArgument("water_fill: noise variance must be positive");

  // Noise floors of the usable channels, ascending.
  std::vector<std::pair<double, std::size_t>> floors;
  floors.reserve(gains.size());
  for (std::size_t k = 0; k < gains.size(); ++k) {
    if (!std::isfinite(gains[k]) || gains[k] < 0) throw InvalidArgument("water_fill: gains must be finite and nonnegative");
    if (gains[k] > 0) floors.emplace_back(noise / (gains[k] * gains[k]), k);
  }
  if (floors.empty()) throw NumericError("water_fill: degenerate channel (all gains are zero)");
  std::stable_sort(floors.begin(), floors.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  double level = 0.0;
  for (std::size_t active = floors.size(); active >= 1; --active) {
    double sum = total;
    for (std::size_t i = 0; i < active; ++i) sum += floors[i].first;
    level = sum / static_cast<double>(active);
    if (level > floors[active - 1].first || active == 1) break;
  }

  WaterFillResult out;
  out.water_level = level;
  out.allocation = RealVector::Zero(static_cast<Eigen::Index>(gains.size()));
  for (const auto& [floor, k] : floors) out.allocation(static_cast<Eigen::Index>(k)) = std::max(level - floor, 0.0);
  return out;
}

WaterFillResult water_fill(const RealVector& gains, double total, double noise) {
  return water_fill(std::span<const double>(gains.data(), static_cast<std::size_t>(gains.size())), total, noise);
}

RealMatrix procrustes(const RealMatrix& g) {
  if (g.rows() != g.cols()) throw InvalidArgument("procrustes: matrix must be square");
  const auto dec = svd(g);
  return dec.v * dec.u.transpose();
}

}  // namespace rydmimo

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gpz/repr_stats.hpp"

namespace gpz {

inline constexpr double kDefaultTau = 0.20;

/// Located transition zone. Indices refer to positions in the target-layer
/// list the profiles were built from.
struct GpzReport {
  std::vector<std::string> layers;
  std::size_t transition_start = 0;  // l_TS
  std::size_t transition_peak = 0;   // l_TP
  std::vector<std::size_t> zone;     // l_TS..l_TP, or {l_TP} when localized
  bool localized = false;
  bool no_precursor = false;         // l_TP is the first comparable layer
  double tau = kDefaultTau;
  std::vector<std::optional<double>> drops;  // drops[i] is layer i -> i+1
  double max_drop_pct = 0.0;

  bool operator==(const GpzReport&) const = default;
};

struct StabilityResult {
  double agreement = 0.0;
  double mean_jaccard = 0.0;
};

/// Signed percentage decrease of the normalized radius between adjacent
/// profiles. Entry i compares profile i with profile i+1; it is empty when the
/// previous radius is zero.
std::vector<std::optional<double>> drop_percentages(std::span<const LayerRadiusProfile> profiles);

/// Locates l_TP (largest drop) and l_TS (largest drop strictly before l_TP).
/// Ties go to the shallower layer. Needs at least three profiles and
/// tau in (0, 1].
GpzReport locate(std::span<const LayerRadiusProfile> profiles, double tau = kDefaultTau);

/// Agreement with the modal zone and mean pairwise Jaccard index of zones.
StabilityResult stability_check(std::span<const GpzReport> reports);

/// Profiles built from bare normalized radii (d = 1), handy for hand traces.
std::vector<LayerRadiusProfile> profiles_from_radii(std::span<const double> r2_norm);

}  // namespace gpz

#include "gpz/gpz_locator.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "gpz/error.hpp"

namespace gpz {

std::vector<std::optional<double>> drop_percentages(std::span<const LayerRadiusProfile> profiles) {
  if (profiles.size() < 2) throw InvalidArgument("drop_percentages: need at least two profiles");
  std::vector<std::optional<double>> drops;
  drops.reserve(profiles.size() - 1);
  for (std::size_t i = 1; i < profiles.size(); ++i) {
    const double prev = profiles[i - 1].r2_norm;
    const double cur = profiles[i].r2_norm;
    if (!(prev > 0.0)) {
      drops.emplace_back();
    } else {
      drops.emplace_back((prev - cur) / prev * 100.0);
    }
  }
  return drops;
}

GpzReport locate(std::span<const LayerRadiusProfile> profiles, double tau) {
  if (profiles.size() < 3) throw InvalidArgument("locate: need at least three layer profiles");
  if (!(tau > 0.0 && tau <= 1.0)) throw InvalidArgument("locate: tau must lie in (0, 1]");

  GpzReport r;
  r.tau = tau;
  for (const auto& p : profiles) r.layers.push_back(p.layer_name);
  r.drops = drop_percentages(profiles);

  // Layer t (t >= 1) carries drops[t - 1].
  auto drop_at = [&](std::size_t t) { return r.drops[t - 1]; };
  auto argmax = [&](std::size_t lo, std::size_t hi) -> std::optional<std::size_t> {
    std::optional<std::size_t> best;
    for (std::size_t t = lo; t < hi; ++t) {
      const auto v = drop_at(t);
      if (!v) continue;
      if (!best || *v > *drop_at(*best)) best = t;
    }
    return best;
  };

  const auto peak = argmax(1, profiles.size());
  if (!peak) throw InvalidArgument("locate: every drop is undefined (zero radii)");
  r.transition_peak = *peak;
  r.max_drop_pct = *drop_at(*peak);

  const auto start = argmax(1, *peak);
  if (!start) {
    r.transition_start = *peak;
    r.no_precursor = true;
  } else {
    r.transition_start = *start;
  }

  bool quiet = true;
  for (std::size_t t = r.transition_start + 1; t < r.transition_peak; ++t) {
    const auto v = drop_at(t);
    // An undefined drop cannot be shown to be small.
    if (!v || !(std::abs(*v) < tau * 100.0)) quiet = false;
  }
  r.localized = quiet;
  if (quiet) {
    r.zone = {r.transition_peak};
  } else {
    for (std::size_t t = r.transition_start; t <= r.transition_peak; ++t) r.zone.push_back(t);
  }
  return r;
}

StabilityResult stability_check(std::span<const GpzReport> reports) {
  if (reports.size() < 2) throw InvalidArgument("stability_check: need at least two reports");
  for (const auto& rep : reports) {
    if (rep.layers != reports.front().layers) {
      throw InvalidArgument("stability_check: reports cover different layer lists");
    }
  }
  // Modal zone, ties to the first seen.
  std::size_t best_count = 0;
  for (const auto& a : reports) {
    const auto n = static_cast<std::size_t>(std::count_if(
        reports.begin(), reports.end(), [&](const GpzReport& b) { return b.zone == a.zone; }));
    best_count = std::max(best_count, n);
  }
  StabilityResult s;
  s.agreement = static_cast<double>(best_count) / static_cast<double>(reports.size());

  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const std::set<std::size_t> a(reports[i].zone.begin(), reports[i].zone.end());
    for (std::size_t j = i + 1; j < reports.size(); ++j) {
      const std::set<std::size_t> b(reports[j].zone.begin(), reports[j].zone.end());
      std::vector<std::size_t> inter, uni;
      std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
      std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(uni));
      sum += uni.empty() ? 1.0 : static_cast<double>(inter.size()) / static_cast<double>(uni.size());
      ++pairs;
    }
  }
  s.mean_jaccard = sum / static_cast<double>(pairs);
  return s;
}

std::vector<LayerRadiusProfile> profiles_from_radii(std::span<const double> r2_norm) {
  std::vector<LayerRadiusProfile> out;
  for (std::size_t i = 0; i < r2_norm.size(); ++i) {
    LayerRadiusProfile p;
    p.layer_index = i;
    p.layer_name = "layer" + std::to_string(i);
    p.d = 1;
    p.r2 = r2_norm[i];
    p.r2_norm = r2_norm[i];
    out.push_back(std::move(p));
  }
  if (out.size() >= 2) {
    const auto drops = drop_percentages(out);
    for (std::size_t i = 0; i < drops.size(); ++i) out[i + 1].drop_pct = drops[i];
  }
  return out;
}

}  // namespace gpz

#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>

#include "gpz/cost_model.hpp"
#include "gpz/dynamics.hpp"
#include "gpz/entropy_bounds.hpp"
#include "gpz/gpz_locator.hpp"
#include "gpz/inversion_probe.hpp"
#include "gpz/repr_stats.hpp"

namespace gpz {

/// Finite doubles as numbers, infinities as "+inf"/"-inf", NaN as null.
nlohmann::json json_number(double v);
nlohmann::json json_number(const std::optional<double>& v);

/// Per-layer statistics of a dump, shallow to deep.
nlohmann::json stats_json(const ActivationSet& acts);
nlohmann::json bounds_json(const EntropyReport& report);
nlohmann::json gpz_json(const GpzReport& report);
nlohmann::json dynamics_json(const DynamicsReport& report);
nlohmann::json inversion_json(const InversionReport& report);
nlohmann::json cost_json(const CostReport& report);

/// Two-space indented text with a trailing newline.
std::string dump_json(const nlohmann::json& j);

}  // namespace gpz

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gpz/micronet.hpp"

namespace gpz {

enum class Precision { fp32, fp16, int8 };

std::size_t bytes_per_element(Precision p);
std::string to_string(Precision p);
Precision parse_precision(std::string_view text);

/// Raw payload of one sample's activation of the given shape.
std::uint64_t tx_bytes(std::span<const std::size_t> shape, Precision p);

/// FLOPs of layers [0, split): 2 * in * out each (one MAC = 2 FLOPs).
std::uint64_t flops(const MlpModel& model, std::size_t split_index);

struct Measurement {
  double e_total_j = 0.0;
  std::uint64_t n_iters = 0;
  double t_window_s = 0.0;
  std::optional<double> flops_per_inf;  // overrides the model count when set
};

/// Parses {"e_total_j", "n_iters", "t_window_s", optional "flops_per_inf"}.
Measurement parse_measurement(std::string_view json_text);

struct EnergyMetrics {
  double e_total = 0.0;
  std::uint64_t n_iters = 0;
  double t_window = 0.0;
  double flops_per_inf = 0.0;
  double e_inf = 0.0;
  double p_avg = 0.0;
  double gflops_per_watt = 0.0;
  double edp = 0.0;
  double ed2p = 0.0;
};

/// GFLOPs/W counts single-inference FLOPs over the whole window.
EnergyMetrics energy_metrics(double e_total, std::uint64_t n_iters, double t_window,
                             double flops_per_inf);

struct CostReport {
  std::size_t split_index = 0;
  std::uint64_t edge_flops = 0;
  std::vector<std::size_t> split_shape;
  std::map<std::string, std::uint64_t> tx_bytes;
  std::size_t edge_params = 0;
  std::size_t total_params = 0;
  double edge_share = 0.0;
  std::uint64_t act_peak_bytes = 0;
  std::optional<EnergyMetrics> energy;
};

/// The split activation is the output of layer split_index - 1, or the input
/// when split_index is 0.
CostReport cost_report(const MlpModel& model, std::size_t split_index,
                       std::span<const Precision> precisions,
                       const std::optional<Measurement>& measurement);

}  // namespace gpz

#include "gpz/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "gpz/error.hpp"

namespace gpz {

std::size_t bytes_per_element(Precision p) {
  switch (p) {
    case Precision::fp32: return 4;
    case Precision::fp16: return 2;
    case Precision::int8: return 1;
  }
  throw InvalidArgument("unknown precision");
}

std::string to_string(Precision p) {
  switch (p) {
    case Precision::fp32: return "fp32";
    case Precision::fp16: return "fp16";
    case Precision::int8: return "int8";
  }
  throw InvalidArgument("unknown precision");
}

Precision parse_precision(std::string_view text) {
  if (text == "fp32") return Precision::fp32;
  if (text == "fp16") return Precision::fp16;
  if (text == "int8") return Precision::int8;
  throw InvalidArgument("unknown precision '" + std::string(text) + "' (fp32|fp16|int8)");
}

std::uint64_t tx_bytes(std::span<const std::size_t> shape, Precision p) {
  if (shape.empty()) throw InvalidArgument("tx_bytes: empty shape");
  std::uint64_t n = 1;
  for (auto e : shape) {
    if (e == 0) throw InvalidArgument("tx_bytes: zero extent");
    n *= e;
  }
  return n * bytes_per_element(p);
}

std::uint64_t flops(const MlpModel& model, std::size_t split_index) {
  if (split_index > model.num_layers()) throw InvalidArgument("flops: split beyond last layer");
  std::uint64_t f = 0;
  for (std::size_t l = 0; l < split_index; ++l) {
    f += 2ULL * model.layers[l].in * model.layers[l].out;
  }
  return f;
}

Measurement parse_measurement(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("measurement: ") + e.what());
  }
  if (!j.is_object()) throw InvalidArgument("measurement: expected a JSON object");
  Measurement m;
  auto number = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_number()) {
      throw InvalidArgument(std::string("measurement: missing numeric field '") + key + "'");
    }
    return j[key].get<double>();
  };
  m.e_total_j = number("e_total_j");
  const double n = number("n_iters");
  if (!(n >= 1.0) || n != std::floor(n)) {
    throw InvalidArgument("measurement: n_iters must be a positive integer");
  }
  m.n_iters = static_cast<std::uint64_t>(n);
  m.t_window_s = number("t_window_s");
  if (j.contains("flops_per_inf")) m.flops_per_inf = number("flops_per_inf");
  return m;
}

EnergyMetrics energy_metrics(double e_total, std::uint64_t n_iters, double t_window,
                             double flops_per_inf) {
  if (n_iters == 0) throw InvalidArgument("energy_metrics: n_iters must be > 0");
  if (!(t_window > 0.0) || !std::isfinite(t_window)) {
    throw InvalidArgument("energy_metrics: t_window must be > 0");
  }
  if (!(e_total > 0.0) || !std::isfinite(e_total)) {
    throw InvalidArgument("energy_metrics: e_total must be > 0");
  }
  if (!(flops_per_inf >= 0.0) || !std::isfinite(flops_per_inf)) {
    throw InvalidArgument("energy_metrics: flops_per_inf must be >= 0");
  }
  EnergyMetrics m;
  m.e_total = e_total;
  m.n_iters = n_iters;
  m.t_window = t_window;
  m.flops_per_inf = flops_per_inf;
  m.e_inf = e_total / static_cast<double>(n_iters);
  m.p_avg = e_total / t_window;
  m.gflops_per_watt = (flops_per_inf / t_window) / 1e9 / m.p_avg;
  m.edp = e_total * t_window;
  m.ed2p = e_total * t_window * t_window;
  return m;
}

CostReport cost_report(const MlpModel& model, std::size_t split_index,
                       std::span<const Precision> precisions,
                       const std::optional<Measurement>& measurement) {
  model.validate();
  if (split_index > model.num_layers()) throw InvalidArgument("cost: split beyond last layer");
  CostReport r;
  r.split_index = split_index;
  r.edge_flops = flops(model, split_index);
  r.split_shape = {split_index == 0 ? model.input_dim() : model.layers[split_index - 1].out};
  for (auto p : precisions) r.tx_bytes[to_string(p)] = tx_bytes(r.split_shape, p);
  const auto pc = count_params(model, split_index);
  r.edge_params = pc.edge;
  r.total_params = pc.total;
  r.edge_share = pc.edge_share;
  std::size_t widest = model.input_dim();
  for (const auto& l : model.layers) widest = std::max(widest, l.out);
  r.act_peak_bytes = 4ULL * widest;
  if (measurement) {
    const double f = measurement->flops_per_inf.value_or(static_cast<double>(r.edge_flops));
    r.energy = energy_metrics(measurement->e_total_j, measurement->n_iters,
                              measurement->t_window_s, f);
  }
  return r;
}

}  // namespace gpz

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "gpz/cost_model.hpp"
#include "gpz/dataset.hpp"
#include "gpz/dynamics.hpp"
#include "gpz/entropy_bounds.hpp"
#include "gpz/gpz_locator.hpp"
#include "gpz/inversion_probe.hpp"
#include "gpz/micronet.hpp"

namespace gpz {

/// The standard synthetic run: data, training, dump, analysis.
struct PipelineConfig {
  std::size_t num_classes = 4;
  std::size_t per_class = 200;
  std::size_t dim = 16;
  double spread = 0.05;
  std::vector<std::size_t> hidden{32, 32, 16, 8};
  std::size_t epochs = 200;
  double lr = 0.05;
  std::size_t batch = 32;
  TargetScheme scheme;
  std::uint64_t seed = 0;
  double tau = kDefaultTau;
  double delta = kDefaultDelta;
  double gamma = 0.01;
  DecoderConfig decoder;
  std::vector<Precision> precisions{Precision::fp32, Precision::fp16, Precision::int8};
};

struct PipelineResult {
  Dataset data;
  MlpModel model;  // split_index set just after the located peak
  std::vector<double> loss_curve;
  double train_accuracy = 0.0;
  ActivationSet acts;
  std::vector<LayerRadiusProfile> profiles;
  GpzReport gpz;
  EntropyReport bounds;
  DynamicsReport dynamics;
  InversionReport inversion;
  CostReport cost;
};

Dataset pipeline_data(const PipelineConfig& config);

/// Initializes and trains the classifier of the standard run.
TrainResult pipeline_train(const PipelineConfig& config, const Dataset& data);

/// Fresh evaluation data drawn with `eval_seed`, dumped through `model` and
/// located. Used by the stability protocol.
GpzReport locate_on_eval(const MlpModel& model, const PipelineConfig& config,
                         std::uint64_t eval_seed);

PipelineResult run_pipeline(const PipelineConfig& config);

/// Writes data.gpzd, model.gpzm, acts.gpza and the six JSON reports to `dir`.
void write_pipeline_outputs(const PipelineResult& result, const std::filesystem::path& dir);

}  // namespace gpz

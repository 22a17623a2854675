#include "gpz/pipeline.hpp"

#include "gpz/error.hpp"
#include "gpz/reports.hpp"
#include "gpz/rng.hpp"
#include "gpz/tensor_io.hpp"

namespace gpz {

namespace {

TargetScheme resolve_prior(TargetScheme s, const Dataset& data) {
  if (s.kind == TargetScheme::Kind::prior_smoothing && s.prior.empty()) {
    s.prior.assign(data.num_classes, 0.0);
    for (auto y : data.labels) s.prior[y] += 1.0;
    for (auto& p : s.prior) p /= static_cast<double>(data.size());
  }
  return s;
}

}  // namespace

Dataset pipeline_data(const PipelineConfig& config) {
  return gaussian_mixture(config.num_classes, config.per_class, config.dim, config.spread,
                          Rng::derive(config.seed, "data"));
}

TrainResult pipeline_train(const PipelineConfig& config, const Dataset& data) {
  std::vector<std::size_t> widths{data.dim};
  widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
  auto model = init_model(widths, data.num_classes, Rng::derive(config.seed, "init"));
  TrainConfig tc;
  tc.epochs = config.epochs;
  tc.lr = config.lr;
  tc.batch = config.batch;
  tc.seed = Rng::derive(config.seed, "fit");
  tc.scheme = resolve_prior(config.scheme, data);
  return train(std::move(model), data, tc);
}

GpzReport locate_on_eval(const MlpModel& model, const PipelineConfig& config,
                         std::uint64_t eval_seed) {
  const auto eval = gaussian_mixture(config.num_classes, config.per_class, config.dim,
                                     config.spread, Rng::derive(eval_seed, "eval"));
  const auto layers = all_layers(model);
  return locate(layer_profiles(extract(model, eval, layers)), config.tau);
}

PipelineResult run_pipeline(const PipelineConfig& config) {
  PipelineResult r;
  r.data = pipeline_data(config);
  auto trained = pipeline_train(config, r.data);
  r.model = std::move(trained.model);
  r.loss_curve = std::move(trained.loss_curve);
  r.train_accuracy = trained.train_accuracy;

  const auto layers = all_layers(r.model);
  r.acts = extract(r.model, r.data, layers);
  r.profiles = layer_profiles(r.acts);
  r.gpz = locate(r.profiles, config.tau);
  r.model.split_index = r.gpz.transition_peak + 1;
  r.bounds = entropy_report(r.acts, config.delta, estimate_hx(r.data.inputs, r.data.dim, config.delta));
  r.dynamics = analyze_dynamics(r.model, r.data, r.gpz.transition_peak,
                                resolve_prior(config.scheme, r.data), config.gamma);
  auto dec = config.decoder;
  dec.seed = Rng::derive(config.seed, "decoder");
  r.inversion = sweep_layers(r.acts, r.data, dec);
  r.cost = cost_report(r.model, r.model.split_index, config.precisions, std::nullopt);
  return r;
}

void write_pipeline_outputs(const PipelineResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_dataset(dir / "data.gpzd", r.data);
  write_model(dir / "model.gpzm", r.model);
  write_activations(dir / "acts.gpza", r.acts);
  write_text_atomic(dir / "stats.json", dump_json(stats_json(r.acts)));
  write_text_atomic(dir / "gpz.json", dump_json(gpz_json(r.gpz)));
  write_text_atomic(dir / "bounds.json", dump_json(bounds_json(r.bounds)));
  write_text_atomic(dir / "dynamics.json", dump_json(dynamics_json(r.dynamics)));
  write_text_atomic(dir / "inversion.json", dump_json(inversion_json(r.inversion)));
  write_text_atomic(dir / "cost.json", dump_json(cost_json(r.cost)));
}

}  // namespace gpz

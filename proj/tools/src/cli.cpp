#include "gpz/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>

#include "gpz/cost_model.hpp"
#include "gpz/dataset.hpp"
#include "gpz/dynamics.hpp"
#include "gpz/entropy_bounds.hpp"
#include "gpz/error.hpp"
#include "gpz/gpz_locator.hpp"
#include "gpz/inversion_probe.hpp"
#include "gpz/micronet.hpp"
#include "gpz/pipeline.hpp"
#include "gpz/reports.hpp"
#include "gpz/repr_stats.hpp"
#include "gpz/rng.hpp"
#include "gpz/tensor_io.hpp"

namespace gpz::cli {

namespace {

namespace fs = std::filesystem;

// A flag value that breaks an operation's precondition.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& flag, const std::string& what) {
  if (!ok) throw UsageError(flag + ": " + what);
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

std::size_t parse_count(const std::string& text, const std::string& flag) {
  std::size_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [p, ec] = std::from_chars(text.data(), end, v);
  require(ec == std::errc() && p == end && !text.empty(), flag, "'" + text + "' is not a count");
  return v;
}

std::vector<std::size_t> parse_arch(const std::string& text, const std::string& flag) {
  std::vector<std::size_t> widths;
  for (const auto& part : split_commas(text)) {
    const auto w = parse_count(part, flag);
    require(w > 0, flag, "widths must be positive");
    widths.push_back(w);
  }
  require(!widths.empty(), flag, "expected a comma list of widths such as 32,32,16,8");
  return widths;
}

TargetScheme parse_scheme(const std::string& text, const std::string& flag) {
  try {
    return TargetScheme::parse(text);
  } catch (const InvalidArgument& e) {
    throw UsageError(flag + ": " + e.what());
  }
}

TargetScheme resolve_prior(TargetScheme s, const Dataset& data) {
  if (s.kind == TargetScheme::Kind::prior_smoothing && s.prior.empty()) {
    s.prior.assign(data.num_classes, 0.0);
    for (auto y : data.labels) s.prior[y] += 1.0;
    for (auto& p : s.prior) p /= static_cast<double>(data.size());
  }
  return s;
}

// "all", or a comma list of indices or fc<j> names.
std::vector<std::size_t> parse_layers(const std::string& text, std::size_t num_layers,
                                      const std::string& flag) {
  if (text == "all") {
    std::vector<std::size_t> all(num_layers);
    for (std::size_t i = 0; i < num_layers; ++i) all[i] = i;
    return all;
  }
  std::vector<std::size_t> out;
  for (auto part : split_commas(text)) {
    if (part.rfind("fc", 0) == 0) part = part.substr(2);
    const auto l = parse_count(part, flag);
    require(l < num_layers, flag, "layer " + std::to_string(l) + " out of range (model has " +
                                      std::to_string(num_layers) + " layers)");
    out.push_back(l);
  }
  require(!out.empty(), flag, "empty layer list");
  require(std::is_sorted(out.begin(), out.end()) &&
              std::adjacent_find(out.begin(), out.end()) == out.end(),
          flag, "layers must be strictly increasing");
  return out;
}

void require_file(const std::string& path, const std::string& flag) {
  if (!fs::exists(path)) throw Error(flag + ": file '" + path + "' not found");
}

void write_json(const std::string& path, const nlohmann::json& j) {
  write_text_atomic(path, dump_json(j));
}

struct GenDataOpts {
  std::size_t classes = 4, per_class = 200, dim = 16;
  double spread = 0.05;
  std::uint64_t seed = 0;
  std::string out;
};

struct TrainOpts {
  std::string data, arch = "32,32,16,8", scheme = "onehot", out, curve;
  std::size_t epochs = 200, batch = 32;
  double lr = 0.05;
  std::uint64_t seed = 0;
  std::optional<std::size_t> split;
};

struct DumpOpts {
  std::string model, data, layers = "all", out;
};

struct StatsOpts {
  std::string acts, out;
};

struct LocateOpts {
  std::string acts, out;
  double tau = kDefaultTau;
};

struct BoundsOpts {
  std::string acts, data, out;
  double delta = kDefaultDelta;
  std::optional<double> hx;
};

struct DynamicsOpts {
  std::string model, data, scheme = "onehot", out;
  std::size_t layer = 0;
  double gamma = 0.01;
};

struct InvertOpts {
  std::string model, data, layers = "all", hidden = "64", out;
  std::size_t epochs = 400, batch = 16;
  double lr = 0.2, aux_fraction = 0.5;
  std::uint64_t seed = 0;
};

struct CostOpts {
  std::string model, precisions = "fp32,fp16,int8", measurement, out;
  std::optional<std::size_t> split;
};

struct PipelineOpts {
  std::uint64_t seed = 0;
  std::string out_dir, scheme = "onehot";
  std::size_t epochs = 200, per_class = 200;
  double tau = kDefaultTau, delta = kDefaultDelta, gamma = 0.01;
};

int gen_data(const GenDataOpts& o) {
  require(o.classes >= 1, "--classes", "must be >= 1");
  require(o.per_class >= 1, "--per-class", "must be >= 1");
  require(o.dim >= 1, "--dim", "must be >= 1");
  require(std::isfinite(o.spread) && o.spread >= 0.0, "--spread", "must be >= 0");
  write_dataset(o.out, gaussian_mixture(o.classes, o.per_class, o.dim, o.spread, o.seed));
  return kOk;
}

int train_cmd(const TrainOpts& o, std::ostream& out) {
  const auto hidden = parse_arch(o.arch, "--arch");
  const auto scheme = parse_scheme(o.scheme, "--scheme");
  require(std::isfinite(o.lr) && o.lr >= 0.0, "--lr", "must be >= 0");
  require(o.batch >= 1, "--batch", "must be >= 1");
  if (o.split) require(*o.split <= hidden.size() + 1, "--split", "beyond the last layer");
  require_file(o.data, "--data");
  const auto data = read_dataset(o.data);
  std::vector<std::size_t> widths{data.dim};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  auto model = init_model(widths, data.num_classes, Rng::derive(o.seed, "init"));
  model.split_index = o.split.value_or(1);
  TrainConfig tc;
  tc.epochs = o.epochs;
  tc.lr = o.lr;
  tc.batch = o.batch;
  tc.seed = Rng::derive(o.seed, "fit");
  tc.scheme = resolve_prior(scheme, data);
  const auto r = train(std::move(model), data, tc);
  write_model(o.out, r.model);
  if (!o.curve.empty()) {
    nlohmann::json curve = nlohmann::json::array();
    for (double v : r.loss_curve) curve.push_back(json_number(v));
    write_json(o.curve, {{"loss_curve", curve}, {"train_accuracy", json_number(r.train_accuracy)}});
  }
  out << "train accuracy " << r.train_accuracy << "\n";
  return kOk;
}

int dump_cmd(const DumpOpts& o) {
  require_file(o.model, "--model");
  require_file(o.data, "--data");
  const auto model = read_model(o.model);
  const auto data = read_dataset(o.data);
  require(data.dim == model.input_dim(), "--data", "input dimension does not match the model");
  const auto layers = parse_layers(o.layers, model.num_layers(), "--layers");
  write_activations(o.out, extract(model, data, layers));
  return kOk;
}

int stats_cmd(const StatsOpts& o) {
  require_file(o.acts, "--acts");
  write_json(o.out, stats_json(read_activations(o.acts)));
  return kOk;
}

int locate_cmd(const LocateOpts& o, std::ostream& out) {
  require(o.tau > 0.0 && o.tau <= 1.0, "--tau", "must be in (0, 1]");
  require_file(o.acts, "--acts");
  const auto acts = read_activations(o.acts);
  require(acts.layers.size() >= 3, "--acts", "locating a zone needs at least three layers");
  const auto rep = locate(layer_profiles(acts), o.tau);
  write_json(o.out, gpz_json(rep));
  out << "l_TP " << rep.layers[rep.transition_peak] << (rep.localized ? " (localized)\n" : "\n");
  return kOk;
}

int bounds_cmd(const BoundsOpts& o) {
  require(std::isfinite(o.delta) && o.delta > 0.0, "--delta", "must be > 0");
  require_file(o.acts, "--acts");
  require(!(o.hx && !o.data.empty()), "--hx", "give either --hx or --data");
  require(!o.hx || std::isfinite(*o.hx), "--hx", "must be finite");
  std::optional<double> hx = o.hx;
  if (!o.data.empty()) {
    require_file(o.data, "--data");
    const auto data = read_dataset(o.data);
    hx = estimate_hx(data.inputs, data.dim, o.delta);
  }
  write_json(o.out, bounds_json(entropy_report(read_activations(o.acts), o.delta, hx)));
  return kOk;
}

int dynamics_cmd(const DynamicsOpts& o) {
  const auto scheme = parse_scheme(o.scheme, "--scheme");
  require(std::isfinite(o.gamma) && o.gamma >= 0.0, "--gamma", "must be >= 0");
  require_file(o.model, "--model");
  require_file(o.data, "--data");
  const auto model = read_model(o.model);
  const auto data = read_dataset(o.data);
  require(o.layer < model.num_layers(), "--layer", "out of range");
  require(data.dim == model.input_dim(), "--data", "input dimension does not match the model");
  write_json(o.out, dynamics_json(analyze_dynamics(model, data, o.layer, scheme, o.gamma)));
  return kOk;
}

int invert_cmd(const InvertOpts& o) {
  DecoderConfig dc;
  dc.hidden = parse_arch(o.hidden, "--hidden");
  require(std::isfinite(o.lr) && o.lr >= 0.0, "--lr", "must be >= 0");
  require(o.batch >= 1, "--batch", "must be >= 1");
  require(o.aux_fraction > 0.0 && o.aux_fraction < 1.0, "--aux-fraction", "must be in (0, 1)");
  dc.epochs = o.epochs;
  dc.lr = o.lr;
  dc.batch = o.batch;
  dc.seed = o.seed;
  dc.aux_fraction = o.aux_fraction;
  require_file(o.model, "--model");
  require_file(o.data, "--data");
  const auto model = read_model(o.model);
  const auto data = read_dataset(o.data);
  require(data.dim == model.input_dim(), "--data", "input dimension does not match the model");
  const auto layers = parse_layers(o.layers, model.num_layers(), "--layers");
  write_json(o.out, inversion_json(sweep_layers(model, data, layers, dc)));
  return kOk;
}

int cost_cmd(const CostOpts& o) {
  std::vector<Precision> precisions;
  for (const auto& p : split_commas(o.precisions)) {
    try {
      precisions.push_back(parse_precision(p));
    } catch (const InvalidArgument& e) {
      throw UsageError(std::string("--precisions: ") + e.what());
    }
  }
  require_file(o.model, "--model");
  const auto model = read_model(o.model);
  const auto split = o.split.value_or(model.split_index);
  require(split <= model.num_layers(), "--split", "beyond the last layer");
  std::optional<Measurement> m;
  if (!o.measurement.empty()) {
    require_file(o.measurement, "--measurement");
    const auto bytes = read_file(o.measurement);
    m = parse_measurement(std::string(bytes.begin(), bytes.end()));
  }
  write_json(o.out, cost_json(cost_report(model, split, precisions, m)));
  return kOk;
}

int pipeline_cmd(const PipelineOpts& o, std::ostream& out) {
  PipelineConfig c;
  c.seed = o.seed;
  c.scheme = parse_scheme(o.scheme, "--scheme");
  require(o.per_class >= 4, "--per-class", "must be >= 4");
  require(o.tau > 0.0 && o.tau <= 1.0, "--tau", "must be in (0, 1]");
  require(std::isfinite(o.delta) && o.delta > 0.0, "--delta", "must be > 0");
  require(std::isfinite(o.gamma) && o.gamma >= 0.0, "--gamma", "must be >= 0");
  c.epochs = o.epochs;
  c.per_class = o.per_class;
  c.tau = o.tau;
  c.delta = o.delta;
  c.gamma = o.gamma;
  const auto r = run_pipeline(c);
  write_pipeline_outputs(r, o.out_dir);
  out << "train accuracy " << r.train_accuracy << ", l_TP " << r.gpz.layers[r.gpz.transition_peak]
      << (r.gpz.localized ? " (localized)" : "") << "\n";
  return kOk;
}

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Split-planning toolkit for collaborative inference", "gpz"};
  app.require_subcommand(1);
  app.fallthrough(false);

  GenDataOpts gd;
  auto* c_gen = app.add_subcommand("gen-data", "Generate a labeled Gaussian-mixture dataset");
  c_gen->add_option("--classes", gd.classes, "Number of classes K")->capture_default_str();
  c_gen->add_option("--per-class", gd.per_class, "Samples per class")->capture_default_str();
  c_gen->add_option("--dim", gd.dim, "Input dimension")->capture_default_str();
  c_gen->add_option("--spread", gd.spread, "Per-coordinate standard deviation")->capture_default_str();
  c_gen->add_option("--seed", gd.seed, "Random seed")->capture_default_str();
  c_gen->add_option("--out", gd.out, "Output dataset (.gpzd)")->required();

  TrainOpts tr;
  auto* c_train = app.add_subcommand("train", "Train an MLP classifier");
  c_train->add_option("--data", tr.data, "Training dataset (.gpzd)")->required();
  c_train->add_option("--arch", tr.arch, "Hidden widths, comma separated")->capture_default_str();
  c_train->add_option("--epochs", tr.epochs, "Training epochs")->capture_default_str();
  c_train->add_option("--lr", tr.lr, "SGD learning rate")->capture_default_str();
  c_train->add_option("--batch", tr.batch, "Minibatch size")->capture_default_str();
  c_train->add_option("--scheme", tr.scheme, "onehot | ls:<alpha> | prior:<alpha>")->capture_default_str();
  c_train->add_option("--seed", tr.seed, "Random seed")->capture_default_str();
  c_train->add_option("--split", tr.split, "Split index stored with the model (default 1)");
  c_train->add_option("--curve", tr.curve, "Optional loss-curve JSON");
  c_train->add_option("--out", tr.out, "Output model (.gpzm)")->required();

  DumpOpts du;
  auto* c_dump = app.add_subcommand("dump", "Extract layer activations");
  c_dump->add_option("--model", du.model, "Model (.gpzm)")->required();
  c_dump->add_option("--data", du.data, "Dataset (.gpzd)")->required();
  c_dump->add_option("--layers", du.layers, "all | comma list of indices or fc<j>")->capture_default_str();
  c_dump->add_option("--out", du.out, "Output activation dump (.gpza)")->required();

  StatsOpts st;
  auto* c_stats = app.add_subcommand("stats", "Per-layer class statistics");
  c_stats->add_option("--acts", st.acts, "Activation dump (.gpza)")->required();
  c_stats->add_option("--out", st.out, "Output JSON")->required();

  LocateOpts lo;
  auto* c_locate = app.add_subcommand("locate", "Locate the transition zone");
  c_locate->add_option("--acts", lo.acts, "Activation dump (.gpza)")->required();
  c_locate->add_option("--tau", lo.tau, "Localization threshold")->capture_default_str();
  c_locate->add_option("--out", lo.out, "Output JSON")->required();

  BoundsOpts bo;
  auto* c_bounds = app.add_subcommand("bounds", "Entropy surrogates and H(X|Z) lower bounds");
  c_bounds->add_option("--acts", bo.acts, "Activation dump (.gpza)")->required();
  c_bounds->add_option("--data", bo.data, "Dataset for the H(X) estimate (optional)");
  c_bounds->add_option("--hx", bo.hx, "Known H(X) in nats, used instead of an estimate");
  c_bounds->add_option("--delta", bo.delta, "Quantization step (2^-10)")->capture_default_str();
  c_bounds->add_option("--out", bo.out, "Output JSON")->required();

  DynamicsOpts dy;
  auto* c_dyn = app.add_subcommand("dynamics", "First-order class-radius dynamics");
  c_dyn->add_option("--model", dy.model, "Model (.gpzm)")->required();
  c_dyn->add_option("--data", dy.data, "Dataset (.gpzd)")->required();
  c_dyn->add_option("--layer", dy.layer, "Layer index")->capture_default_str();
  c_dyn->add_option("--scheme", dy.scheme, "onehot | ls:<alpha> | prior:<alpha>")->capture_default_str();
  c_dyn->add_option("--gamma", dy.gamma, "Virtual step size")->capture_default_str();
  c_dyn->add_option("--out", dy.out, "Output JSON")->required();

  InvertOpts iv;
  auto* c_inv = app.add_subcommand("invert", "Model-inversion probe per layer");
  c_inv->add_option("--model", iv.model, "Model (.gpzm)")->required();
  c_inv->add_option("--data", iv.data, "Dataset (.gpzd)")->required();
  c_inv->add_option("--layers", iv.layers, "all | comma list of indices or fc<j>")->capture_default_str();
  c_inv->add_option("--hidden", iv.hidden, "Decoder hidden widths")->capture_default_str();
  c_inv->add_option("--epochs", iv.epochs, "Decoder epochs")->capture_default_str();
  c_inv->add_option("--lr", iv.lr, "Decoder learning rate")->capture_default_str();
  c_inv->add_option("--batch", iv.batch, "Decoder minibatch size")->capture_default_str();
  c_inv->add_option("--aux-fraction", iv.aux_fraction, "Share of samples used to train the decoder")
      ->capture_default_str();
  c_inv->add_option("--seed", iv.seed, "Random seed")->capture_default_str();
  c_inv->add_option("--out", iv.out, "Output JSON")->required();

  CostOpts co;
  auto* c_cost = app.add_subcommand("cost", "Edge FLOPs, payload, parameters and energy metrics");
  c_cost->add_option("--model", co.model, "Model (.gpzm)")->required();
  c_cost->add_option("--split", co.split, "Split index (default: the model's)");
  c_cost->add_option("--precisions", co.precisions, "Comma list of fp32, fp16, int8")->capture_default_str();
  c_cost->add_option("--measurement", co.measurement, "Measurement JSON {e_total_j, n_iters, t_window_s}");
  c_cost->add_option("--out", co.out, "Output JSON")->required();

  PipelineOpts pl;
  auto* c_pipe = app.add_subcommand("pipeline", "Run every stage on the standard synthetic setup");
  c_pipe->add_option("--seed", pl.seed, "Root seed")->capture_default_str();
  c_pipe->add_option("--out-dir", pl.out_dir, "Output directory")->required();
  c_pipe->add_option("--scheme", pl.scheme, "onehot | ls:<alpha> | prior:<alpha>")->capture_default_str();
  c_pipe->add_option("--epochs", pl.epochs, "Training epochs")->capture_default_str();
  c_pipe->add_option("--per-class", pl.per_class, "Samples per class")->capture_default_str();
  c_pipe->add_option("--tau", pl.tau, "Localization threshold")->capture_default_str();
  c_pipe->add_option("--delta", pl.delta, "Quantization step (2^-10)")->capture_default_str();
  c_pipe->add_option("--gamma", pl.gamma, "Virtual step size")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    if (args.empty()) {
      err << app.help();
      return kUsageError;
    }
    app.exit(e, err, err);
    return kUsageError;
  }

  const std::vector<std::pair<CLI::App*, std::function<int()>>> handlers{
      {c_gen, [&] { return gen_data(gd); }},
      {c_train, [&] { return train_cmd(tr, out); }},
      {c_dump, [&] { return dump_cmd(du); }},
      {c_stats, [&] { return stats_cmd(st); }},
      {c_locate, [&] { return locate_cmd(lo, out); }},
      {c_bounds, [&] { return bounds_cmd(bo); }},
      {c_dyn, [&] { return dynamics_cmd(dy); }},
      {c_inv, [&] { return invert_cmd(iv); }},
      {c_cost, [&] { return cost_cmd(co); }},
      {c_pipe, [&] { return pipeline_cmd(pl, out); }},
  };
  try {
    for (const auto& [cmd, fn] : handlers) {
      if (cmd->parsed()) return fn();
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  err << app.help();
  return kUsageError;
}

}  // namespace gpz::cli

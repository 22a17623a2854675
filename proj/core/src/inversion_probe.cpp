#include "gpz/inversion_probe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gpz/error.hpp"
#include "gpz/rng.hpp"

namespace gpz {

namespace {

std::vector<float> gather(std::span<const float> rows, std::size_t d,
                          std::span<const std::size_t> idx) {
  std::vector<float> out;
  out.reserve(idx.size() * d);
  for (auto i : idx) out.insert(out.end(), rows.begin() + i * d, rows.begin() + (i + 1) * d);
  return out;
}

Matrix to_targets(const Standardizer& norm, std::span<const float> inputs, std::size_t d0) {
  Matrix t(inputs.size() / d0, d0);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    t.data[i] = (inputs[i] - norm.mean[i % d0]) * norm.scale[i % d0];
  }
  return t;
}

void check_config(const DecoderConfig& c) {
  if (!(c.lr >= 0.0) || !std::isfinite(c.lr)) throw InvalidArgument("decoder: lr must be >= 0");
  if (c.batch == 0) throw InvalidArgument("decoder: batch must be > 0");
  for (auto h : c.hidden) {
    if (h == 0) throw InvalidArgument("decoder: hidden widths must be > 0");
  }
}

InversionEntry probe(std::size_t layer, const std::string& name, std::span<const float> rows,
                     std::size_t d, const Dataset& data, const Split& split,
                     const DecoderConfig& config) {
  const auto za = gather(rows, d, split.aux);
  const auto zt = gather(rows, d, split.test);
  const auto xa = gather(data.inputs, data.dim, split.aux);
  const auto xt = gather(data.inputs, data.dim, split.test);
  const auto dec = train_decoder(za, d, xa, data.dim, config);

  InversionEntry e;
  e.layer = layer;
  e.layer_name = name;
  e.d = d;
  e.decoder_arch.push_back(d);
  e.decoder_arch.insert(e.decoder_arch.end(), config.hidden.begin(), config.hidden.end());
  e.decoder_arch.push_back(data.dim);
  e.train_mse = evaluate(dec, za, d, xa, data.dim).mse;
  const auto r = evaluate(dec, zt, d, xt, data.dim);
  e.test_mse = r.mse;
  e.test_psnr = r.psnr;
  return e;
}

}  // namespace

Split make_split(std::size_t size, double aux_fraction) {
  if (!(aux_fraction > 0.0 && aux_fraction < 1.0)) {
    throw InvalidArgument("make_split: aux_fraction must be in (0, 1)");
  }
  const auto n_aux = static_cast<std::size_t>(std::floor(static_cast<double>(size) * aux_fraction));
  if (n_aux == 0 || n_aux == size) throw InvalidArgument("make_split: empty aux or test part");
  Split s;
  for (std::size_t i = 0; i < size; ++i) (i < n_aux ? s.aux : s.test).push_back(i);
  return s;
}

void check_split(const Split& split, std::size_t size) {
  if (split.aux.empty() || split.test.empty()) throw InvalidArgument("split: empty part");
  std::vector<int> seen(size, 0);
  for (const auto* part : {&split.aux, &split.test}) {
    for (auto i : *part) {
      if (i >= size) throw InvalidArgument("split: index out of range");
      if (seen[i]++) throw InvalidArgument("split: aux and test overlap");
    }
  }
  if (split.aux.size() + split.test.size() != size) {
    throw InvalidArgument("split: parts do not cover the dataset");
  }
}

Standardizer Standardizer::fit(std::span<const float> rows, std::size_t d) {
  if (d == 0 || rows.empty() || rows.size() % d != 0) throw InvalidArgument("standardize: bad shape");
  const std::size_t n = rows.size() / d;
  Standardizer s;
  s.mean.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += rows[i * d + j];
  }
  for (auto& m : s.mean) m /= static_cast<double>(n);
  // One scale per layer: per-feature scaling blows up units that are nearly
  // constant on the auxiliary split.
  double var = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double e = rows[i] - s.mean[i % d];
    var += e * e;
  }
  const double sd = std::sqrt(var / static_cast<double>(rows.size()));
  s.scale.assign(d, sd > 1e-12 ? 1.0 / sd : 1.0);
  return s;
}

std::vector<float> Standardizer::apply(std::span<const float> rows) const {
  const std::size_t d = mean.size();
  std::vector<float> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t j = i % d;
    out[i] = static_cast<float>((rows[i] - mean[j]) * scale[j]);
  }
  return out;
}

Decoder train_decoder(std::span<const float> acts, std::size_t d, std::span<const float> inputs,
                      std::size_t d0, const DecoderConfig& config) {
  check_config(config);
  if (d == 0 || d0 == 0 || acts.empty() || acts.size() % d != 0 || inputs.size() % d0 != 0 ||
      acts.size() / d != inputs.size() / d0) {
    throw InvalidArgument("train_decoder: activation and input batches do not match");
  }
  Decoder dec;
  dec.norm = Standardizer::fit(acts, d);
  std::vector<std::size_t> widths{d};
  widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
  dec.net = init_model(widths, d0, Rng::derive(config.seed, "decoder-init"));
  dec.net.split_index = dec.net.num_layers();
  const auto z = dec.norm.apply(acts);
  dec.target_norm = Standardizer::fit(inputs, d0);
  const auto targets = to_targets(dec.target_norm, inputs, d0);
  try {
    dec.loss_curve = fit(dec.net, z, targets, LossKind::squared_error, config.epochs, config.lr,
                         config.batch, Rng::derive(config.seed, "decoder-fit"));
  } catch (const NumericError& e) {
    throw NumericError(std::string("decoder training diverged: ") + e.what());
  }
  return dec;
}

double psnr_from_mse(double mse) {
  if (!(mse >= 0.0)) throw InvalidArgument("psnr: mse must be >= 0");
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

Reconstruction evaluate(const Decoder& decoder, std::span<const float> acts, std::size_t d,
                        std::span<const float> inputs, std::size_t d0) {
  if (acts.empty()) throw InvalidArgument("evaluate: empty batch");
  if (d != decoder.net.input_dim() || d0 != decoder.net.output_dim() || acts.size() % d != 0 ||
      acts.size() / d != inputs.size() / d0 || inputs.size() % d0 != 0) {
    throw InvalidArgument("evaluate: shape mismatch");
  }
  const auto z = decoder.norm.apply(acts);
  const std::size_t n = acts.size() / d;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto t = forward(decoder.net, std::span<const float>(z.data() + i * d, d));
    const auto& out = t.logits();
    for (std::size_t j = 0; j < d0; ++j) {
      const double e = decoder.target_norm.invert(out[j], j) - static_cast<double>(inputs[i * d0 + j]);
      sum += e * e;
    }
  }
  Reconstruction r;
  r.mse = sum / static_cast<double>(n * d0);
  r.psnr = psnr_from_mse(r.mse);
  return r;
}

InversionReport sweep_layers(const ActivationSet& acts, const Dataset& data,
                             const DecoderConfig& config) {
  check_config(config);
  data.validate();
  if (acts.layers.empty()) throw InvalidArgument("sweep_layers: no layers");
  const auto split = make_split(data.size(), config.aux_fraction);
  check_split(split, data.size());
  InversionReport rep;
  rep.config = config;
  rep.aux_size = split.aux.size();
  rep.test_size = split.test.size();
  for (std::size_t l = 0; l < acts.layers.size(); ++l) {
    const auto& b = acts.layers[l];
    if (b.size() != data.size()) throw InvalidArgument("sweep_layers: activation batch size != dataset size");
    rep.layers.push_back(probe(l, b.layer_name, b.data, b.d, data, split, config));
  }
  return rep;
}

InversionReport sweep_layers(const MlpModel& model, const Dataset& data,
                             std::span<const std::size_t> layers, const DecoderConfig& config) {
  model.validate();
  if (layers.empty()) throw InvalidArgument("sweep_layers: empty layer list");
  for (auto l : layers) {
    if (l >= model.num_layers()) throw InvalidArgument("sweep_layers: layer out of range");
  }
  const auto acts = extract(model, data, layers);
  auto rep = sweep_layers(acts, data, config);
  for (std::size_t i = 0; i < layers.size(); ++i) rep.layers[i].layer = layers[i];
  return rep;
}

}  // namespace gpz

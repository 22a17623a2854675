#include "gpz/micronet.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "gpz/error.hpp"
#include "gpz/rng.hpp"

namespace gpz {

namespace {

struct FullTrace {
  std::vector<std::vector<double>> pre;
  std::vector<std::vector<double>> post;
};

double activate(Activation a, double v) {
  return (a == Activation::relu && v <= 0.0) ? 0.0 : v;
}

double activation_slope(Activation a, double pre) {
  if (a == Activation::identity) return 1.0;
  return pre > 0.0 ? 1.0 : 0.0;
}

void dense_forward(const DenseLayer& layer, std::span<const double> in,
                   std::vector<double>& pre, std::vector<double>& post) {
  pre.resize(layer.out);
  post.resize(layer.out);
  for (std::size_t r = 0; r < layer.out; ++r) {
    double acc = layer.bias[r];
    const float* w = layer.weights.data() + r * layer.in;
    for (std::size_t c = 0; c < layer.in; ++c) acc += static_cast<double>(w[c]) * in[c];
    pre[r] = acc;
    post[r] = activate(layer.activation, acc);
  }
}

FullTrace full_forward(const MlpModel& model, std::span<const double> x) {
  if (x.size() != model.input_dim()) {
    throw InvalidArgument("forward: input has dimension " + std::to_string(x.size()) +
                          ", model expects " + std::to_string(model.input_dim()));
  }
  FullTrace t;
  t.pre.resize(model.num_layers());
  t.post.resize(model.num_layers());
  std::span<const double> in = x;
  for (std::size_t j = 0; j < model.num_layers(); ++j) {
    dense_forward(model.layers[j], in, t.pre[j], t.post[j]);
    in = t.post[j];
  }
  return t;
}

std::vector<double> to_double(std::span<const float> x) {
  return {x.begin(), x.end()};
}

double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double e : v) s += std::exp(e - m);
  return m + std::log(s);
}

// dL/do for one sample plus its loss value.
double output_gradient(std::span<const double> logits, std::span<const double> target,
                       LossKind loss, std::vector<double>& grad) {
  grad.resize(logits.size());
  if (target.size() != logits.size()) {
    throw InvalidArgument("loss: target width does not match model output");
  }
  if (loss == LossKind::squared_error) {
    double l = 0.0;
    const double scale = 1.0 / static_cast<double>(logits.size());
    for (std::size_t k = 0; k < logits.size(); ++k) {
      const double e = logits[k] - target[k];
      l += e * e;
      grad[k] = 2.0 * e * scale;
    }
    return l * scale;
  }
  const double lse = log_sum_exp(logits);
  double l = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    const double logp = logits[k] - lse;
    l -= target[k] * logp;
    grad[k] = std::exp(logp) - target[k];
  }
  return l;
}

// Backpropagates dL/d(post_j) at `from_layer` down to the input, accumulating
// parameter gradients when `grads` is set. Stops early at `stop_layer`, in
// which case the returned vector is dL/d(post_stop).
std::vector<double> backprop(const MlpModel& model, const FullTrace& t,
                             std::span<const double> x, std::vector<double> upstream,
                             Gradients* grads, std::size_t stop_layer, double scale) {
  for (std::size_t jj = model.num_layers(); jj-- > 0;) {
    if (jj == stop_layer) return upstream;
    const DenseLayer& layer = model.layers[jj];
    std::vector<double> delta(layer.out);
    for (std::size_t r = 0; r < layer.out; ++r) {
      delta[r] = upstream[r] * activation_slope(layer.activation, t.pre[jj][r]);
    }
    std::span<const double> in = jj == 0 ? x : std::span<const double>(t.post[jj - 1]);
    if (grads != nullptr) {
      auto& gw = grads->weights[jj];
      auto& gb = grads->bias[jj];
      for (std::size_t r = 0; r < layer.out; ++r) {
        if (delta[r] == 0.0) continue;
        const double d = delta[r] * scale;
        gb[r] += d;
        double* row = gw.data() + r * layer.in;
        for (std::size_t c = 0; c < layer.in; ++c) row[c] += d * in[c];
      }
    }
    std::vector<double> next(layer.in, 0.0);
    for (std::size_t r = 0; r < layer.out; ++r) {
      if (delta[r] == 0.0) continue;
      const float* w = layer.weights.data() + r * layer.in;
      for (std::size_t c = 0; c < layer.in; ++c) next[c] += static_cast<double>(w[c]) * delta[r];
    }
    upstream = std::move(next);
  }
  return upstream;
}

Gradients zero_gradients(const MlpModel& model) {
  Gradients g;
  for (const auto& layer : model.layers) {
    g.weights.emplace_back(layer.weights.size(), 0.0);
    g.bias.emplace_back(layer.bias.size(), 0.0);
  }
  return g;
}

void check_layer(const MlpModel& model, std::size_t layer, const char* what) {
  if (layer >= model.num_layers()) {
    throw InvalidArgument(std::string(what) + ": layer " + std::to_string(layer) +
                          " out of range (model has " + std::to_string(model.num_layers()) +
                          " layers)");
  }
}

constexpr std::size_t kNoStop = static_cast<std::size_t>(-1);

}  // namespace

void MlpModel::validate() const {
  if (layers.empty()) throw InvalidArgument("model: no layers");
  for (std::size_t j = 0; j < layers.size(); ++j) {
    const auto& l = layers[j];
    if (l.in == 0 || l.out == 0) throw InvalidArgument("model: zero-width layer " + std::to_string(j));
    if (l.weights.size() != l.in * l.out || l.bias.size() != l.out) {
      throw InvalidArgument("model: parameter payload of layer " + std::to_string(j) +
                            " does not match its shape");
    }
    if (j > 0 && layers[j - 1].out != l.in) {
      throw InvalidArgument("model: layer " + std::to_string(j) + " input width " +
                            std::to_string(l.in) + " does not chain with previous output " +
                            std::to_string(layers[j - 1].out));
    }
    for (float w : l.weights) {
      if (!std::isfinite(w)) throw InvalidArgument("model: non-finite weight in layer " + std::to_string(j));
    }
    for (float b : l.bias) {
      if (!std::isfinite(b)) throw InvalidArgument("model: non-finite bias in layer " + std::to_string(j));
    }
  }
  if (layers.back().activation != Activation::identity) {
    throw InvalidArgument("model: last layer must have identity activation");
  }
  if (split_index > layers.size()) throw InvalidArgument("model: split_index beyond layer count");
}

TargetScheme TargetScheme::parse(std::string_view text) {
  if (text == "onehot") return onehot();
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw InvalidArgument("scheme: expected onehot | ls:<alpha> | prior:<alpha>, got '" +
                          std::string(text) + "'");
  }
  const auto head = text.substr(0, colon);
  const auto tail = text.substr(colon + 1);
  double alpha = 0.0;
  auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), alpha);
  if (ec != std::errc() || ptr != tail.data() + tail.size() || !std::isfinite(alpha)) {
    throw InvalidArgument("scheme: bad alpha '" + std::string(tail) + "'");
  }
  if (head == "ls") return label_smoothing(alpha);
  if (head == "prior") return prior_smoothing(alpha, {});
  throw InvalidArgument("scheme: unknown kind '" + std::string(head) + "'");
}

std::string TargetScheme::to_string() const {
  if (kind == Kind::onehot) return "onehot";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), alpha);
  (void)ec;
  std::string a(buf, ptr);
  return (kind == Kind::label_smoothing ? "ls:" : "prior:") + a;
}

std::vector<double> TargetScheme::off_class_weights(std::size_t label,
                                                    std::size_t num_classes) const {
  std::vector<double> r(num_classes, 0.0);
  if (label >= num_classes) throw InvalidArgument("scheme: label out of range");
  if (num_classes == 1) return r;
  switch (kind) {
    case Kind::onehot:
    case Kind::label_smoothing:
      for (std::size_t k = 0; k < num_classes; ++k) {
        if (k != label) r[k] = 1.0 / static_cast<double>(num_classes - 1);
      }
      break;
    case Kind::prior_smoothing: {
      if (prior.size() != num_classes) {
        throw InvalidArgument("scheme: prior has " + std::to_string(prior.size()) +
                              " entries, expected K=" + std::to_string(num_classes));
      }
      const double rest = 1.0 - prior[label];
      if (!(rest > 0.0)) throw InvalidArgument("scheme: prior of the true class must be < 1");
      for (std::size_t k = 0; k < num_classes; ++k) {
        if (k != label) r[k] = prior[k] / rest;
      }
      break;
    }
  }
  return r;
}

MlpModel init_model(std::span<const std::size_t> widths, std::size_t num_classes,
                    std::uint64_t seed) {
  if (widths.empty()) throw InvalidArgument("init_model: empty architecture");
  if (num_classes == 0) throw InvalidArgument("init_model: K must be >= 1");
  for (auto w : widths) {
    if (w == 0) throw InvalidArgument("init_model: layer widths must be >= 1");
  }
  Rng rng(Rng::derive(seed, "init"));
  MlpModel model;
  for (std::size_t j = 0; j < widths.size(); ++j) {
    DenseLayer layer;
    layer.in = widths[j];
    const bool last = j + 1 == widths.size();
    layer.out = last ? num_classes : widths[j + 1];
    layer.activation = last ? Activation::identity : Activation::relu;
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
    layer.weights.resize(layer.in * layer.out);
    for (auto& w : layer.weights) w = static_cast<float>(rng.uniform(-bound, bound));
    layer.bias.assign(layer.out, 0.0f);
    model.layers.push_back(std::move(layer));
  }
  return model;
}

std::vector<double> target_row(std::uint32_t label, const TargetScheme& scheme,
                               std::size_t num_classes) {
  if (label >= num_classes) {
    throw InvalidArgument("targets: label " + std::to_string(label) + " >= K");
  }
  std::vector<double> q(num_classes, 0.0);
  if (scheme.kind == TargetScheme::Kind::onehot) {
    q[label] = 1.0;
    return q;
  }
  if (num_classes < 2) throw InvalidArgument("targets: smoothing needs K >= 2");
  if (scheme.kind == TargetScheme::Kind::prior_smoothing) {
    double sum = 0.0;
    for (double p : scheme.prior) {
      if (!(p >= 0.0)) throw InvalidArgument("targets: prior entries must be >= 0");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw InvalidArgument("targets: prior must sum to 1");
  }
  const auto r = scheme.off_class_weights(label, num_classes);
  for (std::size_t k = 0; k < num_classes; ++k) q[k] = scheme.alpha * r[k];
  q[label] = 1.0 - scheme.alpha;
  return q;
}

Matrix make_targets(std::span<const std::uint32_t> labels, const TargetScheme& scheme,
                    std::size_t num_classes) {
  Matrix q(labels.size(), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto row = target_row(labels[i], scheme, num_classes);
    std::copy(row.begin(), row.end(), q.row(i).begin());
  }
  return q;
}

std::vector<double> softmax(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double s = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    p[k] = std::exp(logits[k] - m);
    s += p[k];
  }
  for (auto& v : p) v /= s;
  return p;
}

ForwardTrace forward(const MlpModel& model, std::span<const double> x) {
  auto full = full_forward(model, x);
  ForwardTrace t;
  t.activations = std::move(full.post);
  t.probs = softmax(t.activations.back());
  return t;
}

ForwardTrace forward(const MlpModel& model, std::span<const float> x) {
  const auto xd = to_double(x);
  return forward(model, std::span<const double>(xd));
}

std::vector<double> forward_from(const MlpModel& model, std::size_t layer,
                                 std::span<const double> z) {
  check_layer(model, layer, "forward_from");
  if (z.size() != model.layers[layer].out) {
    throw InvalidArgument("forward_from: representation width mismatch");
  }
  std::vector<double> cur(z.begin(), z.end());
  std::vector<double> pre, post;
  for (std::size_t j = layer + 1; j < model.num_layers(); ++j) {
    dense_forward(model.layers[j], cur, pre, post);
    cur.swap(post);
  }
  return cur;
}

LossResidual loss_and_residual(const ForwardTrace& trace, std::span<const double> target) {
  const auto& logits = trace.logits();
  if (target.size() != logits.size()) {
    throw InvalidArgument("loss_and_residual: target has " + std::to_string(target.size()) +
                          " entries, expected " + std::to_string(logits.size()));
  }
  for (std::size_t k = 0; k < target.size(); ++k) {
    if (target[k] != 0.0 && trace.probs[k] == 0.0) {
      throw NumericError("loss_and_residual: probability of class " + std::to_string(k) +
                         " underflowed to 0");
    }
  }
  LossResidual out;
  out.loss = output_gradient(logits, target, LossKind::cross_entropy, out.residual);
  if (!std::isfinite(out.loss)) throw NumericError("loss_and_residual: non-finite loss");
  for (std::size_t k = 0; k < target.size(); ++k) out.residual[k] = trace.probs[k] - target[k];
  return out;
}

Gradients parameter_gradients(const MlpModel& model, std::span<const double> x,
                              std::span<const double> target, LossKind loss) {
  auto t = full_forward(model, x);
  std::vector<double> upstream;
  output_gradient(t.post.back(), target, loss, upstream);
  auto g = zero_gradients(model);
  backprop(model, t, x, std::move(upstream), &g, kNoStop, 1.0);
  return g;
}

std::vector<double> activation_gradient(const MlpModel& model, std::span<const double> x,
                                        std::span<const double> target, std::size_t layer,
                                        LossKind loss) {
  check_layer(model, layer, "activation_gradient");
  auto t = full_forward(model, x);
  std::vector<double> upstream;
  output_gradient(t.post.back(), target, loss, upstream);
  return backprop(model, t, x, std::move(upstream), nullptr, layer, 1.0);
}

double mean_loss(const MlpModel& model, std::span<const float> inputs, const Matrix& targets,
                 LossKind loss) {
  const std::size_t d = model.input_dim();
  const std::size_t n = targets.rows;
  if (inputs.size() != n * d) throw InvalidArgument("mean_loss: inputs do not match targets");
  double total = 0.0;
  std::vector<double> x(d), grad;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < d; ++c) x[c] = inputs[i * d + c];
    auto t = full_forward(model, x);
    total += output_gradient(t.post.back(), targets.row(i), loss, grad);
  }
  return total / static_cast<double>(n);
}

std::vector<double> fit(MlpModel& model, std::span<const float> inputs, const Matrix& targets,
                        LossKind loss, std::size_t epochs, double lr, std::size_t batch,
                        std::uint64_t seed) {
  model.validate();
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw InvalidArgument("fit: lr must be finite and >= 0");
  if (batch == 0) throw InvalidArgument("fit: batch must be >= 1");
  const std::size_t d = model.input_dim();
  const std::size_t n = targets.rows;
  if (n == 0) throw InvalidArgument("fit: no samples");
  if (inputs.size() != n * d) throw InvalidArgument("fit: inputs do not match targets");
  if (targets.cols != model.output_dim()) throw InvalidArgument("fit: target width mismatch");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> curve;
  curve.reserve(epochs);
  std::vector<double> x(d), upstream;

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    Rng rng(Rng::derive(seed, epoch));
    rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t stop = std::min(n, start + batch);
      const double scale = 1.0 / static_cast<double>(stop - start);
      auto g = zero_gradients(model);
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t i = order[b];
        for (std::size_t c = 0; c < d; ++c) x[c] = inputs[i * d + c];
        auto t = full_forward(model, x);
        output_gradient(t.post.back(), targets.row(i), loss, upstream);
        backprop(model, t, x, upstream, &g, kNoStop, scale);
      }
      for (std::size_t j = 0; j < model.num_layers(); ++j) {
        auto& layer = model.layers[j];
        for (std::size_t k = 0; k < layer.weights.size(); ++k) {
          layer.weights[k] = static_cast<float>(layer.weights[k] - lr * g.weights[j][k]);
        }
        for (std::size_t k = 0; k < layer.bias.size(); ++k) {
          layer.bias[k] = static_cast<float>(layer.bias[k] - lr * g.bias[j][k]);
        }
      }
    }
    const double l = mean_loss(model, inputs, targets, loss);
    if (!std::isfinite(l)) {
      throw NumericError("training diverged at epoch " + std::to_string(epoch + 1) +
                         " (loss is not finite; try a smaller --lr)");
    }
    curve.push_back(l);
  }
  return curve;
}

double accuracy(const MlpModel& model, const Dataset& data) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto t = forward(model, data.row(i));
    const auto& o = t.logits();
    const auto best = static_cast<std::size_t>(std::max_element(o.begin(), o.end()) - o.begin());
    hits += best == data.labels[i];
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

TrainResult train(MlpModel model, const Dataset& data, const TrainConfig& config) {
  data.validate();
  if (!(config.lr >= 0.0)) throw InvalidArgument("train: lr must be >= 0");
  if (config.epochs == 0) throw InvalidArgument("train: epochs must be >= 1");
  if (model.input_dim() != data.dim) throw InvalidArgument("train: model input width != dataset dim");
  if (model.output_dim() != data.num_classes) throw InvalidArgument("train: model output width != K");

  TargetScheme scheme = config.scheme;
  if (scheme.kind == TargetScheme::Kind::prior_smoothing && scheme.prior.empty()) {
    scheme.prior.assign(data.num_classes, 0.0);
    for (auto y : data.labels) scheme.prior[y] += 1.0;
    for (auto& p : scheme.prior) p /= static_cast<double>(data.size());
  }
  const Matrix q = make_targets(data.labels, scheme, data.num_classes);
  TrainResult result;
  result.loss_curve = fit(model, data.inputs, q, LossKind::cross_entropy, config.epochs,
                          config.lr, config.batch, Rng::derive(config.seed, "train"));
  result.train_accuracy = accuracy(model, data);
  result.model = std::move(model);
  return result;
}

Matrix jacobian(const MlpModel& model, std::span<const double> x, std::size_t layer) {
  check_layer(model, layer, "jacobian");
  const auto t = full_forward(model, x);
  const std::size_t k = model.output_dim();
  Matrix m = Matrix::identity(k);
  for (std::size_t j = model.num_layers() - 1; j > layer; --j) {
    const DenseLayer& l = model.layers[j];
    Matrix next(k, l.in);
    for (std::size_t r = 0; r < k; ++r) {
      for (std::size_t o = 0; o < l.out; ++o) {
        const double a = m(r, o) * activation_slope(l.activation, t.pre[j][o]);
        if (a == 0.0) continue;
        const float* w = l.weights.data() + o * l.in;
        for (std::size_t c = 0; c < l.in; ++c) next(r, c) += a * w[c];
      }
    }
    m = std::move(next);
  }
  return m;
}

std::string layer_name(std::size_t layer) { return "fc" + std::to_string(layer); }

std::vector<std::size_t> all_layers(const MlpModel& model) {
  std::vector<std::size_t> v(model.num_layers());
  std::iota(v.begin(), v.end(), 0);
  return v;
}

ActivationSet extract(const MlpModel& model, const Dataset& data,
                      std::span<const std::size_t> layers) {
  model.validate();
  if (data.dim != model.input_dim()) throw InvalidArgument("extract: dataset dim != model input");
  for (auto l : layers) check_layer(model, l, "extract");
  ActivationSet set;
  set.num_classes = data.num_classes;
  for (auto l : layers) {
    ActivationBatch b;
    b.layer_name = layer_name(l);
    b.d = model.layers[l].out;
    b.shape = {static_cast<std::uint32_t>(b.d)};
    b.labels = data.labels;
    b.data.reserve(data.size() * b.d);
    set.layers.push_back(std::move(b));
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto t = forward(model, data.row(i));
    for (std::size_t s = 0; s < layers.size(); ++s) {
      for (double v : t.activations[layers[s]]) {
        set.layers[s].data.push_back(static_cast<float>(v));
      }
    }
  }
  return set;
}

ParamCount count_params(const MlpModel& model, std::size_t split_index) {
  if (split_index > model.num_layers()) throw InvalidArgument("count_params: split beyond layers");
  ParamCount pc;
  for (std::size_t j = 0; j < model.num_layers(); ++j) {
    const std::size_t n = model.layers[j].weights.size() + model.layers[j].bias.size();
    pc.total += n;
    if (j < split_index) pc.edge += n;
  }
  pc.edge_share = pc.total == 0 ? 0.0 : static_cast<double>(pc.edge) / static_cast<double>(pc.total);
  return pc;
}

}  // namespace gpz

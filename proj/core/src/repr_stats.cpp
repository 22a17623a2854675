#include "gpz/repr_stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "gpz/error.hpp"
#include "gpz/gpz_locator.hpp"

namespace gpz {

void ActivationBatch::validate() const {
  std::size_t prod = 1;
  for (auto s : shape) prod *= s;
  if (shape.empty() || prod != d) {
    throw InvalidArgument("activations '" + layer_name + "': d does not equal the shape product");
  }
  if (data.size() != labels.size() * d) {
    throw InvalidArgument("activations '" + layer_name + "': payload does not match B x d");
  }
  for (float v : data) {
    if (!std::isfinite(v)) throw InvalidArgument("activations '" + layer_name + "': non-finite entry");
  }
}

void ActivationSet::validate() const {
  if (layers.empty()) throw InvalidArgument("activation set: no layers");
  for (const auto& b : layers) {
    b.validate();
    if (b.labels != layers.front().labels) {
      throw InvalidArgument("activation set: layers disagree on labels");
    }
    for (auto y : b.labels) {
      if (y >= num_classes) throw InvalidArgument("activation set: label >= K");
    }
  }
}

double ClassStats::r2_max() const {
  double m = 0.0;
  for (const auto& c : classes) m = std::max(m, c.r2);
  return m;
}

namespace {

// Streaming mean / sum-of-squared-deviations (Welford), per coordinate.
struct Accumulator {
  std::size_t n = 0;
  std::vector<double> mean;
  std::vector<double> m2;

  explicit Accumulator(std::size_t d) : mean(d, 0.0), m2(d, 0.0) {}

  void add(std::span<const float> z) {
    ++n;
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t j = 0; j < z.size(); ++j) {
      const double delta = z[j] - mean[j];
      mean[j] += delta * inv;
      m2[j] += delta * (z[j] - mean[j]);
    }
  }

  double trace() const {
    double t = 0.0;
    for (double v : m2) t += v;
    return t / static_cast<double>(n);
  }
};

}  // namespace

ClassStats class_stats(const ActivationBatch& batch) {
  if (batch.d == 0) throw InvalidArgument("class_stats: zero-dimensional layer");
  if (batch.data.size() != batch.size() * batch.d) {
    throw InvalidArgument("class_stats: payload does not match B x d");
  }
  std::map<std::uint32_t, Accumulator> per_class;
  Accumulator all(batch.d);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto row = batch.row(i);
    auto it = per_class.try_emplace(batch.labels[i], batch.d).first;
    it->second.add(row);
    all.add(row);
  }

  ClassStats s;
  s.d = batch.d;
  s.batch_size = batch.size();
  for (auto& [label, acc] : per_class) {
    if (acc.n < 2) {
      s.skipped.push_back(label);
      continue;
    }
    ClassRadius c;
    c.label = label;
    c.count = acc.n;
    c.r2 = acc.trace();
    c.mean = std::move(acc.mean);
    s.classes.push_back(std::move(c));
  }
  if (s.classes.empty()) {
    throw InvalidArgument("class_stats: layer '" + batch.layer_name +
                          "' has no class with at least two samples");
  }
  s.sigma2_feat = all.trace() / static_cast<double>(batch.d);
  s.grand_mean = std::move(all.mean);
  double sum = 0.0;
  for (const auto& c : s.classes) sum += c.r2;
  s.r2_class_avg = sum / static_cast<double>(s.classes.size());
  return s;
}

double normalized_radius(double r2, std::size_t d) {
  if (d == 0) throw InvalidArgument("normalized_radius: d must be >= 1");
  return r2 / static_cast<double>(d);
}

std::vector<LayerRadiusProfile> layer_profiles(const ActivationSet& acts) {
  if (acts.layers.empty()) throw InvalidArgument("layer_profiles: empty activation set");
  std::vector<LayerRadiusProfile> out;
  out.reserve(acts.layers.size());
  for (std::size_t i = 0; i < acts.layers.size(); ++i) {
    const auto& batch = acts.layers[i];
    const auto s = class_stats(batch);
    LayerRadiusProfile p;
    p.layer_index = i;
    p.layer_name = batch.layer_name;
    p.d = batch.d;
    p.r2 = s.r2_class_avg;
    p.r2_norm = normalized_radius(p.r2, p.d);
    out.push_back(std::move(p));
  }
  if (out.size() >= 2) {
    const auto drops = drop_percentages(out);
    for (std::size_t i = 0; i < drops.size(); ++i) out[i + 1].drop_pct = drops[i];
  }
  return out;
}

}  // namespace gpz

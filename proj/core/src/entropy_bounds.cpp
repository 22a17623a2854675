#include "gpz/entropy_bounds.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "gpz/error.hpp"
#include "gpz/repr_stats.hpp"

namespace gpz {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kLog2PiE = std::log(2.0 * std::numbers::pi * std::numbers::e);

void check_delta(double delta, const char* what) {
  if (!(delta > 0.0) || !std::isfinite(delta)) {
    throw InvalidArgument(std::string(what) + ": delta must be positive and finite");
  }
}

void check_samples(std::span<const double> samples, std::size_t m, const char* what) {
  if (m == 0) throw InvalidArgument(std::string(what) + ": sample dimension must be >= 1");
  if (m > kMaxQuantizedDim) {
    throw InvalidArgument(std::string(what) + ": sample dimension " + std::to_string(m) +
                          " exceeds the cell-counting limit of " +
                          std::to_string(kMaxQuantizedDim));
  }
  if (samples.empty() || samples.size() % m != 0) {
    throw InvalidArgument(std::string(what) + ": need N >= 1 rows of width m");
  }
}

using Cell = std::array<std::int64_t, kMaxQuantizedDim>;

Cell cell_of(std::span<const double> x, double delta) {
  Cell c{};
  for (std::size_t j = 0; j < x.size(); ++j) {
    c[j] = static_cast<std::int64_t>(std::floor(x[j] / delta));
  }
  return c;
}

// log(Phi(b) - Phi(a)) without cancellation in either tail.
double log_normal_interval(double a, double b) {
  constexpr double r = 0.7071067811865476;
  double p = 0.0;
  if (a >= 0.0) {
    p = 0.5 * (std::erfc(a * r) - std::erfc(b * r));
  } else if (b <= 0.0) {
    p = 0.5 * (std::erfc(-b * r) - std::erfc(-a * r));
  } else {
    p = 1.0 - 0.5 * std::erfc(-a * r) - 0.5 * std::erfc(b * r);
  }
  return std::log(p);
}

}  // namespace

double feat_surrogate(double sigma2, std::size_t d) {
  if (std::isnan(sigma2) || sigma2 < 0.0) {
    throw InvalidArgument("feat_surrogate: sigma2 must be >= 0");
  }
  if (d == 0) throw InvalidArgument("feat_surrogate: d must be >= 1");
  if (sigma2 == 0.0) return -kInf;
  return 0.5 * static_cast<double>(d) * (kLog2PiE + std::log(sigma2));
}

double class_surrogate(double r2, std::size_t dim) {
  if (std::isnan(r2) || r2 < 0.0) throw InvalidArgument("class_surrogate: r2 must be >= 0");
  if (dim == 0) throw InvalidArgument("class_surrogate: D must be >= 1");
  if (r2 == 0.0) return -kInf;
  const double D = static_cast<double>(dim);
  return 0.5 * D * (kLog2PiE + std::log(r2 / D));
}

double dec_surrogate(std::span<const double> class_surrogates, std::size_t num_classes) {
  if (class_surrogates.empty()) throw InvalidArgument("dec_surrogate: empty class list");
  if (num_classes == 0) throw InvalidArgument("dec_surrogate: K must be >= 1");
  return *std::max_element(class_surrogates.begin(), class_surrogates.end()) +
         std::log(static_cast<double>(num_classes));
}

double surrogate_gap(double h_feat, double h_dec) { return h_feat - h_dec; }

GapDecomposition decompose_gap(double sigma2, std::size_t d, std::span<const double> class_r2,
                               std::size_t dim_dec, std::size_t num_classes) {
  if (class_r2.empty()) throw InvalidArgument("decompose_gap: empty class list");
  GapDecomposition g;
  const double D = static_cast<double>(dim_dec);
  g.feat_log_term = 0.5 * static_cast<double>(d) * std::log(sigma2);
  g.dec_log_term = -kInf;
  for (double r2 : class_r2) g.dec_log_term = std::max(g.dec_log_term, 0.5 * D * std::log(r2 / D));
  g.dimension_term = 0.5 * (static_cast<double>(d) - D) * kLog2PiE;
  g.class_count_term = -std::log(static_cast<double>(num_classes));
  std::vector<double> cs;
  for (double r2 : class_r2) cs.push_back(class_surrogate(r2, dim_dec));
  g.gap = surrogate_gap(feat_surrogate(sigma2, d), dec_surrogate(cs, num_classes));
  return g;
}

double kappa_uniform(std::size_t m, double delta) {
  check_delta(delta, "kappa_uniform");
  return static_cast<double>(m) * std::log(1.0 / delta);
}

double quantized_entropy(std::span<const double> samples, std::size_t m, double delta) {
  check_delta(delta, "quantized_entropy");
  check_samples(samples, m, "quantized_entropy");
  const std::size_t n = samples.size() / m;
  std::vector<Cell> cells;
  cells.reserve(n);
  for (std::size_t i = 0; i < n; ++i) cells.push_back(cell_of(samples.subspan(i * m, m), delta));
  std::sort(cells.begin(), cells.end());
  double h = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && cells[j] == cells[i]) ++j;
    const double p = static_cast<double>(j - i) * inv_n;
    h -= p * std::log(p);
    i = j;
  }
  return h;
}

double gaussian_entropy(std::span<const double> variances) {
  if (variances.empty()) throw InvalidArgument("gaussian_entropy: empty variance list");
  double h = 0.0;
  for (double v : variances) {
    if (!(v > 0.0)) throw InvalidArgument("gaussian_entropy: variances must be positive");
    h += 0.5 * (kLog2PiE + std::log(v));
  }
  return h;
}

double bridge_residual(std::span<const double> samples, std::size_t m, double delta,
                       double h_reference) {
  return quantized_entropy(samples, m, delta) - h_reference - kappa_uniform(m, delta);
}

ReferenceDensity standard_gaussian_reference(std::size_t dim) {
  ReferenceDensity ref;
  ref.dim = dim;
  ref.entropy = 0.5 * static_cast<double>(dim) * kLog2PiE;
  ref.log_density = [](std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += -0.5 * v * v - 0.5 * std::log(2.0 * std::numbers::pi);
    return s;
  };
  ref.cell_log_probability = [](std::span<const std::int64_t> cell, double delta) {
    double s = 0.0;
    for (auto k : cell) {
      const double a = static_cast<double>(k) * delta;
      s += log_normal_interval(a, a + delta);
    }
    return s;
  };
  return ref;
}

double kl_mismatch_estimate(std::span<const double> samples, std::size_t m, double delta,
                            const ReferenceDensity& reference) {
  check_delta(delta, "kl_mismatch_estimate");
  check_samples(samples, m, "kl_mismatch_estimate");
  if (reference.dim != m) throw InvalidArgument("kl_mismatch_estimate: reference dimension mismatch");
  const std::size_t n = samples.size() / m;
  const double log_volume = static_cast<double>(m) * std::log(delta);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = samples.subspan(i * m, m);
    const Cell c = cell_of(x, delta);
    const double log_hist = reference.cell_log_probability(std::span(c.data(), m), delta) - log_volume;
    sum += reference.log_density(x) - log_hist;
  }
  return sum / static_cast<double>(n);
}

double hx_given_z_lower_feat(double hx, double h_feat, double kappa) {
  if (!std::isfinite(hx)) throw InvalidArgument("hx_given_z_lower: H(X) estimate is missing");
  if (h_feat == -kInf) return kInf;
  return hx - h_feat - kappa;
}

double hx_given_z_lower_dec(double hx, double class_term, double h_label, double kappa) {
  if (!std::isfinite(hx)) throw InvalidArgument("hx_given_z_lower: H(X) estimate is missing");
  if (class_term == -kInf) return kInf;
  return hx - class_term - h_label - kappa;
}

double empirical_label_entropy(std::span<const std::uint32_t> labels, std::size_t num_classes) {
  if (labels.empty()) return 0.0;
  std::vector<std::size_t> counts(num_classes, 0);
  for (auto y : labels) {
    if (y >= num_classes) throw InvalidArgument("empirical_label_entropy: label >= K");
    ++counts[y];
  }
  double h = 0.0;
  const double n = static_cast<double>(labels.size());
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h;
}

std::optional<double> estimate_hx(std::span<const float> inputs, std::size_t dim, double delta) {
  if (dim == 0 || dim > kMaxQuantizedDim || inputs.empty()) return std::nullopt;
  std::vector<double> x(inputs.begin(), inputs.end());
  return quantized_entropy(x, dim, delta);
}

EntropyReport entropy_report(const ActivationSet& acts, double delta, std::optional<double> hx) {
  check_delta(delta, "entropy_report");
  if (acts.layers.empty()) throw InvalidArgument("entropy_report: empty activation set");
  EntropyReport rep;
  rep.delta = delta;
  rep.num_classes = acts.num_classes;
  rep.ln_k = std::log(static_cast<double>(acts.num_classes));
  rep.h_label = empirical_label_entropy(acts.layers.front().labels, acts.num_classes);
  rep.hx = hx;
  for (const auto& batch : acts.layers) {
    const auto s = class_stats(batch);
    LayerBounds b;
    b.layer = batch.layer_name;
    b.d = batch.d;
    b.sigma2_feat = s.sigma2_feat;
    b.r2_max = s.r2_max();
    b.h_feat = feat_surrogate(s.sigma2_feat, batch.d);
    for (const auto& c : s.classes) b.class_surrogates.push_back(class_surrogate(c.r2, batch.d));
    b.h_dec = dec_surrogate(b.class_surrogates, acts.num_classes);
    b.gap = surrogate_gap(b.h_feat, b.h_dec);
    b.kappa = kappa_uniform(batch.d, delta);
    const double class_term = *std::max_element(b.class_surrogates.begin(), b.class_surrogates.end());
    b.sub_feat = b.h_feat + b.kappa;
    b.sub_dec = class_term + rep.h_label + b.kappa;
    if (hx) {
      b.lb_feat = hx_given_z_lower_feat(*hx, b.h_feat, b.kappa);
      b.lb_dec = hx_given_z_lower_dec(*hx, class_term, rep.h_label, b.kappa);
    }
    rep.layers.push_back(std::move(b));
  }
  return rep;
}

}  // namespace gpz

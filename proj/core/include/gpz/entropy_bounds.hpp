#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gpz/activations.hpp"

namespace gpz {

// All quantities are in nats.

/// Default quantization step used when reporting kappa.
inline constexpr double kDefaultDelta = 1.0 / 1024.0;

/// (d/2) ln(2 pi e sigma2). Returns -inf for sigma2 == 0.
double feat_surrogate(double sigma2, std::size_t d);

/// (D/2) ln(2 pi e r2 / D). Returns -inf for r2 == 0.
double class_surrogate(double r2, std::size_t dim);

/// max(class_surrogates) + ln K.
double dec_surrogate(std::span<const double> class_surrogates, std::size_t num_classes);

double surrogate_gap(double h_feat, double h_dec);

/// Terms of the expanded surrogate gap; they re-sum to `gap`.
struct GapDecomposition {
  double gap = 0.0;
  double feat_log_term = 0.0;    // (d/2) ln sigma2
  double dec_log_term = 0.0;     // max_c (D/2) ln(r2_c / D)
  double dimension_term = 0.0;   // ((d - D)/2) ln(2 pi e)
  double class_count_term = 0.0; // -ln K
};

GapDecomposition decompose_gap(double sigma2, std::size_t d, std::span<const double> class_r2,
                               std::size_t dim_dec, std::size_t num_classes);

/// Leading uniform-quantization term m ln(1/delta).
double kappa_uniform(std::size_t m, double delta);

/// Largest sample dimension quantized_entropy will bin.
inline constexpr std::size_t kMaxQuantizedDim = 4;

/// Plug-in Shannon entropy of the cell histogram floor(x / delta).
/// `samples` is N x m row-major.
double quantized_entropy(std::span<const double> samples, std::size_t m, double delta);

/// Gaussian differential entropy for a diagonal covariance.
double gaussian_entropy(std::span<const double> variances);

/// H_quantized - h_reference - m ln(1/delta).
double bridge_residual(std::span<const double> samples, std::size_t m, double delta,
                       double h_reference);

/// Known generating density, used for the Monte-Carlo mismatch estimate.
struct ReferenceDensity {
  std::size_t dim = 1;
  double entropy = 0.0;
  std::function<double(std::span<const double>)> log_density;
  /// log P(cell), the cell being prod_j [k_j delta, (k_j + 1) delta).
  std::function<double(std::span<const std::int64_t>, double)> cell_log_probability;
};

ReferenceDensity standard_gaussian_reference(std::size_t dim);

/// Monte-Carlo estimate of D(f || f_delta) = E_f[log f(Z) - log f_delta(Z)],
/// with f_delta the exact histogram density of the reference. Unlike
/// bridge_residual it carries no plug-in histogram bias.
double kl_mismatch_estimate(std::span<const double> samples, std::size_t m, double delta,
                            const ReferenceDensity& reference);

/// hx - feat_subtrahend - kappa. +inf when the surrogate is -inf.
double hx_given_z_lower_feat(double hx, double h_feat, double kappa);

/// hx - class_term - h_label - kappa, class_term being the max-over-classes
/// decision surrogate without ln K.
double hx_given_z_lower_dec(double hx, double class_term, double h_label, double kappa);

/// Plug-in entropy of the label histogram.
double empirical_label_entropy(std::span<const std::uint32_t> labels, std::size_t num_classes);

struct LayerBounds {
  std::string layer;
  std::size_t d = 0;
  double sigma2_feat = 0.0;
  double r2_max = 0.0;
  double h_feat = 0.0;
  std::vector<double> class_surrogates;
  double h_dec = 0.0;
  double gap = 0.0;
  double kappa = 0.0;
  double sub_feat = 0.0;  // h_feat + kappa
  double sub_dec = 0.0;   // class term + H(Y) + kappa
  std::optional<double> lb_feat;
  std::optional<double> lb_dec;
};

struct EntropyReport {
  double delta = kDefaultDelta;
  std::size_t num_classes = 0;
  double ln_k = 0.0;
  double h_label = 0.0;
  std::optional<double> hx;
  std::vector<LayerBounds> layers;
};

EntropyReport entropy_report(const ActivationSet& acts, double delta = kDefaultDelta,
                             std::optional<double> hx = std::nullopt);

/// H(X) proxy: quantized entropy of the inputs when their dimension allows it.
std::optional<double> estimate_hx(std::span<const float> inputs, std::size_t dim, double delta);

}  // namespace gpz

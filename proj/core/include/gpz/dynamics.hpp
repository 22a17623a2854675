#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gpz/dataset.hpp"
#include "gpz/matrix.hpp"
#include "gpz/micronet.hpp"

namespace gpz {

/// Projections of the center-relative residual r = z - mu onto the
/// logit-gradient directions J^T e_k.
struct TTerms {
  double corr = 0.0;          // k = c
  std::vector<double> off;    // k != c, in class order
  std::vector<double> all;    // every k, all[c] == corr
};

TTerms t_terms(std::span<const double> z, std::span<const double> mu, const Matrix& jac,
               std::uint32_t label);

/// One sample of class c at the analyzed layer.
struct DynamicsSample {
  std::vector<double> z;
  Matrix jacobian;            // K x d
  std::vector<double> probs;  // softmax output
};

struct ClassBatch {
  std::uint32_t label = 0;
  std::size_t num_classes = 0;
  std::vector<DynamicsSample> samples;

  std::vector<double> mean() const;
};

/// First-order change of R_c^2 after a virtual step of size gamma, written
/// through T-terms with coefficients p - q (q from the scheme).
double delta_r2_first_order(const ClassBatch& batch, const TargetScheme& scheme, double gamma);

/// Same quantity from raw gradients: -(2 gamma / N) sum r_i^T g_i.
double delta_r2_first_order_direct(std::span<const std::vector<double>> z,
                                   std::span<const std::vector<double>> grads, double gamma);

/// The extra soft-target drive relative to one-hot:
/// -(2 gamma alpha / N) sum [T_corr - sum_k r_k T_k].
double soft_target_extra_term(const ClassBatch& batch, const TargetScheme& scheme, double gamma);

/// g_i = J_i^T (p_i - q) for every sample.
std::vector<std::vector<double>> feature_gradients(const ClassBatch& batch,
                                                   const TargetScheme& scheme);

/// Applies z+ = z - gamma g to every sample and recomputes R_c^2 exactly.
/// With recenter = false the old center is kept.
double delta_r2_oracle(std::span<const std::vector<double>> z,
                       std::span<const std::vector<double>> grads, double gamma,
                       bool recenter = true);

/// Angle between J^T e_c and r, in degrees. 90 when either vector is zero.
double correct_class_angle(std::span<const double> z, std::span<const double> mu,
                           const Matrix& jac, std::uint32_t label);

struct RegimeStats {
  std::size_t count = 0;
  double frac_t_corr_pos = 0.0;
  double frac_t_corr_neg = 0.0;
};

/// Samples split by confidence relative to the smoothed target 1 - alpha.
struct AngleStats {
  RegimeStats under;  // p_c < 1 - alpha
  RegimeStats over;   // p_c > 1 - alpha
  bool under_present = false;
  bool over_present = false;
};

AngleStats angle_stats(std::span<const double> correct_probs, std::span<const double> t_corr,
                       double alpha);

struct ResidualBounds {
  double ls_lb = 0.0;      // |alpha - eps| sqrt(K/(K-1))
  double onehot_ub = 0.0;  // sqrt(2) eps
  double epsilon = 0.0;    // 1 - p_c
};

ResidualBounds residual_norm_bounds(std::span<const double> probs, std::uint32_t label,
                                    double alpha);

/// Singular-value sandwich for ||J^T v||.
struct GradBound {
  double sigma_min_nonzero = 0.0;
  double sigma_max = 0.0;
  std::size_t rank = 0;
  bool near_rank_deficient = false;  // a nonzero singular value below 1e-6 sigma_max
  double residual_norm = 0.0;        // ||v||
  double projected_norm = 0.0;       // ||Pi v||
  double proj_retention = 0.0;       // ||Pi v|| / ||v||, 0 when v = 0
  double lower = 0.0;                // sigma_r ||Pi v||
  double upper = 0.0;                // sigma_1 ||v||
  double measured = 0.0;             // ||J^T v||
};

inline constexpr double kRankTolerance = 1e-10;

GradBound feature_grad_bounds(const Matrix& jac, std::span<const double> v);

struct Summary {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  double frac_pos = 0.0;
  double frac_neg = 0.0;
};

struct BoundSummary {
  double mean_epsilon = 0.0;
  double mean_ls_residual_lb = 0.0;
  double mean_onehot_residual_ub = 0.0;
  double mean_residual_norm = 0.0;
  double mean_proj_retention = 0.0;
  double min_proj_retention = 0.0;
  double min_sigma_nonzero = 0.0;
  double max_sigma = 0.0;
  double mean_feature_grad_lb = 0.0;
  double mean_feature_grad = 0.0;
  double mean_feature_grad_ub = 0.0;
  std::size_t violations = 0;
  bool near_rank_deficient = false;
};

struct ClassDynamics {
  std::uint32_t label = 0;
  std::size_t count = 0;
  double gamma = 0.0;
  double predicted = 0.0;
  double oracle = 0.0;
  double abs_err = 0.0;
  std::vector<double> t_corr;
  std::vector<std::vector<double>> t_off;
  std::vector<double> theta;
  std::vector<double> residual_norms;
  Summary t_corr_summary;
  std::vector<std::size_t> angle_hist;  // 18 bins of 10 degrees
  AngleStats angles;
  BoundSummary bounds;
};

struct DynamicsReport {
  std::string layer;
  std::string scheme;
  double gamma = 0.0;
  std::vector<ClassDynamics> classes;
};

/// Builds the per-class batch for `label` at `layer` from a trained model.
ClassBatch class_batch(const MlpModel& model, const Dataset& data, std::size_t layer,
                       std::uint32_t label);

ClassDynamics analyze_class(const ClassBatch& batch, const TargetScheme& scheme, double gamma);

/// Every class with at least two samples.
DynamicsReport analyze_dynamics(const MlpModel& model, const Dataset& data, std::size_t layer,
                                const TargetScheme& scheme, double gamma);

}  // namespace gpz

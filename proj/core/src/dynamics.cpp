#include "gpz/dynamics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "gpz/error.hpp"

namespace gpz {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// J^T v for a K x d matrix.
std::vector<double> transpose_apply(const Matrix& jac, std::span<const double> v) {
  std::vector<double> out(jac.cols, 0.0);
  for (std::size_t k = 0; k < jac.rows; ++k) {
    for (std::size_t j = 0; j < jac.cols; ++j) out[j] += jac(k, j) * v[k];
  }
  return out;
}

std::vector<double> column_mean(std::span<const std::vector<double>> z) {
  std::vector<double> mu(z.front().size(), 0.0);
  for (const auto& v : z) {
    for (std::size_t j = 0; j < v.size(); ++j) mu[j] += v[j];
  }
  for (auto& m : mu) m /= static_cast<double>(z.size());
  return mu;
}

double radius2(std::span<const std::vector<double>> z, std::span<const double> mu) {
  double s = 0.0;
  for (const auto& v : z) {
    for (std::size_t j = 0; j < v.size(); ++j) {
      const double e = v[j] - mu[j];
      s += e * e;
    }
  }
  return s / static_cast<double>(z.size());
}

void check_batch(const ClassBatch& batch) {
  if (batch.samples.size() < 2) throw InvalidArgument("dynamics: class batch needs N_c >= 2");
  const std::size_t d = batch.samples.front().z.size();
  for (const auto& s : batch.samples) {
    if (s.z.size() != d || s.jacobian.cols != d || s.jacobian.rows != batch.num_classes ||
        s.probs.size() != batch.num_classes) {
      throw InvalidArgument("dynamics: inconsistent shapes in class batch");
    }
  }
  if (batch.label >= batch.num_classes) throw InvalidArgument("dynamics: label >= K");
}

double effective_alpha(const TargetScheme& scheme) {
  return scheme.kind == TargetScheme::Kind::onehot ? 0.0 : scheme.alpha;
}

}  // namespace

TTerms t_terms(std::span<const double> z, std::span<const double> mu, const Matrix& jac,
               std::uint32_t label) {
  if (z.size() != mu.size() || jac.cols != z.size()) {
    throw InvalidArgument("t_terms: shape mismatch");
  }
  if (label >= jac.rows) throw InvalidArgument("t_terms: label >= K");
  TTerms t;
  t.all.assign(jac.rows, 0.0);
  for (std::size_t k = 0; k < jac.rows; ++k) {
    double s = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) s += (z[j] - mu[j]) * jac(k, j);
    t.all[k] = s;
    if (k == label) {
      t.corr = s;
    } else {
      t.off.push_back(s);
    }
  }
  return t;
}

std::vector<double> ClassBatch::mean() const {
  std::vector<double> mu(samples.front().z.size(), 0.0);
  for (const auto& s : samples) {
    for (std::size_t j = 0; j < mu.size(); ++j) mu[j] += s.z[j];
  }
  for (auto& m : mu) m /= static_cast<double>(samples.size());
  return mu;
}

double delta_r2_first_order(const ClassBatch& batch, const TargetScheme& scheme, double gamma) {
  check_batch(batch);
  const auto q = target_row(batch.label, scheme, batch.num_classes);
  const auto mu = batch.mean();
  double sum = 0.0;
  for (const auto& s : batch.samples) {
    const auto t = t_terms(s.z, mu, s.jacobian, batch.label);
    for (std::size_t k = 0; k < batch.num_classes; ++k) sum += (s.probs[k] - q[k]) * t.all[k];
  }
  return -2.0 * gamma / static_cast<double>(batch.samples.size()) * sum;
}

double delta_r2_first_order_direct(std::span<const std::vector<double>> z,
                                   std::span<const std::vector<double>> grads, double gamma) {
  if (z.size() < 2 || z.size() != grads.size()) {
    throw InvalidArgument("delta_r2_first_order_direct: need matching N_c >= 2");
  }
  const auto mu = column_mean(z);
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    for (std::size_t j = 0; j < mu.size(); ++j) sum += (z[i][j] - mu[j]) * grads[i][j];
  }
  return -2.0 * gamma / static_cast<double>(z.size()) * sum;
}

double soft_target_extra_term(const ClassBatch& batch, const TargetScheme& scheme, double gamma) {
  check_batch(batch);
  const double alpha = effective_alpha(scheme);
  const auto r = scheme.off_class_weights(batch.label, batch.num_classes);
  const auto mu = batch.mean();
  double sum = 0.0;
  for (const auto& s : batch.samples) {
    const auto t = t_terms(s.z, mu, s.jacobian, batch.label);
    double off = 0.0;
    for (std::size_t k = 0; k < batch.num_classes; ++k) off += r[k] * t.all[k];
    sum += t.corr - off;
  }
  return -2.0 * gamma * alpha / static_cast<double>(batch.samples.size()) * sum;
}

std::vector<std::vector<double>> feature_gradients(const ClassBatch& batch,
                                                   const TargetScheme& scheme) {
  check_batch(batch);
  const auto q = target_row(batch.label, scheme, batch.num_classes);
  std::vector<std::vector<double>> g;
  g.reserve(batch.samples.size());
  std::vector<double> delta(batch.num_classes);
  for (const auto& s : batch.samples) {
    for (std::size_t k = 0; k < batch.num_classes; ++k) delta[k] = s.probs[k] - q[k];
    g.push_back(transpose_apply(s.jacobian, delta));
  }
  return g;
}

double delta_r2_oracle(std::span<const std::vector<double>> z,
                       std::span<const std::vector<double>> grads, double gamma, bool recenter) {
  if (z.size() < 2 || z.size() != grads.size()) {
    throw InvalidArgument("delta_r2_oracle: need matching N_c >= 2");
  }
  const auto mu = column_mean(z);
  const double before = radius2(z, mu);
  std::vector<std::vector<double>> moved(z.begin(), z.end());
  for (std::size_t i = 0; i < moved.size(); ++i) {
    if (grads[i].size() != moved[i].size()) throw InvalidArgument("delta_r2_oracle: shape mismatch");
    for (std::size_t j = 0; j < moved[i].size(); ++j) moved[i][j] -= gamma * grads[i][j];
  }
  const auto mu_after = recenter ? column_mean(moved) : mu;
  return radius2(moved, mu_after) - before;
}

double correct_class_angle(std::span<const double> z, std::span<const double> mu,
                           const Matrix& jac, std::uint32_t label) {
  const auto t = t_terms(z, mu, jac, label);
  std::vector<double> r(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) r[j] = z[j] - mu[j];
  std::vector<double> e(jac.rows, 0.0);
  e[label] = 1.0;
  const auto dir = transpose_apply(jac, e);
  const double denom = norm(r) * norm(dir);
  if (denom == 0.0 || t.corr == 0.0) return 90.0;
  const double c = std::clamp(t.corr / denom, -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

AngleStats angle_stats(std::span<const double> correct_probs, std::span<const double> t_corr,
                       double alpha) {
  if (correct_probs.size() != t_corr.size()) throw InvalidArgument("angle_stats: size mismatch");
  AngleStats a;
  std::size_t under_pos = 0, under_neg = 0, over_pos = 0, over_neg = 0;
  const double threshold = 1.0 - alpha;
  for (std::size_t i = 0; i < t_corr.size(); ++i) {
    if (correct_probs[i] < threshold) {
      ++a.under.count;
      under_pos += t_corr[i] > 0.0;
      under_neg += t_corr[i] < 0.0;
    } else if (correct_probs[i] > threshold) {
      ++a.over.count;
      over_pos += t_corr[i] > 0.0;
      over_neg += t_corr[i] < 0.0;
    }
  }
  a.under_present = a.under.count > 0;
  a.over_present = a.over.count > 0;
  if (a.under_present) {
    a.under.frac_t_corr_pos = static_cast<double>(under_pos) / static_cast<double>(a.under.count);
    a.under.frac_t_corr_neg = static_cast<double>(under_neg) / static_cast<double>(a.under.count);
  }
  if (a.over_present) {
    a.over.frac_t_corr_pos = static_cast<double>(over_pos) / static_cast<double>(a.over.count);
    a.over.frac_t_corr_neg = static_cast<double>(over_neg) / static_cast<double>(a.over.count);
  }
  return a;
}

ResidualBounds residual_norm_bounds(std::span<const double> probs, std::uint32_t label,
                                    double alpha) {
  const std::size_t k = probs.size();
  if (k < 2) throw InvalidArgument("residual_norm_bounds: K must be >= 2");
  if (label >= k) throw InvalidArgument("residual_norm_bounds: label >= K");
  ResidualBounds b;
  b.epsilon = 1.0 - probs[label];
  const double kk = static_cast<double>(k);
  b.ls_lb = std::abs(alpha - b.epsilon) * std::sqrt(kk / (kk - 1.0));
  b.onehot_ub = std::sqrt(2.0) * b.epsilon;
  return b;
}

GradBound feature_grad_bounds(const Matrix& jac, std::span<const double> v) {
  if (v.size() != jac.rows) throw InvalidArgument("feature_grad_bounds: residual width != K");
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
      j(jac.data.data(), static_cast<Eigen::Index>(jac.rows), static_cast<Eigen::Index>(jac.cols));
  if (j.cwiseAbs().maxCoeff() == 0.0) throw InvalidArgument("feature_grad_bounds: Jacobian is all zero");
  const Eigen::Map<const Eigen::VectorXd> vv(v.data(), static_cast<Eigen::Index>(v.size()));

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(j, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  GradBound b;
  b.sigma_max = s(0);
  const double cutoff = kRankTolerance * b.sigma_max;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff) {
      b.rank = static_cast<std::size_t>(i) + 1;
      b.sigma_min_nonzero = s(i);
      if (s(i) < 1e-6 * b.sigma_max) b.near_rank_deficient = true;
    }
  }
  const auto ur = svd.matrixU().leftCols(static_cast<Eigen::Index>(b.rank));
  b.residual_norm = vv.norm();
  b.projected_norm = (ur.transpose() * vv).norm();
  b.proj_retention = b.residual_norm == 0.0 ? 0.0 : std::min(1.0, b.projected_norm / b.residual_norm);
  b.lower = b.sigma_min_nonzero * b.projected_norm;
  b.upper = b.sigma_max * b.residual_norm;
  b.measured = (j.transpose() * vv).norm();
  return b;
}

ClassBatch class_batch(const MlpModel& model, const Dataset& data, std::size_t layer,
                       std::uint32_t label) {
  if (layer >= model.num_layers()) throw InvalidArgument("dynamics: layer out of range");
  ClassBatch batch;
  batch.label = label;
  batch.num_classes = model.output_dim();
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.labels[i] != label) continue;
    const std::vector<double> x(data.row(i).begin(), data.row(i).end());
    const auto t = forward(model, std::span<const double>(x));
    DynamicsSample s;
    s.z = t.activations[layer];
    s.jacobian = jacobian(model, x, layer);
    s.probs = t.probs;
    batch.samples.push_back(std::move(s));
  }
  return batch;
}

ClassDynamics analyze_class(const ClassBatch& batch, const TargetScheme& scheme, double gamma) {
  check_batch(batch);
  ClassDynamics cd;
  cd.label = batch.label;
  cd.count = batch.samples.size();
  cd.gamma = gamma;
  cd.predicted = delta_r2_first_order(batch, scheme, gamma);

  std::vector<std::vector<double>> z;
  for (const auto& s : batch.samples) z.push_back(s.z);
  const auto g = feature_gradients(batch, scheme);
  cd.oracle = delta_r2_oracle(z, g, gamma);
  cd.abs_err = std::abs(cd.predicted - cd.oracle);

  const auto mu = batch.mean();
  const auto q = target_row(batch.label, scheme, batch.num_classes);
  const double alpha = effective_alpha(scheme);
  cd.angle_hist.assign(18, 0);
  std::vector<double> pc;
  BoundSummary& bs = cd.bounds;
  bs.min_proj_retention = 1.0;
  bs.min_sigma_nonzero = std::numeric_limits<double>::infinity();
  std::size_t npos = 0, nneg = 0;
  for (const auto& s : batch.samples) {
    const auto t = t_terms(s.z, mu, s.jacobian, batch.label);
    cd.t_corr.push_back(t.corr);
    cd.t_off.push_back(t.off);
    const double theta = correct_class_angle(s.z, mu, s.jacobian, batch.label);
    cd.theta.push_back(theta);
    cd.angle_hist[std::min<std::size_t>(17, static_cast<std::size_t>(theta / 10.0))] += 1;
    npos += t.corr > 0.0;
    nneg += t.corr < 0.0;
    pc.push_back(s.probs[batch.label]);

    std::vector<double> delta(batch.num_classes);
    for (std::size_t k = 0; k < batch.num_classes; ++k) delta[k] = s.probs[k] - q[k];
    cd.residual_norms.push_back(norm(delta));
    if (batch.num_classes >= 2) {
      const auto rb = residual_norm_bounds(s.probs, batch.label, alpha);
      bs.mean_epsilon += rb.epsilon;
      bs.mean_ls_residual_lb += rb.ls_lb;
      bs.mean_onehot_residual_ub += rb.onehot_ub;
    }
    bs.mean_residual_norm += cd.residual_norms.back();
    if (s.jacobian.data.empty() ||
        std::all_of(s.jacobian.data.begin(), s.jacobian.data.end(), [](double v) { return v == 0.0; })) {
      // Dead path (every ReLU off): the feature gradient is exactly zero.
      bs.min_proj_retention = 0.0;
      continue;
    }
    const auto gb = feature_grad_bounds(s.jacobian, delta);
    bs.mean_proj_retention += gb.proj_retention;
    bs.min_proj_retention = std::min(bs.min_proj_retention, gb.proj_retention);
    bs.min_sigma_nonzero = std::min(bs.min_sigma_nonzero, gb.sigma_min_nonzero);
    bs.max_sigma = std::max(bs.max_sigma, gb.sigma_max);
    bs.mean_feature_grad_lb += gb.lower;
    bs.mean_feature_grad += gb.measured;
    bs.mean_feature_grad_ub += gb.upper;
    bs.near_rank_deficient = bs.near_rank_deficient || gb.near_rank_deficient;
    const double slack = 1e-9 * std::max(1.0, gb.upper);
    if (gb.lower > gb.measured + slack || gb.measured > gb.upper + slack) ++bs.violations;
  }
  const double n = static_cast<double>(cd.count);
  bs.mean_epsilon /= n;
  bs.mean_ls_residual_lb /= n;
  bs.mean_onehot_residual_ub /= n;
  bs.mean_residual_norm /= n;
  bs.mean_proj_retention /= n;
  bs.mean_feature_grad_lb /= n;
  bs.mean_feature_grad /= n;
  bs.mean_feature_grad_ub /= n;
  if (!std::isfinite(bs.min_sigma_nonzero)) bs.min_sigma_nonzero = 0.0;

  auto& ts = cd.t_corr_summary;
  ts.min = *std::min_element(cd.t_corr.begin(), cd.t_corr.end());
  ts.max = *std::max_element(cd.t_corr.begin(), cd.t_corr.end());
  for (double v : cd.t_corr) ts.mean += v;
  ts.mean /= n;
  ts.frac_pos = static_cast<double>(npos) / n;
  ts.frac_neg = static_cast<double>(nneg) / n;
  cd.angles = angle_stats(pc, cd.t_corr, alpha);
  return cd;
}

DynamicsReport analyze_dynamics(const MlpModel& model, const Dataset& data, std::size_t layer,
                                const TargetScheme& scheme, double gamma) {
  if (!std::isfinite(gamma) || gamma < 0.0) throw InvalidArgument("dynamics: gamma must be >= 0");
  DynamicsReport rep;
  rep.layer = layer_name(layer);
  rep.scheme = scheme.to_string();
  rep.gamma = gamma;
  TargetScheme resolved = scheme;
  if (resolved.kind == TargetScheme::Kind::prior_smoothing && resolved.prior.empty()) {
    resolved.prior.assign(data.num_classes, 0.0);
    for (auto y : data.labels) resolved.prior[y] += 1.0;
    for (auto& p : resolved.prior) p /= static_cast<double>(data.size());
  }
  for (std::uint32_t c = 0; c < data.num_classes; ++c) {
    auto batch = class_batch(model, data, layer, c);
    if (batch.samples.size() < 2) continue;
    rep.classes.push_back(analyze_class(batch, resolved, gamma));
  }
  if (rep.classes.empty()) throw InvalidArgument("dynamics: no class with N_c >= 2");
  return rep;
}

}  // namespace gpz

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "gpz/entropy_bounds.hpp"
#include "gpz/error.hpp"
#include "gpz/rng.hpp"
#include "oracles.hpp"

using namespace gpz;

namespace {

const double kTwoPiE = 2.0 * std::numbers::pi * std::numbers::e;
const double kInf = std::numeric_limits<double>::infinity();

std::vector<double> gaussian_samples(std::uint64_t seed, std::size_t n) {
  Rng r(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = r.normal();
  return v;
}

}  // namespace

TEST(Surrogates, FeatExamples) {
  EXPECT_NEAR(feat_surrogate(1.0 / kTwoPiE, 1), 0.0, 1e-12);
  EXPECT_NEAR(feat_surrogate(1.0, 2), 2.837877, 1e-6);
  EXPECT_EQ(feat_surrogate(0.0, 3), -kInf);
  EXPECT_THROW(feat_surrogate(-1.0, 3), InvalidArgument);
}

TEST(Surrogates, FeatMatchesIsotropicGaussianEntropy) {
  const std::size_t d = 3, n = 20000;
  Rng r(8);
  const double var = 0.7;
  std::vector<double> sum(d, 0.0), sum2(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double x = std::sqrt(var) * r.normal();
      sum[j] += x;
      sum2[j] += x * x;
    }
  double tr = 0.0;
  std::vector<double> vars(d);
  for (std::size_t j = 0; j < d; ++j) {
    vars[j] = sum2[j] / n - std::pow(sum[j] / n, 2);
    tr += vars[j];
  }
  EXPECT_NEAR(feat_surrogate(tr / d, d), gaussian_entropy(vars), 0.01);
  EXPECT_GE(feat_surrogate(tr / d, d), gaussian_entropy(vars) - 1e-12);
}

TEST(Surrogates, ClassExamples) {
  EXPECT_NEAR(class_surrogate(2.0, 2), 2.837877, 1e-6);
  EXPECT_NEAR(class_surrogate(1.0 / kTwoPiE, 1), 0.0, 1e-12);
  EXPECT_EQ(class_surrogate(0.0, 2), -kInf);
}

TEST(Surrogates, ClassBoundsExactGaussianEntropy) {
  std::mt19937_64 g(17);
  for (int t = 0; t < 100; ++t) {
    const int d = 1 + t % 6;
    const auto s = oracle::random_psd(g, d);
    const double exact = 0.5 * (d * std::log(kTwoPiE) + std::log(s.determinant()));
    EXPECT_GE(class_surrogate(s.trace(), d) + 1e-9, exact);
  }
}

TEST(Surrogates, DecAndGap) {
  const std::vector<double> zero{0.0};
  EXPECT_DOUBLE_EQ(dec_surrogate(zero, 1), 0.0);
  const std::vector<double> two{1.0, 2.0};
  EXPECT_NEAR(dec_surrogate(two, 2), 2.693147, 1e-6);
  EXPECT_THROW(dec_surrogate(std::vector<double>{}, 2), InvalidArgument);
  EXPECT_GE(dec_surrogate(two, 1), 2.0);
  EXPECT_GE(dec_surrogate(two, 3), dec_surrogate(two, 2));
  EXPECT_DOUBLE_EQ(surrogate_gap(1.5, 1.5), 0.0);
  EXPECT_DOUBLE_EQ(surrogate_gap(3, 1), 2.0);
}

TEST(Surrogates, GapDecompositionResums) {
  const std::vector<double> r2{0.4, 1.3, 0.9};
  const auto g = decompose_gap(0.8, 6, r2, 4, 3);
  EXPECT_NEAR(g.feat_log_term - g.dec_log_term + g.dimension_term + g.class_count_term, g.gap, 1e-9);
  std::vector<double> cs;
  for (double r : r2) cs.push_back(class_surrogate(r, 4));
  EXPECT_NEAR(g.gap, surrogate_gap(feat_surrogate(0.8, 6), dec_surrogate(cs, 3)), 1e-9);
}

TEST(Kappa, Examples) {
  EXPECT_NEAR(kappa_uniform(3, 0.5), 2.079442, 1e-6);
  EXPECT_DOUBLE_EQ(kappa_uniform(5, 1.0), 0.0);
  EXPECT_NEAR(kappa_uniform(1, 0.1), 2.302585, 1e-6);
  EXPECT_GE(kappa_uniform(4, kDefaultDelta), 0.0);
}

TEST(QuantizedEntropy, Examples) {
  const std::vector<double> same(10, 0.37);
  EXPECT_DOUBLE_EQ(quantized_entropy(same, 1, 0.1), 0.0);
  const std::vector<double> two{0.05, 0.05, 0.15, 0.15};
  EXPECT_NEAR(quantized_entropy(two, 1, 0.1), std::log(2.0), 1e-12);
  EXPECT_THROW(quantized_entropy(std::vector<double>(10, 0.0), 5, 0.1), InvalidArgument);
  EXPECT_THROW(quantized_entropy(std::vector<double>{}, 1, 0.1), InvalidArgument);
}

TEST(QuantizedEntropy, GaussianBridgeValue) {
  const auto s = gaussian_samples(1, 100000);
  EXPECT_NEAR(quantized_entropy(s, 1, 0.01), 6.024109, 0.05);
}

TEST(GaussianEntropy, Examples) {
  EXPECT_NEAR(gaussian_entropy(std::vector<double>{1.0}), 1.418939, 1e-6);
  EXPECT_NEAR(gaussian_entropy(std::vector<double>{1.0, 1.0}), 2.837877, 1e-6);
  EXPECT_NEAR(gaussian_entropy(std::vector<double>{4.0, 1.0}), 3.531024, 1e-6);
  EXPECT_THROW(gaussian_entropy(std::vector<double>{0.0}), InvalidArgument);
}

TEST(Bridge, UniformOnCellsIsExact) {
  std::vector<double> s;
  for (int k = 0; k < 100; ++k)
    for (int rep = 0; rep < 3; ++rep) s.push_back((k + 0.25 + 0.25 * rep) * 0.01);
  EXPECT_NEAR(bridge_residual(s, 1, 0.01, 0.0), 0.0, 1e-12);
}

TEST(Bridge, GaussianResidualNearZero) {
  const auto s = gaussian_samples(2, 100000);
  EXPECT_GE(bridge_residual(s, 1, 0.01, 0.5 * std::log(kTwoPiE)), -0.05);
}

TEST(Bridge, MismatchEstimateShrinksWithDelta) {
  const auto s = gaussian_samples(3, 100000);
  const auto ref = standard_gaussian_reference(1);
  const double a = std::abs(kl_mismatch_estimate(s, 1, 0.1, ref));
  const double b = std::abs(kl_mismatch_estimate(s, 1, 0.05, ref));
  const double c = std::abs(kl_mismatch_estimate(s, 1, 0.01, ref));
  EXPECT_GT(a, b);
  EXPECT_GT(b, c);
}

TEST(Bridge, GaussianReferenceCellProbabilities) {
  const auto ref = standard_gaussian_reference(1);
  double total = 0.0;
  for (std::int64_t k = -1000; k < 1000; ++k) {
    const std::int64_t cell[] = {k};
    total += std::exp(ref.cell_log_probability(cell, 0.01));
  }
  EXPECT_NEAR(total, 1.0, 1e-9);
  EXPECT_NEAR(ref.entropy, 0.5 * std::log(kTwoPiE), 1e-12);
}

TEST(Maximality, NonGaussianMixturesStayBelowGaussian) {
  Rng r(4);
  for (int t = 0; t < 5; ++t) {
    // Two-component mixture, bimodal for larger separations.
    const double sep = 0.5 + t;
    std::vector<double> s(100000);
    double m = 0.0, m2 = 0.0;
    for (auto& x : s) {
      x = (r.uniform() < 0.5 ? -sep : sep) + 0.5 * r.normal();
      m += x;
      m2 += x * x;
    }
    const double var = m2 / s.size() - std::pow(m / s.size(), 2);
    const double delta = 0.01;
    const double h_est = quantized_entropy(s, 1, delta) - kappa_uniform(1, delta);
    EXPECT_LE(h_est, gaussian_entropy(std::vector<double>{var}) + 0.1);
  }
}

TEST(LowerBounds, Examples) {
  EXPECT_DOUBLE_EQ(hx_given_z_lower_feat(10.0, 4.0, 1.0), 5.0);
  EXPECT_EQ(hx_given_z_lower_feat(10.0, -kInf, 1.0), kInf);
  EXPECT_DOUBLE_EQ(hx_given_z_lower_dec(10.0, 3.0, 0.5, 1.0), 5.5);
  EXPECT_EQ(hx_given_z_lower_dec(10.0, -kInf, 0.5, 1.0), kInf);
  EXPECT_THROW(hx_given_z_lower_feat(std::numeric_limits<double>::quiet_NaN(), 1, 1), InvalidArgument);
}

TEST(LabelEntropy, Examples) {
  EXPECT_NEAR(empirical_label_entropy(std::vector<std::uint32_t>{0, 1, 0, 1}, 2), std::log(2.0), 1e-12);
  EXPECT_DOUBLE_EQ(empirical_label_entropy(std::vector<std::uint32_t>{0, 0, 0}, 3), 0.0);
  EXPECT_NEAR(empirical_label_entropy(std::vector<std::uint32_t>{0, 0, 0, 1}, 2), 0.562335, 1e-6);
  EXPECT_LE(empirical_label_entropy(std::vector<std::uint32_t>{0, 1, 2, 2}, 3), std::log(3.0) + 1e-9);
}

TEST(DeterminantTrace, RandomPsdSuite) {
  std::mt19937_64 g(23);
  for (int t = 0; t < 200; ++t) {
    const int d = 1 + t % 6;
    const auto s = oracle::random_psd(g, d);
    EXPECT_LE(s.determinant(), std::pow(s.trace() / d, d) * (1 + 1e-12));
  }
  for (int d = 1; d <= 6; ++d) {
    const Eigen::MatrixXd iso = 2.5 * Eigen::MatrixXd::Identity(d, d);
    EXPECT_NEAR(iso.determinant(), std::pow(iso.trace() / d, d), 1e-9 * std::pow(2.5, d));
  }
}

TEST(Report, FieldsAreConsistent) {
  ActivationSet set;
  set.num_classes = 2;
  ActivationBatch b;
  b.layer_name = "fc0";
  b.shape = {2};
  b.d = 2;
  b.data = {0, 0, 1, 1, 0, 1, 1, 0, 5, 5, 6, 6, 5, 6, 6, 5};
  b.labels = {0, 0, 0, 0, 1, 1, 1, 1};
  set.layers.push_back(b);
  const auto rep = entropy_report(set, 0.5, 10.0);
  ASSERT_EQ(rep.layers.size(), 1u);
  const auto& l = rep.layers[0];
  EXPECT_NEAR(rep.h_label, std::log(2.0), 1e-12);
  EXPECT_NEAR(rep.ln_k, std::log(2.0), 1e-12);
  EXPECT_NEAR(l.kappa, 2 * std::log(2.0), 1e-12);
  EXPECT_NEAR(l.gap, l.h_feat - l.h_dec, 1e-12);
  ASSERT_TRUE(l.lb_feat && l.lb_dec);
  EXPECT_NEAR(*l.lb_feat, 10.0 - l.sub_feat, 1e-12);
  EXPECT_NEAR(*l.lb_dec, 10.0 - l.sub_dec, 1e-12);
  // Classes are far apart relative to their radius: the decision bound wins.
  EXPECT_GT(*l.lb_dec, *l.lb_feat);
}

#include <gtest/gtest.h>

#include <random>

#include "gpz/error.hpp"
#include "gpz/repr_stats.hpp"
#include "oracles.hpp"

using namespace gpz;

namespace {

ActivationBatch make_batch(std::size_t d, std::vector<std::vector<double>> rows,
                           std::vector<std::uint32_t> labels) {
  ActivationBatch b;
  b.layer_name = "z";
  b.shape = {static_cast<std::uint32_t>(d)};
  b.d = d;
  for (const auto& r : rows)
    for (double v : r) b.data.push_back(static_cast<float>(v));
  b.labels = std::move(labels);
  return b;
}

ActivationBatch random_batch(std::uint64_t seed, std::size_t n, std::size_t d, std::uint32_t k) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<std::vector<double>> rows(n, std::vector<double>(d));
  std::vector<std::uint32_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = static_cast<std::uint32_t>(i % k);
    for (auto& v : rows[i]) v = nd(g) + 2.0 * labels[i];
  }
  return make_batch(d, rows, labels);
}

}  // namespace

TEST(ClassStats, TwoPointSymmetry) {
  const auto s = class_stats(make_batch(2, {{0, 0}, {2, 0}}, {0, 0}));
  ASSERT_EQ(s.classes.size(), 1u);
  EXPECT_DOUBLE_EQ(s.classes[0].mean[0], 1.0);
  EXPECT_DOUBLE_EQ(s.classes[0].mean[1], 0.0);
  EXPECT_DOUBLE_EQ(s.classes[0].r2, 1.0);
}

TEST(ClassStats, ConstantBatchIsDegenerate) {
  const auto s = class_stats(make_batch(2, {{3, 1}, {3, 1}, {3, 1}, {3, 1}}, {0, 1, 0, 1}));
  for (const auto& c : s.classes) EXPECT_EQ(c.r2, 0.0);
  EXPECT_EQ(s.sigma2_feat, 0.0);
}

TEST(ClassStats, MatchesTwoPassOracle) {
  const auto b = random_batch(3, 90, 5, 3);
  const auto s = class_stats(b);
  for (const auto& c : s.classes) {
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < b.size(); ++i)
      if (b.labels[i] == c.label) rows.emplace_back(b.row(i).begin(), b.row(i).end());
    const double ref = oracle::naive_r2(rows);
    EXPECT_NEAR(c.r2, ref, 1e-5 * ref);
  }
}

TEST(ClassStats, SmallClassesSkipped) {
  const auto s = class_stats(make_batch(1, {{0}, {1}, {5}}, {0, 0, 1}));
  ASSERT_EQ(s.classes.size(), 1u);
  ASSERT_EQ(s.skipped.size(), 1u);
  EXPECT_EQ(s.skipped[0], 1u);
  EXPECT_THROW(class_stats(make_batch(1, {{0}, {1}}, {0, 1})), InvalidArgument);
}

TEST(ClassStats, PermutationInvariance) {
  auto b = random_batch(4, 40, 3, 2);
  const auto s1 = class_stats(b);
  std::vector<std::size_t> perm(b.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = (i * 7) % perm.size();
  ActivationBatch p = b;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    p.labels[i] = b.labels[perm[i]];
    std::copy(b.row(perm[i]).begin(), b.row(perm[i]).end(), p.data.begin() + i * b.d);
  }
  const auto s2 = class_stats(p);
  EXPECT_NEAR(s1.sigma2_feat, s2.sigma2_feat, 1e-12);
  for (std::size_t c = 0; c < s1.classes.size(); ++c) EXPECT_NEAR(s1.classes[c].r2, s2.classes[c].r2, 1e-12);
}

TEST(ClassStats, TranslationAndScaling) {
  // Dyadic values keep the float32 storage exact under the transforms.
  auto b = make_batch(2, {{0, 1}, {2, 3}, {4, 4}, {1, 0}, {3, 2}, {0.5, 0.25}}, {0, 0, 0, 1, 1, 1});
  const auto s = class_stats(b);
  auto shifted = b;
  for (std::size_t i = 0; i < shifted.data.size(); ++i) shifted.data[i] += (i % 2 ? 8.0f : -4.0f);
  auto scaled = b;
  for (auto& v : scaled.data) v *= 2.0f;
  const auto st = class_stats(shifted);
  const auto ss = class_stats(scaled);
  EXPECT_NEAR(st.sigma2_feat, s.sigma2_feat, 1e-9);
  EXPECT_NEAR(ss.sigma2_feat, 4.0 * s.sigma2_feat, 1e-9);
  for (std::size_t c = 0; c < 2; ++c) {
    EXPECT_NEAR(st.classes[c].r2, s.classes[c].r2, 1e-9);
    EXPECT_NEAR(ss.classes[c].r2, 4.0 * s.classes[c].r2, 1e-9);
  }
}

TEST(ClassStats, LawOfTotalVariance) {
  const auto b = random_batch(5, 120, 4, 3);
  const auto s = class_stats(b);
  double within = 0.0, between = 0.0;
  for (const auto& c : s.classes) {
    within += static_cast<double>(c.count) * c.r2;
    for (std::size_t j = 0; j < s.d; ++j)
      between += static_cast<double>(c.count) * std::pow(c.mean[j] - s.grand_mean[j], 2);
  }
  const double total = static_cast<double>(s.batch_size * s.d) * s.sigma2_feat;
  EXPECT_NEAR(total, within + between, 1e-4 * total);
  EXPECT_GE(total, within);
}

TEST(NormalizedRadius, Examples) {
  EXPECT_DOUBLE_EQ(normalized_radius(8, 4), 2.0);
  EXPECT_DOUBLE_EQ(normalized_radius(0, 7), 0.0);
  EXPECT_THROW(normalized_radius(1, 0), InvalidArgument);
}

TEST(LayerProfiles, ShapesAndPurity) {
  ActivationSet set;
  set.num_classes = 3;
  set.layers.push_back(random_batch(6, 30, 4, 3));
  set.layers.push_back(set.layers[0]);
  set.layers[1].layer_name = "copy";
  const auto p = layer_profiles(set);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p[0].d, 4u);
  EXPECT_DOUBLE_EQ(p[0].r2, p[1].r2);
  EXPECT_NEAR(p[0].r2_norm, p[0].r2 / 4.0, 1e-9);
  EXPECT_FALSE(p[0].drop_pct.has_value());
  ASSERT_TRUE(p[1].drop_pct.has_value());
  EXPECT_DOUBLE_EQ(*p[1].drop_pct, 0.0);
  ActivationSet empty;
  EXPECT_THROW(layer_profiles(empty), InvalidArgument);
}

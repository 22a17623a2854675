// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gpz/cost_model.hpp"
#include "gpz/dynamics.hpp"
#include "gpz/entropy_bounds.hpp"
#include "gpz/error.hpp"
#include "gpz/gpz_locator.hpp"
#include "gpz/micronet.hpp"
#include "gpz/pipeline.hpp"
#include "gpz/repr_stats.hpp"
#include "gpz/rng.hpp"
#include "gpz/tensor_io.hpp"
#include "oracles.hpp"

#ifdef GPZ_HAVE_CLI
#include "gpz/cli.hpp"
#endif

using namespace gpz;

namespace {

// Tolerances.
constexpr double kTxExact = 0.0;
constexpr double kEinfTol = 1e-4;
constexpr double kEd2pTol = 0.01;
constexpr double kGfwTol = 1e-5;
constexpr double kBridgeValue = 6.024;
constexpr double kBridgeTol = 0.05;
constexpr double kIsoTol = 1e-9;
constexpr double kMaxEntSlack = 0.1;
constexpr double kGamma = 1e-2;
constexpr double kOracleC = 10.0;
constexpr double kRatioLo = 3.0, kRatioHi = 5.0;
constexpr double kHandTol = 1e-9;
constexpr double kEqualityTol = 1e-6;
constexpr double kSandwichRel = 1e-9;
constexpr double kMseRatio = 2.0;
constexpr double kFdRel = 1e-3;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (!pass) detail << "; ";
      detail << what;
      pass = false;
    }
  }
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(7);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------- 1
void cost_model_exactness(Outcome& o) {
  const std::size_t a[] = {256, 16, 16}, b[] = {512, 4, 4};
  o.require(std::abs(double(tx_bytes(a, Precision::fp32)) - 262144.0) <= kTxExact,
            "tx (256,16,16) fp32");
  o.require(std::abs(double(tx_bytes(b, Precision::fp32)) - 32768.0) <= kTxExact,
            "tx (512,4,4) fp32");
  const auto m = energy_metrics(498.6036, 500, 628.1730 / 498.6036, 1.826e9);
  o.require(std::abs(m.e_inf - 0.9972) <= kEinfTol, "e_inf " + fmt(m.e_inf));
  o.require(std::abs(m.ed2p - 791.4130) <= kEd2pTol, "ed2p " + fmt(m.ed2p));
  o.require(std::abs(m.gflops_per_watt - 0.003662) <= kGfwTol, "gflops/W " + fmt(m.gflops_per_watt));
  o.detail << "e_inf=" << fmt(m.e_inf) << " ed2p=" << fmt(m.ed2p)
           << " gflops/W=" << fmt(m.gflops_per_watt);
}

// ---------------------------------------------------------------- 2
void bridge_identity(Outcome& o) {
  Rng r(2024);
  std::vector<double> s(100000);
  for (auto& x : s) x = r.normal();
  const double h = quantized_entropy(s, 1, 0.01);
  o.require(std::abs(h - kBridgeValue) <= kBridgeTol, "H_quantized " + fmt(h));
  const auto ref = standard_gaussian_reference(1);
  const double deltas[] = {0.1, 0.05, 0.01};
  std::vector<double> kl;
  for (double d : deltas) kl.push_back(std::abs(kl_mismatch_estimate(s, 1, d, ref)));
  o.require(kl[0] > kl[1] && kl[1] > kl[2], "mismatch not monotone");
  o.detail << " H=" << fmt(h) << " |D| = " << fmt(kl[0]) << " > " << fmt(kl[1]) << " > "
           << fmt(kl[2]);
}

// ---------------------------------------------------------------- 3
void determinant_trace(Outcome& o) {
  std::mt19937_64 g(3);
  int bad = 0;
  for (int t = 0; t < 200; ++t) {
    const int d = 1 + t % 6;
    const auto s = oracle::random_psd(g, d);
    if (s.determinant() > std::pow(s.trace() / d, d) * (1 + 1e-12)) ++bad;
  }
  o.require(bad == 0, std::to_string(bad) + " det > (tr/d)^d");
  double worst_iso = 0.0;
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int d = 1; d <= 6; ++d) {
    const double c = u(g);
    const Eigen::MatrixXd iso = c * Eigen::MatrixXd::Identity(d, d);
    worst_iso = std::max(worst_iso, std::abs(iso.determinant() - std::pow(iso.trace() / d, d)) /
                                        std::pow(c, d));
  }
  o.require(worst_iso <= kIsoTol, "isotropic equality " + fmt(worst_iso));

  // Maximality: non-Gaussian samples never exceed the matched-variance Gaussian.
  Rng r(33);
  int exceed = 0;
  for (int t = 0; t < 5; ++t) {
    const double sep = 0.5 + t;
    std::vector<double> s(100000);
    double m = 0.0, m2 = 0.0;
    for (auto& x : s) {
      x = (r.uniform() < 0.5 ? -sep : sep) + 0.5 * r.normal();
      m += x;
      m2 += x * x;
    }
    const double var = m2 / s.size() - std::pow(m / s.size(), 2);
    const double h = quantized_entropy(s, 1, 0.01) - kappa_uniform(1, 0.01);
    if (h > gaussian_entropy(std::vector<double>{var}) + kMaxEntSlack) ++exceed;
  }
  o.require(exceed == 0, std::to_string(exceed) + " mixtures above Gaussian entropy");
  o.detail << " 200/200 PSD ok, isotropic err " << fmt(worst_iso) << ", 5/5 mixtures below";
}

// ---------------------------------------------------------------- 4
ClassBatch random_batch(std::mt19937_64& g) {
  std::uniform_int_distribution<std::size_t> kd(2, 5), dd(1, 8), nd(2, 10);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ClassBatch b;
  b.num_classes = kd(g);
  const std::size_t d = dd(g), n = nd(g);
  b.label = static_cast<std::uint32_t>(g() % b.num_classes);
  for (std::size_t i = 0; i < n; ++i) {
    DynamicsSample s;
    for (std::size_t j = 0; j < d; ++j) s.z.push_back(u(g));
    s.jacobian = oracle::random_matrix(g, b.num_classes, d, 1.0 / std::sqrt(double(d)));
    s.probs = oracle::random_simplex(g, b.num_classes);
    b.samples.push_back(std::move(s));
  }
  return b;
}

std::vector<std::vector<double>> batch_z(const ClassBatch& b) {
  std::vector<std::vector<double>> z;
  for (const auto& s : b.samples) z.push_back(s.z);
  return z;
}

void dynamics_vs_oracle(Outcome& o) {
  std::mt19937_64 g(4);
  const char* names[] = {"onehot", "ls", "prior"};
  double worst_err = 0.0, min_ratio = 1e9, max_ratio = 0.0;
  for (int which = 0; which < 3; ++which) {
    int over = 0, ratio_bad = 0;
    for (int t = 0; t < 100; ++t) {
      const auto b = random_batch(g);
      TargetScheme s;
      if (which == 1) s = TargetScheme::label_smoothing(0.3);
      if (which == 2) s = TargetScheme::prior_smoothing(0.3, oracle::random_simplex(g, b.num_classes));
      const auto grads = feature_gradients(b, s);
      const auto z = batch_z(b);
      const double e1 = std::abs(delta_r2_first_order(b, s, kGamma) - delta_r2_oracle(z, grads, kGamma));
      const double e2 = std::abs(delta_r2_first_order(b, s, kGamma / 2) -
                                 delta_r2_oracle(z, grads, kGamma / 2));
      worst_err = std::max(worst_err, e1);
      if (e1 > kOracleC * kGamma * kGamma) ++over;
      // Instances whose gradients are identical have no second-order term.
      if (e1 > 1e-13) {
        const double ratio = e1 / e2;
        min_ratio = std::min(min_ratio, ratio);
        max_ratio = std::max(max_ratio, ratio);
        if (ratio < kRatioLo || ratio > kRatioHi) ++ratio_bad;
      }
    }
    o.require(over == 0, std::string(names[which]) + ": " + std::to_string(over) + " above 10 gamma^2");
    o.require(ratio_bad == 0, std::string(names[which]) + ": " + std::to_string(ratio_bad) +
                                  " halving ratios outside [3,5]");
  }

  ClassBatch hand;
  hand.label = 0;
  hand.num_classes = 2;
  hand.samples.push_back({{1.0, 0.0}, Matrix::identity(2), {0.9, 0.1}});
  hand.samples.push_back({{-1.0, 0.0}, Matrix::identity(2), {0.5, 0.5}});
  const auto s = TargetScheme::onehot();
  const double pred = delta_r2_first_order(hand, s, 0.01);
  const double obs = delta_r2_oracle(batch_z(hand), feature_gradients(hand, s), 0.01);
  o.require(std::abs(pred + 0.004) <= kHandTol, "hand predicted " + fmt(pred));
  o.require(std::abs(obs + 0.003992) <= kHandTol, "hand oracle " + fmt(obs));
  o.detail << " worst |pred-oracle|=" << fmt(worst_err) << " ratios in [" << fmt(min_ratio) << ", "
           << fmt(max_ratio) << "] hand " << fmt(pred) << " / " << fmt(obs);
}

// ---------------------------------------------------------------- 5
void appendix_bounds(Outcome& o) {
  std::mt19937_64 g(5);
  const double alphas[] = {0.05, 0.1, 0.2, 0.3, 0.4};
  int onehot_bad = 0, ls_bad = 0;
  for (int t = 0; t < 10000; ++t) {
    const std::size_t k = 2 + t % 9;
    const auto p = oracle::random_simplex(g, k);
    const auto c = static_cast<std::uint32_t>(g() % k);
    const double alpha = alphas[(t / 9) % 5];
    const auto b = residual_norm_bounds(p, c, alpha);
    const auto q = target_row(c, TargetScheme::label_smoothing(alpha), k);
    std::vector<double> d(k), dt(k);
    for (std::size_t i = 0; i < k; ++i) {
      d[i] = p[i] - (i == c ? 1.0 : 0.0);
      dt[i] = p[i] - q[i];
    }
    if (oracle::norm(d) > b.onehot_ub + 1e-12) ++onehot_bad;
    if (b.epsilon < alpha && oracle::norm(dt) + 1e-12 < b.ls_lb) ++ls_bad;
  }
  o.require(onehot_bad == 0, std::to_string(onehot_bad) + " one-hot bound violations");
  o.require(ls_bad == 0, std::to_string(ls_bad) + " LS bound violations");

  const std::vector<double> p2{0.9, 0.1};
  const auto eq = residual_norm_bounds(p2, 0, 0.3);
  const auto q2 = target_row(0, TargetScheme::label_smoothing(0.3), 2);
  const double actual = std::hypot(p2[0] - q2[0], p2[1] - q2[1]);
  o.require(std::abs(eq.ls_lb - 0.282843) <= kEqualityTol && std::abs(actual - 0.282843) <= kEqualityTol,
            "K=2 equality " + fmt(eq.ls_lb) + " vs " + fmt(actual));

  int sandwich_bad = 0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t k = 1 + t % 5, d = 1 + t % 8;
    const auto j = oracle::random_matrix(g, k, d);
    std::vector<double> v(k);
    for (auto& x : v) x = std::normal_distribution<double>()(g);
    const auto gb = feature_grad_bounds(j, v);
    if (gb.lower > gb.measured * (1 + kSandwichRel) + 1e-12 ||
        gb.measured > gb.upper * (1 + kSandwichRel) + 1e-12)
      ++sandwich_bad;
  }
  o.require(sandwich_bad == 0, std::to_string(sandwich_bad) + " SVD sandwich violations");
  o.detail << " 10^4 simplex points ok, K=2 bound " << fmt(eq.ls_lb) << " = " << fmt(actual)
           << ", 200/200 sandwiches";
}

// ---------------------------------------------------------------- 6
ActivationSet width_proportional_dump() {
  ActivationSet set;
  set.num_classes = 2;
  const std::size_t dims[] = {8, 4, 2, 1};
  for (std::size_t l = 0; l < 4; ++l) {
    ActivationBatch b;
    b.layer_name = "fc" + std::to_string(l);
    b.d = dims[l];
    b.shape = {static_cast<std::uint32_t>(dims[l])};
    for (int cls = 0; cls < 2; ++cls)
      for (int sgn : {1, -1}) {
        for (std::size_t j = 0; j < b.d; ++j) b.data.push_back(cls * 5.0f + sgn * 0.7f);
        b.labels.push_back(cls);
      }
    set.layers.push_back(b);
  }
  return set;
}

void algorithm_one(Outcome& o, const PipelineResult& base, const PipelineConfig& cfg) {
  const double hand[] = {10, 9, 8.5, 2, 1.9};
  const auto r = locate(profiles_from_radii(hand), 0.20);
  o.require(r.transition_peak == 3 && r.localized, "hand-traced profile");

  const auto guard = locate(layer_profiles(width_proportional_dump()), 0.20);
  o.require(guard.max_drop_pct < 100.0 * 0.20, "guard peak " + fmt(guard.max_drop_pct));

  std::vector<GpzReport> reps;
  for (std::uint64_t s : {101u, 202u, 303u}) reps.push_back(locate_on_eval(base.model, cfg, s));
  const auto st = stability_check(reps);
  o.require(st.agreement == 1.0, "agreement " + fmt(st.agreement));
  o.require(st.mean_jaccard == 1.0, "jaccard " + fmt(st.mean_jaccard));
  o.detail << " hand l_TP=" << r.layers[r.transition_peak] << (r.localized ? " localized" : "")
           << ", guard max drop " << fmt(guard.max_drop_pct) << "%, eval l_TP "
           << reps[0].layers[reps[0].transition_peak] << ", agreement "
           << std::lround(st.agreement * 3) << "/3, jaccard " << fmt(st.mean_jaccard);
}

// ---------------------------------------------------------------- 7
void transition_analog(Outcome& o, const PipelineResult& base) {
  const auto& inv = base.inversion.layers;
  const std::size_t tp = base.gpz.transition_peak;
  o.require(inv.size() == base.gpz.layers.size(), "probe does not cover every layer");
  if (!o.pass) return;
  const double ratio = inv[tp].test_mse / inv[0].test_mse;
  std::size_t jump_at = 1;
  double best = -1e300;
  for (std::size_t i = 1; i < inv.size(); ++i) {
    const double inc = inv[i].test_mse - inv[i - 1].test_mse;
    if (inc > best) {
      best = inc;
      jump_at = i;
    }
  }
  const auto dist = jump_at > tp ? jump_at - tp : tp - jump_at;
  o.require(ratio >= kMseRatio, "MSE ratio " + fmt(ratio));
  o.require(dist <= 1, "largest increase at " + inv[jump_at].layer_name);
  o.detail << " l_TP=" << base.gpz.layers[tp] << " MSE";
  for (const auto& e : inv) o.detail << " " << e.layer_name << "=" << fmt(e.test_mse);
  o.detail << " ratio " << fmt(ratio) << ", largest increase into " << inv[jump_at].layer_name;
}

// ---------------------------------------------------------------- 8
void ls_contraction(Outcome& o) {
  int wins = 0;
  std::ostringstream per_seed;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    PipelineConfig oh;
    oh.seed = seed;
    PipelineConfig ls = oh;
    ls.scheme = TargetScheme::label_smoothing(0.3);
    const auto data = pipeline_data(oh);
    const auto m_oh = pipeline_train(oh, data).model;
    const auto m_ls = pipeline_train(ls, data).model;
    const auto layers = all_layers(m_oh);
    const auto p_oh = layer_profiles(extract(m_oh, data, layers));
    const auto p_ls = layer_profiles(extract(m_ls, data, layers));
    const std::size_t n = p_oh.size();
    const bool win = p_ls[n - 1].r2 < p_oh[n - 1].r2 && p_ls[n - 2].r2 < p_oh[n - 2].r2;
    wins += win;
    per_seed << " s" << seed << (win ? "+" : "-");
  }
  o.require(wins >= 4, std::to_string(wins) + "/5 seeds");
  o.detail << " " << wins << "/5 seeds:" << per_seed.str();
}

// ---------------------------------------------------------------- 9
void numerics(Outcome& o) {
  std::mt19937_64 g(9);
  std::uniform_real_distribution<double> u(0.0, 1.0), ub(-0.2, 0.2);
  double worst = 0.0;
  int jac_checked = 0;
  double worst_jac = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t widths[] = {4, 6, 5};
    auto m = init_model(widths, 3, 900 + trial);
    for (auto& l : m.layers)
      for (auto& b : l.bias) b = static_cast<float>(ub(g));
    std::vector<double> x(4);
    for (auto& v : x) v = u(g);
    const auto q = target_row(trial % 3, TargetScheme::label_smoothing(0.2), 3);
    const auto grads = parameter_gradients(m, x, q, LossKind::cross_entropy);
    for (std::size_t l = 0; l < m.num_layers(); ++l)
      for (std::size_t w = 0; w < m.layers[l].weights.size(); ++w) {
        const double h = 1e-4;
        const double fd = (oracle::naive_ce_shifted(m, x, q, l, w, h) -
                           oracle::naive_ce_shifted(m, x, q, l, w, -h)) / (2 * h);
        worst = std::max(worst, std::abs(fd - grads.weights[l][w]) / std::max(1.0, std::abs(fd)));
      }
    const auto t = forward(m, std::span<const double>(x));
    for (std::size_t layer = 0; layer + 1 < m.num_layers(); ++layer) {
      if (oracle::near_kink(m, x, layer)) continue;
      const auto j = jacobian(m, x, layer);
      const auto fd = oracle::fd_jacobian(m, layer, t.activations[layer]);
      for (std::size_t i = 0; i < j.data.size(); ++i)
        worst_jac = std::max(worst_jac, std::abs(j.data[i] - fd.data[i]) / std::max(1.0, std::abs(fd.data[i])));
      ++jac_checked;
    }
  }
  o.require(worst <= kFdRel, "backprop rel err " + fmt(worst));
  o.require(worst_jac <= kFdRel, "jacobian rel err " + fmt(worst_jac));
  o.require(jac_checked > 0, "no kink-free jacobian point");
  o.detail << " backprop rel err " << fmt(worst) << ", jacobian rel err " << fmt(worst_jac)
           << " over " << jac_checked << " points";
}

// ---------------------------------------------------------------- 10
std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

template <typename Decode>
bool rejects_at(Bytes bytes, std::size_t pos, Decode decode) {
  bytes[pos] ^= 0xA5;
  try {
    decode(bytes);
  } catch (const FormatError& e) {
    return e.offset() == pos || e.offset() == 0;
  }
  return false;
}

void io(Outcome& o, const PipelineResult& base) {
  const auto ds = encode_dataset(base.data);
  const auto md = encode_model(base.model);
  const auto ac = encode_activations(base.acts);
  o.require(decode_dataset(ds) == base.data && encode_dataset(decode_dataset(ds)) == ds,
            "dataset round-trip");
  o.require(decode_model(md) == base.model && encode_model(decode_model(md)) == md,
            "model round-trip");
  o.require(decode_activations(ac) == base.acts && encode_activations(decode_activations(ac)) == ac,
            "activation round-trip");
  for (std::size_t pos : {0u, 4u}) {
    o.require(rejects_at(ds, pos, decode_dataset), "dataset header byte " + std::to_string(pos));
    o.require(rejects_at(md, pos, decode_model), "model header byte " + std::to_string(pos));
    o.require(rejects_at(ac, pos, decode_activations), "dump header byte " + std::to_string(pos));
  }

#ifdef GPZ_HAVE_CLI
  namespace fs = std::filesystem;
  const auto root = fs::temp_directory_path() / "gpz-acceptance";
  fs::remove_all(root);
  for (const char* d : {"a", "b"}) {
    std::ostringstream out, err;
    const std::vector<std::string> args{"pipeline", "--seed", "7", "--out-dir", (root / d).string()};
    const int code = cli::run(args, out, err);
    o.require(code == 0, "pipeline exit " + std::to_string(code) + ": " + err.str());
  }
  std::size_t files = 0, same = 0;
  if (o.pass) {
    for (const auto& e : fs::directory_iterator(root / "a")) {
      ++files;
      same += slurp(e.path()) == slurp(root / "b" / e.path().filename());
    }
  }
  o.require(files > 0 && same == files, std::to_string(same) + "/" + std::to_string(files) +
                                            " pipeline outputs identical");
  fs::remove_all(root);
  o.detail << " round-trips bit-exact, header corruption rejected, pipeline seed 7 " << same << "/"
           << files << " files identical";
#else
  o.require(false, "built without the command-line front end");
#endif
}

}  // namespace

int main() {
  using clock = std::chrono::steady_clock;
  PipelineConfig cfg;
  cfg.seed = 0;
  std::optional<PipelineResult> base;

  auto need_base = [&]() -> const PipelineResult& {
    if (!base) base = run_pipeline(cfg);
    return *base;
  };

  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"cost-model exactness", cost_model_exactness},
      {"quantization bridge", bridge_identity},
      {"determinant-trace and Gaussian maximality", determinant_trace},
      {"first-order dynamics vs oracle", dynamics_vs_oracle},
      {"residual and feature-gradient bounds", appendix_bounds},
      {"zone locator and stability", [&](Outcome& o) { algorithm_one(o, need_base(), cfg); }},
      {"desk-scale transition analog", [&](Outcome& o) { transition_analog(o, need_base()); }},
      {"label-smoothing contraction", ls_contraction},
      {"backprop and jacobian numerics", numerics},
      {"binary I/O and reproducibility", [&](Outcome& o) { io(o, need_base()); }},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(clock::now() - t0).count();
    failed += !o.pass;
    std::printf("[%s] criterion %zu: %s (%.1fs) |%s\n", o.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first.c_str(), secs, o.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}

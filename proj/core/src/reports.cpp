#include "gpz/reports.hpp"

#include <cmath>

namespace gpz {

using nlohmann::json;

json json_number(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
  return v;
}

json json_number(const std::optional<double>& v) {
  return v ? json_number(*v) : json(nullptr);
}

json stats_json(const ActivationSet& acts) {
  json layers = json::array();
  for (const auto& batch : acts.layers) {
    const auto s = class_stats(batch);
    json per_class = json::array();
    for (const auto& c : s.classes) {
      per_class.push_back({{"c", c.label}, {"n", c.count}, {"r2", json_number(c.r2)}});
    }
    layers.push_back({{"layer", batch.layer_name},
                      {"d", s.d},
                      {"per_class", per_class},
                      {"skipped", s.skipped},
                      {"sigma2_feat", json_number(s.sigma2_feat)},
                      {"r2_avg", json_number(s.r2_class_avg)},
                      {"r2_norm", json_number(normalized_radius(s.r2_class_avg, s.d))}});
  }
  return {{"layers", layers}};
}

json bounds_json(const EntropyReport& report) {
  json layers = json::array();
  for (const auto& l : report.layers) {
    json cs = json::array();
    for (double h : l.class_surrogates) cs.push_back(json_number(h));
    layers.push_back({{"layer", l.layer},
                      {"d", l.d},
                      {"sigma2_feat", json_number(l.sigma2_feat)},
                      {"r2_max", json_number(l.r2_max)},
                      {"h_feat", json_number(l.h_feat)},
                      {"h_dec", json_number(l.h_dec)},
                      {"class_surrogates", cs},
                      {"gap", json_number(l.gap)},
                      {"kappa", json_number(l.kappa)},
                      {"sub_feat", json_number(l.sub_feat)},
                      {"sub_dec", json_number(l.sub_dec)},
                      {"lb_feat", json_number(l.lb_feat)},
                      {"lb_dec", json_number(l.lb_dec)}});
  }
  return {{"delta", json_number(report.delta)},
          {"K", report.num_classes},
          {"lnK", json_number(report.ln_k)},
          {"hY", json_number(report.h_label)},
          {"hX", json_number(report.hx)},
          {"layers", layers}};
}

json gpz_json(const GpzReport& r) {
  json drops = json::array();
  for (std::size_t i = 0; i < r.drops.size(); ++i) {
    drops.push_back({{"from", r.layers[i]}, {"to", r.layers[i + 1]}, {"pct", json_number(r.drops[i])}});
  }
  json zone = json::array();
  for (auto z : r.zone) zone.push_back(r.layers[z]);
  return {{"layers", r.layers},
          {"l_TS", r.layers[r.transition_start]},
          {"l_TP", r.layers[r.transition_peak]},
          {"l_TS_index", r.transition_start},
          {"l_TP_index", r.transition_peak},
          {"zone", zone},
          {"localized", r.localized},
          {"no_precursor", r.no_precursor},
          {"tau", json_number(r.tau)},
          {"max_drop_pct", json_number(r.max_drop_pct)},
          {"drops", drops}};
}

namespace {

json regime_json(const RegimeStats& s, bool present) {
  if (!present) return nullptr;
  return {{"count", s.count},
          {"frac_t_corr_pos", json_number(s.frac_t_corr_pos)},
          {"frac_t_corr_neg", json_number(s.frac_t_corr_neg)}};
}

}  // namespace

json dynamics_json(const DynamicsReport& report) {
  json classes = json::array();
  for (const auto& c : report.classes) {
    const auto& b = c.bounds;
    classes.push_back(
        {{"class", c.label},
         {"n", c.count},
         {"gamma", json_number(c.gamma)},
         {"pred", json_number(c.predicted)},
         {"oracle", json_number(c.oracle)},
         {"abs_err", json_number(c.abs_err)},
         {"t_corr_stats",
          {{"mean", json_number(c.t_corr_summary.mean)},
           {"min", json_number(c.t_corr_summary.min)},
           {"max", json_number(c.t_corr_summary.max)},
           {"frac_pos", json_number(c.t_corr_summary.frac_pos)},
           {"frac_neg", json_number(c.t_corr_summary.frac_neg)}}},
         {"angle_hist", c.angle_hist},
         {"angle_regimes",
          {{"under_target", regime_json(c.angles.under, c.angles.under_present)},
           {"over_target", regime_json(c.angles.over, c.angles.over_present)}}},
         {"bounds",
          {{"mean_epsilon", json_number(b.mean_epsilon)},
           {"mean_ls_residual_lb", json_number(b.mean_ls_residual_lb)},
           {"mean_onehot_residual_ub", json_number(b.mean_onehot_residual_ub)},
           {"mean_residual_norm", json_number(b.mean_residual_norm)},
           {"mean_proj_retention", json_number(b.mean_proj_retention)},
           {"min_proj_retention", json_number(b.min_proj_retention)},
           {"min_sigma_nonzero", json_number(b.min_sigma_nonzero)},
           {"max_sigma", json_number(b.max_sigma)},
           {"mean_feature_grad_lb", json_number(b.mean_feature_grad_lb)},
           {"mean_feature_grad", json_number(b.mean_feature_grad)},
           {"mean_feature_grad_ub", json_number(b.mean_feature_grad_ub)},
           {"violations", b.violations},
           {"near_rank_deficient", b.near_rank_deficient}}}});
  }
  return {{"layer", report.layer},
          {"scheme", report.scheme},
          {"gamma", json_number(report.gamma)},
          {"classes", classes}};
}

json inversion_json(const InversionReport& report) {
  const auto& c = report.config;
  json layers = json::array();
  for (const auto& e : report.layers) {
    layers.push_back({{"layer", e.layer_name},
                      {"layer_index", e.layer},
                      {"d", e.d},
                      {"decoder_arch", e.decoder_arch},
                      {"train_mse", json_number(e.train_mse)},
                      {"test_mse", json_number(e.test_mse)},
                      {"test_psnr", json_number(e.test_psnr)}});
  }
  return {{"config",
           {{"hidden", c.hidden},
            {"epochs", c.epochs},
            {"lr", json_number(c.lr)},
            {"batch", c.batch},
            {"seed", c.seed},
            {"aux_fraction", json_number(c.aux_fraction)},
            {"aux_size", report.aux_size},
            {"test_size", report.test_size}}},
          {"layers", layers}};
}

json cost_json(const CostReport& r) {
  json energy = nullptr;
  if (r.energy) {
    const auto& e = *r.energy;
    energy = {{"e_total", json_number(e.e_total)},
              {"n_iters", e.n_iters},
              {"t_window", json_number(e.t_window)},
              {"flops_per_inf", json_number(e.flops_per_inf)},
              {"e_inf", json_number(e.e_inf)},
              {"p_avg", json_number(e.p_avg)},
              {"gflops_per_watt", json_number(e.gflops_per_watt)},
              {"edp", json_number(e.edp)},
              {"ed2p", json_number(e.ed2p)}};
  }
  json j = {{"split_index", r.split_index},
            {"edge_flops", r.edge_flops},
            {"split_shape", r.split_shape},
            {"tx_bytes", r.tx_bytes},
            {"edge_params", r.edge_params},
            {"total_params", r.total_params},
            {"edge_share", json_number(r.edge_share)},
            {"act_peak_bytes", r.act_peak_bytes}};
  for (const char* k : {"e_total", "n_iters", "t_window", "e_inf", "p_avg", "gflops_per_watt", "edp", "ed2p"}) {
    j[k] = energy.is_null() ? json(nullptr) : energy[k];
  }
  return j;
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

}  // namespace gpz

#include <algorithm>
#include <cstdio>
#include <string>

#include "firecast/errors.hpp"
#include "firecast/pipeline.hpp"

namespace firecast::pipeline {

Report make_report(const PipelineConfig& cfg, const std::vector<scoring::CellSamples>& cells,
                   const std::vector<latent::HurdleCell>& test_cells) {
  if (cells.size() != test_cells.size()) throw DimensionError("report: predictive cells and test cells differ");
  std::vector<double> obs_count, obs_area;
  for (const auto& c : test_cells) {
    obs_count.push_back(c.count);
    obs_area.push_back(c.area);
  }
  Report r;
  r.scores = scoring::score_report(cells, obs_count, obs_area, cfg.score);
  r.exceed_count = scoring::exceedance_check(scoring::replicates_from_cells(cells, scoring::ScoreVariant::Count),
                                             obs_count, cfg.exceedance_count);
  r.exceed_area = scoring::exceedance_check(scoring::replicates_from_cells(cells, scoring::ScoreVariant::Area),
                                            obs_area, cfg.exceedance_area);
  return r;
}

namespace {

std::vector<ShapEntry> top_shap(const gbm::TreeEnsemble& model, const Eigen::MatrixXd& x, int top) {
  const auto v = gbm::mean_abs_shap(model, x);
  std::vector<ShapEntry> all;
  for (std::size_t i = 0; i < v.size(); ++i)
    all.push_back({i < model.feature_names.size() ? model.feature_names[i] : "f" + std::to_string(i), v[i]});
  std::stable_sort(all.begin(), all.end(), [](const ShapEntry& a, const ShapEntry& b) {
    return a.mean_abs != b.mean_abs ? a.mean_abs > b.mean_abs : a.feature < b.feature;
  });
  if (all.size() > static_cast<std::size_t>(top)) all.resize(top);
  return all;
}

}  // namespace

void add_shap(Report& report, const Dataset& data, const PipelineConfig& cfg, int horizon,
              const gbm::TreeEnsemble& count_model, const gbm::TreeEnsemble& area_model) {
  report.shap_count =
      top_shap(count_model, stage1_test_matrix(data, cfg, horizon, features::Variant::Count), cfg.shap_top);
  report.shap_area = top_shap(area_model, stage1_test_matrix(data, cfg, horizon, features::Variant::Area), cfg.shap_top);
}

std::string report_text(const Report& r) {
  std::string s = r.scores.to_text();
  auto rows = [&](const char* what, const std::vector<scoring::ExceedanceRow>& ex) {
    for (const auto& e : ex) {
      double mean = 0.0;
      for (double p : e.predictive) mean += p;
      mean /= static_cast<double>(std::max<std::size_t>(e.predictive.size(), 1));
      char buf[160];
      std::snprintf(buf, sizeof buf, "exceedance_%s threshold=%g empirical=%.6f predictive_mean=%.6f percentile=%.2f\n",
                    what, e.threshold, e.empirical, mean, e.percentile);
      s += buf;
    }
  };
  rows("count", r.exceed_count);
  rows("area", r.exceed_area);
  auto shap = [&](const char* what, const std::vector<ShapEntry>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "shap_%s %zu %s %.6g\n", what, i + 1, v[i].feature.c_str(), v[i].mean_abs);
      s += buf;
    }
  };
  shap("count", r.shap_count);
  shap("area", r.shap_area);
  return s;
}

std::string exceedance_csv(const Report& r) {
  std::string s = "variant,threshold,empirical,predictive_mean,predictive_q05,predictive_q95,percentile\n";
  auto rows = [&](const char* what, const std::vector<scoring::ExceedanceRow>& ex) {
    for (const auto& e : ex) {
      std::vector<double> p = e.predictive;
      std::sort(p.begin(), p.end());
      double mean = 0.0;
      for (double v : p) mean += v;
      mean /= static_cast<double>(p.size());
      const double q05 = p[static_cast<std::size_t>(0.05 * (p.size() - 1))];
      const double q95 = p[static_cast<std::size_t>(0.95 * (p.size() - 1))];
      s += std::string(what) + "," + format_double(e.threshold) + "," + format_double(e.empirical) + "," +
           format_double(mean) + "," + format_double(q05) + "," + format_double(q95) + "," +
           format_double(e.percentile) + "\n";
    }
  };
  rows("count", r.exceed_count);
  rows("area", r.exceed_area);
  return s;
}

std::string shap_csv(const Report& r) {
  std::string s = "model,rank,feature,mean_abs_shap\n";
  auto rows = [&](const char* what, const std::vector<ShapEntry>& v) {
    for (std::size_t i = 0; i < v.size(); ++i)
      s += std::string(what) + "," + std::to_string(i + 1) + "," + v[i].feature + "," + format_double(v[i].mean_abs) + "\n";
  };
  rows("count", r.shap_count);
  rows("area", r.shap_area);
  return s;
}

}  // namespace firecast::pipeline

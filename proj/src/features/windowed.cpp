#include <algorithm>
#include <cmath>
#include <string>

#include "firecast/errors.hpp"
#include "firecast/features.hpp"

namespace firecast::features {

void FeatureConfig::validate() const {
  if (window < 1) throw ParameterError("features: window must be >= 1");
  if (horizon < 1) throw ParameterError("features: horizon must be >= 1");
  int longest = 0;
  for (int j : lags) {
    if (j < 1) throw ParameterError("features: lags must be >= 1");
    longest = std::max(longest, j);
  }
  for (int j : ma_spans) {
    if (j < 1) throw ParameterError("features: moving-average spans must be >= 1");
    longest = std::max(longest, j);
  }
  for (int j : hist_spans)
    if (j < 1) throw ParameterError("features: historical spans must be >= 1");
  if (window < longest)
    throw ParameterError("features: window " + std::to_string(window) +
                         " is shorter than the longest lag or span " + std::to_string(longest));
}

void Covariates::validate(std::size_t n_units, int n_months) const {
  if (names.size() != values.size()) throw DimensionError("covariates: names and columns differ");
  for (std::size_t c = 0; c < values.size(); ++c)
    if (values[c].size() != n_units * static_cast<std::size_t>(n_months))
      throw DimensionError("covariates: column '" + names[c] + "' is not aligned with the panel");
}

namespace {

void append_ar_names(std::vector<std::string>& names, const FeatureConfig& cfg,
                     const std::string& prefix, const std::string& suffix) {
  for (int j : cfg.lags) names.push_back(prefix + "lag" + std::to_string(j) + suffix);
  for (int j : cfg.ma_spans) names.push_back(prefix + "ma" + std::to_string(j) + suffix);
  for (int j : cfg.hist_spans) names.push_back(prefix + "hist" + std::to_string(j) + suffix);
}

int fill_ar(Eigen::MatrixXd& x, Eigen::Index row, int col, std::span<const double> y, int anchor,
            const FeatureConfig& cfg) {
  for (int j : cfg.lags) x(row, col++) = lag_feature(y, anchor, j);
  for (int j : cfg.ma_spans) x(row, col++) = ma_feature(y, anchor, j);
  for (int j : cfg.hist_spans) x(row, col++) = hist_feature(y, anchor, j);
  return col;
}

}  // namespace

WindowedDataset build_windowed(const Panel& panel, const Covariates& env, const FeatureConfig& cfg,
                               Variant variant) {
  cfg.validate();
  panel.validate();
  const std::size_t S = panel.n_units();
  const int T = panel.n_months();
  env.validate(S, T);

  const std::string suffix = variant == Variant::Count ? "_count" : "_area";
  WindowedDataset out;
  out.variant = variant;
  out.feature_names = env.names;
  for (const char* n : {"month_sin", "month_cos", "year", "lon", "lat"}) out.feature_names.push_back(n);
  append_ar_names(out.feature_names, cfg, "", suffix);

  Panel dpanel;
  std::vector<std::size_t> didx;
  if (cfg.district_features) {
    dpanel = district_panel(panel);
    didx = district_index(panel);
    append_ar_names(out.feature_names, cfg, "district_", suffix);
  }

  const int first = cfg.window + cfg.horizon - 1;
  const int per_unit = std::max(0, T - first);
  const Eigen::Index n_rows = static_cast<Eigen::Index>(S) * per_unit;
  out.x.resize(n_rows, static_cast<Eigen::Index>(out.feature_names.size()));
  out.target.resize(n_rows);
  out.unit.reserve(n_rows);
  out.time.reserve(n_rows);

  Eigen::Index row = 0;
  for (std::size_t s = 0; s < S; ++s) {
    const auto y = variant == Variant::Count ? panel.count_series(s) : panel.area_series(s);
    for (int t = first; t < T; ++t, ++row) {
      const int anchor = t - cfg.horizon + 1;  // first month not observed at forecast time
      const int feat_t = anchor - 1;
      int col = 0;
      for (const auto& column : env.values) out.x(row, col++) = column[s * T + feat_t];
      const auto ang = cyclical_month(panel.window.month_of(t));
      out.x(row, col++) = ang.sin;
      out.x(row, col++) = ang.cos;
      out.x(row, col++) = panel.window.year_of(t);
      out.x(row, col++) = panel.units[s].lon;
      out.x(row, col++) = panel.units[s].lat;
      col = fill_ar(out.x, row, col, y, anchor, cfg);
      if (cfg.district_features) {
        const auto dy = variant == Variant::Count ? dpanel.count_series(didx[s])
                                                  : dpanel.area_series(didx[s]);
        col = fill_ar(out.x, row, col, dy, anchor, cfg);
      }
      out.target(row) = variant == Variant::Count ? y[t] : std::sqrt(y[t]);
      out.unit.push_back(s);
      out.time.push_back(t);
    }
  }
  return out;
}

}  // namespace firecast::features

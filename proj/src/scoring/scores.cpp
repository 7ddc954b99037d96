#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <string>

#include "firecast/errors.hpp"
#include "firecast/scoring.hpp"

namespace firecast::scoring {

namespace {

void check_increasing(const std::vector<double>& h, const char* what) {
  if (h.empty()) throw ParameterError(std::string(what) + " thresholds are empty");
  for (std::size_t i = 1; i < h.size(); ++i)
    if (!(h[i] > h[i - 1]))
      throw ParameterError(std::string(what) + " thresholds must be strictly increasing");
  if (!(h.front() >= 0.0)) throw ParameterError(std::string(what) + " thresholds must be >= 0");
}

}  // namespace

double count_weight_raw(double h) { return 1.0 - std::pow(1.0 + (h + 1.0) * (h + 1.0) / 1000.0, -0.25); }

double area_weight_raw(double h) { return 1.0 - std::pow(1.0 + (h + 1.0) / 1000.0, -0.25); }

void ScoreConfig::validate() const {
  check_increasing(count_thresholds, "count");
  check_increasing(area_thresholds, "area");
}

const std::vector<double>& ScoreConfig::thresholds(ScoreVariant v) const {
  return v == ScoreVariant::Count ? count_thresholds : area_thresholds;
}

std::vector<double> ScoreConfig::weights(ScoreVariant v) const {
  validate();
  const auto& h = thresholds(v);
  auto raw = v == ScoreVariant::Count ? count_weight_raw : area_weight_raw;
  const double norm = raw(h.back());
  std::vector<double> w(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) w[i] = raw(h[i]) / norm;
  return w;
}

double auc(const std::vector<int>& labels, const std::vector<double>& scores) {
  if (labels.size() != scores.size()) throw DimensionError("auc: labels and scores differ in length");
  const std::size_t n = labels.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // average ranks over tie groups, then Mann-Whitney U
  double rank_sum_pos = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      const int l = labels[idx[k]];
      if (l != 0 && l != 1) throw DomainError("auc: labels must be 0 or 1");
      if (l == 1) {
        rank_sum_pos += avg_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DomainError("auc: both classes must be present");
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

double crps_from_samples(std::vector<double> samples, double y, CrpsEstimator estimator) {
  const std::size_t n = samples.size();
  if (n == 0) throw DomainError("crps: no samples");
  if (estimator == CrpsEstimator::Fair && n < 2)
    throw DomainError("crps: the fair estimator needs at least two samples");
  std::sort(samples.begin(), samples.end());
  double abs_dev = 0.0, pair_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    abs_dev += std::abs(samples[i] - y);
    // sum_{i<j} (x_(j) - x_(i)) = sum_i x_(i) (2i - n + 1), 0-based
    pair_sum += samples[i] * (2.0 * static_cast<double>(i) - static_cast<double>(n) + 1.0);
  }
  const double nd = static_cast<double>(n);
  const double denom = estimator == CrpsEstimator::Fair ? nd * (nd - 1.0) : nd * nd;
  // 1/2 * mean over ordered pairs = (sum over unordered pairs) / denom
  const double out = abs_dev / nd - pair_sum / denom;
  return std::max(out, 0.0);
}

std::vector<double> empirical_cdf(const std::vector<double>& samples,
                                  const std::vector<double>& thresholds) {
  if (samples.empty()) throw DomainError("empirical_cdf: no samples");
  std::vector<double> sorted = samples;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> out(thresholds.size());
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    const auto it = std::upper_bound(sorted.begin(), sorted.end(), thresholds[k]);
    out[k] = static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
  }
  return out;
}

double binned_score(const std::vector<std::vector<double>>& cdfs, const std::vector<double>& obs,
                    const std::vector<double>& thresholds, const std::vector<double>& weights) {
  if (cdfs.size() != obs.size()) throw DimensionError("binned score: cells and observations differ");
  if (weights.size() != thresholds.size())
    throw DimensionError("binned score: weights and thresholds differ");
  double total = 0.0;
  for (std::size_t i = 0; i < cdfs.size(); ++i) {
    if (cdfs[i].size() != thresholds.size())
      throw DimensionError("binned score: CDF length does not match the thresholds");
    for (std::size_t k = 0; k < thresholds.size(); ++k) {
      const double ind = obs[i] <= thresholds[k] ? 1.0 : 0.0;
      const double r = cdfs[i][k] - ind;
      total += weights[k] * r * r;
    }
  }
  return total;
}

double weighted_binned_score(const std::vector<std::vector<double>>& cdfs,
                             const std::vector<double>& obs, const ScoreConfig& cfg,
                             ScoreVariant variant, bool weighted) {
  const auto& h = cfg.thresholds(variant);
  const std::vector<double> w = weighted ? cfg.weights(variant) : std::vector<double>(h.size(), 1.0);
  return binned_score(cdfs, obs, h, w);
}

void CellSamples::validate() const {
  if (z.empty()) throw DomainError("cell samples: empty");
  if (count.size() != z.size() || area.size() != z.size())
    throw DimensionError("cell samples: z, count and area must have equal length");
}

double CellSamples::fire_probability() const {
  validate();
  std::size_t k = 0;
  for (auto v : z) k += v != 0;
  return static_cast<double>(k) / static_cast<double>(z.size());
}

std::vector<double> CellSamples::unconditional_cdf(ScoreVariant v,
                                                   const std::vector<double>& thresholds) const {
  validate();
  const auto& vals = v == ScoreVariant::Count ? count : area;
  std::vector<double> uncond(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) uncond[k] = z[k] ? vals[k] : 0.0;
  return empirical_cdf(uncond, thresholds);
}

std::string ScoreReport::to_text() const {
  std::ostringstream os;
  char buf[64];
  auto row = [&](const char* name, double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << name << ' ' << buf << '\n';
  };
  row("auc", auc);
  row("crps", crps);
  row("rc_weighted", rc_weighted);
  row("rc_unweighted", rc_unweighted);
  row("rb_weighted", rb_weighted);
  row("rb_unweighted", rb_unweighted);
  return os.str();
}

ScoreReport score_report(const std::vector<CellSamples>& cells, const std::vector<double>& obs_count,
                         const std::vector<double>& obs_area, const ScoreConfig& cfg) {
  cfg.validate();
  if (cells.size() != obs_count.size() || cells.size() != obs_area.size())
    throw DimensionError("score report: cells and observations differ in length");
  if (cells.empty()) throw DomainError("score report: no cells");

  ScoreReport rep;
  rep.n_cells = cells.size();
  std::vector<int> labels(cells.size());
  std::vector<double> p(cells.size());
  std::vector<std::vector<double>> cdf_c(cells.size()), cdf_b(cells.size());
  double crps_sum = 0.0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    labels[i] = obs_count[i] > 0.0 ? 1 : 0;
    p[i] = c.fire_probability();
    cdf_c[i] = c.unconditional_cdf(ScoreVariant::Count, cfg.count_thresholds);
    cdf_b[i] = c.unconditional_cdf(ScoreVariant::Area, cfg.area_thresholds);
    if (obs_area[i] > 0.0) {
      std::vector<double> root(c.area.size());
      for (std::size_t k = 0; k < root.size(); ++k) root[k] = std::sqrt(c.area[k]);
      crps_sum += crps_from_samples(std::move(root), std::sqrt(obs_area[i]), cfg.crps_estimator);
      ++rep.n_fire_cells;
    }
  }
  rep.auc = auc(labels, p);
  rep.crps = rep.n_fire_cells ? crps_sum / static_cast<double>(rep.n_fire_cells) : 0.0;
  rep.rc_weighted = weighted_binned_score(cdf_c, obs_count, cfg, ScoreVariant::Count, true);
  rep.rc_unweighted = weighted_binned_score(cdf_c, obs_count, cfg, ScoreVariant::Count, false);
  rep.rb_weighted = weighted_binned_score(cdf_b, obs_area, cfg, ScoreVariant::Area, true);
  rep.rb_unweighted = weighted_binned_score(cdf_b, obs_area, cfg, ScoreVariant::Area, false);
  return rep;
}

}  // namespace firecast::scoring

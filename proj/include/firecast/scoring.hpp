#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace firecast::scoring {

enum class ScoreVariant { Count, Area };
enum class CrpsEstimator { Fair, Empirical };

struct ScoreConfig {
  std::vector<double> count_thresholds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 15, 20, 25, 30};
  std::vector<double> area_thresholds{0,   20,   40,   60,   80,    100,   200,   300,
                                      400, 500,  1000, 2000, 5000, 10000, 20000, 50000};
  CrpsEstimator crps_estimator = CrpsEstimator::Fair;

  void validate() const;
  const std::vector<double>& thresholds(ScoreVariant v) const;
  /// Normalised weights for every threshold of the variant.
  std::vector<double> weights(ScoreVariant v) const;
};

/// Raw (unnormalised) threshold weights.
double count_weight_raw(double h);
double area_weight_raw(double h);

/// Mann-Whitney AUC with ties counted one half. Throws DomainError when one class is absent.
double auc(const std::vector<int>& labels, const std::vector<double>& scores);

/// Sample CRPS: mean|X - y| - 1/2 mean|X - X'|. Fair divides the pair sum by n(n-1),
/// Empirical by n^2. Pair sums use the sorted-sample identity, so every pair is included.
double crps_from_samples(std::vector<double> samples, double y,
                         CrpsEstimator estimator = CrpsEstimator::Fair);

/// Empirical P(X <= h) for each threshold.
std::vector<double> empirical_cdf(const std::vector<double>& samples,
                                  const std::vector<double>& thresholds);

/// Sum over cells and thresholds of w(h) [cdf(h) - 1(y <= h)]^2.
/// cdfs[i] holds the predictive P(Y <= h) of cell i at each threshold.
double binned_score(const std::vector<std::vector<double>>& cdfs, const std::vector<double>& obs,
                    const std::vector<double>& thresholds, const std::vector<double>& weights);

double weighted_binned_score(const std::vector<std::vector<double>>& cdfs,
                             const std::vector<double>& obs, const ScoreConfig& cfg,
                             ScoreVariant variant, bool weighted);

/// Posterior predictive draws for one space-time cell of the hurdle model.
/// `count` and `area` are the conditional (positive) draws; the unconditional
/// value of draw k is z[k] * count[k].
struct CellSamples {
  std::vector<std::uint8_t> z;
  std::vector<double> count;
  std::vector<double> area;

  std::size_t size() const { return z.size(); }
  void validate() const;
  double fire_probability() const;
  /// Unconditional predictive P(Y <= h), zeros from the hurdle included.
  std::vector<double> unconditional_cdf(ScoreVariant v, const std::vector<double>& thresholds) const;
};

struct ScoreReport {
  double auc = 0.0;
  double crps = 0.0;  // conditional square-root area, cells with observed fire
  double rc_weighted = 0.0;
  double rc_unweighted = 0.0;
  double rb_weighted = 0.0;
  double rb_unweighted = 0.0;
  std::size_t n_cells = 0;
  std::size_t n_fire_cells = 0;

  /// One "name value" row per metric.
  std::string to_text() const;
};

ScoreReport score_report(const std::vector<CellSamples>& cells, const std::vector<double>& obs_count,
                         const std::vector<double>& obs_area, const ScoreConfig& cfg);

struct ExceedanceRow {
  double threshold = 0.0;
  double empirical = 0.0;
  std::vector<double> predictive;  // one rate per replicate
  double percentile = 0.0;         // mid-rank of empirical within predictive, in [0, 100]
};

/// replicates[r][i] is replicate r's value at cell i of the index set.
std::vector<ExceedanceRow> exceedance_check(const std::vector<std::vector<double>>& replicates,
                                            const std::vector<double>& obs,
                                            const std::vector<double>& thresholds);

/// Replicates of the unconditional counts or areas, one per draw index.
std::vector<std::vector<double>> replicates_from_cells(const std::vector<CellSamples>& cells,
                                                      ScoreVariant v);

}  // namespace firecast::scoring

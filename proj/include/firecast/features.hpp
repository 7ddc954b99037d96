#pragma once

#include <Eigen/Dense>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace firecast::features {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

struct FireEvent {
  std::string unit;
  std::string district;
  int year = 0;
  int month = 0;  // 1..12
  double area_ha = 0.0;
  double duration_h = 0.0;
};

/// Events are retained when area_ha >= min_area and duration_h >= min_duration.
struct EventFilter {
  double min_area = 1.0;
  double min_duration = 3.0;
};

struct UnitInfo {
  std::string id;
  std::string district;
  double lon = 0.0;
  double lat = 0.0;
};

struct StudyWindow {
  int start_year = 2001;
  int start_month = 1;
  int n_months = 0;

  /// Month index of (year, month), or -1 when outside the window.
  int index_of(int year, int month) const;
  int year_of(int t) const;
  int month_of(int t) const;  // 1..12
};

/// Complete unit x month grid of fire counts and burnt areas (row-major, s * T + t).
struct Panel {
  std::vector<UnitInfo> units;
  StudyWindow window;
  std::vector<double> count;
  std::vector<double> area;

  std::size_t n_units() const { return units.size(); }
  int n_months() const { return window.n_months; }
  double& count_at(std::size_t s, int t) { return count[s * window.n_months + t]; }
  double& area_at(std::size_t s, int t) { return area[s * window.n_months + t]; }
  double count_at(std::size_t s, int t) const { return count[s * window.n_months + t]; }
  double area_at(std::size_t s, int t) const { return area[s * window.n_months + t]; }
  std::span<const double> count_series(std::size_t s) const;
  std::span<const double> area_series(std::size_t s) const;
  std::size_t unit_index(const std::string& id) const;  // throws DomainError when unknown
  void validate() const;
};

Panel aggregate(const std::vector<FireEvent>& events, const std::vector<UnitInfo>& units,
                const StudyWindow& window, const EventFilter& filter = {});

/// Panel summed over the councils of each district; district ids sorted, centroid is the unit mean.
Panel district_panel(const Panel& panel);

/// Index of each council's district within district_panel(panel).units.
std::vector<std::size_t> district_index(const Panel& panel);

// Autoregressive features relative to a target time t: lag j is y[t - j],
// ma j averages y[t-1..t-j], hist j averages j-month windows centred on the
// same month one, two and three years earlier. Missing history yields kMissing.
double lag_feature(std::span<const double> y, int t, int j);
double ma_feature(std::span<const double> y, int t, int j);
double hist_feature(std::span<const double> y, int t, int j);

struct MonthAngle {
  double sin;
  double cos;
};
MonthAngle cyclical_month(int month);

enum class Variant { Count, Area };

struct FeatureConfig {
  int window = 36;
  std::vector<int> lags{1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<int> ma_spans{3, 6, 9, 12, 24, 36};
  std::vector<int> hist_spans{1, 3, 5};
  bool district_features = true;
  int horizon = 1;  // months between the last observed month and the target

  void validate() const;
};

/// Environmental covariates on the same grid as the panel: values[c][s * T + t].
struct Covariates {
  std::vector<std::string> names;
  std::vector<std::vector<double>> values;

  void validate(std::size_t n_units, int n_months) const;
};

struct WindowedDataset {
  Variant variant = Variant::Count;
  std::vector<std::string> feature_names;
  Eigen::MatrixXd x;             // rows x features, kMissing for absent history
  Eigen::VectorXd target;        // count, or square-root area for the area variant
  std::vector<std::size_t> unit;  // unit index of each row
  std::vector<int> time;          // target month index of each row

  std::size_t n_rows() const { return unit.size(); }
};

/// One row per unit and target month with at least `window + horizon - 1` months of history.
WindowedDataset build_windowed(const Panel& panel, const Covariates& env, const FeatureConfig& cfg,
                               Variant variant);

enum class AcfNormalisation {
  LagCount,  // lag-k cross products divided by N - k
  Biased     // divided by N
};

std::vector<double> acf(std::span<const double> series, int max_lag,
                        AcfNormalisation norm = AcfNormalisation::LagCount);

}  // namespace firecast::features

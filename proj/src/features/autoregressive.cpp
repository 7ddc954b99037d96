#include <cmath>
#include <numbers>

#include "firecast/errors.hpp"
#include "firecast/features.hpp"

namespace firecast::features {

namespace {

bool in_range(std::span<const double> y, int i) { return i >= 0 && i < static_cast<int>(y.size()); }

}  // namespace

double lag_feature(std::span<const double> y, int t, int j) {
  if (j < 1) throw ParameterError("lag: order must be >= 1");
  return in_range(y, t - j) ? y[t - j] : kMissing;
}

double ma_feature(std::span<const double> y, int t, int j) {
  if (j < 1) throw ParameterError("moving average: span must be >= 1");
  if (!in_range(y, t - j) || !in_range(y, t - 1)) return kMissing;
  double s = 0.0;
  for (int i = 1; i <= j; ++i) s += y[t - i];
  return s / j;
}

double hist_feature(std::span<const double> y, int t, int j) {
  if (j < 1) throw ParameterError("historical average: span must be >= 1");
  const int offset = (j + 1) / 2;
  double s = 0.0;
  for (int k = 1; k <= 3; ++k) {
    for (int i = 1; i <= j; ++i) {
      const int idx = t - 12 * k + i - offset;
      // the window must lie strictly before the target
      if (!in_range(y, idx) || idx >= t) return kMissing;
      s += y[idx];
    }
  }
  return s / (3.0 * j);
}

MonthAngle cyclical_month(int month) {
  if (month < 1 || month > 12) throw DomainError("cyclical month: month must lie in 1..12");
  const double a = 2.0 * std::numbers::pi * month / 12.0;
  return {std::sin(a), std::cos(a)};
}

std::vector<double> acf(std::span<const double> series, int max_lag, AcfNormalisation norm) {
  const int n = static_cast<int>(series.size());
  if (max_lag < 0) throw ParameterError("acf: max_lag must be >= 0");
  if (n <= max_lag) throw DomainError("acf: series must be longer than max_lag");
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= n;
  double c0 = 0.0;
  for (double v : series) c0 += (v - mean) * (v - mean);
  c0 /= n;
  if (!(c0 > 0.0)) throw DomainError("acf: series is constant");
  std::vector<double> out(max_lag + 1);
  for (int k = 0; k <= max_lag; ++k) {
    double ck = 0.0;
    for (int t = 0; t + k < n; ++t) ck += (series[t] - mean) * (series[t + k] - mean);
    ck /= norm == AcfNormalisation::LagCount ? (n - k) : n;
    out[k] = ck / c0;
  }
  out[0] = 1.0;
  return out;
}

}  // namespace firecast::features

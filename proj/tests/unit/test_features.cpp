#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "firecast/errors.hpp"
#include "firecast/features.hpp"

using namespace firecast;
using namespace firecast::features;

namespace {

std::vector<UnitInfo> two_units() {
  return {{"a", "D1", 1.0, 2.0}, {"b", "D1", 3.0, 4.0}};
}

Panel random_panel(std::size_t S, int T, std::uint64_t seed, int n_districts = 2) {
  std::mt19937_64 rng(seed);
  std::poisson_distribution<int> pois(1.2);
  std::exponential_distribution<double> ex(0.1);
  Panel p;
  p.window = {2001, 1, T};
  for (std::size_t s = 0; s < S; ++s)
    p.units.push_back({"u" + std::to_string(s), "d" + std::to_string(s % n_districts),
                       double(s), -double(s)});
  p.count.assign(S * T, 0.0);
  p.area.assign(S * T, 0.0);
  for (std::size_t i = 0; i < S * T; ++i) {
    p.count[i] = pois(rng);
    p.area[i] = p.count[i] > 0 ? p.count[i] * (1.0 + ex(rng)) : 0.0;
  }
  return p;
}

Covariates random_env(std::size_t S, int T, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Covariates c;
  c.names = {"temp", "fwi"};
  c.values.assign(2, std::vector<double>(S * T));
  for (auto& col : c.values)
    for (auto& v : col) v = nd(rng);
  return c;
}

bool same(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

}  // namespace

TEST_CASE("study window indexing") {
  const StudyWindow w{2001, 3, 30};
  CHECK(w.index_of(2001, 3) == 0);
  CHECK(w.index_of(2002, 3) == 12);
  CHECK(w.index_of(2001, 2) == -1);
  CHECK(w.index_of(2003, 9) == -1);
  CHECK(w.month_of(10) == 1);
  CHECK(w.year_of(10) == 2002);
}

TEST_CASE("aggregate examples") {
  const StudyWindow w{2001, 1, 12};
  const Panel empty = aggregate({}, two_units(), w);
  CHECK(std::all_of(empty.count.begin(), empty.count.end(), [](double v) { return v == 0.0; }));
  CHECK(empty.count.size() == 24);

  std::vector<FireEvent> ev{{"a", "D1", 2001, 5, 2.0, 4.0},
                            {"a", "D1", 2001, 5, 5.0, 10.0},
                            {"a", "D1", 2001, 5, 0.5, 10.0},
                            {"b", "D1", 2001, 6, 3.0, 1.0}};
  const Panel p = aggregate(ev, two_units(), w);
  CHECK(p.count_at(0, 4) == 2.0);
  CHECK(p.area_at(0, 4) == 7.0);
  CHECK(p.count_at(1, 5) == 0.0);  // duration below 3 h
  p.validate();

  CHECK_THROWS_AS(aggregate({{"zz", "D1", 2001, 1, 2, 4}}, two_units(), w), DomainError);
  CHECK_THROWS_AS(aggregate({{"a", "D1", 2005, 1, 2, 4}}, two_units(), w), DomainError);
  const Panel all = aggregate(ev, two_units(), w, {0.0, 0.0});
  CHECK(all.count_at(0, 4) == 3.0);
  CHECK(all.count_at(1, 5) == 1.0);
}

TEST_CASE("aggregation conserves retained events and ignores input order") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> mon(1, 12), unit(0, 1);
  std::uniform_real_distribution<double> ar(0.0, 20.0), du(0.0, 10.0);
  std::vector<FireEvent> ev;
  double kept_area = 0.0;
  int kept = 0;
  for (int i = 0; i < 300; ++i) {
    FireEvent e{unit(rng) ? "a" : "b", "D1", 2001, mon(rng), ar(rng), du(rng)};
    if (e.area_ha >= 1.0 && e.duration_h >= 3.0) {
      ++kept;
      kept_area += e.area_ha;
    }
    ev.push_back(e);
  }
  const StudyWindow w{2001, 1, 12};
  const Panel p = aggregate(ev, two_units(), w);
  double c = 0.0, a = 0.0;
  for (std::size_t i = 0; i < p.count.size(); ++i) {
    c += p.count[i];
    a += p.area[i];
  }
  CHECK(c == kept);
  CHECK(a == doctest::Approx(kept_area).epsilon(1e-12));

  std::shuffle(ev.begin(), ev.end(), rng);
  const Panel q = aggregate(ev, two_units(), w);
  CHECK(q.count == p.count);
  for (std::size_t i = 0; i < p.area.size(); ++i) CHECK(q.area[i] == doctest::Approx(p.area[i]).epsilon(1e-13));
}

TEST_CASE("lag, moving average and historical features") {
  std::vector<double> y(48);
  for (int i = 0; i < 48; ++i) y[i] = i * i % 17;
  const int t = 40;
  CHECK(lag_feature(y, t, 1) == y[39]);
  CHECK(lag_feature(y, t, 9) == y[31]);
  CHECK(ma_feature(y, t, 1) == lag_feature(y, t, 1));
  CHECK(ma_feature(y, t, 3) == doctest::Approx((y[39] + y[38] + y[37]) / 3.0));
  CHECK(hist_feature(y, t, 1) == doctest::Approx((y[28] + y[16] + y[4]) / 3.0));
  // j = 3, offset 2: months t-12k-1 .. t-12k+1
  double h3 = 0.0;
  for (int k = 1; k <= 3; ++k)
    for (int d = -1; d <= 1; ++d) h3 += y[t - 12 * k + d];
  CHECK(hist_feature(y, t, 3) == doctest::Approx(h3 / 9.0));
  CHECK(std::isnan(lag_feature(y, 3, 4)));
  CHECK(std::isnan(ma_feature(y, 5, 6)));
  CHECK(std::isnan(hist_feature(y, 36, 5)));  // needs month 36 - 38 < 0
  CHECK(!std::isnan(hist_feature(y, 38, 5)));
  CHECK_THROWS_AS(lag_feature(y, t, 0), ParameterError);

  const std::vector<double> c(60, 2.5);
  for (int j : {1, 3, 5}) CHECK(hist_feature(c, 50, j) == doctest::Approx(2.5));
  for (int j : {1, 6, 24}) {
    CHECK(lag_feature(c, 50, j) == 2.5);
    CHECK(ma_feature(c, 50, j) == doctest::Approx(2.5));
  }
}

TEST_CASE("cyclical month encoding") {
  CHECK(cyclical_month(3).sin == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(cyclical_month(3).cos) < 1e-15);
  CHECK(std::abs(cyclical_month(12).sin) < 1e-12);
  CHECK(std::abs(cyclical_month(12).cos - 1.0) < 1e-12);
  for (int m = 1; m <= 12; ++m) {
    const auto a = cyclical_month(m);
    CHECK(a.sin * a.sin + a.cos * a.cos == doctest::Approx(1.0).epsilon(1e-15));
  }
  CHECK_THROWS_AS(cyclical_month(0), DomainError);
}

TEST_CASE("windowed dataset shape and first target month") {
  const Panel p = random_panel(2, 40, 1, 1);
  const Covariates env = random_env(2, 40, 2);
  FeatureConfig cfg;
  const auto ds = build_windowed(p, env, cfg, Variant::Count);
  CHECK(ds.n_rows() == 2u * (40 - 36));
  CHECK(ds.x.rows() == 8);
  CHECK(ds.time.front() + 1 == 37);  // one-based month 37
  CHECK(ds.feature_names.size() == 2 + 5 + 2 * (9 + 6 + 3));
  CHECK(ds.x.cols() == static_cast<Eigen::Index>(ds.feature_names.size()));

  // the area variant targets the square root
  const auto db = build_windowed(p, env, cfg, Variant::Area);
  for (std::size_t r = 0; r < db.n_rows(); ++r)
    CHECK(db.target(r) == doctest::Approx(std::sqrt(p.area_at(db.unit[r], db.time[r]))));
  CHECK(db.feature_names.back() == "district_hist5_area");

  FeatureConfig bad;
  bad.window = 12;
  CHECK_THROWS_AS(build_windowed(p, env, bad, Variant::Count), ParameterError);
  Covariates short_env = env;
  short_env.values[0].pop_back();
  CHECK_THROWS_AS(build_windowed(p, short_env, cfg, Variant::Count), DimensionError);
}

TEST_CASE("windowed rows count S*(T-w) and carry the expected values") {
  const std::size_t S = 5;
  const int T = 50;
  const Panel p = random_panel(S, T, 3);
  const Covariates env = random_env(S, T, 4);
  FeatureConfig cfg;
  cfg.window = 24;
  cfg.ma_spans = {3, 6, 12, 24};
  const auto ds = build_windowed(p, env, cfg, Variant::Count);
  CHECK(ds.n_rows() == S * (T - 24));
  const auto col = [&](const std::string& n) {
    return std::find(ds.feature_names.begin(), ds.feature_names.end(), n) - ds.feature_names.begin();
  };
  for (std::size_t r = 0; r < ds.n_rows(); r += 7) {
    const auto s = ds.unit[r];
    const int t = ds.time[r];
    CHECK(ds.x(r, col("temp")) == env.values[0][s * T + t - 1]);
    CHECK(ds.x(r, col("lag1_count")) == p.count_at(s, t - 1));
    CHECK(ds.x(r, col("year")) == p.window.year_of(t));
    CHECK(ds.x(r, col("lon")) == p.units[s].lon);
    CHECK(ds.target(r) == p.count_at(s, t));
  }
}

TEST_CASE("causality: values at or after the target never change a row") {
  const std::size_t S = 3;
  const int T = 45;
  const Panel p = random_panel(S, T, 5);
  const Covariates env = random_env(S, T, 6);
  FeatureConfig cfg;
  const auto base = build_windowed(p, env, cfg, Variant::Area);
  std::mt19937_64 rng(7);
  for (std::size_t r = 0; r < base.n_rows(); ++r) {
    const int t = base.time[r];
    Panel q = p;
    Covariates e2 = env;
    for (std::size_t s = 0; s < S; ++s)
      for (int u = t; u < T; ++u) {
        q.count_at(s, u) += 3.0;
        q.area_at(s, u) += 11.0;
        for (auto& c : e2.values) c[s * T + u] += 1.0;
      }
    const auto pert = build_windowed(q, e2, cfg, Variant::Area);
    for (Eigen::Index c = 0; c < base.x.cols(); ++c) CHECK(same(base.x(r, c), pert.x(r, c)));
  }
}

TEST_CASE("horizon shifts the information set") {
  const Panel p = random_panel(2, 48, 8);
  const Covariates env = random_env(2, 48, 9);
  FeatureConfig cfg;
  cfg.window = 12;
  cfg.ma_spans = {3, 12};
  cfg.horizon = 3;
  const auto ds = build_windowed(p, env, cfg, Variant::Count);
  CHECK(ds.n_rows() == 2u * (48 - 12 - 2));
  CHECK(ds.x(0, 0) == env.values[0][ds.time[0] - 3]);
  CHECK(ds.x(0, 7) == p.count_at(0, ds.time[0] - 3));  // lag1 column
}

TEST_CASE("district features equal council features of the district-summed panel") {
  const Panel p = random_panel(6, 40, 10, 2);
  const Panel d = district_panel(p);
  CHECK(d.n_units() == 2);
  for (int t = 0; t < 40; ++t) {
    double sum = 0.0;
    for (std::size_t s = 0; s < 6; s += 2) sum += p.count_at(s, t);
    CHECK(d.count_at(0, t) == sum);
  }
  const Covariates env = random_env(6, 40, 11);
  const auto ds = build_windowed(p, env, FeatureConfig{}, Variant::Count);
  const auto it = std::find(ds.feature_names.begin(), ds.feature_names.end(), "district_ma9_count");
  const auto c = it - ds.feature_names.begin();
  const auto didx = district_index(p);
  for (std::size_t r = 0; r < ds.n_rows(); ++r)
    CHECK(same(ds.x(r, c), ma_feature(d.count_series(didx[ds.unit[r]]), ds.time[r], 9)));
}

TEST_CASE("acf") {
  std::vector<double> sinus(144);
  for (int i = 0; i < 144; ++i) sinus[i] = std::sin(2.0 * std::numbers::pi * i / 12.0);
  const auto r = acf(sinus, 12);
  CHECK(r[0] == 1.0);
  CHECK(std::abs(r[12] - 1.0) < 0.02);
  CHECK(std::abs(r[6] + 1.0) < 0.02);
  const auto rb = acf(sinus, 12, AcfNormalisation::Biased);
  CHECK(rb[12] == doctest::Approx(132.0 / 144.0).epsilon(1e-3));

  std::mt19937_64 rng(12);
  std::normal_distribution<double> nd;
  std::vector<double> wn(10000);
  for (auto& v : wn) v = nd(rng);
  const auto rw = acf(wn, 24);
  for (int j = 1; j <= 24; ++j) CHECK(std::abs(rw[j]) < 0.05);
  CHECK_THROWS_AS(acf(std::vector<double>(5, 1.0), 2), DomainError);
  CHECK_THROWS_AS(acf(wn, 20000), DomainError);
}

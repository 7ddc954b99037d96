#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <map>
#include <string>

#include "firecast/errors.hpp"
#include "firecast/pipeline.hpp"
#include "firecast/random.hpp"

namespace firecast::pipeline {

using nlohmann::json;

namespace {

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  return out;
}

Eigen::VectorXd take(const Eigen::VectorXd& y, const std::vector<Eigen::Index>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = y[rows[i]];
  return out;
}

struct Split {
  std::vector<Eigen::Index> train, test;
};

// Rows ordered by (time, unit) within each span.
Split split_rows(const features::WindowedDataset& ds, const PipelineConfig& cfg) {
  Split s;
  for (std::size_t r = 0; r < ds.n_rows(); ++r) {
    const int t = ds.time[r];
    if (t <= cfg.train_end) s.train.push_back(static_cast<Eigen::Index>(r));
    else if (t >= cfg.test_start && t <= cfg.test_end) s.test.push_back(static_cast<Eigen::Index>(r));
  }
  auto by_time = [&](Eigen::Index a, Eigen::Index b) {
    return std::pair(ds.time[a], ds.unit[a]) < std::pair(ds.time[b], ds.unit[b]);
  };
  std::sort(s.train.begin(), s.train.end(), by_time);
  std::sort(s.test.begin(), s.test.end(), by_time);
  return s;
}

const char* provenance_name(Provenance p) { return p == Provenance::OutOfFold ? "oof" : "test"; }

}  // namespace

features::WindowedDataset stage1_dataset(const Dataset& data, const PipelineConfig& cfg, int horizon,
                                         features::Variant variant) {
  features::FeatureConfig fc = cfg.features;
  fc.horizon = horizon;
  return features::build_windowed(data.panel, data.covariates, fc, variant);
}

Eigen::MatrixXd stage1_test_matrix(const Dataset& data, const PipelineConfig& cfg, int horizon,
                                   features::Variant variant) {
  const auto ds = stage1_dataset(data, cfg, horizon, variant);
  return take_rows(ds.x, split_rows(ds, cfg).test);
}

Stage1Result run_stage1(const Dataset& data, const PipelineConfig& cfg, int horizon) {
  cfg.validate();
  Stage1Result out;
  std::vector<std::pair<std::size_t, int>> keys_train, keys_test;
  Eigen::VectorXd fc[2][2];  // [variant][train/test]
  for (int v = 0; v < 2; ++v) {
    const auto variant = v == 0 ? features::Variant::Count : features::Variant::Area;
    const auto ds = stage1_dataset(data, cfg, horizon, variant);
    const Split sp = split_rows(ds, cfg);
    if (sp.train.size() < static_cast<std::size_t>(cfg.n_folds))
      throw DimensionError("stage 1: too few training rows (" + std::to_string(sp.train.size()) +
                           "); the feature window leaves no history before train_end");
    if (sp.test.empty()) throw DimensionError("stage 1: no test rows in the test range");
    std::vector<std::pair<std::size_t, int>> ktr, kte;
    for (auto r : sp.train) ktr.emplace_back(ds.unit[r], ds.time[r]);
    for (auto r : sp.test) kte.emplace_back(ds.unit[r], ds.time[r]);
    if (v == 0) {
      keys_train = ktr;
      keys_test = kte;
    } else if (ktr != keys_train || kte != keys_test) {
      throw DimensionError("stage 1: count and area datasets cover different cells");
    }
    const Eigen::MatrixXd xtr = take_rows(ds.x, sp.train);
    const Eigen::VectorXd ytr = take(ds.target, sp.train);
    const auto& grid = v == 0 ? cfg.count_grid : cfg.area_grid;
    const auto cv = gbm::superlearner_cv(xtr, ytr, grid, cfg.n_folds, derive_seed(cfg.seed, 100 * horizon + v),
                                         ds.feature_names);
    fc[v][0] = cv.oof;
    fc[v][1] = cv.final_model.predict(take_rows(ds.x, sp.test));
    (v == 0 ? out.count_model : out.area_model) = cv.final_model;
    (v == 0 ? out.count_cv : out.area_cv) = cv.cv_deviance;
    (v == 0 ? out.count_best : out.area_best) = cv.best;
  }
  for (int span = 0; span < 2; ++span) {
    const auto& keys = span == 0 ? keys_train : keys_test;
    for (std::size_t i = 0; i < keys.size(); ++i) {
      ForecastRecord r;
      r.unit = keys[i].first;
      r.time = keys[i].second;
      r.fc_count = fc[0][span][static_cast<Eigen::Index>(i)];
      r.fc_area = fc[1][span][static_cast<Eigen::Index>(i)];
      r.provenance = span == 0 ? Provenance::OutOfFold : Provenance::Test;
      out.records.push_back(r);
    }
  }
  return out;
}

std::string forecasts_csv(const std::vector<ForecastRecord>& records, const features::Panel& panel) {
  std::string s = "unit,year,month,provenance,fc_count,fc_root_area\n";
  for (const auto& r : records)
    s += panel.units.at(r.unit).id + "," + std::to_string(panel.window.year_of(r.time)) + "," +
         std::to_string(panel.window.month_of(r.time)) + "," + provenance_name(r.provenance) + "," +
         format_double(r.fc_count) + "," + format_double(r.fc_area) + "\n";
  return s;
}

std::vector<ForecastRecord> read_forecasts(const std::filesystem::path& p, const features::Panel& panel) {
  const std::string text = read_text(p);
  std::vector<ForecastRecord> out;
  std::size_t pos = text.find('\n');
  if (pos == std::string::npos || text.compare(0, pos, "unit,year,month,provenance,fc_count,fc_root_area") != 0)
    throw ConfigError(p.string() + ": not a forecast file");
  int line = 1;
  while (++pos < text.size()) {
    ++line;
    const std::size_t end = text.find('\n', pos);
    const std::string row = text.substr(pos, end - pos);
    pos = end == std::string::npos ? text.size() : end;
    if (row.empty()) continue;
    std::vector<std::string> f;
    std::size_t b = 0;
    for (std::size_t c; (c = row.find(',', b)) != std::string::npos; b = c + 1) f.push_back(row.substr(b, c - b));
    f.push_back(row.substr(b));
    if (f.size() != 6) throw ConfigError(p.string() + ":" + std::to_string(line) + ": expected 6 fields");
    ForecastRecord r;
    try {
      r.unit = panel.unit_index(f[0]);
      r.time = panel.window.index_of(std::stoi(f[1]), std::stoi(f[2]));
      if (f[3] == "oof") r.provenance = Provenance::OutOfFold;
      else if (f[3] == "test") r.provenance = Provenance::Test;
      else throw ConfigError("unknown provenance '" + f[3] + "'");
      r.fc_count = std::stod(f[4]);
      r.fc_area = std::stod(f[5]);
    } catch (const std::logic_error& e) {
      throw ConfigError(p.string() + ":" + std::to_string(line) + ": " + e.what());
    }
    if (r.time < 0) throw ConfigError(p.string() + ":" + std::to_string(line) + ": month outside the window");
    out.push_back(r);
  }
  return out;
}

latent::HurdleInputs hurdle_inputs(const Dataset& data, const std::vector<ForecastRecord>& records,
                                   const PipelineConfig& cfg) {
  latent::HurdleInputs in;
  in.council_graph = data.council_graph;
  in.district_graph = data.district_graph;
  in.unit_district = data.unit_district;
  const auto& panel = data.panel;
  for (const auto& r : records) {
    latent::HurdleCell c;
    c.unit = static_cast<int>(r.unit);
    c.time = r.time;
    c.month = panel.window.month_of(r.time);
    c.year = panel.window.year_of(r.time);
    c.count = panel.count_at(r.unit, r.time);
    c.area = panel.area_at(r.unit, r.time);
    c.fc_count = r.fc_count;
    c.fc_area = r.fc_area;
    if (r.provenance == Provenance::OutOfFold) {
      if (r.time > cfg.train_end)
        throw DomainError("stage 2: out-of-fold forecast at " + format_month(r.time, panel.window) +
                          " lies after train_end");
      in.train.push_back(c);
    } else {
      if (r.time < cfg.test_start || r.time > cfg.test_end)
        throw DomainError("stage 2: test forecast at " + format_month(r.time, panel.window) +
                          " lies outside the test range");
      in.test.push_back(c);
    }
  }
  return in;
}

Stage2Result run_stage2(const Dataset& data, const std::vector<ForecastRecord>& records, const PipelineConfig& cfg) {
  cfg.validate();
  const auto in = hurdle_inputs(data, records, cfg);
  Stage2Result out;
  out.hurdle = latent::assemble(in, cfg.hurdle);
  out.fit = latent::hyper_grid(out.hurdle.model, cfg.grid);
  out.test_cells = in.test;
  return out;
}

Stage2Result load_stage2(const Dataset& data, const std::vector<ForecastRecord>& records, const PipelineConfig& cfg,
                         const std::string& model_text, const std::string& fit_text) {
  const auto in = hurdle_inputs(data, records, cfg);
  Stage2Result out;
  out.hurdle = latent::assemble(in, cfg.hurdle);
  if (latent::model_to_json(out.hurdle.model) != model_text)
    throw ConfigError("stored latent model does not match the forecasts and config");
  out.fit = latent::fit_from_json(fit_text, out.hurdle.model);
  out.test_cells = in.test;
  return out;
}

latent::PredictiveDraws run_forecast(const Stage2Result& s2, const PipelineConfig& cfg, int horizon) {
  return latent::posterior_predictive(s2.hurdle.model, s2.fit, s2.hurdle.test, cfg.n_samples,
                                      derive_seed(cfg.seed, 1000 + horizon));
}

std::vector<scoring::CellSamples> cell_samples(const latent::PredictiveDraws& draws) {
  std::vector<scoring::CellSamples> out(draws.z.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].z = draws.z[i];
    out[i].count = draws.count[i];
    out[i].area = draws.area[i];
  }
  return out;
}

std::string predictive_csv(const latent::PredictiveDraws& draws, const std::vector<latent::HurdleCell>& cells,
                           const features::Panel& panel) {
  if (draws.z.size() != cells.size()) throw DimensionError("predictive: draws and cells differ");
  std::string s = "unit,year,month,draw,z,count,area_ha\n";
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const std::string key = panel.units.at(cells[i].unit).id + "," + std::to_string(cells[i].year) + "," +
                            std::to_string(cells[i].month) + ",";
    for (std::size_t k = 0; k < draws.z[i].size(); ++k)
      s += key + std::to_string(k) + "," + (draws.z[i][k] ? "1," : "0,") + format_double(draws.count[i][k]) + "," +
           format_double(draws.area[i][k]) + "\n";
  }
  return s;
}

std::vector<scoring::CellSamples> read_predictive(const std::filesystem::path& p,
                                                  const std::vector<latent::HurdleCell>& cells,
                                                  const features::Panel& panel) {
  const std::string text = read_text(p);
  std::map<std::pair<std::size_t, int>, std::size_t> index;
  for (std::size_t i = 0; i < cells.size(); ++i) index[{static_cast<std::size_t>(cells[i].unit), cells[i].time}] = i;
  std::vector<scoring::CellSamples> out(cells.size());
  std::size_t pos = text.find('\n');
  if (pos == std::string::npos || text.compare(0, pos, "unit,year,month,draw,z,count,area_ha") != 0)
    throw ConfigError(p.string() + ": not a predictive file");
  int line = 1;
  while (++pos < text.size()) {
    ++line;
    const std::size_t end = text.find('\n', pos);
    const std::string row = text.substr(pos, end - pos);
    pos = end == std::string::npos ? text.size() : end;
    if (row.empty()) continue;
    std::vector<std::string> f;
    std::size_t b = 0;
    for (std::size_t c; (c = row.find(',', b)) != std::string::npos; b = c + 1) f.push_back(row.substr(b, c - b));
    f.push_back(row.substr(b));
    if (f.size() != 7) throw ConfigError(p.string() + ":" + std::to_string(line) + ": expected 7 fields");
    try {
      const std::size_t u = panel.unit_index(f[0]);
      const int t = panel.window.index_of(std::stoi(f[1]), std::stoi(f[2]));
      const auto it = index.find({u, t});
      if (it == index.end()) throw ConfigError("cell is not a test cell");
      auto& c = out[it->second];
      if (std::stoul(f[3]) != c.z.size()) throw ConfigError("draws out of order");
      c.z.push_back(f[4] == "1" ? 1 : 0);
      c.count.push_back(std::stod(f[5]));
      c.area.push_back(std::stod(f[6]));
    } catch (const std::logic_error& e) {
      throw ConfigError(p.string() + ":" + std::to_string(line) + ": " + e.what());
    }
  }
  for (const auto& c : out)
    if (c.size() == 0) throw ConfigError(p.string() + ": test cell without draws");
  return out;
}

std::string fit_summary_json(const Stage2Result& s2) {
  const auto& m = s2.hurdle.model;
  json j;
  j["variant_blocks"] = json::array();
  for (const auto& b : m.blocks()) j["variant_blocks"].push_back(b.name);
  j["latent_dim"] = m.dim();
  j["observations"] = {{"z", s2.hurdle.n_z_rows},
                       {"c", s2.hurdle.n_c_rows},
                       {"b", static_cast<int>(m.observations().size()) - s2.hurdle.n_z_rows - s2.hurdle.n_c_rows}};
  j["mode_search"] = {{"iterations", s2.fit.mode.iterations},
                      {"evaluations", s2.fit.mode.evaluations},
                      {"converged", s2.fit.mode.converged},
                      {"log_post", s2.fit.mode.log_post}};
  j["grid_points"] = s2.fit.points.size();
  const Eigen::VectorXd mean = latent::hyper_posterior_mean(s2.fit);
  json h = json::object();
  for (std::size_t i = 0; i < m.hypers().size(); ++i) h[m.hypers()[i].name] = mean[static_cast<Eigen::Index>(i)];
  j["hyper_mean"] = h;
  json ints = json::object();
  for (const char* name : {"int_z", "int_c", "int_b"}) {
    const int bi = m.block_index(name);
    const auto mm = latent::latent_marginal(s2.fit, m.blocks()[bi].offset);
    ints[name] = {{"mean", mm.mean_value()}, {"q05", mm.quantile(0.05)}, {"q50", mm.quantile(0.5)}, {"q95", mm.quantile(0.95)}};
  }
  j["intercepts"] = ints;
  return j.dump(2) + "\n";
}

}  // namespace firecast::pipeline

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "firecast/boosting.hpp"
#include "firecast/features.hpp"
#include "firecast/latent.hpp"
#include "firecast/scoring.hpp"

namespace firecast::pipeline {

// ---------------------------------------------------------------- config ---

struct DataPaths {
  std::string events = "events.csv";
  std::string units = "units.csv";
  std::string covariates = "covariates.csv";
  std::string council_adjacency = "council_adjacency.csv";
  std::string district_adjacency = "district_adjacency.csv";
};

struct PipelineConfig {
  std::filesystem::path base_dir;  // relative data paths resolve against this
  DataPaths data;
  features::StudyWindow window;
  features::EventFilter filter;
  int train_end = -1;  // month indices, inclusive
  int test_start = -1;
  int test_end = -1;
  features::FeatureConfig features;
  std::vector<int> horizons{1};
  int n_folds = 5;
  std::vector<gbm::BoostConfig> count_grid, area_grid;
  latent::HurdleConfig hurdle;
  latent::GridConfig grid;
  int n_samples = 1000;
  scoring::ScoreConfig score;
  std::vector<double> exceedance_count{0, 1, 2, 5, 10};
  std::vector<double> exceedance_area{0, 10, 50, 100, 500};
  int shap_top = 10;
  std::uint64_t seed = 0;

  void validate() const;
  std::filesystem::path resolve(const std::string& p) const;
};

/// "YYYY-MM" relative to the study window.
int parse_month(const std::string& text, const features::StudyWindow& window);
std::string format_month(int t, const features::StudyWindow& window);

PipelineConfig config_from_json(const std::string& text, const std::filesystem::path& base_dir);
/// With resolve_paths the data paths are written absolute.
std::string config_to_json(const PipelineConfig& cfg, bool resolve_paths = true);
PipelineConfig load_config(const std::filesystem::path& file);

// ------------------------------------------------------------------ files ---

std::string read_text(const std::filesystem::path& p);
void write_text(const std::filesystem::path& p, const std::string& text);
/// Shortest text that parses back to the same double.
std::string format_double(double v);

std::vector<features::UnitInfo> read_units(const std::filesystem::path& p);
std::string units_csv(const std::vector<features::UnitInfo>& units);
std::vector<features::FireEvent> read_events(const std::filesystem::path& p);
std::string events_csv(const std::vector<features::FireEvent>& events);
/// Long format: unit, year, month, then one column per covariate.
features::Covariates read_covariates(const std::filesystem::path& p, const std::vector<features::UnitInfo>& units,
                                     const features::StudyWindow& window);
std::string covariates_csv(const features::Covariates& cov, const std::vector<features::UnitInfo>& units,
                           const features::StudyWindow& window);
/// Edge list keyed by node ids; nodes are numbered by their position in `ids`.
latent::Graph read_adjacency(const std::filesystem::path& p, const std::vector<std::string>& ids);
std::string adjacency_csv(const latent::Graph& g, const std::vector<std::string>& ids);
std::string panel_csv(const features::Panel& panel);
features::Panel read_panel(const std::filesystem::path& p, const std::vector<features::UnitInfo>& units,
                           const features::StudyWindow& window);
std::string features_csv(const features::WindowedDataset& ds, const features::Panel& panel);

// ---------------------------------------------------------------- dataset ---

struct Dataset {
  features::Panel panel;
  features::Covariates covariates;
  latent::Graph council_graph;
  latent::Graph district_graph;
  std::vector<std::string> district_ids;  // sorted, matches features::district_panel
  std::vector<int> unit_district;
};

/// Reads events, units, covariates and both adjacency files and aggregates the panel.
Dataset load_dataset(const PipelineConfig& cfg);

// -------------------------------------------------------------- simulator ---

struct SyntheticSpec {
  int rows = 6, cols = 6;                  // council lattice with rook adjacency
  int district_rows = 3, district_cols = 3;  // councils per district block
  int months = 48;
  int start_year = 2001;
  int fit_start = 12, fit_end = 35;  // span over which the lead effects are centred
  double xi = 0.2, kappa = 1.2, alpha = 0.5;
  double int_z = -0.5, int_c = 0.3, int_b = 1.5;
  double tau_gc = 4.0, phi_gc = 0.5;
  double tau_gd = 8.0, phi_gd = 0.5;
  double tau_year = 25.0;
  double beta1_c = 0.5, beta2_c = 0.3, beta1_b = 0.4, beta2_b = 0.3;
  double lead_z = 1.0, lead_c = 0.4, lead_b = 0.5;  // effect of the lead covariate one month earlier

  void validate() const;
};

struct SyntheticTruth {
  SyntheticSpec spec;
  double centre_z = 0.0, centre_c = 0.0, centre_b = 0.0;  // lead means removed in each predictor
  std::vector<double> eta_z, eta_c, eta_b;               // per cell, s * T + t
  std::vector<double> root_area;                         // generated square-root areas (0 without fire)
};

struct SyntheticData {
  std::vector<features::UnitInfo> units;
  std::vector<features::FireEvent> events;
  features::StudyWindow window;
  features::Covariates covariates;
  latent::Graph council_graph, district_graph;
  std::vector<std::string> district_ids;
  features::Panel panel;  // aggregate of `events`
  SyntheticTruth truth;
};

SyntheticData simulate(const SyntheticSpec& spec, std::uint64_t seed);
/// The in-memory equivalent of writing the data set and loading it back.
Dataset dataset_of(const SyntheticData& data);
std::string truth_json(const SyntheticTruth& truth);
/// Pipeline configuration matching a synthetic data set written to `dir`.
PipelineConfig synthetic_config(const SyntheticSpec& spec, std::uint64_t seed);
/// Writes the CSV inputs, truth.json and config.json.
void write_synthetic(const SyntheticData& data, const PipelineConfig& cfg, const std::filesystem::path& dir);

// ----------------------------------------------------------------- stages ---

enum class Provenance { OutOfFold, Test };

struct ForecastRecord {
  std::size_t unit = 0;
  int time = 0;
  double fc_count = 0.0;
  double fc_area = 0.0;  // square-root scale
  Provenance provenance = Provenance::OutOfFold;
};

struct Stage1Result {
  std::vector<ForecastRecord> records;  // training rows first, then test rows, each by (time, unit)
  gbm::TreeEnsemble count_model, area_model;
  std::vector<double> count_cv, area_cv;  // mean OOF deviance per grid entry
  std::size_t count_best = 0, area_best = 0;
};

features::WindowedDataset stage1_dataset(const Dataset& data, const PipelineConfig& cfg, int horizon,
                                         features::Variant variant);
/// Feature rows of the test range, ordered by (time, unit).
Eigen::MatrixXd stage1_test_matrix(const Dataset& data, const PipelineConfig& cfg, int horizon,
                                   features::Variant variant);
Stage1Result run_stage1(const Dataset& data, const PipelineConfig& cfg, int horizon);
std::string forecasts_csv(const std::vector<ForecastRecord>& records, const features::Panel& panel);
/// Cross-validated deviance per grid entry and the selected entry of both models.
std::string cv_json(const Stage1Result& s1);
std::vector<ForecastRecord> read_forecasts(const std::filesystem::path& p, const features::Panel& panel);

/// Training cells from out-of-fold records only; throws on any test-span record in training.
latent::HurdleInputs hurdle_inputs(const Dataset& data, const std::vector<ForecastRecord>& records,
                                   const PipelineConfig& cfg);

struct Stage2Result {
  latent::HurdleModel hurdle;
  latent::Fit fit;
  std::vector<latent::HurdleCell> test_cells;
};

Stage2Result run_stage2(const Dataset& data, const std::vector<ForecastRecord>& records, const PipelineConfig& cfg);
/// Reassembles the model from the forecasts, checks it against the stored one and restores the fit.
Stage2Result load_stage2(const Dataset& data, const std::vector<ForecastRecord>& records, const PipelineConfig& cfg,
                         const std::string& model_text, const std::string& fit_text);

latent::PredictiveDraws run_forecast(const Stage2Result& s2, const PipelineConfig& cfg, int horizon);
std::vector<scoring::CellSamples> cell_samples(const latent::PredictiveDraws& draws);
std::string predictive_csv(const latent::PredictiveDraws& draws, const std::vector<latent::HurdleCell>& cells,
                           const features::Panel& panel);
std::vector<scoring::CellSamples> read_predictive(const std::filesystem::path& p,
                                                  const std::vector<latent::HurdleCell>& cells,
                                                  const features::Panel& panel);
/// Posterior summaries of the hyperparameters and intercepts.
std::string fit_summary_json(const Stage2Result& s2);

// ----------------------------------------------------------------- report ---

struct ShapEntry {
  std::string feature;
  double mean_abs = 0.0;
};

struct Report {
  scoring::ScoreReport scores;
  std::vector<scoring::ExceedanceRow> exceed_count, exceed_area;
  std::vector<ShapEntry> shap_count, shap_area;
};

Report make_report(const PipelineConfig& cfg, const std::vector<scoring::CellSamples>& cells,
                   const std::vector<latent::HurdleCell>& test_cells);
/// Top features by mean |SHAP| over the test rows of the stage-1 models.
void add_shap(Report& report, const Dataset& data, const PipelineConfig& cfg, int horizon,
              const gbm::TreeEnsemble& count_model, const gbm::TreeEnsemble& area_model);
std::string report_text(const Report& r);
std::string exceedance_csv(const Report& r);
std::string shap_csv(const Report& r);

// --------------------------------------------------------------- manifest ---

std::string sha256_hex(const std::string& bytes);
/// Every regular file under `dir` (except the manifest) with size and SHA-256, sorted by path.
std::string manifest_json(const std::filesystem::path& dir, std::uint64_t seed);

// ---------------------------------------------------------------- driver ----

std::filesystem::path horizon_dir(const std::filesystem::path& run_dir, int horizon);

/// Runs every stage for every horizon under `run_dir` and writes manifest.json.
void run_pipeline(const PipelineConfig& cfg, const std::filesystem::path& run_dir);

}  // namespace firecast::pipeline

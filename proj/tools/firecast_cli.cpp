#include <CLI11.hpp>
#include <iostream>
#include <json.hpp>
#include <string>

#include "firecast/errors.hpp"
#include "firecast/pipeline.hpp"

namespace fs = std::filesystem;
using namespace firecast;
using namespace firecast::pipeline;

namespace {

// Exit codes per error category.
enum Exit { kOk = 0, kInternal = 1, kConfig = 2, kIo = 3, kDomain = 4, kParameter = 5, kDimension = 6,
            kConvergence = 7, kUsage = 64 };

int fail(const char* category, const std::string& message, int code) {
  nlohmann::json j;
  j["error"] = {{"category", category}, {"message", message}, {"exit_code", code}};
  std::cerr << j.dump() << "\n";
  return code;
}

void done(const std::vector<fs::path>& outputs) {
  nlohmann::json j;
  j["status"] = "ok";
  j["outputs"] = nlohmann::json::array();
  for (const auto& p : outputs) j["outputs"].push_back(p.generic_string());
  std::cout << j.dump() << "\n";
}

int horizon_checked(const PipelineConfig& cfg, int h) {
  for (int x : cfg.horizons)
    if (x == h) return h;
  throw ConfigError("horizon " + std::to_string(h) + " is not listed in the config");
}

Report report_from_run(const PipelineConfig& cfg, const Dataset& data, const fs::path& dir, int h) {
  const auto records = read_forecasts(dir / "stage1" / "forecasts.csv", data.panel);
  const auto in = hurdle_inputs(data, records, cfg);
  const auto cells = read_predictive(dir / "stage2" / "predictive.csv", in.test, data.panel);
  Report r = make_report(cfg, cells, in.test);
  add_shap(r, data, cfg, h, gbm::ensemble_from_json(read_text(dir / "stage1" / "model_count.json")),
           gbm::ensemble_from_json(read_text(dir / "stage1" / "model_area.json")));
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"firecast: two-stage probabilistic wildfire forecasting"};
  app.require_subcommand(1);

  std::string config_path, run_dir, out_path, variant = "count";
  int horizon = 1, rows = 6, cols = 6, months = 48;
  std::uint64_t seed = 1;

  auto* sim = app.add_subcommand("simulate", "Generate a synthetic data set with a matching config");
  sim->add_option("--out", out_path, "Output directory")->required();
  sim->add_option("--seed", seed, "Random seed")->required();
  sim->add_option("--rows", rows, "Lattice rows");
  sim->add_option("--cols", cols, "Lattice columns");
  sim->add_option("--months", months, "Number of months");

  auto* ingest = app.add_subcommand("ingest", "Aggregate events into the unit x month panel");
  ingest->add_option("--config", config_path)->required();
  ingest->add_option("--out", out_path, "Panel CSV")->required();

  auto* feats = app.add_subcommand("features", "Write the windowed feature table");
  feats->add_option("--config", config_path)->required();
  feats->add_option("--out", out_path, "Feature CSV")->required();
  feats->add_option("--variant", variant, "count or area")->check(CLI::IsMember({"count", "area"}));
  feats->add_option("--horizon", horizon);

  std::vector<CLI::App*> staged;
  for (auto [name, help] : {std::pair{"stage1", "Boosting stage: out-of-fold and test forecasts"},
                            std::pair{"stage2", "Fit the latent hurdle model"},
                            std::pair{"forecast", "Sample the posterior predictive from a stored fit"},
                            std::pair{"score", "Scores, exceedance checks and SHAP ranking from stored artifacts"},
                            std::pair{"shap", "Mean |SHAP| ranking of the boosting models"},
                            std::pair{"pipeline", "Run every stage and write the manifest"}}) {
    auto* s = app.add_subcommand(name, help);
    s->add_option("--config", config_path)->required();
    s->add_option("--run", run_dir, "Run directory")->required();
    if (std::string(name) != "pipeline") s->add_option("--horizon", horizon);
    staged.push_back(s);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), kUsage);
  }

  try {
    if (sim->parsed()) {
      SyntheticSpec spec;
      spec.rows = rows;
      spec.cols = cols;
      spec.months = months;
      const auto cfg = synthetic_config(spec, seed);
      const auto data = simulate(spec, seed);
      write_synthetic(data, cfg, out_path);
      done({fs::path(out_path) / "config.json"});
      return kOk;
    }
    const PipelineConfig cfg = load_config(config_path);
    if (ingest->parsed()) {
      write_text(out_path, panel_csv(load_dataset(cfg).panel));
      done({out_path});
      return kOk;
    }
    if (feats->parsed()) {
      const auto data = load_dataset(cfg);
      const auto v = variant == "count" ? features::Variant::Count : features::Variant::Area;
      write_text(out_path, features_csv(stage1_dataset(data, cfg, horizon, v), data.panel));
      done({out_path});
      return kOk;
    }
    const fs::path run(run_dir);
    if (staged[5]->parsed()) {
      run_pipeline(cfg, run);
      done({run / "manifest.json"});
      return kOk;
    }
    const int h = horizon_checked(cfg, horizon);
    const fs::path dir = horizon_dir(run, h);
    const Dataset data = load_dataset(cfg);
    if (staged[0]->parsed()) {
      const auto s1 = run_stage1(data, cfg, h);
      write_text(dir / "stage1" / "forecasts.csv", forecasts_csv(s1.records, data.panel));
      write_text(dir / "stage1" / "model_count.json", gbm::to_json(s1.count_model));
      write_text(dir / "stage1" / "model_area.json", gbm::to_json(s1.area_model));
      write_text(dir / "stage1" / "cv.json", cv_json(s1));
      done({dir / "stage1"});
    } else if (staged[1]->parsed()) {
      const auto records = read_forecasts(dir / "stage1" / "forecasts.csv", data.panel);
      const auto s2 = run_stage2(data, records, cfg);
      write_text(dir / "stage2" / "model.json", latent::model_to_json(s2.hurdle.model));
      write_text(dir / "stage2" / "fit.json", latent::fit_to_json(s2.fit));
      write_text(dir / "stage2" / "summary.json", fit_summary_json(s2));
      done({dir / "stage2"});
    } else if (staged[2]->parsed()) {
      const auto records = read_forecasts(dir / "stage1" / "forecasts.csv", data.panel);
      const auto s2 = load_stage2(data, records, cfg, read_text(dir / "stage2" / "model.json"),
                                  read_text(dir / "stage2" / "fit.json"));
      const auto draws = run_forecast(s2, cfg, h);
      write_text(dir / "stage2" / "predictive.csv", predictive_csv(draws, s2.test_cells, data.panel));
      done({dir / "stage2" / "predictive.csv"});
    } else if (staged[3]->parsed()) {
      const Report r = report_from_run(cfg, data, dir, h);
      write_text(dir / "report" / "report.txt", report_text(r));
      write_text(dir / "report" / "exceedance.csv", exceedance_csv(r));
      write_text(dir / "report" / "shap.csv", shap_csv(r));
      done({dir / "report"});
    } else if (staged[4]->parsed()) {
      Report r;
      add_shap(r, data, cfg, h, gbm::ensemble_from_json(read_text(dir / "stage1" / "model_count.json")),
               gbm::ensemble_from_json(read_text(dir / "stage1" / "model_area.json")));
      write_text(dir / "report" / "shap.csv", shap_csv(r));
      done({dir / "report" / "shap.csv"});
    }
    return kOk;
  } catch (const ConfigError& e) {
    return fail("config", e.what(), kConfig);
  } catch (const IoError& e) {
    return fail("io", e.what(), kIo);
  } catch (const DomainError& e) {
    return fail("domain", e.what(), kDomain);
  } catch (const ParameterError& e) {
    return fail("parameter", e.what(), kParameter);
  } catch (const DimensionError& e) {
    return fail("dimension", e.what(), kDimension);
  } catch (const ConvergenceError& e) {
    return fail("convergence", e.what(), kConvergence);
  } catch (const std::filesystem::filesystem_error& e) {
    return fail("io", e.what(), kIo);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), kInternal);
  }
}

#include <json.hpp>
#include <string>

#include "firecast/errors.hpp"
#include "firecast/pipeline.hpp"

namespace firecast::pipeline {

std::filesystem::path horizon_dir(const std::filesystem::path& run_dir, int horizon) {
  return run_dir / ("h" + std::to_string(horizon));
}

std::string cv_json(const Stage1Result& s1) {
  nlohmann::json j;
  j["count"] = {{"cv_deviance", s1.count_cv}, {"best", s1.count_best}};
  j["area"] = {{"cv_deviance", s1.area_cv}, {"best", s1.area_best}};
  return j.dump(2) + "\n";
}

void run_pipeline(const PipelineConfig& cfg, const std::filesystem::path& run_dir) {
  cfg.validate();
  const Dataset data = load_dataset(cfg);
  write_text(run_dir / "config.json", config_to_json(cfg));
  write_text(run_dir / "panel.csv", panel_csv(data.panel));
  for (int h : cfg.horizons) {
    const auto dir = horizon_dir(run_dir, h);
    const Stage1Result s1 = run_stage1(data, cfg, h);
    write_text(dir / "stage1" / "forecasts.csv", forecasts_csv(s1.records, data.panel));
    write_text(dir / "stage1" / "model_count.json", gbm::to_json(s1.count_model));
    write_text(dir / "stage1" / "model_area.json", gbm::to_json(s1.area_model));
    write_text(dir / "stage1" / "cv.json", cv_json(s1));

    const Stage2Result s2 = run_stage2(data, s1.records, cfg);
    write_text(dir / "stage2" / "model.json", latent::model_to_json(s2.hurdle.model));
    write_text(dir / "stage2" / "fit.json", latent::fit_to_json(s2.fit));
    write_text(dir / "stage2" / "summary.json", fit_summary_json(s2));
    const auto draws = run_forecast(s2, cfg, h);
    write_text(dir / "stage2" / "predictive.csv", predictive_csv(draws, s2.test_cells, data.panel));

    Report r = make_report(cfg, cell_samples(draws), s2.test_cells);
    add_shap(r, data, cfg, h, s1.count_model, s1.area_model);
    write_text(dir / "report" / "report.txt", report_text(r));
    write_text(dir / "report" / "exceedance.csv", exceedance_csv(r));
    write_text(dir / "report" / "shap.csv", shap_csv(r));
  }
  write_text(run_dir / "manifest.json", manifest_json(run_dir, cfg.seed));
}

}  // namespace firecast::pipeline

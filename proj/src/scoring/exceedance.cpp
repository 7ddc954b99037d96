#include "firecast/errors.hpp"
#include "firecast/scoring.hpp"

namespace firecast::scoring {

namespace {

double exceed_rate(const std::vector<double>& v, double h) {
  std::size_t k = 0;
  for (double x : v) k += x > h;
  return static_cast<double>(k) / static_cast<double>(v.size());
}

}  // namespace

std::vector<ExceedanceRow> exceedance_check(const std::vector<std::vector<double>>& replicates,
                                            const std::vector<double>& obs,
                                            const std::vector<double>& thresholds) {
  if (obs.empty()) throw DomainError("exceedance check: empty index set");
  if (replicates.empty()) throw DomainError("exceedance check: no replicates");
  for (const auto& r : replicates)
    if (r.size() != obs.size()) throw DimensionError("exceedance check: replicate length mismatch");

  std::vector<ExceedanceRow> out;
  out.reserve(thresholds.size());
  for (double h : thresholds) {
    ExceedanceRow row;
    row.threshold = h;
    row.empirical = exceed_rate(obs, h);
    row.predictive.reserve(replicates.size());
    double below = 0.0, equal = 0.0;
    for (const auto& r : replicates) {
      const double rate = exceed_rate(r, h);
      row.predictive.push_back(rate);
      if (rate < row.empirical) below += 1.0;
      else if (rate == row.empirical) equal += 1.0;
    }
    row.percentile = 100.0 * (below + 0.5 * equal) / static_cast<double>(replicates.size());
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<std::vector<double>> replicates_from_cells(const std::vector<CellSamples>& cells,
                                                      ScoreVariant v) {
  if (cells.empty()) throw DomainError("replicates: no cells");
  const std::size_t n_draws = cells.front().size();
  for (const auto& c : cells) {
    c.validate();
    if (c.size() != n_draws) throw DimensionError("replicates: cells have different draw counts");
  }
  std::vector<std::vector<double>> out(n_draws, std::vector<double>(cells.size()));
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& vals = v == ScoreVariant::Count ? cells[i].count : cells[i].area;
    for (std::size_t k = 0; k < n_draws; ++k) out[k][i] = cells[i].z[k] ? vals[k] : 0.0;
  }
  return out;
}

}  // namespace firecast::scoring

#include <algorithm>
#include <map>
#include <string>

#include "firecast/errors.hpp"
#include "firecast/features.hpp"

namespace firecast::features {

int StudyWindow::index_of(int year, int month) const {
  if (month < 1 || month > 12) return -1;
  const int t = (year - start_year) * 12 + (month - start_month);
  return (t >= 0 && t < n_months) ? t : -1;
}

int StudyWindow::year_of(int t) const { return start_year + (start_month - 1 + t) / 12; }

int StudyWindow::month_of(int t) const { return (start_month - 1 + t) % 12 + 1; }

std::span<const double> Panel::count_series(std::size_t s) const {
  return {count.data() + s * window.n_months, static_cast<std::size_t>(window.n_months)};
}

std::span<const double> Panel::area_series(std::size_t s) const {
  return {area.data() + s * window.n_months, static_cast<std::size_t>(window.n_months)};
}

std::size_t Panel::unit_index(const std::string& id) const {
  for (std::size_t s = 0; s < units.size(); ++s)
    if (units[s].id == id) return s;
  throw DomainError("unknown unit id '" + id + "'");
}

void Panel::validate() const {
  if (window.n_months <= 0) throw ParameterError("panel: study window has no months");
  if (window.start_month < 1 || window.start_month > 12)
    throw ParameterError("panel: start month must lie in 1..12");
  const std::size_t n = units.size() * static_cast<std::size_t>(window.n_months);
  if (count.size() != n || area.size() != n) throw DimensionError("panel: grid is not rectangular");
  for (std::size_t i = 0; i < n; ++i) {
    if (count[i] < 0.0 || area[i] < 0.0) throw DomainError("panel: negative response");
    if ((count[i] == 0.0) != (area[i] == 0.0))
      throw DomainError("panel: fire count and burnt area disagree on fire presence");
  }
}

Panel aggregate(const std::vector<FireEvent>& events, const std::vector<UnitInfo>& units,
                const StudyWindow& window, const EventFilter& filter) {
  Panel p;
  p.units = units;
  p.window = window;
  const std::size_t n = units.size() * static_cast<std::size_t>(window.n_months);
  p.count.assign(n, 0.0);
  p.area.assign(n, 0.0);
  if (window.n_months <= 0) throw ParameterError("aggregate: study window has no months");

  std::map<std::string, std::size_t> index;
  for (std::size_t s = 0; s < units.size(); ++s) {
    if (!index.emplace(units[s].id, s).second)
      throw ParameterError("aggregate: duplicate unit id '" + units[s].id + "'");
  }
  for (const auto& e : events) {
    const auto it = index.find(e.unit);
    if (it == index.end()) throw DomainError("aggregate: event for unknown unit '" + e.unit + "'");
    const int t = window.index_of(e.year, e.month);
    if (t < 0)
      throw DomainError("aggregate: event at " + std::to_string(e.year) + "-" +
                        std::to_string(e.month) + " outside the study window");
    if (!(e.area_ha >= 0.0) || !(e.duration_h >= 0.0))
      throw DomainError("aggregate: negative event area or duration");
    if (e.area_ha < filter.min_area || e.duration_h < filter.min_duration) continue;
    p.count_at(it->second, t) += 1.0;
    p.area_at(it->second, t) += e.area_ha;
  }
  return p;
}

std::vector<std::size_t> district_index(const Panel& panel) {
  std::vector<std::string> ids;
  for (const auto& u : panel.units) ids.push_back(u.district);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::vector<std::size_t> out(panel.units.size());
  for (std::size_t s = 0; s < panel.units.size(); ++s)
    out[s] = std::lower_bound(ids.begin(), ids.end(), panel.units[s].district) - ids.begin();
  return out;
}

Panel district_panel(const Panel& panel) {
  const auto idx = district_index(panel);
  std::size_t n_d = 0;
  for (auto d : idx) n_d = std::max(n_d, d + 1);
  Panel out;
  out.window = panel.window;
  out.units.resize(n_d);
  std::vector<double> members(n_d, 0.0);
  for (std::size_t s = 0; s < panel.units.size(); ++s) {
    auto& d = out.units[idx[s]];
    d.id = panel.units[s].district;
    d.district = d.id;
    d.lon += panel.units[s].lon;
    d.lat += panel.units[s].lat;
    members[idx[s]] += 1.0;
  }
  for (std::size_t d = 0; d < n_d; ++d) {
    out.units[d].lon /= members[d];
    out.units[d].lat /= members[d];
  }
  const int T = panel.n_months();
  out.count.assign(n_d * T, 0.0);
  out.area.assign(n_d * T, 0.0);
  for (std::size_t s = 0; s < panel.units.size(); ++s)
    for (int t = 0; t < T; ++t) {
      out.count_at(idx[s], t) += panel.count_at(s, t);
      out.area_at(idx[s], t) += panel.area_at(s, t);
    }
  return out;
}

}  // namespace firecast::features

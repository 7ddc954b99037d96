#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "firecast/errors.hpp"
#include "firecast/pipeline.hpp"

namespace firecast::pipeline {

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  out << text;
  if (!out) throw IoError("write failed: " + p.string());
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

namespace {

// Comma-separated table with a header row; no quoting.
struct Table {
  std::string source;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line;  // source line of each row

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw ConfigError(source + ": missing column '" + name + "'");
  }

  [[noreturn]] void fail(std::size_t r, const std::string& what) const {
    throw ConfigError(source + ":" + std::to_string(line[r]) + ": " + what);
  }

  double number(std::size_t r, int c) const {
    const std::string& s = rows[r][c];
    if (s == "nan" || s == "NA" || s.empty()) return features::kMissing;
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) fail(r, "not a number: '" + s + "'");
    return v;
  }

  int integer(std::size_t r, int c) const {
    const std::string& s = rows[r][c];
    int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) fail(r, "not an integer: '" + s + "'");
    return v;
  }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t b = 0;
  while (true) {
    const std::size_t e = line.find(',', b);
    std::string cell = line.substr(b, e == std::string::npos ? std::string::npos : e - b);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\r')) cell.pop_back();
    std::size_t lead = 0;
    while (lead < cell.size() && cell[lead] == ' ') ++lead;
    out.push_back(cell.substr(lead));
    if (e == std::string::npos) break;
    b = e + 1;
  }
  return out;
}

Table read_table(const std::filesystem::path& p) {
  Table t;
  t.source = p.string();
  std::istringstream in(read_text(p));
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto cells = split(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size())
      throw ConfigError(t.source + ":" + std::to_string(n) + ": expected " + std::to_string(t.header.size()) +
                        " fields, found " + std::to_string(cells.size()));
    t.rows.push_back(std::move(cells));
    t.line.push_back(n);
  }
  if (t.header.empty()) throw ConfigError(t.source + ": empty file");
  return t;
}

void check_id(const std::string& id, const char* what) {
  if (id.empty() || id.find_first_of(",\n\r") != std::string::npos)
    throw ConfigError(std::string(what) + " id '" + id + "' is empty or contains a separator");
}

}  // namespace

std::vector<features::UnitInfo> read_units(const std::filesystem::path& p) {
  const Table t = read_table(p);
  const int ci = t.column("id"), cd = t.column("district"), clon = t.column("lon"), clat = t.column("lat");
  std::vector<features::UnitInfo> out;
  std::set<std::string> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    features::UnitInfo u;
    u.id = t.rows[r][ci];
    u.district = t.rows[r][cd];
    u.lon = t.number(r, clon);
    u.lat = t.number(r, clat);
    if (!seen.insert(u.id).second) t.fail(r, "duplicate unit '" + u.id + "'");
    out.push_back(std::move(u));
  }
  if (out.empty()) throw ConfigError(t.source + ": no units");
  return out;
}

std::string units_csv(const std::vector<features::UnitInfo>& units) {
  std::string s = "id,district,lon,lat\n";
  for (const auto& u : units) {
    check_id(u.id, "unit");
    check_id(u.district, "district");
    s += u.id + "," + u.district + "," + format_double(u.lon) + "," + format_double(u.lat) + "\n";
  }
  return s;
}

std::vector<features::FireEvent> read_events(const std::filesystem::path& p) {
  const Table t = read_table(p);
  const int cu = t.column("unit"), cd = t.column("district"), cy = t.column("year"), cm = t.column("month"),
            ca = t.column("area_ha"), cdur = t.column("duration_h");
  std::vector<features::FireEvent> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    features::FireEvent e;
    e.unit = t.rows[r][cu];
    e.district = t.rows[r][cd];
    e.year = t.integer(r, cy);
    e.month = t.integer(r, cm);
    e.area_ha = t.number(r, ca);
    e.duration_h = t.number(r, cdur);
    if (!(e.area_ha >= 0.0) || !(e.duration_h >= 0.0)) t.fail(r, "negative or missing area/duration");
    out.push_back(std::move(e));
  }
  return out;
}

std::string events_csv(const std::vector<features::FireEvent>& events) {
  std::string s = "unit,district,year,month,area_ha,duration_h\n";
  for (const auto& e : events)
    s += e.unit + "," + e.district + "," + std::to_string(e.year) + "," + std::to_string(e.month) + "," +
         format_double(e.area_ha) + "," + format_double(e.duration_h) + "\n";
  return s;
}

features::Covariates read_covariates(const std::filesystem::path& p, const std::vector<features::UnitInfo>& units,
                                     const features::StudyWindow& window) {
  const Table t = read_table(p);
  const int cu = t.column("unit"), cy = t.column("year"), cm = t.column("month");
  std::map<std::string, std::size_t> index;
  for (std::size_t s = 0; s < units.size(); ++s) index[units[s].id] = s;
  features::Covariates cov;
  std::vector<int> cols;
  for (std::size_t c = 0; c < t.header.size(); ++c)
    if (static_cast<int>(c) != cu && static_cast<int>(c) != cy && static_cast<int>(c) != cm) {
      cov.names.push_back(t.header[c]);
      cols.push_back(static_cast<int>(c));
    }
  const std::size_t T = window.n_months;
  cov.values.assign(cols.size(), std::vector<double>(units.size() * T, features::kMissing));
  std::vector<bool> filled(units.size() * T, false);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto it = index.find(t.rows[r][cu]);
    if (it == index.end()) t.fail(r, "unknown unit '" + t.rows[r][cu] + "'");
    const int tt = window.index_of(t.integer(r, cy), t.integer(r, cm));
    if (tt < 0) continue;
    const std::size_t cell = it->second * T + tt;
    if (filled[cell]) t.fail(r, "duplicate covariate row");
    filled[cell] = true;
    for (std::size_t k = 0; k < cols.size(); ++k) cov.values[k][cell] = t.number(r, cols[k]);
  }
  cov.validate(units.size(), window.n_months);
  return cov;
}

std::string covariates_csv(const features::Covariates& cov, const std::vector<features::UnitInfo>& units,
                           const features::StudyWindow& window) {
  std::string s = "unit,year,month";
  for (const auto& n : cov.names) s += "," + n;
  s += "\n";
  const std::size_t T = window.n_months;
  for (std::size_t u = 0; u < units.size(); ++u)
    for (std::size_t t = 0; t < T; ++t) {
      s += units[u].id + "," + std::to_string(window.year_of(static_cast<int>(t))) + "," +
           std::to_string(window.month_of(static_cast<int>(t)));
      for (const auto& v : cov.values) s += "," + format_double(v[u * T + t]);
      s += "\n";
    }
  return s;
}

latent::Graph read_adjacency(const std::filesystem::path& p, const std::vector<std::string>& ids) {
  const Table t = read_table(p);
  const int ca = t.column("a"), cb = t.column("b");
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < ids.size(); ++i) index[ids[i]] = static_cast<int>(i);
  std::set<std::pair<int, int>> edges;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto ia = index.find(t.rows[r][ca]), ib = index.find(t.rows[r][cb]);
    if (ia == index.end() || ib == index.end()) t.fail(r, "edge references an unknown node");
    if (ia->second == ib->second) t.fail(r, "self loop");
    edges.emplace(std::min(ia->second, ib->second), std::max(ia->second, ib->second));
  }
  return latent::Graph::from_edges(ids.size(), {edges.begin(), edges.end()});
}

std::string adjacency_csv(const latent::Graph& g, const std::vector<std::string>& ids) {
  std::string s = "a,b\n";
  for (const auto& [a, b] : g.edges) s += ids.at(a) + "," + ids.at(b) + "\n";
  return s;
}

std::string panel_csv(const features::Panel& panel) {
  std::string s = "unit,year,month,count,area_ha\n";
  for (std::size_t u = 0; u < panel.n_units(); ++u)
    for (int t = 0; t < panel.n_months(); ++t)
      s += panel.units[u].id + "," + std::to_string(panel.window.year_of(t)) + "," +
           std::to_string(panel.window.month_of(t)) + "," + format_double(panel.count_at(u, t)) + "," +
           format_double(panel.area_at(u, t)) + "\n";
  return s;
}

features::Panel read_panel(const std::filesystem::path& p, const std::vector<features::UnitInfo>& units,
                           const features::StudyWindow& window) {
  const Table t = read_table(p);
  const int cu = t.column("unit"), cy = t.column("year"), cm = t.column("month"), cc = t.column("count"),
            ca = t.column("area_ha");
  features::Panel panel;
  panel.units = units;
  panel.window = window;
  const std::size_t T = window.n_months;
  panel.count.assign(units.size() * T, features::kMissing);
  panel.area.assign(units.size() * T, features::kMissing);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::size_t s = panel.unit_index(t.rows[r][cu]);
    const int tt = window.index_of(t.integer(r, cy), t.integer(r, cm));
    if (tt < 0) continue;
    panel.count_at(s, tt) = t.number(r, cc);
    panel.area_at(s, tt) = t.number(r, ca);
  }
  panel.validate();
  return panel;
}

std::string features_csv(const features::WindowedDataset& ds, const features::Panel& panel) {
  std::string s = "unit,year,month";
  for (const auto& n : ds.feature_names) s += "," + n;
  s += ",target\n";
  for (std::size_t r = 0; r < ds.n_rows(); ++r) {
    s += panel.units[ds.unit[r]].id + "," + std::to_string(panel.window.year_of(ds.time[r])) + "," +
         std::to_string(panel.window.month_of(ds.time[r]));
    for (Eigen::Index c = 0; c < ds.x.cols(); ++c) s += "," + format_double(ds.x(static_cast<Eigen::Index>(r), c));
    s += "," + format_double(ds.target[static_cast<Eigen::Index>(r)]) + "\n";
  }
  return s;
}

Dataset load_dataset(const PipelineConfig& cfg) {
  Dataset d;
  const auto units = read_units(cfg.resolve(cfg.data.units));
  const auto events = read_events(cfg.resolve(cfg.data.events));
  d.panel = features::aggregate(events, units, cfg.window, cfg.filter);
  d.covariates = read_covariates(cfg.resolve(cfg.data.covariates), units, cfg.window);
  std::vector<std::string> ids;
  for (const auto& u : units) ids.push_back(u.id);
  d.council_graph = read_adjacency(cfg.resolve(cfg.data.council_adjacency), ids);
  const features::Panel dp = features::district_panel(d.panel);
  for (const auto& u : dp.units) d.district_ids.push_back(u.id);
  d.district_graph = read_adjacency(cfg.resolve(cfg.data.district_adjacency), d.district_ids);
  for (std::size_t k : features::district_index(d.panel)) d.unit_district.push_back(static_cast<int>(k));
  return d;
}

}  // namespace firecast::pipeline

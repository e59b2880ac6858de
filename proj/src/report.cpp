#include "delaygame/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <stdexcept>

namespace delaygame {

using nlohmann::json;

namespace {

// JSON has no infinities; they are spelled out instead of turning into null.
json number(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? "nan" : v > 0 ? "inf" : "-inf";
}

}  // namespace

json estimate(double value, double se) { return {{"value", number(value)}, {"se", number(se)}}; }

json exact(double value) { return {{"value", number(value)}, {"exact", true}}; }

json exact_series(const std::vector<double>& values) { return {{"values", values}, {"exact", true}}; }

json to_json(const CostEstimate& c) { return c.exact ? exact(c.value) : estimate(c.value, c.se); }

json to_json(const FirstOrderStats& s) {
  return {{"statistic", exact(s.statistic)},
          {"max_abs_mean", estimate(s.max_abs, s.se_at_max)},
          {"max_rms", exact(s.max_rms)},
          {"worst_index", s.worst_index},
          {"worst_direction", s.worst_direction},
          {"pass", s.pass}};
}

json to_json(const NashReport& n) {
  json rows = json::array();
  for (const NashRow& r : n.rows) {
    rows.push_back({{"player", r.player},
                    {"direction", r.direction},
                    {"epsilon", r.epsilon},
                    {"delta_j", r.exact ? exact(r.delta) : estimate(r.delta, r.se)},
                    {"pass", r.pass}});
  }
  return {{"j1", to_json(n.j1)}, {"j2", to_json(n.j2)}, {"rows", rows}, {"pass", n.pass}};
}

json to_json(const Residual& r) {
  json out = r.exact ? exact(r.value) : estimate(r.value, r.se);
  out["pass"] = r.pass;
  return out;
}

json to_json(const Flag& f) { return {{"name", f.name}, {"pass", f.pass}, {"detail", f.detail}}; }

bool RunReport::pass() const {
  return std::all_of(flags.begin(), flags.end(), [](const Flag& f) { return f.pass; });
}

json RunReport::to_json() const {
  json fl = json::array();
  for (const Flag& f : flags) fl.push_back(delaygame::to_json(f));
  return {{"artifact_version", kArtifactVersion},
          {"subcommand", subcommand},
          {"pass", pass()},
          {"flags", fl},
          {"results", results},
          {"config", config},
          {"timings", timings}};
}

double quantile(Vec values, double prob) {
  if (values.size() == 0) throw std::invalid_argument("quantile of an empty sample");
  std::sort(values.data(), values.data() + values.size());
  const double pos = prob * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<Eigen::Index>(std::floor(pos));
  const auto hi = std::min<Eigen::Index>(lo + 1, values.size() - 1);
  return values(lo) + (pos - static_cast<double>(lo)) * (values(hi) - values(lo));
}

void write_csv(const std::filesystem::path& file, const TrajectoryTable& table, const TimeGrid& grid) {
  const Trajectory& tr = table.data;
  if (static_cast<int>(table.components.size()) != tr.dim())
    throw std::invalid_argument("write_csv: " + table.file + " names " +
                                std::to_string(table.components.size()) + " components, data has " +
                                std::to_string(tr.dim()));
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << "t,region";
  for (const auto& c : table.components)
    out << ',' << c << "_mean," << c << "_sd," << c << "_q05," << c << "_q50," << c << "_q95";
  out << '\n' << std::setprecision(10);
  for (int j = tr.first(); j <= tr.last(); ++j) {
    out << grid.time(j) << ',' << (j < 0 ? "initial" : j > grid.steps() ? "extension" : "main");
    for (int c = 0; c < tr.dim(); ++c) {
      const Vec v = tr.at(j).col(c);
      const SampleStats st = sample_stats(v);
      const double sd = st.se * std::sqrt(static_cast<double>(v.size()));
      out << ',' << st.mean << ',' << sd << ',' << quantile(v, 0.05) << ',' << quantile(v, 0.5)
          << ',' << quantile(v, 0.95);
    }
    out << '\n';
  }
}

void write_report(const std::filesystem::path& dir, const RunReport& report,
                  const std::vector<TrajectoryTable>& tables, const TimeGrid& grid) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "report.json");
  if (!out) throw std::runtime_error("cannot write " + (dir / "report.json").string());
  out << report.to_json().dump(2) << '\n';
  for (const auto& t : tables) write_csv(dir / t.file, t, grid);
}

}  // namespace delaygame

#ifndef DELAYGAME_REPORT_HPP
#define DELAYGAME_REPORT_HPP

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "delaygame/game_core.hpp"
#include "delaygame/stochastic_engine.hpp"

namespace delaygame {

inline constexpr const char* kArtifactVersion = "0.1.0";

// Every number in a report is either an estimate with its SE or tagged exact.
nlohmann::json estimate(double value, double se);
nlohmann::json exact(double value);
nlohmann::json exact_series(const std::vector<double>& values);
nlohmann::json to_json(const CostEstimate& c);
nlohmann::json to_json(const FirstOrderStats& s);
nlohmann::json to_json(const NashReport& n);
nlohmann::json to_json(const Residual& r);
nlohmann::json to_json(const Flag& f);

struct RunReport {
  std::string subcommand;
  nlohmann::json config;
  nlohmann::json results = nlohmann::json::object();
  std::vector<Flag> flags;
  nlohmann::json timings = nlohmann::json::object();  // seconds, the only non-reproducible block

  bool pass() const;
  nlohmann::json to_json() const;
};

// Per-time summary of a trajectory: t, region, then mean, sd, q05, q50, q95 per component.
// Region is initial before 0, extension after T and main otherwise.
struct TrajectoryTable {
  std::string file;
  std::vector<std::string> components;
  Trajectory data;
};

void write_csv(const std::filesystem::path& file, const TrajectoryTable& table, const TimeGrid& grid);
void write_report(const std::filesystem::path& dir, const RunReport& report,
                  const std::vector<TrajectoryTable>& tables, const TimeGrid& grid);

// Linear-interpolation sample quantile of an unsorted vector.
double quantile(Vec values, double prob);

}  // namespace delaygame

#endif  // DELAYGAME_REPORT_HPP

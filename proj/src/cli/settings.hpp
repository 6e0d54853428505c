#pragma once

// Resolved settings of each command. Every command builds its settings by
// layering built-in defaults, an optional JSON config file and the flags
// given on the command line, in that order of increasing precedence.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "oinn/problems.hpp"

namespace oinn::cli {

using json = nlohmann::json;

struct TrainParams {
  std::uint64_t seed = 0;
  std::size_t iters = 50000;
  std::size_t batch = 512;
  double lr = 1e-3;
  double gamma = 0.5;
  std::size_t hidden = 100;
  double t_final = 10.0;
  std::size_t cadence = 1;
  Vec y0;
};

struct TrainSettings {
  int example = 0;
  TrainParams train;
  std::string out_dir;
};

struct IntegrateSettings {
  int example = 0;
  std::string method;  // euler | rk4 | rk45 | rk23
  double step = 0.0002;
  double rtol = 1e-6;
  double atol = 1e-9;
  std::size_t max_attempts = 5'000'000;
  double t_final = 10.0;
  Vec y0;
  std::size_t max_rows = 10001;
  std::string out_dir;
};

struct CompareSettings {
  int example = 0;
  std::size_t seeds = 3;
  std::vector<std::size_t> budgets;
  double step = 0.0002;  // collocation spacing of the fixed-step integrator
  TrainParams train;
  std::string out_dir;
};

enum class SweepAxis { initial_point, time_range };

struct SweepSettings {
  int example = 0;
  SweepAxis axis = SweepAxis::initial_point;
  std::vector<Vec> points;     // initial_point axis
  std::vector<double> ranges;  // time_range axis
  TrainParams train;
  std::string out_dir;
};

// Example id from "4" or a registered name.
int resolve_example(const json& v);
// "[1, -2.5, 3]" -> {1, -2.5, 3}; UsageError when malformed.
Vec parse_vector_literal(const std::string& text);
std::string axis_name(SweepAxis a);

// `layers` are merged left to right (later keys win) and then read strictly:
// unknown keys and ill-typed values raise UsageError. Example-dependent
// defaults are filled in from the registry.
TrainSettings train_settings(const std::vector<json>& layers);
IntegrateSettings integrate_settings(const std::vector<json>& layers);
CompareSettings compare_settings(const std::vector<json>& layers);
SweepSettings sweep_settings(const std::vector<json>& layers);

// Full snapshots; reading one back yields identical settings.
json to_json(const TrainSettings& s);
json to_json(const IntegrateSettings& s);
json to_json(const CompareSettings& s);
json to_json(const SweepSettings& s);

// Reads a config file. A summary JSON written by a previous run is accepted
// too: its "config" member is used, and its "command" must match.
json load_config_file(const std::string& path, const std::string& command);

}  // namespace oinn::cli

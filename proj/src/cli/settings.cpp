#include "settings.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "oinn/benchmarks.hpp"
#include "oinn/errors.hpp"

namespace oinn::cli {

namespace {

// Strict accessor over one merged JSON object.
class Reader {
 public:
  explicit Reader(json j) : j_(std::move(j)) {}

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  std::size_t count(const std::string& key, std::size_t fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_number_unsigned()) throw UsageError("'" + key + "' must be a non-negative integer");
    return v.get<std::size_t>();
  }

  std::uint64_t seed(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_number_unsigned()) throw UsageError("'" + key + "' must be a non-negative integer");
    return v.get<std::uint64_t>();
  }

  double real(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    return number(raw(key), key);
  }

  std::string text(const std::string& key, std::string fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_string()) throw UsageError("'" + key + "' must be a string");
    return v.get<std::string>();
  }

  Vec vec(const std::string& key, Vec fallback) {
    if (!has(key)) return fallback;
    return vector_of(raw(key), key);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.count(key)) throw UsageError("unknown setting '" + key + "'");
    }
  }

  static double number(const json& v, const std::string& key) {
    if (!v.is_number()) throw UsageError("'" + key + "' must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw UsageError("'" + key + "' must be finite");
    return d;
  }

  static Vec vector_of(const json& v, const std::string& key) {
    if (v.is_string()) return parse_vector_literal(v.get<std::string>());
    if (!v.is_array()) throw UsageError("'" + key + "' must be an array of numbers");
    Vec out;
    for (const json& e : v) out.push_back(number(e, key));
    return out;
  }

 private:
  json j_;
  std::set<std::string> used_;
};

json merge(const std::vector<json>& layers) {
  json out = json::object();
  for (const json& l : layers) {
    if (!l.is_object()) throw UsageError("configuration must be a JSON object");
    for (const auto& [key, value] : l.items()) out[key] = value;
  }
  return out;
}

ExampleInstance example_of(Reader& r, int& id) {
  if (!r.has("example")) throw UsageError("no example given (use --example)");
  id = resolve_example(r.raw("example"));
  return load_example(id);
}

void read_train(Reader& r, TrainParams& p, const ExampleInstance& inst, std::size_t iters) {
  p.seed = r.seed("seed", 0);
  p.iters = r.count("iters", iters);
  p.batch = r.count("batch", p.batch);
  p.lr = r.real("lr", p.lr);
  p.gamma = r.real("gamma", p.gamma);
  p.hidden = r.count("hidden", p.hidden);
  p.t_final = r.real("t_final", inst.horizon);
  p.cadence = r.count("cadence", p.cadence);
  p.y0 = r.vec("y0", inst.y0);
  if (p.y0.size() != inst.dim) {
    throw UsageError("y0 has " + std::to_string(p.y0.size()) + " entries, example " +
                     std::to_string(inst.id) + " needs " + std::to_string(inst.dim));
  }
}

void write_train(json& j, const TrainParams& p) {
  j["seed"] = p.seed;
  j["iters"] = p.iters;
  j["batch"] = p.batch;
  j["lr"] = p.lr;
  j["gamma"] = p.gamma;
  j["hidden"] = p.hidden;
  j["t_final"] = p.t_final;
  j["cadence"] = p.cadence;
  j["y0"] = p.y0;
}

std::string out_dir_of(Reader& r) { return r.text("out", ""); }

}  // namespace

int resolve_example(const json& v) {
  if (v.is_number_integer()) return load_example(v.get<int>()).id;
  if (!v.is_string()) throw UsageError("example must be an id or a name");
  const std::string s = v.get<std::string>();
  if (!s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    if (s.size() > 3) throw UsageError("unknown example '" + s + "'");
    return load_example(std::stoi(s)).id;
  }
  for (const ExampleInstance& e : all_examples()) {
    if (e.name == s) return e.id;
  }
  throw UsageError("unknown example '" + s + "'");
}

Vec parse_vector_literal(const std::string& text) {
  json v;
  try {
    v = json::parse(text);
  } catch (const json::parse_error&) {
    throw UsageError("malformed vector literal '" + text + "' (expected e.g. [1, 2, 3])");
  }
  if (!v.is_array() || v.empty()) {
    throw UsageError("malformed vector literal '" + text + "' (expected e.g. [1, 2, 3])");
  }
  Vec out;
  for (const json& e : v) {
    if (!e.is_number()) throw UsageError("vector literal '" + text + "' has a non-numeric entry");
    out.push_back(e.get<double>());
  }
  return out;
}

std::string axis_name(SweepAxis a) {
  return a == SweepAxis::initial_point ? "initial_point" : "time_range";
}

TrainSettings train_settings(const std::vector<json>& layers) {
  Reader r(merge(layers));
  TrainSettings s;
  const ExampleInstance inst = example_of(r, s.example);
  read_train(r, s.train, inst, 50000);
  s.out_dir = out_dir_of(r);
  r.finish();
  return s;
}

IntegrateSettings integrate_settings(const std::vector<json>& layers) {
  Reader r(merge(layers));
  IntegrateSettings s;
  const ExampleInstance inst = example_of(r, s.example);
  const IntegratorChoice& c = inst.integrator;
  const std::string fallback =
      c.adaptive ? (c.method == AdaptiveMethod::rk45 ? "rk45" : "rk23")
                 : (c.fixed == FixedMethod::rk4 ? "rk4" : "euler");
  s.method = r.text("method", fallback);
  if (s.method != "euler" && s.method != "rk4" && s.method != "rk45" && s.method != "rk23") {
    throw UsageError("unknown method '" + s.method + "' (euler, rk4, rk45, rk23)");
  }
  s.step = r.real("step", c.step);
  s.rtol = r.real("rtol", c.rtol);
  s.atol = r.real("atol", c.atol);
  s.max_attempts = r.count("max_attempts", s.max_attempts);
  s.t_final = r.real("t_final", inst.horizon);
  s.y0 = r.vec("y0", inst.y0);
  if (s.y0.size() != inst.dim) throw UsageError("y0 does not match the example dimension");
  s.max_rows = r.count("max_rows", s.max_rows);
  if (s.max_rows < 2) throw UsageError("max_rows must be at least 2");
  s.out_dir = out_dir_of(r);
  r.finish();
  return s;
}

CompareSettings compare_settings(const std::vector<json>& layers) {
  Reader r(merge(layers));
  CompareSettings s;
  const ExampleInstance inst = example_of(r, s.example);
  read_train(r, s.train, inst, 1000);
  s.seeds = r.count("seeds", s.seeds);
  if (s.seeds == 0) throw UsageError("compare needs at least one seed");
  s.step = r.real("step", s.step);
  if (!(s.step > 0.0)) throw UsageError("step must be positive");
  if (r.has("budgets")) {
    const json& b = r.raw("budgets");
    if (!b.is_array()) throw UsageError("'budgets' must be an array of counts");
    for (const json& e : b) {
      if (!e.is_number_unsigned()) throw UsageError("'budgets' entries must be non-negative integers");
      s.budgets.push_back(e.get<std::size_t>());
    }
  } else {
    for (std::size_t b = 10; b < s.train.iters; b *= 10) s.budgets.push_back(b);
    s.budgets.push_back(s.train.iters);
  }
  std::sort(s.budgets.begin(), s.budgets.end());
  s.budgets.erase(std::unique(s.budgets.begin(), s.budgets.end()), s.budgets.end());
  if (s.budgets.empty()) throw UsageError("compare needs at least one budget");
  if (s.budgets.back() > s.train.iters) {
    throw UsageError("budget " + std::to_string(s.budgets.back()) + " exceeds iters");
  }
  s.out_dir = out_dir_of(r);
  r.finish();
  return s;
}

SweepSettings sweep_settings(const std::vector<json>& layers) {
  Reader r(merge(layers));
  SweepSettings s;
  const ExampleInstance inst = example_of(r, s.example);
  read_train(r, s.train, inst, 10000);
  const std::string axis = r.text("axis", "");
  if (axis == "initial_point") {
    s.axis = SweepAxis::initial_point;
  } else if (axis == "time_range") {
    s.axis = SweepAxis::time_range;
  } else {
    throw UsageError("sweep axis must be initial_point or time_range");
  }
  if (!r.has("values")) throw UsageError("sweep needs at least one value");
  const json& values = r.raw("values");
  if (!values.is_array() || values.empty()) throw UsageError("sweep needs at least one value");
  for (const json& v : values) {
    if (s.axis == SweepAxis::initial_point) {
      Vec p = Reader::vector_of(v, "values");
      if (p.size() != inst.dim) {
        throw UsageError("initial point has " + std::to_string(p.size()) + " entries, example " +
                         std::to_string(inst.id) + " needs " + std::to_string(inst.dim));
      }
      s.points.push_back(std::move(p));
    } else {
      double t = 0;
      if (v.is_string()) {
        std::istringstream in(v.get<std::string>());
        if (!(in >> t) || !(in >> std::ws).eof()) {
          throw UsageError("malformed time range '" + v.get<std::string>() + "'");
        }
      } else {
        t = Reader::number(v, "values");
      }
      if (!(t > 0.0) || !std::isfinite(t)) throw UsageError("time ranges must be positive");
      s.ranges.push_back(t);
    }
  }
  s.out_dir = out_dir_of(r);
  r.finish();
  return s;
}

json to_json(const TrainSettings& s) {
  json j;
  j["example"] = s.example;
  write_train(j, s.train);
  j["out"] = s.out_dir;
  return j;
}

json to_json(const IntegrateSettings& s) {
  json j;
  j["example"] = s.example;
  j["method"] = s.method;
  j["step"] = s.step;
  j["rtol"] = s.rtol;
  j["atol"] = s.atol;
  j["max_attempts"] = s.max_attempts;
  j["t_final"] = s.t_final;
  j["y0"] = s.y0;
  j["max_rows"] = s.max_rows;
  j["out"] = s.out_dir;
  return j;
}

json to_json(const CompareSettings& s) {
  json j;
  j["example"] = s.example;
  write_train(j, s.train);
  j["seeds"] = s.seeds;
  j["budgets"] = s.budgets;
  j["step"] = s.step;
  j["out"] = s.out_dir;
  return j;
}

json to_json(const SweepSettings& s) {
  json j;
  j["example"] = s.example;
  write_train(j, s.train);
  j["axis"] = axis_name(s.axis);
  if (s.axis == SweepAxis::initial_point) {
    j["values"] = s.points;
  } else {
    j["values"] = s.ranges;
  }
  j["out"] = s.out_dir;
  return j;
}

json load_config_file(const std::string& path, const std::string& command) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw UsageError("config file '" + path + "' must hold a JSON object");
  if (j.contains("command")) {
    if (!j["command"].is_string() || j["command"].get<std::string>() != command) {
      throw UsageError("config file '" + path + "' was written by a different command");
    }
    if (!j.contains("config")) throw UsageError("summary file '" + path + "' has no config");
    return j["config"];
  }
  return j;
}

}  // namespace oinn::cli

#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <ostream>

#include "oinn/benchmarks.hpp"
#include "oinn/cli/app.hpp"
#include "oinn/errors.hpp"
#include "output.hpp"

namespace oinn::cli {

namespace fs = std::filesystem;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
      .count();
}

std::string vector_label(const Vec& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += format_number(v[i]);
  }
  return s + "]";
}

json base_summary(const std::string& command, const std::string& argv, const ExampleInstance& inst,
                  json config) {
  json j;
  j["command"] = command;
  j["argv"] = argv;
  j["example"] = inst.id;
  j["name"] = inst.name;
  j["epsilon_kind"] = epsilon_kind_name(inst.epsilon_kind);
  j["config"] = std::move(config);
  return j;
}

struct TrainRun {
  std::vector<HistoryRow> rows;
  std::optional<TrainReport> report;
  std::string error;  // non-empty when training aborted
  fs::path history;
  fs::path checkpoint;
  double wall_ms = 0.0;
};

// One seeded training run writing history.csv and checkpoint into dir.
TrainRun run_training(const ExampleInstance& registered, const TrainParams& p, const fs::path& dir) {
  ensure_directory(dir);
  const ExampleInstance inst = registered.with_initial_point(p.y0);
  TrainConfig cfg;
  cfg.lr = p.lr;
  cfg.batch = p.batch;
  cfg.iters = p.iters;
  cfg.gamma = p.gamma;
  cfg.seed = p.seed;
  cfg.cadence = p.cadence;
  cfg.horizon = p.t_final;
  cfg.hidden = p.hidden;
  cfg.validate();
  const OinnModel m0{MlpParams::glorot(inst.dim, p.hidden, p.seed), inst.y0, p.t_final};

  TrainRun run;
  run.history = dir / "history.csv";
  run.checkpoint = dir / "checkpoint";
  CsvWriter history(run.history, {"iter", "loss", "epsilon", "wall_ms"});
  TrainHooks hooks;
  hooks.on_row = [&](const HistoryRow& r) {
    run.rows.push_back(r);
    history.row({std::to_string(r.iter), format_number(r.loss), format_number(r.epsilon),
                 format_number(r.wall_ms)});
  };
  hooks.on_improve = [&](const OinnModel& m, const HistoryRow&) {
    write_file_atomic(run.checkpoint, checkpoint_text(m));
  };
  const auto start = std::chrono::steady_clock::now();
  try {
    run.report = train(inst.field, m0, inst.projection, inst.metric(), cfg, hooks);
  } catch (const NumericalError& e) {
    run.error = e.what();
  }
  run.wall_ms = elapsed_ms(start);
  history.close();
  return run;
}

void describe_run(json& j, const TrainRun& run, const ExampleInstance& inst) {
  j["status"] = run.report ? "ok" : "Fail";
  if (!run.error.empty()) j["error"] = run.error;
  j["wall_ms"] = run.wall_ms;
  if (!run.rows.empty()) {
    j["iterations"] = run.rows.back().iter;
    j["final_loss"] = number_or_null(run.rows.back().loss);
    j["final_epsilon"] = number_or_null(run.rows.back().epsilon);
  }
  if (run.report) {
    const TrainReport& r = *run.report;
    j["epsilon_best"] = number_or_null(r.epsilon_best);
    j["best_iter"] = r.best_iter;
    j["best_solution"] = r.best_solution;
    j["reference"] = inst.reference;
    j["max_abs_diff_to_reference"] = max_abs_diff(r.best_solution, inst.reference);
    if (inst.reference_value) j["reference_value"] = *inst.reference_value;
  }
  j["files"] = {{"history", run.history.string()}};
  if (fs::exists(run.checkpoint)) j["files"]["checkpoint"] = run.checkpoint.string();
}

// Rows of a stored trajectory to write: at most max_rows, first and last kept.
std::vector<std::size_t> sample_rows(std::size_t n, std::size_t max_rows) {
  std::vector<std::size_t> idx;
  if (n <= max_rows) {
    for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
    return idx;
  }
  for (std::size_t k = 0; k < max_rows; ++k) {
    idx.push_back(static_cast<std::size_t>(
        (static_cast<long double>(k) * (n - 1)) / (max_rows - 1)));
  }
  return idx;
}

}  // namespace

int cmd_list(std::ostream& out) {
  json list = json::array();
  for (const ExampleInstance& e : all_examples()) {
    list.push_back({{"id", e.id},
                    {"name", e.name},
                    {"n", e.dim},
                    {"epsilon_kind", epsilon_kind_name(e.epsilon_kind)},
                    {"reference", e.reference}});
  }
  out << list.dump(2) << "\n";
  return kExitOk;
}

int cmd_train(const TrainSettings& s, const std::string& argv, std::ostream& out) {
  const ExampleInstance inst = load_example(s.example);
  const fs::path dir = s.out_dir;
  const TrainRun run = run_training(inst, s.train, dir);

  json summary = base_summary("train", argv, inst, to_json(s));
  summary["seed"] = s.train.seed;
  describe_run(summary, run, inst);
  summary["files"]["summary"] = (dir / "summary.json").string();
  write_json(dir / "summary.json", summary);

  if (!run.report) {
    out << "train example " << inst.id << ": Fail (" << run.error << ")\n";
    return kExitNumerical;
  }
  out << "train example " << inst.id << ": epsilon_best " << format_number(run.report->epsilon_best)
      << " at iteration " << run.report->best_iter << ", solution "
      << vector_label(run.report->best_solution) << "\n";
  return kExitOk;
}

int cmd_integrate(const IntegrateSettings& s, const std::string& argv, std::ostream& out) {
  const ExampleInstance inst = load_example(s.example).with_initial_point(s.y0);
  const fs::path dir = s.out_dir;
  ensure_directory(dir);

  const bool adaptive = s.method == "rk45" || s.method == "rk23";
  const auto start = std::chrono::steady_clock::now();
  Trajectory tr;
  if (adaptive) {
    StepControl c;
    c.rtol = s.rtol;
    c.atol = s.atol;
    c.max_attempts = s.max_attempts;
    tr = integrate_adaptive(inst.field, inst.y0, s.t_final, c, parse_adaptive_method(s.method));
  } else {
    if (!(s.step > 0.0)) throw UsageError("step must be positive");
    const double steps = std::ceil(s.t_final / s.step);
    const double per_row = std::ceil(steps / static_cast<double>(s.max_rows - 1));
    const auto thin = static_cast<std::size_t>(std::max(1.0, per_row));
    tr = integrate_fixed(inst.field, inst.y0, s.t_final, s.step, parse_fixed_method(s.method), thin);
  }
  const double wall = elapsed_ms(start);

  std::vector<std::string> header{"t"};
  for (std::size_t i = 1; i <= inst.dim; ++i) header.push_back("y" + std::to_string(i));
  CsvWriter csv(dir / "trajectory.csv", header);
  for (std::size_t i : sample_rows(tr.times.size(), s.max_rows)) {
    std::vector<std::string> row{format_number(tr.times[i])};
    for (double v : tr.states[i]) row.push_back(format_number(v));
    csv.row(row);
  }
  csv.close();

  const bool ok = tr.status == TerminalStatus::completed;
  json summary = base_summary("integrate", argv, inst, to_json(s));
  summary["status"] = ok ? "ok" : "Fail";
  summary["terminal_status"] = status_name(tr.status);
  summary["steps"] = tr.steps;
  summary["rejected"] = tr.rejected;
  summary["t_reached"] = tr.times.back();
  summary["wall_ms"] = wall;
  summary["reference"] = inst.integrator_reference;
  if (ok) {
    const Vec raw = endpoint(tr);
    const Vec p = inst.projection.apply(raw);
    const double diff = max_abs_diff(p, inst.integrator_reference);
    summary["raw_endpoint"] = raw;
    summary["endpoint"] = p;
    summary["epsilon"] = number_or_null(inst.score(raw));
    summary["max_abs_diff_to_reference"] = diff;
    summary["within_tolerance"] = diff <= kReferenceTolerance;
  }
  summary["files"] = {{"trajectory", (dir / "trajectory.csv").string()},
                      {"summary", (dir / "summary.json").string()}};
  write_json(dir / "summary.json", summary);

  if (!ok) {
    out << "integrate example " << inst.id << ": Fail (" << status_name(tr.status) << " at t = "
        << format_number(tr.times.back()) << ")\n";
    return kExitNumerical;
  }
  out << "integrate example " << inst.id << ": endpoint "
      << vector_label(summary["endpoint"].get<Vec>()) << ", epsilon "
      << format_number(inst.score(endpoint(tr))) << "\n";
  return kExitOk;
}

int cmd_compare(const CompareSettings& s, const std::string& argv, std::ostream& out) {
  const ExampleInstance inst = load_example(s.example).with_initial_point(s.train.y0);
  const fs::path dir = s.out_dir;
  ensure_directory(dir);
  for (std::size_t b : s.budgets) {
    if (b % s.train.cadence != 0 && b != s.train.iters) {
      throw UsageError("budget " + std::to_string(b) + " is not a multiple of the cadence");
    }
  }

  std::vector<TrainRun> runs;
  for (std::size_t k = 0; k < s.seeds; ++k) {
    TrainParams p = s.train;
    p.seed = s.train.seed + k;
    runs.push_back(run_training(inst, p, dir / ("oinn-seed" + std::to_string(p.seed))));
  }

  std::vector<double> integrator;
  for (std::size_t b : s.budgets) {
    double eps = kInf;
    try {
      eps = inst.score(fixed_state_at(inst.field, inst.y0, s.step, b, FixedMethod::rk4));
    } catch (const NumericalError&) {
    }
    integrator.push_back(eps);
  }

  CsvWriter csv(dir / "compare.csv", {"pipeline", "seed", "budget", "epsilon"});
  json rows = json::array();
  bool failed = false;
  for (std::size_t i = 0; i < s.budgets.size(); ++i) {
    const std::size_t b = s.budgets[i];
    double best = kInf;
    json per_seed = json::array();
    for (std::size_t k = 0; k < runs.size(); ++k) {
      double eps = kInf;
      for (const HistoryRow& r : runs[k].rows) {
        if (r.iter == b) eps = r.epsilon_best;
      }
      if (!runs[k].report) failed = true;
      best = std::min(best, eps);
      per_seed.push_back(number_or_null(eps));
      csv.row({"oinn", std::to_string(s.train.seed + k), std::to_string(b), format_number(eps)});
    }
    csv.row({"integrator", "", std::to_string(b), format_number(integrator[i])});
    rows.push_back({{"budget", b},
                    {"oinn_best", number_or_null(best)},
                    {"oinn", per_seed},
                    {"integrator", number_or_null(integrator[i])},
                    {"collocation_time", static_cast<double>(b) * s.step},
                    {"oinn_lower", best < integrator[i]}});
  }
  csv.close();

  json summary = base_summary("compare", argv, inst, to_json(s));
  summary["status"] = failed ? "Fail" : "ok";
  summary["budgets"] = rows;
  json seeds = json::array();
  for (std::size_t k = 0; k < runs.size(); ++k) {
    json j;
    j["seed"] = s.train.seed + k;
    describe_run(j, runs[k], inst);
    seeds.push_back(j);
  }
  summary["seeds"] = seeds;
  const Vec last = fixed_state_at(inst.field, inst.y0, s.step, s.budgets.back(), FixedMethod::rk4);
  summary["integrator_endpoint"] = inst.projection.apply(last);
  summary["files"] = {{"compare", (dir / "compare.csv").string()},
                      {"summary", (dir / "summary.json").string()}};
  write_json(dir / "summary.json", summary);

  for (const json& r : rows) {
    out << "budget " << r["budget"].get<std::size_t>() << ": oinn "
        << format_number(r["oinn_best"].is_null() ? kInf : r["oinn_best"].get<double>())
        << ", integrator "
        << format_number(r["integrator"].is_null() ? kInf : r["integrator"].get<double>()) << "\n";
  }
  return failed ? kExitNumerical : kExitOk;
}

int cmd_sweep(const SweepSettings& s, const std::string& argv, std::ostream& out) {
  const ExampleInstance inst = load_example(s.example);
  const fs::path dir = s.out_dir;
  ensure_directory(dir);

  std::vector<TrainParams> cells;
  std::vector<std::string> labels;
  const std::size_t n = s.axis == SweepAxis::initial_point ? s.points.size() : s.ranges.size();
  for (std::size_t i = 0; i < n; ++i) {
    TrainParams p = s.train;
    if (s.axis == SweepAxis::initial_point) {
      p.y0 = s.points[i];
      labels.push_back("y0=" + vector_label(p.y0));
    } else {
      p.t_final = s.ranges[i];
      labels.push_back("T=" + format_number(p.t_final));
    }
    cells.push_back(std::move(p));
  }

  std::vector<TrainRun> runs;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    runs.push_back(run_training(inst, cells[i], dir / ("cell-" + std::to_string(i))));
  }

  std::vector<std::string> header{"iter"};
  header.insert(header.end(), labels.begin(), labels.end());
  CsvWriter pivot(dir / "pivot.csv", header);
  std::size_t longest = 0;
  for (const TrainRun& r : runs) longest = std::max(longest, r.rows.size());
  for (std::size_t row = 0; row < longest; ++row) {
    std::vector<std::string> fields;
    for (const TrainRun& r : runs) {
      if (row < r.rows.size()) {
        fields.push_back(format_number(r.rows[row].epsilon_best));
      } else {
        fields.emplace_back();
      }
    }
    std::size_t iter = 0;
    for (const TrainRun& r : runs) {
      if (row < r.rows.size()) iter = r.rows[row].iter;
    }
    fields.insert(fields.begin(), std::to_string(iter));
    pivot.row(fields);
  }
  pivot.close();

  bool failed = false;
  json cell_list = json::array();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    json j;
    j["cell"] = i;
    j["label"] = labels[i];
    if (s.axis == SweepAxis::initial_point) {
      j["y0"] = cells[i].y0;
    } else {
      j["t_final"] = cells[i].t_final;
    }
    describe_run(j, runs[i], inst);
    failed = failed || !runs[i].report;
    cell_list.push_back(j);
    out << labels[i] << ": ";
    if (runs[i].report) {
      out << "epsilon_best " << format_number(runs[i].report->epsilon_best) << "\n";
    } else {
      out << "Fail (" << runs[i].error << ")\n";
    }
  }

  json summary = base_summary("sweep", argv, inst, to_json(s));
  summary["status"] = failed ? "Fail" : "ok";
  summary["axis"] = axis_name(s.axis);
  summary["cells"] = cell_list;
  summary["files"] = {{"pivot", (dir / "pivot.csv").string()},
                      {"summary", (dir / "summary.json").string()}};
  write_json(dir / "summary.json", summary);
  return failed ? kExitNumerical : kExitOk;
}

}  // namespace oinn::cli

// Acceptance run: one PASS/FAIL line per criterion, details indented below.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "graph_oracles.hpp"
#include "oinn/benchmarks.hpp"
#include "oinn/errors.hpp"

using namespace oinn;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> detail;

  void note(const std::string& s) { detail.push_back(s); }
  void check(bool ok, const std::string& s) {
    pass = pass && ok;
    detail.push_back(std::string(ok ? "ok   " : "FAIL ") + s);
  }
};

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

std::string fmt_vec(const Vec& v, int digits = 4) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i], digits);
  return s + "]";
}

// ---- criterion 1: integrator endpoints -------------------------------------

Vec integrate_registered(const ExampleInstance& ex, std::string& how, TerminalStatus& status) {
  const IntegratorChoice& c = ex.integrator;
  Trajectory tr;
  if (c.adaptive) {
    StepControl ctrl;
    ctrl.rtol = c.rtol;
    ctrl.atol = c.atol;
    tr = integrate_adaptive(ex.field, ex.y0, ex.horizon, ctrl, c.method);
    how = std::string(c.method == AdaptiveMethod::rk45 ? "rk45" : "rk23") + " rtol " +
          sci(c.rtol) + " atol " + sci(c.atol);
  } else {
    tr = integrate_fixed(ex.field, ex.y0, ex.horizon, c.step, c.fixed, 1000000);
    how = std::string(c.fixed == FixedMethod::rk4 ? "rk4" : "euler") + " h " + fmt(c.step);
  }
  status = tr.status;
  if (tr.status != TerminalStatus::completed) return {};
  return ex.projection.apply(endpoint(tr));
}

Outcome integration_reproduction() {
  Outcome o;
  for (const ExampleInstance& ex : all_examples()) {
    std::string how;
    TerminalStatus status{};
    const Vec p = integrate_registered(ex, how, status);
    if (status != TerminalStatus::completed) {
      o.check(false, "Example " + std::to_string(ex.id) + " (" + how + "): " + status_name(status));
      continue;
    }
    const double d = max_abs_diff(p, ex.integrator_reference);
    o.check(d <= kReferenceTolerance, "Example " + std::to_string(ex.id) + " (" + how + ", T = 10): " +
                                          fmt_vec(p) + " vs " + fmt_vec(ex.integrator_reference, 2) +
                                          ", max diff " + fmt(d));
  }
  const ExampleInstance ex6 = load_example(6);
  const Vec fine = ex6.projection.apply(
      endpoint(integrate_fixed(ex6.field, ex6.y0, 10.0, 0.0002, FixedMethod::rk4, 1000000)));
  o.note("info Example 6 with fixed rk4 h 0.0002 settles at " + fmt_vec(fine) + " (objective " +
         fmt(ex6.score(fine)) + ")");
  return o;
}

// ---- criterion 2: training, best of three seeds ----------------------------

struct SeedRun {
  double best = 0.0;
  std::size_t best_iter = 0;
  std::size_t last_iter = 0;
  Vec solution;
  bool met = false;
  double seconds = 0.0;
};

SeedRun train_seed(const ExampleInstance& ex, std::uint64_t seed, std::size_t iters,
                   const std::function<bool(double, const Vec&)>& goal, bool stop_when_met) {
  TrainConfig cfg;
  cfg.iters = iters;
  cfg.seed = seed;
  cfg.horizon = ex.horizon;
  const OinnModel m0{MlpParams::glorot(ex.dim, cfg.hidden, seed), ex.y0, ex.horizon};
  SeedRun run;
  TrainHooks hooks;
  hooks.on_improve = [&](const OinnModel& m, const HistoryRow& row) {
    const Vec sol = predict(m, ex.projection);
    if (goal(row.epsilon_best, sol)) run.met = true;
  };
  hooks.on_row = [&](const HistoryRow& row) { run.last_iter = row.iter; };
  if (stop_when_met) hooks.stop = [&](const HistoryRow&) { return run.met; };
  const auto start = std::chrono::steady_clock::now();
  const TrainReport r = train(ex.field, m0, ex.projection, ex.metric(), cfg, hooks);
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  run.best = r.epsilon_best;
  run.best_iter = r.best_iter;
  run.solution = r.best_solution;
  return run;
}

// Stops a seed early once the goal is met unless run_full, in which case the
// goal is judged on the final best.
void best_of_three(Outcome& o, int id, std::size_t iters, const std::string& goal_text,
                   const std::function<bool(double, const Vec&)>& goal, bool run_full = false) {
  const ExampleInstance ex = load_example(id);
  bool met = false;
  for (std::uint64_t seed = 0; seed < 3 && !met; ++seed) {
    const SeedRun r = train_seed(ex, seed, iters, goal, !run_full);
    met = run_full ? goal(r.best, r.solution) : r.met;
    o.note("     Example " + std::to_string(id) + " seed " + std::to_string(seed) + ": best " +
           fmt(r.best, 5) + " at iteration " + std::to_string(r.best_iter) + " -> " +
           fmt_vec(r.solution, 3) + ", " + fmt(max_abs_diff(r.solution, ex.reference), 3) +
           " from the reference (" + (met ? "met" : "not met") + " after " +
           std::to_string(r.last_iter) + " iterations, " + fmt(r.seconds, 1) + " s)");
  }
  o.check(met, "Example " + std::to_string(id) + ": " + goal_text + " within " +
                   std::to_string(iters) + " iterations, best of 3 seeds");
}

Outcome training_reproduction() {
  Outcome o;
  best_of_three(o, 2, 10000, "epsilon <= 0.05 and prediction within 0.05 of [1, 2, 0, 1]",
                [](double eps, const Vec& sol) {
                  return eps <= 0.05 && max_abs_diff(sol, Vec{1.0, 2.0, 0.0, 1.0}) <= 0.05;
                });
  best_of_three(o, 3, 10000, "epsilon <= 0.05", [](double eps, const Vec&) { return eps <= 0.05; });
  best_of_three(o, 4, 1000, "epsilon <= 0.01", [](double eps, const Vec&) { return eps <= 0.01; });
  best_of_three(o, 5, 50000, "objective 39.02 +- 0.1",
                [](double eps, const Vec&) { return std::fabs(eps - 39.02) <= 0.1; }, true);
  return o;
}

// ---- criterion 3: OINN vs fixed-step integrator on Example 4 ---------------

Outcome comparison_crossover() {
  Outcome o;
  const ExampleInstance ex = load_example(4);
  const std::vector<std::size_t> budgets{100, 1000};
  std::vector<double> oinn(budgets.size(), std::numeric_limits<double>::infinity());
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    TrainConfig cfg;
    cfg.iters = budgets.back();
    cfg.seed = seed;
    const OinnModel m0{MlpParams::glorot(ex.dim, cfg.hidden, seed), ex.y0, ex.horizon};
    TrainHooks hooks;
    hooks.on_row = [&](const HistoryRow& row) {
      for (std::size_t i = 0; i < budgets.size(); ++i) {
        if (row.iter == budgets[i]) oinn[i] = std::min(oinn[i], row.epsilon_best);
      }
    };
    train(ex.field, m0, ex.projection, ex.metric(), cfg, hooks);
  }
  for (std::size_t i = 0; i < budgets.size(); ++i) {
    const Vec y = fixed_state_at(ex.field, ex.y0, 0.0002, budgets[i], FixedMethod::rk4);
    const double numeric = ex.score(y);
    o.check(oinn[i] < numeric, "budget " + std::to_string(budgets[i]) + ": OINN " +
                                   fmt(oinn[i], 5) + " < integrator " + fmt(numeric, 5));
  }
  return o;
}

// ---- criterion 4: property suite ---------------------------------------------

double relative(const Vec& a, const Vec& b) { return testing::rel_err(a, b); }

Outcome property_suite() {
  Outcome o;
  std::mt19937_64 rng(20261016);

  {
    int mismatches = 0;
    for (std::uint64_t draw = 0; draw < 100; ++draw) {
      const Vec y0 = testing::uniform(rng, 4, -20.0, 20.0);
      const OinnModel m{MlpParams::glorot(4, 100, draw), y0, 10.0};
      if (model_forward(0.0, m) != y0) ++mismatches;
    }
    o.check(mismatches == 0, "y(0; w) == y0 bit-exactly over 100 parameter draws");
  }

  {
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      ad::Graph g;
      const ad::Expr root = testing::random_smooth_graph(g, rng);
      ad::Bindings b;
      b.set("W", ad::Tensor::matrix(3, 3, testing::uniform(rng, 9)));
      b.set("x", ad::Tensor::vector(testing::uniform(rng, 3)));
      b.set("s", ad::Tensor::scalar(testing::uniform(rng, 1)[0]));
      const auto gs = ad::grad(root, b);
      for (const char* name : {"W", "x", "s"}) {
        worst = std::max(worst, relative(gs.at(name).data, testing::fd_gradient(root, b, name)));
      }
    }
    o.check(worst <= 1e-5, "reverse-mode gradient vs central differences on 100 random graphs: "
                           "worst relative error " + sci(worst));
  }

  {
    double worst = 0.0;
    for (std::uint64_t draw = 0; draw < 20; ++draw) {
      const OinnModel m{MlpParams::glorot(3, 100, 1000 + draw), testing::uniform(rng, 3), 10.0};
      for (int k = 0; k < 5; ++k) {
        const double t = testing::uniform(rng, 1, 0.05, 10.0)[0];
        const double h = 1e-5;
        const Vec up = model_forward(t + h, m);
        const Vec down = model_forward(t - h, m);
        Vec fd(up.size());
        for (std::size_t i = 0; i < fd.size(); ++i) fd[i] = (up[i] - down[i]) / (2 * h);
        worst = std::max(worst, relative(model_time_derivative(t, m), fd));
      }
    }
    o.check(worst <= 1e-4, "model time derivative vs central differences: worst relative error " +
                               sci(worst));
  }

  {
    bool box_exact = true;
    double idem = 0.0, feas = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 2 + rng() % 6;
      const std::size_t m = 1 + rng() % n;
      Vec lo = testing::uniform(rng, n, -2.0, 0.0);
      Vec hi = testing::uniform(rng, n, 0.0, 2.0);
      const BoxSet box(lo, hi);
      const Vec x = testing::uniform(rng, n, -5.0, 5.0);
      const Vec px = project_box(x, box);
      box_exact = box_exact && project_box(px, box) == px;

      const AffineSet aff(m, n, testing::uniform(rng, m * n), testing::uniform(rng, m, -3.0, 3.0));
      const Vec ax = aff.project(x);
      idem = std::max(idem, max_abs_diff(aff.project(ax), ax));
      for (double r : aff.residual(ax)) feas = std::max(feas, std::fabs(r));
    }
    o.check(box_exact, "box projection idempotent exactly (100 random boxes)");
    o.check(idem <= 1e-12, "affine projection idempotent: worst " + sci(idem));
    o.check(feas <= 1e-9, "A P(x) = b: worst residual " + sci(feas));
  }

  {
    VectorField decay;
    decay.name = "decay";
    decay.dim = 1;
    decay.build = [](ad::Expr, ad::Expr y) { return -y; };
    auto order = [&](FixedMethod method) {
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      const std::vector<double> hs{0.1, 0.05, 0.025, 0.0125};
      for (double h : hs) {
        const double e =
            std::fabs(endpoint(integrate_fixed(decay, Vec{1.0}, 1.0, h, method))[0] - std::exp(-1.0));
        sx += std::log(h);
        sy += std::log(e);
        sxx += std::log(h) * std::log(h);
        sxy += std::log(h) * std::log(e);
      }
      const double n = static_cast<double>(hs.size());
      return (n * sxy - sx * sy) / (n * sxx - sx * sx);
    };
    const double rk4 = order(FixedMethod::rk4);
    const double euler = order(FixedMethod::euler);
    o.check(rk4 >= 3.8, "rk4 measured order " + fmt(rk4, 3));
    o.check(euler >= 0.9, "euler measured order " + fmt(euler, 3));
  }

  {
    bool monotone = true;
    bool identical = true;
    for (int id : {2, 4, 5}) {
      const ExampleInstance ex = load_example(id);
      TrainConfig cfg;
      cfg.iters = 150;
      cfg.seed = 7;
      const OinnModel m0{MlpParams::glorot(ex.dim, cfg.hidden, cfg.seed), ex.y0, ex.horizon};
      const TrainReport a = train(ex.field, m0, ex.projection, ex.metric(), cfg);
      const TrainReport b = train(ex.field, m0, ex.projection, ex.metric(), cfg);
      for (std::size_t i = 1; i < a.history.size(); ++i) {
        monotone = monotone && a.history[i].epsilon_best <= a.history[i - 1].epsilon_best;
      }
      identical = identical && a.final_model.params == b.final_model.params &&
                  a.history.size() == b.history.size();
      for (std::size_t i = 0; identical && i < a.history.size(); ++i) {
        identical = a.history[i].loss == b.history[i].loss &&
                    a.history[i].epsilon == b.history[i].epsilon;
      }
    }
    o.check(monotone, "epsilon_best non-increasing in every report (Examples 2, 4, 5)");
    o.check(identical, "bit-identical reruns under a fixed seed");
  }

  for (const ExampleInstance& ex : all_examples()) {
    const VerifyReport r = verify_reference(ex);
    o.check(r.passed, "verify_reference Example " + std::to_string(ex.id) + ": " + r.detail);
  }
  return o;
}

// ---- criterion 5: substitutions ----------------------------------------------

Outcome substitutions() {
  Outcome o;
  o.note("     Reference wall-clock times and per-iteration curves are hardware and seed");
  o.note("     dependent; they are replaced by the checks below and by criteria 2-4.");
  {
    const ExampleInstance ex = load_example(4);
    TrainConfig cfg;
    cfg.iters = 50;
    const OinnModel m0{MlpParams::glorot(ex.dim, cfg.hidden, 0), ex.y0, ex.horizon};
    const TrainReport r = train(ex.field, m0, ex.projection, ex.metric(), cfg);
    bool timed = r.history.back().wall_ms > 0.0;
    for (std::size_t i = 1; i < r.history.size(); ++i) {
      timed = timed && r.history[i].wall_ms >= r.history[i - 1].wall_ms;
    }
    o.check(timed, "training history records cumulative wall-clock time");
  }
  {
    const ExampleInstance ex = load_example(6);
    StepControl c;
    c.rtol = 1e-10;
    c.atol = 1e-12;
    c.max_attempts = 200000;
    const Trajectory tr = integrate_adaptive(ex.field, ex.y0, 10.0, c);
    bool finite = true;
    for (const Vec& s : tr.states) {
      for (double v : s) finite = finite && std::isfinite(v);
    }
    bool raises = false;
    try {
      endpoint(tr);
    } catch (const UnavailableEndpoint&) {
      raises = true;
    }
    o.check(tr.status == TerminalStatus::step_underflow && finite && raises,
            "Example 6 at rtol 1e-10 reports " + status_name(tr.status) + " at t = " +
                fmt(tr.times.back(), 4) + " without non-finite states (the Fail entry)");
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int number;
    std::string title;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "integration reproduces the numerical final rows (Examples 1-6)", integration_reproduction},
      {2, "OINN training reaches the target accuracy (best of 3 seeds)", training_reproduction},
      {3, "OINN beats the fixed-step integrator at budgets 100 and 1000 (Example 4)",
       comparison_crossover},
      {4, "property suite", property_suite},
      {5, "substituted: timing and curves replaced by recorded timing and Fail reproduction",
       substitutions},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const Criterion& c : criteria) {
    if (!wanted.empty() && !wanted.count(c.number)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s criterion %d: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.number,
                c.title.c_str(), s);
    for (const std::string& d : o.detail) std::printf("    %s\n", d.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}

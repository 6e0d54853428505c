#include "oinn/integrators.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "oinn/errors.hpp"

namespace oinn {

std::string status_name(TerminalStatus s) {
  switch (s) {
    case TerminalStatus::completed: return "completed";
    case TerminalStatus::step_underflow: return "step-underflow";
    case TerminalStatus::non_finite_state: return "non-finite-state";
  }
  return "unknown";
}

FixedMethod parse_fixed_method(const std::string& s) {
  if (s == "euler") return FixedMethod::euler;
  if (s == "rk4") return FixedMethod::rk4;
  throw UsageError("unknown fixed-step method '" + s + "' (expected euler or rk4)");
}

AdaptiveMethod parse_adaptive_method(const std::string& s) {
  if (s == "rk45") return AdaptiveMethod::rk45;
  if (s == "rk23") return AdaptiveMethod::rk23;
  throw UsageError("unknown adaptive method '" + s + "' (expected rk45 or rk23)");
}

void StepControl::validate() const {
  if (!(rtol > 0.0) || !(atol > 0.0)) throw UsageError("tolerances must be positive");
  if (!(min_step > 0.0)) throw UsageError("minimum step must be positive");
  if (!(max_step >= 0.0)) throw UsageError("maximum step must be non-negative");
  if (max_step > 0.0 && !(min_step < max_step)) {
    throw UsageError("minimum step must be below the maximum step");
  }
  if (!(safety > 0.0 && safety <= 1.0)) throw UsageError("safety factor must be in (0, 1]");
  if (max_attempts == 0) throw UsageError("step budget must be positive");
}

namespace {

bool finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void check_start(const VectorField& f, std::span<const double> y0, double T) {
  if (y0.size() != f.dim) throw ShapeError("initial point does not match the field dimension");
  if (!(T > 0.0) || !std::isfinite(T)) throw UsageError("final time must be positive and finite");
  if (!finite(y0)) throw UsageError("initial point is not finite");
}

// One fixed step from (t, y) into out. Scratch vectors are reused.
class FixedStepper {
 public:
  FixedStepper(const VectorField& f, FixedMethod m)
      : eval_(f), method_(m), n_(f.dim), k_(4, Vec(f.dim)), tmp_(f.dim) {}

  void step(double t, const Vec& y, double h, Vec& out) {
    if (method_ == FixedMethod::euler) {
      eval_(t, y, k_[0]);
      for (std::size_t i = 0; i < n_; ++i) out[i] = y[i] + h * k_[0][i];
      return;
    }
    eval_(t, y, k_[0]);
    for (std::size_t i = 0; i < n_; ++i) tmp_[i] = y[i] + 0.5 * h * k_[0][i];
    eval_(t + 0.5 * h, tmp_, k_[1]);
    for (std::size_t i = 0; i < n_; ++i) tmp_[i] = y[i] + 0.5 * h * k_[1][i];
    eval_(t + 0.5 * h, tmp_, k_[2]);
    for (std::size_t i = 0; i < n_; ++i) tmp_[i] = y[i] + h * k_[2][i];
    eval_(t + h, tmp_, k_[3]);
    for (std::size_t i = 0; i < n_; ++i) {
      out[i] = y[i] + h / 6.0 * (k_[0][i] + 2.0 * k_[1][i] + 2.0 * k_[2][i] + k_[3][i]);
    }
  }

 private:
  FieldEvaluator eval_;
  FixedMethod method_;
  std::size_t n_;
  std::vector<Vec> k_;
  Vec tmp_;
};

struct Tableau {
  std::size_t stages;        // including the FSAL stage
  std::vector<double> c;     // per stage
  std::vector<std::vector<double>> a;  // a[i][j], j < i; last row is the solution weights
  std::vector<double> e;     // error weights over all stages
  int order;                 // order of the lower embedded solution
};

const Tableau& dormand_prince() {
  static const Tableau t{
      7,
      {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0},
      {{},
       {1.0 / 5},
       {3.0 / 40, 9.0 / 40},
       {44.0 / 45, -56.0 / 15, 32.0 / 9},
       {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
       {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
       {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}},
      {71.0 / 57600, 0.0, -71.0 / 16695, 71.0 / 1920, -17253.0 / 339200, 22.0 / 525,
       -1.0 / 40},
      4};
  return t;
}

const Tableau& bogacki_shampine() {
  static const Tableau t{4,
                         {0.0, 1.0 / 2, 3.0 / 4, 1.0},
                         {{}, {1.0 / 2}, {0.0, 3.0 / 4}, {2.0 / 9, 1.0 / 3, 4.0 / 9}},
                         {-5.0 / 72, 1.0 / 12, 1.0 / 9, -1.0 / 8},
                         2};
  return t;
}

}  // namespace

Trajectory integrate_fixed(const VectorField& f, std::span<const double> y0, double T, double h,
                           FixedMethod method, std::size_t thin) {
  check_start(f, y0, T);
  if (!(h > 0.0) || !std::isfinite(h)) throw UsageError("step size must be positive");
  if (thin == 0) throw UsageError("thinning stride must be at least 1");
  const double count = std::ceil(T / h * (1.0 - 1e-12));
  if (count > 1e12) throw UsageError("too many steps");
  const auto steps = static_cast<std::size_t>(std::max(1.0, count));

  Trajectory traj;
  traj.times.push_back(0.0);
  traj.states.emplace_back(y0.begin(), y0.end());
  FixedStepper stepper(f, method);
  Vec y(y0.begin(), y0.end());
  Vec next(f.dim);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * h;
    const double t_next = k + 1 == steps ? T : static_cast<double>(k + 1) * h;
    stepper.step(t, y, t_next - t, next);
    if (!finite(next)) {
      traj.status = TerminalStatus::non_finite_state;
      if (traj.times.back() != t) {
        traj.times.push_back(t);
        traj.states.push_back(y);
      }
      return traj;
    }
    std::swap(y, next);
    ++traj.steps;
    if ((k + 1) % thin == 0 || k + 1 == steps) {
      traj.times.push_back(t_next);
      traj.states.push_back(y);
    }
  }
  return traj;
}

Vec fixed_state_at(const VectorField& f, std::span<const double> y0, double h, std::size_t steps,
                   FixedMethod method) {
  if (y0.size() != f.dim) throw ShapeError("initial point does not match the field dimension");
  if (!(h > 0.0)) throw UsageError("step size must be positive");
  FixedStepper stepper(f, method);
  Vec y(y0.begin(), y0.end());
  Vec next(f.dim);
  for (std::size_t k = 0; k < steps; ++k) {
    stepper.step(static_cast<double>(k) * h, y, h, next);
    if (!finite(next)) throw NumericalError("non-finite state after step " + std::to_string(k + 1));
    std::swap(y, next);
  }
  return y;
}

Trajectory integrate_adaptive(const VectorField& f, std::span<const double> y0, double T,
                              const StepControl& ctrl, AdaptiveMethod method) {
  check_start(f, y0, T);
  ctrl.validate();
  const Tableau& tab = method == AdaptiveMethod::rk45 ? dormand_prince() : bogacki_shampine();
  const std::size_t n = f.dim;
  const std::size_t s = tab.stages;
  const double max_step = ctrl.max_step > 0.0 ? std::min(ctrl.max_step, T) : T;
  const double exponent = -1.0 / (tab.order + 1);

  FieldEvaluator eval(f);
  std::vector<Vec> k(s, Vec(n));
  Vec y(y0.begin(), y0.end());
  Vec stage(n);
  Vec y_new(n);
  double t = 0.0;

  Trajectory traj;
  traj.times.push_back(0.0);
  traj.states.push_back(y);

  auto err_norm = [&](const Vec& a, const Vec& b, const std::vector<Vec>& ks, double h) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double e = 0.0;
      for (std::size_t j = 0; j < s; ++j) e += tab.e[j] * ks[j][i];
      const double scale = ctrl.atol + ctrl.rtol * std::max(std::fabs(a[i]), std::fabs(b[i]));
      const double r = h * e / scale;
      acc += r * r;
    }
    return std::sqrt(acc / static_cast<double>(n));
  };

  eval(t, y, k[0]);
  if (!finite(k[0])) {
    traj.status = TerminalStatus::non_finite_state;
    return traj;
  }
  // Initial step from the scale of y and its derivative.
  double h;
  {
    double d0 = 0.0;
    double d1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double sc = ctrl.atol + ctrl.rtol * std::fabs(y[i]);
      d0 += (y[i] / sc) * (y[i] / sc);
      d1 += (k[0][i] / sc) * (k[0][i] / sc);
    }
    d0 = std::sqrt(d0 / n);
    d1 = std::sqrt(d1 / n);
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h = std::clamp(h, ctrl.min_step, max_step);
  }

  while (t < T) {
    if (traj.steps + traj.rejected >= ctrl.max_attempts) {
      traj.status = TerminalStatus::step_underflow;
      return traj;
    }
    double cap = max_step;
    const bool before_switch = f.switch_time && t < *f.switch_time;
    if (before_switch) cap = std::min(cap, *f.switch_time / 10.0);
    h = std::min(h, cap);
    double target = t + h;
    bool landing = false;
    if (before_switch && target >= *f.switch_time) {
      target = *f.switch_time;
      landing = true;
    }
    if (target >= T || T - target < ctrl.min_step) {
      target = T;
      landing = true;
    }
    const double step = target - t;

    for (std::size_t i = 1; i < s; ++i) {
      const auto& row = tab.a[i];
      for (std::size_t c = 0; c < n; ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < i; ++j) acc += row[j] * k[j][c];
        stage[c] = y[c] + step * acc;
      }
      if (i + 1 == s) y_new = stage;
      eval(i + 1 == s ? target : t + tab.c[i] * step, stage, k[i]);
    }
    const double err = finite(y_new) && finite(k[s - 1]) ? err_norm(y, y_new, k, step)
                                                         : std::numeric_limits<double>::infinity();
    if (err <= 1.0) {
      t = landing ? target : t + step;
      std::swap(y, y_new);
      std::swap(k[0], k[s - 1]);
      ++traj.steps;
      traj.times.push_back(t);
      traj.states.push_back(y);
      const double grow = err == 0.0 ? 5.0 : std::min(5.0, ctrl.safety * std::pow(err, exponent));
      h = std::max(step, h) * std::max(1.0, grow);
      continue;
    }
    ++traj.rejected;
    const double shrink =
        std::isfinite(err) ? std::max(0.2, ctrl.safety * std::pow(err, exponent)) : 0.2;
    h = step * shrink;
    if (h < ctrl.min_step) {
      traj.status = std::isfinite(err) ? TerminalStatus::step_underflow
                                       : TerminalStatus::non_finite_state;
      return traj;
    }
  }
  return traj;
}

Vec endpoint(const Trajectory& traj) {
  if (traj.status != TerminalStatus::completed) {
    throw UnavailableEndpoint("trajectory ended with status " + status_name(traj.status),
                              status_name(traj.status));
  }
  if (traj.states.empty()) throw UsageError("endpoint of an empty trajectory");
  return traj.states.back();
}

}  // namespace oinn

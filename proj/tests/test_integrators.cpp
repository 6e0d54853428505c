#include <cmath>
#include <vector>

#include "doctest.h"
#include "oinn/benchmarks.hpp"
#include "oinn/errors.hpp"
#include "oinn/integrators.hpp"

using namespace oinn;

namespace {

VectorField decay() {
  VectorField f;
  f.name = "decay";
  f.dim = 1;
  f.build = [](ad::Expr, ad::Expr y) { return -y; };
  return f;
}

VectorField blowup() {
  VectorField f;
  f.name = "square";
  f.dim = 1;
  f.build = [](ad::Expr, ad::Expr y) { return y * y * y; };
  return f;
}

double endpoint_error(FixedMethod m, double h) {
  const Trajectory tr = integrate_fixed(decay(), Vec{1.0}, 1.0, h, m);
  return std::fabs(endpoint(tr)[0] - std::exp(-1.0));
}

// Least-squares slope of log(err) against log(h).
double measured_order(FixedMethod m) {
  const std::vector<double> hs{0.1, 0.05, 0.025, 0.0125};
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (double h : hs) {
    const double x = std::log(h);
    const double y = std::log(endpoint_error(m, h));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(hs.size());
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

bool all_finite(const Trajectory& tr) {
  for (const Vec& s : tr.states) {
    for (double v : s) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("rk4 on exponential decay") {
  const Trajectory tr = integrate_fixed(decay(), Vec{1.0}, 1.0, 0.01, FixedMethod::rk4);
  CHECK(std::fabs(endpoint(tr)[0] - 0.367879441171442) <= 1e-8);
  CHECK(tr.times.front() == 0.0);
  CHECK(tr.times.back() == 1.0);
  CHECK(tr.states.front() == Vec{1.0});
  CHECK(tr.steps == 100);
  for (std::size_t i = 1; i < tr.times.size(); ++i) CHECK(tr.times[i] > tr.times[i - 1]);
}

TEST_CASE("measured order of accuracy") {
  const double rk4 = measured_order(FixedMethod::rk4);
  const double euler = measured_order(FixedMethod::euler);
  CHECK(rk4 >= 3.8);
  CHECK(euler >= 0.9);
  // Halving h cuts the rk4 error by about 16.
  const double ratio = endpoint_error(FixedMethod::rk4, 0.05) / endpoint_error(FixedMethod::rk4, 0.025);
  CHECK(ratio > 14.0);
  CHECK(ratio < 18.0);
}

TEST_CASE("fixed-step thinning and landing") {
  const Trajectory tr = integrate_fixed(decay(), Vec{1.0}, 1.0, 0.3, FixedMethod::euler);
  CHECK(tr.steps == 4);
  CHECK(tr.times.back() == 1.0);
  CHECK(tr.states.back()[0] == doctest::Approx(0.7 * 0.7 * 0.7 * 0.9).epsilon(1e-15));

  const Trajectory thin = integrate_fixed(decay(), Vec{1.0}, 1.0, 0.01, FixedMethod::rk4, 25);
  CHECK(thin.times.size() == 5);
  CHECK(thin.times[1] == doctest::Approx(0.25));
  CHECK(thin.states.back() == integrate_fixed(decay(), Vec{1.0}, 1.0, 0.01, FixedMethod::rk4).states.back());
  CHECK_THROWS_AS(integrate_fixed(decay(), Vec{1.0}, 1.0, 0.0, FixedMethod::rk4), UsageError);
  CHECK_THROWS_AS(integrate_fixed(decay(), Vec{1.0, 2.0}, 1.0, 0.1, FixedMethod::rk4), ShapeError);
}

TEST_CASE("fixed_state_at matches the stored trajectory") {
  const ExampleInstance ex = load_example(4);
  const Trajectory tr = integrate_fixed(ex.field, ex.y0, 0.2, 0.0002, FixedMethod::rk4, 100);
  // The stored run shortens its last step to land on T, so agreement is to rounding only.
  const Vec direct = fixed_state_at(ex.field, ex.y0, 0.0002, 1000, FixedMethod::rk4);
  CHECK(max_abs_diff(direct, tr.states.back()) <= 1e-12);
}

TEST_CASE("adaptive integration of exponential decay") {
  const Trajectory tr = integrate_adaptive(decay(), Vec{1.0}, 1.0);
  CHECK(tr.status == TerminalStatus::completed);
  CHECK(tr.times.back() == 1.0);
  CHECK(std::fabs(endpoint(tr)[0] - std::exp(-1.0)) <= 1e-6);
  for (AdaptiveMethod m : {AdaptiveMethod::rk45, AdaptiveMethod::rk23}) {
    for (double tol : {1e-4, 1e-6, 1e-8}) {
      StepControl c;
      c.rtol = tol;
      c.atol = tol * 1e-3;
      const double err = std::fabs(endpoint(integrate_adaptive(decay(), Vec{1.0}, 1.0, c, m))[0] -
                                   std::exp(-1.0)) / std::exp(-1.0);
      CHECK(err < 10 * tol);
    }
  }
}

TEST_CASE("adaptive restart equals a single run") {
  const ExampleInstance ex = load_example(3);
  StepControl c;
  const Vec whole = endpoint(integrate_adaptive(ex.field, ex.y0, 4.0, c));
  const Vec half = endpoint(integrate_adaptive(ex.field, ex.y0, 2.0, c));
  const Vec resumed = endpoint(integrate_adaptive(ex.field, half, 2.0, c));
  for (std::size_t i = 0; i < whole.size(); ++i) {
    CHECK(std::fabs(resumed[i] - whole[i]) <= 5 * (c.atol + c.rtol * std::fabs(whole[i])));
  }
}

TEST_CASE("integrations are deterministic") {
  const ExampleInstance ex = load_example(5);
  const Trajectory a = integrate_adaptive(ex.field, ex.y0, 3.0);
  const Trajectory b = integrate_adaptive(ex.field, ex.y0, 3.0);
  CHECK(a.times == b.times);
  CHECK(a.states == b.states);
  const Trajectory c = integrate_fixed(ex.field, ex.y0, 1.0, 0.001, FixedMethod::rk4);
  const Trajectory d = integrate_fixed(ex.field, ex.y0, 1.0, 0.001, FixedMethod::rk4);
  CHECK(c.states == d.states);
}

TEST_CASE("non-finite states truncate the trajectory") {
  const Trajectory tr = integrate_fixed(blowup(), Vec{1.0}, 5.0, 0.05, FixedMethod::euler);
  CHECK(tr.status == TerminalStatus::non_finite_state);
  CHECK(all_finite(tr));
  CHECK_THROWS_AS(endpoint(tr), UnavailableEndpoint);
  try {
    endpoint(tr);
  } catch (const UnavailableEndpoint& e) {
    CHECK(e.status() == "non-finite-state");
  }
  const Trajectory ad = integrate_adaptive(blowup(), Vec{1.0}, 5.0);
  CHECK(ad.status != TerminalStatus::completed);
  CHECK(all_finite(ad));
}

TEST_CASE("endpoint of a single step") {
  const Trajectory tr = integrate_fixed(decay(), Vec{2.0}, 0.1, 0.1, FixedMethod::euler);
  CHECK(tr.steps == 1);
  CHECK(endpoint(tr) == Vec{2.0 - 0.2});
}

TEST_CASE("projection fields of Examples 1-4 converge by T = 10") {
  for (int id = 1; id <= 4; ++id) {
    const ExampleInstance ex = load_example(id);
    const Trajectory tr = integrate_fixed(ex.field, ex.y0, 10.0, 0.001, FixedMethod::rk4, 10000);
    const Vec p = ex.projection.apply(endpoint(tr));
    CHECK(norm2(npe_residual(p, *ex.npe)) <= 0.05);
  }
}

TEST_CASE("Example 1 numerical column at collocation 50000") {
  const ExampleInstance ex = load_example(1);
  const Trajectory tr = integrate_fixed(ex.field, ex.y0, 10.0, 0.0002, FixedMethod::rk4, 50000);
  CHECK(tr.steps == 50000);
  CHECK(max_abs_diff(ex.projection.apply(endpoint(tr)), Vec{0.82, 1.65, 0.0, 0.10, 0.0}) <= 0.05);
}

TEST_CASE("Example 2 endpoint") {
  const ExampleInstance ex = load_example(2);
  const Trajectory tr = integrate_fixed(ex.field, ex.y0, 10.0, 0.0002, FixedMethod::rk4, 50000);
  CHECK(max_abs_diff(ex.projection.apply(endpoint(tr)), Vec{1, 2, 0, 1}) <= 0.05);
}

TEST_CASE("Example 3 with rk45") {
  const ExampleInstance ex = load_example(3);
  const Trajectory tr = integrate_adaptive(ex.field, ex.y0, 10.0);
  CHECK(max_abs_diff(ex.projection.apply(endpoint(tr)), Vec{28.06, -3, -3, 7.70}) <= 0.05);
}

TEST_CASE("Example 6 under tight tolerances fails cleanly or completes") {
  const ExampleInstance ex = load_example(6);
  StepControl c;
  c.rtol = 1e-10;
  c.atol = 1e-12;
  c.max_attempts = 200000;
  const Trajectory tr = integrate_adaptive(ex.field, ex.y0, 10.0, c);
  CHECK((tr.status == TerminalStatus::completed || tr.status == TerminalStatus::step_underflow));
  CHECK(all_finite(tr));
  if (tr.status != TerminalStatus::completed) CHECK_THROWS_AS(endpoint(tr), UnavailableEndpoint);
}

TEST_CASE("adaptive steps land on the switch time") {
  const ExampleInstance ex = load_example(6);
  StepControl c;
  c.rtol = 1e-3;
  c.atol = 1e-6;
  const Trajectory tr = integrate_adaptive(ex.field, ex.y0, 2.0, c);
  bool hit = false;
  double widest = 0;
  for (std::size_t i = 1; i < tr.times.size(); ++i) {
    if (tr.times[i] == *ex.field.switch_time) hit = true;
    if (tr.times[i] <= *ex.field.switch_time) widest = std::max(widest, tr.times[i] - tr.times[i - 1]);
  }
  CHECK(hit);
  CHECK(widest <= *ex.field.switch_time / 10 + 1e-15);
}

TEST_CASE("step control validation and method names") {
  StepControl c;
  c.rtol = 0;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c = StepControl{};
  c.min_step = 1.0;
  c.max_step = 0.5;
  CHECK_THROWS_AS(c.validate(), UsageError);
  CHECK(parse_fixed_method("rk4") == FixedMethod::rk4);
  CHECK(parse_adaptive_method("rk23") == AdaptiveMethod::rk23);
  CHECK_THROWS_AS(parse_fixed_method("rk5"), UsageError);
  CHECK(status_name(TerminalStatus::step_underflow) == "step-underflow");
}

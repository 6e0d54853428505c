#pragma once

// The six registered example instances: problem data, vector field, the
// endpoint projection, how solutions are scored, and reference
// solutions (two decimals, compared with tolerance 0.05).

#include <optional>
#include <string>
#include <vector>

#include "oinn/dynamics.hpp"
#include "oinn/integrators.hpp"
#include "oinn/model.hpp"
#include "oinn/problems.hpp"
#include "oinn/trainer.hpp"

namespace oinn {

enum class EpsilonKind { npe_error, objective };

std::string epsilon_kind_name(EpsilonKind k);

// How the integrator baseline for an instance is run by default.
struct IntegratorChoice {
  bool adaptive = false;
  FixedMethod fixed = FixedMethod::rk4;
  AdaptiveMethod method = AdaptiveMethod::rk45;
  double step = 0.0002;
  double rtol = 1e-6;
  double atol = 1e-9;
};

struct ExampleInstance {
  int id = 0;
  std::string name;
  std::string problem_class;  // cnlp | vi | ncp
  std::size_t dim = 0;
  std::optional<NpeProblem> npe;
  std::optional<StandardCnlp> cnlp;
  VectorField field;
  Projection projection;
  EpsilonKind epsilon_kind = EpsilonKind::npe_error;
  Vec y0;
  double horizon = 10.0;
  Vec reference;             // two-decimal solution of the trained network
  Vec integrator_reference;  // two-decimal solution of the numerical method
  std::optional<double> reference_value;  // objective, for objective-scored instances
  IntegratorChoice integrator;
  std::string note;

  SolutionMetric metric(double alpha = 1.0, double feas_tol = 1e-6) const;
  // Score of a raw state: projection first, then the metric.
  double score(std::span<const double> y) const;
  // Same instance started from y0. Fields that depend on the start (the
  // switch time of Example 6) are rebuilt.
  ExampleInstance with_initial_point(Vec y0) const;
};

inline constexpr int kExampleCount = 6;

// Throws UsageError for ids outside 1..6.
ExampleInstance load_example(int id);
std::vector<ExampleInstance> all_examples();

// Example 6 field written out branch by branch (mu and dB as four cases).
VectorField example6_field(std::span<const double> x0 = {});

struct VerifyReport {
  int id = 0;
  double value = 0.0;     // epsilon_npe, or the objective
  bool feasible = true;   // objective instances only
  bool passed = false;
  std::string detail;
};

inline constexpr double kReferenceTolerance = 0.05;

// Scores `candidate` (default: the instance's reference) as the instance
// scores solutions: npe instances pass with epsilon <= 0.05, objective
// instances pass when the projected point is feasible and its objective is
// within 0.05 of the reference value.
VerifyReport verify_reference(const ExampleInstance& inst,
                              std::optional<Vec> candidate = std::nullopt);

// Max elementwise distance.
double max_abs_diff(std::span<const double> a, std::span<const double> b);

}  // namespace oinn

#pragma once

// Neurodynamic vector fields dy/dt = phi(t, y) whose trajectories converge to
// solutions of the underlying problem. Fields are expression builders: the
// integrators evaluate them numerically, the trainer differentiates through
// them.
//
// Set-valued terms use one fixed selection: sign(0) = 0, relu'(0) = 0, and a
// constraint exactly on its boundary counts as satisfied.

#include <functional>
#include <optional>
#include <span>
#include <string>

#include "oinn/autodiff/evaluator.hpp"
#include "oinn/problems.hpp"

namespace oinn {

struct VectorField {
  std::string name;
  std::size_t dim = 0;
  bool time_dependent = false;
  // Builds phi(t, y) in the graph of `y`. `t` is a scalar expression.
  std::function<ad::Expr(ad::Expr t, ad::Expr y)> build;
  // Time at which a piecewise-constant-in-time gate switches, if any.
  std::optional<double> switch_time;
};

// phi(y) = lambda (-G(P(y)) + P(y) - y)
VectorField projection_field(const NpeProblem& p, double lambda = 1.0);

// How the equality residual r = A x - b drives x back to the affine set.
enum class EqualityPull {
  sign,    // A^T sign(r)
  linear,  // A^T r
};

// State y = [x; u]:
//   dx/dt = -(I - U)(grad f + Jg^T (u + g)^+) - A^T pull(A x - b)
//   du/dt = ((u + g)^+ - u) / 2
// with U = A^T (A A^T)^{-1} A. Needs equality constraints and at least one
// inequality.
VectorField multiplier_field(const StandardCnlp& p, EqualityPull pull = EqualityPull::sign);

// dx/dt = -theta(t) (I - U)(mu(x) grad f + dB(x)) - A^T sign(A x - b),
// theta(t) = [t > T0], mu = prod_i [g_i <= 0], dB = sum_i [g_i > 0] grad g_i.
VectorField switched_penalty_field(const StandardCnlp& p, std::span<const double> x0);

// T0 = 1 + ||A x0 - b||_1 / lambda_min(A A^T)
double penalty_switch_time(const AffineSet& eq, std::span<const double> x0);

// Componentwise sign with rho(0) = 0.
Vec rho_select(std::span<const double> s);

// Numeric evaluation of a field, reusing one compiled program.
class FieldEvaluator {
 public:
  explicit FieldEvaluator(const VectorField& field);
  FieldEvaluator(const FieldEvaluator&) = delete;
  FieldEvaluator& operator=(const FieldEvaluator&) = delete;

  std::size_t dim() const { return dim_; }
  void operator()(double t, std::span<const double> y, std::span<double> out);
  Vec operator()(double t, std::span<const double> y);

 private:
  std::size_t dim_;
  ad::Graph graph_;
  ad::Expr out_;
  std::optional<ad::Program> program_;
  bool uses_time_ = false;
};

}  // namespace oinn

#pragma once

// Problem classes and the reformulations that turn them into a nonlinear
// projection equation  P_omega(y - G(y)) = y  over a box omega.
//
// Maps (objective, constraints, G) are written against the expression graph,
// so the same definition is evaluated numerically, differentiated for KKT
// systems, and embedded in vector fields.

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oinn/autodiff/graph.hpp"

namespace oinn {

using Vec = std::vector<double>;

// Builds the image of a graph expression. Must only use the graph of its
// argument and must not create leaves.
using VectorMap = std::function<ad::Expr(ad::Expr)>;
using ScalarMap = std::function<ad::Expr(ad::Expr)>;

// Axis-aligned box; infinite bounds are IEEE infinities.
class BoxSet {
 public:
  BoxSet() = default;
  // Throws ShapeError on length mismatch and UsageError if lower > upper.
  BoxSet(Vec lower, Vec upper);

  static BoxSet whole(std::size_t n);
  static BoxSet orthant(std::size_t n);
  static BoxSet uniform(std::size_t n, double lower, double upper);
  // Cartesian product a x b.
  static BoxSet product(const BoxSet& a, const BoxSet& b);

  std::size_t size() const { return lower_.size(); }
  const Vec& lower() const { return lower_; }
  const Vec& upper() const { return upper_; }
  bool contains(std::span<const double> y, double tol = 0.0) const;

 private:
  Vec lower_;
  Vec upper_;
};

Vec project_box(std::span<const double> s, const BoxSet& omega);

// { x : A x = b } with A (rows x cols, row-major) of full row rank. The
// Cholesky factor of A A^T is computed once at construction.
class AffineSet {
 public:
  // Throws FactorizationError when A is rank deficient.
  AffineSet(std::size_t rows, std::size_t cols, Vec a, Vec b);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  const Vec& matrix() const { return a_; }
  const Vec& rhs() const { return b_; }

  // x - A^T (A A^T)^{-1} (A x - b)
  Vec project(std::span<const double> x) const;
  // A x - b
  Vec residual(std::span<const double> x) const;
  // I - A^T (A A^T)^{-1} A, row-major cols x cols.
  Vec tangent_projector() const;
  // Smallest eigenvalue of A A^T.
  double lambda_min() const { return lambda_min_; }

 private:
  struct Factor;
  std::size_t rows_;
  std::size_t cols_;
  Vec a_;
  Vec b_;
  double lambda_min_ = 0.0;
  std::shared_ptr<const Factor> factor_;
};

struct NpeProblem {
  std::size_t dim = 0;
  VectorMap G;
  BoxSet omega;

  // Throws ShapeError if omega's dimension differs from dim.
  void validate() const;
};

// min f(x)  s.t.  g(x) <= 0,  A x = b (optional),  x in bounds (optional).
struct StandardCnlp {
  std::size_t num_vars = 0;
  std::size_t num_ineq = 0;
  ScalarMap f;
  VectorMap g;  // may be empty when num_ineq == 0
  std::optional<AffineSet> equality;
  std::optional<BoxSet> bounds;

  void validate() const;
};

struct ViProblem {
  std::size_t dim = 0;
  VectorMap G;
  BoxSet omega;
};

struct NcpProblem {
  std::size_t dim = 0;
  VectorMap G;
};

// Numeric evaluation of a map at a point (builds a throwaway graph).
Vec evaluate(const VectorMap& map, std::span<const double> y);
double evaluate_scalar(const ScalarMap& map, std::span<const double> x);

// P_omega(y - alpha G(y)) - y
Vec npe_residual(std::span<const double> y, const NpeProblem& p, double alpha = 1.0);

NpeProblem ncp_as_npe(const NcpProblem& p);
NpeProblem vi_as_npe(const ViProblem& p);

// y = [x; u],  G(y) = [grad f(x) + Jg(x)^T u; -g(x)],  omega = bounds x R_+^k.
// Gradients come from the expression engine. Throws UsageError if the
// problem has equality constraints.
NpeProblem kkt_npe_of_cnlp(const StandardCnlp& p);

double norm2(std::span<const double> v);

}  // namespace oinn

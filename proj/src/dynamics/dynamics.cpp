#include "oinn/dynamics.hpp"

#include <cmath>

#include "oinn/autodiff/transform.hpp"
#include "oinn/errors.hpp"

namespace oinn {

namespace {

ad::Expr box_projection(ad::Expr y, const BoxSet& omega) {
  return ad::clamp(y, omega.lower(), omega.upper());
}

struct EqualityTerms {
  Vec projector;  // I - U
  Vec a;
  Vec b;
  std::size_t rows;
  std::size_t cols;
};

EqualityTerms equality_terms(const AffineSet& eq) {
  return {eq.tangent_projector(), eq.matrix(), eq.rhs(), eq.rows(), eq.cols()};
}

ad::Expr constant_matrix(ad::Graph& g, std::size_t m, std::size_t n, const Vec& data) {
  return g.constant(ad::Tensor::matrix(m, n, data));
}

}  // namespace

VectorField projection_field(const NpeProblem& p, double lambda) {
  p.validate();
  if (!(lambda > 0.0)) throw UsageError("projection_field: lambda must be positive");
  VectorField f;
  f.name = "projection";
  f.dim = p.dim;
  f.build = [p, lambda](ad::Expr, ad::Expr y) {
    const ad::Expr proj = box_projection(y, p.omega);
    const ad::Expr phi = -p.G(proj) + proj - y;
    return lambda == 1.0 ? phi : lambda * phi;
  };
  return f;
}

VectorField multiplier_field(const StandardCnlp& p, EqualityPull pull) {
  p.validate();
  if (!p.equality) throw UsageError("multiplier_field needs equality constraints");
  if (p.num_ineq == 0) throw UsageError("multiplier_field needs at least one inequality");
  const EqualityTerms eq = equality_terms(*p.equality);
  const std::size_t j = p.num_vars;
  const std::size_t k = p.num_ineq;
  VectorField out;
  out.name = "multiplier";
  out.dim = j + k;
  out.build = [p, eq, j, k, pull](ad::Expr, ad::Expr y) {
    ad::Graph& g = y.graph();
    const ad::Expr x = ad::slice(y, 0, j);
    const ad::Expr u = ad::slice(y, j, k);
    const ad::Expr grad_f = ad::gradient(p.f(x), x);
    const ad::Expr gx = p.g(x);
    const ad::Expr active = ad::relu(u + gx);
    const ad::Expr jt = ad::vjp(gx, std::vector<ad::Expr>{x}, active)[0];
    const ad::Expr a = constant_matrix(g, eq.rows, eq.cols, eq.a);
    const ad::Expr r = ad::matvec(a, x) - g.vector(eq.b);
    const ad::Expr pulled = pull == EqualityPull::sign ? ad::sign(r) : r;
    const ad::Expr dx = -ad::matvec(constant_matrix(g, j, j, eq.projector), grad_f + jt) -
                        ad::matvec_t(a, pulled);
    const ad::Expr du = 0.5 * (active - u);
    return ad::concat({dx, du});
  };
  return out;
}

double penalty_switch_time(const AffineSet& eq, std::span<const double> x0) {
  double l1 = 0.0;
  for (double r : eq.residual(x0)) l1 += std::fabs(r);
  return 1.0 + l1 / eq.lambda_min();
}

VectorField switched_penalty_field(const StandardCnlp& p, std::span<const double> x0) {
  p.validate();
  if (!p.equality) throw UsageError("switched_penalty_field needs equality constraints");
  if (x0.size() != p.num_vars) throw ShapeError("switched_penalty_field: x0 has the wrong dimension");
  const EqualityTerms eq = equality_terms(*p.equality);
  const double t0 = penalty_switch_time(*p.equality, x0);
  const std::size_t j = p.num_vars;
  const std::size_t k = p.num_ineq;
  VectorField out;
  out.name = "switched-penalty";
  out.dim = j;
  out.time_dependent = true;
  out.switch_time = t0;
  out.build = [p, eq, t0, j, k](ad::Expr t, ad::Expr x) {
    ad::Graph& g = x.graph();
    const ad::Expr theta = ad::relu(ad::sign(t - t0));
    ad::Expr descent = ad::gradient(p.f(x), x);
    if (k > 0) {
      const ad::Expr gx = p.g(x);
      const ad::Expr violated = ad::relu(ad::sign(gx));
      ad::Expr mu = 1.0 - ad::component(violated, 0);
      for (std::size_t i = 1; i < k; ++i) mu = mu * (1.0 - ad::component(violated, i));
      const ad::Expr barrier = ad::vjp(gx, std::vector<ad::Expr>{x}, violated)[0];
      descent = mu * descent + barrier;
    }
    const ad::Expr a = constant_matrix(g, eq.rows, eq.cols, eq.a);
    const ad::Expr r = ad::matvec(a, x) - g.vector(eq.b);
    return -(theta * ad::matvec(constant_matrix(g, j, j, eq.projector), descent)) -
           ad::matvec_t(a, ad::sign(r));
  };
  return out;
}

Vec rho_select(std::span<const double> s) {
  Vec out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = s[i] > 0.0 ? 1.0 : (s[i] < 0.0 ? -1.0 : 0.0);
  return out;
}

FieldEvaluator::FieldEvaluator(const VectorField& field) : dim_(field.dim) {
  const ad::Expr t = graph_.time_input("t");
  const ad::Expr y = graph_.input("y", ad::Shape::vector(dim_));
  out_ = field.build(t, y);
  if (out_.shape().size() != dim_) {
    throw ShapeError("field '" + field.name + "' returned " + out_.shape().str() +
                     " for a state of dimension " + std::to_string(dim_));
  }
  program_.emplace(graph_, std::vector<ad::Expr>{out_});
  uses_time_ = program_->has_leaf("t");
}

void FieldEvaluator::operator()(double t, std::span<const double> y, std::span<double> out) {
  if (y.size() != dim_ || out.size() != dim_) throw ShapeError("field evaluation: wrong dimension");
  if (uses_time_) program_->bind("t", std::span<const double>(&t, 1));
  program_->bind("y", y);
  program_->forward();
  const auto v = program_->value(out_);
  std::copy(v.begin(), v.end(), out.begin());
}

Vec FieldEvaluator::operator()(double t, std::span<const double> y) {
  Vec out(dim_);
  (*this)(t, y, out);
  return out;
}

}  // namespace oinn

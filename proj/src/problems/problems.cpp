#include "oinn/problems.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>

#include "oinn/autodiff/evaluator.hpp"
#include "oinn/autodiff/transform.hpp"
#include "oinn/errors.hpp"

namespace oinn {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require_size(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw ShapeError(std::string(what) + ": got dimension " + std::to_string(got) + ", expected " +
                     std::to_string(want));
  }
}

}  // namespace

BoxSet::BoxSet(Vec lower, Vec upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
  require_size(upper_.size(), lower_.size(), "box upper bounds");
  for (std::size_t i = 0; i < lower_.size(); ++i) {
    if (!(lower_[i] <= upper_[i])) {
      throw UsageError("box bound " + std::to_string(i) + ": lower exceeds upper");
    }
  }
}

BoxSet BoxSet::whole(std::size_t n) {
  const double inf = std::numeric_limits<double>::infinity();
  return BoxSet(Vec(n, -inf), Vec(n, inf));
}

BoxSet BoxSet::orthant(std::size_t n) {
  return BoxSet(Vec(n, 0.0), Vec(n, std::numeric_limits<double>::infinity()));
}

BoxSet BoxSet::uniform(std::size_t n, double lower, double upper) {
  return BoxSet(Vec(n, lower), Vec(n, upper));
}

BoxSet BoxSet::product(const BoxSet& a, const BoxSet& b) {
  Vec lo = a.lower_;
  Vec hi = a.upper_;
  lo.insert(lo.end(), b.lower_.begin(), b.lower_.end());
  hi.insert(hi.end(), b.upper_.begin(), b.upper_.end());
  return BoxSet(std::move(lo), std::move(hi));
}

bool BoxSet::contains(std::span<const double> y, double tol) const {
  require_size(y.size(), size(), "box membership");
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(y[i] >= lower_[i] - tol && y[i] <= upper_[i] + tol)) return false;
  }
  return true;
}

Vec project_box(std::span<const double> s, const BoxSet& omega) {
  require_size(s.size(), omega.size(), "project_box");
  Vec out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double lo = omega.lower()[i];
    const double hi = omega.upper()[i];
    out[i] = s[i] < lo ? lo : (s[i] > hi ? hi : s[i]);
  }
  return out;
}

// Thin QR of A^T = Q1 R, so A A^T = R^T R and A^T (A A^T)^{-1} r = Q1 R^{-T} r.
// Working from A^T avoids squaring the condition number of A.
struct AffineSet::Factor {
  Eigen::MatrixXd q1;  // cols x rows, orthonormal columns
  Eigen::MatrixXd r;   // rows x rows, upper triangular
};

AffineSet::AffineSet(std::size_t rows, std::size_t cols, Vec a, Vec b)
    : rows_(rows), cols_(cols), a_(std::move(a)), b_(std::move(b)) {
  if (rows == 0 || cols == 0) throw ShapeError("affine set needs a non-empty matrix");
  require_size(a_.size(), rows * cols, "affine matrix entries");
  require_size(b_.size(), rows, "affine right-hand side");
  if (rows > cols) throw FactorizationError("affine set: more equations than unknowns");

  const Eigen::Map<const RowMatrix> am(a_.data(), rows, cols);
  const Eigen::MatrixXd gram = am * am.transpose();
  double lambda_max = 0.0;
  if (rows == 1) {
    lambda_min_ = gram(0, 0);
    lambda_max = lambda_min_;
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    lambda_min_ = eig.eigenvalues().minCoeff();
    lambda_max = eig.eigenvalues().maxCoeff();
  }
  if (!(lambda_min_ > 1e-12 * std::max(1.0, lambda_max))) {
    throw FactorizationError("affine set: A has dependent rows (A A^T is singular)");
  }
  auto f = std::make_shared<Factor>();
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(am.transpose());
  f->q1 = qr.householderQ() * Eigen::MatrixXd::Identity(cols, rows);
  f->r = qr.matrixQR().topRows(rows).triangularView<Eigen::Upper>();
  for (std::size_t i = 0; i < rows; ++i) {
    if (!(std::fabs(f->r(i, i)) > 0.0)) {
      throw FactorizationError("affine set: QR factorization of A^T is singular");
    }
  }
  factor_ = std::move(f);
}

Vec AffineSet::residual(std::span<const double> x) const {
  require_size(x.size(), cols_, "affine residual");
  Vec r(rows_);
  for (std::size_t i = 0; i < rows_; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols_; ++j) s += a_[i * cols_ + j] * x[j];
    r[i] = s - b_[i];
  }
  return r;
}

Vec AffineSet::project(std::span<const double> x) const {
  const Vec r = residual(x);
  const Eigen::VectorXd s = factor_->r.transpose().triangularView<Eigen::Lower>().solve(
      Eigen::Map<const Eigen::VectorXd>(r.data(), rows_));
  const Eigen::VectorXd c = factor_->q1 * s;
  Vec out(x.begin(), x.end());
  for (std::size_t j = 0; j < cols_; ++j) out[j] -= c(j);
  return out;
}

Vec AffineSet::tangent_projector() const {
  const RowMatrix p =
      RowMatrix::Identity(cols_, cols_) - factor_->q1 * factor_->q1.transpose();
  return Vec(p.data(), p.data() + p.size());
}

void NpeProblem::validate() const {
  if (!G) throw UsageError("NPE problem without a map");
  require_size(omega.size(), dim, "NPE feasible set");
}

void StandardCnlp::validate() const {
  if (!f) throw UsageError("CNLP without an objective");
  if (num_ineq > 0 && !g) throw UsageError("CNLP declares inequalities but has no constraint map");
  if (equality) require_size(equality->cols(), num_vars, "CNLP equality constraints");
  if (bounds) require_size(bounds->size(), num_vars, "CNLP variable bounds");
}

Vec evaluate(const VectorMap& map, std::span<const double> y) {
  ad::Graph g;
  const ad::Expr in = g.input("y", ad::Shape::vector(y.size()));
  const ad::Expr out = map(in);
  ad::Bindings b;
  b.set("y", ad::Tensor::vector(Vec(y.begin(), y.end())));
  return ad::eval(out, b).data;
}

double evaluate_scalar(const ScalarMap& map, std::span<const double> x) {
  ad::Graph g;
  const ad::Expr in = g.input("x", ad::Shape::vector(x.size()));
  const ad::Expr out = map(in);
  if (!out.shape().is_scalar()) throw ShapeError("scalar map returned " + out.shape().str());
  ad::Bindings b;
  b.set("x", ad::Tensor::vector(Vec(x.begin(), x.end())));
  return ad::eval(out, b).item();
}

Vec npe_residual(std::span<const double> y, const NpeProblem& p, double alpha) {
  if (!(alpha > 0.0)) throw UsageError("npe_residual: alpha must be positive");
  require_size(y.size(), p.dim, "npe_residual");
  const Vec gy = evaluate(p.G, y);
  require_size(gy.size(), p.dim, "NPE map output");
  Vec step(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) step[i] = y[i] - alpha * gy[i];
  Vec r = project_box(step, p.omega);
  for (std::size_t i = 0; i < y.size(); ++i) r[i] -= y[i];
  return r;
}

NpeProblem ncp_as_npe(const NcpProblem& p) { return {p.dim, p.G, BoxSet::orthant(p.dim)}; }

NpeProblem vi_as_npe(const ViProblem& p) {
  NpeProblem out{p.dim, p.G, p.omega};
  out.validate();
  return out;
}

NpeProblem kkt_npe_of_cnlp(const StandardCnlp& p) {
  p.validate();
  if (p.equality) {
    throw UsageError("kkt_npe_of_cnlp: general equality constraints are not supported");
  }
  const std::size_t j = p.num_vars;
  const std::size_t k = p.num_ineq;
  const ScalarMap f = p.f;
  const VectorMap gmap = p.g;
  VectorMap G = [f, gmap, j, k](ad::Expr y) {
    const ad::Expr x = ad::slice(y, 0, j);
    const ad::Expr grad_f = ad::gradient(f(x), x);
    if (k == 0) return grad_f;
    const ad::Expr u = ad::slice(y, j, k);
    const ad::Expr gx = gmap(x);
    const ad::Expr jt_u = ad::vjp(gx, std::vector<ad::Expr>{x}, u)[0];
    return ad::concat({grad_f + jt_u, -gx});
  };
  const BoxSet xb = p.bounds ? *p.bounds : BoxSet::whole(j);
  return {j + k, std::move(G), BoxSet::product(xb, BoxSet::orthant(k))};
}

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace oinn

#include "oinn/trainer.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "oinn/autodiff/transform.hpp"
#include "oinn/errors.hpp"
#include "oinn/random.hpp"
#include "oinn/simd/kernels.hpp"

namespace oinn {

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw UsageError("learning rate must be positive");
  if (batch == 0) throw UsageError("batch size must be positive");
  if (!(gamma >= 0.0)) throw UsageError("gamma must be non-negative");
  if (cadence == 0) throw UsageError("epsilon cadence must be at least 1");
  if (!(horizon > 0.0)) throw UsageError("horizon must be positive");
  if (!(alpha > 0.0)) throw UsageError("alpha must be positive");
  if (hidden == 0) throw UsageError("hidden width must be positive");
  if (!(feas_tol >= 0.0)) throw UsageError("feasibility tolerance must be non-negative");
}

AdamState AdamState::zeros_like(const MlpParams& p) {
  return {MlpParams::zeros(p.dim, p.hidden), MlpParams::zeros(p.dim, p.hidden), 0};
}

SolutionMetric SolutionMetric::npe_error(NpeProblem p, double alpha) {
  SolutionMetric m;
  m.kind = Kind::npe;
  m.npe = std::move(p);
  m.alpha = alpha;
  return m;
}

SolutionMetric SolutionMetric::objective(StandardCnlp p, double feas_tol) {
  SolutionMetric m;
  m.kind = Kind::objective;
  m.cnlp = std::move(p);
  m.feas_tol = feas_tol;
  return m;
}

double SolutionMetric::operator()(std::span<const double> y) const {
  if (kind == Kind::npe) return epsilon_npe(y, *npe, alpha);
  return epsilon_objective(y, *cnlp, feas_tol);
}

double epsilon_npe(std::span<const double> y, const NpeProblem& p, double alpha) {
  return norm2(npe_residual(y, p, alpha));
}

double epsilon_objective(std::span<const double> y, const StandardCnlp& p, double feas_tol) {
  p.validate();
  if (y.size() < p.num_vars) throw ShapeError("epsilon_objective: state shorter than x");
  const double inf = std::numeric_limits<double>::infinity();
  const auto x = y.first(p.num_vars);
  for (double xi : x) {
    if (!std::isfinite(xi)) return inf;
  }
  if (p.bounds && !p.bounds->contains(x, feas_tol)) return inf;
  if (p.num_ineq > 0) {
    for (double gi : evaluate(p.g, x)) {
      if (!(gi <= feas_tol)) return inf;
    }
  }
  if (p.equality) {
    for (double r : p.equality->residual(x)) {
      if (!(std::fabs(r) <= feas_tol)) return inf;
    }
  }
  return evaluate_scalar(p.f, x);
}

LossEvaluator::LossEvaluator(const VectorField& f, std::size_t hidden, std::span<const double> y0,
                             double gamma)
    : dim_(f.dim), hidden_(hidden) {
  if (y0.size() != f.dim) throw ShapeError("initial point does not match the field dimension");
  const ad::Expr t = graph_.time_input("t");
  model_ = build_model_graph(graph_, t, dim_, hidden_, y0);
  const ad::Expr dy = ad::time_derivative(model_.state);
  const ad::Expr phi = f.build(t, model_.state);
  if (phi.shape().size() != dim_) throw ShapeError("field output does not match its dimension");
  const ad::Expr residual = dy - phi;
  loss_ = gamma == 0.0 ? ad::norm(residual) : ad::exp(-gamma * t) * ad::norm(residual);
  program_.emplace(graph_, std::vector<ad::Expr>{loss_});
}

void LossEvaluator::run_forward(std::span<const double> ts, const MlpParams& params) {
  if (ts.empty()) throw UsageError("loss of an empty batch");
  if (params.dim != dim_ || params.hidden != hidden_) {
    throw ShapeError("parameters do not match the loss evaluator");
  }
  params.validate();
  program_->set_batch(ts.size());
  program_->bind_batch("t", ts);
  program_->bind("w1", params.w1);
  program_->bind("b1", params.b1);
  program_->bind("w2", params.w2);
  program_->bind("b2", params.b2);
  program_->forward();
}

std::span<const double> LossEvaluator::pointwise() const { return program_->value(loss_); }

double LossEvaluator::loss(std::span<const double> ts, const MlpParams& params) {
  run_forward(ts, params);
  double sum = 0.0;
  for (double v : pointwise()) sum += v;
  return sum / static_cast<double>(ts.size());
}

double LossEvaluator::loss_and_gradient(std::span<const double> ts, const MlpParams& params,
                                        MlpParams& grad) {
  const double mean = loss(ts, params);
  seed_.assign(ts.size(), 1.0 / static_cast<double>(ts.size()));
  program_->backward(loss_, seed_);
  grad = MlpParams::zeros(dim_, hidden_);
  auto copy = [&](ad::Expr leaf, Vec& out) {
    const auto a = program_->adjoint(leaf);
    out.assign(a.begin(), a.end());
  };
  copy(model_.w1, grad.w1);
  copy(model_.b1, grad.b1);
  copy(model_.w2, grad.w2);
  copy(model_.b2, grad.b2);
  return mean;
}

double pointwise_loss(double t, const OinnModel& m, const VectorField& f, double gamma) {
  const double ts[] = {t};
  return batch_loss(ts, m, f, gamma);
}

double batch_loss(std::span<const double> ts, const OinnModel& m, const VectorField& f,
                  double gamma) {
  m.validate();
  LossEvaluator le(f, m.params.hidden, m.y0, gamma);
  return le.loss(ts, m.params);
}

ad::GradientSet loss_gradient(std::span<const double> ts, const OinnModel& m,
                              const VectorField& f, double gamma) {
  m.validate();
  LossEvaluator le(f, m.params.hidden, m.y0, gamma);
  MlpParams g;
  le.loss_and_gradient(ts, m.params, g);
  const std::size_t n = m.params.dim;
  const std::size_t h = m.params.hidden;
  ad::GradientSet out;
  out.emplace("w1", ad::Tensor::matrix(h, 1, g.w1));
  out.emplace("b1", ad::Tensor::vector(g.b1));
  out.emplace("w2", ad::Tensor::matrix(n, h, g.w2));
  out.emplace("b2", ad::Tensor::vector(g.b2));
  return out;
}

void adam_step(MlpParams& p, const ad::GradientSet& g, AdamState& s, const AdamSettings& a) {
  p.validate();
  if (s.m.dim != p.dim || s.m.hidden != p.hidden) s = AdamState::zeros_like(p);
  s.step += 1;
  const double k = static_cast<double>(s.step);
  const simd::AdamCoeffs c{a.lr, a.beta1, a.beta2, a.eps, 1.0 - std::pow(a.beta1, k),
                           1.0 - std::pow(a.beta2, k)};
  const simd::Kernels& kern = simd::kernels();
  auto update = [&](const char* name, Vec& param, Vec& m, Vec& v) {
    const auto it = g.find(name);
    if (it == g.end()) throw UsageError(std::string("adam_step: no gradient for ") + name);
    if (it->second.data.size() != param.size()) {
      throw ShapeError(std::string("adam_step: gradient shape mismatch for ") + name);
    }
    kern.adam(param.data(), it->second.data.data(), m.data(), v.data(), param.size(), c);
  };
  update("w1", p.w1, s.m.w1, s.v.w1);
  update("b1", p.b1, s.m.b1, s.v.b1);
  update("w2", p.w2, s.m.w2, s.v.w2);
  update("b2", p.b2, s.m.b2, s.v.b2);
}

std::vector<double> sample_times(std::uint64_t seed, std::size_t iteration, std::size_t batch,
                                 double horizon) {
  std::vector<double> ts(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    ts[i] = horizon * rng::uniform(seed, rng::kBatch + iteration, i);
  }
  return ts;
}

TrainReport train(const VectorField& field, const OinnModel& m0, const Projection& projection,
                  const SolutionMetric& metric, const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  m0.validate();
  if (field.dim != m0.params.dim) throw ShapeError("model and field dimensions differ");

  OinnModel model = m0;
  model.horizon = cfg.horizon;
  LossEvaluator evaluator(field, model.params.hidden, model.y0, cfg.gamma);
  AdamState adam = AdamState::zeros_like(model.params);
  const AdamSettings settings{cfg.lr};
  MlpParams grad;

  const auto start = std::chrono::steady_clock::now();
  const auto elapsed_ms = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
  };

  TrainReport report;
  report.epsilon_best = std::numeric_limits<double>::infinity();
  bool stopped = false;
  auto record = [&](std::size_t iter, double loss) {
    const Vec solution = predict(model, projection);
    const double eps = metric(solution);
    HistoryRow row{iter, loss, eps, report.epsilon_best, 0.0};
    const bool first = report.history.empty();
    if (first || eps < report.epsilon_best) {
      report.epsilon_best = eps;
      report.best_iter = iter;
      report.best_model = model;
      report.best_solution = solution;
      row.epsilon_best = eps;
    }
    row.wall_ms = elapsed_ms();
    report.history.push_back(row);
    if (hooks.on_row) hooks.on_row(row);
    if (report.best_iter == iter && hooks.on_improve) hooks.on_improve(model, row);
    if (hooks.stop && hooks.stop(row)) stopped = true;
  };

  record(0, evaluator.loss(sample_times(cfg.seed, 0, cfg.batch, cfg.horizon), model.params));

  for (std::size_t it = 1; it <= cfg.iters && !stopped; ++it) {
    const auto ts = sample_times(cfg.seed, it, cfg.batch, cfg.horizon);
    const double loss = evaluator.loss_and_gradient(ts, model.params, grad);
    if (!std::isfinite(loss)) {
      throw NumericalError("non-finite loss at iteration " + std::to_string(it) +
                           " (parameter norm " + std::to_string(model.params.norm()) + ")");
    }
    ad::GradientSet g;
    g.emplace("w1", ad::Tensor{ad::Shape::matrix(grad.hidden, 1), std::move(grad.w1)});
    g.emplace("b1", ad::Tensor::vector(std::move(grad.b1)));
    g.emplace("w2", ad::Tensor{ad::Shape::matrix(grad.dim, grad.hidden), std::move(grad.w2)});
    g.emplace("b2", ad::Tensor::vector(std::move(grad.b2)));
    adam_step(model.params, g, adam, settings);
    if (!model.params.all_finite()) {
      throw NumericalError("non-finite parameters after iteration " + std::to_string(it));
    }
    if (it % cfg.cadence == 0 || it == cfg.iters) record(it, loss);
  }
  report.final_model = model;
  return report;
}

}  // namespace oinn

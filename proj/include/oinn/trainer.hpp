#pragma once

// Residual training of the approximate state solution and the epsilon-best
// loop: sample times, take an ADAM step on the weighted ODE residual, score
// the projected endpoint, keep the best parameters seen.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "oinn/autodiff/evaluator.hpp"
#include "oinn/dynamics.hpp"
#include "oinn/model.hpp"
#include "oinn/problems.hpp"

namespace oinn {

struct TrainConfig {
  double lr = 1e-3;
  std::size_t batch = 512;
  std::size_t iters = 50000;
  double gamma = 0.5;
  std::uint64_t seed = 0;
  std::size_t cadence = 1;  // score the endpoint every `cadence` iterations
  double horizon = 10.0;
  double alpha = 1.0;       // step in the projection-equation residual
  std::size_t hidden = 100;
  double feas_tol = 1e-6;

  void validate() const;
};

struct AdamState {
  MlpParams m;
  MlpParams v;
  std::uint64_t step = 0;

  static AdamState zeros_like(const MlpParams& p);
};

struct AdamSettings {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// How a candidate solution is scored (lower is better).
struct SolutionMetric {
  enum class Kind { npe, objective };
  Kind kind = Kind::npe;
  std::optional<NpeProblem> npe;
  std::optional<StandardCnlp> cnlp;
  double alpha = 1.0;
  double feas_tol = 1e-6;

  static SolutionMetric npe_error(NpeProblem p, double alpha = 1.0);
  static SolutionMetric objective(StandardCnlp p, double feas_tol = 1e-6);

  double operator()(std::span<const double> y) const;
};

struct HistoryRow {
  std::size_t iter = 0;
  double loss = 0.0;
  double epsilon = 0.0;
  double epsilon_best = 0.0;
  double wall_ms = 0.0;
};

struct TrainReport {
  double epsilon_best = 0.0;
  std::size_t best_iter = 0;
  OinnModel best_model;
  Vec best_solution;
  OinnModel final_model;
  std::vector<HistoryRow> history;
};

struct TrainHooks {
  std::function<void(const HistoryRow&)> on_row;
  // Called whenever epsilon_best improves (including iteration 0).
  std::function<void(const OinnModel&, const HistoryRow&)> on_improve;
  // Return true to stop after the current row.
  std::function<bool(const HistoryRow&)> stop;
};

// e^{-gamma t} || dy/dt - phi(t, y(t)) ||
double pointwise_loss(double t, const OinnModel& m, const VectorField& f, double gamma);
// Mean of pointwise losses, summed in index order.
double batch_loss(std::span<const double> ts, const OinnModel& m, const VectorField& f,
                  double gamma);
ad::GradientSet loss_gradient(std::span<const double> ts, const OinnModel& m,
                              const VectorField& f, double gamma);

// In-place ADAM update with bias correction.
void adam_step(MlpParams& p, const ad::GradientSet& g, AdamState& s, const AdamSettings& a);

// || P_omega(y - alpha G(y)) - y ||_2
double epsilon_npe(std::span<const double> y, const NpeProblem& p, double alpha = 1.0);
// f(x) if x = y[0:num_vars] satisfies every constraint within feas_tol, else +inf.
double epsilon_objective(std::span<const double> y, const StandardCnlp& p, double feas_tol = 1e-6);

// Batched loss and gradient for one field and model shape. Holds the compiled
// expression graph, so construct once per training run.
class LossEvaluator {
 public:
  LossEvaluator(const VectorField& f, std::size_t hidden, std::span<const double> y0, double gamma);
  LossEvaluator(const LossEvaluator&) = delete;
  LossEvaluator& operator=(const LossEvaluator&) = delete;

  // Mean loss over ts; gradient written into grad (shaped like params).
  double loss(std::span<const double> ts, const MlpParams& params);
  double loss_and_gradient(std::span<const double> ts, const MlpParams& params, MlpParams& grad);
  // Per-sample losses of the last evaluation.
  std::span<const double> pointwise() const;

 private:
  void run_forward(std::span<const double> ts, const MlpParams& params);

  std::size_t dim_;
  std::size_t hidden_;
  ad::Graph graph_;
  ModelGraph model_;
  ad::Expr loss_;
  std::optional<ad::Program> program_;
  std::vector<double> seed_;
};

// Uniform draws on [0, horizon) for one iteration of a seeded run.
std::vector<double> sample_times(std::uint64_t seed, std::size_t iteration, std::size_t batch,
                                 double horizon);

TrainReport train(const VectorField& field, const OinnModel& m0, const Projection& projection,
                  const SolutionMetric& metric, const TrainConfig& cfg,
                  const TrainHooks& hooks = {});

}  // namespace oinn

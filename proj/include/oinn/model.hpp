#pragma once

// Approximate state solution  y(t) = y0 + (1 - e^{-t}) N(t)  with a
// one-hidden-layer tanh network N(t) = W2 tanh(W1 t + b1) + b2. The factor
// vanishes at t = 0, so y(0) = y0 holds for every parameter value.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>

#include "oinn/autodiff/graph.hpp"
#include "oinn/problems.hpp"

namespace oinn {

struct MlpParams {
  std::size_t dim = 0;     // output dimension n
  std::size_t hidden = 0;  // hidden width h
  Vec w1;  // h x 1
  Vec b1;  // h
  Vec w2;  // n x h, row-major
  Vec b2;  // n

  static MlpParams zeros(std::size_t dim, std::size_t hidden);
  // Glorot-uniform weights, zero biases.
  static MlpParams glorot(std::size_t dim, std::size_t hidden, std::uint64_t seed);

  std::size_t count() const { return w1.size() + b1.size() + w2.size() + b2.size(); }
  double norm() const;
  bool all_finite() const;
  // Throws ShapeError if the arrays do not match dim/hidden.
  void validate() const;

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

struct OinnModel {
  MlpParams params;
  Vec y0;
  double horizon = 10.0;

  void validate() const;
};

// How the endpoint is mapped back to a candidate solution.
struct Projection {
  enum class Kind { identity, box, affine };
  Kind kind = Kind::identity;
  BoxSet box;
  // The affine projection acts on the leading eq->cols() entries; the rest
  // pass through unchanged.
  std::optional<AffineSet> affine;

  static Projection identity() { return {}; }
  static Projection onto_box(BoxSet box);
  static Projection onto_affine(AffineSet eq);

  Vec apply(std::span<const double> y) const;
  std::string name() const;
};

Vec nn_forward(double t, const MlpParams& p);
Vec model_forward(double t, const OinnModel& m);
// dy/dt by forward-mode evaluation.
Vec model_time_derivative(double t, const OinnModel& m);
Vec predict(const OinnModel& m, const Projection& proj);

// Parameter leaves named w1, b1, w2, b2 plus the expression of y(t).
struct ModelGraph {
  ad::Expr w1, b1, w2, b2;
  ad::Expr network;  // N(t)
  ad::Expr state;    // y(t)
};
ModelGraph build_model_graph(ad::Graph& g, ad::Expr t, std::size_t dim, std::size_t hidden,
                             std::span<const double> y0);

// Text checkpoint ("oinn-checkpoint 1"), values printed with 17 significant
// digits so a reload is bit-exact.
void save_checkpoint(const std::filesystem::path& path, const OinnModel& m);
OinnModel load_checkpoint(const std::filesystem::path& path);
std::string checkpoint_text(const OinnModel& m);
OinnModel parse_checkpoint(const std::string& text);

}  // namespace oinn

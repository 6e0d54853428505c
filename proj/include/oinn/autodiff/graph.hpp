#pragma once

// Expression graphs over scalars, vectors and matrices.
//
// A Graph is an append-only list of nodes; every node only references nodes
// created before it, so graphs are acyclic by construction. Shapes are checked
// when a node is created. Expr is a lightweight handle (graph pointer + node
// id); the Graph must outlive every Expr that refers to it.
//
// Branching is encoded with piecewise primitives. Their derivatives follow one
// fixed selection at breakpoints: relu'(0) = 0, |.|'(0) = 0, clamp' = 0 on a
// bound, sign' = 0 everywhere, and d||x|| = 0 at x = 0.

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "oinn/autodiff/tensor.hpp"

namespace oinn::ad {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

enum class Op : std::uint8_t {
  constant,
  input,
  parameter,
  add,
  sub,
  neg,
  mul,       // elementwise
  scale,     // scalar * tensor
  matvec,    // W x
  matvec_t,  // W^T x
  dot,
  tanh,
  exp,
  abs,
  relu,      // max(x, 0)
  clamp,     // min(max(x, lower), upper) with constant bounds
  sign,      // sign select, sign(0) = 0
  sqnorm,
  norm,
  recip,     // 1 / x
  slice,     // contiguous sub-vector (or single component as a scalar)
  embed,     // place into a zero vector at an offset
  concat,
};

std::string_view op_name(Op op);

struct Node {
  Op op = Op::constant;
  Shape shape;
  NodeId a = kNoNode;
  NodeId b = kNoNode;
  std::vector<NodeId> parts;  // concat operands
  std::size_t offset = 0;     // slice / embed
  std::string name;           // input / parameter
  bool time = false;          // input marked as the dual (time) direction
  std::vector<double> data;   // constant value, or clamp lower bounds
  std::vector<double> upper;  // clamp upper bounds
};

class Expr;

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = delete;
  Graph& operator=(Graph&&) = delete;

  Expr constant(Tensor value);
  Expr scalar(double v);
  Expr vector(std::vector<double> v);
  Expr filled(Shape shape, double v);

  // Named leaves. Names must be unique within a graph.
  Expr input(std::string name, Shape shape);
  // Scalar input used as the direction of time derivatives.
  Expr time_input(std::string name);
  Expr parameter(std::string name, Shape shape);

  std::size_t size() const { return nodes_.size(); }
  const Node& node(NodeId id) const { return nodes_.at(id); }
  std::optional<NodeId> find(std::string_view name) const;

  // Appends a node whose shape has already been validated by the caller.
  Expr push(Node node);

 private:
  Expr leaf(Op op, std::string name, Shape shape, bool time);

  std::vector<Node> nodes_;
};

class Expr {
 public:
  Expr() = default;
  Expr(Graph* graph, NodeId id) : graph_(graph), id_(id) {}

  Graph& graph() const { return *graph_; }
  NodeId id() const { return id_; }
  bool valid() const { return graph_ != nullptr && id_ != kNoNode; }
  const Node& node() const { return graph_->node(id_); }
  const Shape& shape() const { return node().shape; }

 private:
  Graph* graph_ = nullptr;
  NodeId id_ = kNoNode;
};

Expr operator+(Expr a, Expr b);
Expr operator-(Expr a, Expr b);
Expr operator-(Expr a);
// Elementwise product for equal shapes; scalar * tensor when one side is a scalar.
Expr operator*(Expr a, Expr b);
Expr operator/(Expr a, Expr b);

Expr operator+(Expr a, double c);
Expr operator+(double c, Expr a);
Expr operator-(Expr a, double c);
Expr operator-(double c, Expr a);
Expr operator*(double c, Expr a);
Expr operator*(Expr a, double c);

Expr scale(Expr s, Expr x);
Expr matvec(Expr w, Expr x);
Expr matvec_t(Expr w, Expr x);
Expr dot(Expr a, Expr b);
Expr tanh(Expr x);
Expr exp(Expr x);
Expr abs(Expr x);
Expr relu(Expr x);
Expr clamp(Expr x, std::vector<double> lower, std::vector<double> upper);
Expr sign(Expr x);
Expr sqnorm(Expr x);
Expr norm(Expr x);
Expr recip(Expr x);
Expr slice(Expr x, std::size_t offset, std::size_t length);
// Single vector component as a scalar.
Expr component(Expr x, std::size_t index);
Expr embed(Expr x, std::size_t offset, std::size_t length);
Expr concat(std::span<const Expr> parts);
Expr concat(std::initializer_list<Expr> parts);
// Sum of all entries, as a scalar.
Expr sum(Expr x);

}  // namespace oinn::ad

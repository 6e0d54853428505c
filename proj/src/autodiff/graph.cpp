#include "oinn/autodiff/graph.hpp"

#include <utility>

#include "oinn/errors.hpp"

namespace oinn::ad {

std::string Shape::str() const {
  switch (kind) {
    case Kind::scalar:
      return "scalar";
    case Kind::vector:
      return "vector(" + std::to_string(rows) + ")";
    case Kind::matrix:
      return "matrix(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
  }
  return "?";
}

Tensor Tensor::matrix(std::size_t m, std::size_t n, std::vector<double> data) {
  if (data.size() != m * n) {
    throw ShapeError("matrix data has " + std::to_string(data.size()) + " entries, expected " +
                     std::to_string(m * n));
  }
  return {Shape::matrix(m, n), std::move(data)};
}

double Tensor::item() const {
  if (data.size() != 1) throw ShapeError("item() on a tensor of shape " + shape.str());
  return data[0];
}

std::string_view op_name(Op op) {
  switch (op) {
    case Op::constant: return "constant";
    case Op::input: return "input";
    case Op::parameter: return "parameter";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::neg: return "neg";
    case Op::mul: return "mul";
    case Op::scale: return "scale";
    case Op::matvec: return "matvec";
    case Op::matvec_t: return "matvec_t";
    case Op::dot: return "dot";
    case Op::tanh: return "tanh";
    case Op::exp: return "exp";
    case Op::abs: return "abs";
    case Op::relu: return "relu";
    case Op::clamp: return "clamp";
    case Op::sign: return "sign";
    case Op::sqnorm: return "sqnorm";
    case Op::norm: return "norm";
    case Op::recip: return "recip";
    case Op::slice: return "slice";
    case Op::embed: return "embed";
    case Op::concat: return "concat";
  }
  return "?";
}

Expr Graph::push(Node node) {
  if (nodes_.size() >= kNoNode) throw UsageError("graph is full");
  nodes_.push_back(std::move(node));
  return Expr(this, static_cast<NodeId>(nodes_.size() - 1));
}

Expr Graph::constant(Tensor value) {
  Node n;
  n.op = Op::constant;
  n.shape = value.shape;
  n.data = std::move(value.data);
  return push(std::move(n));
}

Expr Graph::scalar(double v) { return constant(Tensor::scalar(v)); }

Expr Graph::vector(std::vector<double> v) { return constant(Tensor::vector(std::move(v))); }

Expr Graph::filled(Shape shape, double v) { return constant(Tensor::filled(shape, v)); }

Expr Graph::leaf(Op op, std::string name, Shape shape, bool time) {
  if (name.empty()) throw UsageError("graph leaves need a non-empty name");
  if (find(name)) throw UsageError("duplicate graph leaf name '" + name + "'");
  Node n;
  n.op = op;
  n.shape = shape;
  n.name = std::move(name);
  n.time = time;
  return push(std::move(n));
}

Expr Graph::input(std::string name, Shape shape) {
  return leaf(Op::input, std::move(name), shape, false);
}

Expr Graph::time_input(std::string name) {
  return leaf(Op::input, std::move(name), Shape::scalar(), true);
}

Expr Graph::parameter(std::string name, Shape shape) {
  return leaf(Op::parameter, std::move(name), shape, false);
}

std::optional<NodeId> Graph::find(std::string_view name) const {
  for (NodeId i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if ((n.op == Op::input || n.op == Op::parameter) && n.name == name) return i;
  }
  return std::nullopt;
}

namespace {

Graph& same_graph(const Expr& a, const Expr& b) {
  if (!a.valid() || !b.valid()) throw UsageError("operation on an empty expression");
  if (&a.graph() != &b.graph()) throw UsageError("operands belong to different graphs");
  return a.graph();
}

void require_valid(const Expr& x) {
  if (!x.valid()) throw UsageError("operation on an empty expression");
}

[[noreturn]] void shape_fail(Op op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op_name(op)) + ": incompatible shapes " + a.str() + " and " +
                   b.str());
}

Expr binary(Op op, Expr a, Expr b, Shape out) {
  Graph& g = same_graph(a, b);
  Node n;
  n.op = op;
  n.shape = out;
  n.a = a.id();
  n.b = b.id();
  return g.push(std::move(n));
}

Expr unary(Op op, Expr x, Shape out) {
  require_valid(x);
  Node n;
  n.op = op;
  n.shape = out;
  n.a = x.id();
  return x.graph().push(std::move(n));
}

Expr elementwise(Op op, Expr a, Expr b) {
  same_graph(a, b);
  if (a.shape() != b.shape()) shape_fail(op, a.shape(), b.shape());
  return binary(op, a, b, a.shape());
}

bool is_vector_like(const Shape& s) { return s.is_vector() || s.is_scalar(); }

}  // namespace

Expr operator+(Expr a, Expr b) { return elementwise(Op::add, a, b); }
Expr operator-(Expr a, Expr b) { return elementwise(Op::sub, a, b); }
Expr operator-(Expr a) { return unary(Op::neg, a, a.shape()); }

Expr operator*(Expr a, Expr b) {
  same_graph(a, b);
  if (a.shape() == b.shape()) return binary(Op::mul, a, b, a.shape());
  if (a.shape().is_scalar()) return scale(a, b);
  if (b.shape().is_scalar()) return scale(b, a);
  shape_fail(Op::mul, a.shape(), b.shape());
}

Expr operator/(Expr a, Expr b) { return a * recip(b); }

Expr operator+(Expr a, double c) {
  require_valid(a);
  return a + a.graph().filled(a.shape(), c);
}
Expr operator+(double c, Expr a) { return a + c; }
Expr operator-(Expr a, double c) { return a + (-c); }
Expr operator-(double c, Expr a) {
  require_valid(a);
  return a.graph().filled(a.shape(), c) - a;
}
Expr operator*(double c, Expr a) {
  require_valid(a);
  return scale(a.graph().scalar(c), a);
}
Expr operator*(Expr a, double c) { return c * a; }

Expr scale(Expr s, Expr x) {
  same_graph(s, x);
  if (!s.shape().is_scalar()) shape_fail(Op::scale, s.shape(), x.shape());
  return binary(Op::scale, s, x, x.shape());
}

Expr matvec(Expr w, Expr x) {
  same_graph(w, x);
  if (!w.shape().is_matrix() || !is_vector_like(x.shape()) || x.shape().size() != w.shape().cols) {
    shape_fail(Op::matvec, w.shape(), x.shape());
  }
  return binary(Op::matvec, w, x, Shape::vector(w.shape().rows));
}

Expr matvec_t(Expr w, Expr x) {
  same_graph(w, x);
  if (!w.shape().is_matrix() || !is_vector_like(x.shape()) || x.shape().size() != w.shape().rows) {
    shape_fail(Op::matvec_t, w.shape(), x.shape());
  }
  return binary(Op::matvec_t, w, x, Shape::vector(w.shape().cols));
}

Expr dot(Expr a, Expr b) {
  same_graph(a, b);
  if (a.shape() != b.shape() || a.shape().is_matrix()) shape_fail(Op::dot, a.shape(), b.shape());
  return binary(Op::dot, a, b, Shape::scalar());
}

Expr tanh(Expr x) { return unary(Op::tanh, x, x.shape()); }
Expr exp(Expr x) { return unary(Op::exp, x, x.shape()); }
Expr abs(Expr x) { return unary(Op::abs, x, x.shape()); }
Expr relu(Expr x) { return unary(Op::relu, x, x.shape()); }
Expr sign(Expr x) { return unary(Op::sign, x, x.shape()); }
Expr recip(Expr x) { return unary(Op::recip, x, x.shape()); }

Expr clamp(Expr x, std::vector<double> lower, std::vector<double> upper) {
  require_valid(x);
  const std::size_t n = x.shape().size();
  if (lower.size() != n || upper.size() != n) {
    throw ShapeError("clamp: bounds have " + std::to_string(lower.size()) + "/" +
                     std::to_string(upper.size()) + " entries for an operand of shape " +
                     x.shape().str());
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(lower[i] <= upper[i])) throw UsageError("clamp: lower bound exceeds upper bound");
  }
  Node node;
  node.op = Op::clamp;
  node.shape = x.shape();
  node.a = x.id();
  node.data = std::move(lower);
  node.upper = std::move(upper);
  return x.graph().push(std::move(node));
}

Expr sqnorm(Expr x) {
  require_valid(x);
  if (!is_vector_like(x.shape())) shape_fail(Op::sqnorm, x.shape(), x.shape());
  return unary(Op::sqnorm, x, Shape::scalar());
}

Expr norm(Expr x) {
  require_valid(x);
  if (!is_vector_like(x.shape())) shape_fail(Op::norm, x.shape(), x.shape());
  return unary(Op::norm, x, Shape::scalar());
}

namespace {

Expr slice_as(Expr x, std::size_t offset, std::size_t length, Shape out) {
  require_valid(x);
  if (!is_vector_like(x.shape()) || offset + length > x.shape().size() || length == 0) {
    throw ShapeError("slice [" + std::to_string(offset) + ", " + std::to_string(offset + length) +
                     ") out of range for " + x.shape().str());
  }
  Node n;
  n.op = Op::slice;
  n.shape = out;
  n.a = x.id();
  n.offset = offset;
  return x.graph().push(std::move(n));
}

}  // namespace

Expr slice(Expr x, std::size_t offset, std::size_t length) {
  return slice_as(x, offset, length, Shape::vector(length));
}

Expr component(Expr x, std::size_t index) { return slice_as(x, index, 1, Shape::scalar()); }

Expr embed(Expr x, std::size_t offset, std::size_t length) {
  require_valid(x);
  if (!is_vector_like(x.shape()) || offset + x.shape().size() > length) {
    throw ShapeError("embed of " + x.shape().str() + " at offset " + std::to_string(offset) +
                     " does not fit a vector(" + std::to_string(length) + ")");
  }
  Node n;
  n.op = Op::embed;
  n.shape = Shape::vector(length);
  n.a = x.id();
  n.offset = offset;
  return x.graph().push(std::move(n));
}

Expr concat(std::span<const Expr> parts) {
  if (parts.empty()) throw UsageError("concat of nothing");
  Graph& g = parts.front().graph();
  Node n;
  n.op = Op::concat;
  std::size_t total = 0;
  for (const Expr& p : parts) {
    same_graph(parts.front(), p);
    if (!is_vector_like(p.shape())) shape_fail(Op::concat, parts.front().shape(), p.shape());
    total += p.shape().size();
    n.parts.push_back(p.id());
  }
  n.shape = Shape::vector(total);
  return g.push(std::move(n));
}

Expr concat(std::initializer_list<Expr> parts) {
  return concat(std::span<const Expr>(parts.begin(), parts.size()));
}

Expr sum(Expr x) {
  require_valid(x);
  if (x.shape().is_scalar()) return x;
  if (!x.shape().is_vector()) shape_fail(Op::dot, x.shape(), x.shape());
  return dot(x, x.graph().filled(x.shape(), 1.0));
}

}  // namespace oinn::ad

#include "oinn/autodiff/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "oinn/errors.hpp"
#include "oinn/simd/kernels.hpp"

namespace oinn::ad {

namespace {
constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
}  // namespace

Bindings& Bindings::set(std::string name, Tensor value) {
  values_.insert_or_assign(std::move(name), std::move(value));
  return *this;
}

const Tensor* Bindings::find(std::string_view name) const {
  auto it = values_.find(name);
  return it == values_.end() ? nullptr : &it->second;
}

Program::Program(const Graph& graph, std::vector<Expr> roots)
    : graph_(&graph), roots_(std::move(roots)) {
  std::vector<bool> reached(graph.size(), false);
  std::vector<NodeId> stack;
  for (const Expr& r : roots_) {
    if (!r.valid() || &r.graph() != &graph) throw UsageError("program root from another graph");
    stack.push_back(r.id());
  }
  while (!stack.empty()) {
    const NodeId id = stack.back();
    stack.pop_back();
    if (reached[id]) continue;
    reached[id] = true;
    const Node& n = graph.node(id);
    if (n.a != kNoNode) stack.push_back(n.a);
    if (n.b != kNoNode) stack.push_back(n.b);
    for (NodeId p : n.parts) stack.push_back(p);
  }
  slot_index_.assign(graph.size(), npos);
  for (NodeId id = 0; id < graph.size(); ++id) {
    if (!reached[id]) continue;
    order_.push_back(id);
    slot_index_[id] = slots_.size();
    const Node& n = graph.node(id);
    Slot s;
    s.size = n.shape.size();
    switch (n.op) {
      case Op::constant:
        s.value = n.data;
        s.bound = true;
        break;
      case Op::input:
      case Op::parameter:
        s.differentiable = true;
        break;
      default: {
        auto diff = [&](NodeId arg) { return arg != kNoNode && slots_[slot_index_[arg]].differentiable; };
        s.differentiable = diff(n.a) || diff(n.b) ||
                           std::any_of(n.parts.begin(), n.parts.end(), diff);
        break;
      }
    }
    slots_.push_back(std::move(s));
  }
}

void Program::set_batch(std::size_t batch) {
  if (batch == 0) throw UsageError("batch size must be positive");
  batch_ = batch;
}

std::size_t Program::slot_of(NodeId id) const {
  const std::size_t s = id < slot_index_.size() ? slot_index_[id] : npos;
  if (s == npos) throw UsageError("node is not part of this program");
  return s;
}

std::size_t Program::slot_of(Expr e) const {
  if (!e.valid() || &e.graph() != graph_) throw UsageError("expression from another graph");
  return slot_of(e.id());
}

std::size_t Program::leaf_slot(std::string_view name) const {
  const auto id = graph_->find(name);
  if (!id || slot_index_[*id] == npos) {
    throw BindingError("no input or parameter named '" + std::string(name) + "' in this program");
  }
  return slot_index_[*id];
}

bool Program::has_leaf(std::string_view name) const {
  const auto id = graph_->find(name);
  return id && slot_index_[*id] != npos;
}

void Program::bind(std::string_view name, std::span<const double> value) {
  Slot& s = slots_[leaf_slot(name)];
  if (value.size() != s.size) {
    throw ShapeError("binding '" + std::string(name) + "' has " + std::to_string(value.size()) +
                     " entries, expected " + std::to_string(s.size));
  }
  s.value.assign(value.begin(), value.end());
  s.rows = 1;
  s.batched = false;
  s.bound = true;
}

void Program::bind(std::string_view name, const Tensor& value) {
  const std::size_t slot = leaf_slot(name);
  const Shape& expected = graph_->node(order_[slot]).shape;
  if (value.shape.size() != expected.size() ||
      (value.shape.is_matrix() && value.shape != expected)) {
    throw ShapeError("binding '" + std::string(name) + "' has shape " + value.shape.str() +
                     ", expected " + expected.str());
  }
  bind(name, std::span<const double>(value.data));
}

void Program::bind_batch(std::string_view name, std::span<const double> values) {
  Slot& s = slots_[leaf_slot(name)];
  if (values.size() != s.size * batch_) {
    throw ShapeError("batched binding '" + std::string(name) + "' has " +
                     std::to_string(values.size()) + " entries, expected " +
                     std::to_string(s.size * batch_));
  }
  s.value.assign(values.begin(), values.end());
  s.rows = batch_;
  s.batched = true;
  s.bound = true;
}

const double* Program::row(std::size_t slot, std::size_t r) const {
  const Slot& s = slots_[slot];
  return s.value.data() + (s.rows == 1 ? 0 : r * s.size);
}

double* Program::row_mut(std::size_t slot, std::size_t r) {
  Slot& s = slots_[slot];
  return s.value.data() + (s.rows == 1 ? 0 : r * s.size);
}

double* Program::adj_row(std::size_t slot, std::size_t r) {
  Slot& s = slots_[slot];
  return s.adjoint.data() + (s.rows == 1 ? 0 : r * s.size);
}

const double* Program::adj_row(std::size_t slot, std::size_t r) const {
  const Slot& s = slots_[slot];
  return s.adjoint.data() + (s.rows == 1 ? 0 : r * s.size);
}

std::span<const double> Program::value(Expr e) const {
  const Slot& s = slots_[slot_of(e)];
  return {s.value.data(), s.rows * s.size};
}

std::size_t Program::rows(Expr e) const { return slots_[slot_of(e)].rows; }

std::span<const double> Program::adjoint(Expr e) const {
  const Slot& s = slots_[slot_of(e)];
  if (s.adjoint.size() != s.rows * s.size) throw UsageError("no adjoint: run backward() first");
  return {s.adjoint.data(), s.adjoint.size()};
}

void Program::forward() {
  for (NodeId id : order_) {
    const Node& n = graph_->node(id);
    Slot& s = slots_[slot_index_[id]];
    if (n.op == Op::input || n.op == Op::parameter) {
      if (!s.bound) throw BindingError("unbound " + std::string(op_name(n.op)) + " '" + n.name + "'");
      if (s.batched && s.rows != batch_) {
        throw ShapeError("batched binding '" + n.name + "' was made for a different batch size");
      }
      continue;
    }
    if (n.op == Op::constant) continue;
    auto batched = [&](NodeId arg) { return arg != kNoNode && slots_[slot_index_[arg]].batched; };
    s.batched = batched(n.a) || batched(n.b) ||
                std::any_of(n.parts.begin(), n.parts.end(), batched);
    s.rows = s.batched ? batch_ : 1;
    s.value.resize(s.rows * s.size);
    forward_node(id);
  }
}

void Program::forward_node(NodeId id) {
  const simd::Kernels& k = simd::kernels();
  const Node& n = graph_->node(id);
  const std::size_t zs = slot_index_[id];
  Slot& z = slots_[zs];
  const std::size_t rows = z.rows;
  const std::size_t size = z.size;
  const std::size_t as = n.a != kNoNode ? slot_index_[n.a] : npos;
  const std::size_t bs = n.b != kNoNode ? slot_index_[n.b] : npos;

  auto binary = [&](auto kernel) {
    if (slots_[as].rows == slots_[bs].rows) {
      kernel(slots_[as].value.data(), slots_[bs].value.data(), z.value.data(), rows * size);
    } else {
      for (std::size_t r = 0; r < rows; ++r) kernel(row(as, r), row(bs, r), row_mut(zs, r), size);
    }
  };

  switch (n.op) {
    case Op::constant:
    case Op::input:
    case Op::parameter:
      return;
    case Op::add:
      return binary(k.add);
    case Op::sub:
      return binary(k.sub);
    case Op::mul:
      return binary(k.mul);
    case Op::neg:
      k.scale(-1.0, slots_[as].value.data(), z.value.data(), rows * size);
      return;
    case Op::scale:
      for (std::size_t r = 0; r < rows; ++r) k.scale(*row(as, r), row(bs, r), row_mut(zs, r), size);
      return;
    case Op::matvec: {
      const Shape& ws = graph_->node(n.a).shape;
      const std::size_t m = ws.rows;
      const std::size_t cols = ws.cols;
      for (std::size_t r = 0; r < rows; ++r) {
        const double* w = row(as, r);
        const double* x = row(bs, r);
        double* out = row_mut(zs, r);
        if (cols == 1) {
          k.scale(x[0], w, out, m);
        } else {
          for (std::size_t i = 0; i < m; ++i) out[i] = k.dot(w + i * cols, x, cols);
        }
      }
      return;
    }
    case Op::matvec_t: {
      const Shape& ws = graph_->node(n.a).shape;
      const std::size_t m = ws.rows;
      const std::size_t cols = ws.cols;
      for (std::size_t r = 0; r < rows; ++r) {
        const double* w = row(as, r);
        const double* x = row(bs, r);
        double* out = row_mut(zs, r);
        std::fill(out, out + cols, 0.0);
        for (std::size_t i = 0; i < m; ++i) k.axpy(x[i], w + i * cols, out, cols);
      }
      return;
    }
    case Op::dot: {
      const std::size_t len = slots_[as].size;
      for (std::size_t r = 0; r < rows; ++r) *row_mut(zs, r) = k.dot(row(as, r), row(bs, r), len);
      return;
    }
    case Op::tanh:
      k.tanh(slots_[as].value.data(), z.value.data(), rows * size);
      return;
    case Op::exp:
      k.exp(slots_[as].value.data(), z.value.data(), rows * size);
      return;
    case Op::abs:
      k.abs(slots_[as].value.data(), z.value.data(), rows * size);
      return;
    case Op::relu:
      k.relu(slots_[as].value.data(), z.value.data(), rows * size);
      return;
    case Op::sign:
      k.sign(slots_[as].value.data(), z.value.data(), rows * size);
      return;
    case Op::clamp:
      for (std::size_t r = 0; r < rows; ++r) {
        k.clamp(row(as, r), n.data.data(), n.upper.data(), row_mut(zs, r), size);
      }
      return;
    case Op::sqnorm:
    case Op::norm: {
      const std::size_t len = slots_[as].size;
      for (std::size_t r = 0; r < rows; ++r) {
        const double* x = row(as, r);
        const double sq = k.dot(x, x, len);
        *row_mut(zs, r) = n.op == Op::norm ? std::sqrt(sq) : sq;
      }
      return;
    }
    case Op::recip: {
      const double* x = slots_[as].value.data();
      double* out = z.value.data();
      for (std::size_t i = 0; i < rows * size; ++i) out[i] = 1.0 / x[i];
      return;
    }
    case Op::slice:
      for (std::size_t r = 0; r < rows; ++r) {
        const double* x = row(as, r) + n.offset;
        std::copy(x, x + size, row_mut(zs, r));
      }
      return;
    case Op::embed: {
      const std::size_t len = slots_[as].size;
      for (std::size_t r = 0; r < rows; ++r) {
        double* out = row_mut(zs, r);
        std::fill(out, out + size, 0.0);
        const double* x = row(as, r);
        std::copy(x, x + len, out + n.offset);
      }
      return;
    }
    case Op::concat:
      for (std::size_t r = 0; r < rows; ++r) {
        double* out = row_mut(zs, r);
        for (NodeId p : n.parts) {
          const std::size_t ps = slot_index_[p];
          const double* x = row(ps, r);
          out = std::copy(x, x + slots_[ps].size, out);
        }
      }
      return;
  }
}

void Program::backward(Expr root, std::span<const double> seed) {
  const std::size_t rs = slot_of(root);
  if (!root.shape().is_scalar()) {
    throw ShapeError("backward() needs a scalar root, got " + root.shape().str());
  }
  if (seed.size() != slots_[rs].rows) {
    throw ShapeError("backward() seed has " + std::to_string(seed.size()) + " entries for " +
                     std::to_string(slots_[rs].rows) + " rows");
  }
  std::vector<bool> active(graph_->size(), false);
  active[root.id()] = true;
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    if (!active[*it]) continue;
    const Node& n = graph_->node(*it);
    if (n.a != kNoNode) active[n.a] = true;
    if (n.b != kNoNode) active[n.b] = true;
    for (NodeId p : n.parts) active[p] = true;
  }
  for (NodeId id : order_) {
    Slot& s = slots_[slot_index_[id]];
    if (s.differentiable && active[id]) {
      s.adjoint.assign(s.rows * s.size, 0.0);
    } else {
      s.adjoint.clear();
    }
  }
  if (!slots_[rs].differentiable) return;
  std::copy(seed.begin(), seed.end(), slots_[rs].adjoint.begin());
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    if (active[*it] && slots_[slot_index_[*it]].differentiable) backward_node(*it);
  }
}

void Program::backward_node(NodeId id) {
  const simd::Kernels& k = simd::kernels();
  const Node& n = graph_->node(id);
  const std::size_t zs = slot_index_[id];
  const Slot& z = slots_[zs];
  const std::size_t rows = z.rows;
  const std::size_t size = z.size;
  const std::size_t as = n.a != kNoNode ? slot_index_[n.a] : npos;
  const std::size_t bs = n.b != kNoNode ? slot_index_[n.b] : npos;
  auto wants = [&](std::size_t slot) {
    return slot != npos && slots_[slot].differentiable && !slots_[slot].adjoint.empty();
  };

  // arg_bar += sgn * z_bar, summing over the batch for batch-shared args.
  auto pass_through = [&](std::size_t arg, double sgn) {
    if (!wants(arg)) return;
    if (slots_[arg].rows == rows) {
      k.axpy(sgn, z.adjoint.data(), slots_[arg].adjoint.data(), rows * size);
    } else {
      for (std::size_t r = 0; r < rows; ++r) k.axpy(sgn, adj_row(zs, r), adj_row(arg, r), size);
    }
  };

  switch (n.op) {
    case Op::constant:
    case Op::input:
    case Op::parameter:
    case Op::sign:
      return;
    case Op::add:
      pass_through(as, 1.0);
      pass_through(bs, 1.0);
      return;
    case Op::sub:
      pass_through(as, 1.0);
      pass_through(bs, -1.0);
      return;
    case Op::neg:
      pass_through(as, -1.0);
      return;
    case Op::mul: {
      auto product = [&](std::size_t arg, std::size_t other) {
        if (!wants(arg)) return;
        if (slots_[arg].rows == rows && slots_[other].rows == rows) {
          k.mul_acc(z.adjoint.data(), slots_[other].value.data(), slots_[arg].adjoint.data(),
                    rows * size);
        } else {
          for (std::size_t r = 0; r < rows; ++r) {
            k.mul_acc(adj_row(zs, r), row(other, r), adj_row(arg, r), size);
          }
        }
      };
      product(as, bs);
      product(bs, as);
      return;
    }
    case Op::scale:
      for (std::size_t r = 0; r < rows; ++r) {
        const double* zbar = adj_row(zs, r);
        if (wants(as)) *adj_row(as, r) += k.dot(zbar, row(bs, r), size);
        if (wants(bs)) k.axpy(*row(as, r), zbar, adj_row(bs, r), size);
      }
      return;
    case Op::matvec: {
      const Shape& ws = graph_->node(n.a).shape;
      const std::size_t m = ws.rows;
      const std::size_t cols = ws.cols;
      const bool want_w = wants(as);
      const bool want_x = wants(bs);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* zbar = adj_row(zs, r);
        const double* w = row(as, r);
        const double* x = row(bs, r);
        if (cols == 1) {
          if (want_w) k.axpy(x[0], zbar, adj_row(as, r), m);
          if (want_x) *adj_row(bs, r) += k.dot(zbar, w, m);
          continue;
        }
        double* wbar = want_w ? adj_row(as, r) : nullptr;
        double* xbar = want_x ? adj_row(bs, r) : nullptr;
        for (std::size_t i = 0; i < m; ++i) {
          if (want_w) k.axpy(zbar[i], x, wbar + i * cols, cols);
          if (want_x) k.axpy(zbar[i], w + i * cols, xbar, cols);
        }
      }
      return;
    }
    case Op::matvec_t: {
      const Shape& ws = graph_->node(n.a).shape;
      const std::size_t m = ws.rows;
      const std::size_t cols = ws.cols;
      const bool want_w = wants(as);
      const bool want_x = wants(bs);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* zbar = adj_row(zs, r);
        const double* w = row(as, r);
        const double* x = row(bs, r);
        double* wbar = want_w ? adj_row(as, r) : nullptr;
        double* xbar = want_x ? adj_row(bs, r) : nullptr;
        for (std::size_t i = 0; i < m; ++i) {
          if (want_w) k.axpy(x[i], zbar, wbar + i * cols, cols);
          if (want_x) xbar[i] += k.dot(w + i * cols, zbar, cols);
        }
      }
      return;
    }
    case Op::dot: {
      const std::size_t len = slots_[as].size;
      for (std::size_t r = 0; r < rows; ++r) {
        const double zbar = *adj_row(zs, r);
        if (wants(as)) k.axpy(zbar, row(bs, r), adj_row(as, r), len);
        if (wants(bs)) k.axpy(zbar, row(as, r), adj_row(bs, r), len);
      }
      return;
    }
    case Op::tanh: {
      if (!wants(as)) return;
      const double* zv = z.value.data();
      const double* zbar = z.adjoint.data();
      double* xbar = slots_[as].adjoint.data();
      for (std::size_t i = 0; i < rows * size; ++i) xbar[i] += zbar[i] * (1.0 - zv[i] * zv[i]);
      return;
    }
    case Op::exp:
      if (wants(as)) k.mul_acc(z.adjoint.data(), z.value.data(), slots_[as].adjoint.data(), rows * size);
      return;
    case Op::abs:
    case Op::relu: {
      if (!wants(as)) return;
      const double* x = slots_[as].value.data();
      const double* zbar = z.adjoint.data();
      double* xbar = slots_[as].adjoint.data();
      for (std::size_t i = 0; i < rows * size; ++i) {
        const double slope = x[i] > 0.0 ? 1.0 : (n.op == Op::abs && x[i] < 0.0 ? -1.0 : 0.0);
        xbar[i] += zbar[i] * slope;
      }
      return;
    }
    case Op::clamp: {
      if (!wants(as)) return;
      for (std::size_t r = 0; r < rows; ++r) {
        const double* x = row(as, r);
        const double* zbar = adj_row(zs, r);
        double* xbar = adj_row(as, r);
        for (std::size_t i = 0; i < size; ++i) {
          if (x[i] > n.data[i] && x[i] < n.upper[i]) xbar[i] += zbar[i];
        }
      }
      return;
    }
    case Op::sqnorm:
    case Op::norm: {
      if (!wants(as)) return;
      const std::size_t len = slots_[as].size;
      for (std::size_t r = 0; r < rows; ++r) {
        const double zbar = *adj_row(zs, r);
        double factor = 2.0 * zbar;
        if (n.op == Op::norm) {
          const double zv = *row(zs, r);
          factor = zv > 0.0 ? zbar / zv : 0.0;
        }
        k.axpy(factor, row(as, r), adj_row(as, r), len);
      }
      return;
    }
    case Op::recip: {
      if (!wants(as)) return;
      const double* zv = z.value.data();
      const double* zbar = z.adjoint.data();
      double* xbar = slots_[as].adjoint.data();
      for (std::size_t i = 0; i < rows * size; ++i) xbar[i] -= zbar[i] * zv[i] * zv[i];
      return;
    }
    case Op::slice:
      if (!wants(as)) return;
      for (std::size_t r = 0; r < rows; ++r) {
        const double* zbar = adj_row(zs, r);
        double* xbar = adj_row(as, r) + n.offset;
        for (std::size_t i = 0; i < size; ++i) xbar[i] += zbar[i];
      }
      return;
    case Op::embed: {
      if (!wants(as)) return;
      const std::size_t len = slots_[as].size;
      for (std::size_t r = 0; r < rows; ++r) {
        const double* zbar = adj_row(zs, r) + n.offset;
        double* xbar = adj_row(as, r);
        for (std::size_t i = 0; i < len; ++i) xbar[i] += zbar[i];
      }
      return;
    }
    case Op::concat:
      for (std::size_t r = 0; r < rows; ++r) {
        const double* zbar = adj_row(zs, r);
        for (NodeId p : n.parts) {
          const std::size_t ps = slot_index_[p];
          const std::size_t len = slots_[ps].size;
          if (wants(ps)) {
            double* xbar = adj_row(ps, r);
            for (std::size_t i = 0; i < len; ++i) xbar[i] += zbar[i];
          }
          zbar += len;
        }
      }
      return;
  }
}

namespace {

std::vector<NodeId> reachable_leaves(const Graph& g, NodeId root) {
  std::vector<bool> seen(g.size(), false);
  std::vector<NodeId> stack{root};
  std::vector<NodeId> leaves;
  while (!stack.empty()) {
    const NodeId id = stack.back();
    stack.pop_back();
    if (seen[id]) continue;
    seen[id] = true;
    const Node& n = g.node(id);
    if (n.op == Op::input || n.op == Op::parameter) leaves.push_back(id);
    if (n.a != kNoNode) stack.push_back(n.a);
    if (n.b != kNoNode) stack.push_back(n.b);
    for (NodeId p : n.parts) stack.push_back(p);
  }
  std::sort(leaves.begin(), leaves.end());
  return leaves;
}

void bind_all(Program& program, const Graph& g, NodeId root, const Bindings& bindings) {
  for (NodeId id : reachable_leaves(g, root)) {
    const Node& n = g.node(id);
    const Tensor* t = bindings.find(n.name);
    if (t == nullptr) throw BindingError("unbound " + std::string(op_name(n.op)) + " '" + n.name + "'");
    program.bind(n.name, *t);
  }
}

}  // namespace

Tensor eval(Expr expr, const Bindings& bindings) {
  Program program(expr.graph(), {expr});
  bind_all(program, expr.graph(), expr.id(), bindings);
  program.forward();
  const auto v = program.value(expr);
  return {expr.shape(), std::vector<double>(v.begin(), v.end())};
}

GradientSet grad(Expr scalar_root, const Bindings& bindings) {
  if (!scalar_root.valid()) throw UsageError("grad of an empty expression");
  if (!scalar_root.shape().is_scalar()) {
    throw ShapeError("grad needs a scalar expression, got " + scalar_root.shape().str());
  }
  const Graph& g = scalar_root.graph();
  Program program(g, {scalar_root});
  bind_all(program, g, scalar_root.id(), bindings);
  program.forward();
  const double seed = 1.0;
  program.backward(scalar_root, std::span<const double>(&seed, 1));
  GradientSet out;
  for (NodeId id : reachable_leaves(g, scalar_root.id())) {
    const Node& n = g.node(id);
    if (n.op != Op::parameter) continue;
    const auto adj = program.adjoint(Expr(const_cast<Graph*>(&g), id));
    out.emplace(n.name, Tensor{n.shape, std::vector<double>(adj.begin(), adj.end())});
  }
  // Parameters the root does not reach get a zero gradient.
  for (NodeId id = 0; id < g.size(); ++id) {
    const Node& n = g.node(id);
    if (n.op == Op::parameter && !out.contains(n.name)) out.emplace(n.name, Tensor::zeros(n.shape));
  }
  return out;
}

}  // namespace oinn::ad

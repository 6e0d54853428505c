// Forward-mode evaluation along the graph's time input. Single sample, plain
// loops; the batched Program handles the hot paths.

#include <cmath>
#include <string>

#include "oinn/autodiff/evaluator.hpp"
#include "oinn/errors.hpp"

namespace oinn::ad {

namespace {

struct Pair {
  std::vector<double> v;
  std::vector<double> d;
};

double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

DualValue eval_dual(Expr expr, double t, const Bindings& bindings) {
  if (!expr.valid()) throw UsageError("eval_dual of an empty expression");
  const Graph& g = expr.graph();

  std::vector<bool> reached(g.size(), false);
  std::vector<NodeId> stack{expr.id()};
  while (!stack.empty()) {
    const NodeId id = stack.back();
    stack.pop_back();
    if (reached[id]) continue;
    reached[id] = true;
    const Node& n = g.node(id);
    if (n.a != kNoNode) stack.push_back(n.a);
    if (n.b != kNoNode) stack.push_back(n.b);
    for (NodeId p : n.parts) stack.push_back(p);
  }
  int time_inputs = 0;
  for (NodeId id = 0; id < g.size(); ++id) {
    if (reached[id] && g.node(id).time) ++time_inputs;
  }
  if (time_inputs > 1) throw UsageError("eval_dual: more than one time input is reachable");

  std::vector<Pair> vals(g.size());
  for (NodeId id = 0; id <= expr.id(); ++id) {
    if (!reached[id]) continue;
    const Node& n = g.node(id);
    const std::size_t size = n.shape.size();
    Pair& z = vals[id];
    z.v.assign(size, 0.0);
    z.d.assign(size, 0.0);
    const Pair* a = n.a != kNoNode ? &vals[n.a] : nullptr;
    const Pair* b = n.b != kNoNode ? &vals[n.b] : nullptr;

    switch (n.op) {
      case Op::constant:
        z.v = n.data;
        break;
      case Op::input:
      case Op::parameter: {
        if (n.time) {
          z.v[0] = t;
          z.d[0] = 1.0;
          break;
        }
        const Tensor* bound = bindings.find(n.name);
        if (bound == nullptr) {
          throw BindingError("unbound " + std::string(op_name(n.op)) + " '" + n.name + "'");
        }
        if (bound->data.size() != size) {
          throw ShapeError("binding '" + n.name + "' has shape " + bound->shape.str() +
                           ", expected " + n.shape.str());
        }
        z.v = bound->data;
        break;
      }
      case Op::add:
        for (std::size_t i = 0; i < size; ++i) {
          z.v[i] = a->v[i] + b->v[i];
          z.d[i] = a->d[i] + b->d[i];
        }
        break;
      case Op::sub:
        for (std::size_t i = 0; i < size; ++i) {
          z.v[i] = a->v[i] - b->v[i];
          z.d[i] = a->d[i] - b->d[i];
        }
        break;
      case Op::neg:
        for (std::size_t i = 0; i < size; ++i) {
          z.v[i] = -a->v[i];
          z.d[i] = -a->d[i];
        }
        break;
      case Op::mul:
        for (std::size_t i = 0; i < size; ++i) {
          z.v[i] = a->v[i] * b->v[i];
          z.d[i] = a->d[i] * b->v[i] + a->v[i] * b->d[i];
        }
        break;
      case Op::scale:
        for (std::size_t i = 0; i < size; ++i) {
          z.v[i] = a->v[0] * b->v[i];
          z.d[i] = a->d[0] * b->v[i] + a->v[0] * b->d[i];
        }
        break;
      case Op::matvec: {
        const std::size_t cols = g.node(n.a).shape.cols;
        for (std::size_t i = 0; i < size; ++i) {
          double v = 0.0;
          double d = 0.0;
          for (std::size_t j = 0; j < cols; ++j) {
            v += a->v[i * cols + j] * b->v[j];
            d += a->d[i * cols + j] * b->v[j] + a->v[i * cols + j] * b->d[j];
          }
          z.v[i] = v;
          z.d[i] = d;
        }
        break;
      }
      case Op::matvec_t: {
        const std::size_t m = g.node(n.a).shape.rows;
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < size; ++j) {
            z.v[j] += a->v[i * size + j] * b->v[i];
            z.d[j] += a->d[i * size + j] * b->v[i] + a->v[i * size + j] * b->d[i];
          }
        }
        break;
      }
      case Op::dot:
        for (std::size_t i = 0; i < a->v.size(); ++i) {
          z.v[0] += a->v[i] * b->v[i];
          z.d[0] += a->d[i] * b->v[i] + a->v[i] * b->d[i];
        }
        break;
      case Op::tanh:
        for (std::size_t i = 0; i < size; ++i) {
          z.v[i] = std::tanh(a->v[i]);
          z.d[i] = (1.0 - z.v[i] * z.v[i]) * a->d[i];
        }
        break;
      case Op::exp:
        for (std::size_t i = 0; i < size; ++i) {
          z.v[i] = std::exp(a->v[i]);
          z.d[i] = z.v[i] * a->d[i];
        }
        break;
      case Op::abs:
        for (std::size_t i = 0; i < size; ++i) {
          z.v[i] = std::fabs(a->v[i]);
          z.d[i] = sgn(a->v[i]) * a->d[i];
        }
        break;
      case Op::relu:
        for (std::size_t i = 0; i < size; ++i) {
          const bool on = a->v[i] > 0.0;
          z.v[i] = on ? a->v[i] : 0.0;
          z.d[i] = on ? a->d[i] : 0.0;
        }
        break;
      case Op::clamp:
        for (std::size_t i = 0; i < size; ++i) {
          const double x = a->v[i];
          z.v[i] = x < n.data[i] ? n.data[i] : (x > n.upper[i] ? n.upper[i] : x);
          z.d[i] = (x > n.data[i] && x < n.upper[i]) ? a->d[i] : 0.0;
        }
        break;
      case Op::sign:
        for (std::size_t i = 0; i < size; ++i) z.v[i] = sgn(a->v[i]);
        break;
      case Op::sqnorm:
        for (std::size_t i = 0; i < a->v.size(); ++i) {
          z.v[0] += a->v[i] * a->v[i];
          z.d[0] += 2.0 * a->v[i] * a->d[i];
        }
        break;
      case Op::norm: {
        double sq = 0.0;
        double inner = 0.0;
        for (std::size_t i = 0; i < a->v.size(); ++i) {
          sq += a->v[i] * a->v[i];
          inner += a->v[i] * a->d[i];
        }
        z.v[0] = std::sqrt(sq);
        z.d[0] = z.v[0] > 0.0 ? inner / z.v[0] : 0.0;
        break;
      }
      case Op::recip:
        for (std::size_t i = 0; i < size; ++i) {
          z.v[i] = 1.0 / a->v[i];
          z.d[i] = -z.v[i] * z.v[i] * a->d[i];
        }
        break;
      case Op::slice:
        for (std::size_t i = 0; i < size; ++i) {
          z.v[i] = a->v[n.offset + i];
          z.d[i] = a->d[n.offset + i];
        }
        break;
      case Op::embed:
        for (std::size_t i = 0; i < a->v.size(); ++i) {
          z.v[n.offset + i] = a->v[i];
          z.d[n.offset + i] = a->d[i];
        }
        break;
      case Op::concat: {
        std::size_t at = 0;
        for (NodeId p : n.parts) {
          for (std::size_t i = 0; i < vals[p].v.size(); ++i, ++at) {
            z.v[at] = vals[p].v[i];
            z.d[at] = vals[p].d[i];
          }
        }
        break;
      }
    }
  }
  Pair& root = vals[expr.id()];
  return {Tensor{expr.shape(), std::move(root.v)}, Tensor{expr.shape(), std::move(root.d)}};
}

}  // namespace oinn::ad

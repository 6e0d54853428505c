#include "oinn/autodiff/transform.hpp"

#include <limits>
#include <string>

#include "oinn/errors.hpp"

namespace oinn::ad {

namespace {

// New nodes may reallocate the graph's node storage, so rules work on copies.
Node copy_node(const Graph& g, NodeId id) { return g.node(id); }

Expr handle(Graph& g, NodeId id) { return Expr(&g, id); }

// Adapts between scalar and length-1 vector shapes.
Expr fit(Expr e, const Shape& target) {
  if (e.shape() == target) return e;
  if (target.is_scalar() && e.shape().size() == 1) return component(e, 0);
  if (target.is_vector() && e.shape().is_scalar() && target.rows == 1) return embed(e, 0, 1);
  throw ShapeError("cannot fit " + e.shape().str() + " to " + target.str());
}

std::vector<bool> ancestors(const Graph& g, NodeId root) {
  std::vector<bool> seen(root + 1, false);
  seen[root] = true;
  for (NodeId id = root + 1; id-- > 0;) {
    if (!seen[id]) continue;
    const Node& n = g.node(id);
    if (n.a != kNoNode) seen[n.a] = true;
    if (n.b != kNoNode) seen[n.b] = true;
    for (NodeId p : n.parts) seen[p] = true;
  }
  return seen;
}

Expr plus(Expr acc, Expr term) { return acc.valid() ? acc + term : term; }

Expr clamp_mask(Graph& g, Expr x, const Node& n) {
  const Expr lower = g.constant(Tensor{x.shape(), n.data});
  const Expr upper = g.constant(Tensor{x.shape(), n.upper});
  return relu(sign(x - lower)) * relu(sign(upper - x));
}

Expr slice_like(Expr x, std::size_t offset, const Shape& shape) {
  return shape.is_scalar() ? component(x, offset) : slice(x, offset, shape.size());
}

}  // namespace

Expr time_derivative(Expr expr) {
  if (!expr.valid()) throw UsageError("time_derivative of an empty expression");
  Graph& g = expr.graph();
  const NodeId last = expr.id();
  std::vector<Expr> tan(last + 1);
  const std::vector<bool> needed = ancestors(g, last);

  for (NodeId id = 0; id <= last; ++id) {
    if (!needed[id]) continue;
    const Node n = copy_node(g, id);
    const Expr z = handle(g, id);
    auto t_of = [&](NodeId arg) { return arg == kNoNode ? Expr() : tan[arg]; };
    const Expr ta = t_of(n.a);
    const Expr tb = t_of(n.b);
    const Expr a = n.a != kNoNode ? handle(g, n.a) : Expr();
    const Expr b = n.b != kNoNode ? handle(g, n.b) : Expr();
    Expr out;

    switch (n.op) {
      case Op::constant:
      case Op::parameter:
      case Op::sign:
        break;
      case Op::input:
        if (n.time) out = g.scalar(1.0);
        break;
      case Op::add:
        if (ta.valid()) out = ta;
        if (tb.valid()) out = plus(out, tb);
        break;
      case Op::sub:
        if (ta.valid()) out = ta;
        if (tb.valid()) out = out.valid() ? out - tb : -tb;
        break;
      case Op::neg:
        if (ta.valid()) out = -ta;
        break;
      case Op::mul:
        if (ta.valid()) out = ta * b;
        if (tb.valid()) out = plus(out, a * tb);
        break;
      case Op::scale:
        if (ta.valid()) out = scale(ta, b);
        if (tb.valid()) out = plus(out, scale(a, tb));
        break;
      case Op::matvec:
        if (ta.valid()) out = matvec(ta, b);
        if (tb.valid()) out = plus(out, matvec(a, tb));
        break;
      case Op::matvec_t:
        if (ta.valid()) out = matvec_t(ta, b);
        if (tb.valid()) out = plus(out, matvec_t(a, tb));
        break;
      case Op::dot:
        if (ta.valid()) out = dot(ta, b);
        if (tb.valid()) out = plus(out, dot(a, tb));
        break;
      case Op::tanh:
        if (ta.valid()) out = (1.0 - z * z) * ta;
        break;
      case Op::exp:
        if (ta.valid()) out = z * ta;
        break;
      case Op::abs:
        if (ta.valid()) out = sign(a) * ta;
        break;
      case Op::relu:
        if (ta.valid()) out = relu(sign(a)) * ta;
        break;
      case Op::clamp:
        if (ta.valid()) out = clamp_mask(g, a, n) * ta;
        break;
      case Op::sqnorm:
        if (ta.valid()) out = 2.0 * dot(a, ta);
        break;
      case Op::norm:
        if (ta.valid()) throw UsageError("time_derivative: norm() has no symbolic derivative");
        break;
      case Op::recip:
        if (ta.valid()) out = -(z * z * ta);
        break;
      case Op::slice:
        if (ta.valid()) out = slice_like(ta, n.offset, n.shape);
        break;
      case Op::embed:
        if (ta.valid()) out = embed(ta, n.offset, n.shape.size());
        break;
      case Op::concat: {
        bool any = false;
        for (NodeId p : n.parts) any = any || tan[p].valid();
        if (!any) break;
        std::vector<Expr> parts;
        for (NodeId p : n.parts) {
          parts.push_back(tan[p].valid() ? tan[p] : g.filled(g.node(p).shape, 0.0));
        }
        out = concat(parts);
        break;
      }
    }
    tan[id] = out;
  }
  return tan[last].valid() ? tan[last] : g.filled(expr.shape(), 0.0);
}

std::vector<Expr> vjp(Expr out, std::span<const Expr> wrt, Expr cotangent) {
  if (!out.valid() || !cotangent.valid()) throw UsageError("vjp of an empty expression");
  Graph& g = out.graph();
  if (&cotangent.graph() != &g) throw UsageError("vjp cotangent from another graph");
  if (cotangent.shape() != out.shape()) {
    throw ShapeError("vjp cotangent shape " + cotangent.shape().str() + " does not match " +
                     out.shape().str());
  }
  const NodeId last = out.id();

  std::vector<bool> depends(last + 1, false);
  std::vector<bool> is_wrt(last + 1, false);
  for (const Expr& w : wrt) {
    if (!w.valid() || &w.graph() != &g) throw UsageError("vjp w.r.t. a node of another graph");
    if (w.id() <= last) is_wrt[w.id()] = true;
  }
  for (NodeId id = 0; id <= last; ++id) {
    if (is_wrt[id]) {
      depends[id] = true;
      continue;
    }
    const Node& n = g.node(id);
    bool d = (n.a != kNoNode && depends[n.a]) || (n.b != kNoNode && depends[n.b]);
    for (NodeId p : n.parts) d = d || depends[p];
    depends[id] = d;
  }

  std::vector<Expr> adj(last + 1);
  adj[last] = cotangent;
  auto give = [&](NodeId arg, Expr contrib) {
    if (arg == kNoNode || !depends[arg]) return;
    adj[arg] = plus(adj[arg], fit(contrib, g.node(arg).shape));
  };

  for (NodeId id = last + 1; id-- > 0;) {
    if (!depends[id] || !adj[id].valid() || is_wrt[id]) continue;
    const Node n = copy_node(g, id);
    const Expr zbar = adj[id];
    const Expr z = handle(g, id);
    const Expr a = n.a != kNoNode ? handle(g, n.a) : Expr();
    const Expr b = n.b != kNoNode ? handle(g, n.b) : Expr();
    auto wants = [&](NodeId arg) { return arg != kNoNode && depends[arg]; };

    switch (n.op) {
      case Op::constant:
      case Op::input:
      case Op::parameter:
      case Op::sign:
        break;
      case Op::add:
        give(n.a, zbar);
        give(n.b, zbar);
        break;
      case Op::sub:
        give(n.a, zbar);
        if (wants(n.b)) give(n.b, -zbar);
        break;
      case Op::neg:
        if (wants(n.a)) give(n.a, -zbar);
        break;
      case Op::mul:
        if (wants(n.a)) give(n.a, zbar * b);
        if (wants(n.b)) give(n.b, zbar * a);
        break;
      case Op::scale:
        if (wants(n.a)) {
          if (b.shape().is_matrix()) throw UsageError("vjp through a scaled matrix");
          give(n.a, dot(zbar, b));
        }
        if (wants(n.b)) give(n.b, scale(a, zbar));
        break;
      case Op::matvec:
        if (wants(n.a)) throw UsageError("vjp through a matrix that depends on the target");
        if (wants(n.b)) give(n.b, matvec_t(a, zbar));
        break;
      case Op::matvec_t:
        if (wants(n.a)) throw UsageError("vjp through a matrix that depends on the target");
        if (wants(n.b)) give(n.b, matvec(a, zbar));
        break;
      case Op::dot:
        if (wants(n.a)) give(n.a, zbar * b);
        if (wants(n.b)) give(n.b, zbar * a);
        break;
      case Op::tanh:
        give(n.a, zbar * (1.0 - z * z));
        break;
      case Op::exp:
        give(n.a, zbar * z);
        break;
      case Op::abs:
        if (wants(n.a)) give(n.a, zbar * sign(a));
        break;
      case Op::relu:
        if (wants(n.a)) give(n.a, zbar * relu(sign(a)));
        break;
      case Op::clamp:
        if (wants(n.a)) give(n.a, zbar * clamp_mask(g, a, n));
        break;
      case Op::sqnorm:
        if (wants(n.a)) give(n.a, scale(2.0 * zbar, a));
        break;
      case Op::norm:
        throw UsageError("vjp: norm() has no symbolic derivative");
      case Op::recip:
        if (wants(n.a)) give(n.a, -(zbar * (z * z)));
        break;
      case Op::slice:
        if (wants(n.a)) give(n.a, embed(zbar, n.offset, a.shape().size()));
        break;
      case Op::embed:
        if (wants(n.a)) give(n.a, slice_like(zbar, n.offset, a.shape()));
        break;
      case Op::concat: {
        std::size_t offset = 0;
        for (NodeId p : n.parts) {
          const Shape ps = g.node(p).shape;
          if (depends[p]) give(p, slice_like(zbar, offset, ps));
          offset += ps.size();
        }
        break;
      }
    }
  }

  std::vector<Expr> result;
  result.reserve(wrt.size());
  for (const Expr& w : wrt) {
    if (w.id() <= last && adj[w.id()].valid()) {
      result.push_back(adj[w.id()]);
    } else {
      result.push_back(g.filled(w.shape(), 0.0));
    }
  }
  return result;
}

Expr gradient(Expr scalar_out, Expr wrt) {
  if (!scalar_out.valid()) throw UsageError("gradient of an empty expression");
  if (!scalar_out.shape().is_scalar()) {
    throw ShapeError("gradient needs a scalar expression, got " + scalar_out.shape().str());
  }
  const Expr targets[] = {wrt};
  return vjp(scalar_out, targets, scalar_out.graph().scalar(1.0))[0];
}

}  // namespace oinn::ad

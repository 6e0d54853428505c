#pragma once

// Symbolic derivatives: both transforms append new nodes to the expression's
// graph, so their results can be evaluated, batched and differentiated again
// like any other expression. The trainer relies on this to differentiate a
// loss that already contains d/dt and gradient terms.
//
// The piecewise conventions match the numeric evaluators: relu'(x) is
// relu(sign(x)), |x|' is sign(x), and clamp' is 1 strictly inside the bounds.
// norm() has no symbolic derivative; use sqnorm() or build the quotient
// explicitly.

#include <span>
#include <vector>

#include "oinn/autodiff/graph.hpp"

namespace oinn::ad {

// d(expr)/dt along the graph's time input(s). Returns a zero constant of
// expr's shape when expr does not depend on time.
Expr time_derivative(Expr expr);

// Vector-Jacobian product: for each node in `wrt`, sum over paths from that
// node to `out` of cotangent^T d(out)/d(node). Other leaves are held fixed.
// Throws UsageError when the path crosses norm() or a matrix that itself
// depends on a `wrt` node.
std::vector<Expr> vjp(Expr out, std::span<const Expr> wrt, Expr cotangent);

// Gradient of a scalar expression w.r.t. one node.
Expr gradient(Expr scalar_out, Expr wrt);

}  // namespace oinn::ad

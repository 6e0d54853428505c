#pragma once

// Finite-difference oracle and random graph generator shared by the unit
// tests and the acceptance run.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "oinn/autodiff/evaluator.hpp"
#include "oinn/autodiff/graph.hpp"
#include "oinn/autodiff/transform.hpp"

namespace oinn::testing {

using namespace oinn::ad;

inline std::vector<double> uniform(std::mt19937_64& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

inline double rel_err(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-8);
}

inline std::vector<double> fd_gradient(Expr root, Bindings b, const std::string& name, double h = 1e-5) {
  std::vector<double> g(b.find(name)->data.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    Tensor p = *b.find(name);
    const double x = p.data[i];
    p.data[i] = x + h;
    b.set(name, p);
    const double up = eval(root, b).item();
    p.data[i] = x - h;
    b.set(name, p);
    const double down = eval(root, b).item();
    p.data[i] = x;
    b.set(name, p);
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// Random composition of smooth primitives over three parameters.
inline Expr random_smooth_graph(Graph& g, std::mt19937_64& rng) {
  Expr w = g.parameter("W", Shape::matrix(3, 3));
  Expr x = g.parameter("x", Shape::vector(3));
  Expr s = g.parameter("s", Shape::scalar());
  std::vector<Expr> pool{x, g.vector({0.5, -0.25, 1.0})};
  std::uniform_int_distribution<int> pick_op(0, 9);
  const int steps = 4 + static_cast<int>(rng() % 5);
  for (int k = 0; k < steps; ++k) {
    Expr a = pool[rng() % pool.size()];
    Expr b = pool[rng() % pool.size()];
    Expr next;
    switch (pick_op(rng)) {
      case 0: next = a + b; break;
      case 1: next = a - b; break;
      case 2: next = a * b; break;
      case 3: next = tanh(a); break;
      case 4: next = exp(0.3 * a); break;
      case 5: next = s * a; break;
      case 6: next = matvec(w, a); break;
      case 7: next = 0.5 * matvec_t(w, a); break;
      case 8: next = a / (1.5 + tanh(b)); break;
      default: next = dot(a, b) * a; break;
    }
    pool.push_back(next);
  }
  Expr last = pool.back();
  return sum(last) + 0.1 * sqnorm(last) + norm(last + g.vector({3.0, 3.0, 3.0}));
}


}  // namespace oinn::testing

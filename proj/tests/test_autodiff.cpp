#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "graph_oracles.hpp"
#include "oinn/autodiff/evaluator.hpp"
#include "oinn/autodiff/graph.hpp"
#include "oinn/autodiff/transform.hpp"
#include "oinn/errors.hpp"

using namespace oinn;
using namespace oinn::ad;

using oinn::testing::fd_gradient;
using oinn::testing::random_smooth_graph;
using oinn::testing::rel_err;
using oinn::testing::uniform;

TEST_CASE("eval examples") {
  Graph g;
  Bindings none;
  CHECK(eval(tanh(g.scalar(0.0)), none).item() == 0.0);
  const Tensor c = eval(clamp(g.vector({3.0, -4.0}), {0.0, 0.0}, {2.0, 2.0}), none);
  CHECK(c.data == std::vector<double>{2.0, 0.0});
  CHECK(eval(norm(g.vector({3.0, 4.0})), none).item() == 5.0);
}

TEST_CASE("eval errors") {
  Graph g;
  Expr x = g.input("x", Shape::vector(2));
  Bindings b;
  CHECK_THROWS_AS(eval(x + x, b), BindingError);
  b.set("x", Tensor::vector({1.0, 2.0, 3.0}));
  CHECK_THROWS_AS(eval(x + x, b), ShapeError);
  CHECK_THROWS_AS(x + g.vector({1.0, 2.0, 3.0}), ShapeError);
  CHECK_THROWS_AS(matvec(g.vector({1.0}), x), ShapeError);
  Graph other;
  CHECK_THROWS_AS(x + other.vector({1.0, 2.0}), UsageError);
  CHECK_THROWS_AS(g.input("x", Shape::scalar()), UsageError);
}

TEST_CASE("eval_dual examples") {
  Graph g;
  Expr t = g.time_input("t");
  Bindings none;
  auto d = eval_dual(exp(-t), 0.0, none);
  CHECK(d.value.item() == 1.0);
  CHECK(d.tangent.item() == -1.0);

  Expr c = g.vector({2.0, -3.0});
  auto e = eval_dual((1.0 - exp(-t)) * c, 0.0, none);
  CHECK(e.value.data == std::vector<double>{0.0, -0.0});
  CHECK(e.tangent.data == std::vector<double>{2.0, -3.0});

  Expr th = tanh(2.0 * t);
  const double h = 1e-5;
  const double fd = (std::tanh(2.0 * (0.3 + h)) - std::tanh(2.0 * (0.3 - h))) / (2.0 * h);
  CHECK(eval_dual(th, 0.3, none).tangent.item() == doctest::Approx(fd).epsilon(1e-6));

  Expr t2 = g.time_input("s");
  CHECK_THROWS_AS(eval_dual(t + t2, 0.0, none), UsageError);
}

TEST_CASE("grad examples") {
  Graph g;
  Expr x = g.parameter("x", Shape::scalar());
  Bindings b;
  b.set("x", Tensor::scalar(3.0));
  CHECK(grad(x * x, b).at("x").item() == 6.0);

  b.set("x", Tensor::scalar(0.0));
  CHECK(grad(relu(x), b).at("x").item() == 0.0);
  CHECK(grad(abs(x), b).at("x").item() == 0.0);
  CHECK(grad(norm(embed(x, 0, 2)), b).at("x").item() == 0.0);

  Expr v = g.parameter("v", Shape::vector(2));
  b.set("v", Tensor::vector({1.0, 2.0}));
  CHECK_THROWS_AS(grad(v * x, b), ShapeError);
}

TEST_CASE("grad of norm(Wv) matches finite differences") {
  std::mt19937_64 rng(3);
  Graph g;
  Expr w = g.parameter("W", Shape::matrix(4, 3));
  Expr v = g.parameter("v", Shape::vector(3));
  Expr root = norm(matvec(w, v));
  Bindings b;
  b.set("W", Tensor::matrix(4, 3, uniform(rng, 12)));
  b.set("v", Tensor::vector(uniform(rng, 3)));
  const auto gs = grad(root, b);
  CHECK(rel_err(gs.at("W").data, fd_gradient(root, b, "W")) <= 1e-5);
  CHECK(rel_err(gs.at("v").data, fd_gradient(root, b, "v")) <= 1e-5);
}

TEST_CASE("grad matches finite differences on 100 random smooth graphs") {
  std::mt19937_64 rng(2024);
  int failures = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Graph g;
    Expr root = random_smooth_graph(g, rng);
    Bindings b;
    b.set("W", Tensor::matrix(3, 3, uniform(rng, 9)));
    b.set("x", Tensor::vector(uniform(rng, 3)));
    b.set("s", Tensor::scalar(uniform(rng, 1)[0]));
    const auto gs = grad(root, b);
    for (const char* name : {"W", "x", "s"}) {
      if (rel_err(gs.at(name).data, fd_gradient(root, b, name)) > 1e-5) ++failures;
    }
  }
  CHECK(failures == 0);
}

TEST_CASE("eval_dual matches finite differences away from breakpoints") {
  std::mt19937_64 rng(5);
  Graph g;
  Expr t = g.time_input("t");
  Expr p = g.parameter("p", Shape::vector(3));
  Expr y = tanh(scale(t, p) + g.vector({0.1, 0.2, 0.3}));
  Expr root = exp(-0.5 * t) * (relu(y) + abs(y * p)) / (2.0 + sqnorm(y)) +
              clamp(y, {-0.5, -0.5, -0.5}, {0.5, 0.5, 0.5});
  Bindings b;
  for (int trial = 0; trial < 50; ++trial) {
    b.set("p", Tensor::vector(uniform(rng, 3)));
    const double t0 = uniform(rng, 1, 0.0, 3.0)[0];
    const double h = 1e-5;
    const auto up = eval(root, Bindings(b).set("t", Tensor::scalar(t0 + h)));
    const auto down = eval(root, Bindings(b).set("t", Tensor::scalar(t0 - h)));
    const auto mid = eval(root, Bindings(b).set("t", Tensor::scalar(t0)));
    bool near_break = false;
    const auto yv = eval(y, Bindings(b).set("t", Tensor::scalar(t0)));
    for (double yi : yv.data) near_break = near_break || std::fabs(yi) < 1e-3 || std::fabs(std::fabs(yi) - 0.5) < 1e-3;
    if (near_break) continue;
    std::vector<double> fd(3);
    for (int i = 0; i < 3; ++i) fd[i] = (up.data[i] - down.data[i]) / (2.0 * h);
    const auto d = eval_dual(root, t0, b);
    CHECK(rel_err(d.value.data, mid.data) <= 1e-14);
    CHECK(rel_err(d.tangent.data, fd) <= 1e-4);
  }
}

TEST_CASE("evaluation is pure") {
  std::mt19937_64 rng(9);
  Graph g;
  Expr root = random_smooth_graph(g, rng);
  Bindings b;
  b.set("W", Tensor::matrix(3, 3, uniform(rng, 9)));
  b.set("x", Tensor::vector(uniform(rng, 3)));
  b.set("s", Tensor::scalar(0.7));
  CHECK(eval(root, b).data == eval(root, b).data);
  const auto g1 = grad(root, b);
  const auto g2 = grad(root, b);
  for (const auto& [name, value] : g1) CHECK(value.data == g2.at(name).data);
}

TEST_CASE("symbolic time derivative agrees with eval_dual") {
  std::mt19937_64 rng(13);
  Graph g;
  Expr t = g.time_input("t");
  Expr w1 = g.parameter("w1", Shape::matrix(5, 1));
  Expr b1 = g.parameter("b1", Shape::vector(5));
  Expr w2 = g.parameter("w2", Shape::matrix(2, 5));
  Expr n = matvec(w2, tanh(matvec(w1, t) + b1));
  Expr y = g.vector({1.0, -1.0}) + (1.0 - exp(-t)) * n;
  Expr field = clamp(y, {0.0, 0.0}, {1.0, 1.0}) - y * y + matvec(w2, relu(b1));
  Expr dy = time_derivative(field);
  Bindings b;
  b.set("w1", Tensor::matrix(5, 1, uniform(rng, 5)));
  b.set("b1", Tensor::vector(uniform(rng, 5)));
  b.set("w2", Tensor::matrix(2, 5, uniform(rng, 10)));
  for (double t0 : {0.0, 0.4, 1.3, 7.0}) {
    b.set("t", Tensor::scalar(t0));
    const auto sym = eval(dy, b);
    const auto dual = eval_dual(field, t0, b);
    CHECK(rel_err(sym.data, dual.tangent.data) <= 1e-12);
  }
  CHECK_THROWS_AS(time_derivative(norm(y)), UsageError);
  Expr constant_only = g.vector({1.0, 2.0}) * 3.0;
  CHECK(eval(time_derivative(constant_only), Bindings()).data == std::vector<double>{0.0, 0.0});
}

TEST_CASE("symbolic gradient agrees with reverse mode") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    Graph g;
    Expr root = random_smooth_graph(g, rng);
    Expr x = Expr(&g, *g.find("x"));
    Bindings b;
    b.set("W", Tensor::matrix(3, 3, uniform(rng, 9)));
    b.set("x", Tensor::vector(uniform(rng, 3)));
    b.set("s", Tensor::scalar(0.4));
    // norm has no symbolic rule; strip it by differentiating the other terms.
    (void)root;
    Graph h;
    Expr hw = h.parameter("W", Shape::matrix(3, 3));
    Expr hx = h.parameter("x", Shape::vector(3));
    Expr f = sum(tanh(matvec(hw, hx)) * exp(0.2 * hx)) + sqnorm(hx) / (1.0 + dot(hx, hx)) +
             sum(abs(hx) + relu(hx - 0.1) + clamp(hx, {-0.5, -0.5, -0.5}, {0.5, 0.5, 0.5}));
    const auto numeric = grad(f, b).at("x");
    const auto symbolic = eval(gradient(f, hx), b);
    CHECK(rel_err(symbolic.data, numeric.data) <= 1e-12);
  }
}

TEST_CASE("vjp of a vector map and through slices") {
  Graph g;
  Expr y = g.input("y", Shape::vector(4));
  Expr x = slice(y, 0, 2);
  Expr u = slice(y, 2, 2);
  Expr gx = concat({component(x, 0) * component(x, 1), exp(component(x, 0))});
  Expr jt_u = vjp(gx, std::vector<Expr>{x}, u)[0];
  Bindings b;
  b.set("y", Tensor::vector({0.5, 2.0, 3.0, -1.0}));
  // J = [[x1, x0], [e^x0, 0]]; J^T u = [x1 u0 + e^x0 u1, x0 u0]
  const auto r = eval(jt_u, b);
  CHECK(r.data[0] == doctest::Approx(2.0 * 3.0 - std::exp(0.5)));
  CHECK(r.data[1] == doctest::Approx(0.5 * 3.0));
  Expr unrelated = g.input("z", Shape::vector(2));
  const auto zero = eval(vjp(gx, std::vector<Expr>{unrelated}, u)[0], b);
  CHECK(zero.data == std::vector<double>{0.0, 0.0});
}

TEST_CASE("batched program matches single evaluation") {
  std::mt19937_64 rng(21);
  Graph g;
  Expr t = g.input("t", Shape::scalar());
  Expr w1 = g.parameter("w1", Shape::matrix(6, 1));
  Expr b1 = g.parameter("b1", Shape::vector(6));
  Expr w2 = g.parameter("w2", Shape::matrix(3, 6));
  Expr y = matvec(w2, tanh(matvec(w1, t) + b1));
  Expr loss = exp(-0.5 * t) * norm(y - g.vector({1.0, 0.0, -1.0}));
  const std::size_t batch = 7;
  const auto ts = uniform(rng, batch, 0.0, 10.0);
  Bindings b;
  b.set("w1", Tensor::matrix(6, 1, uniform(rng, 6)));
  b.set("b1", Tensor::vector(uniform(rng, 6)));
  b.set("w2", Tensor::matrix(3, 6, uniform(rng, 18)));

  Program prog(g, {loss});
  prog.set_batch(batch);
  prog.bind_batch("t", ts);
  for (const char* name : {"w1", "b1", "w2"}) prog.bind(name, *b.find(name));
  prog.forward();
  REQUIRE(prog.rows(loss) == batch);
  std::vector<double> seed(batch, 1.0 / batch);
  prog.backward(loss, seed);

  std::vector<double> expect_w2(18, 0.0);
  for (std::size_t i = 0; i < batch; ++i) {
    Bindings bi = b;
    bi.set("t", Tensor::scalar(ts[i]));
    CHECK(prog.value(loss)[i] == doctest::Approx(eval(loss, bi).item()).epsilon(1e-14));
    const auto gi = grad(loss, bi).at("w2");
    for (std::size_t j = 0; j < 18; ++j) expect_w2[j] += gi.data[j] / batch;
  }
  const auto adj = prog.adjoint(w2);
  CHECK(rel_err(std::vector<double>(adj.begin(), adj.end()), expect_w2) <= 1e-12);
  CHECK_THROWS_AS(prog.bind("nope", Tensor::scalar(1.0)), BindingError);
  CHECK_THROWS_AS(prog.backward(y, seed), ShapeError);
}

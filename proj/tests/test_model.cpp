#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>
#include <vector>

#include "doctest.h"
#include "oinn/errors.hpp"
#include "oinn/model.hpp"

using namespace oinn;

namespace {

MlpParams random_params(std::mt19937_64& rng, std::size_t n, std::size_t h, double scale = 1.0) {
  std::uniform_real_distribution<double> d(-scale, scale);
  MlpParams p = MlpParams::zeros(n, h);
  for (auto* v : {&p.w1, &p.b1, &p.w2, &p.b2}) {
    for (double& x : *v) x = d(rng);
  }
  return p;
}

// W2 tanh(W1 t + b1) + b2 with plain loops.
Vec network_oracle(double t, const MlpParams& p) {
  Vec hidden(p.hidden);
  for (std::size_t i = 0; i < p.hidden; ++i) hidden[i] = std::tanh(p.w1[i] * t + p.b1[i]);
  Vec out(p.dim);
  for (std::size_t r = 0; r < p.dim; ++r) {
    double s = p.b2[r];
    for (std::size_t i = 0; i < p.hidden; ++i) s += p.w2[r * p.hidden + i] * hidden[i];
    out[r] = s;
  }
  return out;
}

bool bit_equal(const Vec& a, const Vec& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

double rel(const Vec& a, const Vec& b) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-8);
}

}  // namespace

TEST_CASE("nn_forward") {
  CHECK(nn_forward(3.7, MlpParams::zeros(3, 5)) == Vec{0, 0, 0});
  MlpParams one = MlpParams::zeros(1, 1);
  one.w1 = {1};
  one.w2 = {1};
  CHECK(nn_forward(0.0, one) == Vec{0});

  std::mt19937_64 rng(21);
  for (int k = 0; k < 20; ++k) {
    const MlpParams p = random_params(rng, 3, 7);
    const double t = 0.5 * k;
    CHECK(rel(nn_forward(t, p), network_oracle(t, p)) < 1e-14);
  }
}

TEST_CASE("model_forward") {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> d(-10, 10);
  for (int k = 0; k < 100; ++k) {
    const MlpParams p = random_params(rng, 4, 9, 3.0);
    const OinnModel m{p, Vec{d(rng), d(rng), d(rng), d(rng)}, 10.0};
    CHECK(bit_equal(model_forward(0.0, m), m.y0));
  }
  const OinnModel zero{MlpParams::zeros(2, 3), Vec{1.5, -2}, 10.0};
  CHECK(model_forward(4.2, zero) == Vec{1.5, -2});

  // h = 1 toy: y(10) = y0 + (1 - e^-10)(w2 tanh(10 w1 + b1) + b2)
  MlpParams toy = MlpParams::zeros(1, 1);
  toy.w1 = {0.1};
  toy.b1 = {0.2};
  toy.w2 = {2.0};
  toy.b2 = {-0.5};
  const OinnModel m{toy, Vec{3.0}, 10.0};
  const double hand = 3.0 + (1 - std::exp(-10.0)) * (2.0 * std::tanh(1.2) - 0.5);
  CHECK(model_forward(10.0, m)[0] == doctest::Approx(hand).epsilon(1e-15));
}

TEST_CASE("model_time_derivative") {
  std::mt19937_64 rng(23);
  const MlpParams p = random_params(rng, 3, 6);
  const OinnModel m{p, Vec{1, 2, 3}, 10.0};
  CHECK(model_time_derivative(0.0, m) == nn_forward(0.0, p));
  CHECK(model_time_derivative(2.0, OinnModel{MlpParams::zeros(3, 6), Vec{1, 2, 3}, 10.0}) ==
        Vec{0, 0, 0});

  std::uniform_real_distribution<double> time(0.05, 10);
  const double h = 1e-5;
  for (int k = 0; k < 50; ++k) {
    const OinnModel r{random_params(rng, 3, 8), Vec{0.5, -1, 2}, 10.0};
    const double t = time(rng);
    const Vec up = model_forward(t + h, r);
    const Vec down = model_forward(t - h, r);
    Vec fd(3);
    for (int i = 0; i < 3; ++i) fd[i] = (up[i] - down[i]) / (2 * h);
    CHECK(rel(model_time_derivative(t, r), fd) <= 1e-4);
  }
  const OinnModel r{random_params(rng, 3, 8), Vec{0, 0, 0}, 10.0};
  CHECK(rel(model_time_derivative(1.7, r), [&] {
          const Vec up = model_forward(1.7 + h, r);
          const Vec down = model_forward(1.7 - h, r);
          return Vec{(up[0] - down[0]) / (2 * h), (up[1] - down[1]) / (2 * h),
                     (up[2] - down[2]) / (2 * h)};
        }()) <= 1e-4);
}

TEST_CASE("predict and projections") {
  std::mt19937_64 rng(24);
  const OinnModel m{random_params(rng, 3, 5, 4.0), Vec{0, 0, 0}, 10.0};
  const Vec raw = model_forward(10.0, m);
  CHECK(predict(m, Projection::identity()) == raw);

  const BoxSet omega = BoxSet::uniform(3, -0.25, 0.25);
  for (int k = 0; k < 20; ++k) {
    const OinnModel r{random_params(rng, 3, 5, 4.0), Vec{0, 0, 0}, 10.0};
    CHECK(omega.contains(predict(r, Projection::onto_box(omega))));
  }
  const BoxSet wide = BoxSet::uniform(3, -1e6, 1e6);
  CHECK(predict(m, Projection::onto_box(wide)) == raw);

  const Projection aff = Projection::onto_affine(AffineSet(1, 2, {1, 1}, {2}));
  const Vec out = aff.apply(Vec{0, 0, 7});
  CHECK(out[0] == doctest::Approx(1.0));
  CHECK(out[1] == doctest::Approx(1.0));
  CHECK(out[2] == 7.0);
  CHECK_THROWS_AS(aff.apply(Vec{1}), ShapeError);
  CHECK(aff.name() == "affine");
}

TEST_CASE("glorot initialization") {
  const std::size_t n = 4, h = 100;
  const MlpParams a = MlpParams::glorot(n, h, 5);
  const MlpParams b = MlpParams::glorot(n, h, 5);
  const MlpParams c = MlpParams::glorot(n, h, 6);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  const double l1 = std::sqrt(6.0 / (1 + h));
  const double l2 = std::sqrt(6.0 / (h + n));
  for (double w : a.w1) CHECK(std::fabs(w) <= l1);
  for (double w : a.w2) CHECK(std::fabs(w) <= l2);
  for (double v : a.b1) CHECK(v == 0.0);
  for (double v : a.b2) CHECK(v == 0.0);
  CHECK(a.count() == h + h + n * h + n);
}

TEST_CASE("parameter validation") {
  MlpParams p = MlpParams::zeros(2, 3);
  p.w2.pop_back();
  CHECK_THROWS_AS(p.validate(), ShapeError);
  OinnModel m{MlpParams::zeros(2, 3), Vec{1}, 10.0};
  CHECK_THROWS_AS(m.validate(), ShapeError);
  m.y0 = {1, 2};
  m.horizon = 0.0;
  CHECK_THROWS(m.validate());
}

TEST_CASE("checkpoint round trip is bit-exact") {
  std::mt19937_64 rng(25);
  const OinnModel m{random_params(rng, 3, 4), Vec{0.1, 1.0 / 3, -2e-300}, 10.0};
  const OinnModel back = parse_checkpoint(checkpoint_text(m));
  CHECK(back.params == m.params);
  CHECK(bit_equal(back.y0, m.y0));
  CHECK(back.horizon == m.horizon);

  const auto dir = std::filesystem::temp_directory_path() / "oinn_model_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "checkpoint";
  save_checkpoint(path, m);
  const OinnModel loaded = load_checkpoint(path);
  CHECK(loaded.params == m.params);
  CHECK(bit_equal(model_forward(10.0, loaded), model_forward(10.0, m)));
  std::filesystem::remove_all(dir);
}

TEST_CASE("checkpoint parse errors") {
  CHECK_THROWS_AS(parse_checkpoint("nonsense"), Error);
  CHECK_THROWS_AS(parse_checkpoint("oinn-checkpoint 99\n"), Error);
  std::string text = checkpoint_text(OinnModel{MlpParams::zeros(1, 1), Vec{0}, 10.0});
  text.resize(text.size() / 2);
  CHECK_THROWS_AS(parse_checkpoint(text), Error);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/dir/checkpoint"), Error);
}

#include "oinn/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "oinn/autodiff/evaluator.hpp"
#include "oinn/errors.hpp"
#include "oinn/random.hpp"

namespace oinn {

MlpParams MlpParams::zeros(std::size_t dim, std::size_t hidden) {
  if (dim == 0 || hidden == 0) throw UsageError("network dimensions must be positive");
  return {dim, hidden, Vec(hidden, 0.0), Vec(hidden, 0.0), Vec(dim * hidden, 0.0), Vec(dim, 0.0)};
}

MlpParams MlpParams::glorot(std::size_t dim, std::size_t hidden, std::uint64_t seed) {
  MlpParams p = zeros(dim, hidden);
  const double r1 = std::sqrt(6.0 / static_cast<double>(1 + hidden));
  const double r2 = std::sqrt(6.0 / static_cast<double>(hidden + dim));
  for (std::size_t i = 0; i < p.w1.size(); ++i) {
    p.w1[i] = r1 * (2.0 * rng::uniform(seed, rng::kInitW1, i) - 1.0);
  }
  for (std::size_t i = 0; i < p.w2.size(); ++i) {
    p.w2[i] = r2 * (2.0 * rng::uniform(seed, rng::kInitW2, i) - 1.0);
  }
  return p;
}

double MlpParams::norm() const {
  double s = 0.0;
  for (const Vec* v : {&w1, &b1, &w2, &b2}) {
    for (double x : *v) s += x * x;
  }
  return std::sqrt(s);
}

bool MlpParams::all_finite() const {
  for (const Vec* v : {&w1, &b1, &w2, &b2}) {
    for (double x : *v) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

void MlpParams::validate() const {
  if (w1.size() != hidden || b1.size() != hidden || w2.size() != dim * hidden || b2.size() != dim) {
    throw ShapeError("network parameters do not match dim " + std::to_string(dim) + ", hidden " +
                     std::to_string(hidden));
  }
}

void OinnModel::validate() const {
  params.validate();
  if (y0.size() != params.dim) throw ShapeError("initial point does not match network output");
  if (!(horizon > 0.0)) throw UsageError("horizon must be positive");
}

Projection Projection::onto_box(BoxSet box) {
  Projection p;
  p.kind = Kind::box;
  p.box = std::move(box);
  return p;
}

Projection Projection::onto_affine(AffineSet eq) {
  Projection p;
  p.kind = Kind::affine;
  p.affine = std::move(eq);
  return p;
}

Vec Projection::apply(std::span<const double> y) const {
  switch (kind) {
    case Kind::identity:
      return Vec(y.begin(), y.end());
    case Kind::box:
      return project_box(y, box);
    case Kind::affine: {
      const std::size_t n = affine->cols();
      if (y.size() < n) throw ShapeError("affine projection: state shorter than the constraint");
      Vec out = affine->project(y.first(n));
      out.insert(out.end(), y.begin() + static_cast<std::ptrdiff_t>(n), y.end());
      return out;
    }
  }
  return {};
}

std::string Projection::name() const {
  switch (kind) {
    case Kind::identity: return "identity";
    case Kind::box: return "box";
    case Kind::affine: return "affine";
  }
  return "?";
}

ModelGraph build_model_graph(ad::Graph& g, ad::Expr t, std::size_t dim, std::size_t hidden,
                             std::span<const double> y0) {
  if (y0.size() != dim) throw ShapeError("initial point does not match network output");
  ModelGraph m;
  m.w1 = g.parameter("w1", ad::Shape::matrix(hidden, 1));
  m.b1 = g.parameter("b1", ad::Shape::vector(hidden));
  m.w2 = g.parameter("w2", ad::Shape::matrix(dim, hidden));
  m.b2 = g.parameter("b2", ad::Shape::vector(dim));
  m.network = ad::matvec(m.w2, ad::tanh(ad::matvec(m.w1, t) + m.b1)) + m.b2;
  m.state = g.vector(Vec(y0.begin(), y0.end())) + (1.0 - ad::exp(-t)) * m.network;
  return m;
}

namespace {

ad::Bindings bind_params(const MlpParams& p, double t) {
  ad::Bindings b;
  b.set("w1", ad::Tensor::matrix(p.hidden, 1, p.w1));
  b.set("b1", ad::Tensor::vector(p.b1));
  b.set("w2", ad::Tensor::matrix(p.dim, p.hidden, p.w2));
  b.set("b2", ad::Tensor::vector(p.b2));
  b.set("t", ad::Tensor::scalar(t));
  return b;
}

}  // namespace

Vec nn_forward(double t, const MlpParams& p) {
  p.validate();
  ad::Graph g;
  const ad::Expr te = g.time_input("t");
  const ModelGraph m = build_model_graph(g, te, p.dim, p.hidden, Vec(p.dim, 0.0));
  return ad::eval(m.network, bind_params(p, t)).data;
}

Vec model_forward(double t, const OinnModel& model) {
  model.validate();
  ad::Graph g;
  const ad::Expr te = g.time_input("t");
  const ModelGraph m = build_model_graph(g, te, model.params.dim, model.params.hidden, model.y0);
  return ad::eval(m.state, bind_params(model.params, t)).data;
}

Vec model_time_derivative(double t, const OinnModel& model) {
  model.validate();
  ad::Graph g;
  const ad::Expr te = g.time_input("t");
  const ModelGraph m = build_model_graph(g, te, model.params.dim, model.params.hidden, model.y0);
  return ad::eval_dual(m.state, t, bind_params(model.params, t)).tangent.data;
}

Vec predict(const OinnModel& m, const Projection& proj) {
  return proj.apply(model_forward(m.horizon, m));
}

namespace {

void write_row(std::string& out, const char* key, const Vec& v) {
  out += key;
  char buf[40];
  for (double x : v) {
    std::snprintf(buf, sizeof buf, " %.17g", x);
    out += buf;
  }
  out += '\n';
}

Vec read_row(std::istringstream& in, const char* key, std::size_t n) {
  std::string line;
  if (!std::getline(in, line)) throw UsageError(std::string("checkpoint: missing '") + key + "'");
  std::istringstream ls(line);
  std::string got;
  ls >> got;
  if (got != key) throw UsageError("checkpoint: expected '" + std::string(key) + "', found '" + got + "'");
  Vec v;
  std::string tok;
  while (ls >> tok) {
    char* end = nullptr;
    const double x = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') throw UsageError("checkpoint: bad number '" + tok + "'");
    v.push_back(x);
  }
  if (v.size() != n) {
    throw UsageError("checkpoint: '" + std::string(key) + "' has " + std::to_string(v.size()) +
                     " values, expected " + std::to_string(n));
  }
  return v;
}

}  // namespace

std::string checkpoint_text(const OinnModel& m) {
  m.validate();
  std::string out = "oinn-checkpoint 1\n";
  out += "dim " + std::to_string(m.params.dim) + "\n";
  out += "hidden " + std::to_string(m.params.hidden) + "\n";
  write_row(out, "horizon", {m.horizon});
  write_row(out, "y0", m.y0);
  write_row(out, "w1", m.params.w1);
  write_row(out, "b1", m.params.b1);
  write_row(out, "w2", m.params.w2);
  write_row(out, "b2", m.params.b2);
  return out;
}

OinnModel parse_checkpoint(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "oinn-checkpoint 1") {
    throw UsageError("checkpoint: unknown format header '" + line + "'");
  }
  const auto read_size = [&](const char* key) {
    const Vec v = read_row(in, key, 1);
    if (v[0] < 1 || v[0] != std::floor(v[0])) throw UsageError(std::string("checkpoint: bad ") + key);
    return static_cast<std::size_t>(v[0]);
  };
  const std::size_t dim = read_size("dim");
  const std::size_t hidden = read_size("hidden");
  OinnModel m;
  m.horizon = read_row(in, "horizon", 1)[0];
  m.y0 = read_row(in, "y0", dim);
  m.params.dim = dim;
  m.params.hidden = hidden;
  m.params.w1 = read_row(in, "w1", hidden);
  m.params.b1 = read_row(in, "b1", hidden);
  m.params.w2 = read_row(in, "w2", dim * hidden);
  m.params.b2 = read_row(in, "b2", dim);
  m.validate();
  return m;
}

void save_checkpoint(const std::filesystem::path& path, const OinnModel& m) {
  const std::string text = checkpoint_text(m);
  const auto tmp = std::filesystem::path(path).concat(".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write checkpoint " + tmp.string());
    out << text;
    if (!out) throw Error("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

OinnModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str());
}

}  // namespace oinn

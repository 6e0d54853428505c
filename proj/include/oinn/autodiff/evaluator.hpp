#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "oinn/autodiff/graph.hpp"
#include "oinn/autodiff/tensor.hpp"

namespace oinn::ad {

class Bindings {
 public:
  Bindings& set(std::string name, Tensor value);
  const Tensor* find(std::string_view name) const;
  const std::map<std::string, Tensor, std::less<>>& values() const { return values_; }

 private:
  std::map<std::string, Tensor, std::less<>> values_;
};

struct DualValue {
  Tensor value;
  Tensor tangent;  // d(value)/dt along the graph's time input
};

// Parameter name -> gradient, shape-matched with the parameter.
using GradientSet = std::map<std::string, Tensor, std::less<>>;

// Single forward pass. Throws BindingError for unbound leaves reachable from
// `expr` and ShapeError when a bound tensor does not match its leaf.
Tensor eval(Expr expr, const Bindings& bindings);

// Forward-mode evaluation along the (at most one) time input reachable from
// `expr`, whose value is `t`. Throws UsageError if more than one time input is
// reachable. With no time input the tangent is zero.
DualValue eval_dual(Expr expr, double t, const Bindings& bindings);

// Reverse-mode gradient of a scalar expression w.r.t. every parameter of its
// graph (zero for parameters it does not reach). Throws ShapeError for a non-scalar root.
GradientSet grad(Expr scalar_root, const Bindings& bindings);

// Compiled forward/reverse evaluation of a fixed set of roots, evaluated for a
// batch of samples at once. Leaves bound with bind() are shared by the whole
// batch; leaves bound with bind_batch() carry one value per sample, and every
// node downstream of them is evaluated per sample. Buffers are reused across
// calls, so one Program per hot loop avoids allocation.
//
// Not thread-safe; distinct Programs may run concurrently.
class Program {
 public:
  Program(const Graph& graph, std::vector<Expr> roots);

  void set_batch(std::size_t batch);
  std::size_t batch() const { return batch_; }

  void bind(std::string_view name, std::span<const double> value);
  void bind(std::string_view name, const Tensor& value);
  void bind_batch(std::string_view name, std::span<const double> values);

  // True if an input or parameter with this name is reachable from the roots.
  bool has_leaf(std::string_view name) const;

  void forward();

  // Values of `e`, rows(e) consecutive blocks of e.shape().size() entries.
  std::span<const double> value(Expr e) const;
  std::size_t rows(Expr e) const;

  // Reverse pass from a scalar root, seeded per sample (seed.size() == rows(root)).
  void backward(Expr root, std::span<const double> seed);
  // Adjoint after backward(); for batch-shared leaves, summed over the batch.
  std::span<const double> adjoint(Expr e) const;

 private:
  struct Slot {
    std::size_t rows = 1;
    std::size_t size = 0;
    std::vector<double> value;
    std::vector<double> adjoint;
    bool batched = false;       // bound per sample, or downstream of such a leaf
    bool bound = false;         // leaves only
    bool differentiable = false;  // downstream of an input or parameter
  };

  std::size_t slot_of(NodeId id) const;
  std::size_t slot_of(Expr e) const;
  std::size_t leaf_slot(std::string_view name) const;
  void forward_node(NodeId id);
  void backward_node(NodeId id);
  const double* row(std::size_t slot, std::size_t r) const;
  double* row_mut(std::size_t slot, std::size_t r);
  double* adj_row(std::size_t slot, std::size_t r);
  const double* adj_row(std::size_t slot, std::size_t r) const;

  const Graph* graph_;
  std::vector<Expr> roots_;
  std::vector<NodeId> order_;
  std::vector<std::size_t> slot_index_;  // node id -> slot, or npos
  std::vector<Slot> slots_;
  std::size_t batch_ = 1;
};

}  // namespace oinn::ad

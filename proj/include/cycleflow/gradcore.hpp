#pragma once

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>
#include <Eigen/Core>

namespace cycleflow {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Named float64 tensors. Names are unique; shapes are fixed once a tensor is
// added. Iteration order is the name order, which keeps every consumer
// (optimizer, checkpoints, gradient checks) deterministic.
struct ParamSet {
  std::map<std::string, Matrix> tensors;

  void add(const std::string& name, const Matrix& value);
  Matrix& at(const std::string& name);
  const Matrix& at(const std::string& name) const;
  bool has(const std::string& name) const { return tensors.count(name) != 0; }
  bool shapes_match(const ParamSet& other) const;
  ParamSet zeros_like() const;
  std::size_t total_elements() const;
};

struct OptState {
  ParamSet m;  // first moments, shapes mirror the parameters
  ParamSet v;  // second moments
  long step_count = 0;

  static OptState init(const ParamSet& params);
};

struct AdamHyper {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Reverse-mode tape over matrix values. A loss function builds nodes through
// the op helpers below; backward() then accumulates gradients into the leaf
// nodes. Values are float64 throughout.
class Tape {
 public:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    bool grad_alloc = false;
    std::function<void(Tape&)> backward;
  };

  int add_node(Matrix value, bool needs_grad, std::function<void(Tape&)> backward = nullptr);
  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  Matrix& grad_of(int id);
  void run_backward(int loss_id);
  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;
};

struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const { return tape->node(id).value; }
  bool needs_grad() const { return tape->node(id).needs_grad; }
};

// --- graph construction ---
Var constant(Tape& t, const Matrix& m);
Var leaf(Tape& t, const Matrix& m);  // gradient-tracked input

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
// m + col replicated across all columns of m (bias add).
Var add_colwise(Var m, Var col);
Var tanh_op(Var a);
Var scale(Var a, double c);
// Row-wise concatenation; all parts share the column count.
Var vstack(const std::vector<Var>& parts);
// Column-wise concatenation; all parts share the row count.
Var hstack(const std::vector<Var>& parts);
// Mean over all elements of (a - target)^2; result is 1x1.
Var mean_sq_diff(Var a, const Matrix& target);
// Mean over all elements of a^2; result is 1x1.
Var mean_sq(Var a);

struct ParamVars {
  std::map<std::string, Var> vars;
  Var at(const std::string& name) const;
};

using LossFn = std::function<Var(Tape&, const ParamVars&)>;

// Evaluates `loss` at `params` and returns (value, gradients). The gradient
// ParamSet mirrors the parameter shapes; parameters the loss never touches
// get zero gradients. Throws if the loss value is non-finite, naming an
// offending parameter when one contains non-finite entries.
std::pair<double, ParamSet> value_and_grad(const LossFn& loss, const ParamSet& params);

// Forward-only evaluation (used by finite-difference oracles).
double loss_value(const LossFn& loss, const ParamSet& params);

// Standard bias-corrected Adam update, in place. step_count increments by 1.
void adam_step(ParamSet& params, const ParamSet& grads, OptState& state, const AdamHyper& hyper);

// Linear warmup: ramps from base_lr/warmup_steps up to base_lr, then constant.
double warmup_lr(double base_lr, long step, long warmup_steps);

}  // namespace cycleflow

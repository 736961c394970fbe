#pragma once

#include <functional>
#include <string>

#include "cycleflow/gradcore.hpp"
#include "cycleflow/rng.hpp"

namespace cycleflow {

// One conditional-flow-matching training point. x_t and v_target follow from
// the endpoints:
//   x_t      = (1 - (1 - sigma) t) x0 + t x1
//   v_target = x1 - (1 - sigma) x0            (constant in t)
struct FlowSample {
  Matrix x0;
  Matrix x1;
  double t = 0.0;
  Matrix x_t;
  Matrix v_target;
};

struct FlowHyper {
  enum class Solver { kEuler, kMidpoint };

  double sigma = 1e-4;
  Solver solver = Solver::kEuler;
  int n_steps = 10;

  void validate() const;
};

FlowHyper::Solver solver_from_string(const std::string& s);
std::string solver_to_string(FlowHyper::Solver s);

// Straight-line interpolant between noise x0 and data x1 at time t.
Matrix ot_path(const Matrix& x0, const Matrix& x1, double t, double sigma);

// Regression target of the flow field; independent of t.
Matrix target_field(const Matrix& x0, const Matrix& x1, double sigma);

// Conditioning is captured inside the closure; the field maps (state, time)
// to a field value of the same shape.
using FieldFn = std::function<Matrix(const Matrix& x, double t)>;

// Draws x0 ~ N(0, I) (same shape as x1, column-major fill) and t ~ U[0,1),
// in that order, then returns mean over elements of (pred - v_target)^2.
double cfm_loss(const FieldFn& field, const Matrix& x1, double sigma, Rng& rng);

// Sample the drawn endpoints without evaluating a field. Training code uses
// this so its draws match cfm_loss draw-for-draw.
FlowSample draw_flow_sample(const Matrix& x1, double sigma, Rng& rng);

// Tape-side counterpart for training: the field returns a graph node. The
// rng draw order matches cfm_loss exactly.
using FieldVarFn = std::function<Var(Tape&, const Matrix& x_t, double t)>;
Var cfm_loss_var(Tape& tape, const FieldVarFn& field, const Matrix& x1, double sigma, Rng& rng);

// Integrates dx/dt = field(x, t) from t=0 to t=1 with fixed steps and
// returns the terminal state. Throws on a non-finite state, reporting the
// step index.
Matrix ode_sample(const FieldFn& field, const Matrix& x0, const FlowHyper& hyper);

}  // namespace cycleflow

#include "cycleflow/flowcore.hpp"

#include <cmath>
#include <stdexcept>

namespace cycleflow {

void FlowHyper::validate() const {
  if (sigma < 0.0 || sigma >= 1.0) throw std::invalid_argument("FlowHyper: sigma must be in [0, 1)");
  if (n_steps < 1) throw std::invalid_argument("FlowHyper: n_steps must be >= 1");
}

FlowHyper::Solver solver_from_string(const std::string& s) {
  if (s == "euler") return FlowHyper::Solver::kEuler;
  if (s == "midpoint") return FlowHyper::Solver::kMidpoint;
  throw std::invalid_argument("unknown solver '" + s + "' (expected euler or midpoint)");
}

std::string solver_to_string(FlowHyper::Solver s) {
  return s == FlowHyper::Solver::kEuler ? "euler" : "midpoint";
}

Matrix ot_path(const Matrix& x0, const Matrix& x1, double t, double sigma) {
  if (x0.rows() != x1.rows() || x0.cols() != x1.cols())
    throw std::invalid_argument("ot_path: shape mismatch between x0 and x1");
  if (t < 0.0 || t > 1.0) throw std::invalid_argument("ot_path: t out of [0, 1]");
  return (1.0 - (1.0 - sigma) * t) * x0 + t * x1;
}

Matrix target_field(const Matrix& x0, const Matrix& x1, double sigma) {
  if (x0.rows() != x1.rows() || x0.cols() != x1.cols())
    throw std::invalid_argument("target_field: shape mismatch between x0 and x1");
  return x1 - (1.0 - sigma) * x0;
}

FlowSample draw_flow_sample(const Matrix& x1, double sigma, Rng& rng) {
  FlowSample s;
  s.x1 = x1;
  s.x0 = rng.normal_matrix(x1.rows(), x1.cols());
  s.t = rng.uniform();
  s.x_t = ot_path(s.x0, s.x1, s.t, sigma);
  s.v_target = target_field(s.x0, s.x1, sigma);
  return s;
}

double cfm_loss(const FieldFn& field, const Matrix& x1, double sigma, Rng& rng) {
  const FlowSample s = draw_flow_sample(x1, sigma, rng);
  const Matrix pred = field(s.x_t, s.t);
  if (pred.rows() != x1.rows() || pred.cols() != x1.cols())
    throw std::invalid_argument("cfm_loss: field prediction shape mismatch");
  if (!pred.allFinite()) throw std::runtime_error("cfm_loss: non-finite field prediction");
  return (pred - s.v_target).squaredNorm() / static_cast<double>(x1.size());
}

Var cfm_loss_var(Tape& tape, const FieldVarFn& field, const Matrix& x1, double sigma, Rng& rng) {
  const FlowSample s = draw_flow_sample(x1, sigma, rng);
  Var pred = field(tape, s.x_t, s.t);
  if (pred.value().rows() != x1.rows() || pred.value().cols() != x1.cols())
    throw std::invalid_argument("cfm_loss_var: field prediction shape mismatch");
  return mean_sq_diff(pred, s.v_target);
}

Matrix ode_sample(const FieldFn& field, const Matrix& x0, const FlowHyper& hyper) {
  hyper.validate();
  const double h = 1.0 / static_cast<double>(hyper.n_steps);
  Matrix x = x0;
  for (int k = 0; k < hyper.n_steps; ++k) {
    const double t = static_cast<double>(k) * h;
    if (hyper.solver == FlowHyper::Solver::kEuler) {
      x += h * field(x, t);
    } else {
      const Matrix mid = x + (0.5 * h) * field(x, t);
      x += h * field(mid, t + 0.5 * h);
    }
    if (!x.allFinite())
      throw std::runtime_error("ode_sample: non-finite state at step " + std::to_string(k));
  }
  return x;
}

}  // namespace cycleflow

#include "cycleflow/gradcore.hpp"

#include <cmath>
#include <stdexcept>

namespace cycleflow {

void ParamSet::add(const std::string& name, const Matrix& value) {
  if (tensors.count(name)) throw std::invalid_argument("ParamSet: duplicate name '" + name + "'");
  tensors.emplace(name, value);
}

Matrix& ParamSet::at(const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw std::invalid_argument("ParamSet: unknown name '" + name + "'");
  return it->second;
}

const Matrix& ParamSet::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw std::invalid_argument("ParamSet: unknown name '" + name + "'");
  return it->second;
}

bool ParamSet::shapes_match(const ParamSet& other) const {
  if (tensors.size() != other.tensors.size()) return false;
  auto a = tensors.begin();
  auto b = other.tensors.begin();
  for (; a != tensors.end(); ++a, ++b) {
    if (a->first != b->first) return false;
    if (a->second.rows() != b->second.rows() || a->second.cols() != b->second.cols()) return false;
  }
  return true;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet z;
  for (const auto& kv : tensors) z.tensors.emplace(kv.first, Matrix::Zero(kv.second.rows(), kv.second.cols()));
  return z;
}

std::size_t ParamSet::total_elements() const {
  std::size_t n = 0;
  for (const auto& kv : tensors) n += static_cast<std::size_t>(kv.second.size());
  return n;
}

OptState OptState::init(const ParamSet& params) {
  OptState s;
  s.m = params.zeros_like();
  s.v = params.zeros_like();
  s.step_count = 0;
  return s;
}

int Tape::add_node(Matrix value, bool needs_grad, std::function<void(Tape&)> backward) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Matrix& Tape::grad_of(int id) {
  Node& n = node(id);
  if (!n.grad_alloc) {
    n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    n.grad_alloc = true;
  }
  return n.grad;
}

void Tape::run_backward(int loss_id) {
  const Node& loss = node(loss_id);
  if (loss.value.rows() != 1 || loss.value.cols() != 1)
    throw std::invalid_argument("Tape: backward target must be a 1x1 scalar");
  grad_of(loss_id)(0, 0) = 1.0;
  // Nodes are appended in evaluation order, so reverse index order is a
  // topological order of the graph.
  for (int i = loss_id; i >= 0; --i) {
    Node& n = node(i);
    if (n.backward && n.needs_grad && n.grad_alloc) n.backward(*this);
  }
}

Var constant(Tape& t, const Matrix& m) { return Var{&t, t.add_node(m, false)}; }

Var leaf(Tape& t, const Matrix& m) { return Var{&t, t.add_node(m, true)}; }

Var matmul(Var a, Var b) {
  Tape& t = *a.tape;
  Matrix value = a.value() * b.value();
  const bool ng = a.needs_grad() || b.needs_grad();
  int id = t.add_node(std::move(value), ng);
  if (ng) {
    int aid = a.id, bid = b.id;
    t.node(id).backward = [id, aid, bid](Tape& tp) {
      const Matrix& g = tp.node(id).grad;
      if (tp.node(aid).needs_grad) tp.grad_of(aid).noalias() += g * tp.node(bid).value.transpose();
      if (tp.node(bid).needs_grad) tp.grad_of(bid).noalias() += tp.node(aid).value.transpose() * g;
    };
  }
  return Var{&t, id};
}

Var add(Var a, Var b) {
  Tape& t = *a.tape;
  if (a.value().rows() != b.value().rows() || a.value().cols() != b.value().cols())
    throw std::invalid_argument("add: shape mismatch");
  Matrix value = a.value() + b.value();
  const bool ng = a.needs_grad() || b.needs_grad();
  int id = t.add_node(std::move(value), ng);
  if (ng) {
    int aid = a.id, bid = b.id;
    t.node(id).backward = [id, aid, bid](Tape& tp) {
      const Matrix& g = tp.node(id).grad;
      if (tp.node(aid).needs_grad) tp.grad_of(aid) += g;
      if (tp.node(bid).needs_grad) tp.grad_of(bid) += g;
    };
  }
  return Var{&t, id};
}

Var sub(Var a, Var b) {
  Tape& t = *a.tape;
  if (a.value().rows() != b.value().rows() || a.value().cols() != b.value().cols())
    throw std::invalid_argument("sub: shape mismatch");
  Matrix value = a.value() - b.value();
  const bool ng = a.needs_grad() || b.needs_grad();
  int id = t.add_node(std::move(value), ng);
  if (ng) {
    int aid = a.id, bid = b.id;
    t.node(id).backward = [id, aid, bid](Tape& tp) {
      const Matrix& g = tp.node(id).grad;
      if (tp.node(aid).needs_grad) tp.grad_of(aid) += g;
      if (tp.node(bid).needs_grad) tp.grad_of(bid) -= g;
    };
  }
  return Var{&t, id};
}

Var add_colwise(Var m, Var col) {
  Tape& t = *m.tape;
  if (col.value().cols() != 1 || col.value().rows() != m.value().rows())
    throw std::invalid_argument("add_colwise: bias must be rows(m) x 1");
  Matrix value = m.value().colwise() + Eigen::VectorXd(col.value().col(0));
  const bool ng = m.needs_grad() || col.needs_grad();
  int id = t.add_node(std::move(value), ng);
  if (ng) {
    int mid = m.id, cid = col.id;
    t.node(id).backward = [id, mid, cid](Tape& tp) {
      const Matrix& g = tp.node(id).grad;
      if (tp.node(mid).needs_grad) tp.grad_of(mid) += g;
      if (tp.node(cid).needs_grad) tp.grad_of(cid) += g.rowwise().sum();
    };
  }
  return Var{&t, id};
}

Var tanh_op(Var a) {
  Tape& t = *a.tape;
  Matrix value = a.value().array().tanh().matrix();
  const bool ng = a.needs_grad();
  int id = t.add_node(std::move(value), ng);
  if (ng) {
    int aid = a.id;
    t.node(id).backward = [id, aid](Tape& tp) {
      const Matrix& g = tp.node(id).grad;
      const Matrix& y = tp.node(id).value;
      tp.grad_of(aid).array() += g.array() * (1.0 - y.array().square());
    };
  }
  return Var{&t, id};
}

Var scale(Var a, double c) {
  Tape& t = *a.tape;
  Matrix value = c * a.value();
  const bool ng = a.needs_grad();
  int id = t.add_node(std::move(value), ng);
  if (ng) {
    int aid = a.id;
    t.node(id).backward = [id, aid, c](Tape& tp) { tp.grad_of(aid) += c * tp.node(id).grad; };
  }
  return Var{&t, id};
}

Var vstack(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("vstack: no parts");
  Tape& t = *parts.front().tape;
  const Eigen::Index cols = parts.front().value().cols();
  Eigen::Index rows = 0;
  bool ng = false;
  for (const Var& p : parts) {
    if (p.value().cols() != cols) throw std::invalid_argument("vstack: column count mismatch");
    rows += p.value().rows();
    ng = ng || p.needs_grad();
  }
  Matrix value(rows, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    value.middleRows(at, p.value().rows()) = p.value();
    at += p.value().rows();
  }
  int id = t.add_node(std::move(value), ng);
  if (ng) {
    std::vector<int> ids;
    std::vector<Eigen::Index> offs, sizes;
    Eigen::Index off = 0;
    for (const Var& p : parts) {
      ids.push_back(p.id);
      offs.push_back(off);
      sizes.push_back(p.value().rows());
      off += p.value().rows();
    }
    t.node(id).backward = [id, ids, offs, sizes](Tape& tp) {
      const Matrix& g = tp.node(id).grad;
      for (std::size_t k = 0; k < ids.size(); ++k)
        if (tp.node(ids[k]).needs_grad) tp.grad_of(ids[k]) += g.middleRows(offs[k], sizes[k]);
    };
  }
  return Var{&t, id};
}

Var hstack(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("hstack: no parts");
  Tape& t = *parts.front().tape;
  const Eigen::Index rows = parts.front().value().rows();
  Eigen::Index cols = 0;
  bool ng = false;
  for (const Var& p : parts) {
    if (p.value().rows() != rows) throw std::invalid_argument("hstack: row count mismatch");
    cols += p.value().cols();
    ng = ng || p.needs_grad();
  }
  Matrix value(rows, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    value.middleCols(at, p.value().cols()) = p.value();
    at += p.value().cols();
  }
  int id = t.add_node(std::move(value), ng);
  if (ng) {
    std::vector<int> ids;
    std::vector<Eigen::Index> offs, sizes;
    Eigen::Index off = 0;
    for (const Var& p : parts) {
      ids.push_back(p.id);
      offs.push_back(off);
      sizes.push_back(p.value().cols());
      off += p.value().cols();
    }
    t.node(id).backward = [id, ids, offs, sizes](Tape& tp) {
      const Matrix& g = tp.node(id).grad;
      for (std::size_t k = 0; k < ids.size(); ++k)
        if (tp.node(ids[k]).needs_grad) tp.grad_of(ids[k]) += g.middleCols(offs[k], sizes[k]);
    };
  }
  return Var{&t, id};
}

Var mean_sq_diff(Var a, const Matrix& target) {
  Tape& t = *a.tape;
  if (a.value().rows() != target.rows() || a.value().cols() != target.cols())
    throw std::invalid_argument("mean_sq_diff: shape mismatch");
  const double n = static_cast<double>(target.size());
  Matrix value(1, 1);
  value(0, 0) = (a.value() - target).squaredNorm() / n;
  const bool ng = a.needs_grad();
  int id = t.add_node(std::move(value), ng);
  if (ng) {
    int aid = a.id;
    Matrix tgt = target;
    t.node(id).backward = [id, aid, tgt, n](Tape& tp) {
      const double g = tp.node(id).grad(0, 0);
      tp.grad_of(aid) += (2.0 * g / n) * (tp.node(aid).value - tgt);
    };
  }
  return Var{&t, id};
}

Var mean_sq(Var a) { return mean_sq_diff(a, Matrix::Zero(a.value().rows(), a.value().cols())); }

Var ParamVars::at(const std::string& name) const {
  auto it = vars.find(name);
  if (it == vars.end()) throw std::invalid_argument("ParamVars: unknown name '" + name + "'");
  return it->second;
}

static std::string find_nonfinite_param(const ParamSet& params) {
  for (const auto& kv : params.tensors)
    if (!kv.second.allFinite()) return kv.first;
  return std::string();
}

std::pair<double, ParamSet> value_and_grad(const LossFn& loss, const ParamSet& params) {
  Tape tape;
  ParamVars pv;
  for (const auto& kv : params.tensors) pv.vars.emplace(kv.first, leaf(tape, kv.second));
  Var out = loss(tape, pv);
  if (out.value().rows() != 1 || out.value().cols() != 1)
    throw std::invalid_argument("value_and_grad: loss must be scalar (1x1)");
  const double value = out.value()(0, 0);
  if (!std::isfinite(value)) {
    const std::string guilty = find_nonfinite_param(params);
    if (!guilty.empty())
      throw std::runtime_error("value_and_grad: non-finite loss (parameter '" + guilty +
                               "' contains non-finite entries)");
    throw std::runtime_error("value_and_grad: non-finite loss");
  }
  tape.run_backward(out.id);
  ParamSet grads;
  for (const auto& kv : pv.vars) {
    const Tape::Node& n = tape.node(kv.second.id);
    grads.tensors.emplace(kv.first, n.grad_alloc ? n.grad : Matrix::Zero(n.value.rows(), n.value.cols()));
  }
  return {value, grads};
}

double loss_value(const LossFn& loss, const ParamSet& params) {
  Tape tape;
  ParamVars pv;
  for (const auto& kv : params.tensors) pv.vars.emplace(kv.first, leaf(tape, kv.second));
  Var out = loss(tape, pv);
  if (out.value().rows() != 1 || out.value().cols() != 1)
    throw std::invalid_argument("loss_value: loss must be scalar (1x1)");
  return out.value()(0, 0);
}

void adam_step(ParamSet& params, const ParamSet& grads, OptState& state, const AdamHyper& hyper) {
  if (!params.shapes_match(grads)) throw std::invalid_argument("adam_step: gradient shape mismatch");
  if (!params.shapes_match(state.m) || !params.shapes_match(state.v))
    throw std::invalid_argument("adam_step: optimizer state shape mismatch");
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(hyper.beta1, t);
  const double bc2 = 1.0 - std::pow(hyper.beta2, t);
  auto g = grads.tensors.begin();
  auto m = state.m.tensors.begin();
  auto v = state.v.tensors.begin();
  for (auto p = params.tensors.begin(); p != params.tensors.end(); ++p, ++g, ++m, ++v) {
    m->second = hyper.beta1 * m->second + (1.0 - hyper.beta1) * g->second;
    v->second = hyper.beta2 * v->second.array().matrix() +
                (1.0 - hyper.beta2) * g->second.array().square().matrix();
    const Eigen::ArrayXXd m_hat = m->second.array() / bc1;
    const Eigen::ArrayXXd v_hat = v->second.array() / bc2;
    p->second.array() -= hyper.lr * m_hat / (v_hat.sqrt() + hyper.eps);
  }
}

double warmup_lr(double base_lr, long step, long warmup_steps) {
  if (warmup_steps <= 0) return base_lr;
  if (step >= warmup_steps) return base_lr;
  return base_lr * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
}

}  // namespace cycleflow

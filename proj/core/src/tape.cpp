#include "anr/tape.hpp"

#include <algorithm>

namespace anr {

const Tensor& Var::value() const {
  if (!tape_) throw GradientError("use of an empty Var");
  return tape_->value(id_);
}

Var Tape::leaf(Tensor& param) {
  if (auto it = leaves_.find(&param); it != leaves_.end()) return Var(this, it->second);
  Node node;
  node.value = Tensor(param.shape, param.data);
  if (!frozen_.contains(&param)) {
    node.sink = &param;
    node.requires_grad = true;
  }
  nodes_.push_back(std::move(node));
  leaves_.emplace(&param, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

void Tape::freeze(const Tensor& param) {
  if (leaves_.contains(&param)) throw GradientError("freeze: tensor already recorded as a leaf");
  frozen_.insert(&param);
}

Var Tape::constant(Tensor value) {
  Node node;
  value.grad.reset();
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::span<const Var> parents, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  node.parents.reserve(parents.size());
  for (const Var& p : parents) {
    if (&p.tape() != this) throw GradientError("operand recorded on a different tape");
    node.parents.push_back(p.id());
    node.requires_grad = node.requires_grad || nodes_[p.id()].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

double* Tape::grad_ptr(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return nullptr;
  if (n.grad.size() != n.value.size()) n.grad.assign(n.value.size(), 0.0);
  return n.grad.data();
}

std::span<const double> Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  return {n.grad.data(), n.grad.size()};
}

void Tape::mix_branch(std::uint64_t decision) {
  branch_hash_ ^= decision;
  branch_hash_ *= 1099511628211ull;
}

void Tape::backward(Var loss) {
  if (&loss.tape() != this) throw GradientError("backward: loss belongs to another tape");
  if (consumed_) throw GradientError("backward: tape already consumed by a previous backward pass");
  const Node& root = nodes_[loss.id()];
  if (root.value.size() != 1) {
    throw GradientError("backward: loss must be scalar, got shape " + to_string(root.value.shape));
  }
  if (!root.requires_grad) throw GradientError("backward: loss is detached from every trainable leaf");
  consumed_ = true;

  grad_ptr(loss.id())[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, std::span<const double>(n.grad.data(), n.grad.size()));
    if (n.sink) {
      auto& g = n.sink->ensure_grad();
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += n.grad[k];
    }
  }
}

}  // namespace anr

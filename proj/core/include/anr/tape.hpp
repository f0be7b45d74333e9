#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "anr/tensor.hpp"

namespace anr {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  [[nodiscard]] const Tensor& value() const;
  [[nodiscard]] const Shape& shape() const { return value().shape; }
  [[nodiscard]] Tape& tape() const { return *tape_; }
  [[nodiscard]] std::size_t id() const { return id_; }
  [[nodiscard]] bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Append-only record of primitive operations for reverse-mode differentiation.
///
/// Nodes are stored in forward order; backward walks them in reverse. A tape
/// supports exactly one backward pass. Parameters enter through leaf(), which
/// keeps a pointer to the caller's Tensor and accumulates into its `grad`
/// during backward, so the Tensor must outlive the backward call.
class Tape {
 public:
  /// Backward rule: receives the node's upstream gradient and pushes
  /// contributions into parent buffers obtained from grad_ptr().
  using BackwardFn = std::function<void(Tape&, std::span<const double> upstream)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers a trainable tensor. Calling twice with the same tensor returns the same node.
  Var leaf(Tensor& param);
  /// Records a detached copy that never receives gradient.
  Var constant(Tensor value);
  /// Later leaf() calls on `param` record it as a constant. Must precede its first leaf() call.
  void freeze(const Tensor& param);
  /// Records a derived node. The backward rule is dropped when no parent requires grad.
  Var record(Tensor value, std::span<const Var> parents, BackwardFn backward);
  Var record(Tensor value, std::initializer_list<Var> parents, BackwardFn backward) {
    return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
                  std::move(backward));
  }

  void backward(Var loss);

  [[nodiscard]] const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  [[nodiscard]] bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }
  /// Gradient buffer of a node during backward; nullptr when the node needs none.
  double* grad_ptr(std::size_t id);
  /// Accumulated gradient of any node after backward (empty if none flowed).
  [[nodiscard]] std::span<const double> grad(Var v) const;

  [[nodiscard]] std::size_t size() const { return nodes_.size(); }
  [[nodiscard]] bool consumed() const { return consumed_; }

  /// Non-smooth ops (relu, max, thresholding) mix their branch decisions here
  /// so gradient checks can detect when a perturbation crossed a kink.
  void mix_branch(std::uint64_t decision);
  [[nodiscard]] std::uint64_t branch_signature() const { return branch_hash_; }

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    std::vector<double> grad;
    Tensor* sink = nullptr;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
  std::unordered_map<const Tensor*, std::size_t> leaves_;
  std::unordered_set<const Tensor*> frozen_;
  std::uint64_t branch_hash_ = 1469598103934665603ull;
  bool consumed_ = false;
};

}  // namespace anr

#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stdd/tensor.hpp"

namespace stdd {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid as long as the
// tape it points into is alive.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Gradients keyed by leaf node id. Only leaves that require gradients and
// were reached from the loss appear.
class GradientMap {
 public:
  bool contains(const Var& v) const { return grads_.count(v.id()) != 0; }
  const Tensor& at(const Var& v) const {
    auto it = grads_.find(v.id());
    if (it == grads_.end()) throw ContractError("no gradient recorded for leaf " + std::to_string(v.id()));
    return it->second;
  }
  std::size_t size() const noexcept { return grads_.size(); }

 private:
  friend class Tape;
  std::map<std::size_t, Tensor> grads_;
};

// Records primitive operations in execution order. backward() replays them
// in reverse, which is a valid reverse topological order because every node
// is appended after its inputs.
class Tape {
 public:
  // Pullback: receives the output gradient and accumulates into inputs.
  using Pullback = std::function<void(Tape&, const Tensor&)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const noexcept { return grad_enabled_; }

  Var leaf(Tensor value, bool requires_grad = true) {
    nodes_.push_back(Node{std::move(value), requires_grad && grad_enabled_, true, {}});
    return Var(this, nodes_.size() - 1);
  }

  Var constant(Tensor value) { return leaf(std::move(value), false); }

  // Appends an op result. The pullback is dropped when no input needs a
  // gradient, so inference tapes stay light.
  Var record(Tensor value, std::initializer_list<Var> inputs, Pullback pullback) {
    return record(std::move(value), std::vector<Var>(inputs), std::move(pullback));
  }

  Var record(Tensor value, const std::vector<Var>& inputs, Pullback pullback) {
    bool needs = false;
    if (grad_enabled_)
      for (const auto& in : inputs) needs = needs || nodes_.at(in.id()).requires_grad;
    nodes_.push_back(Node{std::move(value), needs, false, needs ? std::move(pullback) : Pullback{}});
    return Var(this, nodes_.size() - 1);
  }

  // Like record(), for pullbacks that need the op's own output value.
  using OutputPullback = std::function<void(Tape&, const Tensor& grad, const Tensor& out)>;
  Var record_with_output(Tensor value, const std::vector<Var>& inputs, OutputPullback pullback) {
    const std::size_t id = nodes_.size();
    return record(std::move(value), inputs, [id, pb = std::move(pullback)](Tape& t, const Tensor& g) {
      pb(t, g, t.value(id));
    });
  }

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Adds `g` into the pending gradient of node `id`. Called from pullbacks.
  void accumulate(const Var& v, const Tensor& g) {
    if (!nodes_.at(v.id()).requires_grad) return;
    auto& slot = pending_.at(v.id());
    if (!slot) {
      slot = g;
      return;
    }
    auto& acc = slot->data();
    const auto& src = g.data();
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += src[i];
  }

  GradientMap backward(const Var& loss) {
    if (&loss.tape() != this) throw ContractError("backward: loss recorded on a different tape");
    if (loss.value().size() != 1)
      throw ContractError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
    pending_.assign(nodes_.size(), std::nullopt);
    GradientMap out;
    if (!nodes_[loss.id()].requires_grad) return out;
    pending_[loss.id()] = Tensor(loss.shape(), real{1});
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      auto& g = pending_[i];
      if (!g) continue;
      Node& node = nodes_[i];
      if (node.is_leaf) {
        out.grads_.emplace(i, std::move(*g));
      } else if (node.pullback) {
        node.pullback(*this, *g);
      }
      g.reset();
    }
    pending_.clear();
    return out;
  }

  // Query-key dot products performed by attention on this tape.
  std::uint64_t pair_interactions() const noexcept { return pair_interactions_; }
  void count_pairs(std::uint64_t n) noexcept { pair_interactions_ += n; }
  void reset_pair_counter() noexcept { pair_interactions_ = 0; }

 private:
  struct Node {
    Tensor value;
    bool requires_grad;
    bool is_leaf;
    Pullback pullback;
  };

  // deque keeps references returned by value() stable across appends
  std::deque<Node> nodes_;
  std::vector<std::optional<Tensor>> pending_;
  bool grad_enabled_;
  std::uint64_t pair_interactions_ = 0;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }
inline bool Var::requires_grad() const { return tape_->requires_grad(id_); }

}  // namespace stdd

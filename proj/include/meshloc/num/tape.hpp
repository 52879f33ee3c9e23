#pragma once

#include <deque>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "meshloc/common/errors.hpp"
#include "meshloc/num/tensor.hpp"

namespace meshloc::num {

template <typename Scalar>
class TapeT;

/// Lightweight handle to a tape node.
template <typename Scalar>
struct VarT {
  TapeT<Scalar>* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const TensorT<Scalar>& value() const { return tape->value(*this); }
};

/// Named learnable tensors plus non-trainable state (e.g. batch-norm running
/// statistics). Map order gives deterministic iteration.
template <typename Scalar>
class ParamSetT {
 public:
  struct Entry {
    TensorT<Scalar> value;
    bool trainable = true;
  };

  TensorT<Scalar>& add(const std::string& name, TensorT<Scalar> value, bool trainable = true) {
    auto [it, inserted] = entries_.insert_or_assign(name, Entry{std::move(value), trainable});
    return it->second.value;
  }

  bool has(const std::string& name) const { return entries_.count(name) != 0; }

  TensorT<Scalar>& at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::invalid_argument("ParamSet: unknown parameter " + name);
    return it->second.value;
  }
  const TensorT<Scalar>& at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::invalid_argument("ParamSet: unknown parameter " + name);
    return it->second.value;
  }

  const std::map<std::string, Entry>& entries() const { return entries_; }
  std::map<std::string, Entry>& entries() { return entries_; }

  std::vector<std::string> trainable_names() const {
    std::vector<std::string> out;
    for (const auto& [name, e] : entries_)
      if (e.trainable) out.push_back(name);
    return out;
  }

 private:
  std::map<std::string, Entry> entries_;
};

/// Dynamic compute tape: nodes are appended in evaluation order, which is a
/// valid topological order by construction. backward() sweeps it in reverse.
template <typename Scalar>
class TapeT {
 public:
  using Tensor = TensorT<Scalar>;
  using Var = VarT<Scalar>;
  using BackwardFn = std::function<void(TapeT&, int)>;

  /// Leaf with no gradient tracking.
  Var constant(Tensor v) { return make(add_node("constant", std::move(v), {}, nullptr, false)); }

  /// Leaf whose gradient is tracked (inputs under test, oracle probes).
  Var input(Tensor v) { return make(add_node("input", std::move(v), {}, nullptr, true)); }

  /// Leaf bound to a named parameter; value is copied onto the tape so the
  /// graph stays self-contained. Gradients are retrieved via param_grads().
  Var param(const ParamSetT<Scalar>& set, const std::string& name) {
    const int id = add_node("param", set.at(name), {}, nullptr, true);
    params_.emplace_back(name, id);
    return make(id);
  }

  int add_node(const char* op, Tensor value, std::vector<int> parents, BackwardFn backward,
               bool force_requires_grad = false) {
    if (!value.all_finite())
      throw NumericalError(std::string("non-finite value produced by op '") + op + "'");
    bool rg = force_requires_grad;
    for (int p : parents) rg = rg || nodes_[static_cast<std::size_t>(p)].requires_grad;
    nodes_.push_back(Node{op, std::move(value), Tensor{}, std::move(parents), std::move(backward), rg});
    return static_cast<int>(nodes_.size()) - 1;
  }

  const Tensor& value(Var v) const { return node(v.id).value; }
  const Tensor& value_at(int id) const { return node(id).value; }
  const char* op_of(Var v) const { return node(v.id).op; }
  std::size_t node_count() const { return nodes_.size(); }

  bool requires_grad(int id) const { return node(id).requires_grad; }

  /// Accumulation target for node `id`; allocates zeros on first touch.
  Tensor& grad_buffer(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() == 0 && n.value.size() != 0) n.grad = Tensor::zeros(n.value.shape());
    return n.grad;
  }

  /// Gradient of a node after backward(); zeros if the node was not reached.
  Tensor grad(Var v) const {
    const Node& n = node(v.id);
    if (n.grad.size() == 0) return Tensor::zeros(n.value.shape());
    return n.grad;
  }

  /// Reverse sweep from a scalar output. Rejects non-scalar outputs.
  void backward(Var output) {
    if (output.tape != this) throw std::invalid_argument("backward: var from another tape");
    Node& out = nodes_[static_cast<std::size_t>(output.id)];
    if (out.value.size() != 1)
      throw std::invalid_argument("backward: output must be scalar, got " + out.value.shape_str());
    if (!out.requires_grad) return;
    grad_buffer(output.id).array()[0] = Scalar(1);
    for (int id = output.id; id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      if (n.grad.size() == 0 || !n.backward) continue;
      n.backward(*this, id);
    }
  }

  /// Gradients of all registered parameters, accumulated by name.
  /// Parameters never reached by backward() get zeros.
  std::map<std::string, Tensor> param_grads() const {
    std::map<std::string, Tensor> out;
    for (const auto& [name, id] : params_) {
      const Node& n = node(id);
      auto it = out.find(name);
      if (it == out.end()) {
        out.emplace(name, n.grad.size() == 0 ? Tensor::zeros(n.value.shape()) : n.grad);
      } else if (n.grad.size() != 0) {
        it->second.array() += n.grad.array();
      }
    }
    return out;
  }

 private:
  struct Node {
    const char* op;
    Tensor value;
    Tensor grad;
    std::vector<int> parents;
    BackwardFn backward;
    bool requires_grad;
  };

  const Node& node(int id) const {
    if (id < 0 || id >= static_cast<int>(nodes_.size()))
      throw std::invalid_argument("Tape: bad node id");
    return nodes_[static_cast<std::size_t>(id)];
  }

  Var make(int id) { return Var{this, id}; }

  std::deque<Node> nodes_;
  std::vector<std::pair<std::string, int>> params_;
};

using Tape = TapeT<double>;
using Var = VarT<double>;
using ParamSet = ParamSetT<double>;

}  // namespace meshloc::num

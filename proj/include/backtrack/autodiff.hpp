#pragma once

#include <functional>
#include <string>
#include <vector>

#include "backtrack/rng.hpp"
#include "backtrack/tensor.hpp"

namespace backtrack {

// Named, trainable tensor. Gradients accumulate into `grad` when a tape that
// references the parameter runs backward().
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros(value.shape())) {}

  void zero_grad() { grad.fill(0.0); }
};

// Define-by-run reverse-mode tape. Each op records its output value plus a
// closure that routes the output gradient to the op's parents. Nodes are
// created in topological order, so walking them in reverse creation order is
// a valid reverse topological sweep. A tape is confined to one thread for a
// single forward/backward pair.
class Tape {
 public:
  using VarId = int;

  VarId constant(Tensor v);      // untracked leaf, no gradient flows into it
  VarId leaf(Tensor v);          // tracked leaf, gradient readable after backward
  VarId param(Parameter& p);     // tracked leaf bound to a Parameter

  VarId matmul(VarId a, VarId b);
  VarId add(VarId a, VarId b);
  VarId add_rowvec(VarId a, VarId row);   // [R x C] + [C]
  VarId sub(VarId a, VarId b);
  VarId mul(VarId a, VarId b);            // elementwise
  VarId mul_colvec(VarId a, VarId col);   // [R x C] scaled per row by [R]
  VarId scale(VarId a, double k);
  VarId add_scalar(VarId a, double k);
  VarId neg(VarId a) { return scale(a, -1.0); }
  VarId silu(VarId a);
  VarId sigmoid(VarId a);
  VarId log_clamped(VarId a, double floor = 1e-8);
  VarId clamp_min(VarId a, double lo);    // max(x, lo); gradient gated at the clamp
  VarId layer_norm(VarId a, VarId gain, VarId bias, double eps = 1e-5);
  VarId softmax_rows(VarId a);
  VarId straight_through_sample(VarId probs, Rng& rng);
  VarId argmax_onehot(VarId probs);       // deterministic straight-through path
  VarId sum(VarId a);
  VarId mean(VarId a);
  VarId reshape(VarId a, std::vector<int> shape);
  VarId concat_cols(VarId a, VarId b);    // [R x C1] ++ [R x C2]
  VarId gather_rows(VarId a, std::vector<int> index);  // out[r] = a[r, index[r]]
  // Numerically stable binary cross entropy against constant targets:
  // sum over columns, mean over rows. Gradient flows into logits only.
  VarId bce_with_logits(VarId logits, VarId targets);

  // Seeds d(root)=1 and sweeps the tape in reverse creation order. Gradients
  // of nodes created via param() are added into their Parameter::grad.
  void backward(VarId root);

  const Tensor& value(VarId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  const Tensor& grad(VarId id) const;
  bool tracked(VarId id) const { return nodes_[static_cast<std::size_t>(id)].tracked; }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // allocated on demand during backward
    bool tracked = false;
    Parameter* bound = nullptr;
    std::function<void(Tape&, VarId)> backprop;  // distributes grad(self) to parents
  };

  VarId push(Tensor value, bool tracked, std::function<void(Tape&, VarId)> backprop);
  void accumulate(VarId id, const double* g, std::size_t n);
  Tensor& grad_buf(VarId id);
  const Node& node(VarId id) const { return nodes_[static_cast<std::size_t>(id)]; }

  std::vector<Node> nodes_;
};

}  // namespace backtrack

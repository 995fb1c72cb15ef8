#ifndef DWNET_TAPE_HPP
#define DWNET_TAPE_HPP

#include <functional>
#include <utility>
#include <vector>

#include "dwnet/tensor.hpp"

namespace dwnet {

class Rng;

inline constexpr double kSeluScale = 1.0507009873554805;
inline constexpr double kSeluAlpha = 1.6732632423543772;

/// Reverse-mode differentiation tape over dense tensors.
///
/// Operations append nodes in topological order; backward() walks them once
/// in reverse. A tape is a single-threaded builder and is meant to live for
/// one forward/backward pass. Values of all nodes are retained until the
/// tape is destroyed, so evaluation over large inputs should be chunked.
class Tape {
 public:
  using NodeId = int;

  /// Registers an input tensor. Gradients are tracked only for leaves
  /// created with requires_grad = true (parameters).
  NodeId leaf(Tensor value, bool requires_grad = false);
  NodeId constant(Tensor value) { return leaf(std::move(value), false); }

  const Tensor& value(NodeId id) const { return nodes_[static_cast<size_t>(id)].value; }
  /// Gradient accumulated by the last backward(); zeros if unreachable.
  Tensor grad(NodeId id) const;
  size_t node_count() const { return nodes_.size(); }

  // Dense algebra.
  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId hadamard(NodeId a, NodeId b);
  /// Adds a 1 x c bias row to every row of a.
  NodeId add_bias(NodeId a, NodeId bias);
  /// Elementwise alpha * x + beta.
  NodeId axpb(NodeId x, double alpha, double beta);
  /// alpha * x + beta * y, elementwise over same-shape tensors.
  NodeId axpby(double alpha, NodeId x, double beta, NodeId y);

  // Nonlinearities.
  NodeId sigmoid(NodeId x);
  NodeId tanh(NodeId x);
  NodeId selu(NodeId x);

  // Structure ops.
  NodeId concat_cols(NodeId a, NodeId b);
  NodeId concat_rows(const std::vector<NodeId>& blocks);
  /// Rows of x selected by index (duplicates allowed); backward scatter-adds.
  NodeId gather_rows(NodeId x, std::vector<int> index);
  /// Row i of the output is the sum of rows of x whose group id equals i.
  /// Groups with no rows yield zero rows.
  NodeId sum_rows_by_group(NodeId x, std::vector<int> group, int n_groups);
  /// As sum_rows_by_group but divided by the group size; empty groups stay zero.
  NodeId mean_rows_by_group(NodeId x, std::vector<int> group, int n_groups);

  /// Inverted dropout: kept entries are scaled by 1/(1-p) so evaluation needs
  /// no rescaling. train = false (or p = 0) is the identity.
  NodeId dropout(NodeId x, double p, bool train, Rng& rng);

  // Reductions to 1 x 1.
  NodeId sum_all(NodeId x);
  NodeId mean_all(NodeId x);
  NodeId sum_squares(NodeId x);
  NodeId sqrt_scalar(NodeId x);
  /// mean((a - b)^2) over all entries.
  NodeId mse_reduce(NodeId a, NodeId b);

  /// Backpropagates from a 1 x 1 loss node through every reachable node.
  /// Throws NonScalarLoss otherwise.
  void backward(NodeId loss);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool grad_live = false;
    std::function<void(Tape&)> backprop;
  };

  NodeId push(Tensor value, bool requires_grad, std::function<void(Tape&)> backprop);
  bool needs_grad(NodeId id) const { return nodes_[static_cast<size_t>(id)].requires_grad; }
  Tensor& grad_ref(NodeId id);

  std::vector<Node> nodes_;
};

/// Optimizer state for adam_step: first/second moment per parameter tensor.
struct AdamState {
  long long step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  void init_like(const std::vector<Tensor*>& params);
};

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam update, in place on params.
void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
               AdamState& state, const AdamConfig& config);

struct GradCheckOptions {
  double eps = 1e-6;
  /// Coordinates sampled per parameter tensor; 0 checks every coordinate.
  int coords_per_tensor = 64;
  uint64_t seed = 0;
};

/// Central finite differences against reverse-mode gradients.
/// loss_fn re-evaluates the scalar objective at the current parameter values;
/// grad_fn returns the reverse-mode gradients aligned with params. Returns
/// max over sampled coordinates of |g_ad - g_fd| / max(|g_ad|, |g_fd|, 1e-8).
/// Throws DegenerateEpsilon when eps <= 0.
double gradient_check(const std::function<double()>& loss_fn,
                      const std::function<std::vector<Tensor>()>& grad_fn,
                      const std::vector<Tensor*>& params,
                      const GradCheckOptions& options = {});

}  // namespace dwnet

#endif  // DWNET_TAPE_HPP

#ifndef DWNET_MODEL_HPP
#define DWNET_MODEL_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dwnet/netgraph.hpp"
#include "dwnet/nn.hpp"
#include "dwnet/tape.hpp"
#include "dwnet/tensor.hpp"

namespace dwnet {

enum class Target { Delay, Jitter };
enum class PathCellKind { Gru, Tanh };

const char* target_name(Target t);
Target target_from_name(const std::string& name);

/// Architecture and inference hyperparameters.
struct ModelConfig {
  int state_dim = 32;
  int rounds = 8;  // message passing iterations T
  double lambda = 0.1;
  int readout_hidden = 256;
  double dropout_p = 0.5;
  bool secondary_enabled = true;
  bool include_self_in_neighbors = false;
  Target target = Target::Delay;
  /// Cell used for the per-link path update; Tanh is an ablation variant.
  PathCellKind path_cell = PathCellKind::Gru;
  /// One weight set shared across rounds (default) or one per round.
  bool per_round_weights = false;

  void validate() const;
  int cell_sets() const { return per_round_weights ? rounds : 1; }
  int readout_input_dim() const {
    return secondary_enabled ? 2 * state_dim : state_dim;
  }
};

/// All trainable weights: the path-update cell, the secondary-path GRU, the
/// link GRU and the two readout layers. Cell vectors hold one entry when
/// weights are shared across rounds, or `rounds` entries otherwise.
struct ModelParams {
  std::vector<GruCellParams> path_cells;
  std::vector<GruCellParams> secondary_cells;
  std::vector<GruCellParams> link_cells;
  DenseParams readout_hidden;
  DenseParams readout_out;

  static ModelParams init(const ModelConfig& config, uint64_t seed);

  /// Stable (name, tensor) enumeration used by checkpoints and the optimizer.
  std::vector<std::pair<std::string, Tensor*>> named_tensors();
  std::vector<std::pair<std::string, const Tensor*>> named_tensors() const;
};

/// Throws ConfigMismatch unless every parameter shape agrees with config.
void check_params(const ModelParams& params, const ModelConfig& config);

/// Link states, primary path states and secondary path states.
struct StateSet {
  Tensor h_l;
  Tensor h_p;
  Tensor hs_p;
};

/// Rows [x, 0, ..., 0]: the feature in the first component, zeros after.
/// Secondary states start identical to primary ones. Throws SizeMismatch.
StateSet init_states(const HeteroGraph& graph, const std::vector<double>& x_p,
                     const std::vector<double>& x_l, const ModelConfig& config);

/// Optional capture of intermediate quantities for tests and debugging.
struct ForwardTrace {
  /// states[0] holds the initial states; states[t+1] those after round t.
  std::vector<StateSet> states;
  /// Per row of the message matrices: (path id, link id). Fixed across rounds.
  std::vector<std::pair<int, int>> message_index;
  std::vector<Tensor> messages;     // per round: path-to-link messages m_{p,l}
  std::vector<Tensor> fused;        // per round: convex fusion of m and m'
  std::vector<Tensor> link_inputs;  // per round: per-link aggregated input
};

enum class RunMode { Train, Eval };

/// Node handles of a forward pass built on an external tape; used by the
/// training loop to attach the loss.
struct ForwardBuild {
  Tape::NodeId predictions;  // [n_paths x 1]
  /// Bound parameter nodes aligned with ModelParams::named_tensors().
  std::vector<Tape::NodeId> param_nodes;
  /// Weight-matrix nodes of the active submodel (bias nodes excluded), the
  /// set covered by L2 regularization.
  std::vector<Tape::NodeId> weight_matrix_nodes;
};

ForwardBuild build_forward(Tape& tape, const HeteroGraph& graph,
                           const std::vector<double>& x_p,
                           const std::vector<double>& x_l,
                           const ModelParams& params, const ModelConfig& config,
                           RunMode mode, uint64_t seed,
                           ForwardTrace* trace = nullptr);

/// Runs one round of message passing on plain tensors (no gradients):
/// paths absorb link states in walk order, secondary states absorb the mean
/// of neighboring primaries, links absorb the fused path messages.
StateSet message_passing_round(const HeteroGraph& graph, const StateSet& states,
                               const ModelParams& params, const ModelConfig& config,
                               int round = 0);

/// Full forward pass returning one prediction per path. Deterministic given
/// (params, inputs, seed, mode); dropout acts only in Train mode.
std::vector<double> forward(const HeteroGraph& graph, const std::vector<double>& x_p,
                            const std::vector<double>& x_l, const ModelParams& params,
                            const ModelConfig& config, RunMode mode, uint64_t seed,
                            ForwardTrace* trace = nullptr);

/// Monte-Carlo dropout summary over n_samples train-mode passes.
struct McSummary {
  std::vector<double> mean;
  std::vector<double> stddev;
};

McSummary mc_predict(const HeteroGraph& graph, const std::vector<double>& x_p,
                     const std::vector<double>& x_l, const ModelParams& params,
                     const ModelConfig& config, int n_samples, uint64_t seed);

}  // namespace dwnet

#endif  // DWNET_MODEL_HPP

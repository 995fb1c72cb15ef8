#ifndef DWNET_NN_HPP
#define DWNET_NN_HPP

#include <string>
#include <vector>

#include "dwnet/tape.hpp"
#include "dwnet/tensor.hpp"

namespace dwnet {

class Rng;

/// Weights of one GRU cell acting on row-vector states of width state_dim.
/// W_* map the input, U_* map the hidden state, b_* are bias rows.
struct GruCellParams {
  Tensor W_z, W_r, W_h;
  Tensor U_z, U_r, U_h;
  Tensor b_z, b_r, b_h;

  /// Matrices uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], biases zero.
  static GruCellParams init(int state_dim, Rng& rng);
  void check_shapes(int state_dim, const std::string& what = "gru cell") const;
};

enum class Activation { Selu, Linear };

/// One fully connected layer, y = act(x * weight + bias).
struct DenseParams {
  Tensor weight;
  Tensor bias;
  Activation activation = Activation::Linear;

  static DenseParams init(int in_dim, int out_dim, Activation activation, Rng& rng);
};

/// Tape node ids for a GRU cell's weights, bound once per forward pass.
struct GruCellNodes {
  Tape::NodeId W_z, W_r, W_h;
  Tape::NodeId U_z, U_r, U_h;
  Tape::NodeId b_z, b_r, b_h;
};

struct DenseNodes {
  Tape::NodeId weight;
  Tape::NodeId bias;
  Activation activation = Activation::Linear;
};

GruCellNodes bind(Tape& tape, const GruCellParams& cell);
DenseNodes bind(Tape& tape, const DenseParams& dense);

/// Batched GRU update over row-vector states:
///   z = sigmoid(x W_z + h U_z + b_z)
///   r = sigmoid(x W_r + h U_r + b_r)
///   cand = tanh(x W_h + (r . h) U_h + b_h)
///   out = (1 - z) . h + z . cand
/// The reset gate is applied to the hidden state before its matmul.
Tape::NodeId gru_step(Tape& tape, const GruCellNodes& cell, Tape::NodeId state,
                      Tape::NodeId input);

/// Plain recurrent update out = tanh(x W_h + h U_h + b_h); uses only the
/// candidate weights of the cell. Kept for the path-update ablation.
Tape::NodeId tanh_cell_step(Tape& tape, const GruCellNodes& cell, Tape::NodeId state,
                            Tape::NodeId input);

Tape::NodeId dense_apply(Tape& tape, const DenseNodes& dense, Tape::NodeId x);

/// Gradient-free convenience evaluation of one GRU step.
Tensor gru_step(const GruCellParams& cell, const Tensor& state, const Tensor& input);

}  // namespace dwnet

#endif  // DWNET_NN_HPP

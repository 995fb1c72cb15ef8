#include "dwnet/nn.hpp"

#include <cmath>

#include "dwnet/error.hpp"
#include "dwnet/rng.hpp"

namespace dwnet {

GruCellParams GruCellParams::init(int state_dim, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(state_dim));
  GruCellParams cell;
  cell.W_z = Tensor::uniform(state_dim, state_dim, bound, rng);
  cell.W_r = Tensor::uniform(state_dim, state_dim, bound, rng);
  cell.W_h = Tensor::uniform(state_dim, state_dim, bound, rng);
  cell.U_z = Tensor::uniform(state_dim, state_dim, bound, rng);
  cell.U_r = Tensor::uniform(state_dim, state_dim, bound, rng);
  cell.U_h = Tensor::uniform(state_dim, state_dim, bound, rng);
  cell.b_z = Tensor::zeros(1, state_dim);
  cell.b_r = Tensor::zeros(1, state_dim);
  cell.b_h = Tensor::zeros(1, state_dim);
  return cell;
}

void GruCellParams::check_shapes(int state_dim, const std::string& what) const {
  auto check_mat = [&](const Tensor& t, const char* name) {
    if (t.rows != state_dim || t.cols != state_dim) {
      raise(ErrorKind::ShapeMismatch, what + " " + name + " " + t.shape_str());
    }
  };
  auto check_bias = [&](const Tensor& t, const char* name) {
    if (t.rows != 1 || t.cols != state_dim) {
      raise(ErrorKind::ShapeMismatch, what + " " + name + " " + t.shape_str());
    }
  };
  check_mat(W_z, "W_z");
  check_mat(W_r, "W_r");
  check_mat(W_h, "W_h");
  check_mat(U_z, "U_z");
  check_mat(U_r, "U_r");
  check_mat(U_h, "U_h");
  check_bias(b_z, "b_z");
  check_bias(b_r, "b_r");
  check_bias(b_h, "b_h");
}

DenseParams DenseParams::init(int in_dim, int out_dim, Activation activation, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
  DenseParams dense;
  dense.weight = Tensor::uniform(in_dim, out_dim, bound, rng);
  dense.bias = Tensor::zeros(1, out_dim);
  dense.activation = activation;
  return dense;
}

GruCellNodes bind(Tape& tape, const GruCellParams& cell) {
  GruCellNodes nodes;
  nodes.W_z = tape.leaf(cell.W_z, true);
  nodes.W_r = tape.leaf(cell.W_r, true);
  nodes.W_h = tape.leaf(cell.W_h, true);
  nodes.U_z = tape.leaf(cell.U_z, true);
  nodes.U_r = tape.leaf(cell.U_r, true);
  nodes.U_h = tape.leaf(cell.U_h, true);
  nodes.b_z = tape.leaf(cell.b_z, true);
  nodes.b_r = tape.leaf(cell.b_r, true);
  nodes.b_h = tape.leaf(cell.b_h, true);
  return nodes;
}

DenseNodes bind(Tape& tape, const DenseParams& dense) {
  DenseNodes nodes;
  nodes.weight = tape.leaf(dense.weight, true);
  nodes.bias = tape.leaf(dense.bias, true);
  nodes.activation = dense.activation;
  return nodes;
}

Tape::NodeId gru_step(Tape& tape, const GruCellNodes& cell, Tape::NodeId state,
                      Tape::NodeId input) {
  const auto z = tape.sigmoid(tape.add_bias(
      tape.add(tape.matmul(input, cell.W_z), tape.matmul(state, cell.U_z)), cell.b_z));
  const auto r = tape.sigmoid(tape.add_bias(
      tape.add(tape.matmul(input, cell.W_r), tape.matmul(state, cell.U_r)), cell.b_r));
  const auto cand = tape.tanh(tape.add_bias(
      tape.add(tape.matmul(input, cell.W_h), tape.matmul(tape.hadamard(r, state), cell.U_h)),
      cell.b_h));
  const auto keep = tape.hadamard(tape.axpb(z, -1.0, 1.0), state);
  return tape.add(keep, tape.hadamard(z, cand));
}

Tape::NodeId tanh_cell_step(Tape& tape, const GruCellNodes& cell, Tape::NodeId state,
                            Tape::NodeId input) {
  return tape.tanh(tape.add_bias(
      tape.add(tape.matmul(input, cell.W_h), tape.matmul(state, cell.U_h)), cell.b_h));
}

Tape::NodeId dense_apply(Tape& tape, const DenseNodes& dense, Tape::NodeId x) {
  const auto affine = tape.add_bias(tape.matmul(x, dense.weight), dense.bias);
  return dense.activation == Activation::Selu ? tape.selu(affine) : affine;
}

Tensor gru_step(const GruCellParams& cell, const Tensor& state, const Tensor& input) {
  Tape tape;
  const auto nodes = bind(tape, cell);
  const auto out = gru_step(tape, nodes, tape.constant(state), tape.constant(input));
  return tape.value(out);
}

}  // namespace dwnet

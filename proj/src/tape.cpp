#include "dwnet/tape.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>

#include "dwnet/error.hpp"
#include "dwnet/rng.hpp"

namespace dwnet {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const EMat> cmap(const Tensor& t) {
  return Eigen::Map<const EMat>(t.data.data(), t.rows, t.cols);
}

Eigen::Map<EMat> mmap(Tensor& t) {
  return Eigen::Map<EMat>(t.data.data(), t.rows, t.cols);
}

}  // namespace

Tape::NodeId Tape::push(Tensor value, bool requires_grad,
                        std::function<void(Tape&)> backprop) {
#ifndef NDEBUG
  if (!value.all_finite()) {
    raise(ErrorKind::NonFinite, "tape node produced a non-finite value");
  }
#endif
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  if (requires_grad) node.backprop = std::move(backprop);
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

Tape::NodeId Tape::leaf(Tensor value, bool requires_grad) {
  return push(std::move(value), requires_grad, {});
}

Tensor Tape::grad(NodeId id) const {
  const Node& n = nodes_[static_cast<size_t>(id)];
  if (n.grad_live) return n.grad;
  return Tensor::zeros(n.value.rows, n.value.cols);
}

Tensor& Tape::grad_ref(NodeId id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (!n.grad_live) {
    n.grad = Tensor::zeros(n.value.rows, n.value.cols);
    n.grad_live = true;
  }
  return n.grad;
}

void Tape::backward(NodeId loss) {
  if (loss < 0 || loss >= static_cast<NodeId>(nodes_.size())) {
    raise(ErrorKind::NonScalarLoss, "loss node id out of range");
  }
  const Tensor& loss_value = nodes_[static_cast<size_t>(loss)].value;
  if (loss_value.rows != 1 || loss_value.cols != 1) {
    raise(ErrorKind::NonScalarLoss,
          "loss must be 1x1, got " + loss_value.shape_str());
  }
  grad_ref(loss).data[0] = 1.0;
  for (NodeId id = loss; id >= 0; --id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad_live && n.backprop) n.backprop(*this);
  }
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.cols != bv.rows) {
    raise(ErrorKind::ShapeMismatch,
          "matmul: " + av.shape_str() + " x " + bv.shape_str());
  }
  Tensor out(av.rows, bv.cols);
  mmap(out).noalias() = cmap(av) * cmap(bv);
  const bool rg = needs_grad(a) || needs_grad(b);
  NodeId id = push(std::move(out), rg, {});
  if (rg) {
    nodes_.back().backprop = [id, a, b](Tape& t) {
      const Tensor& g = t.nodes_[static_cast<size_t>(id)].grad;
      if (t.needs_grad(a)) {
        mmap(t.grad_ref(a)).noalias() += cmap(g) * cmap(t.value(b)).transpose();
      }
      if (t.needs_grad(b)) {
        mmap(t.grad_ref(b)).noalias() += cmap(t.value(a)).transpose() * cmap(g);
      }
    };
  }
  return id;
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  check_same_shape(av, bv, "add");
  Tensor out(av.rows, av.cols);
  for (size_t i = 0; i < out.size(); ++i) out.data[i] = av.data[i] + bv.data[i];
  const bool rg = needs_grad(a) || needs_grad(b);
  NodeId id = push(std::move(out), rg, {});
  if (rg) {
    nodes_.back().backprop = [id, a, b](Tape& t) {
      const Tensor& g = t.nodes_[static_cast<size_t>(id)].grad;
      if (t.needs_grad(a)) {
        Tensor& ga = t.grad_ref(a);
        for (size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
      }
      if (t.needs_grad(b)) {
        Tensor& gb = t.grad_ref(b);
        for (size_t i = 0; i < g.size(); ++i) gb.data[i] += g.data[i];
      }
    };
  }
  return id;
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  check_same_shape(av, bv, "sub");
  Tensor out(av.rows, av.cols);
  for (size_t i = 0; i < out.size(); ++i) out.data[i] = av.data[i] - bv.data[i];
  const bool rg = needs_grad(a) || needs_grad(b);
  NodeId id = push(std::move(out), rg, {});
  if (rg) {
    nodes_.back().backprop = [id, a, b](Tape& t) {
      const Tensor& g = t.nodes_[static_cast<size_t>(id)].grad;
      if (t.needs_grad(a)) {
        Tensor& ga = t.grad_ref(a);
        for (size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
      }
      if (t.needs_grad(b)) {
        Tensor& gb = t.grad_ref(b);
        for (size_t i = 0; i < g.size(); ++i) gb.data[i] -= g.data[i];
      }
    };
  }
  return id;
}

Tape::NodeId Tape::hadamard(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  check_same_shape(av, bv, "hadamard");
  Tensor out(av.rows, av.cols);
  for (size_t i = 0; i < out.size(); ++i) out.data[i] = av.data[i] * bv.data[i];
  const bool rg = needs_grad(a) || needs_grad(b);
  NodeId id = push(std::move(out), rg, {});
  if (rg) {
    nodes_.back().backprop = [id, a, b](Tape& t) {
      const Tensor& g = t.nodes_[static_cast<size_t>(id)].grad;
      if (t.needs_grad(a)) {
        Tensor& ga = t.grad_ref(a);
        const Tensor& bv2 = t.value(b);
        for (size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * bv2.data[i];
      }
      if (t.needs_grad(b)) {
        Tensor& gb = t.grad_ref(b);
        const Tensor& av2 = t.value(a);
        for (size_t i = 0; i < g.size(); ++i) gb.data[i] += g.data[i] * av2.data[i];
      }
    };
  }
  return id;
}

Tape::NodeId Tape::add_bias(NodeId a, NodeId bias) {
  const Tensor& av = value(a);
  const Tensor& bv = value(bias);
  if (bv.rows != 1 || bv.cols != av.cols) {
    raise(ErrorKind::ShapeMismatch,
          "add_bias: " + av.shape_str() + " + " + bv.shape_str());
  }
  Tensor out(av.rows, av.cols);
  for (int r = 0; r < av.rows; ++r) {
    for (int c = 0; c < av.cols; ++c) out.at(r, c) = av.at(r, c) + bv.at(0, c);
  }
  const bool rg = needs_grad(a) || needs_grad(bias);
  NodeId id = push(std::move(out), rg, {});
  if (rg) {
    nodes_.back().backprop = [id, a, bias](Tape& t) {
      const Tensor& g = t.nodes_[static_cast<size_t>(id)].grad;
      if (t.needs_grad(a)) {
        Tensor& ga = t.grad_ref(a);
        for (size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
      }
      if (t.needs_grad(bias)) {
        Tensor& gb = t.grad_ref(bias);
        for (int r = 0; r < g.rows; ++r) {
          for (int c = 0; c < g.cols; ++c) gb.at(0, c) += g.at(r, c);
        }
      }
    };
  }
  return id;
}

Tape::NodeId Tape::axpb(NodeId x, double alpha, double beta) {
  const Tensor& xv = value(x);
  Tensor out(xv.rows, xv.cols);
  for (size_t i = 0; i < out.size(); ++i) out.data[i] = alpha * xv.data[i] + beta;
  const bool rg = needs_grad(x);
  NodeId id = push(std::move(out), rg, {});
  if (rg) {
    nodes_.back().backprop = [id, x, alpha](Tape& t) {
      const Tensor& g = t.nodes_[static_cast<size_t>(id)].grad;
      Tensor& gx = t.grad_ref(x);
      for (size_t i = 0; i < g.size(); ++i) gx.data[i] += alpha * g.data[i];
    };
  }
  return id;
}

Tape::NodeId Tape::axpby(double alpha, NodeId x, double beta, NodeId y) {
  const Tensor& xv = value(x);
  const Tensor& yv = value(y);
  check_same_shape(xv, yv, "axpby");
  Tensor out(xv.rows, xv.cols);
  for (size_t i = 0; i < out.size(); ++i) {
    out.data[i] = alpha * xv.data[i] + beta * yv.data[i];
  }
  const bool rg = needs_grad(x) || needs_grad(y);
  NodeId id = push(std::move(out), rg, {});
  if (rg) {
    nodes_.back().backprop = [id, x, y, alpha, beta](Tape& t) {
      const Tensor& g = t.nodes_[static_cast<size_t>(id)].grad;
      if (t.needs_grad(x)) {
        Tensor& gx = t.grad_ref(x);
        for (size_t i = 0; i < g.size(); ++i) gx.data[i] += alpha * g.data[i];
      }
      if (t.needs_grad(y)) {
        Tensor& gy = t.grad_ref(y);
        for (size_t i = 0; i < g.size(); ++i) gy.data[i] += beta * g.data[i];
      }
    };
  }
  return id;
}

Tape::NodeId Tape::sigmoid(NodeId x) {
  const Tensor& xv = value(x);
  Tensor out(xv.rows, xv.cols);
  for (size_t i = 0; i < out.size(); ++i) {
    const double v = xv.data[i];
    // Split by sign to avoid overflow in exp.
    out.data[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                           : std::exp(v) / (1.0 + std::exp(v));
  }
  const bool rg = needs_grad(x);
  NodeId id = push(std::move(out), rg, {});
  if (rg) {
    nodes_.back().backprop = [id, x](Tape& t) {
      const Node& n = t.nodes_[static_cast<size_t>(id)];
      Tensor& gx = t.grad_ref(x);
      for (size_t i = 0; i < n.grad.size(); ++i) {
        const double s = n.value.data[i];
        gx.data[i] += n.grad.data[i] * s * (1.0 - s);
      }
    };
  }
  return id;
}

Tape::NodeId Tape::tanh(NodeId x) {
  const Tensor& xv = value(x);
  Tensor out(xv.rows, xv.cols);
  for (size_t i = 0; i < out.size(); ++i) out.data[i] = std::tanh(xv.data[i]);
  const bool rg = needs_grad(x);
  NodeId id = push(std::move(out), rg, {});
  if (rg) {
    nodes_.back().backprop = [id, x](Tape& t) {
      const Node& n = t.nodes_[static_cast<size_t>(id)];
      Tensor& gx = t.grad_ref(x);
      for (size_t i = 0; i < n.grad.size(); ++i) {
        const double v = n.value.data[i];
        gx.data[i] += n.grad.data[i] * (1.0 - v * v);
      }
    };
  }
  return id;
}

Tape::NodeId Tape::selu(NodeId x) {
  const Tensor& xv = value(x);
  Tensor out(xv.rows, xv.cols);
  for (size_t i = 0; i < out.size(); ++i) {
    const double v = xv.data[i];
    out.data[i] = v > 0.0 ? kSeluScale * v
                          : kSeluScale * kSeluAlpha * std::expm1(v);
  }
  const bool rg = needs_grad(x);
  NodeId id = push(std::move(out), rg, {});
  if (rg) {
    nodes_.back().backprop = [id, x](Tape& t) {
      const Node& n = t.nodes_[static_cast<size_t>(id)];
      const Tensor& xv2 = t.value(x);
      Tensor& gx = t.grad_ref(x);
      for (size_t i = 0; i < n.grad.size(); ++i) {
        // For x <= 0 the slope is scale*alpha*e^x = value + scale*alpha.
        const double d = xv2.data[i] > 0.0
                             ? kSeluScale
                             : n.value.data[i] + kSeluScale * kSeluAlpha;
        gx.data[i] += n.grad.data[i] * d;
      }
    };
  }
  return id;
}

Tape::NodeId Tape::concat_cols(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.rows != bv.rows) {
    raise(ErrorKind::ShapeMismatch,
          "concat_cols: " + av.shape_str() + " | " + bv.shape_str());
  }
  Tensor out(av.rows, av.cols + bv.cols);
  for (int r = 0; r < av.rows; ++r) {
    for (int c = 0; c < av.cols; ++c) out.at(r, c) = av.at(r, c);
    for (int c = 0; c < bv.cols; ++c) out.at(r, av.cols + c) = bv.at(r, c);
  }
  const bool rg = needs_grad(a) || needs_grad(b);
  NodeId id = push(std::move(out), rg, {});
  if (rg) {
    nodes_.back().backprop = [id, a, b](Tape& t) {
      const Tensor& g = t.nodes_[static_cast<size_t>(id)].grad;
      const int a_cols = t.value(a).cols;
      const int b_cols = t.value(b).cols;
      if (t.needs_grad(a)) {
        Tensor& ga = t.grad_ref(a);
        for (int r = 0; r < g.rows; ++r) {
          for (int c = 0; c < a_cols; ++c) ga.at(r, c) += g.at(r, c);
        }
      }
      if (t.needs_grad(b)) {
        Tensor& gb = t.grad_ref(b);
        for (int r = 0; r < g.rows; ++r) {
          for (int c = 0; c < b_cols; ++c) gb.at(r, c) += g.at(r, a_cols + c);
        }
      }
    };
  }
  return id;
}

Tape::NodeId Tape::concat_rows(const std::vector<NodeId>& blocks) {
  if (blocks.empty()) {
    raise(ErrorKind::EmptyInput, "concat_rows of an empty block list");
  }
  const int cols = value(blocks[0]).cols;
  int rows = 0;
  for (NodeId b : blocks) {
    const Tensor& bv = value(b);
    if (bv.cols != cols) {
      raise(ErrorKind::ShapeMismatch, "concat_rows: mixed column counts");
    }
    rows += bv.rows;
  }
  Tensor out(rows, cols);
  int offset = 0;
  bool rg = false;
  for (NodeId b : blocks) {
    const Tensor& bv = value(b);
    std::copy(bv.data.begin(), bv.data.end(),
              out.data.begin() + static_cast<size_t>(offset) * cols);
    offset += bv.rows;
    rg = rg || needs_grad(b);
  }
  NodeId id = push(std::move(out), rg, {});
  if (rg) {
    std::vector<NodeId> parents = blocks;
    nodes_.back().backprop = [id, parents](Tape& t) {
      const Tensor& g = t.nodes_[static_cast<size_t>(id)].grad;
      int row = 0;
      for (NodeId b : parents) {
        const int nb = t.value(b).rows;
        if (t.needs_grad(b)) {
          Tensor& gb = t.grad_ref(b);
          for (size_t i = 0; i < gb.size(); ++i) {
            gb.data[i] += g.data[static_cast<size_t>(row) * g.cols + i];
          }
        }
        row += nb;
      }
    };
  }
  return id;
}

Tape::NodeId Tape::gather_rows(NodeId x, std::vector<int> index) {
  const Tensor& xv = value(x);
  for (int r : index) {
    if (r < 0 || r >= xv.rows) {
      raise(ErrorKind::SizeMismatch,
            "gather_rows: row " + std::to_string(r) + " out of [0, " +
                std::to_string(xv.rows) + ")");
    }
  }
  Tensor out(static_cast<int>(index.size()), xv.cols);
  for (size_t i = 0; i < index.size(); ++i) {
    const int r = index[i];
    std::copy(xv.data.begin() + static_cast<size_t>(r) * xv.cols,
              xv.data.begin() + static_cast<size_t>(r + 1) * xv.cols,
              out.data.begin() + i * static_cast<size_t>(xv.cols));
  }
  const bool rg = needs_grad(x);
  NodeId id = push(std::move(out), rg, {});
  if (rg) {
    auto idx = std::make_shared<std::vector<int>>(std::move(index));
    nodes_.back().backprop = [id, x, idx](Tape& t) {
      const Tensor& g = t.nodes_[static_cast<size_t>(id)].grad;
      Tensor& gx = t.grad_ref(x);
      for (size_t i = 0; i < idx->size(); ++i) {
        const size_t dst = static_cast<size_t>((*idx)[i]) * gx.cols;
        const size_t src = i * static_cast<size_t>(g.cols);
        for (int c = 0; c < g.cols; ++c) gx.data[dst + c] += g.data[src + c];
      }
    };
  }
  return id;
}

Tape::NodeId Tape::sum_rows_by_group(NodeId x, std::vector<int> group, int n_groups) {
  const Tensor& xv = value(x);
  if (static_cast<int>(group.size()) != xv.rows) {
    raise(ErrorKind::SizeMismatch, "sum_rows_by_group: group ids per row");
  }
  for (int gid : group) {
    if (gid < 0 || gid >= n_groups) {
      raise(ErrorKind::SizeMismatch, "sum_rows_by_group: group id " +
                                         std::to_string(gid) + " out of [0, " +
                                         std::to_string(n_groups) + ")");
    }
  }
  Tensor out(n_groups, xv.cols);
  for (size_t i = 0; i < group.size(); ++i) {
    const size_t dst = static_cast<size_t>(group[i]) * xv.cols;
    const size_t src = i * static_cast<size_t>(xv.cols);
    for (int c = 0; c < xv.cols; ++c) out.data[dst + c] += xv.data[src + c];
  }
  const bool rg = needs_grad(x);
  NodeId id = push(std::move(out), rg, {});
  if (rg) {
    auto ids = std::make_shared<std::vector<int>>(std::move(group));
    nodes_.back().backprop = [id, x, ids](Tape& t) {
      const Tensor& g = t.nodes_[static_cast<size_t>(id)].grad;
      Tensor& gx = t.grad_ref(x);
      for (size_t i = 0; i < ids->size(); ++i) {
        const size_t src = static_cast<size_t>((*ids)[i]) * g.cols;
        const size_t dst = i * static_cast<size_t>(g.cols);
        for (int c = 0; c < g.cols; ++c) gx.data[dst + c] += g.data[src + c];
      }
    };
  }
  return id;
}

Tape::NodeId Tape::mean_rows_by_group(NodeId x, std::vector<int> group, int n_groups) {
  const Tensor& xv = value(x);
  if (static_cast<int>(group.size()) != xv.rows) {
    raise(ErrorKind::SizeMismatch, "mean_rows_by_group: group ids per row");
  }
  for (int gid : group) {
    if (gid < 0 || gid >= n_groups) {
      raise(ErrorKind::SizeMismatch, "mean_rows_by_group: group id " +
                                         std::to_string(gid) + " out of [0, " +
                                         std::to_string(n_groups) + ")");
    }
  }
  std::vector<int> counts(static_cast<size_t>(n_groups), 0);
  for (int gid : group) ++counts[static_cast<size_t>(gid)];
  Tensor out(n_groups, xv.cols);
  for (size_t i = 0; i < group.size(); ++i) {
    const size_t dst = static_cast<size_t>(group[i]) * xv.cols;
    const size_t src = i * static_cast<size_t>(xv.cols);
    for (int c = 0; c < xv.cols; ++c) out.data[dst + c] += xv.data[src + c];
  }
  for (int gid = 0; gid < n_groups; ++gid) {
    if (counts[static_cast<size_t>(gid)] == 0) continue;
    const double inv = 1.0 / counts[static_cast<size_t>(gid)];
    const size_t base = static_cast<size_t>(gid) * xv.cols;
    for (int c = 0; c < xv.cols; ++c) out.data[base + c] *= inv;
  }
  const bool rg = needs_grad(x);
  NodeId id = push(std::move(out), rg, {});
  if (rg) {
    auto ids = std::make_shared<std::vector<int>>(std::move(group));
    auto cnt = std::make_shared<std::vector<int>>(std::move(counts));
    nodes_.back().backprop = [id, x, ids, cnt](Tape& t) {
      const Tensor& g = t.nodes_[static_cast<size_t>(id)].grad;
      Tensor& gx = t.grad_ref(x);
      for (size_t i = 0; i < ids->size(); ++i) {
        const int gid = (*ids)[i];
        const double inv = 1.0 / (*cnt)[static_cast<size_t>(gid)];
        const size_t src = static_cast<size_t>(gid) * g.cols;
        const size_t dst = i * static_cast<size_t>(g.cols);
        for (int c = 0; c < g.cols; ++c) gx.data[dst + c] += inv * g.data[src + c];
      }
    };
  }
  return id;
}

Tape::NodeId Tape::dropout(NodeId x, double p, bool train, Rng& rng) {
  if (p < 0.0 || p >= 1.0) {
    raise(ErrorKind::InvalidConfig, "dropout rate must be in [0, 1)");
  }
  if (!train || p == 0.0) return x;
  const Tensor& xv = value(x);
  auto mask = std::make_shared<std::vector<double>>(xv.size(), 0.0);
  const double scale = 1.0 / (1.0 - p);
  for (size_t i = 0; i < xv.size(); ++i) {
    if (rng.uniform() >= p) (*mask)[i] = scale;
  }
  Tensor out(xv.rows, xv.cols);
  for (size_t i = 0; i < out.size(); ++i) out.data[i] = xv.data[i] * (*mask)[i];
  const bool rg = needs_grad(x);
  NodeId id = push(std::move(out), rg, {});
  if (rg) {
    nodes_.back().backprop = [id, x, mask](Tape& t) {
      const Tensor& g = t.nodes_[static_cast<size_t>(id)].grad;
      Tensor& gx = t.grad_ref(x);
      for (size_t i = 0; i < g.size(); ++i) gx.data[i] += g.data[i] * (*mask)[i];
    };
  }
  return id;
}

Tape::NodeId Tape::sum_all(NodeId x) {
  const Tensor& xv = value(x);
  double s = 0.0;
  for (double v : xv.data) s += v;
  const bool rg = needs_grad(x);
  NodeId id = push(Tensor::scalar(s), rg, {});
  if (rg) {
    nodes_.back().backprop = [id, x](Tape& t) {
      const double g = t.nodes_[static_cast<size_t>(id)].grad.data[0];
      Tensor& gx = t.grad_ref(x);
      for (size_t i = 0; i < gx.size(); ++i) gx.data[i] += g;
    };
  }
  return id;
}

Tape::NodeId Tape::mean_all(NodeId x) {
  const Tensor& xv = value(x);
  if (xv.size() == 0) raise(ErrorKind::EmptyInput, "mean_all of an empty tensor");
  double s = 0.0;
  for (double v : xv.data) s += v;
  const double inv = 1.0 / static_cast<double>(xv.size());
  const bool rg = needs_grad(x);
  NodeId id = push(Tensor::scalar(s * inv), rg, {});
  if (rg) {
    nodes_.back().backprop = [id, x, inv](Tape& t) {
      const double g = t.nodes_[static_cast<size_t>(id)].grad.data[0] * inv;
      Tensor& gx = t.grad_ref(x);
      for (size_t i = 0; i < gx.size(); ++i) gx.data[i] += g;
    };
  }
  return id;
}

Tape::NodeId Tape::sum_squares(NodeId x) {
  const Tensor& xv = value(x);
  double s = 0.0;
  for (double v : xv.data) s += v * v;
  const bool rg = needs_grad(x);
  NodeId id = push(Tensor::scalar(s), rg, {});
  if (rg) {
    nodes_.back().backprop = [id, x](Tape& t) {
      const double g = t.nodes_[static_cast<size_t>(id)].grad.data[0];
      const Tensor& xv2 = t.value(x);
      Tensor& gx = t.grad_ref(x);
      for (size_t i = 0; i < gx.size(); ++i) gx.data[i] += 2.0 * g * xv2.data[i];
    };
  }
  return id;
}

Tape::NodeId Tape::sqrt_scalar(NodeId x) {
  const Tensor& xv = value(x);
  if (xv.rows != 1 || xv.cols != 1) {
    raise(ErrorKind::ShapeMismatch, "sqrt_scalar expects 1x1, got " + xv.shape_str());
  }
  const double root = std::sqrt(xv.data[0]);
  const bool rg = needs_grad(x);
  NodeId id = push(Tensor::scalar(root), rg, {});
  if (rg) {
    nodes_.back().backprop = [id, x, root](Tape& t) {
      const double g = t.nodes_[static_cast<size_t>(id)].grad.data[0];
      // Guard the derivative blowup at exactly zero.
      t.grad_ref(x).data[0] += g * 0.5 / std::max(root, 1e-150);
    };
  }
  return id;
}

Tape::NodeId Tape::mse_reduce(NodeId a, NodeId b) {
  return mean_all(hadamard(sub(a, b), sub(a, b)));
}

void AdamState::init_like(const std::vector<Tensor*>& params) {
  step = 0;
  m.clear();
  v.clear();
  for (const Tensor* p : params) {
    m.push_back(Tensor::zeros(p->rows, p->cols));
    v.push_back(Tensor::zeros(p->rows, p->cols));
  }
}

void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
               AdamState& state, const AdamConfig& config) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    raise(ErrorKind::ShapeMismatch, "adam_step: params/grads/state size mismatch");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = grads[i];
    check_same_shape(p, g, "adam_step");
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    for (size_t k = 0; k < p.size(); ++k) {
      m.data[k] = config.beta1 * m.data[k] + (1.0 - config.beta1) * g.data[k];
      v.data[k] = config.beta2 * v.data[k] + (1.0 - config.beta2) * g.data[k] * g.data[k];
      const double m_hat = m.data[k] / bc1;
      const double v_hat = v.data[k] / bc2;
      p.data[k] -= config.lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

double gradient_check(const std::function<double()>& loss_fn,
                      const std::function<std::vector<Tensor>()>& grad_fn,
                      const std::vector<Tensor*>& params,
                      const GradCheckOptions& options) {
  if (!(options.eps > 0.0)) {
    raise(ErrorKind::DegenerateEpsilon, "finite-difference step must be positive");
  }
  const std::vector<Tensor> grads = grad_fn();
  if (grads.size() != params.size()) {
    raise(ErrorKind::SizeMismatch, "gradient_check: grads vs params");
  }
  Rng rng(options.seed);
  double worst = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = *params[pi];
    const Tensor& g = grads[pi];
    check_same_shape(p, g, "gradient_check");
    const size_t n = p.size();
    if (n == 0) continue;

    std::vector<size_t> coords;
    if (options.coords_per_tensor <= 0 ||
        n <= static_cast<size_t>(options.coords_per_tensor)) {
      coords.resize(n);
      for (size_t k = 0; k < n; ++k) coords[k] = k;
    } else {
      coords.push_back(0);
      coords.push_back(n - 1);
      for (int k = 2; k < options.coords_per_tensor; ++k) {
        coords.push_back(static_cast<size_t>(rng.uniform_int(static_cast<int>(n))));
      }
    }

    for (size_t k : coords) {
      const double saved = p.data[k];
      p.data[k] = saved + options.eps;
      const double up = loss_fn();
      p.data[k] = saved - options.eps;
      const double down = loss_fn();
      p.data[k] = saved;
      const double fd = (up - down) / (2.0 * options.eps);
      const double ad = g.data[k];
      const double denom = std::max({std::fabs(ad), std::fabs(fd), 1e-8});
      worst = std::max(worst, std::fabs(ad - fd) / denom);
    }
  }
  return worst;
}

}  // namespace dwnet

#include "dwnet/model.hpp"

#include <algorithm>
#include <cmath>

#include "dwnet/error.hpp"
#include "dwnet/rng.hpp"

namespace dwnet {

const char* target_name(Target t) {
  return t == Target::Delay ? "delay" : "jitter";
}

Target target_from_name(const std::string& name) {
  if (name == "delay") return Target::Delay;
  if (name == "jitter") return Target::Jitter;
  raise(ErrorKind::InvalidConfig, "unknown target '" + name + "'");
}

void ModelConfig::validate() const {
  if (state_dim < 1) raise(ErrorKind::InvalidConfig, "state_dim must be >= 1");
  if (rounds < 0) raise(ErrorKind::InvalidConfig, "rounds must be >= 0");
  if (lambda < 0.0 || lambda > 1.0)
    raise(ErrorKind::InvalidConfig, "lambda must lie in [0, 1]");
  if (readout_hidden < 1)
    raise(ErrorKind::InvalidConfig, "readout_hidden must be >= 1");
  if (dropout_p < 0.0 || dropout_p >= 1.0)
    raise(ErrorKind::InvalidConfig, "dropout_p must lie in [0, 1)");
  if (per_round_weights && rounds == 0)
    raise(ErrorKind::InvalidConfig, "per_round_weights requires rounds >= 1");
}

ModelParams ModelParams::init(const ModelConfig& config, uint64_t seed) {
  config.validate();
  Rng rng(seed);
  ModelParams p;
  const int sets = config.cell_sets();
  for (int i = 0; i < sets; ++i) p.path_cells.push_back(GruCellParams::init(config.state_dim, rng));
  for (int i = 0; i < sets; ++i) p.secondary_cells.push_back(GruCellParams::init(config.state_dim, rng));
  for (int i = 0; i < sets; ++i) p.link_cells.push_back(GruCellParams::init(config.state_dim, rng));
  p.readout_hidden = DenseParams::init(config.readout_input_dim(), config.readout_hidden,
                                       Activation::Selu, rng);
  p.readout_out = DenseParams::init(config.readout_hidden, 1, Activation::Linear, rng);
  return p;
}

namespace {

template <typename Params, typename Pair>
void collect_named(Params& p, std::vector<Pair>& out) {
  auto cell = [&out](const std::string& prefix, auto& c) {
    out.emplace_back(prefix + ".W_z", &c.W_z);
    out.emplace_back(prefix + ".W_r", &c.W_r);
    out.emplace_back(prefix + ".W_h", &c.W_h);
    out.emplace_back(prefix + ".U_z", &c.U_z);
    out.emplace_back(prefix + ".U_r", &c.U_r);
    out.emplace_back(prefix + ".U_h", &c.U_h);
    out.emplace_back(prefix + ".b_z", &c.b_z);
    out.emplace_back(prefix + ".b_r", &c.b_r);
    out.emplace_back(prefix + ".b_h", &c.b_h);
  };
  for (size_t i = 0; i < p.path_cells.size(); ++i)
    cell("path_cell." + std::to_string(i), p.path_cells[i]);
  for (size_t i = 0; i < p.secondary_cells.size(); ++i)
    cell("secondary_cell." + std::to_string(i), p.secondary_cells[i]);
  for (size_t i = 0; i < p.link_cells.size(); ++i)
    cell("link_cell." + std::to_string(i), p.link_cells[i]);
  out.emplace_back("readout_hidden.weight", &p.readout_hidden.weight);
  out.emplace_back("readout_hidden.bias", &p.readout_hidden.bias);
  out.emplace_back("readout_out.weight", &p.readout_out.weight);
  out.emplace_back("readout_out.bias", &p.readout_out.bias);
}

}  // namespace

std::vector<std::pair<std::string, Tensor*>> ModelParams::named_tensors() {
  std::vector<std::pair<std::string, Tensor*>> out;
  collect_named(*this, out);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::named_tensors() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  collect_named(*this, out);
  return out;
}

void check_params(const ModelParams& params, const ModelConfig& config) {
  config.validate();
  const size_t sets = static_cast<size_t>(config.cell_sets());
  if (params.path_cells.size() != sets || params.secondary_cells.size() != sets ||
      params.link_cells.size() != sets)
    raise(ErrorKind::ConfigMismatch, "cell count does not match rounds/per_round_weights");
  auto check_cell = [&](const GruCellParams& c, const std::string& what) {
    c.check_shapes(config.state_dim, what);
  };
  for (size_t i = 0; i < sets; ++i) {
    check_cell(params.path_cells[i], "path_cell." + std::to_string(i));
    check_cell(params.secondary_cells[i], "secondary_cell." + std::to_string(i));
    check_cell(params.link_cells[i], "link_cell." + std::to_string(i));
  }
  const Tensor& w1 = params.readout_hidden.weight;
  if (w1.rows != config.readout_input_dim() || w1.cols != config.readout_hidden)
    raise(ErrorKind::ConfigMismatch, "readout_hidden weight is " + w1.shape_str() +
                                         ", config expects " +
                                         std::to_string(config.readout_input_dim()) + "x" +
                                         std::to_string(config.readout_hidden));
  const Tensor& w2 = params.readout_out.weight;
  if (w2.rows != config.readout_hidden || w2.cols != 1)
    raise(ErrorKind::ConfigMismatch, "readout_out weight is " + w2.shape_str() +
                                         ", config expects " +
                                         std::to_string(config.readout_hidden) + "x1");
  if (params.readout_hidden.activation != Activation::Selu ||
      params.readout_out.activation != Activation::Linear)
    raise(ErrorKind::ConfigMismatch, "readout activations must be selu then linear");
}

StateSet init_states(const HeteroGraph& graph, const std::vector<double>& x_p,
                     const std::vector<double>& x_l, const ModelConfig& config) {
  if (static_cast<int>(x_p.size()) != graph.n_paths)
    raise(ErrorKind::SizeMismatch, "expected " + std::to_string(graph.n_paths) +
                                       " path features, got " + std::to_string(x_p.size()));
  if (static_cast<int>(x_l.size()) != graph.n_links)
    raise(ErrorKind::SizeMismatch, "expected " + std::to_string(graph.n_links) +
                                       " link features, got " + std::to_string(x_l.size()));
  StateSet s;
  s.h_l = Tensor::zeros(graph.n_links, config.state_dim);
  s.h_p = Tensor::zeros(graph.n_paths, config.state_dim);
  for (int l = 0; l < graph.n_links; ++l) s.h_l.at(l, 0) = x_l[l];
  for (int p = 0; p < graph.n_paths; ++p) s.h_p.at(p, 0) = x_p[p];
  s.hs_p = s.h_p;
  return s;
}

namespace {

/// Position-major layout for running every path's walk in lockstep. Block i
/// of the message matrix holds, in ascending path id, one row per path whose
/// walk is longer than i.
struct MessagePlan {
  int max_len = 0;
  std::vector<std::vector<int>> step_paths;  // per position: active path ids
  std::vector<std::vector<int>> step_links;  // per position: link consumed
  /// For position i > 0: row index of each active path within block i-1.
  std::vector<std::vector<int>> carry;
  std::vector<int> inc_path;   // per message row: path id
  std::vector<int> inc_link;   // per message row: link id
  std::vector<int> final_row;  // per path: message row of its last position
  std::vector<int> nbr_src;    // per neighbor pair: contributing path
  std::vector<int> nbr_dst;    // per neighbor pair: receiving path
};

MessagePlan make_plan(const HeteroGraph& graph) {
  MessagePlan plan;
  for (const auto& links : graph.path_links)
    plan.max_len = std::max(plan.max_len, static_cast<int>(links.size()));
  plan.step_paths.resize(plan.max_len);
  plan.step_links.resize(plan.max_len);
  plan.carry.resize(plan.max_len);
  plan.final_row.assign(graph.n_paths, -1);
  int offset = 0;
  for (int i = 0; i < plan.max_len; ++i) {
    for (int p = 0; p < graph.n_paths; ++p) {
      const auto& links = graph.path_links[p];
      if (static_cast<int>(links.size()) <= i) continue;
      const int row_in_block = static_cast<int>(plan.step_paths[i].size());
      plan.step_paths[i].push_back(p);
      plan.step_links[i].push_back(links[i]);
      plan.inc_path.push_back(p);
      plan.inc_link.push_back(links[i]);
      if (static_cast<int>(links.size()) == i + 1)
        plan.final_row[p] = offset + row_in_block;
    }
    if (i > 0) {
      // Paths active at i form a subsequence of those active at i-1; both
      // lists ascend by path id, so one joint sweep recovers the carry rows.
      plan.carry[i].reserve(plan.step_paths[i].size());
      size_t prev = 0;
      for (int p : plan.step_paths[i]) {
        while (plan.step_paths[i - 1][prev] != p) ++prev;
        plan.carry[i].push_back(static_cast<int>(prev));
        ++prev;
      }
    }
    offset += static_cast<int>(plan.step_paths[i].size());
  }
  for (int p = 0; p < graph.n_paths; ++p)
    for (int k : graph.path_neighbors[p]) {
      plan.nbr_src.push_back(k);
      plan.nbr_dst.push_back(p);
    }
  return plan;
}

template <typename Cell>
const Cell& cell_for_round(const std::vector<Cell>& cells, int round) {
  return cells.size() == 1 ? cells[0] : cells[static_cast<size_t>(round)];
}

}  // namespace

ForwardBuild build_forward(Tape& tape, const HeteroGraph& graph,
                           const std::vector<double>& x_p,
                           const std::vector<double>& x_l,
                           const ModelParams& params, const ModelConfig& config,
                           RunMode mode, uint64_t seed, ForwardTrace* trace) {
  check_params(params, config);
  if (graph.n_paths == 0) raise(ErrorKind::EmptyInput, "graph has no paths");
  const StateSet init = init_states(graph, x_p, x_l, config);
  const MessagePlan plan = make_plan(graph);

  ForwardBuild build;
  std::vector<GruCellNodes> path_cells, secondary_cells, link_cells;
  const int sets = config.cell_sets();
  for (int i = 0; i < sets; ++i) path_cells.push_back(bind(tape, params.path_cells[i]));
  for (int i = 0; i < sets; ++i) secondary_cells.push_back(bind(tape, params.secondary_cells[i]));
  for (int i = 0; i < sets; ++i) link_cells.push_back(bind(tape, params.link_cells[i]));
  DenseNodes readout_hidden = bind(tape, params.readout_hidden);
  DenseNodes readout_out = bind(tape, params.readout_out);

  // param_nodes mirrors the collect_named enumeration order exactly.
  auto push_cell = [&build](const GruCellNodes& c) {
    for (Tape::NodeId id : {c.W_z, c.W_r, c.W_h, c.U_z, c.U_r, c.U_h, c.b_z, c.b_r, c.b_h})
      build.param_nodes.push_back(id);
  };
  for (const auto& c : path_cells) push_cell(c);
  for (const auto& c : secondary_cells) push_cell(c);
  for (const auto& c : link_cells) push_cell(c);
  build.param_nodes.push_back(readout_hidden.weight);
  build.param_nodes.push_back(readout_hidden.bias);
  build.param_nodes.push_back(readout_out.weight);
  build.param_nodes.push_back(readout_out.bias);

  auto push_cell_weights = [&build](const GruCellNodes& c) {
    for (Tape::NodeId id : {c.W_z, c.W_r, c.W_h, c.U_z, c.U_r, c.U_h})
      build.weight_matrix_nodes.push_back(id);
  };
  for (const auto& c : path_cells) push_cell_weights(c);
  if (config.secondary_enabled)
    for (const auto& c : secondary_cells) push_cell_weights(c);
  for (const auto& c : link_cells) push_cell_weights(c);
  build.weight_matrix_nodes.push_back(readout_hidden.weight);
  build.weight_matrix_nodes.push_back(readout_out.weight);

  Tape::NodeId H_p = tape.constant(init.h_p);
  Tape::NodeId H_l = tape.constant(init.h_l);
  Tape::NodeId Hs = tape.constant(init.hs_p);

  if (trace) {
    *trace = ForwardTrace{};
    trace->states.push_back(init);
    for (size_t r = 0; r < plan.inc_path.size(); ++r)
      trace->message_index.emplace_back(plan.inc_path[r], plan.inc_link[r]);
  }

  Rng dropout_rng(seed);
  for (int t = 0; t < config.rounds; ++t) {
    const GruCellNodes& path_cell = cell_for_round(path_cells, t);
    const GruCellNodes& link_cell = cell_for_round(link_cells, t);

    // Phase 1: every path consumes its links in walk order; the hidden state
    // after each link is that path's message to the link.
    std::vector<Tape::NodeId> blocks;
    blocks.reserve(static_cast<size_t>(plan.max_len));
    for (int i = 0; i < plan.max_len; ++i) {
      Tape::NodeId h_cur = (i == 0) ? tape.gather_rows(H_p, plan.step_paths[0])
                                    : tape.gather_rows(blocks.back(), plan.carry[i]);
      Tape::NodeId x = tape.gather_rows(H_l, plan.step_links[i]);
      Tape::NodeId h_new = config.path_cell == PathCellKind::Gru
                               ? gru_step(tape, path_cell, h_cur, x)
                               : tanh_cell_step(tape, path_cell, h_cur, x);
      blocks.push_back(h_new);
    }
    Tape::NodeId M = tape.concat_rows(blocks);
    Tape::NodeId H_p_next = tape.gather_rows(M, plan.final_row);

    // Phase 2: secondary states absorb the mean of neighboring paths' fresh
    // primary states; then per-message fusion (1-lambda) m + lambda m'.
    Tape::NodeId fused = M;
    if (config.secondary_enabled) {
      const GruCellNodes& secondary_cell = cell_for_round(secondary_cells, t);
      Tape::NodeId nbr_vals = tape.gather_rows(H_p_next, plan.nbr_src);
      Tape::NodeId nbr_mean = tape.mean_rows_by_group(nbr_vals, plan.nbr_dst, graph.n_paths);
      Hs = gru_step(tape, secondary_cell, Hs, nbr_mean);
      Tape::NodeId Mp = tape.gather_rows(Hs, plan.inc_path);
      fused = tape.axpby(1.0 - config.lambda, M, config.lambda, Mp);
    }

    // Phase 3: each link absorbs the sum of fused messages from its paths.
    Tape::NodeId link_agg = tape.sum_rows_by_group(fused, plan.inc_link, graph.n_links);
    H_l = gru_step(tape, link_cell, H_l, link_agg);
    H_p = H_p_next;

    if (trace) {
      trace->states.push_back(StateSet{tape.value(H_l), tape.value(H_p), tape.value(Hs)});
      trace->messages.push_back(tape.value(M));
      trace->fused.push_back(tape.value(fused));
      trace->link_inputs.push_back(tape.value(link_agg));
    }
  }

  Tape::NodeId readout_in = config.secondary_enabled ? tape.concat_cols(H_p, Hs) : H_p;
  Tape::NodeId hidden = dense_apply(tape, readout_hidden, readout_in);
  hidden = tape.dropout(hidden, config.dropout_p, mode == RunMode::Train, dropout_rng);
  build.predictions = dense_apply(tape, readout_out, hidden);
  return build;
}

StateSet message_passing_round(const HeteroGraph& graph, const StateSet& states,
                               const ModelParams& params, const ModelConfig& config,
                               int round) {
  check_params(params, config);
  if (round < 0 || round >= std::max(config.rounds, 1))
    raise(ErrorKind::InvalidConfig, "round " + std::to_string(round) + " out of range");
  Tape tape;
  ModelParams slice;
  slice.path_cells.push_back(cell_for_round(params.path_cells, round));
  slice.secondary_cells.push_back(cell_for_round(params.secondary_cells, round));
  slice.link_cells.push_back(cell_for_round(params.link_cells, round));
  slice.readout_hidden = params.readout_hidden;
  slice.readout_out = params.readout_out;

  // Recover the features from the first state column; remaining columns of a
  // freshly initialized state are zero, but an arbitrary mid-run state is not
  // expressible that way, so run the round directly on the given tensors.
  const MessagePlan plan = make_plan(graph);
  std::vector<GruCellNodes> cells{bind(tape, slice.path_cells[0])};
  GruCellNodes secondary_cell = bind(tape, slice.secondary_cells[0]);
  GruCellNodes link_cell = bind(tape, slice.link_cells[0]);

  Tape::NodeId H_p = tape.constant(states.h_p);
  Tape::NodeId H_l = tape.constant(states.h_l);
  Tape::NodeId Hs = tape.constant(states.hs_p);

  std::vector<Tape::NodeId> blocks;
  for (int i = 0; i < plan.max_len; ++i) {
    Tape::NodeId h_cur = (i == 0) ? tape.gather_rows(H_p, plan.step_paths[0])
                                  : tape.gather_rows(blocks.back(), plan.carry[i]);
    Tape::NodeId x = tape.gather_rows(H_l, plan.step_links[i]);
    Tape::NodeId h_new = config.path_cell == PathCellKind::Gru
                             ? gru_step(tape, cells[0], h_cur, x)
                             : tanh_cell_step(tape, cells[0], h_cur, x);
    blocks.push_back(h_new);
  }
  Tape::NodeId M = plan.max_len > 0 ? tape.concat_rows(blocks) : tape.constant(Tensor::zeros(0, config.state_dim));
  Tape::NodeId H_p_next = tape.gather_rows(M, plan.final_row);

  Tape::NodeId fused = M;
  if (config.secondary_enabled) {
    Tape::NodeId nbr_vals = tape.gather_rows(H_p_next, plan.nbr_src);
    Tape::NodeId nbr_mean = tape.mean_rows_by_group(nbr_vals, plan.nbr_dst, graph.n_paths);
    Hs = gru_step(tape, secondary_cell, Hs, nbr_mean);
    Tape::NodeId Mp = tape.gather_rows(Hs, plan.inc_path);
    fused = tape.axpby(1.0 - config.lambda, M, config.lambda, Mp);
  }
  Tape::NodeId link_agg = tape.sum_rows_by_group(fused, plan.inc_link, graph.n_links);
  Tape::NodeId H_l_next = gru_step(tape, link_cell, H_l, link_agg);

  return StateSet{tape.value(H_l_next), tape.value(H_p_next), tape.value(Hs)};
}

std::vector<double> forward(const HeteroGraph& graph, const std::vector<double>& x_p,
                            const std::vector<double>& x_l, const ModelParams& params,
                            const ModelConfig& config, RunMode mode, uint64_t seed,
                            ForwardTrace* trace) {
  Tape tape;
  ForwardBuild build = build_forward(tape, graph, x_p, x_l, params, config, mode, seed, trace);
  const Tensor& pred = tape.value(build.predictions);
  return std::vector<double>(pred.data.begin(), pred.data.end());
}

McSummary mc_predict(const HeteroGraph& graph, const std::vector<double>& x_p,
                     const std::vector<double>& x_l, const ModelParams& params,
                     const ModelConfig& config, int n_samples, uint64_t seed) {
  if (n_samples < 1) raise(ErrorKind::InvalidConfig, "mc_predict needs n_samples >= 1");
  McSummary out;
  out.mean.assign(static_cast<size_t>(graph.n_paths), 0.0);
  std::vector<double> sq(static_cast<size_t>(graph.n_paths), 0.0);
  for (int s = 0; s < n_samples; ++s) {
    std::vector<double> pred =
        forward(graph, x_p, x_l, params, config, RunMode::Train, Rng::derive(seed, s));
    for (size_t i = 0; i < pred.size(); ++i) {
      out.mean[i] += pred[i];
      sq[i] += pred[i] * pred[i];
    }
  }
  out.stddev.resize(out.mean.size());
  for (size_t i = 0; i < out.mean.size(); ++i) {
    out.mean[i] /= n_samples;
    const double var = std::max(0.0, sq[i] / n_samples - out.mean[i] * out.mean[i]);
    out.stddev[i] = std::sqrt(var);
  }
  return out;
}

}  // namespace dwnet

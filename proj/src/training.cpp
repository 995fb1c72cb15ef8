#include "dwnet/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "dwnet/checkpoint.hpp"
#include "dwnet/error.hpp"
#include "dwnet/metrics.hpp"
#include "dwnet/rng.hpp"

namespace dwnet {

void TrainConfig::validate() const {
  if (batch_size < 1) raise(ErrorKind::InvalidConfig, "batch_size must be >= 1");
  if (!(learning_rate > 0.0)) raise(ErrorKind::InvalidConfig, "learning_rate must be > 0");
  if (l2_coeff < 0.0) raise(ErrorKind::InvalidConfig, "l2_coeff must be >= 0");
  if (max_steps < 0) raise(ErrorKind::InvalidConfig, "max_steps must be >= 0");
  if (eval_every < 1) raise(ErrorKind::InvalidConfig, "eval_every must be >= 1");
}

Normalizer Normalizer::fit(const std::vector<Sample>& train_set, Target target) {
  std::vector<double> labels;
  double max_capacity = 0.0;
  for (const Sample& s : train_set) {
    const std::vector<double>& y = target == Target::Delay ? s.labels.delay : s.labels.jitter;
    labels.insert(labels.end(), y.begin(), y.end());
    for (const Link& l : s.topology.links) max_capacity = std::max(max_capacity, l.capacity);
  }
  if (labels.empty()) raise(ErrorKind::EmptyInput, "no labels to fit the normalizer on");
  double mean = 0.0;
  for (double y : labels) mean += y;
  mean /= static_cast<double>(labels.size());
  double var = 0.0;
  for (double y : labels) var += (y - mean) * (y - mean);
  var /= static_cast<double>(labels.size());
  Normalizer n;
  n.label_mean = mean;
  n.label_std = std::sqrt(var);
  if (!(n.label_std > 0.0))
    raise(ErrorKind::ZeroVariance, "training labels are constant; cannot normalize");
  if (!(max_capacity > 0.0))
    raise(ErrorKind::EmptyInput, "no link capacities to derive the feature scale from");
  n.feature_scale = max_capacity;
  return n;
}

PreparedBatch prepare_batch(const std::vector<const Sample*>& samples,
                            const ModelConfig& config, const Normalizer& normalizer) {
  if (samples.empty()) raise(ErrorKind::EmptyBatch, "prepare_batch over zero samples");
  PreparedBatch batch;
  std::vector<HeteroGraph> graphs;
  graphs.reserve(samples.size());
  HeteroGraphOptions options;
  options.include_self_in_neighbors = config.include_self_in_neighbors;
  for (const Sample* s : samples) {
    graphs.push_back(build_hetero_graph(s->topology, s->routing, options));
    for (double d : s->traffic.demand) batch.x_p.push_back(d / normalizer.feature_scale);
    for (const Link& l : s->topology.links) batch.x_l.push_back(l.capacity / normalizer.feature_scale);
    const std::vector<double>& y =
        config.target == Target::Delay ? s->labels.delay : s->labels.jitter;
    batch.labels.insert(batch.labels.end(), y.begin(), y.end());
  }
  batch.graph = union_batch(graphs);
  return batch;
}

namespace {

bool is_weight_matrix(const std::string& name) {
  return name.find(".W_") != std::string::npos || name.find(".U_") != std::string::npos ||
         (name.size() >= 7 && name.compare(name.size() - 7, 7, ".weight") == 0);
}

}  // namespace

double loss_value(const std::vector<double>& predictions,
                  const std::vector<double>& labels_normalized,
                  const ModelParams& params, double l2_coeff) {
  if (predictions.size() != labels_normalized.size())
    raise(ErrorKind::LengthMismatch, std::to_string(predictions.size()) + " predictions vs " +
                                         std::to_string(labels_normalized.size()) + " labels");
  if (predictions.empty()) raise(ErrorKind::EmptyBatch, "loss over zero paths");
  double sq = 0.0;
  for (size_t i = 0; i < predictions.size(); ++i) {
    const double d = predictions[i] - labels_normalized[i];
    sq += d * d;
  }
  double loss = std::sqrt(sq / static_cast<double>(predictions.size()));
  if (l2_coeff != 0.0) {
    double weights_sq = 0.0;
    for (const auto& [name, tensor] : params.named_tensors())
      if (is_weight_matrix(name))
        for (double w : tensor->data) weights_sq += w * w;
    loss += l2_coeff * weights_sq;
  }
  return loss;
}

Tape::NodeId loss_node(Tape& tape, const ForwardBuild& build,
                       const std::vector<double>& labels_normalized, double l2_coeff) {
  const Tensor& pred = tape.value(build.predictions);
  if (static_cast<size_t>(pred.rows) != labels_normalized.size())
    raise(ErrorKind::LengthMismatch, std::to_string(pred.rows) + " predictions vs " +
                                         std::to_string(labels_normalized.size()) + " labels");
  if (labels_normalized.empty()) raise(ErrorKind::EmptyBatch, "loss over zero paths");
  Tensor labels = Tensor::zeros(pred.rows, 1);
  for (size_t i = 0; i < labels_normalized.size(); ++i) labels.data[i] = labels_normalized[i];
  Tape::NodeId loss = tape.sqrt_scalar(tape.mse_reduce(build.predictions, tape.constant(labels)));
  if (l2_coeff != 0.0 && !build.weight_matrix_nodes.empty()) {
    Tape::NodeId l2 = tape.sum_squares(build.weight_matrix_nodes[0]);
    for (size_t i = 1; i < build.weight_matrix_nodes.size(); ++i)
      l2 = tape.add(l2, tape.sum_squares(build.weight_matrix_nodes[i]));
    loss = tape.add(loss, tape.axpb(l2, l2_coeff, 0.0));
  }
  return loss;
}

namespace {

std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Stable seed streams so adding a consumer never shifts another's draws.
constexpr uint64_t kStreamInit = 1;
constexpr uint64_t kStreamBatch = 2;
constexpr uint64_t kStreamDropout = 3;

struct ValMetrics {
  double mae = 0.0;
  double mape = 0.0;
  double pcc = std::numeric_limits<double>::quiet_NaN();
};

ValMetrics validation_metrics(const std::vector<Sample>& val_set, const ModelParams& params,
                              const ModelConfig& config, const Normalizer& normalizer,
                              int batch_size) {
  const std::vector<double> pred = predict_dataset(val_set, params, config, normalizer, batch_size);
  std::vector<double> actual;
  for (const Sample& s : val_set) {
    const std::vector<double>& y =
        config.target == Target::Delay ? s.labels.delay : s.labels.jitter;
    actual.insert(actual.end(), y.begin(), y.end());
  }
  ValMetrics m;
  m.mae = mae(pred, actual);
  m.mape = mape(pred, actual);
  try {
    m.pcc = pcc(pred, actual);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::ZeroVariance) throw;  // constant predictions: leave NaN
  }
  return m;
}

}  // namespace

std::vector<double> predict_dataset(const std::vector<Sample>& samples,
                                    const ModelParams& params, const ModelConfig& config,
                                    const Normalizer& normalizer, int batch_size) {
  if (batch_size < 1) raise(ErrorKind::InvalidConfig, "batch_size must be >= 1");
  std::vector<double> out;
  for (size_t begin = 0; begin < samples.size(); begin += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(samples.size(), begin + static_cast<size_t>(batch_size));
    std::vector<const Sample*> chunk;
    for (size_t i = begin; i < end; ++i) chunk.push_back(&samples[i]);
    PreparedBatch batch = prepare_batch(chunk, config, normalizer);
    std::vector<double> pred =
        forward(batch.graph, batch.x_p, batch.x_l, params, config, RunMode::Eval, 0);
    for (double p : pred) out.push_back(normalizer.denormalize(p));
  }
  return out;
}

void write_history_csv(const std::vector<HistoryRow>& history, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorKind::Io, "cannot open '" + path + "' for writing");
  out << "step,train_loss,val_mae,val_mape,val_pcc\n";
  for (const HistoryRow& row : history) {
    out << row.step << ',' << fmt_g17(row.train_loss) << ',';
    if (row.has_val) {
      out << fmt_g17(row.val_mae) << ',' << fmt_g17(row.val_mape) << ',';
      if (std::isfinite(row.val_pcc)) out << fmt_g17(row.val_pcc);
    } else {
      out << ",,";
    }
    out << '\n';
  }
  out.flush();
  if (!out) raise(ErrorKind::Io, "write to '" + path + "' failed");
}

TrainResult train(const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const ModelConfig& model_config, const TrainConfig& train_config) {
  model_config.validate();
  train_config.validate();
  if (train_set.empty()) raise(ErrorKind::EmptyInput, "training set is empty");
  if (val_set.empty()) raise(ErrorKind::EmptyInput, "validation set is empty");

  TrainResult result;
  result.normalizer = Normalizer::fit(train_set, model_config.target);
  result.params = ModelParams::init(model_config, Rng::derive(train_config.seed, kStreamInit));

  const bool write_checkpoints = !train_config.checkpoint_dir.empty();
  auto save = [&](const ModelParams& params, const char* name) {
    if (!write_checkpoints) return;
    std::filesystem::create_directories(train_config.checkpoint_dir);
    save_checkpoint(Checkpoint{model_config, result.normalizer, params},
                    train_config.checkpoint_dir + "/" + name);
  };

  std::vector<std::pair<std::string, Tensor*>> named = result.params.named_tensors();
  std::vector<Tensor*> tensors;
  for (auto& [name, tensor] : named) tensors.push_back(tensor);
  AdamState adam;
  adam.init_like(tensors);
  AdamConfig adam_config;
  adam_config.lr = train_config.learning_rate;

  Rng batch_rng(Rng::derive(train_config.seed, kStreamBatch));
  const uint64_t dropout_base = Rng::derive(train_config.seed, kStreamDropout);
  result.best_val_mape = std::numeric_limits<double>::infinity();

  for (int step = 1; step <= train_config.max_steps; ++step) {
    std::vector<const Sample*> chosen;
    chosen.reserve(static_cast<size_t>(train_config.batch_size));
    for (int i = 0; i < train_config.batch_size; ++i)
      chosen.push_back(&train_set[batch_rng.uniform_int(train_set.size())]);
    PreparedBatch batch = prepare_batch(chosen, model_config, result.normalizer);
    std::vector<double> labels_norm(batch.labels.size());
    for (size_t i = 0; i < batch.labels.size(); ++i)
      labels_norm[i] = result.normalizer.normalize(batch.labels[i]);

    double loss_val = std::numeric_limits<double>::quiet_NaN();
    bool finite = true;
    Tape tape;
    try {
      ForwardBuild build = build_forward(tape, batch.graph, batch.x_p, batch.x_l, result.params,
                                         model_config, RunMode::Train,
                                         Rng::derive(dropout_base, static_cast<uint64_t>(step)));
      Tape::NodeId loss = loss_node(tape, build, labels_norm, train_config.l2_coeff);
      loss_val = tape.value(loss).data[0];
      finite = std::isfinite(loss_val);
      if (finite) {
        tape.backward(loss);
        std::vector<Tensor> grads;
        grads.reserve(build.param_nodes.size());
        for (Tape::NodeId id : build.param_nodes) grads.push_back(tape.grad(id));
        adam_step(tensors, grads, adam, adam_config);
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NonFinite) throw;
      finite = false;  // debug-mode finite checks surface divergence mid-op
    }
    if (!finite) {
      // result.params still holds the last good values; persist them.
      save(result.params, "latest.json");
      if (result.has_best) save(result.best_params, "best.json");
      raise(ErrorKind::DivergedLoss,
            "non-finite training loss at step " + std::to_string(step));
    }

    HistoryRow row;
    row.step = step;
    row.train_loss = loss_val;
    if (step % train_config.eval_every == 0 || step == train_config.max_steps) {
      const ValMetrics m = validation_metrics(val_set, result.params, model_config,
                                              result.normalizer, train_config.batch_size);
      row.val_mae = m.mae;
      row.val_mape = m.mape;
      row.val_pcc = m.pcc;
      row.has_val = true;
      if (m.mape < result.best_val_mape) {
        result.best_val_mape = m.mape;
        result.best_step = step;
        result.best_params = result.params;
        result.has_best = true;
        save(result.best_params, "best.json");
      }
    }
    result.history.push_back(row);
    if (train_config.progress) train_config.progress(row);
  }

  save(result.params, "latest.json");
  if (!result.has_best) {
    result.best_params = result.params;
    result.best_step = train_config.max_steps;
  }
  return result;
}

}  // namespace dwnet

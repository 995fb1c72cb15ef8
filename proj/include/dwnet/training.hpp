#ifndef DWNET_TRAINING_HPP
#define DWNET_TRAINING_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dwnet/datagen.hpp"
#include "dwnet/model.hpp"
#include "dwnet/tape.hpp"

namespace dwnet {

/// One history row per step; validation columns hold values only when
/// has_val is set (eval_every boundaries and the final step).
struct HistoryRow {
  int step = 0;
  double train_loss = 0.0;
  double val_mae = 0.0;
  double val_mape = 0.0;
  double val_pcc = 0.0;
  bool has_val = false;
};

struct TrainConfig {
  int batch_size = 32;
  double learning_rate = 0.001;
  double l2_coeff = 0.1;
  int max_steps = 0;
  int eval_every = 100;
  uint64_t seed = 0;
  /// Directory receiving latest/best checkpoints; empty disables writing.
  std::string checkpoint_dir;
  /// Optional observer invoked after each step's history row is recorded.
  std::function<void(const HistoryRow&)> progress;

  void validate() const;
};

/// Label z-score statistics fit on the training split, plus the feature
/// scale (max link capacity) dividing both demand and capacity features.
struct Normalizer {
  double label_mean = 0.0;
  double label_std = 1.0;
  double feature_scale = 1.0;

  static Normalizer fit(const std::vector<Sample>& train_set, Target target);
  double normalize(double y) const { return (y - label_mean) / label_std; }
  double denormalize(double y) const { return y * label_std + label_mean; }

  bool operator==(const Normalizer&) const = default;
};

/// A union of samples ready for the model: graph, scaled features and raw
/// (physical-unit) labels for the configured target, pooled across samples.
struct PreparedBatch {
  HeteroGraph graph;
  std::vector<double> x_p;
  std::vector<double> x_l;
  std::vector<double> labels;
};

PreparedBatch prepare_batch(const std::vector<const Sample*>& samples,
                            const ModelConfig& config, const Normalizer& normalizer);

/// Eval-mode predictions over a whole dataset, run in unions of at most
/// batch_size samples and denormalized to physical units.
std::vector<double> predict_dataset(const std::vector<Sample>& samples,
                                    const ModelParams& params, const ModelConfig& config,
                                    const Normalizer& normalizer, int batch_size = 32);

/// Pooled loss over every path in the batch: sqrt(mean((pred - label)^2))
/// plus l2_coeff times the sum of squared weight-matrix entries (biases
/// excluded). Throws EmptyBatch / LengthMismatch.
double loss_value(const std::vector<double>& predictions,
                  const std::vector<double>& labels_normalized,
                  const ModelParams& params, double l2_coeff);

/// Same loss attached to a built forward pass on its tape; labels given in
/// normalized units. Returns the scalar loss node.
Tape::NodeId loss_node(Tape& tape, const ForwardBuild& build,
                       const std::vector<double>& labels_normalized, double l2_coeff);

void write_history_csv(const std::vector<HistoryRow>& history, const std::string& path);

struct TrainResult {
  ModelParams params;  // parameters after the last completed step
  ModelParams best_params;
  Normalizer normalizer;
  std::vector<HistoryRow> history;
  int best_step = 0;  // 0: initial params were never beaten (max_steps 0)
  double best_val_mape = 0.0;
  bool has_best = false;
};

/// Seeded Adam training loop: per step, sample batch_size training samples,
/// run a train-mode forward over their union, apply one optimizer step.
/// Validation metrics are computed at eval_every boundaries; the best
/// checkpoint (by validation MAPE) is retained alongside the latest. A
/// non-finite loss aborts with DivergedLoss after writing the last good
/// checkpoint.
TrainResult train(const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const ModelConfig& model_config, const TrainConfig& train_config);

}  // namespace dwnet

#endif  // DWNET_TRAINING_HPP

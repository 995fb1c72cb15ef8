#ifndef DWNET_METRICS_HPP
#define DWNET_METRICS_HPP

#include <string>
#include <vector>

#include "dwnet/datagen.hpp"
#include "dwnet/model.hpp"
#include "dwnet/training.hpp"

namespace dwnet {

/// Mean absolute error (1/n) sum |pred_i - actual_i|.
double mae(const std::vector<double>& predicted, const std::vector<double>& actual);

/// Mean absolute percentage error (1/n) sum |(pred_i - actual_i) / actual_i|,
/// as a fraction (0.1 = 10%). Throws ZeroActual when any |actual_i| <= 1e-12.
double mape(const std::vector<double>& predicted, const std::vector<double>& actual);

/// Pearson correlation coefficient, clamped to [-1, 1] against rounding.
/// Throws ZeroVariance when either argument is constant.
double pcc(const std::vector<double>& x, const std::vector<double>& y);

struct EvalEntry {
  std::string model_id;
  std::string dataset;
  std::string target;
  int n_paths = 0;
  double mae = 0.0;
  double mape = 0.0;
  double pcc = 0.0;
};

struct ModelInfo {
  std::string model_id;
  std::string checkpoint_path;
  std::string config_hash;
};

struct EvalReport {
  int format_version = 1;
  std::string timestamp;
  std::vector<ModelInfo> models;
  std::vector<EvalEntry> entries;
  /// Free-form findings, e.g. cross-model comparison lines.
  std::vector<std::string> notes;
};

struct NamedDataset {
  std::string name;
  std::vector<Sample> samples;
};

/// Eval-mode predictions over every dataset (batched unions of at most
/// batch_size samples), denormalized before computing the metrics. Metric
/// errors propagate annotated with the dataset name.
EvalReport evaluate(const ModelParams& params, const ModelConfig& config,
                    const std::vector<NamedDataset>& datasets, const Normalizer& normalizer,
                    const std::string& model_id = "model", int batch_size = 32,
                    const std::string& checkpoint_path = "",
                    const std::string& config_hash = "");

/// Concatenates per-model reports (shared timestamp from the first).
EvalReport merge_reports(const std::vector<EvalReport>& reports);

/// Appends one note per (dataset, target) with two or more models, naming
/// the model with the lower MAPE.
void add_comparison_notes(EvalReport& report);

/// ISO-8601 UTC now; the DWNET_TIMESTAMP environment variable overrides it
/// so seeded runs can produce byte-identical reports.
std::string timestamp_now();

/// Serialization: machine-readable JSON, aligned text table, and flat CSV.
void write_report_json(const EvalReport& report, const std::string& path);
void write_report_table(const EvalReport& report, const std::string& path);
void write_report_csv(const EvalReport& report, const std::string& path);
std::string report_table(const EvalReport& report);
EvalReport read_report_json(const std::string& path);

}  // namespace dwnet

#endif  // DWNET_METRICS_HPP

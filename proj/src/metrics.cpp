#include "dwnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dwnet/error.hpp"

namespace dwnet {

using ordered_json = nlohmann::ordered_json;

namespace {

void check_pair(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size())
    raise(ErrorKind::LengthMismatch,
          std::to_string(a.size()) + " vs " + std::to_string(b.size()) + " entries");
  if (a.empty()) raise(ErrorKind::EmptyInput, "metric over zero entries");
}

std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_fixed(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

double mae(const std::vector<double>& predicted, const std::vector<double>& actual) {
  check_pair(predicted, actual);
  double sum = 0.0;
  for (size_t i = 0; i < predicted.size(); ++i) sum += std::fabs(predicted[i] - actual[i]);
  return sum / static_cast<double>(predicted.size());
}

double mape(const std::vector<double>& predicted, const std::vector<double>& actual) {
  check_pair(predicted, actual);
  double sum = 0.0;
  for (size_t i = 0; i < predicted.size(); ++i) {
    if (std::fabs(actual[i]) <= 1e-12)
      raise(ErrorKind::ZeroActual,
            "actual value at index " + std::to_string(i) + " is (near) zero");
    sum += std::fabs((predicted[i] - actual[i]) / actual[i]);
  }
  return sum / static_cast<double>(predicted.size());
}

double pcc(const std::vector<double>& x, const std::vector<double>& y) {
  check_pair(x, y);
  if (x.size() < 2) raise(ErrorKind::EmptyInput, "pcc needs at least two entries");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sx2 = 0.0, sy2 = 0.0;
  bool const_x = true, const_y = true;
  for (size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sx2 += dx * dx;
    sy2 += dy * dy;
    const_x = const_x && x[i] == x[0];
    const_y = const_y && y[i] == y[0];
  }
  // the mean of n identical values can round, leaving sx2 a hair above zero,
  // so constancy is detected on the raw entries as well
  if (const_x || const_y || sx2 == 0.0 || sy2 == 0.0)
    raise(ErrorKind::ZeroVariance, "pcc over a constant input");
  return std::clamp(sxy / std::sqrt(sx2 * sy2), -1.0, 1.0);
}

std::string timestamp_now() {
  if (const char* fixed = std::getenv("DWNET_TIMESTAMP")) return fixed;
  const std::time_t now = std::time(nullptr);
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

EvalReport evaluate(const ModelParams& params, const ModelConfig& config,
                    const std::vector<NamedDataset>& datasets, const Normalizer& normalizer,
                    const std::string& model_id, int batch_size,
                    const std::string& checkpoint_path, const std::string& hash) {
  if (datasets.empty()) raise(ErrorKind::EmptyInput, "no datasets to evaluate");
  EvalReport report;
  report.timestamp = timestamp_now();
  report.models.push_back(ModelInfo{model_id, checkpoint_path, hash});
  for (const NamedDataset& ds : datasets) {
    try {
      const std::vector<double> pred =
          predict_dataset(ds.samples, params, config, normalizer, batch_size);
      std::vector<double> actual;
      for (const Sample& s : ds.samples) {
        const std::vector<double>& y =
            config.target == Target::Delay ? s.labels.delay : s.labels.jitter;
        actual.insert(actual.end(), y.begin(), y.end());
      }
      EvalEntry entry;
      entry.model_id = model_id;
      entry.dataset = ds.name;
      entry.target = target_name(config.target);
      entry.n_paths = static_cast<int>(actual.size());
      entry.mae = mae(pred, actual);
      entry.mape = mape(pred, actual);
      entry.pcc = pcc(pred, actual);
      report.entries.push_back(entry);
    } catch (const Error& e) {
      raise(e.kind(), "dataset '" + ds.name + "': " + e.message());
    }
  }
  return report;
}

EvalReport merge_reports(const std::vector<EvalReport>& reports) {
  if (reports.empty()) raise(ErrorKind::EmptyInput, "no reports to merge");
  EvalReport merged;
  merged.timestamp = reports.front().timestamp;
  for (const EvalReport& r : reports) {
    merged.models.insert(merged.models.end(), r.models.begin(), r.models.end());
    merged.entries.insert(merged.entries.end(), r.entries.begin(), r.entries.end());
    merged.notes.insert(merged.notes.end(), r.notes.begin(), r.notes.end());
  }
  return merged;
}

void add_comparison_notes(EvalReport& report) {
  // Group entries by (dataset, target), preserving first-seen order.
  std::vector<std::pair<std::string, std::string>> keys;
  for (const EvalEntry& e : report.entries) {
    const auto key = std::make_pair(e.dataset, e.target);
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
  }
  for (const auto& [dataset, target] : keys) {
    std::vector<const EvalEntry*> group;
    for (const EvalEntry& e : report.entries)
      if (e.dataset == dataset && e.target == target) group.push_back(&e);
    if (group.size() < 2) continue;
    const EvalEntry* best = group.front();
    for (const EvalEntry* e : group)
      if (e->mape < best->mape) best = e;
    std::string note = "dataset '" + dataset + "' (" + target + "): lowest MAPE " +
                       fmt_fixed(best->mape) + " from model '" + best->model_id + "' (";
    for (size_t i = 0; i < group.size(); ++i) {
      if (i) note += ", ";
      note += group[i]->model_id + " " + fmt_fixed(group[i]->mape);
    }
    note += ")";
    report.notes.push_back(note);
  }
}

namespace {

ordered_json report_to_json(const EvalReport& report) {
  ordered_json j;
  j["format_version"] = report.format_version;
  j["timestamp"] = report.timestamp;
  j["models"] = ordered_json::array();
  for (const ModelInfo& m : report.models)
    j["models"].push_back({{"model_id", m.model_id},
                           {"checkpoint", m.checkpoint_path},
                           {"config_hash", m.config_hash}});
  j["results"] = ordered_json::array();
  for (const EvalEntry& e : report.entries)
    j["results"].push_back({{"model_id", e.model_id},
                            {"dataset", e.dataset},
                            {"target", e.target},
                            {"n_paths", e.n_paths},
                            {"mae", e.mae},
                            {"mape", e.mape},
                            {"pcc", e.pcc}});
  j["notes"] = report.notes;
  return j;
}

}  // namespace

void write_report_json(const EvalReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorKind::Io, "cannot open '" + path + "' for writing");
  out << report_to_json(report).dump(2) << '\n';
  out.flush();
  if (!out) raise(ErrorKind::Io, "write to '" + path + "' failed");
}

EvalReport read_report_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::Io, "cannot open '" + path + "' for reading");
  ordered_json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    raise(ErrorKind::Parse, "'" + path + "': " + e.what());
  }
  try {
    if (j.at("format_version").get<int>() != 1)
      raise(ErrorKind::SchemaVersionMismatch,
            "'" + path + "' has format_version " + j["format_version"].dump());
    EvalReport report;
    report.timestamp = j.at("timestamp").get<std::string>();
    for (const auto& m : j.at("models"))
      report.models.push_back(ModelInfo{m.at("model_id").get<std::string>(),
                                        m.at("checkpoint").get<std::string>(),
                                        m.at("config_hash").get<std::string>()});
    for (const auto& e : j.at("results")) {
      EvalEntry entry;
      entry.model_id = e.at("model_id").get<std::string>();
      entry.dataset = e.at("dataset").get<std::string>();
      entry.target = e.at("target").get<std::string>();
      entry.n_paths = e.at("n_paths").get<int>();
      entry.mae = e.at("mae").get<double>();
      entry.mape = e.at("mape").get<double>();
      entry.pcc = e.at("pcc").get<double>();
      report.entries.push_back(entry);
    }
    report.notes = j.at("notes").get<std::vector<std::string>>();
    return report;
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    raise(ErrorKind::Parse, "'" + path + "': " + e.what());
  }
}

std::string report_table(const EvalReport& report) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"model", "dataset", "target", "n_paths", "mae", "mape", "pcc"});
  for (const EvalEntry& e : report.entries)
    rows.push_back({e.model_id, e.dataset, e.target, std::to_string(e.n_paths),
                    fmt_fixed(e.mae), fmt_fixed(e.mape), fmt_fixed(e.pcc)});
  std::vector<size_t> width(rows[0].size(), 0);
  for (const auto& row : rows)
    for (size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::ostringstream out;
  out << "evaluation report (" << report.timestamp << ")\n";
  for (size_t r = 0; r < rows.size(); ++r) {
    for (size_t c = 0; c < rows[r].size(); ++c) {
      out << rows[r][c] << std::string(width[c] - rows[r][c].size(), ' ');
      out << (c + 1 < rows[r].size() ? "  " : "");
    }
    out << '\n';
    if (r == 0) {
      size_t total = 0;
      for (size_t c = 0; c < width.size(); ++c) total += width[c] + (c + 1 < width.size() ? 2 : 0);
      out << std::string(total, '-') << '\n';
    }
  }
  for (const std::string& note : report.notes) out << "note: " << note << '\n';
  return out.str();
}

void write_report_table(const EvalReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorKind::Io, "cannot open '" + path + "' for writing");
  out << report_table(report);
  out.flush();
  if (!out) raise(ErrorKind::Io, "write to '" + path + "' failed");
}

void write_report_csv(const EvalReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorKind::Io, "cannot open '" + path + "' for writing");
  out << "model_id,dataset,target,n_paths,mae,mape,pcc\n";
  for (const EvalEntry& e : report.entries)
    out << e.model_id << ',' << e.dataset << ',' << e.target << ',' << e.n_paths << ','
        << fmt_g17(e.mae) << ',' << fmt_g17(e.mape) << ',' << fmt_g17(e.pcc) << '\n';
  out.flush();
  if (!out) raise(ErrorKind::Io, "write to '" + path + "' failed");
}

}  // namespace dwnet

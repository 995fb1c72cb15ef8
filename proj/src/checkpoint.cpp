#include "dwnet/checkpoint.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>

#include <json.hpp>

#include "dwnet/error.hpp"

namespace dwnet {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr int kCheckpointFormatVersion = 1;

ordered_json config_to_json(const ModelConfig& c) {
  ordered_json j;
  j["state_dim"] = c.state_dim;
  j["rounds"] = c.rounds;
  j["lambda"] = c.lambda;
  j["readout_hidden"] = c.readout_hidden;
  j["dropout_p"] = c.dropout_p;
  j["secondary_enabled"] = c.secondary_enabled;
  j["include_self_in_neighbors"] = c.include_self_in_neighbors;
  j["target"] = target_name(c.target);
  j["path_cell"] = c.path_cell == PathCellKind::Gru ? "gru" : "tanh";
  j["per_round_weights"] = c.per_round_weights;
  return j;
}

ModelConfig config_from_json(const ordered_json& j) {
  ModelConfig c;
  c.state_dim = j.at("state_dim").get<int>();
  c.rounds = j.at("rounds").get<int>();
  c.lambda = j.at("lambda").get<double>();
  c.readout_hidden = j.at("readout_hidden").get<int>();
  c.dropout_p = j.at("dropout_p").get<double>();
  c.secondary_enabled = j.at("secondary_enabled").get<bool>();
  c.include_self_in_neighbors = j.at("include_self_in_neighbors").get<bool>();
  c.target = target_from_name(j.at("target").get<std::string>());
  const std::string cell = j.at("path_cell").get<std::string>();
  if (cell == "gru")
    c.path_cell = PathCellKind::Gru;
  else if (cell == "tanh")
    c.path_cell = PathCellKind::Tanh;
  else
    raise(ErrorKind::InvalidConfig, "unknown path_cell '" + cell + "'");
  c.per_round_weights = j.at("per_round_weights").get<bool>();
  return c;
}

}  // namespace

std::string config_hash(const ModelConfig& config) {
  const std::string canonical = config_to_json(config).dump();
  uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char ch : canonical) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  check_params(checkpoint.params, checkpoint.config);
  ordered_json j;
  j["format_version"] = kCheckpointFormatVersion;
  j["model_config"] = config_to_json(checkpoint.config);
  j["normalizer"] = {{"label_mean", checkpoint.normalizer.label_mean},
                     {"label_std", checkpoint.normalizer.label_std},
                     {"feature_scale", checkpoint.normalizer.feature_scale}};
  j["params"] = ordered_json::array();
  for (const auto& [name, tensor] : checkpoint.params.named_tensors())
    j["params"].push_back({{"name", name},
                           {"rows", tensor->rows},
                           {"cols", tensor->cols},
                           {"values", tensor->data}});
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorKind::Io, "cannot open '" + path + "' for writing");
  out << j.dump() << '\n';
  out.flush();
  if (!out) raise(ErrorKind::Io, "write to '" + path + "' failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::Io, "cannot open '" + path + "' for reading");
  ordered_json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    raise(ErrorKind::Parse, "'" + path + "': " + e.what());
  }

  Checkpoint checkpoint;
  try {
    if (!j.contains("format_version") || !j["format_version"].is_number_integer())
      raise(ErrorKind::Parse, "'" + path + "' lacks format_version");
    if (j["format_version"].get<int>() != kCheckpointFormatVersion)
      raise(ErrorKind::SchemaVersionMismatch,
            "'" + path + "' has format_version " + j["format_version"].dump() + ", expected " +
                std::to_string(kCheckpointFormatVersion));
    checkpoint.config = config_from_json(j.at("model_config"));
    checkpoint.normalizer.label_mean = j.at("normalizer").at("label_mean").get<double>();
    checkpoint.normalizer.label_std = j.at("normalizer").at("label_std").get<double>();
    checkpoint.normalizer.feature_scale = j.at("normalizer").at("feature_scale").get<double>();

    std::map<std::string, Tensor> stored;
    for (const auto& entry : j.at("params")) {
      Tensor t;
      t.rows = entry.at("rows").get<int>();
      t.cols = entry.at("cols").get<int>();
      t.data = entry.at("values").get<std::vector<double>>();
      if (t.data.size() != static_cast<size_t>(t.rows) * static_cast<size_t>(t.cols))
        raise(ErrorKind::Parse, "'" + path + "': parameter '" +
                                    entry.at("name").get<std::string>() +
                                    "' value count does not match its shape");
      stored.emplace(entry.at("name").get<std::string>(), std::move(t));
    }
    // Template the parameter set from the config, then require an exact
    // name-for-name, shape-for-shape match.
    checkpoint.params = ModelParams::init(checkpoint.config, 0);
    size_t used = 0;
    for (auto& [name, tensor] : checkpoint.params.named_tensors()) {
      auto it = stored.find(name);
      if (it == stored.end())
        raise(ErrorKind::ConfigMismatch, "'" + path + "' is missing parameter '" + name + "'");
      if (it->second.rows != tensor->rows || it->second.cols != tensor->cols)
        raise(ErrorKind::ConfigMismatch,
              "'" + path + "' parameter '" + name + "' is " + it->second.shape_str() +
                  ", config expects " + tensor->shape_str());
      *tensor = it->second;
      ++used;
    }
    if (used != stored.size())
      raise(ErrorKind::ConfigMismatch,
            "'" + path + "' holds " + std::to_string(stored.size()) + " parameters, config expects " +
                std::to_string(used));
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    raise(ErrorKind::Parse, "'" + path + "': " + e.what());
  }
  check_params(checkpoint.params, checkpoint.config);
  return checkpoint;
}

}  // namespace dwnet

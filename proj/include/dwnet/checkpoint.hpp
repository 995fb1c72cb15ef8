#ifndef DWNET_CHECKPOINT_HPP
#define DWNET_CHECKPOINT_HPP

#include <string>

#include "dwnet/model.hpp"
#include "dwnet/training.hpp"

namespace dwnet {

/// Everything needed to run a trained model: its configuration, the label
/// and feature normalization statistics, and all named parameter tensors.
struct Checkpoint {
  ModelConfig config;
  Normalizer normalizer;
  ModelParams params;
};

/// JSON file with a format_version field, the model config header, the
/// normalizer and one named array per parameter tensor.
void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);

/// Throws Io, Parse, SchemaVersionMismatch, and ConfigMismatch when the
/// stored parameters disagree with the stored config.
Checkpoint load_checkpoint(const std::string& path);

/// Stable short hex digest of the canonical config serialization.
std::string config_hash(const ModelConfig& config);

}  // namespace dwnet

#endif  // DWNET_CHECKPOINT_HPP

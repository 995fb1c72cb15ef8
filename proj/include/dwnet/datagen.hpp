#ifndef DWNET_DATAGEN_HPP
#define DWNET_DATAGEN_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "dwnet/netgraph.hpp"

namespace dwnet {

/// Knobs of the synthetic sample generator.
struct GeneratorConfig {
  int node_count = 8;
  double extra_edge_prob = 0.3;
  std::vector<double> capacity_choices = {10.0, 20.0, 40.0};
  /// Target max link utilization; traffic is rescaled to hit it exactly.
  double traffic_intensity = 0.6;
  /// Fraction of ordered (src, dst) pairs that receive a routed path.
  double pair_fraction = 0.5;
  uint64_t seed = 0;

  void validate() const;
};

/// Per-path ground truth. Jitter is the delay variance (units: time squared),
/// not its standard deviation.
struct Labels {
  std::vector<double> delay;
  std::vector<double> jitter;

  bool operator==(const Labels& other) const {
    return delay == other.delay && jitter == other.jitter;
  }
};

struct Sample {
  Topology topology;
  RoutingScheme routing;
  TrafficMatrix traffic;
  Labels labels;

  bool operator==(const Sample& other) const;
  void validate() const;
};

/// Per-link load: sum of demands over paths traversing the link.
std::vector<double> link_loads(const Topology& topology, const RoutingScheme& routing,
                               const TrafficMatrix& traffic);

/// M/M/1 labels: per link, sojourn delay 1/(c - load) and variance its
/// square; per path, the sums over traversed links. Throws Overload when any
/// load reaches capacity.
Labels oracle_labels(const Topology& topology, const RoutingScheme& routing,
                     const TrafficMatrix& traffic);

/// One sample: uniform random spanning tree plus extra edges, hop-count
/// shortest-path routing over a seeded subset of ordered node pairs, uniform
/// demands rescaled so the max link utilization equals traffic_intensity.
/// Deterministic per config.seed.
Sample gen_sample(const GeneratorConfig& config);

/// `count` samples; sample i uses seed derive(config.seed, i), so serial and
/// parallel generation agree.
std::vector<Sample> gen_dataset(const GeneratorConfig& config, int count);

/// Line-delimited dataset file: one header line, then one record per sample.
void write_dataset(const std::vector<Sample>& samples, const std::string& path);
std::vector<Sample> read_dataset(const std::string& path);

/// Seeded shuffle, then the first round(train_fraction * n) samples become
/// the training side. Throws DegenerateSplit when either side is empty.
void split_dataset(const std::vector<Sample>& samples, double train_fraction,
                   uint64_t seed, std::vector<Sample>& train, std::vector<Sample>& val);

}  // namespace dwnet

#endif  // DWNET_DATAGEN_HPP

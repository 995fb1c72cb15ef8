#include "dwnet/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "dwnet/error.hpp"
#include "dwnet/rng.hpp"

namespace dwnet {

using ordered_json = nlohmann::ordered_json;

void GeneratorConfig::validate() const {
  if (node_count < 3) raise(ErrorKind::InvalidConfig, "node_count must be >= 3");
  if (extra_edge_prob < 0.0 || extra_edge_prob > 1.0)
    raise(ErrorKind::InvalidConfig, "extra_edge_prob must lie in [0, 1]");
  if (capacity_choices.empty())
    raise(ErrorKind::InvalidConfig, "capacity_choices must be non-empty");
  for (double c : capacity_choices)
    if (!(c > 0.0)) raise(ErrorKind::InvalidConfig, "capacities must be positive");
  if (!(traffic_intensity > 0.0) || !(traffic_intensity < 1.0))
    raise(ErrorKind::InvalidConfig, "traffic_intensity must lie in (0, 1)");
  if (!(pair_fraction > 0.0) || pair_fraction > 1.0)
    raise(ErrorKind::InvalidConfig, "pair_fraction must lie in (0, 1]");
}

bool Sample::operator==(const Sample& other) const {
  return topology == other.topology && routing == other.routing &&
         traffic == other.traffic && labels == other.labels;
}

void Sample::validate() const {
  topology.validate();
  routing.validate(topology);
  const size_t n_paths = routing.paths.size();
  if (traffic.demand.size() != n_paths)
    raise(ErrorKind::SizeMismatch, "traffic has " + std::to_string(traffic.demand.size()) +
                                       " demands for " + std::to_string(n_paths) + " paths");
  for (double d : traffic.demand)
    if (!(d > 0.0) || !std::isfinite(d))
      raise(ErrorKind::InfeasibleTraffic, "demands must be positive and finite");
  const std::vector<double> loads = link_loads(topology, routing, traffic);
  for (size_t l = 0; l < loads.size(); ++l)
    if (!(loads[l] < topology.links[l].capacity))
      raise(ErrorKind::Overload, "link " + std::to_string(l) + " load " +
                                     std::to_string(loads[l]) + " reaches capacity " +
                                     std::to_string(topology.links[l].capacity));
  if (labels.delay.size() != n_paths || labels.jitter.size() != n_paths)
    raise(ErrorKind::SizeMismatch, "label count does not match path count");
  for (size_t p = 0; p < n_paths; ++p) {
    if (!std::isfinite(labels.delay[p]) || !(labels.delay[p] > 0.0))
      raise(ErrorKind::NonFinite, "delay label of path " + std::to_string(p) +
                                      " must be finite and positive");
    if (!std::isfinite(labels.jitter[p]) || labels.jitter[p] < 0.0)
      raise(ErrorKind::NonFinite, "jitter label of path " + std::to_string(p) +
                                      " must be finite and non-negative");
  }
}

std::vector<double> link_loads(const Topology& topology, const RoutingScheme& routing,
                               const TrafficMatrix& traffic) {
  if (traffic.demand.size() != routing.paths.size())
    raise(ErrorKind::SizeMismatch, "one demand entry per path required");
  std::vector<double> loads(topology.links.size(), 0.0);
  for (size_t p = 0; p < routing.paths.size(); ++p)
    for (int l : routing.paths[p].link_seq)
      loads[static_cast<size_t>(l)] += traffic.demand[p];
  return loads;
}

Labels oracle_labels(const Topology& topology, const RoutingScheme& routing,
                     const TrafficMatrix& traffic) {
  const std::vector<double> loads = link_loads(topology, routing, traffic);
  std::vector<double> link_delay(loads.size());
  for (size_t l = 0; l < loads.size(); ++l) {
    const double residual = topology.links[l].capacity - loads[l];
    if (!(residual > 0.0))
      raise(ErrorKind::Overload, "link " + std::to_string(l) + " load " +
                                     std::to_string(loads[l]) + " reaches capacity " +
                                     std::to_string(topology.links[l].capacity));
    link_delay[l] = 1.0 / residual;
  }
  Labels labels;
  labels.delay.reserve(routing.paths.size());
  labels.jitter.reserve(routing.paths.size());
  for (const Path& path : routing.paths) {
    double delay = 0.0, jitter = 0.0;
    for (int l : path.link_seq) {
      const double d = link_delay[static_cast<size_t>(l)];
      delay += d;
      jitter += d * d;
    }
    labels.delay.push_back(delay);
    labels.jitter.push_back(jitter);
  }
  return labels;
}

namespace {

/// Uniform random labeled tree on n >= 3 nodes via a random generating
/// sequence of length n-2 (each entry a node id); decoding repeatedly joins
/// the smallest remaining leaf to the next sequence entry.
std::vector<std::pair<int, int>> random_tree_edges(int n, Rng& rng) {
  std::vector<int> seq(static_cast<size_t>(n - 2));
  for (int& s : seq) s = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n)));
  std::vector<int> degree(static_cast<size_t>(n), 1);
  for (int s : seq) ++degree[static_cast<size_t>(s)];
  std::vector<std::pair<int, int>> edges;
  edges.reserve(static_cast<size_t>(n - 1));
  for (int s : seq) {
    int leaf = -1;
    for (int v = 0; v < n; ++v)
      if (degree[static_cast<size_t>(v)] == 1) {
        leaf = v;
        break;
      }
    edges.emplace_back(std::min(leaf, s), std::max(leaf, s));
    --degree[static_cast<size_t>(leaf)];
    --degree[static_cast<size_t>(s)];
  }
  int a = -1, b = -1;
  for (int v = 0; v < n; ++v)
    if (degree[static_cast<size_t>(v)] == 1) (a < 0 ? a : b) = v;
  edges.emplace_back(a, b);
  return edges;
}

/// Lexicographically smallest hop-count shortest path from src to dst as a
/// node sequence, using distances-to-dst for the greedy forward walk.
std::vector<int> lex_shortest_path(const std::vector<std::vector<int>>& adj, int src,
                                   int dst, const std::vector<int>& dist_to_dst) {
  std::vector<int> nodes{src};
  int u = src;
  while (u != dst) {
    int next = -1;
    for (int v : adj[static_cast<size_t>(u)])
      if (dist_to_dst[static_cast<size_t>(v)] == dist_to_dst[static_cast<size_t>(u)] - 1) {
        next = v;
        break;
      }
    nodes.push_back(next);
    u = next;
  }
  return nodes;
}

std::vector<int> bfs_distances(const std::vector<std::vector<int>>& adj, int from) {
  std::vector<int> dist(adj.size(), -1);
  std::deque<int> queue{from};
  dist[static_cast<size_t>(from)] = 0;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (int v : adj[static_cast<size_t>(u)])
      if (dist[static_cast<size_t>(v)] < 0) {
        dist[static_cast<size_t>(v)] = dist[static_cast<size_t>(u)] + 1;
        queue.push_back(v);
      }
  }
  return dist;
}

}  // namespace

Sample gen_sample(const GeneratorConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const int n = config.node_count;

  std::vector<std::pair<int, int>> edges = random_tree_edges(n, rng);
  std::vector<bool> is_tree_edge(static_cast<size_t>(n * n), false);
  for (auto [a, b] : edges) is_tree_edge[static_cast<size_t>(a * n + b)] = true;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      if (is_tree_edge[static_cast<size_t>(a * n + b)]) continue;
      if (rng.bernoulli(config.extra_edge_prob)) edges.emplace_back(a, b);
    }
  std::sort(edges.begin(), edges.end());

  Sample sample;
  sample.topology.node_count = n;
  for (auto [a, b] : edges) {
    const size_t idx = rng.uniform_int(config.capacity_choices.size());
    sample.topology.links.push_back(Link{a, b, config.capacity_choices[idx]});
  }
  sample.topology.validate();

  std::vector<std::vector<int>> adj(static_cast<size_t>(n));
  std::map<std::pair<int, int>, int> edge_to_link;
  for (size_t l = 0; l < edges.size(); ++l) {
    adj[static_cast<size_t>(edges[l].first)].push_back(edges[l].second);
    adj[static_cast<size_t>(edges[l].second)].push_back(edges[l].first);
    edge_to_link[edges[l]] = static_cast<int>(l);
  }
  for (auto& list : adj) std::sort(list.begin(), list.end());

  std::vector<std::pair<int, int>> pairs;
  for (int s = 0; s < n; ++s)
    for (int d = 0; d < n; ++d)
      if (s != d) pairs.emplace_back(s, d);
  const auto n_pairs = static_cast<long long>(pairs.size());
  long long count = std::llround(config.pair_fraction * static_cast<double>(n_pairs));
  count = std::clamp(count, 1LL, n_pairs);
  std::vector<int> order = rng.permutation(pairs.size());
  order.resize(static_cast<size_t>(count));
  std::sort(order.begin(), order.end());

  std::vector<std::vector<int>> dist_to(static_cast<size_t>(n));
  for (int idx : order) {
    const auto [s, d] = pairs[static_cast<size_t>(idx)];
    if (dist_to[static_cast<size_t>(d)].empty())
      dist_to[static_cast<size_t>(d)] = bfs_distances(adj, d);
    const std::vector<int> nodes = lex_shortest_path(adj, s, d, dist_to[static_cast<size_t>(d)]);
    Path path;
    path.src = s;
    path.dst = d;
    for (size_t i = 0; i + 1 < nodes.size(); ++i) {
      const int a = std::min(nodes[i], nodes[i + 1]);
      const int b = std::max(nodes[i], nodes[i + 1]);
      path.link_seq.push_back(edge_to_link.at({a, b}));
    }
    sample.routing.paths.push_back(std::move(path));
  }
  sample.routing.validate(sample.topology);

  // Uniform positive demands, then one global rescale pinning the max link
  // utilization to traffic_intensity exactly.
  sample.traffic.demand.resize(sample.routing.paths.size());
  for (double& d : sample.traffic.demand) d = 0.1 + 0.9 * rng.uniform();
  std::vector<double> loads = link_loads(sample.topology, sample.routing, sample.traffic);
  double max_util = 0.0;
  for (size_t l = 0; l < loads.size(); ++l)
    max_util = std::max(max_util, loads[l] / sample.topology.links[l].capacity);
  if (!(max_util > 0.0))
    raise(ErrorKind::InfeasibleTraffic, "no link carries traffic; cannot rescale");
  const double scale = config.traffic_intensity / max_util;
  for (double& d : sample.traffic.demand) d *= scale;
  loads = link_loads(sample.topology, sample.routing, sample.traffic);
  for (size_t l = 0; l < loads.size(); ++l)
    if (!(loads[l] < sample.topology.links[l].capacity))
      raise(ErrorKind::InfeasibleTraffic, "rescaled load still reaches capacity on link " +
                                              std::to_string(l));

  sample.labels = oracle_labels(sample.topology, sample.routing, sample.traffic);
  return sample;
}

std::vector<Sample> gen_dataset(const GeneratorConfig& config, int count) {
  if (count < 0) raise(ErrorKind::InvalidConfig, "count must be >= 0");
  config.validate();
  std::vector<Sample> samples;
  samples.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    GeneratorConfig per_sample = config;
    per_sample.seed = Rng::derive(config.seed, static_cast<uint64_t>(i));
    samples.push_back(gen_sample(per_sample));
  }
  return samples;
}

namespace {

constexpr int kDatasetFormatVersion = 1;

ordered_json sample_to_json(const Sample& s) {
  ordered_json links = ordered_json::array();
  for (const Link& l : s.topology.links) links.push_back({l.src, l.dst, l.capacity});
  ordered_json paths = ordered_json::array();
  for (const Path& p : s.routing.paths) paths.push_back({p.src, p.dst, p.link_seq});
  ordered_json record;
  record["topology"] = {{"node_count", s.topology.node_count}, {"links", links}};
  record["routing"] = {{"paths", paths}};
  record["traffic"] = {{"demand", s.traffic.demand}};
  record["labels"] = {{"delay", s.labels.delay}, {"jitter", s.labels.jitter}};
  return record;
}

Sample sample_from_json(const ordered_json& record) {
  Sample s;
  s.topology.node_count = record.at("topology").at("node_count").get<int>();
  for (const auto& l : record.at("topology").at("links")) {
    if (!l.is_array() || l.size() != 3) throw std::runtime_error("malformed link triple");
    s.topology.links.push_back(
        Link{l[0].get<int>(), l[1].get<int>(), l[2].get<double>()});
  }
  for (const auto& p : record.at("routing").at("paths")) {
    if (!p.is_array() || p.size() != 3) throw std::runtime_error("malformed path triple");
    Path path;
    path.src = p[0].get<int>();
    path.dst = p[1].get<int>();
    path.link_seq = p[2].get<std::vector<int>>();
    s.routing.paths.push_back(std::move(path));
  }
  s.traffic.demand = record.at("traffic").at("demand").get<std::vector<double>>();
  s.labels.delay = record.at("labels").at("delay").get<std::vector<double>>();
  s.labels.jitter = record.at("labels").at("jitter").get<std::vector<double>>();
  return s;
}

}  // namespace

void write_dataset(const std::vector<Sample>& samples, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorKind::Io, "cannot open '" + path + "' for writing");
  ordered_json header;
  header["format_version"] = kDatasetFormatVersion;
  header["jitter_semantics"] = "variance";
  header["capacity_units"] = "Mbps";
  header["time_units"] = "s";
  out << header.dump() << '\n';
  for (const Sample& s : samples) out << sample_to_json(s).dump() << '\n';
  out.flush();
  if (!out) raise(ErrorKind::Io, "write to '" + path + "' failed");
}

std::vector<Sample> read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::Io, "cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(in, line))
    raise(ErrorKind::Parse, "'" + path + "' line 1: missing header");
  ordered_json header;
  try {
    header = ordered_json::parse(line);
  } catch (const std::exception& e) {
    raise(ErrorKind::Parse, "'" + path + "' line 1: " + e.what());
  }
  if (!header.is_object() || !header.contains("format_version") ||
      !header["format_version"].is_number_integer())
    raise(ErrorKind::Parse, "'" + path + "' line 1: header lacks format_version");
  if (header["format_version"].get<int>() != kDatasetFormatVersion)
    raise(ErrorKind::SchemaVersionMismatch,
          "'" + path + "' has format_version " + header["format_version"].dump() +
              ", expected " + std::to_string(kDatasetFormatVersion));
  if (header.value("jitter_semantics", "") != "variance")
    raise(ErrorKind::SchemaVersionMismatch,
          "'" + path + "' uses unsupported jitter semantics");

  std::vector<Sample> samples;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      Sample s = sample_from_json(ordered_json::parse(line));
      s.validate();
      samples.push_back(std::move(s));
    } catch (const std::exception& e) {
      raise(ErrorKind::Parse, "'" + path + "' line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return samples;
}

void split_dataset(const std::vector<Sample>& samples, double train_fraction,
                   uint64_t seed, std::vector<Sample>& train, std::vector<Sample>& val) {
  if (!(train_fraction > 0.0) || !(train_fraction < 1.0))
    raise(ErrorKind::InvalidConfig, "train_fraction must lie in (0, 1)");
  const auto n = static_cast<long long>(samples.size());
  const long long n_train = std::llround(train_fraction * static_cast<double>(n));
  if (n_train < 1 || n_train >= n)
    raise(ErrorKind::DegenerateSplit, "split of " + std::to_string(n) + " samples at " +
                                          std::to_string(train_fraction) +
                                          " leaves one side empty");
  Rng rng(seed);
  std::vector<int> order = rng.permutation(samples.size());
  train.clear();
  val.clear();
  for (long long i = 0; i < n; ++i) {
    const Sample& s = samples[static_cast<size_t>(order[static_cast<size_t>(i)])];
    if (i < n_train)
      train.push_back(s);
    else
      val.push_back(s);
  }
}

}  // namespace dwnet

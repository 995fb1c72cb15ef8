#ifndef DWNET_NETGRAPH_HPP
#define DWNET_NETGRAPH_HPP

#include <utility>
#include <vector>

namespace dwnet {

/// Capacitated edge of the topology. Links are stored with nominal (src, dst)
/// endpoints; routed paths may traverse a link in either direction, and the
/// queueing oracle pools the load of both directions onto the one link.
struct Link {
  int src = 0;
  int dst = 0;
  double capacity = 0.0;  // bandwidth units/s, > 0

  bool operator==(const Link&) const = default;
};

/// Network topology. A link's id is its index in `links`.
struct Topology {
  int node_count = 0;
  std::vector<Link> links;

  int n_links() const { return static_cast<int>(links.size()); }

  /// Validates endpoint ranges, positive capacities, src != dst and
  /// connectivity. Throws InvalidTopology.
  void validate() const;

  bool operator==(const Topology&) const = default;
};

/// One routed path: an ordered walk of link ids from src to dst.
struct Path {
  int src = 0;
  int dst = 0;
  std::vector<int> link_seq;

  bool operator==(const Path&) const = default;
};

/// The routing scheme. A path's id is its index in `paths`. Multiple paths
/// between the same endpoint pair are allowed.
struct RoutingScheme {
  std::vector<Path> paths;

  int n_paths() const { return static_cast<int>(paths.size()); }

  /// Checks every path is a contiguous walk of known links from src to dst
  /// with no repeated link. Throws InvalidRouting naming the offending path.
  void validate(const Topology& topology) const;

  bool operator==(const RoutingScheme&) const = default;
};

/// Per-path demanded bandwidth, one entry per path of the routing scheme.
struct TrafficMatrix {
  std::vector<double> demand;

  bool operator==(const TrafficMatrix&) const = default;
};

struct HeteroGraphOptions {
  /// When true a path counts as its own neighbor (the literal reading of the
  /// shared-link neighbor set); default excludes self.
  bool include_self_in_neighbors = false;
};

/// Bipartite path-link incidence structure plus the shared-link path
/// adjacency consumed by message passing. Immutable once built.
struct HeteroGraph {
  int n_paths = 0;
  int n_links = 0;
  /// Per path, traversed link ids in walk order.
  std::vector<std::vector<int>> path_links;
  /// Per link, (path_id, position within that path) pairs, path-major order.
  std::vector<std::vector<std::pair<int, int>>> link_paths;
  /// Per path, sorted distinct path ids sharing at least one link.
  std::vector<std::vector<int>> path_neighbors;
};

/// Builds the heterogeneous graph for a validated (topology, routing) pair.
/// Routing is re-validated; path order and within-path link order are kept.
HeteroGraph build_hetero_graph(const Topology& topology,
                               const RoutingScheme& routing,
                               const HeteroGraphOptions& options = {});

/// Disjoint union of graphs with path/link id offsets. No cross-sample edges
/// are introduced. Throws EmptyBatch on an empty list.
HeteroGraph union_batch(const std::vector<HeteroGraph>& graphs);

}  // namespace dwnet

#endif  // DWNET_NETGRAPH_HPP

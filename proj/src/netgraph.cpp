#include "dwnet/netgraph.hpp"

#include <algorithm>
#include <queue>
#include <set>
#include <string>

#include "dwnet/error.hpp"

namespace dwnet {

void Topology::validate() const {
  if (node_count <= 0) {
    raise(ErrorKind::InvalidTopology, "node_count must be positive");
  }
  for (size_t i = 0; i < links.size(); ++i) {
    const Link& l = links[i];
    const std::string id = "link " + std::to_string(i);
    if (l.src < 0 || l.src >= node_count || l.dst < 0 || l.dst >= node_count) {
      raise(ErrorKind::InvalidTopology, id + ": endpoint out of range");
    }
    if (l.src == l.dst) {
      raise(ErrorKind::InvalidTopology, id + ": src == dst");
    }
    if (!(l.capacity > 0.0)) {
      raise(ErrorKind::InvalidTopology, id + ": capacity must be positive");
    }
  }
  // Connectivity over the undirected view.
  if (node_count > 1) {
    std::vector<std::vector<int>> adj(static_cast<size_t>(node_count));
    for (const Link& l : links) {
      adj[static_cast<size_t>(l.src)].push_back(l.dst);
      adj[static_cast<size_t>(l.dst)].push_back(l.src);
    }
    std::vector<char> seen(static_cast<size_t>(node_count), 0);
    std::queue<int> frontier;
    frontier.push(0);
    seen[0] = 1;
    int reached = 1;
    while (!frontier.empty()) {
      const int u = frontier.front();
      frontier.pop();
      for (int v : adj[static_cast<size_t>(u)]) {
        if (!seen[static_cast<size_t>(v)]) {
          seen[static_cast<size_t>(v)] = 1;
          ++reached;
          frontier.push(v);
        }
      }
    }
    if (reached != node_count) {
      raise(ErrorKind::InvalidTopology, "graph is not connected");
    }
  }
}

void RoutingScheme::validate(const Topology& topology) const {
  for (size_t p = 0; p < paths.size(); ++p) {
    const Path& path = paths[p];
    const std::string id = "path " + std::to_string(p);
    if (path.link_seq.empty()) {
      raise(ErrorKind::InvalidRouting, id + ": empty link sequence");
    }
    if (path.src < 0 || path.src >= topology.node_count || path.dst < 0 ||
        path.dst >= topology.node_count) {
      raise(ErrorKind::InvalidRouting, id + ": endpoint out of range");
    }
    std::set<int> used;
    int cursor = path.src;
    for (int link_id : path.link_seq) {
      if (link_id < 0 || link_id >= topology.n_links()) {
        raise(ErrorKind::InvalidRouting,
              id + ": unknown link id " + std::to_string(link_id));
      }
      if (!used.insert(link_id).second) {
        raise(ErrorKind::InvalidRouting,
              id + ": repeated link id " + std::to_string(link_id));
      }
      const Link& l = topology.links[static_cast<size_t>(link_id)];
      if (l.src == cursor) {
        cursor = l.dst;
      } else if (l.dst == cursor) {
        cursor = l.src;
      } else {
        raise(ErrorKind::InvalidRouting,
              id + ": broken walk at link " + std::to_string(link_id));
      }
    }
    if (cursor != path.dst) {
      raise(ErrorKind::InvalidRouting, id + ": walk does not end at dst");
    }
  }
}

HeteroGraph build_hetero_graph(const Topology& topology,
                               const RoutingScheme& routing,
                               const HeteroGraphOptions& options) {
  routing.validate(topology);

  HeteroGraph g;
  g.n_paths = routing.n_paths();
  g.n_links = topology.n_links();
  g.path_links.resize(static_cast<size_t>(g.n_paths));
  g.link_paths.resize(static_cast<size_t>(g.n_links));
  g.path_neighbors.resize(static_cast<size_t>(g.n_paths));

  for (int p = 0; p < g.n_paths; ++p) {
    const auto& seq = routing.paths[static_cast<size_t>(p)].link_seq;
    g.path_links[static_cast<size_t>(p)] = seq;
    for (size_t i = 0; i < seq.size(); ++i) {
      g.link_paths[static_cast<size_t>(seq[i])].emplace_back(p, static_cast<int>(i));
    }
  }

  // Paths sharing a link are mutual neighbors.
  std::vector<std::set<int>> neighbors(static_cast<size_t>(g.n_paths));
  for (int l = 0; l < g.n_links; ++l) {
    const auto& incident = g.link_paths[static_cast<size_t>(l)];
    for (size_t a = 0; a < incident.size(); ++a) {
      for (size_t b = 0; b < incident.size(); ++b) {
        const int pa = incident[a].first;
        const int pb = incident[b].first;
        if (pa == pb && !options.include_self_in_neighbors) continue;
        neighbors[static_cast<size_t>(pa)].insert(pb);
      }
    }
  }
  for (int p = 0; p < g.n_paths; ++p) {
    auto& set = neighbors[static_cast<size_t>(p)];
    g.path_neighbors[static_cast<size_t>(p)].assign(set.begin(), set.end());
  }
  return g;
}

HeteroGraph union_batch(const std::vector<HeteroGraph>& graphs) {
  if (graphs.empty()) {
    raise(ErrorKind::EmptyBatch, "union_batch of an empty graph list");
  }
  HeteroGraph out;
  for (const HeteroGraph& g : graphs) {
    out.n_paths += g.n_paths;
    out.n_links += g.n_links;
  }
  out.path_links.reserve(static_cast<size_t>(out.n_paths));
  out.path_neighbors.reserve(static_cast<size_t>(out.n_paths));
  out.link_paths.reserve(static_cast<size_t>(out.n_links));

  int path_offset = 0;
  int link_offset = 0;
  for (const HeteroGraph& g : graphs) {
    for (const auto& links : g.path_links) {
      std::vector<int> shifted(links.size());
      for (size_t i = 0; i < links.size(); ++i) shifted[i] = links[i] + link_offset;
      out.path_links.push_back(std::move(shifted));
    }
    for (const auto& nbrs : g.path_neighbors) {
      std::vector<int> shifted(nbrs.size());
      for (size_t i = 0; i < nbrs.size(); ++i) shifted[i] = nbrs[i] + path_offset;
      out.path_neighbors.push_back(std::move(shifted));
    }
    for (const auto& incident : g.link_paths) {
      std::vector<std::pair<int, int>> shifted(incident.size());
      for (size_t i = 0; i < incident.size(); ++i) {
        shifted[i] = {incident[i].first + path_offset, incident[i].second};
      }
      out.link_paths.push_back(std::move(shifted));
    }
    path_offset += g.n_paths;
    link_offset += g.n_links;
  }
  return out;
}

}  // namespace dwnet

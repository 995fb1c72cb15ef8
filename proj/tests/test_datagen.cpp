#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "dwnet/datagen.hpp"
#include "dwnet/error.hpp"
#include "dwnet/rng.hpp"

using namespace dwnet;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path("/tmp/dwnet_test_" + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

std::vector<int> bfs_hops(const Topology& t, int src) {
  std::vector<std::vector<int>> adj(static_cast<size_t>(t.node_count));
  for (const Link& l : t.links) {
    adj[static_cast<size_t>(l.src)].push_back(l.dst);
    adj[static_cast<size_t>(l.dst)].push_back(l.src);
  }
  std::vector<int> dist(static_cast<size_t>(t.node_count), -1);
  std::deque<int> queue = {src};
  dist[static_cast<size_t>(src)] = 0;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (int v : adj[static_cast<size_t>(u)]) {
      if (dist[static_cast<size_t>(v)] < 0) {
        dist[static_cast<size_t>(v)] = dist[static_cast<size_t>(u)] + 1;
        queue.push_back(v);
      }
    }
  }
  return dist;
}

// Node sequence of a routed walk.
std::vector<int> node_sequence(const Topology& t, const Path& p) {
  std::vector<int> seq = {p.src};
  int cur = p.src;
  for (int l : p.link_seq) {
    const Link& link = t.links[static_cast<size_t>(l)];
    cur = link.src == cur ? link.dst : link.src;
    seq.push_back(cur);
  }
  return seq;
}

void enumerate_shortest(const std::vector<std::vector<int>>& adj,
                        const std::vector<int>& dist_to_dst, int dst,
                        std::vector<int>& prefix, std::vector<std::vector<int>>& out) {
  const int cur = prefix.back();
  if (cur == dst) {
    out.push_back(prefix);
    return;
  }
  for (int v : adj[static_cast<size_t>(cur)]) {
    if (dist_to_dst[static_cast<size_t>(v)] == dist_to_dst[static_cast<size_t>(cur)] - 1) {
      prefix.push_back(v);
      enumerate_shortest(adj, dist_to_dst, dst, prefix, out);
      prefix.pop_back();
    }
  }
}

// Smallest shortest node sequence from src to dst, found by enumerating every
// shortest path; independent oracle for the routing tie-break.
std::vector<int> lex_min_shortest(const Topology& t, int src, int dst) {
  const std::vector<int> dist = bfs_hops(t, dst);  // distance to dst
  std::vector<std::vector<int>> adj(static_cast<size_t>(t.node_count));
  for (const Link& l : t.links) {
    adj[static_cast<size_t>(l.src)].push_back(l.dst);
    adj[static_cast<size_t>(l.dst)].push_back(l.src);
  }
  std::vector<std::vector<int>> all;
  std::vector<int> prefix = {src};
  enumerate_shortest(adj, dist, dst, prefix, all);
  REQUIRE_FALSE(all.empty());
  return *std::min_element(all.begin(), all.end());
}

}  // namespace

TEST_CASE("generator config validation") {
  GeneratorConfig c;
  CHECK_NOTHROW(c.validate());
  c.node_count = 2;
  CHECK_THROWS_AS(c.validate(), Error);
  c = GeneratorConfig{};
  c.extra_edge_prob = -0.1;
  CHECK_THROWS_AS(c.validate(), Error);
  c = GeneratorConfig{};
  c.capacity_choices = {};
  CHECK_THROWS_AS(c.validate(), Error);
  c = GeneratorConfig{};
  c.capacity_choices = {10.0, -1.0};
  CHECK_THROWS_AS(c.validate(), Error);
  c = GeneratorConfig{};
  c.traffic_intensity = 1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = GeneratorConfig{};
  c.traffic_intensity = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = GeneratorConfig{};
  c.pair_fraction = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = GeneratorConfig{};
  c.pair_fraction = 1.5;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("queueing oracle hand values") {
  Topology t;
  t.node_count = 2;
  t.links = {Link{0, 1, 10.0}};
  RoutingScheme r;
  r.paths = {Path{0, 1, {0}}};
  TrafficMatrix m;
  m.demand = {5.0};

  const Labels one = oracle_labels(t, r, m);
  CHECK(one.delay[0] == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(one.jitter[0] == doctest::Approx(0.04).epsilon(1e-15));

  // two identical links in series double both numbers
  Topology t2;
  t2.node_count = 3;
  t2.links = {Link{0, 1, 10.0}, Link{1, 2, 10.0}};
  RoutingScheme r2;
  r2.paths = {Path{0, 2, {0, 1}}};
  const Labels two = oracle_labels(t2, r2, m);
  CHECK(two.delay[0] == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(two.jitter[0] == doctest::Approx(0.08).epsilon(1e-15));

  // idle unit-capacity link: sojourn time 1, variance 1
  Topology t3;
  t3.node_count = 3;
  t3.links = {Link{0, 1, 1.0}, Link{0, 2, 1.0}};
  RoutingScheme r3;
  r3.paths = {Path{0, 1, {0}}, Path{0, 2, {1}}};
  TrafficMatrix m3;
  m3.demand = {1e-12, 0.5};  // first link effectively idle
  const Labels idle = oracle_labels(t3, r3, m3);
  CHECK(idle.delay[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(idle.jitter[0] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("oracle pools both traversal directions onto one link") {
  Topology t;
  t.node_count = 2;
  t.links = {Link{0, 1, 10.0}};
  RoutingScheme r;
  r.paths = {Path{0, 1, {0}}, Path{1, 0, {0}}};
  TrafficMatrix m;
  m.demand = {3.0, 2.0};
  const std::vector<double> loads = link_loads(t, r, m);
  CHECK(loads[0] == 5.0);
  const Labels l = oracle_labels(t, r, m);
  CHECK(l.delay[0] == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(l.delay[1] == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("oracle rejects saturated links") {
  Topology t;
  t.node_count = 2;
  t.links = {Link{0, 1, 10.0}};
  RoutingScheme r;
  r.paths = {Path{0, 1, {0}}};
  TrafficMatrix m;
  m.demand = {10.0};
  CHECK_THROWS_AS(oracle_labels(t, r, m), Error);
  try {
    oracle_labels(t, r, m);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Overload);
  }
}

TEST_CASE("generated samples satisfy every invariant") {
  for (uint64_t seed = 0; seed < 30; ++seed) {
    GeneratorConfig c;
    c.node_count = 4 + static_cast<int>(seed % 9);
    c.seed = seed;
    const Sample s = gen_sample(c);

    CHECK_NOTHROW(s.validate());
    CHECK(s.topology.node_count == c.node_count);
    // tree has n-1 edges; extras only add
    CHECK(s.topology.n_links() >= c.node_count - 1);

    // no duplicate undirected edges
    std::set<std::pair<int, int>> seen;
    for (const Link& l : s.topology.links) {
      const auto key = std::minmax(l.src, l.dst);
      CHECK(seen.insert({key.first, key.second}).second);
      // capacities come from the configured choices
      CHECK(std::find(c.capacity_choices.begin(), c.capacity_choices.end(), l.capacity) !=
            c.capacity_choices.end());
    }

    // routed pair count matches the configured fraction
    const int n_pairs = c.node_count * (c.node_count - 1);
    const auto expected = static_cast<size_t>(std::llround(c.pair_fraction * n_pairs));
    CHECK(s.routing.paths.size() ==
          std::min(static_cast<size_t>(n_pairs), std::max<size_t>(1, expected)));

    // paths are sorted by (src, dst) with no duplicate pair
    for (size_t i = 1; i < s.routing.paths.size(); ++i) {
      const auto& a = s.routing.paths[i - 1];
      const auto& b = s.routing.paths[i];
      CHECK(std::pair{a.src, a.dst} < std::pair{b.src, b.dst});
    }

    // every path is a hop-count shortest path with the smallest node sequence
    for (const Path& p : s.routing.paths) {
      CHECK(p.src != p.dst);
      const std::vector<int> hops = bfs_hops(s.topology, p.src);
      CHECK(static_cast<int>(p.link_seq.size()) == hops[static_cast<size_t>(p.dst)]);
      CHECK(node_sequence(s.topology, p) == lex_min_shortest(s.topology, p.src, p.dst));
    }

    // demands are positive and the max utilization hits the target exactly
    double max_util = 0.0;
    const std::vector<double> loads = link_loads(s.topology, s.routing, s.traffic);
    for (double d : s.traffic.demand) CHECK(d > 0.0);
    for (int l = 0; l < s.topology.n_links(); ++l)
      max_util = std::max(max_util, loads[static_cast<size_t>(l)] /
                                        s.topology.links[static_cast<size_t>(l)].capacity);
    CHECK(std::abs(max_util - c.traffic_intensity) <= 1e-12);

    // labels reproduce the oracle bit for bit
    const Labels expect = oracle_labels(s.topology, s.routing, s.traffic);
    CHECK(s.labels == expect);
  }
}

TEST_CASE("pair_fraction one routes every ordered pair") {
  GeneratorConfig c;
  c.node_count = 5;
  c.pair_fraction = 1.0;
  c.seed = 3;
  const Sample s = gen_sample(c);
  CHECK(s.routing.paths.size() == 20);  // 5 * 4 ordered pairs
}

TEST_CASE("generation is deterministic and seed-sensitive") {
  GeneratorConfig c;
  c.seed = 11;
  const Sample a = gen_sample(c);
  const Sample b = gen_sample(c);
  CHECK(a == b);
  c.seed = 12;
  const Sample d = gen_sample(c);
  CHECK_FALSE(a == d);

  const auto set1 = gen_dataset(c, 5);
  const auto set2 = gen_dataset(c, 5);
  REQUIRE(set1.size() == 5);
  for (size_t i = 0; i < 5; ++i) CHECK(set1[i] == set2[i]);
  // samples within a set differ
  CHECK_FALSE(set1[0] == set1[1]);
}

TEST_CASE("sample validation rejects non-positive demand") {
  GeneratorConfig c;
  const Sample good = gen_sample(c);
  Sample bad = good;
  bad.traffic.demand[0] = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  try {
    bad.validate();
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InfeasibleTraffic);
  }
}

TEST_CASE("dataset file round-trips exactly") {
  TempFile f("roundtrip.jsonl");
  GeneratorConfig c;
  c.node_count = 6;
  c.seed = 2;
  const std::vector<Sample> samples = gen_dataset(c, 4);
  write_dataset(samples, f.path);
  const std::vector<Sample> back = read_dataset(f.path);
  REQUIRE(back.size() == samples.size());
  for (size_t i = 0; i < samples.size(); ++i) CHECK(back[i] == samples[i]);

  // writing twice gives byte-identical files
  TempFile f2("roundtrip2.jsonl");
  write_dataset(samples, f2.path);
  std::ifstream a(f.path, std::ios::binary), b(f2.path, std::ios::binary);
  std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  CHECK(sa == sb);
  CHECK(sa.substr(0, 19) == "{\"format_version\":1");
}

TEST_CASE("empty dataset file holds only the header") {
  TempFile f("empty.jsonl");
  write_dataset({}, f.path);
  const std::vector<Sample> back = read_dataset(f.path);
  CHECK(back.empty());
  std::ifstream in(f.path);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 1);
}

TEST_CASE("read errors carry kind and location") {
  CHECK_THROWS_AS(read_dataset("/tmp/dwnet_missing_file.jsonl"), Error);
  try {
    read_dataset("/tmp/dwnet_missing_file.jsonl");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Io);
  }

  TempFile bad_header("badheader.jsonl");
  {
    std::ofstream out(bad_header.path);
    out << "not json\n";
  }
  try {
    read_dataset(bad_header.path);
    FAIL("expected Parse");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Parse);
    CHECK(e.message().find("line 1") != std::string::npos);
  }

  TempFile wrong_version("version.jsonl");
  {
    std::ofstream out(wrong_version.path);
    out << "{\"format_version\":2,\"jitter_semantics\":\"variance\","
           "\"capacity_units\":\"Mbps\",\"time_units\":\"s\"}\n";
  }
  try {
    read_dataset(wrong_version.path);
    FAIL("expected SchemaVersionMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SchemaVersionMismatch);
  }

  TempFile wrong_semantics("semantics.jsonl");
  {
    std::ofstream out(wrong_semantics.path);
    out << "{\"format_version\":1,\"jitter_semantics\":\"stddev\","
           "\"capacity_units\":\"Mbps\",\"time_units\":\"s\"}\n";
  }
  CHECK_THROWS_AS(read_dataset(wrong_semantics.path), Error);

  // record error on line 3 names the line
  TempFile bad_record("badrecord.jsonl");
  {
    GeneratorConfig c;
    const std::vector<Sample> samples = gen_dataset(c, 1);
    write_dataset(samples, bad_record.path);
    std::ofstream out(bad_record.path, std::ios::app);
    out << "{\"broken\": true}\n";
  }
  try {
    read_dataset(bad_record.path);
    FAIL("expected Parse");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Parse);
    CHECK(e.message().find("line 3") != std::string::npos);
  }
}

TEST_CASE("split respects the fraction and stays disjoint") {
  GeneratorConfig c;
  c.node_count = 5;
  const std::vector<Sample> samples = gen_dataset(c, 10);
  std::vector<Sample> train, val;
  split_dataset(samples, 0.8, 17, train, val);
  CHECK(train.size() == 8);
  CHECK(val.size() == 2);

  // multiset union is the input
  int matched = 0;
  for (const Sample& s : samples) {
    const bool in_train = std::find(train.begin(), train.end(), s) != train.end();
    const bool in_val = std::find(val.begin(), val.end(), s) != val.end();
    CHECK(in_train != in_val);
    matched += (in_train || in_val) ? 1 : 0;
  }
  CHECK(matched == 10);

  // deterministic
  std::vector<Sample> train2, val2;
  split_dataset(samples, 0.8, 17, train2, val2);
  CHECK(train == train2);
  CHECK(val == val2);

  // a different seed shuffles differently
  std::vector<Sample> train3, val3;
  split_dataset(samples, 0.8, 18, train3, val3);
  CHECK((train != train3 || val != val3));
}

TEST_CASE("degenerate splits are rejected") {
  GeneratorConfig c;
  const std::vector<Sample> one = gen_dataset(c, 1);
  std::vector<Sample> train, val;
  CHECK_THROWS_AS(split_dataset(one, 0.8, 0, train, val), Error);
  try {
    split_dataset(one, 0.8, 0, train, val);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateSplit);
  }
  const std::vector<Sample> ten = gen_dataset(c, 10);
  CHECK_THROWS_AS(split_dataset(ten, 0.999, 0, train, val), Error);
  CHECK_THROWS_AS(split_dataset(ten, 1.2, 0, train, val), Error);
  CHECK_THROWS_AS(split_dataset({}, 0.8, 0, train, val), Error);
}

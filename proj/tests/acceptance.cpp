// Acceptance harness: exercises the end-to-end guarantees of the library and
// CLI, one [PASS]/[FAIL] line per criterion. Returns nonzero if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dwnet/checkpoint.hpp"
#include "dwnet/cli.hpp"
#include "dwnet/datagen.hpp"
#include "dwnet/error.hpp"
#include "dwnet/metrics.hpp"
#include "dwnet/model.hpp"
#include "dwnet/rng.hpp"
#include "dwnet/tape.hpp"

namespace fs = std::filesystem;
using namespace dwnet;

namespace {

const std::string kWorkDir = "/tmp/dwnet_acceptance";

int g_failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << id << ": " << name;
  if (!detail.empty()) std::cout << " (" << detail << ")";
  std::cout << std::endl;
  if (!ok) ++g_failures;
}

void run_criterion(int id, const std::string& name,
                   const std::function<std::pair<bool, std::string>()>& body) {
  bool ok = false;
  std::string detail;
  try {
    auto [o, d] = body();
    ok = o;
    detail = d;
  } catch (const std::exception& e) {
    ok = false;
    detail = std::string("exception: ") + e.what();
  }
  report(id, name, ok, detail);
}

int cli(const std::vector<std::string>& args, std::string* out_text = nullptr) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (out_text) *out_text = out.str() + err.str();
  return code;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::Io, "cannot read '" + path + "'");
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

double max_rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), 1e-12});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

std::vector<double> unit_features(int n, uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(static_cast<size_t>(n));
  for (double& v : x) v = 0.2 + 0.6 * rng.uniform();
  return x;
}

// ==== criterion 1: gradient integrity ====

std::pair<bool, std::string> criterion_gradcheck() {
  const auto start = std::chrono::steady_clock::now();
  std::string output;
  const int code = cli({"gradcheck", "--seed", "0", "--eps", "1e-6"}, &output);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool ok = code == 0 && seconds < 60.0;
  std::string line = output;
  if (!line.empty() && line.back() == '\n') line.pop_back();
  return {ok, line + ", " + fmt(seconds) + " s"};
}

// ==== criterion 2: message passing fidelity ====

std::pair<bool, std::string> criterion_fusion() {
  int checked_graphs = 0;
  for (uint64_t seed = 0; seed < 25; ++seed) {
    GeneratorConfig gc;
    gc.node_count = 5 + static_cast<int>(seed % 8);
    gc.seed = seed + 9000;
    const Sample s = gen_sample(gc);
    const HeteroGraph g = build_hetero_graph(s.topology, s.routing);
    const auto x_p = unit_features(g.n_paths, seed * 2 + 1);
    const auto x_l = unit_features(g.n_links, seed * 2 + 2);

    // lambda 0: link inputs must equal the plain per-link message sums
    ModelConfig zero;
    zero.state_dim = 16;
    zero.rounds = 4;
    zero.readout_hidden = 32;
    zero.lambda = 0.0;
    zero.dropout_p = 0.0;
    ModelParams zp = ModelParams::init(zero, seed + 1);
    Tape tape;
    ForwardTrace trace;
    build_forward(tape, g, x_p, x_l, zp, zero, RunMode::Eval, 0, &trace);
    for (int r = 0; r < zero.rounds; ++r) {
      const Tensor& m = trace.messages[static_cast<size_t>(r)];
      Tensor manual = Tensor::zeros(g.n_links, zero.state_dim);
      for (size_t row = 0; row < trace.message_index.size(); ++row) {
        const int link = trace.message_index[row].second;
        for (int col = 0; col < zero.state_dim; ++col)
          manual.at(link, col) += m.at(static_cast<int>(row), col);
      }
      if (!(trace.link_inputs[static_cast<size_t>(r)] == manual))
        return {false, "lambda=0 link input differs from message sum, graph seed " +
                           std::to_string(gc.seed)};
    }

    // secondary disabled: predictions ignore lambda and secondary weights
    ModelConfig off = zero;
    off.lambda = 0.1;
    off.secondary_enabled = false;
    ModelParams op = ModelParams::init(off, seed + 2);
    const auto base = forward(g, x_p, x_l, op, off, RunMode::Eval, 0);
    for (double lambda : {0.0, 0.1, 0.9}) {
      ModelConfig variant = off;
      variant.lambda = lambda;
      if (forward(g, x_p, x_l, op, variant, RunMode::Eval, 0) != base)
        return {false, "baseline prediction moved with lambda=" + fmt(lambda)};
    }
    ModelParams randomized = op;
    Rng wrng(seed + 3);
    for (auto& cell : randomized.secondary_cells)
      for (Tensor* t : {&cell.W_z, &cell.W_r, &cell.W_h, &cell.U_z, &cell.U_r,
                        &cell.U_h, &cell.b_z, &cell.b_r, &cell.b_h})
        for (double& v : t->data) v = wrng.uniform(-2.0, 2.0);
    if (forward(g, x_p, x_l, randomized, off, RunMode::Eval, 0) != base)
      return {false, "baseline prediction moved with randomized secondary weights"};
    ++checked_graphs;
  }
  return {true, std::to_string(checked_graphs) + " graphs, all equalities bitwise"};
}

// ==== criterion 3: structural invariants ====

std::vector<std::vector<int>> brute_force_neighbors(const RoutingScheme& routing) {
  const int n = routing.n_paths();
  std::vector<std::vector<int>> out(static_cast<size_t>(n));
  for (int p = 0; p < n; ++p) {
    std::set<int> links_p(routing.paths[static_cast<size_t>(p)].link_seq.begin(),
                          routing.paths[static_cast<size_t>(p)].link_seq.end());
    for (int q = 0; q < n; ++q) {
      if (p == q) continue;
      for (int l : routing.paths[static_cast<size_t>(q)].link_seq) {
        if (links_p.count(l)) {
          out[static_cast<size_t>(p)].push_back(q);
          break;
        }
      }
    }
  }
  return out;
}

std::pair<bool, std::string> criterion_structure() {
  // 1000 random graphs: incidence and neighbor invariants
  for (uint64_t seed = 0; seed < 1000; ++seed) {
    GeneratorConfig gc;
    gc.node_count = 5 + static_cast<int>(seed % 10);
    gc.seed = seed;
    const Sample s = gen_sample(gc);
    const HeteroGraph g = build_hetero_graph(s.topology, s.routing);

    int path_side = 0;
    for (int p = 0; p < g.n_paths; ++p) {
      const auto& links = g.path_links[static_cast<size_t>(p)];
      for (size_t pos = 0; pos < links.size(); ++pos) {
        const auto& lp = g.link_paths[static_cast<size_t>(links[pos])];
        if (std::find(lp.begin(), lp.end(),
                      std::pair<int, int>{p, static_cast<int>(pos)}) == lp.end())
          return {false, "incidence asymmetry at graph seed " + std::to_string(seed)};
        ++path_side;
      }
    }
    int link_side = 0;
    for (const auto& lp : g.link_paths) link_side += static_cast<int>(lp.size());
    if (link_side != path_side)
      return {false, "incidence count mismatch at graph seed " + std::to_string(seed)};

    const auto oracle = brute_force_neighbors(s.routing);
    for (int p = 0; p < g.n_paths; ++p) {
      if (g.path_neighbors[static_cast<size_t>(p)] != oracle[static_cast<size_t>(p)])
        return {false, "neighbor oracle mismatch at graph seed " + std::to_string(seed)};
      for (int q : g.path_neighbors[static_cast<size_t>(p)]) {
        const auto& back = g.path_neighbors[static_cast<size_t>(q)];
        if (std::find(back.begin(), back.end(), p) == back.end())
          return {false, "neighbor asymmetry at graph seed " + std::to_string(seed)};
      }
    }
  }

  // permutation equivariance of the forward pass, shipped default config
  ModelConfig mc;  // defaults: state_dim 32, rounds 8, readout 256
  ModelParams params = ModelParams::init(mc, 424242);
  double worst_equiv = 0.0;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    GeneratorConfig gc;
    gc.node_count = 6 + static_cast<int>(seed % 6);
    gc.seed = seed + 2000;
    const Sample s = gen_sample(gc);
    const int n_paths = s.routing.n_paths();
    const int n_links = s.topology.n_links();
    const auto x_p = unit_features(n_paths, seed * 2 + 11);
    const auto x_l = unit_features(n_links, seed * 2 + 12);
    const HeteroGraph g = build_hetero_graph(s.topology, s.routing);
    const auto y = forward(g, x_p, x_l, params, mc, RunMode::Eval, 0);

    Rng rng(seed + 5000);
    const std::vector<int> path_perm = rng.permutation(n_paths);
    const std::vector<int> link_perm = rng.permutation(n_links);
    Topology t2 = s.topology;
    for (int l = 0; l < n_links; ++l)
      t2.links[static_cast<size_t>(link_perm[static_cast<size_t>(l)])] =
          s.topology.links[static_cast<size_t>(l)];
    RoutingScheme r2;
    r2.paths.resize(static_cast<size_t>(n_paths));
    std::vector<double> x_p2(static_cast<size_t>(n_paths)), x_l2(static_cast<size_t>(n_links));
    for (int i = 0; i < n_paths; ++i) {
      Path path = s.routing.paths[static_cast<size_t>(i)];
      for (int& l : path.link_seq) l = link_perm[static_cast<size_t>(l)];
      r2.paths[static_cast<size_t>(path_perm[static_cast<size_t>(i)])] = std::move(path);
      x_p2[static_cast<size_t>(path_perm[static_cast<size_t>(i)])] = x_p[static_cast<size_t>(i)];
    }
    for (int l = 0; l < n_links; ++l)
      x_l2[static_cast<size_t>(link_perm[static_cast<size_t>(l)])] = x_l[static_cast<size_t>(l)];
    const auto y2 = forward(build_hetero_graph(t2, r2), x_p2, x_l2, params, mc,
                            RunMode::Eval, 0);
    std::vector<double> back(static_cast<size_t>(n_paths));
    for (int i = 0; i < n_paths; ++i)
      back[static_cast<size_t>(i)] = y2[static_cast<size_t>(path_perm[static_cast<size_t>(i)])];
    worst_equiv = std::max(worst_equiv, max_rel_diff(y, back));
  }
  if (worst_equiv > 1e-9)
    return {false, "permutation equivariance off by " + fmt(worst_equiv)};

  // union-batch forward equals the concatenated per-sample forwards
  double worst_union = 0.0;
  for (uint64_t batch = 0; batch < 5; ++batch) {
    std::vector<HeteroGraph> graphs;
    std::vector<double> expect, x_p_all, x_l_all;
    for (uint64_t k = 0; k < 4; ++k) {
      GeneratorConfig gc;
      gc.node_count = 5 + static_cast<int>((batch + k) % 7);
      gc.seed = 3000 + batch * 10 + k;
      const Sample s = gen_sample(gc);
      graphs.push_back(build_hetero_graph(s.topology, s.routing));
      const auto x_p = unit_features(graphs.back().n_paths, batch * 100 + k * 2);
      const auto x_l = unit_features(graphs.back().n_links, batch * 100 + k * 2 + 1);
      const auto y = forward(graphs.back(), x_p, x_l, params, mc, RunMode::Eval, 0);
      expect.insert(expect.end(), y.begin(), y.end());
      x_p_all.insert(x_p_all.end(), x_p.begin(), x_p.end());
      x_l_all.insert(x_l_all.end(), x_l.begin(), x_l.end());
    }
    const auto got =
        forward(union_batch(graphs), x_p_all, x_l_all, params, mc, RunMode::Eval, 0);
    worst_union = std::max(worst_union, max_rel_diff(expect, got));
  }
  if (worst_union > 1e-9) return {false, "union-batch forward off by " + fmt(worst_union)};

  return {true, "1000 graphs structural, equivariance " + fmt(worst_equiv) + ", union " +
                    fmt(worst_union)};
}

// ==== criterion 4: metric oracles ====

std::pair<bool, std::string> criterion_metrics() {
  if (mae({1.0, 2.0}, {2.0, 4.0}) != 1.5) return {false, "mae hand example not exact"};
  if (pcc({1.0, 2.0, 3.0}, {1.0, 3.0, 2.0}) != 0.5) return {false, "pcc hand example not exact"};
  if (mape({1.0, 2.0}, {2.0, 4.0}) != 0.5) return {false, "mape hand example not exact"};

  Rng rng(777);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + rng.uniform_int(60);
    std::vector<double> p(static_cast<size_t>(n)), a(static_cast<size_t>(n));
    for (double& v : p) v = rng.uniform(-5.0, 5.0);
    for (double& v : a) v = rng.uniform(0.5, 5.0) * (rng.bernoulli(0.5) ? 1.0 : -1.0);

    double s = 0.0;
    for (size_t i = 0; i < p.size(); ++i) s += std::fabs(p[i] - a[i]);
    worst = std::max(worst, std::fabs(mae(p, a) - s / n));
    s = 0.0;
    for (size_t i = 0; i < p.size(); ++i) s += std::fabs((p[i] - a[i]) / a[i]);
    worst = std::max(worst, std::fabs(mape(p, a) - s / n));

    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
      mx += p[i];
      my += a[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
      sxy += (p[i] - mx) * (a[i] - my);
      sxx += (p[i] - mx) * (p[i] - mx);
      syy += (a[i] - my) * (a[i] - my);
    }
    worst = std::max(worst, std::fabs(pcc(p, a) - sxy / (std::sqrt(sxx) * std::sqrt(syy))));
  }
  if (worst > 1e-12) return {false, "metric oracle deviation " + fmt(worst)};
  return {true, "100 random vectors within 1e-12, hand examples exact"};
}

// ==== criteria 5 and 6: learnability and the comparison protocol ====

struct LearnArtifacts {
  std::string fam8, fam14, held8, held14, unseen11;
  std::string dwnet_dir, baseline_dir;
  double train_seconds = 0.0;
  bool trained = false;
};

LearnArtifacts g_learn;

std::pair<bool, std::string> criterion_learnability() {
  const std::string d = kWorkDir + "/learn";
  fs::create_directories(d);
  g_learn.fam8 = d + "/fam8.jsonl";
  g_learn.fam14 = d + "/fam14.jsonl";
  g_learn.held8 = d + "/held8.jsonl";
  g_learn.held14 = d + "/held14.jsonl";
  g_learn.unseen11 = d + "/unseen11.jsonl";
  g_learn.dwnet_dir = d + "/run_dwnet";
  g_learn.baseline_dir = d + "/run_baseline";

  std::string out;
  if (cli({"generate", "--out", g_learn.fam8, "--count", "150", "--seed", "101",
           "--nodes", "8"}, &out) != 0)
    return {false, "generate fam8 failed: " + out};
  if (cli({"generate", "--out", g_learn.fam14, "--count", "150", "--seed", "202",
           "--nodes", "14"}, &out) != 0)
    return {false, "generate fam14 failed: " + out};
  if (cli({"generate", "--out", g_learn.held8, "--count", "30", "--seed", "303",
           "--nodes", "8"}, &out) != 0)
    return {false, "generate held8 failed: " + out};
  if (cli({"generate", "--out", g_learn.held14, "--count", "30", "--seed", "404",
           "--nodes", "14"}, &out) != 0)
    return {false, "generate held14 failed: " + out};
  if (cli({"generate", "--out", g_learn.unseen11, "--count", "30", "--seed", "505",
           "--nodes", "11"}, &out) != 0)
    return {false, "generate unseen11 failed: " + out};

  // 300 training samples across the 8-node and 14-node families; regularizer
  // and dropout tuned for a short CPU run and then frozen with these seeds.
  const auto start = std::chrono::steady_clock::now();
  const int code = cli({"train", "--data", g_learn.fam8, "--data", g_learn.fam14, "--out",
                        g_learn.dwnet_dir, "--target", "delay", "--max-steps", "1500",
                        "--eval-every", "100", "--seed", "1", "--l2", "0.0001",
                        "--dropout", "0"}, &out);
  g_learn.train_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (code != 0) return {false, "train failed: " + out};
  g_learn.trained = true;

  const std::string report_stem = d + "/learn_report";
  if (cli({"eval", "--checkpoint", g_learn.dwnet_dir + "/best.json", "--data",
           "held8=" + g_learn.held8, "--data", "held14=" + g_learn.held14, "--data",
           "unseen11=" + g_learn.unseen11, "--report", report_stem}, &out) != 0)
    return {false, "eval failed: " + out};

  const EvalReport report = read_report_json(report_stem + ".json");
  double held8_mape = -1.0, held14_mape = -1.0, unseen_mape = -1.0;
  for (const EvalEntry& e : report.entries) {
    if (e.dataset == "held8") held8_mape = e.mape;
    if (e.dataset == "held14") held14_mape = e.mape;
    if (e.dataset == "unseen11") unseen_mape = e.mape;
  }
  const bool time_ok = g_learn.train_seconds < 900.0;
  const bool held_ok = held8_mape >= 0 && held14_mape >= 0 && held8_mape <= 0.15 &&
                       held14_mape <= 0.15;
  const bool unseen_ok = unseen_mape >= 0 && unseen_mape <= 0.30;
  const std::string detail = "1500 steps in " + fmt(g_learn.train_seconds) +
                             " s; held-out MAPE " + fmt(held8_mape) + "/" + fmt(held14_mape) +
                             " vs 0.15; unseen MAPE " + fmt(unseen_mape) + " vs 0.30";
  return {time_ok && held_ok && unseen_ok, detail};
}

std::pair<bool, std::string> criterion_comparison() {
  if (!g_learn.trained) return {false, "skipped: learnability training unavailable"};
  std::string out;
  if (cli({"train", "--data", g_learn.fam8, "--data", g_learn.fam14, "--out",
           g_learn.baseline_dir, "--target", "delay", "--baseline", "--max-steps", "1500",
           "--eval-every", "100", "--seed", "1", "--l2", "0.0001", "--dropout", "0"},
          &out) != 0)
    return {false, "baseline train failed: " + out};

  const std::string stem = kWorkDir + "/learn/comparison_report";
  if (cli({"eval", "--checkpoint", g_learn.dwnet_dir + "/best.json", "--checkpoint",
           g_learn.baseline_dir + "/best.json", "--data", "held8=" + g_learn.held8,
           "--data", "held14=" + g_learn.held14, "--data", "unseen11=" + g_learn.unseen11,
           "--report", stem}, &out) != 0)
    return {false, "comparison eval failed: " + out};

  const EvalReport report = read_report_json(stem + ".json");
  if (report.models.size() != 2) return {false, "report does not list both models"};
  std::set<std::pair<std::string, std::string>> combos;
  for (const EvalEntry& e : report.entries) combos.insert({e.model_id, e.dataset});
  if (combos.size() != 6)
    return {false, "expected 2 models x 3 datasets, got " +
                       std::to_string(combos.size()) + " combinations"};
  std::string unseen_note;
  for (const std::string& note : report.notes)
    if (note.find("unseen11") != std::string::npos) unseen_note = note;
  if (unseen_note.empty()) return {false, "no comparison note for the unseen dataset"};
  return {true, "directional finding recorded: " + unseen_note};
}

// ==== criterion 7: reproducibility ====

std::pair<bool, std::string> criterion_reproducibility() {
  // identical commands, identical paths, twice in a row; artifact bytes are
  // captured between runs and compared afterwards
  const std::string d = kWorkDir + "/repro";
  fs::create_directories(d);
  setenv("DWNET_TIMESTAMP", "2026-01-01T00:00:00Z", 1);

  const std::vector<std::string> artifacts = {
      d + "/data.jsonl",      d + "/run/history.csv", d + "/run/best.json",
      d + "/run/latest.json", d + "/report.json",     d + "/report.txt",
      d + "/report.csv",
  };
  std::vector<std::string> first_bytes;
  std::string out;
  for (int run = 1; run <= 2; ++run) {
    if (cli({"generate", "--out", d + "/data.jsonl", "--count", "20", "--seed", "77",
             "--nodes", "6"}, &out) != 0)
      return {false, "generate failed: " + out};
    if (cli({"train", "--data", d + "/data.jsonl", "--out", d + "/run", "--max-steps",
             "30", "--eval-every", "10", "--seed", "5", "--state-dim", "16", "--rounds",
             "3", "--readout-hidden", "32"}, &out) != 0)
      return {false, "train failed: " + out};
    if (cli({"eval", "--checkpoint", d + "/run/best.json", "--data",
             "data=" + d + "/data.jsonl", "--report", d + "/report"}, &out) != 0)
      return {false, "eval failed: " + out};
    if (run == 1)
      for (const std::string& path : artifacts) first_bytes.push_back(slurp(path));
  }
  unsetenv("DWNET_TIMESTAMP");

  for (size_t i = 0; i < artifacts.size(); ++i) {
    if (slurp(artifacts[i]) != first_bytes[i])
      return {false, fs::path(artifacts[i]).filename().string() + " differs between runs"};
  }
  return {true, std::to_string(artifacts.size()) + " artifacts byte-identical across reruns"};
}

}  // namespace

int main() {
  fs::remove_all(kWorkDir);
  fs::create_directories(kWorkDir);

  run_criterion(1, "gradient integrity", criterion_gradcheck);
  run_criterion(2, "message passing fidelity", criterion_fusion);
  run_criterion(3, "structural invariants", criterion_structure);
  run_criterion(4, "metric oracles", criterion_metrics);
  run_criterion(7, "reproducibility", criterion_reproducibility);
  run_criterion(5, "learnability", criterion_learnability);
  run_criterion(6, "comparison protocol", criterion_comparison);

  if (g_failures == 0) {
    std::cout << "all criteria passed" << std::endl;
    return 0;
  }
  std::cout << g_failures << " criterion(s) failed" << std::endl;
  return 1;
}

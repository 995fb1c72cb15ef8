#include "dwnet/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <utility>

#include <CLI11.hpp>

#include "dwnet/checkpoint.hpp"
#include "dwnet/datagen.hpp"
#include "dwnet/error.hpp"
#include "dwnet/metrics.hpp"
#include "dwnet/model.hpp"
#include "dwnet/rng.hpp"
#include "dwnet/training.hpp"

namespace dwnet::cli {
namespace {

namespace fs = std::filesystem;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DivergedLoss:
    case ErrorKind::NonFinite:
    case ErrorKind::DegenerateEpsilon:
      return 3;
    default:
      return 2;
  }
}

// ==== config keys ====

struct RunConfig {
  GeneratorConfig gen;
  ModelConfig model;
  TrainConfig train;
  double train_fraction = 0.8;
};

int parse_int(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    const int v = std::stoi(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    raise(ErrorKind::InvalidConfig, "key '" + key + "': cannot parse '" + value + "' as integer");
  }
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    const uint64_t v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    raise(ErrorKind::InvalidConfig, "key '" + key + "': cannot parse '" + value + "' as integer");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    raise(ErrorKind::InvalidConfig, "key '" + key + "': cannot parse '" + value + "' as number");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  raise(ErrorKind::InvalidConfig, "key '" + key + "': cannot parse '" + value + "' as bool");
}

std::vector<double> parse_double_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream stream(value);
  std::string item;
  while (std::getline(stream, item, ',')) out.push_back(parse_double(key, item));
  if (out.empty()) raise(ErrorKind::InvalidConfig, "key '" + key + "': empty list");
  return out;
}

void apply_key(RunConfig& rc, const std::string& key, const std::string& value) {
  if (key == "gen.node_count") rc.gen.node_count = parse_int(key, value);
  else if (key == "gen.extra_edge_prob") rc.gen.extra_edge_prob = parse_double(key, value);
  else if (key == "gen.capacity_choices") rc.gen.capacity_choices = parse_double_list(key, value);
  else if (key == "gen.traffic_intensity") rc.gen.traffic_intensity = parse_double(key, value);
  else if (key == "gen.pair_fraction") rc.gen.pair_fraction = parse_double(key, value);
  else if (key == "gen.seed") rc.gen.seed = parse_u64(key, value);
  else if (key == "model.state_dim") rc.model.state_dim = parse_int(key, value);
  else if (key == "model.rounds") rc.model.rounds = parse_int(key, value);
  else if (key == "model.lambda") rc.model.lambda = parse_double(key, value);
  else if (key == "model.readout_hidden") rc.model.readout_hidden = parse_int(key, value);
  else if (key == "model.dropout_p") rc.model.dropout_p = parse_double(key, value);
  else if (key == "model.secondary_enabled") rc.model.secondary_enabled = parse_bool(key, value);
  else if (key == "model.include_self_in_neighbors")
    rc.model.include_self_in_neighbors = parse_bool(key, value);
  else if (key == "model.target") rc.model.target = target_from_name(value);
  else if (key == "model.path_cell") {
    if (value == "gru") rc.model.path_cell = PathCellKind::Gru;
    else if (value == "tanh") rc.model.path_cell = PathCellKind::Tanh;
    else raise(ErrorKind::InvalidConfig, "key '" + key + "': expected gru or tanh");
  } else if (key == "model.per_round_weights") rc.model.per_round_weights = parse_bool(key, value);
  else if (key == "train.batch_size") rc.train.batch_size = parse_int(key, value);
  else if (key == "train.learning_rate") rc.train.learning_rate = parse_double(key, value);
  else if (key == "train.l2_coeff") rc.train.l2_coeff = parse_double(key, value);
  else if (key == "train.max_steps") rc.train.max_steps = parse_int(key, value);
  else if (key == "train.eval_every") rc.train.eval_every = parse_int(key, value);
  else if (key == "train.seed") rc.train.seed = parse_u64(key, value);
  else if (key == "train.checkpoint_dir") rc.train.checkpoint_dir = value;
  else if (key == "train.train_fraction") rc.train_fraction = parse_double(key, value);
  else raise(ErrorKind::InvalidConfig, "unknown config key '" + key + "'");
}

std::string trim(const std::string& s) {
  const size_t begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const size_t end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

void apply_key_value(RunConfig& rc, const std::string& entry, const std::string& origin) {
  const size_t eq = entry.find('=');
  if (eq == std::string::npos)
    raise(ErrorKind::InvalidConfig, origin + ": expected key=value, got '" + entry + "'");
  apply_key(rc, trim(entry.substr(0, eq)), trim(entry.substr(eq + 1)));
}

void apply_config_file(RunConfig& rc, const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::Io, "cannot open config file '" + path + "'");
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    apply_key_value(rc, line, "config '" + path + "' line " + std::to_string(line_no));
  }
}

std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_g6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string effective_config_text(const RunConfig& rc) {
  std::ostringstream out;
  out << "gen.node_count=" << rc.gen.node_count << '\n';
  out << "gen.extra_edge_prob=" << fmt_g17(rc.gen.extra_edge_prob) << '\n';
  out << "gen.capacity_choices=";
  for (size_t i = 0; i < rc.gen.capacity_choices.size(); ++i)
    out << (i ? "," : "") << fmt_g17(rc.gen.capacity_choices[i]);
  out << '\n';
  out << "gen.traffic_intensity=" << fmt_g17(rc.gen.traffic_intensity) << '\n';
  out << "gen.pair_fraction=" << fmt_g17(rc.gen.pair_fraction) << '\n';
  out << "gen.seed=" << rc.gen.seed << '\n';
  out << "model.state_dim=" << rc.model.state_dim << '\n';
  out << "model.rounds=" << rc.model.rounds << '\n';
  out << "model.lambda=" << fmt_g17(rc.model.lambda) << '\n';
  out << "model.readout_hidden=" << rc.model.readout_hidden << '\n';
  out << "model.dropout_p=" << fmt_g17(rc.model.dropout_p) << '\n';
  out << "model.secondary_enabled=" << (rc.model.secondary_enabled ? "true" : "false") << '\n';
  out << "model.include_self_in_neighbors="
      << (rc.model.include_self_in_neighbors ? "true" : "false") << '\n';
  out << "model.target=" << target_name(rc.model.target) << '\n';
  out << "model.path_cell=" << (rc.model.path_cell == PathCellKind::Gru ? "gru" : "tanh") << '\n';
  out << "model.per_round_weights=" << (rc.model.per_round_weights ? "true" : "false") << '\n';
  out << "train.batch_size=" << rc.train.batch_size << '\n';
  out << "train.learning_rate=" << fmt_g17(rc.train.learning_rate) << '\n';
  out << "train.l2_coeff=" << fmt_g17(rc.train.l2_coeff) << '\n';
  out << "train.max_steps=" << rc.train.max_steps << '\n';
  out << "train.eval_every=" << rc.train.eval_every << '\n';
  out << "train.seed=" << rc.train.seed << '\n';
  out << "train.checkpoint_dir=" << rc.train.checkpoint_dir << '\n';
  out << "train.train_fraction=" << fmt_g17(rc.train_fraction) << '\n';
  return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorKind::Io, "cannot open '" + path + "' for writing");
  out << content;
  out.flush();
  if (!out) raise(ErrorKind::Io, "write to '" + path + "' failed");
}

bool verbose_enabled() {
  const char* v = std::getenv("DWNET_VERBOSE");
  return v != nullptr && *v != '\0' && std::string(v) != "0";
}

// ==== gradcheck instance ====

/// Fixed 4-node/4-link/3-path instance exercising shared links, a
/// non-trivial neighbor set and multi-hop walks.
double run_gradcheck(uint64_t seed, double eps) {
  Topology topology;
  topology.node_count = 4;
  topology.links = {Link{0, 1, 10.0}, Link{1, 2, 20.0}, Link{2, 3, 10.0}, Link{0, 2, 40.0}};
  RoutingScheme routing;
  routing.paths = {Path{0, 2, {0, 1}}, Path{0, 3, {3, 2}}, Path{1, 2, {1}}};
  const HeteroGraph graph = build_hetero_graph(topology, routing);

  ModelConfig config;
  config.state_dim = 6;
  config.rounds = 3;
  config.lambda = 0.1;
  config.readout_hidden = 16;
  config.dropout_p = 0.0;  // finite differences need a deterministic loss
  config.secondary_enabled = true;

  ModelParams params = ModelParams::init(config, Rng::derive(seed, 1));
  Rng rng(Rng::derive(seed, 2));
  std::vector<double> x_p(3), x_l(4);
  for (double& v : x_p) v = 0.2 + 0.6 * rng.uniform();
  for (double& v : x_l) v = 0.25 + 0.75 * rng.uniform();
  std::vector<double> labels(3);
  for (double& v : labels) v = 0.5 * rng.normal();
  const double l2_coeff = 0.01;

  auto loss_fn = [&]() -> double {
    Tape tape;
    ForwardBuild build =
        build_forward(tape, graph, x_p, x_l, params, config, RunMode::Eval, 0);
    return tape.value(loss_node(tape, build, labels, l2_coeff)).data[0];
  };
  auto grad_fn = [&]() -> std::vector<Tensor> {
    Tape tape;
    ForwardBuild build =
        build_forward(tape, graph, x_p, x_l, params, config, RunMode::Eval, 0);
    tape.backward(loss_node(tape, build, labels, l2_coeff));
    std::vector<Tensor> grads;
    grads.reserve(build.param_nodes.size());
    for (Tape::NodeId id : build.param_nodes) grads.push_back(tape.grad(id));
    return grads;
  };

  std::vector<Tensor*> tensors;
  for (auto& [name, tensor] : params.named_tensors()) tensors.push_back(tensor);
  GradCheckOptions options;
  options.eps = eps;
  options.coords_per_tensor = 64;
  options.seed = Rng::derive(seed, 3);
  return gradient_check(loss_fn, grad_fn, tensors, options);
}

// ==== dataset helpers ====

std::string path_stem(const std::string& path) {
  const std::string stem = fs::path(path).stem().string();
  return stem.empty() ? path : stem;
}

std::vector<Sample> read_all(const std::vector<std::string>& paths) {
  std::vector<Sample> all;
  for (const std::string& p : paths) {
    std::vector<Sample> samples = read_dataset(p);
    all.insert(all.end(), std::make_move_iterator(samples.begin()),
               std::make_move_iterator(samples.end()));
  }
  return all;
}

/// Distinct, human-readable model ids for a set of checkpoint paths: the
/// file stem, widened to parent/stem (then #index) on collision.
std::vector<std::string> model_ids(const std::vector<std::string>& paths) {
  std::vector<std::string> ids;
  for (const std::string& p : paths) ids.push_back(path_stem(p));
  auto has_duplicates = [](const std::vector<std::string>& v) {
    std::vector<std::string> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    return std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
  };
  if (has_duplicates(ids)) {
    for (size_t i = 0; i < paths.size(); ++i) {
      const std::string parent = fs::path(paths[i]).parent_path().filename().string();
      if (!parent.empty()) ids[i] = parent + "/" + ids[i];
    }
  }
  if (has_duplicates(ids))
    for (size_t i = 0; i < ids.size(); ++i) ids[i] += "#" + std::to_string(i);
  return ids;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Per-path delay and jitter prediction on communication networks"};
  app.name("dwnet");
  app.require_subcommand(1);

  // generate
  auto* g_cmd = app.add_subcommand("generate", "Generate a labeled synthetic dataset");
  std::string g_config, g_out;
  int g_count = 0;
  std::vector<std::string> g_set;
  std::optional<int> g_nodes;
  std::optional<double> g_extra, g_intensity, g_pairfrac;
  std::optional<std::string> g_caps;
  std::optional<uint64_t> g_seed;
  g_cmd->add_option("--config", g_config, "Config file with dotted keys");
  g_cmd->add_option("--set", g_set, "Config override, key=value")->type_name("KEY=VALUE");
  g_cmd->add_option("--out", g_out, "Output dataset file")->required();
  g_cmd->add_option("--count", g_count, "Number of samples")->required()
      ->check(CLI::NonNegativeNumber);
  g_cmd->add_option("--seed", g_seed, "Generator seed (gen.seed)");
  g_cmd->add_option("--nodes", g_nodes, "Node count (gen.node_count)");
  g_cmd->add_option("--extra-edge-prob", g_extra, "Probability per non-tree edge");
  g_cmd->add_option("--capacities", g_caps, "Comma-separated capacity choices");
  g_cmd->add_option("--intensity", g_intensity, "Target max link utilization");
  g_cmd->add_option("--pair-fraction", g_pairfrac, "Fraction of ordered pairs routed");

  // train
  auto* t_cmd = app.add_subcommand("train", "Train a model on generated datasets");
  std::string t_config, t_out;
  std::vector<std::string> t_set, t_data, t_val;
  bool t_baseline = false;
  std::optional<std::string> t_target, t_path_cell;
  std::optional<int> t_max_steps, t_batch, t_eval_every, t_state_dim, t_rounds, t_readout;
  std::optional<double> t_lr, t_l2, t_lambda, t_dropout, t_fraction;
  std::optional<uint64_t> t_seed;
  bool t_per_round = false, t_include_self = false;
  t_cmd->add_option("--config", t_config, "Config file with dotted keys");
  t_cmd->add_option("--set", t_set, "Config override, key=value")->type_name("KEY=VALUE");
  t_cmd->add_option("--data", t_data, "Training dataset file (repeatable; one family per file)")
      ->required();
  t_cmd->add_option("--val", t_val, "Validation dataset file (repeatable); omitted: per-file split");
  t_cmd->add_option("--out", t_out, "Output directory (checkpoints, history, config)")->required();
  t_cmd->add_option("--target", t_target, "delay or jitter")
      ->check(CLI::IsMember({"delay", "jitter"}));
  t_cmd->add_flag("--baseline", t_baseline, "Disable the secondary path state (ablation baseline)");
  t_cmd->add_option("--max-steps", t_max_steps, "Optimizer steps");
  t_cmd->add_option("--batch-size", t_batch, "Samples per training batch");
  t_cmd->add_option("--lr", t_lr, "Adam learning rate");
  t_cmd->add_option("--l2", t_l2, "L2 penalty coefficient");
  t_cmd->add_option("--eval-every", t_eval_every, "Validation cadence in steps");
  t_cmd->add_option("--seed", t_seed, "Training seed (train.seed)");
  t_cmd->add_option("--state-dim", t_state_dim, "Hidden state width");
  t_cmd->add_option("--rounds", t_rounds, "Message passing rounds");
  t_cmd->add_option("--lambda", t_lambda, "Secondary fusion weight");
  t_cmd->add_option("--readout-hidden", t_readout, "Readout hidden width");
  t_cmd->add_option("--dropout", t_dropout, "Readout dropout probability");
  t_cmd->add_option("--path-cell", t_path_cell, "gru or tanh")
      ->check(CLI::IsMember({"gru", "tanh"}));
  t_cmd->add_flag("--per-round-weights", t_per_round, "Separate weights per round");
  t_cmd->add_flag("--include-self-in-neighbors", t_include_self,
                  "Count a path as its own neighbor");
  t_cmd->add_option("--train-fraction", t_fraction, "Per-file train share when --val is omitted");

  // eval
  auto* e_cmd = app.add_subcommand("eval", "Evaluate checkpoints on named datasets");
  std::vector<std::string> e_checkpoints, e_data;
  std::optional<std::string> e_report;
  std::optional<int> e_batch;
  e_cmd->add_option("--checkpoint", e_checkpoints, "Checkpoint file (repeatable)")->required();
  e_cmd->add_option("--data", e_data, "Dataset as name=path (repeatable; name defaults to stem)")
      ->required();
  e_cmd->add_option("--report", e_report, "Report stem; writes STEM.json, STEM.txt, STEM.csv");
  e_cmd->add_option("--batch-size", e_batch, "Samples per evaluation union");

  // predict
  auto* p_cmd = app.add_subcommand("predict", "Emit per-path predictions for a dataset");
  std::string p_checkpoint, p_data;
  std::optional<std::string> p_out;
  int p_mc = 0;
  std::optional<uint64_t> p_seed;
  p_cmd->add_option("--checkpoint", p_checkpoint, "Checkpoint file")->required();
  p_cmd->add_option("--data", p_data, "Dataset file")->required();
  p_cmd->add_option("--mc", p_mc, "Dropout samples; 0 = deterministic eval-mode prediction")
      ->check(CLI::NonNegativeNumber);
  p_cmd->add_option("--seed", p_seed, "Sampling seed for --mc");
  p_cmd->add_option("--out", p_out, "Output CSV file (default: stdout)");

  // gradcheck
  auto* c_cmd = app.add_subcommand("gradcheck", "Finite-difference check of the full model gradient");
  double c_eps = 1e-6;
  std::optional<uint64_t> c_seed;
  c_cmd->add_option("--seed", c_seed, "Instance seed");
  c_cmd->add_option("--eps", c_eps, "Finite difference step (> 0)");

  try {
    std::vector<const char*> argv;
    argv.push_back("dwnet");
    for (const std::string& a : args) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (g_cmd->parsed()) {
      RunConfig rc;
      if (!g_config.empty()) apply_config_file(rc, g_config);
      for (const std::string& kv : g_set) apply_key_value(rc, kv, "--set");
      if (g_seed) rc.gen.seed = *g_seed;
      if (g_nodes) rc.gen.node_count = *g_nodes;
      if (g_extra) rc.gen.extra_edge_prob = *g_extra;
      if (g_caps) rc.gen.capacity_choices = parse_double_list("gen.capacity_choices", *g_caps);
      if (g_intensity) rc.gen.traffic_intensity = *g_intensity;
      if (g_pairfrac) rc.gen.pair_fraction = *g_pairfrac;

      const std::vector<Sample> samples = gen_dataset(rc.gen, g_count);
      write_dataset(samples, g_out);
      write_text_file(g_out + ".config.txt", effective_config_text(rc));

      size_t total_paths = 0;
      double max_util = 0.0;
      for (const Sample& s : samples) {
        total_paths += s.routing.paths.size();
        const std::vector<double> loads = link_loads(s.topology, s.routing, s.traffic);
        for (size_t l = 0; l < loads.size(); ++l)
          max_util = std::max(max_util, loads[l] / s.topology.links[l].capacity);
      }
      out << "wrote " << samples.size() << " samples to " << g_out;
      if (!samples.empty())
        out << " (mean paths/sample "
            << fmt_g6(static_cast<double>(total_paths) / static_cast<double>(samples.size()))
            << ", max utilization " << fmt_g6(max_util) << ")";
      out << '\n';
      return 0;
    }

    if (t_cmd->parsed()) {
      RunConfig rc;
      if (!t_config.empty()) apply_config_file(rc, t_config);
      for (const std::string& kv : t_set) apply_key_value(rc, kv, "--set");
      if (t_target) rc.model.target = target_from_name(*t_target);
      if (t_baseline) rc.model.secondary_enabled = false;
      if (t_max_steps) rc.train.max_steps = *t_max_steps;
      if (t_batch) rc.train.batch_size = *t_batch;
      if (t_lr) rc.train.learning_rate = *t_lr;
      if (t_l2) rc.train.l2_coeff = *t_l2;
      if (t_eval_every) rc.train.eval_every = *t_eval_every;
      if (t_seed) rc.train.seed = *t_seed;
      if (t_state_dim) rc.model.state_dim = *t_state_dim;
      if (t_rounds) rc.model.rounds = *t_rounds;
      if (t_lambda) rc.model.lambda = *t_lambda;
      if (t_readout) rc.model.readout_hidden = *t_readout;
      if (t_dropout) rc.model.dropout_p = *t_dropout;
      if (t_path_cell)
        rc.model.path_cell = *t_path_cell == "gru" ? PathCellKind::Gru : PathCellKind::Tanh;
      if (t_per_round) rc.model.per_round_weights = true;
      if (t_include_self) rc.model.include_self_in_neighbors = true;
      if (t_fraction) rc.train_fraction = *t_fraction;
      rc.train.checkpoint_dir = t_out;

      std::vector<Sample> train_set, val_set;
      if (!t_val.empty()) {
        train_set = read_all(t_data);
        val_set = read_all(t_val);
      } else {
        // One dataset file per topology family: split each file on its own
        // so train and validation cover every family.
        for (size_t i = 0; i < t_data.size(); ++i) {
          std::vector<Sample> tr, va;
          split_dataset(read_dataset(t_data[i]), rc.train_fraction,
                        Rng::derive(rc.train.seed, 100 + i), tr, va);
          train_set.insert(train_set.end(), std::make_move_iterator(tr.begin()),
                           std::make_move_iterator(tr.end()));
          val_set.insert(val_set.end(), std::make_move_iterator(va.begin()),
                         std::make_move_iterator(va.end()));
        }
      }

      if (verbose_enabled())
        rc.train.progress = [&err](const HistoryRow& row) {
          err << "step " << row.step << " loss " << fmt_g6(row.train_loss);
          if (row.has_val) err << " val_mape " << fmt_g6(row.val_mape);
          err << '\n';
        };

      const TrainResult result = train(train_set, val_set, rc.model, rc.train);
      fs::create_directories(t_out);
      write_history_csv(result.history, t_out + "/history.csv");
      write_text_file(t_out + "/effective_config.txt", effective_config_text(rc));

      out << "trained " << rc.train.max_steps << " steps on " << train_set.size()
          << " samples (" << val_set.size() << " validation)\n";
      if (!result.history.empty()) {
        out << "final train loss " << fmt_g6(result.history.back().train_loss) << '\n';
        if (result.has_best)
          out << "best val MAPE " << fmt_g6(result.best_val_mape) << " at step "
              << result.best_step << '\n';
      }
      out << "checkpoints: " << t_out << "/latest.json, " << t_out << "/best.json\n";
      return 0;
    }

    if (e_cmd->parsed()) {
      std::vector<NamedDataset> datasets;
      for (const std::string& entry : e_data) {
        const size_t eq = entry.find('=');
        NamedDataset ds;
        if (eq == std::string::npos) {
          ds.name = path_stem(entry);
          ds.samples = read_dataset(entry);
        } else {
          ds.name = entry.substr(0, eq);
          ds.samples = read_dataset(entry.substr(eq + 1));
        }
        datasets.push_back(std::move(ds));
      }
      const std::vector<std::string> ids = model_ids(e_checkpoints);
      std::vector<EvalReport> reports;
      for (size_t i = 0; i < e_checkpoints.size(); ++i) {
        const Checkpoint ck = load_checkpoint(e_checkpoints[i]);
        reports.push_back(evaluate(ck.params, ck.config, datasets, ck.normalizer, ids[i],
                                   e_batch.value_or(32), e_checkpoints[i],
                                   config_hash(ck.config)));
      }
      EvalReport merged = merge_reports(reports);
      add_comparison_notes(merged);
      out << report_table(merged);
      if (e_report) {
        write_report_json(merged, *e_report + ".json");
        write_report_table(merged, *e_report + ".txt");
        write_report_csv(merged, *e_report + ".csv");
        out << "report written to " << *e_report << ".{json,txt,csv}\n";
      }
      return 0;
    }

    if (p_cmd->parsed()) {
      const Checkpoint ck = load_checkpoint(p_checkpoint);
      const std::vector<Sample> samples = read_dataset(p_data);
      std::ostringstream csv;
      if (p_mc == 0) {
        csv << "sample,path,prediction\n";
        const std::vector<double> pred =
            predict_dataset(samples, ck.params, ck.config, ck.normalizer);
        size_t row = 0;
        for (size_t si = 0; si < samples.size(); ++si)
          for (size_t pi = 0; pi < samples[si].routing.paths.size(); ++pi)
            csv << si << ',' << pi << ',' << fmt_g17(pred[row++]) << '\n';
      } else {
        csv << "sample,path,prediction,std\n";
        HeteroGraphOptions options;
        options.include_self_in_neighbors = ck.config.include_self_in_neighbors;
        for (size_t si = 0; si < samples.size(); ++si) {
          const Sample& s = samples[si];
          const HeteroGraph graph = build_hetero_graph(s.topology, s.routing, options);
          std::vector<double> x_p, x_l;
          for (double d : s.traffic.demand) x_p.push_back(d / ck.normalizer.feature_scale);
          for (const Link& l : s.topology.links)
            x_l.push_back(l.capacity / ck.normalizer.feature_scale);
          const McSummary mc = mc_predict(graph, x_p, x_l, ck.params, ck.config, p_mc,
                                          Rng::derive(p_seed.value_or(0), si));
          for (size_t pi = 0; pi < mc.mean.size(); ++pi)
            csv << si << ',' << pi << ',' << fmt_g17(ck.normalizer.denormalize(mc.mean[pi]))
                << ',' << fmt_g17(mc.stddev[pi] * ck.normalizer.label_std) << '\n';
        }
      }
      if (p_out)
        write_text_file(*p_out, csv.str());
      else
        out << csv.str();
      return 0;
    }

    if (c_cmd->parsed()) {
      if (!(c_eps > 0.0)) {
        err << "error: --eps must be > 0\n";
        return 1;
      }
      const double max_err = run_gradcheck(c_seed.value_or(0), c_eps);
      char buf[64];
      std::snprintf(buf, sizeof buf, "gradcheck max relative error = %.6e (threshold 1e-04)\n",
                    max_err);
      out << buf;
      if (max_err < 1e-4) return 0;
      err << "error: gradient check failed\n";
      return 3;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace dwnet::cli

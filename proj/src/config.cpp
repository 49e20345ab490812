#include "fedscore/config.hpp"

#include <fstream>
#include <initializer_list>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"

namespace fedscore {
namespace {

using json = nlohmann::json;

[[noreturn]] void invalid(const std::string& path, const std::string& msg) {
  throw Error(ErrorKind::ConfigInvalid, path + ": " + msg);
}

/// A JSON object plus its key path, for error messages.
class Node {
 public:
  Node(const json& value, std::string path) : value_(value), path_(std::move(path)) {
    if (!value_.is_object()) invalid(path_, "expected an object");
  }

  const std::string& path() const { return path_; }
  bool has(const std::string& key) const { return value_.contains(key); }
  std::string child_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void allow_only(std::initializer_list<const char*> keys) const {
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& item : value_.items()) {
      if (allowed.count(item.key()) == 0) invalid(child_path(item.key()), "unknown key");
    }
  }

  const json& raw(const std::string& key) const {
    if (!has(key)) invalid(child_path(key), "required key is missing");
    return value_.at(key);
  }

  Node object(const std::string& key) const { return Node(raw(key), child_path(key)); }

  double number(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_number()) invalid(child_path(key), "expected a number");
    return v.get<double>();
  }
  double number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

  std::int64_t integer(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_number_integer()) invalid(child_path(key), "expected an integer");
    return v.get<std::int64_t>();
  }
  std::int64_t integer(const std::string& key, std::int64_t fallback) const {
    return has(key) ? integer(key) : fallback;
  }
  std::size_t count(const std::string& key) const {
    const std::int64_t v = integer(key);
    if (v < 0) invalid(child_path(key), "must be >= 0");
    return static_cast<std::size_t>(v);
  }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_boolean()) invalid(child_path(key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_string()) invalid(child_path(key), "expected a string");
    return v.get<std::string>();
  }
  std::string string(const std::string& key, const std::string& fallback) const {
    return has(key) ? string(key) : fallback;
  }

  const json& array(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_array()) invalid(child_path(key), "expected an array");
    return v;
  }

 private:
  const json& value_;
  std::string path_;
};

std::vector<std::string> string_list(const json& v, const std::string& path) {
  if (!v.is_array()) invalid(path, "expected an array of strings");
  std::vector<std::string> out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (!v[k].is_string()) invalid(path + "[" + std::to_string(k) + "]", "expected a string");
    out.push_back(v[k].get<std::string>());
  }
  return out;
}

std::vector<double> number_list(const json& v, const std::string& path) {
  if (!v.is_array()) invalid(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (!v[k].is_number()) invalid(path + "[" + std::to_string(k) + "]", "expected a number");
    out.push_back(v[k].get<double>());
  }
  return out;
}

LabelSet resolve_labels(const LabelSpace& space, const std::vector<std::string>& names, const std::string& path) {
  try {
    return space.resolve(names);
  } catch (const Error& e) {
    invalid(path, e.message());
  }
}

LabelSpace parse_label_space(const Node& root) {
  const auto names = string_list(root.raw("labels"), root.child_path("labels"));
  try {
    return LabelSpace(names);
  } catch (const Error& e) {
    invalid(root.child_path("labels"), e.message());
  }
}

SyntheticSpec parse_synthetic(const Node& node, const LabelSpace& space) {
  SyntheticSpec spec;
  spec.n_features = node.count("n_features");
  const std::size_t default_pool = node.has("pool_size") ? node.count("pool_size") : 0;
  const Node dists = node.object("distributions");
  spec.labels.resize(space.size());
  for (std::size_t k = 0; k < space.size(); ++k) {
    const std::string& name = space.names()[k];
    if (!dists.has(name)) invalid(dists.child_path(name), "missing distribution for label");
  }
  const json& raw_dists = node.raw("distributions");
  for (const auto& item : raw_dists.items()) {
    if (!space.contains(item.key())) invalid(dists.child_path(item.key()), "label not in 'labels'");
  }
  for (std::size_t k = 0; k < space.size(); ++k) {
    const std::string& name = space.names()[k];
    const Node d = dists.object(name);
    d.allow_only({"mean", "stddev", "pool_size"});
    LabelDistribution& out = spec.labels[k];
    out.mean = number_list(d.raw("mean"), d.child_path("mean"));
    const json& sd = d.raw("stddev");
    if (sd.is_number()) {
      out.stddev.assign(spec.n_features, sd.get<double>());
    } else {
      out.stddev = number_list(sd, d.child_path("stddev"));
    }
    out.pool_size = d.has("pool_size") ? d.count("pool_size") : default_pool;
  }
  try {
    spec.validate(space);
  } catch (const Error& e) {
    invalid(node.path(), e.message());
  }
  return spec;
}

void apply_train_overrides(const Node& node, TrainConfig& cfg) {
  node.allow_only({"learning_rate", "max_epochs", "batch_size", "patience", "min_delta", "adam_beta1",
                   "adam_beta2", "adam_epsilon"});
  cfg.learning_rate = node.number("learning_rate", cfg.learning_rate);
  cfg.max_epochs = static_cast<int>(node.integer("max_epochs", cfg.max_epochs));
  if (node.has("batch_size")) cfg.batch_size = node.count("batch_size");
  cfg.early_stop.patience = static_cast<int>(node.integer("patience", cfg.early_stop.patience));
  cfg.early_stop.min_delta = node.number("min_delta", cfg.early_stop.min_delta);
  cfg.adam.beta1 = node.number("adam_beta1", cfg.adam.beta1);
  cfg.adam.beta2 = node.number("adam_beta2", cfg.adam.beta2);
  cfg.adam.epsilon = node.number("adam_epsilon", cfg.adam.epsilon);
  try {
    cfg.validate();
  } catch (const Error& e) {
    invalid(node.path(), e.message());
  }
}

ArchSpec parse_arch(const Node& node) {
  ArchSpec arch;
  const json& layers = node.array("hidden");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Node layer(layers[l], node.child_path("hidden") + "[" + std::to_string(l) + "]");
    layer.allow_only({"units", "activation"});
    LayerSpec spec;
    spec.units = layer.count("units");
    const std::string activation = layer.string("activation", "relu");
    try {
      spec.activation = parse_activation(activation);
    } catch (const Error& e) {
      invalid(layer.child_path("activation"), e.message());
    }
    arch.hidden.push_back(spec);
  }
  try {
    arch.validate();
  } catch (const Error& e) {
    invalid(node.path(), e.message());
  }
  return arch;
}

/// Per-label counts given as one number for every label or as {label: n}.
std::vector<std::size_t> parse_counts(const json& v, const std::string& path, const LabelSpace& space,
                                      const LabelSet& labels) {
  if (v.is_number_integer()) {
    if (v.get<std::int64_t>() < 0) invalid(path, "must be >= 0");
    return std::vector<std::size_t>(labels.size(), v.get<std::size_t>());
  }
  const Node node(v, path);
  std::vector<std::size_t> out(labels.size(), 0);
  for (const auto& item : v.items()) {
    if (!space.contains(item.key())) invalid(node.child_path(item.key()), "unknown label");
    const LabelId id = space.index(item.key());
    auto it = std::find(labels.begin(), labels.end(), id);
    if (it == labels.end()) invalid(node.child_path(item.key()), "label is not held by this client");
    out[static_cast<std::size_t>(it - labels.begin())] = node.count(item.key());
  }
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (!node.has(space.name(labels[k]))) invalid(node.child_path(space.name(labels[k])), "missing count");
  }
  return out;
}

std::vector<double> parse_multipliers(const Node& node, const LabelSpace& space, const LabelSet& labels) {
  std::vector<double> out(labels.size(), 1.0);
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const std::string& name = space.name(labels[k]);
    out[k] = node.number(name, 1.0);
  }
  return out;
}

int parse_iteration(const Node& node, int iterations) {
  const std::int64_t it = node.integer("iteration");
  if (it < 1 || it > iterations) invalid(node.child_path("iteration"), "outside 1..iterations");
  return static_cast<int>(it);
}

ClientConfig parse_client(const Node& node, const LabelSpace& space, const TrainConfig& train_defaults,
                          double default_random_skew, int iterations) {
  node.allow_only({"id", "labels", "arch_schedule", "train", "shard_per_label", "shard_overrides", "skew",
                   "random_skew"});
  ClientConfig c;
  c.id = node.string("id");
  c.labels = resolve_labels(space, string_list(node.raw("labels"), node.child_path("labels")),
                            node.child_path("labels"));
  if (c.labels.empty()) invalid(node.child_path("labels"), "at least one label is required");

  const json& schedule = node.array("arch_schedule");
  for (std::size_t s = 0; s < schedule.size(); ++s) {
    const Node stage(schedule[s], node.child_path("arch_schedule") + "[" + std::to_string(s) + "]");
    stage.allow_only({"from_iteration", "hidden"});
    c.arch_schedule.push_back(ArchStage{static_cast<int>(stage.integer("from_iteration")), parse_arch(stage)});
  }

  c.train = train_defaults;
  if (node.has("train")) apply_train_overrides(node.object("train"), c.train);

  c.plan.labels = c.labels;
  c.plan.base_counts = parse_counts(node.raw("shard_per_label"), node.child_path("shard_per_label"), space, c.labels);
  if (node.has("shard_overrides")) {
    const json& list = node.array("shard_overrides");
    for (std::size_t k = 0; k < list.size(); ++k) {
      const Node o(list[k], node.child_path("shard_overrides") + "[" + std::to_string(k) + "]");
      o.allow_only({"iteration", "per_label"});
      c.plan.count_overrides[parse_iteration(o, iterations)] =
          parse_counts(o.raw("per_label"), o.child_path("per_label"), space, c.labels);
    }
  }
  if (node.has("skew")) {
    const json& list = node.array("skew");
    for (std::size_t k = 0; k < list.size(); ++k) {
      const Node o(list[k], node.child_path("skew") + "[" + std::to_string(k) + "]");
      o.allow_only({"iteration", "multipliers"});
      const Node mult = o.object("multipliers");
      for (const auto& item : list[k].at("multipliers").items()) {
        if (!space.contains(item.key()) ||
            !std::binary_search(c.labels.begin(), c.labels.end(), space.index(item.key()))) {
          invalid(mult.child_path(item.key()), "label is not held by this client");
        }
      }
      c.plan.skew[parse_iteration(o, iterations)] = parse_multipliers(mult, space, c.labels);
    }
  }
  c.plan.random_skew = node.number("random_skew", default_random_skew);
  return c;
}

json parse_json(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ConfigInvalid, origin + ": not valid JSON (" + std::string(e.what()) + ")");
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::ConfigInvalid, "cannot read '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir) {
  const json doc = parse_json(text, "config");
  const Node root(doc, "");
  root.allow_only({"labels", "iterations", "master_seed", "aggregate", "beta_acc", "warm_start", "standardize",
                   "parallel_workers", "data", "train", "random_skew", "clients"});

  ExperimentConfig cfg;
  cfg.label_space = parse_label_space(root);
  const std::int64_t iterations = root.integer("iterations");
  if (iterations < 1 || iterations > std::numeric_limits<int>::max()) invalid("iterations", "must be >= 1");
  cfg.iterations = static_cast<int>(iterations);
  if (root.has("master_seed")) {
    const json& s = root.raw("master_seed");
    if (!s.is_number_unsigned()) invalid("master_seed", "expected a non-negative integer");
    cfg.master_seed = s.get<std::uint64_t>();
  }
  const std::string aggregate = root.string("aggregate", "normalized");
  const std::string beta_acc = root.string("beta_acc", "per_label");
  try {
    cfg.aggregate = parse_aggregate_mode(aggregate);
  } catch (const Error& e) {
    invalid("aggregate", e.message());
  }
  try {
    cfg.beta_acc = parse_beta_accuracy(beta_acc);
  } catch (const Error& e) {
    invalid("beta_acc", e.message());
  }
  cfg.warm_start = root.boolean("warm_start", false);
  cfg.standardize = root.boolean("standardize", true);
  if (root.has("parallel_workers")) {
    cfg.parallel_workers = root.count("parallel_workers");
    if (cfg.parallel_workers < 1) invalid("parallel_workers", "must be >= 1");
  }

  const Node data = root.object("data");
  data.allow_only({"synthetic", "public_csv", "pool_csv"});
  if (data.has("synthetic")) {
    const Node syn = data.object("synthetic");
    syn.allow_only({"n_features", "public_per_label", "pool_size", "distributions"});
    cfg.data.synthetic = parse_synthetic(syn, cfg.label_space);
    cfg.data.public_per_label = syn.count("public_per_label");
  }
  if (data.has("public_csv")) cfg.data.public_csv = base_dir / data.string("public_csv");
  if (data.has("pool_csv")) cfg.data.pool_csv = base_dir / data.string("pool_csv");

  TrainConfig train_defaults;
  if (root.has("train")) apply_train_overrides(root.object("train"), train_defaults);
  const double random_skew = root.number("random_skew", 0.0);

  const json& clients = root.array("clients");
  for (std::size_t m = 0; m < clients.size(); ++m) {
    const Node c(clients[m], "clients[" + std::to_string(m) + "]");
    cfg.clients.push_back(parse_client(c, cfg.label_space, train_defaults, random_skew, cfg.iterations));
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  try {
    return parse_config_text(read_file(path), path.parent_path());
  } catch (const Error& e) {
    throw Error(ErrorKind::ConfigInvalid, path.string() + ": " + e.message());
  }
}

GenDataSpec parse_gen_data_spec(const std::filesystem::path& path) {
  const json doc = parse_json(read_file(path), path.string());
  const Node root(doc, "");
  root.allow_only({"labels", "synthetic"});
  GenDataSpec out;
  out.label_space = parse_label_space(root);
  const Node syn = root.object("synthetic");
  syn.allow_only({"n_features", "public_per_label", "pool_size", "distributions"});
  out.synthetic = parse_synthetic(syn, out.label_space);
  return out;
}

}  // namespace fedscore

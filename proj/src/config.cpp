#include "clustercl/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

namespace clustercl {

using nlohmann::json;

namespace {

struct Field {
  std::string key;
  std::function<json(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const json&)> set;
};

[[noreturn]] void bad_value(const std::string& key, const std::string& want, const json& v) {
  throw ConfigError("config key '" + key + "' expects " + want + ", got " + v.dump());
}

int as_int(const std::string& key, const json& v) {
  if (!v.is_number_integer()) bad_value(key, "an integer", v);
  return v.get<int>();
}

std::uint64_t as_u64(const std::string& key, const json& v) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) bad_value(key, "a non-negative integer", v);
  return v.get<std::uint64_t>();
}

double as_double(const std::string& key, const json& v) {
  if (!v.is_number()) bad_value(key, "a number", v);
  return v.get<double>();
}

bool as_bool(const std::string& key, const json& v) {
  if (!v.is_boolean()) bad_value(key, "true or false", v);
  return v.get<bool>();
}

std::string as_string(const std::string& key, const json& v) {
  if (!v.is_string()) bad_value(key, "a string", v);
  return v.get<std::string>();
}

std::vector<int> as_int_list(const std::string& key, const json& v) {
  if (!v.is_array()) bad_value(key, "a list of integers", v);
  std::vector<int> out;
  for (const auto& e : v) out.push_back(as_int(key, e));
  return out;
}

#define CFG_FIELD(KEY, MEMBER, CONV)                                                      \
  Field {                                                                                 \
    KEY, [](const ExperimentConfig& c) { return json(c.MEMBER); },                        \
        [](ExperimentConfig& c, const json& v) { c.MEMBER = CONV(KEY, v); }               \
  }

#define CFG_ENUM(KEY, MEMBER, PARSE)                                                      \
  Field {                                                                                 \
    KEY, [](const ExperimentConfig& c) { return json(to_string(c.MEMBER)); },             \
        [](ExperimentConfig& c, const json& v) { c.MEMBER = PARSE(as_string(KEY, v)); }   \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      CFG_FIELD("run_id", run_id, as_string),
      CFG_FIELD("output_dir", output_dir, as_string),
      CFG_FIELD("seed", seed, as_u64),

      CFG_FIELD("data.dataset", data.dataset, as_string),
      CFG_FIELD("data.root", data.root, as_string),
      CFG_FIELD("data.window", data.window, as_int),
      CFG_FIELD("data.overlap", data.overlap, as_double),
      CFG_FIELD("data.split", data.split, as_string),
      CFG_FIELD("data.test_fraction", data.test_fraction, as_double),
      CFG_FIELD("data.val_fraction", data.val_fraction, as_double),
      CFG_FIELD("data.normalize", data.normalize, as_bool),
      CFG_FIELD("data.synthetic.classes", data.synthetic.classes, as_int),
      CFG_FIELD("data.synthetic.subjects", data.synthetic.subjects, as_int),
      CFG_FIELD("data.synthetic.trials", data.synthetic.trials, as_int),
      CFG_FIELD("data.synthetic.length", data.synthetic.length, as_int),
      CFG_FIELD("data.synthetic.sample_rate_hz", data.synthetic.sample_rate_hz, as_int),
      CFG_FIELD("data.synthetic.noise", data.synthetic.noise, as_double),

      CFG_FIELD("aug.factor_min", aug.factor_min, as_double),
      CFG_FIELD("aug.factor_max", aug.factor_max, as_double),
      CFG_FIELD("aug.symmetric_aug", aug.symmetric_aug, as_bool),

      CFG_FIELD("model.conv_filters", encoder.conv_filters, as_int_list),
      CFG_FIELD("model.kernel_sizes", encoder.kernel_sizes, as_int_list),
      CFG_FIELD("model.dropout_rate", encoder.dropout_rate, as_double),
      CFG_FIELD("model.projection_dims", projection.layer_dims, as_int_list),

      CFG_ENUM("cluster.method", cluster.method, parse_cluster_method),
      CFG_ENUM("cluster.metric", cluster.metric, parse_metric),
      CFG_FIELD("cluster.k", cluster.k, as_int),
      CFG_FIELD("cluster.alpha", cluster.alpha, as_double),
      CFG_ENUM("cluster.branch", cluster.branch, parse_cluster_branch),
      CFG_FIELD("cluster.dbscan.eps", cluster.dbscan_eps, as_double),
      CFG_FIELD("cluster.dbscan.min_samples", cluster.dbscan_min_samples, as_int),
      CFG_FIELD("cluster.birch.threshold", cluster.birch_threshold, as_double),
      CFG_FIELD("cluster.birch.branching", cluster.birch_branching, as_int),
      CFG_ENUM("cluster.hier.linkage", cluster.linkage, parse_linkage),
      CFG_FIELD("cluster.kmeans.max_iter", cluster.kmeans_max_iter, as_int),
      CFG_FIELD("cluster.kmeans.n_init", cluster.kmeans_n_init, as_int),

      CFG_ENUM("loss.variant", loss.variant, parse_loss_variant),
      CFG_FIELD("loss.temperature", loss.temperature, as_double),
      CFG_FIELD("loss.large_num", loss.large_num, as_double),

      CFG_FIELD("pretrain.lr", pretrain.lr, as_double),
      CFG_FIELD("pretrain.batch_size", pretrain.batch_size, as_int),
      CFG_FIELD("pretrain.epochs", pretrain.epochs, as_int),
      CFG_FIELD("pretrain.checkpoint_every", pretrain.checkpoint_every, as_int),
      CFG_FIELD("pretrain.splits", pretrain_splits, as_string),
      CFG_FIELD("pretrain.repeat", repeat_pretrain, as_bool),

      CFG_ENUM("eval.mode", eval.mode, parse_freeze_mode),
      CFG_FIELD("eval.lr", eval.lr, as_double),
      CFG_FIELD("eval.epochs", eval.epochs, as_int),
      CFG_FIELD("eval.batch_size", eval.batch_size, as_int),
      CFG_FIELD("eval.repeats", eval.repeats, as_int),
      CFG_FIELD("eval.label_fraction", eval.label_fraction, as_double),
  };
  return table;
}

#undef CFG_FIELD
#undef CFG_ENUM

const Field* find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

void flatten(const json& node, const std::string& prefix, std::vector<std::pair<std::string, json>>& out) {
  if (node.is_object()) {
    for (auto it = node.begin(); it != node.end(); ++it) {
      flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
    }
    return;
  }
  out.emplace_back(prefix, node);
}

}  // namespace

ExperimentConfig::ExperimentConfig() { cluster.k = 0; }

const std::vector<std::string>& ExperimentConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.push_back(f.key);
    return out;
  }();
  return k;
}

void ExperimentConfig::set(const std::string& key, const json& value) {
  const Field* f = find_field(key);
  if (!f) throw ConfigError("unknown config key '" + key + "'");
  f->set(*this, value);
}

void ExperimentConfig::set_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  set(key, value);
}

void ExperimentConfig::merge(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config document must be a JSON object");
  std::vector<std::pair<std::string, json>> flat;
  flatten(doc, "", flat);
  for (const auto& [k, v] : flat) set(k, v);
}

void ExperimentConfig::validate() const {
  if (run_id.empty() || run_id.find('/') != std::string::npos) throw ConfigError("run_id must be a non-empty name");
  parse_dataset_kind(data.dataset);
  window_stride(data.window, data.overlap);
  if (data.split != "auto" && data.split != "random" && data.split != "usc_had") {
    throw ConfigError("data.split must be auto|random|usc_had");
  }
  if (!(data.test_fraction >= 0.0 && data.test_fraction < 1.0) || !(data.val_fraction >= 0.0 && data.val_fraction < 1.0)) {
    throw ConfigError("data.test_fraction and data.val_fraction must lie in [0, 1)");
  }
  if (pretrain_splits != "train" && pretrain_splits != "all") throw ConfigError("pretrain.splits must be train|all");
  if (cluster.k < 0) throw ConfigError("cluster.k must be >= 0 (0 = class count)");
  pretrain_config().validate();
  eval_config().validate();
  if (data.window < encoder.min_window()) {
    throw ConfigError("data.window " + std::to_string(data.window) + " is shorter than the encoder's receptive field " +
                      std::to_string(encoder.min_window()));
  }
}

json ExperimentConfig::to_json() const {
  json out = json::object();
  for (const auto& f : fields()) {
    std::string ptr = "/" + f.key;
    std::replace(ptr.begin(), ptr.end(), '.', '/');
    out[json::json_pointer(ptr)] = f.get(*this);
  }
  return out;
}

std::string ExperimentConfig::fingerprint() const {
  json j = to_json();
  j.erase("run_id");
  j.erase("output_dir");
  std::ostringstream ss;
  ss << std::hex << fnv1a64(j.dump());
  return ss.str();
}

PretrainConfig ExperimentConfig::pretrain_config() const {
  PretrainConfig p = pretrain;
  p.seed = derive_seed(seed, "pretrain");
  p.loss = loss;
  p.cluster = cluster;
  p.aug = aug;
  p.encoder = encoder;
  p.projection = projection;
  return p;
}

EvalConfig ExperimentConfig::eval_config() const {
  EvalConfig e = eval;
  e.seed = derive_seed(seed, "eval");
  return e;
}

std::filesystem::path ExperimentConfig::run_dir() const {
  std::string root = output_dir;
  if (root.empty()) {
    const char* env = std::getenv("CLUSTERCL_OUTPUT_DIR");
    root = env && *env ? env : "runs";
  }
  return std::filesystem::path(root) / run_id;
}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  ExperimentConfig cfg;
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  cfg.merge(doc);
  return cfg;
}

}  // namespace clustercl

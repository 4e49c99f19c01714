// clustercl: prepare-data | pretrain | eval | embed | sweep
//
// Exit codes: 0 artifact written, 1 runtime failure, 2 invalid configuration.

#include "clustercl/experiment.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace clustercl;
using nlohmann::json;

namespace {

struct CommonOpts {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
};

ExperimentConfig load_config(const CommonOpts& o) {
  ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : ExperimentConfig::from_file(o.config);
  for (const auto& s : o.sets) cfg.set_override(s);
  return cfg;
}

fs::path output_dir(const CommonOpts& o, const ExperimentConfig& cfg) {
  return o.out.empty() ? cfg.run_dir() : fs::path(o.out);
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << text;
    if (!f) throw std::runtime_error("write failed: " + path.string());
  }
  fs::rename(tmp, path);
}

DatasetCache data_for(const std::string& data_path, const ExperimentConfig& cfg) {
  if (data_path.empty()) return prepare_dataset(cfg);
  if (!fs::exists(data_path)) throw ConfigError("dataset cache not found: " + data_path);
  return load_cache(data_path);
}

void print_counts(const DatasetCache& c) {
  for (const auto& [name, ds] : {std::pair<const char*, const WindowedDataset*>{"train", &c.train}, {"val", &c.val}, {"test", &c.test}}) {
    std::cout << name << ": " << ds->size() << " windows, " << ds->subjects().size() << " subjects\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cluster-aware contrastive pre-training for sensor-based activity recognition"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off");

  // prepare-data
  CommonOpts prep;
  std::optional<std::string> p_dataset, p_root;
  std::optional<int> p_window;
  std::optional<double> p_overlap;
  std::optional<std::uint64_t> p_seed;
  auto* c_prep = app.add_subcommand("prepare-data", "ingest, window, split and normalize a dataset into a cache file");
  c_prep->add_option("--config", prep.config, "experiment config (JSON)");
  c_prep->add_option("--set", prep.sets, "key=value override")->take_all();
  c_prep->add_option("--dataset", p_dataset, "uci_har|usc_had|motion_sense|synthetic|csv");
  c_prep->add_option("--root", p_root, "dataset root directory");
  c_prep->add_option("--window", p_window, "window length in samples");
  c_prep->add_option("--overlap", p_overlap, "window overlap fraction in [0,1)");
  c_prep->add_option("--seed", p_seed, "root seed");
  c_prep->add_option("--out", prep.out, "cache file (default <output_dir>/<run_id>/dataset.ccl)");

  // pretrain
  CommonOpts pre;
  std::string pre_data;
  bool pre_force = false;
  auto* c_pre = app.add_subcommand("pretrain", "contrastive pre-training; writes checkpoint.ccl and train_log.jsonl");
  c_pre->add_option("--config", pre.config, "experiment config (JSON)");
  c_pre->add_option("--set", pre.sets, "key=value override")->take_all();
  c_pre->add_option("--data", pre_data, "dataset cache (default: prepared from the config)");
  c_pre->add_option("--out", pre.out, "output directory (default <output_dir>/<run_id>)");
  c_pre->add_flag("--force", pre_force, "overwrite an existing checkpoint");

  // eval
  CommonOpts ev;
  std::string ev_ckpt, ev_data;
  std::optional<std::string> ev_mode;
  std::optional<double> ev_fraction;
  std::optional<int> ev_repeats;
  auto* c_ev = app.add_subcommand("eval", "linear evaluation or fine-tuning; writes metrics.json");
  c_ev->add_option("--checkpoint", ev_ckpt, "checkpoint file")->required();
  c_ev->add_option("--data", ev_data, "dataset cache")->required();
  c_ev->add_option("--config", ev.config, "experiment config (JSON)");
  c_ev->add_option("--set", ev.sets, "key=value override")->take_all();
  c_ev->add_option("--mode", ev_mode, "linear|finetune");
  c_ev->add_option("--label-fraction", ev_fraction, "fraction of training labels");
  c_ev->add_option("--repeats", ev_repeats, "independent downstream runs");
  c_ev->add_option("--out", ev.out, "report file (default next to the checkpoint)");

  // embed
  std::string em_ckpt, em_data, em_out, em_split = "all";
  std::size_t em_n = 1000;
  std::uint64_t em_seed = 0;
  auto* c_em = app.add_subcommand("embed", "export encoder representations as CSV");
  c_em->add_option("--checkpoint", em_ckpt, "checkpoint file")->required();
  c_em->add_option("--data", em_data, "dataset cache")->required();
  c_em->add_option("--split", em_split, "all|train|val|test")->check(CLI::IsMember({"all", "train", "val", "test"}));
  c_em->add_option("--n", em_n, "number of windows");
  c_em->add_option("--seed", em_seed, "sampling seed");
  c_em->add_option("--out", em_out, "CSV file")->required();

  // sweep
  CommonOpts sw;
  std::string sw_grid, sw_data;
  auto* c_sw = app.add_subcommand("sweep", "pre-train and evaluate over a cartesian grid of config values");
  c_sw->add_option("--config", sw.config, "experiment config (JSON)");
  c_sw->add_option("--set", sw.sets, "key=value override")->take_all();
  c_sw->add_option("--grid", sw_grid, "JSON object: key -> list of values")->required();
  c_sw->add_option("--data", sw_data, "dataset cache (default: prepared from the config)");
  c_sw->add_option("--out", sw.out, "output directory (default <output_dir>/<run_id>)");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_default_logger(spdlog::stderr_color_st("clustercl"));
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*c_prep) {
      ExperimentConfig cfg = load_config(prep);
      if (p_dataset) cfg.set("data.dataset", *p_dataset);
      if (p_root) cfg.set("data.root", *p_root);
      if (p_window) cfg.set("data.window", *p_window);
      if (p_overlap) cfg.set("data.overlap", *p_overlap);
      if (p_seed) cfg.set("seed", *p_seed);
      cfg.validate();
      const fs::path out = prep.out.empty() ? cfg.run_dir() / "dataset.ccl" : fs::path(prep.out);
      const DatasetCache cache = prepare_dataset(cfg);
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      save_cache(out, cache);
      print_counts(cache);
      std::cout << "wrote " << out.string() << "\n";
    } else if (*c_pre) {
      ExperimentConfig cfg = load_config(pre);
      cfg.validate();
      const fs::path dir = output_dir(pre, cfg);
      const fs::path ckpt = dir / "checkpoint.ccl";
      if (fs::exists(ckpt) && !pre_force) {
        throw ConfigError("checkpoint already exists: " + ckpt.string() + " (use --force to overwrite)");
      }
      const DatasetCache cache = data_for(pre_data, cfg);
      fs::create_directories(dir);
      const fs::path log_path = dir / "train_log.jsonl";
      std::ofstream log(log_path.string() + ".tmp");
      PretrainHooks hooks;
      hooks.on_step = [&](const StepLog& s) { log << to_json(s).dump() << "\n"; };
      hooks.on_checkpoint = [&](const Checkpoint& c) {
        save_checkpoint(dir / ("checkpoint.epoch" + std::to_string(c.epoch) + ".ccl"), c);
      };
      PretrainResult res = pretrain(pretrain_view(cache, cfg.pretrain_splits), cfg.pretrain_config(), cfg.to_json(), hooks);
      res.checkpoint.config_hash = cfg.fingerprint();
      log.close();
      fs::rename(log_path.string() + ".tmp", log_path);
      write_text(dir / "config.json", cfg.to_json().dump(2) + "\n");
      save_checkpoint(ckpt, res.checkpoint);
      std::cout << "steps: " << res.log.size() << ", final loss: " << (res.log.empty() ? 0.0 : res.log.back().loss) << "\n";
      std::cout << "wrote " << ckpt.string() << "\n";
    } else if (*c_ev) {
      if (!fs::exists(ev_ckpt)) throw ConfigError("checkpoint not found: " + ev_ckpt);
      const Checkpoint ckpt = load_checkpoint(ev_ckpt);
      ExperimentConfig cfg;
      if (ckpt.config.is_object()) cfg.merge(ckpt.config);
      if (!ev.config.empty()) cfg.merge(ExperimentConfig::from_file(ev.config).to_json());
      for (const auto& s : ev.sets) cfg.set_override(s);
      if (ev_mode) cfg.set("eval.mode", *ev_mode == "finetune" ? "fine_tune" : *ev_mode == "linear" ? "linear_eval" : *ev_mode);
      if (ev_fraction) cfg.set("eval.label_fraction", *ev_fraction);
      if (ev_repeats) cfg.set("eval.repeats", *ev_repeats);
      cfg.validate();
      if (!fs::exists(ev_data)) throw ConfigError("dataset cache not found: " + ev_data);
      const DatasetCache cache = load_cache(ev_data);
      const MetricsReport report = evaluate(ckpt, cache.train, cache.val, cache.test, cfg.eval_config());
      json doc = to_json(report);
      doc["metadata"] = {{"created", timestamp()}, {"checkpoint", ev_ckpt}, {"data", ev_data}};
      const fs::path out = ev.out.empty() ? fs::path(ev_ckpt).parent_path() / "metrics.json" : fs::path(ev.out);
      write_text(out, doc.dump(2) + "\n");
      std::cout << "mean F1: " << report.mean_f1 << " (batch " << report.batch_size << ", lr " << report.lr << ")\n";
      std::cout << "wrote " << out.string() << "\n";
    } else if (*c_em) {
      if (!fs::exists(em_ckpt)) throw ConfigError("checkpoint not found: " + em_ckpt);
      if (!fs::exists(em_data)) throw ConfigError("dataset cache not found: " + em_data);
      const Checkpoint ckpt = load_checkpoint(em_ckpt);
      const DatasetCache cache = load_cache(em_data);
      WindowedDataset ds = em_split == "train" ? cache.train : em_split == "val" ? cache.val : cache.test;
      if (em_split == "all") {
        ds = cache.train;
        for (const auto* part : {&cache.val, &cache.test}) ds.windows.insert(ds.windows.end(), part->windows.begin(), part->windows.end());
      }
      const Embedding e = embed(ckpt, ds, em_n, em_seed);
      write_text(em_out, embedding_csv(e));
      std::cout << "wrote " << e.representations.rows() << " rows to " << em_out << "\n";
    } else if (*c_sw) {
      ExperimentConfig cfg = load_config(sw);
      cfg.validate();
      std::ifstream gf(sw_grid);
      if (!gf) throw ConfigError("cannot read grid file: " + sw_grid);
      json grid_doc;
      try {
        gf >> grid_doc;
      } catch (const json::exception& e) {
        throw ConfigError(std::string("grid file is not valid JSON: ") + e.what());
      }
      const SweepGrid grid = parse_sweep_grid(grid_doc);
      const fs::path dir = output_dir(sw, cfg);
      fs::create_directories(dir);
      std::vector<SweepRow> rows;
      if (!grid.empty()) rows = sweep(cfg, grid, data_for(sw_data, cfg), dir);
      write_text(dir / "sweep.csv", sweep_csv(grid, rows));
      std::size_t failed = 0;
      for (const auto& r : rows) failed += r.ok ? 0 : 1;
      std::cout << rows.size() << " cells, " << failed << " failed; wrote " << (dir / "sweep.csv").string() << "\n";
    }
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}

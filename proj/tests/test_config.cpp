#include "clustercl/experiment.hpp"

#include <doctest.h>

#include <fstream>

using namespace clustercl;
namespace fs = std::filesystem;

TEST_CASE("config keys, overrides and validation") {
  ExperimentConfig c;
  c.set_override("cluster.k=5");
  c.set_override("loss.variant=nt_xent");
  c.set_override("model.conv_filters=[8,8,8]");
  CHECK(c.cluster.k == 5);
  CHECK(c.loss.variant == LossVariant::nt_xent);
  CHECK(c.encoder.conv_filters == std::vector<int>{8, 8, 8});
  CHECK_THROWS_AS(c.set_override("cluster.kk=5"), ConfigError);
  CHECK_THROWS_AS(c.set("cluster.k", "five"), ConfigError);
  CHECK_THROWS_AS(c.set_override("nonsense"), ConfigError);

  ExperimentConfig bad;
  bad.data.window = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ExperimentConfig{};
  bad.data.window = 20;  // shorter than the default encoder accepts
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("config json round trip and fingerprint") {
  ExperimentConfig c;
  c.cluster.method = ClusterMethod::birch;
  c.eval.label_fraction = 0.1;
  c.run_id = "a";
  ExperimentConfig d;
  d.merge(c.to_json());
  CHECK(d.to_json() == c.to_json());
  d.run_id = "b";
  CHECK(d.fingerprint() == c.fingerprint());
  d.cluster.k = 7;
  CHECK(d.fingerprint() != c.fingerprint());

  nlohmann::json unknown = {{"cluster", {{"banana", 1}}}};
  CHECK_THROWS_AS(d.merge(unknown), ConfigError);
}

TEST_CASE("config file loading") {
  const fs::path p = fs::temp_directory_path() / "clustercl_test_cfg.json";
  std::ofstream(p) << R"({"seed": 3, "cluster": {"alpha": 80}, "pretrain": {"epochs": 4}})";
  const ExperimentConfig c = ExperimentConfig::from_file(p);
  CHECK(c.seed == 3);
  CHECK(c.cluster.alpha == 80);
  CHECK(c.pretrain.epochs == 4);
  CHECK(c.pretrain_config().cluster.alpha == 80);
  CHECK_THROWS_AS(ExperimentConfig::from_file(p.string() + ".missing"), ConfigError);
  std::ofstream(p) << "{not json";
  CHECK_THROWS_AS(ExperimentConfig::from_file(p), ConfigError);
}

TEST_CASE("sweep grid parsing and failure isolation") {
  CHECK(parse_sweep_grid(nlohmann::json::object()).empty());
  CHECK_THROWS_AS(parse_sweep_grid(nlohmann::json{{"cluster.k", 3}}), ConfigError);
  CHECK_THROWS_AS(parse_sweep_grid(nlohmann::json{{"bogus", {1}}}), ConfigError);

  ExperimentConfig base;
  base.data.window = 32;
  base.data.synthetic.trials = 2;
  base.data.synthetic.length = 288;
  base.encoder.conv_filters = {4, 4, 8};
  base.encoder.kernel_sizes = {4, 4, 4};
  base.projection.layer_dims = {8, 8, 8};
  base.pretrain.epochs = 1;
  base.pretrain.batch_size = 32;
  base.eval.repeats = 1;
  base.eval.epochs = 2;
  const DatasetCache cache = prepare_dataset(base);
  const SweepGrid grid = parse_sweep_grid(nlohmann::json{{"cluster.k", {2, 3}}, {"pretrain.batch_size", {32, 100000}}});
  const fs::path out = fs::temp_directory_path() / "clustercl_test_sweep";
  fs::remove_all(out);
  const auto rows = sweep(base, grid, cache, out);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].ok);
  CHECK_FALSE(rows[1].ok);  // batch larger than the dataset
  CHECK(rows[2].ok);
  CHECK_FALSE(rows[3].ok);
  CHECK(fs::exists(out / "cells" / rows[0].cell_id / "metrics.json"));
  const std::string csv = sweep_csv(grid, rows);
  CHECK(csv.find("failed") != std::string::npos);
  CHECK(sweep(base, {}, cache, out).empty());
}

TEST_CASE("embedding export") {
  ExperimentConfig base;
  base.data.window = 64;
  base.data.synthetic.trials = 1;
  base.data.synthetic.length = 64;
  const DatasetCache cache = prepare_dataset(base);
  Rng rng(1);
  const Checkpoint ck{Encoder<float>(EncoderConfig{}, 6, rng), ProjectionHead<float>(ProjectionConfig{}, 96, rng), {}, 0, ""};
  const Embedding e = embed(ck, cache.train, 10, 3);
  CHECK(static_cast<std::size_t>(e.representations.rows()) == cache.train.size());
  CHECK(e.representations.cols() == 96);
  CHECK(embedding_csv(e) == embedding_csv(embed(ck, cache.train, 10, 3)));
}

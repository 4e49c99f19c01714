#include "clustercl/data.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <map>

using namespace clustercl;
namespace fs = std::filesystem;

namespace {

SensorRecording recording(std::string subject, int label, int length, int channels = 6) {
  SensorRecording r;
  r.subject_id = std::move(subject);
  r.activity_label = label;
  r.channels = MatrixF::Zero(length, channels);
  for (int t = 0; t < length; ++t) r.channels(t, 0) = static_cast<float>(t);
  r.sample_rate_hz = 50;
  return r;
}

WindowedDataset labelled(const std::vector<int>& per_class) {
  WindowedDataset ds;
  ds.class_count = static_cast<int>(per_class.size());
  ds.window_length = 4;
  ds.channels = 1;
  std::int64_t id = 0;
  for (int c = 0; c < ds.class_count; ++c) {
    for (int i = 0; i < per_class[static_cast<std::size_t>(c)]; ++i) {
      SensorWindow w;
      w.values = MatrixF::Zero(4, 1);
      w.activity_label = c;
      w.subject_id = "s" + std::to_string(i % 3);
      w.id = id++;
      ds.windows.push_back(w);
    }
  }
  // Interleave classes so order preservation is observable.
  std::stable_sort(ds.windows.begin(), ds.windows.end(), [](const auto& a, const auto& b) { return a.id % 7 < b.id % 7; });
  return ds;
}

fs::path temp_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("clustercl_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("synthetic generator contract") {
  SyntheticConfig cfg;
  cfg.classes = 3;
  cfg.subjects = 4;
  cfg.trials = 10;
  const IngestResult r = ingest({}, DatasetKind::synthetic, cfg);
  CHECK(r.recordings.size() == 120);
  CHECK(r.class_count == 3);
  for (const auto& rec : r.recordings) {
    CHECK(rec.channels.cols() == 6);
    CHECK(rec.channels.allFinite());
    CHECK(rec.activity_label >= 0);
    CHECK(rec.activity_label < 3);
  }
  const IngestResult again = ingest({}, DatasetKind::synthetic, cfg);
  CHECK(again.recordings.front().channels.isApprox(r.recordings.front().channels, 0.0f));
}

TEST_CASE("csv ingestion drops non-finite rows") {
  const auto root = temp_dir("csv_nan");
  {
    std::ofstream f(root / "subject-3_activity-1_trial-0.csv");
    f << "t,ax,ay,az,gx,gy,gz\n";
    f << "0,1,2,3,4,5,6\n";
    f << "1,NaN,2,3,4,5,6\n";
    f << "2,1,2,3,4,5,6\n";
  }
  const IngestResult r = ingest(root, DatasetKind::csv);
  REQUIRE(r.recordings.size() == 1);
  CHECK(r.dropped_rows == 1);
  CHECK(r.recordings[0].channels.rows() == 2);
  CHECK(r.recordings[0].channels.cols() == 6);
  CHECK(r.recordings[0].subject_id == "3");
  CHECK(r.recordings[0].activity_label == 1);
}

TEST_CASE("csv ingestion rejects inconsistent files and missing roots") {
  const auto root = temp_dir("csv_bad");
  {
    std::ofstream f(root / "subject-1_activity-0_trial-0.csv");
    f << "t,ax,ay,az,gx,gy,gz\n0,1,2,3,4,5,6\n1,1,2,3,4,5,6\n";
  }
  {
    std::ofstream f(root / "subject-2_activity-0_trial-0.csv");
    f << "t,ax,ay,az,gx,gy,gz\n0,1,2,3\n";
  }
  const IngestResult r = ingest(root, DatasetKind::csv);
  CHECK(r.recordings.size() == 1);
  CHECK(r.rejected.size() == 1);
  CHECK_THROWS_AS(ingest(root / "does-not-exist", DatasetKind::csv), ConfigError);
}

TEST_CASE("window stride and counts") {
  CHECK(window_stride(400, 0.5) == 200);
  CHECK(window_stride(128, 0.0) == 128);
  CHECK_THROWS_AS(window_stride(0, 0.5), ConfigError);
  CHECK_THROWS_AS(window_stride(64, 1.0), ConfigError);

  CHECK(window({recording("a", 0, 1000)}, 400, 0.5, 1).dataset.size() == 4);
  CHECK(window({recording("a", 0, 128)}, 128, 0.5, 1).dataset.size() == 1);
  const WindowingResult short_one = window({recording("a", 0, 399)}, 400, 0.5, 1);
  CHECK(short_one.dataset.empty());
  CHECK(short_one.skipped_recordings == 1);
}

TEST_CASE("window contents follow the stride") {
  const WindowingResult r = window({recording("a", 0, 10)}, 4, 0.5, 1);
  REQUIRE(r.dataset.size() == 4);
  for (std::size_t i = 0; i < r.dataset.size(); ++i) {
    CHECK(r.dataset.windows[i].values.rows() == 4);
    CHECK(r.dataset.windows[i].values(0, 0) == doctest::Approx(2.0 * static_cast<double>(i)));
  }
}

TEST_CASE("window count formula property") {
  Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const int W = std::uniform_int_distribution<int>(1, 64)(rng);
    const double f = std::uniform_real_distribution<double>(0.0, 0.95)(rng);
    const int L = std::uniform_int_distribution<int>(0, 400)(rng);
    int S = 0;
    try {
      S = window_stride(W, f);
    } catch (const ConfigError&) {
      continue;  // stride rounds to zero
    }
    const auto n = window({recording("a", 0, L, 1)}, W, f, 1).dataset.size();
    CHECK(static_cast<long long>(n) == oracle::count_window_starts(L, W, S));
    if (L >= W) CHECK(static_cast<long long>(n) == (L - W) / S + 1);
  }
}

TEST_CASE("usc_had split spec") {
  std::set<std::string> subjects;
  for (int s = 1; s <= 14; ++s) subjects.insert(std::to_string(s));
  const SplitSpec spec = usc_had_split_spec(subjects);
  CHECK(spec.val_subjects == std::set<std::string>{"11", "12"});
  CHECK(spec.test_subjects == std::set<std::string>{"13", "14"});
  CHECK(spec.train_subjects.size() == 10);
}

TEST_CASE("split is subject-disjoint, deterministic and warns on empty parts") {
  std::vector<SensorRecording> recs;
  for (int s = 0; s < 10; ++s) recs.push_back(recording("s" + std::to_string(s), s % 2, 200, 2));
  const WindowedDataset ds = window(recs, 50, 0.5, 2).dataset;
  const SplitSpec a = random_split_spec(ds.subjects(), 0.2, 0.2, 5);
  const SplitSpec b = random_split_spec(ds.subjects(), 0.2, 0.2, 5);
  CHECK(a.test_subjects == b.test_subjects);
  CHECK(a.val_subjects == b.val_subjects);
  CHECK(a.test_subjects.size() == 2);
  CHECK(a.val_subjects.size() == 2);  // round(0.2 * 8)
  const SplitResult parts = split(ds, a);
  CHECK(parts.train.size() + parts.val.size() + parts.test.size() == ds.size());
  for (const auto& w : parts.train.windows) CHECK(a.train_subjects.count(w.subject_id) == 1);
  for (const auto& w : parts.test.windows) CHECK(a.test_subjects.count(w.subject_id) == 1);

  SplitSpec all_train;
  all_train.train_subjects = ds.subjects();
  const SplitResult only = split(ds, all_train);
  CHECK(only.val.empty());
  CHECK(only.test.empty());
  CHECK_FALSE(only.warnings.empty());

  SplitSpec overlapping = a;
  overlapping.val_subjects.insert(*a.test_subjects.begin());
  CHECK_THROWS_AS(split(ds, overlapping), ConfigError);
}

TEST_CASE("label budget") {
  const WindowedDataset ds = labelled({600, 600, 600, 600, 600, 600});
  const WindowedDataset same = label_budget(ds, 1.0, 3);
  REQUIRE(same.size() == ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) CHECK(same.windows[i].id == ds.windows[i].id);

  const WindowedDataset one = label_budget(ds, 0.01, 3);
  CHECK(one.size() == 36);
  for (auto c : one.class_counts()) CHECK(c == 6);

  const WindowedDataset tiny = label_budget(labelled({30, 200}), 0.01, 3);
  CHECK(tiny.class_counts() == std::vector<std::size_t>{1, 2});

  const WindowedDataset again = label_budget(ds, 0.01, 3);
  for (std::size_t i = 0; i < one.size(); ++i) CHECK(again.windows[i].id == one.windows[i].id);

  // Subset by identity, original order preserved.
  std::map<std::int64_t, std::size_t> pos;
  for (std::size_t i = 0; i < ds.size(); ++i) pos[ds.windows[i].id] = i;
  for (std::size_t i = 1; i < one.size(); ++i) {
    REQUIRE(pos.count(one.windows[i].id) == 1);
    CHECK(pos[one.windows[i - 1].id] < pos[one.windows[i].id]);
  }
}

TEST_CASE("z-score normalization uses the given statistics") {
  WindowingResult r = window({recording("a", 0, 100, 2)}, 10, 0.0, 1);
  const ChannelStats st = channel_stats(r.dataset);
  normalize(r.dataset, st);
  double sum = 0.0, sq = 0.0, n = 0.0;
  for (const auto& w : r.dataset.windows) {
    for (Eigen::Index t = 0; t < w.values.rows(); ++t) {
      sum += w.values(t, 0);
      sq += double(w.values(t, 0)) * w.values(t, 0);
      n += 1;
    }
    CHECK(w.values.col(1).allFinite());  // zero-variance channel stays finite
  }
  CHECK(sum / n == doctest::Approx(0.0).epsilon(1e-5));
  CHECK(sq / n == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("dataset cache round trip") {
  std::vector<SensorRecording> recs;
  for (int s = 0; s < 5; ++s) recs.push_back(recording("s" + std::to_string(s), s % 3, 120, 6));
  const WindowedDataset ds = window(recs, 32, 0.5, 3).dataset;
  DatasetCache c;
  c.dataset_name = "synthetic";
  c.spec = random_split_spec(ds.subjects(), 0.2, 0.2, 1);
  SplitResult parts = split(ds, c.spec);
  c.stats = channel_stats(parts.train);
  c.train = parts.train;
  c.val = parts.val;
  c.test = parts.test;
  c.overlap_fraction = 0.5;
  c.seed = 9;
  const auto path = temp_dir("cache") / "d.ccl";
  save_cache(path, c);
  const DatasetCache back = load_cache(path);
  CHECK(back.dataset_name == "synthetic");
  CHECK(back.train.window_length == 32);
  CHECK(back.train.stride == 16);
  CHECK(back.train.class_count == 3);
  CHECK(back.seed == 9);
  CHECK(back.spec.test_subjects == c.spec.test_subjects);
  REQUIRE(back.train.size() == c.train.size());
  REQUIRE(back.test.size() == c.test.size());
  for (std::size_t i = 0; i < c.train.size(); ++i) {
    CHECK(back.train.windows[i].values.isApprox(c.train.windows[i].values, 0.0f));
    CHECK(back.train.windows[i].activity_label == c.train.windows[i].activity_label);
    CHECK(back.train.windows[i].subject_id == c.train.windows[i].subject_id);
    CHECK(back.train.windows[i].id == c.train.windows[i].id);
  }
  CHECK_THROWS(load_cache(path.parent_path() / "missing.ccl"));
}

TEST_CASE("uci_har inertial-signals layout") {
  const auto root = temp_dir("uci_inertial");
  const std::vector<std::string> signals = {"total_acc_x", "total_acc_y", "total_acc_z",
                                            "body_gyro_x", "body_gyro_y", "body_gyro_z"};
  for (const std::string part : {"train", "test"}) {
    fs::create_directories(root / part / "Inertial Signals");
    std::ofstream subj(root / part / ("subject_" + part + ".txt"));
    std::ofstream y(root / part / ("y_" + part + ".txt"));
    const int base = part == "train" ? 1 : 20;
    for (int r = 0; r < 6; ++r) {
      subj << base + r % 3 << "\n";
      y << r + 1 << "\n";
    }
    for (const auto& s : signals) {
      std::ofstream f(root / part / "Inertial Signals" / (s + "_" + part + ".txt"));
      for (int r = 0; r < 6; ++r) {
        for (int t = 0; t < 128; ++t) f << "  " << 0.01 * (t + r) << (t == 127 ? "\n" : "");
      }
    }
  }
  const IngestResult r = ingest(root, DatasetKind::uci_har);
  CHECK(r.recordings.size() == 12);
  CHECK(r.class_count == 6);
  std::set<std::string> subjects;
  for (const auto& rec : r.recordings) {
    CHECK(rec.channels.rows() == 128);
    CHECK(rec.channels.cols() == 6);
    subjects.insert(rec.subject_id);
  }
  CHECK(subjects.size() == 6);
  CHECK(window(r.recordings, 128, 0.5, r.class_count).dataset.size() == 12);
}

TEST_CASE("uci_har raw layout keeps basic activities only") {
  const auto root = temp_dir("uci_raw");
  fs::create_directories(root / "RawData");
  for (const std::string kind : {"acc", "gyro"}) {
    std::ofstream f(root / "RawData" / (kind + "_exp01_user07.txt"));
    for (int t = 0; t < 300; ++t) f << t * 0.1 << " " << 1.0 << " " << -1.0 << "\n";
  }
  {
    std::ofstream f(root / "RawData" / "labels.txt");
    f << "1 7 5 1 150\n";
    f << "1 7 8 151 200\n";  // postural transition
    f << "1 7 1 201 300\n";
  }
  const IngestResult r = ingest(root, DatasetKind::uci_har);
  REQUIRE(r.recordings.size() == 2);
  CHECK(r.recordings[0].activity_label == 4);
  CHECK(r.recordings[0].channels.rows() == 150);
  CHECK(r.recordings[1].activity_label == 0);
  CHECK(r.recordings[1].channels.rows() == 100);
  CHECK(r.recordings[0].subject_id == "7");
  CHECK(r.recordings[1].channels(0, 0) == doctest::Approx(20.0));
}

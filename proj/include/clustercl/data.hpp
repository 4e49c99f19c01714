#pragma once

// Sensor ingestion, sliding-window segmentation, subject-disjoint splits and
// label-budget subsets.

#include "clustercl/common.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <set>
#include <string>
#include <vector>

namespace clustercl {

enum class DatasetKind { uci_har, usc_had, motion_sense, synthetic, csv };

DatasetKind parse_dataset_kind(const std::string& name);
std::string to_string(DatasetKind kind);

struct SensorRecording {
  std::string subject_id;
  int activity_label = 0;
  MatrixF channels;  // [time x C]
  int sample_rate_hz = 0;
  std::string source;
};

struct SensorWindow {
  MatrixF values;  // [W x C]
  int activity_label = 0;
  std::string subject_id;
  std::int64_t id = 0;  // provenance: position in the dataset it was cut from
};

struct WindowedDataset {
  std::vector<SensorWindow> windows;
  int class_count = 0;
  int window_length = 0;
  int stride = 0;
  int channels = 0;
  int sample_rate_hz = 0;
  std::vector<std::string> channel_names;

  std::size_t size() const { return windows.size(); }
  bool empty() const { return windows.empty(); }
  std::set<std::string> subjects() const;
  std::vector<std::size_t> class_counts() const;
  // Same header, no windows.
  WindowedDataset like() const;
};

struct SyntheticConfig {
  int classes = 3;
  int subjects = 4;
  int trials = 10;
  int length = 832;
  int sample_rate_hz = 50;
  double noise = 0.1;
  std::uint64_t seed = 7;
};

struct IngestResult {
  std::vector<SensorRecording> recordings;
  int class_count = 0;
  std::vector<std::string> channel_names;
  std::size_t dropped_rows = 0;
  std::vector<std::string> rejected;  // "<file>: <reason>"
};

// Layouts:
//  synthetic     generated in memory; `root` is ignored.
//  csv           <root>/**/subject-<id>_activity-<label>_trial-<n>.csv, header
//                `t,ax,ay,az,gx,gy,gz`; optional <root>/manifest.json with
//                {"sample_rate_hz": int, "class_names": [..]}.
//  usc_had,      the csv layout, produced by tools/convert_usc_had.py and
//  motion_sense  tools/convert_motionsense.py respectively.
//  uci_har       either "RawData/" (acc_expXX_userYY.txt, gyro_..., labels.txt;
//                basic activities 1-6 only) or the "train|test/Inertial Signals/"
//                tree (each 128-sample row becomes one recording).
IngestResult ingest(const std::filesystem::path& root, DatasetKind kind, const SyntheticConfig& synth = {});

IngestResult generate_synthetic(const SyntheticConfig& cfg);

int window_stride(int window_length, double overlap_fraction);

struct WindowingResult {
  WindowedDataset dataset;
  std::size_t skipped_recordings = 0;
};

WindowingResult window(const std::vector<SensorRecording>& recordings, int window_length, double overlap_fraction,
                       int class_count, std::vector<std::string> channel_names = {});

struct SplitSpec {
  std::set<std::string> train_subjects;
  std::set<std::string> val_subjects;
  std::set<std::string> test_subjects;
  double label_fraction = 1.0;
  std::uint64_t seed = 0;
};

// Test subjects are drawn first, then validation subjects from the remainder.
SplitSpec random_split_spec(const std::set<std::string>& subjects, double test_fraction, double val_fraction,
                            std::uint64_t seed);
// Subjects 11/12 validate and 13/14 test; everything else trains.
SplitSpec usc_had_split_spec(const std::set<std::string>& subjects);

struct SplitResult {
  WindowedDataset train;
  WindowedDataset val;
  WindowedDataset test;
  std::vector<std::string> warnings;
};

SplitResult split(const WindowedDataset& dataset, const SplitSpec& spec);

// Stratified subset keeping max(1, round(fraction * n_c)) windows of each class,
// in original order.
WindowedDataset label_budget(const WindowedDataset& train, double fraction, std::uint64_t seed);

struct ChannelStats {
  std::vector<float> mean;
  std::vector<float> stddev;
};

ChannelStats channel_stats(const WindowedDataset& dataset);
void normalize(WindowedDataset& dataset, const ChannelStats& stats);

// Contiguous [n x W x C] copy of the selected windows.
std::vector<float> gather(const WindowedDataset& dataset, std::span<const std::size_t> indices);
std::vector<float> gather_all(const WindowedDataset& dataset);
std::vector<int> labels_of(const WindowedDataset& dataset);

struct DatasetCache {
  std::string dataset_name;
  WindowedDataset train;
  WindowedDataset val;
  WindowedDataset test;
  SplitSpec spec;
  ChannelStats stats;
  double overlap_fraction = 0.0;
  std::uint64_t seed = 0;
};

void save_cache(const std::filesystem::path& path, const DatasetCache& cache);
DatasetCache load_cache(const std::filesystem::path& path);

}  // namespace clustercl

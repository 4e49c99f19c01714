#include "clustercl/data.hpp"

#include "clustercl/archive.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <regex>
#include <sstream>

namespace clustercl {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kImuChannels = {"ax", "ay", "az", "gx", "gy", "gz"};

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_on(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(trim(cell));
  return out;
}

// Whitespace-separated numeric rows, as used by the UCI text files.
std::vector<std::vector<double>> read_numeric_rows(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::vector<double> row;
    double v;
    while (ss >> v) row.push_back(v);
    if (!row.empty()) rows.push_back(std::move(row));
  }
  return rows;
}

bool row_finite(const std::vector<double>& row) {
  return std::all_of(row.begin(), row.end(), [](double v) { return std::isfinite(v); });
}

MatrixF to_matrix(const std::vector<std::vector<double>>& rows, std::size_t first_col, std::size_t cols) {
  MatrixF m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = static_cast<float>(rows[r][first_col + c]);
    }
  }
  return m;
}

struct CsvFile {
  bool ok = false;
  std::string reason;
  MatrixF channels;
  std::size_t dropped = 0;
};

CsvFile read_trial_csv(const fs::path& path) {
  CsvFile out;
  std::ifstream in(path);
  if (!in) {
    out.reason = "cannot open";
    return out;
  }
  std::string line;
  if (!std::getline(in, line)) {
    out.reason = "empty file";
    return out;
  }
  std::vector<std::string> header = split_on(trim(line), ',');
  std::vector<std::string> expected = {"t"};
  expected.insert(expected.end(), kImuChannels.begin(), kImuChannels.end());
  if (header != expected) {
    out.reason = "header has " + std::to_string(header.size() > 0 ? header.size() - 1 : 0) +
                 " channels, expected t,ax,ay,az,gx,gy,gz";
    return out;
  }
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    auto cells = split_on(line, ',');
    if (cells.size() != expected.size()) {
      out.reason = "line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) + " columns, expected " +
                   std::to_string(expected.size());
      return out;
    }
    std::vector<double> row(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      char* end = nullptr;
      row[i] = std::strtod(cells[i].c_str(), &end);
      if (end == cells[i].c_str()) row[i] = std::numeric_limits<double>::quiet_NaN();
    }
    if (!row_finite(row)) {
      ++out.dropped;
      continue;
    }
    rows.push_back(std::move(row));
  }
  out.channels = to_matrix(rows, 1, kImuChannels.size());
  out.ok = true;
  return out;
}

IngestResult ingest_csv(const fs::path& root) {
  IngestResult result;
  result.channel_names = kImuChannels;
  int rate = 0;
  std::vector<std::string> class_names;
  if (fs::exists(root / "manifest.json")) {
    std::ifstream in(root / "manifest.json");
    auto j = nlohmann::json::parse(in);
    rate = j.value("sample_rate_hz", 0);
    class_names = j.value("class_names", std::vector<std::string>{});
  }

  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  static const std::regex name_re(R"(subject-([^_]+)_activity-(\d+)_trial-([^.]+)\.csv)");
  int max_label = -1;
  for (const auto& f : files) {
    std::smatch m;
    const std::string fname = f.filename().string();
    if (!std::regex_match(fname, m, name_re)) {
      result.rejected.push_back(f.string() + ": file name does not match subject-<id>_activity-<label>_trial-<n>.csv");
      continue;
    }
    CsvFile csv = read_trial_csv(f);
    if (!csv.ok) {
      result.rejected.push_back(f.string() + ": " + csv.reason);
      continue;
    }
    if (csv.dropped) spdlog::info("{}: dropped {} non-finite rows", f.string(), csv.dropped);
    result.dropped_rows += csv.dropped;
    SensorRecording rec;
    rec.subject_id = m[1].str();
    rec.activity_label = std::stoi(m[2].str());
    rec.channels = std::move(csv.channels);
    rec.sample_rate_hz = rate;
    rec.source = f.string();
    max_label = std::max(max_label, rec.activity_label);
    result.recordings.push_back(std::move(rec));
  }
  result.class_count = std::max<int>(max_label + 1, static_cast<int>(class_names.size()));
  return result;
}

IngestResult ingest_uci_raw(const fs::path& raw) {
  IngestResult result;
  result.channel_names = kImuChannels;
  result.class_count = 6;
  const auto labels = read_numeric_rows(raw / "labels.txt");
  std::map<std::pair<int, int>, MatrixF> cache;
  auto load_pair = [&](int exp, int user) -> const MatrixF& {
    auto key = std::make_pair(exp, user);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    char suffix[64];
    std::snprintf(suffix, sizeof(suffix), "_exp%02d_user%02d.txt", exp, user);
    auto acc = read_numeric_rows(raw / ("acc" + std::string(suffix)));
    auto gyro = read_numeric_rows(raw / ("gyro" + std::string(suffix)));
    const std::size_t n = std::min(acc.size(), gyro.size());
    if (acc.size() != gyro.size()) {
      result.rejected.push_back("exp" + std::to_string(exp) + ": acc/gyro length mismatch, truncated to " +
                                std::to_string(n));
    }
    std::vector<std::vector<double>> rows;
    rows.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (acc[i].size() != 3 || gyro[i].size() != 3) throw ConfigError("malformed UCI raw row in exp" + std::to_string(exp));
      std::vector<double> row = acc[i];
      row.insert(row.end(), gyro[i].begin(), gyro[i].end());
      rows.push_back(std::move(row));
    }
    return cache.emplace(key, to_matrix(rows, 0, 6)).first->second;
  };

  for (const auto& row : labels) {
    if (row.size() != 5) throw ConfigError("malformed labels.txt row");
    const int exp = static_cast<int>(row[0]);
    const int user = static_cast<int>(row[1]);
    const int act = static_cast<int>(row[2]);
    if (act < 1 || act > 6) continue;  // postural transitions
    const auto start = static_cast<Eigen::Index>(row[3]) - 1;
    const auto end = static_cast<Eigen::Index>(row[4]);
    const MatrixF& full = load_pair(exp, user);
    if (start < 0 || end > full.rows() || start >= end) {
      result.rejected.push_back("labels.txt: segment exp" + std::to_string(exp) + " out of range");
      continue;
    }
    MatrixF seg = full.middleRows(start, end - start);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index r = 0; r < seg.rows(); ++r) {
      if (seg.row(r).allFinite()) keep.push_back(r);
    }
    result.dropped_rows += static_cast<std::size_t>(seg.rows()) - keep.size();
    MatrixF clean(static_cast<Eigen::Index>(keep.size()), 6);
    for (std::size_t i = 0; i < keep.size(); ++i) clean.row(static_cast<Eigen::Index>(i)) = seg.row(keep[i]);
    SensorRecording rec;
    rec.subject_id = std::to_string(user);
    rec.activity_label = act - 1;
    rec.channels = std::move(clean);
    rec.sample_rate_hz = 50;
    rec.source = "exp" + std::to_string(exp);
    result.recordings.push_back(std::move(rec));
  }
  return result;
}

IngestResult ingest_uci_inertial(const fs::path& root) {
  IngestResult result;
  result.channel_names = kImuChannels;
  result.class_count = 6;
  const std::vector<std::string> signals = {"total_acc_x", "total_acc_y", "total_acc_z",
                                            "body_gyro_x", "body_gyro_y", "body_gyro_z"};
  for (const std::string part : {"train", "test"}) {
    const fs::path dir = root / part;
    if (!fs::exists(dir / "Inertial Signals")) continue;
    const auto subjects = read_numeric_rows(dir / ("subject_" + part + ".txt"));
    const auto labels = read_numeric_rows(dir / ("y_" + part + ".txt"));
    std::vector<std::vector<std::vector<double>>> channels;
    for (const auto& s : signals) channels.push_back(read_numeric_rows(dir / "Inertial Signals" / (s + "_" + part + ".txt")));
    const std::size_t n = subjects.size();
    if (labels.size() != n) throw ConfigError("UCI-HAR " + part + ": subject/label row count mismatch");
    for (const auto& ch : channels) {
      if (ch.size() != n) throw ConfigError("UCI-HAR " + part + ": signal row count mismatch");
    }
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t len = channels[0][i].size();
      bool consistent = std::all_of(channels.begin(), channels.end(), [&](const auto& ch) { return ch[i].size() == len; });
      if (!consistent) {
        result.rejected.push_back(part + " row " + std::to_string(i) + ": ragged channels");
        continue;
      }
      MatrixF m(static_cast<Eigen::Index>(len), 6);
      for (std::size_t c = 0; c < 6; ++c) {
        for (std::size_t t = 0; t < len; ++t) m(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c)) = static_cast<float>(channels[c][i][t]);
      }
      std::vector<Eigen::Index> keep;
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        if (m.row(r).allFinite()) keep.push_back(r);
      }
      result.dropped_rows += static_cast<std::size_t>(m.rows()) - keep.size();
      MatrixF clean(static_cast<Eigen::Index>(keep.size()), 6);
      for (std::size_t k = 0; k < keep.size(); ++k) clean.row(static_cast<Eigen::Index>(k)) = m.row(keep[k]);
      SensorRecording rec;
      rec.subject_id = std::to_string(static_cast<int>(subjects[i][0]));
      rec.activity_label = static_cast<int>(labels[i][0]) - 1;
      rec.channels = std::move(clean);
      rec.sample_rate_hz = 50;
      rec.source = part + ":" + std::to_string(i);
      result.recordings.push_back(std::move(rec));
    }
  }
  return result;
}

}  // namespace

DatasetKind parse_dataset_kind(const std::string& name) {
  if (name == "uci_har") return DatasetKind::uci_har;
  if (name == "usc_had") return DatasetKind::usc_had;
  if (name == "motion_sense") return DatasetKind::motion_sense;
  if (name == "synthetic") return DatasetKind::synthetic;
  if (name == "csv") return DatasetKind::csv;
  throw ConfigError("unknown dataset '" + name + "' (expected uci_har|usc_had|motion_sense|synthetic|csv)");
}

std::string to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::uci_har: return "uci_har";
    case DatasetKind::usc_had: return "usc_had";
    case DatasetKind::motion_sense: return "motion_sense";
    case DatasetKind::synthetic: return "synthetic";
    case DatasetKind::csv: return "csv";
  }
  return "?";
}

std::set<std::string> WindowedDataset::subjects() const {
  std::set<std::string> out;
  for (const auto& w : windows) out.insert(w.subject_id);
  return out;
}

std::vector<std::size_t> WindowedDataset::class_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(std::max(class_count, 0)), 0);
  for (const auto& w : windows) ++counts.at(static_cast<std::size_t>(w.activity_label));
  return counts;
}

WindowedDataset WindowedDataset::like() const {
  WindowedDataset out = *this;
  out.windows.clear();
  return out;
}

IngestResult generate_synthetic(const SyntheticConfig& cfg) {
  if (cfg.classes < 1 || cfg.subjects < 1 || cfg.trials < 1 || cfg.length < 1 || cfg.sample_rate_hz < 1) {
    throw ConfigError("synthetic: classes, subjects, trials, length and rate must be positive");
  }
  IngestResult result;
  result.channel_names = kImuChannels;
  result.class_count = cfg.classes;
  constexpr double two_pi = 2.0 * std::numbers::pi;

  for (int s = 0; s < cfg.subjects; ++s) {
    Rng subject_rng(derive_seed(cfg.seed, "synthetic.subject", static_cast<std::uint64_t>(s)));
    std::uniform_real_distribution<double> jitter(0.9, 1.1);
    std::uniform_real_distribution<double> scale(0.8, 1.2);
    const double subject_tempo = jitter(subject_rng);
    const double subject_gain = scale(subject_rng);

    for (int c = 0; c < cfg.classes; ++c) {
      const int family = c % 3;
      const int variant = c / 3;
      for (int t = 0; t < cfg.trials; ++t) {
        const auto idx = static_cast<std::uint64_t>((s * cfg.classes + c) * cfg.trials + t);
        Rng rng(derive_seed(cfg.seed, "synthetic.trial", idx));
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::uniform_real_distribution<double> phase(0.0, two_pi);
        const double phi = phase(rng);
        MatrixF x(cfg.length, 6);
        for (int ch = 0; ch < 6; ++ch) {
          const double gain = subject_gain * (0.6 + 0.1 * ch);
          const double offset = ch < 3 ? 0.2 * (ch - 1) : 0.0;
          for (int i = 0; i < cfg.length; ++i) {
            double v = 0.0;
            switch (family) {
              case 0: {
                const double freq = (1.2 + 0.8 * variant) * subject_tempo;
                v = std::sin(two_pi * freq * i / cfg.sample_rate_hz + phi + 0.5 * ch);
                break;
              }
              case 1:
                v = gauss(rng);
                break;
              default: {
                const double period = (30.0 + 10.0 * variant) * subject_tempo;
                v = std::sin(two_pi * i / period + phi + 0.5 * ch) >= 0.0 ? 1.0 : -1.0;
                break;
              }
            }
            x(i, ch) = static_cast<float>(offset + gain * v + cfg.noise * gauss(rng));
          }
        }
        SensorRecording rec;
        rec.subject_id = std::to_string(s + 1);
        rec.activity_label = c;
        rec.channels = std::move(x);
        rec.sample_rate_hz = cfg.sample_rate_hz;
        rec.source = "synthetic:" + std::to_string(idx);
        result.recordings.push_back(std::move(rec));
      }
    }
  }
  return result;
}

IngestResult ingest(const fs::path& root, DatasetKind kind, const SyntheticConfig& synth) {
  if (kind == DatasetKind::synthetic) return generate_synthetic(synth);
  if (!fs::exists(root) || !fs::is_directory(root)) {
    throw ConfigError("dataset root '" + root.string() + "' does not exist");
  }
  IngestResult result;
  switch (kind) {
    case DatasetKind::uci_har:
      if (fs::exists(root / "RawData" / "labels.txt")) {
        result = ingest_uci_raw(root / "RawData");
      } else if (fs::exists(root / "train" / "Inertial Signals") || fs::exists(root / "test" / "Inertial Signals")) {
        result = ingest_uci_inertial(root);
      } else {
        throw ConfigError("'" + root.string() + "' has neither RawData/labels.txt nor train/Inertial Signals");
      }
      break;
    default:
      result = ingest_csv(root);
      break;
  }
  for (const auto& r : result.rejected) spdlog::warn("rejected {}", r);
  if (result.dropped_rows) spdlog::info("ingest: dropped {} rows with NaN/Inf", result.dropped_rows);
  if (result.recordings.empty()) throw ConfigError("no usable recordings under '" + root.string() + "'");
  return result;
}

int window_stride(int window_length, double overlap_fraction) {
  if (window_length <= 0) throw ConfigError("window length must be positive");
  if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0)) throw ConfigError("overlap fraction must lie in [0, 1)");
  const long stride = std::lround(window_length * (1.0 - overlap_fraction));
  if (stride < 1) throw ConfigError("overlap fraction leaves a zero stride");
  return static_cast<int>(stride);
}

WindowingResult window(const std::vector<SensorRecording>& recordings, int window_length, double overlap_fraction,
                       int class_count, std::vector<std::string> channel_names) {
  const int stride = window_stride(window_length, overlap_fraction);
  WindowingResult out;
  WindowedDataset& ds = out.dataset;
  ds.window_length = window_length;
  ds.stride = stride;
  ds.class_count = class_count;
  ds.channel_names = std::move(channel_names);
  ds.channels = recordings.empty() ? 0 : static_cast<int>(recordings.front().channels.cols());
  if (ds.channel_names.empty()) {
    for (int c = 0; c < ds.channels; ++c) ds.channel_names.push_back("ch" + std::to_string(c));
  }
  ds.sample_rate_hz = recordings.empty() ? 0 : recordings.front().sample_rate_hz;

  for (const auto& rec : recordings) {
    if (rec.channels.cols() != ds.channels) throw ConfigError("channel count differs across recordings: " + rec.source);
    if (rec.activity_label < 0 || rec.activity_label >= class_count) {
      throw ConfigError("activity label " + std::to_string(rec.activity_label) + " outside [0, " +
                        std::to_string(class_count) + ") in " + rec.source);
    }
    const auto len = rec.channels.rows();
    if (len < window_length) {
      ++out.skipped_recordings;
      continue;
    }
    const auto count = (len - window_length) / stride + 1;
    for (Eigen::Index i = 0; i < count; ++i) {
      SensorWindow w;
      w.values = rec.channels.middleRows(i * stride, window_length);
      w.activity_label = rec.activity_label;
      w.subject_id = rec.subject_id;
      w.id = static_cast<std::int64_t>(ds.windows.size());
      ds.windows.push_back(std::move(w));
    }
  }
  if (out.skipped_recordings) {
    spdlog::info("window: skipped {} recordings shorter than {} samples", out.skipped_recordings, window_length);
  }
  return out;
}

SplitSpec random_split_spec(const std::set<std::string>& subjects, double test_fraction, double val_fraction,
                            std::uint64_t seed) {
  std::vector<std::string> pool(subjects.begin(), subjects.end());
  Rng rng(derive_seed(seed, "split"));
  std::shuffle(pool.begin(), pool.end(), rng);
  SplitSpec spec;
  spec.seed = seed;
  auto take = [&](double fraction, std::set<std::string>& into) {
    auto n = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(pool.size())));
    if (fraction > 0.0 && n == 0 && pool.size() > 1) n = 1;
    n = std::min(n, pool.empty() ? 0 : pool.size() - 1);  // keep at least one training subject
    into.insert(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n));
    pool.erase(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n));
  };
  take(test_fraction, spec.test_subjects);
  take(val_fraction, spec.val_subjects);
  spec.train_subjects.insert(pool.begin(), pool.end());
  return spec;
}

SplitSpec usc_had_split_spec(const std::set<std::string>& subjects) {
  SplitSpec spec;
  for (const auto& s : subjects) {
    if (s == "11" || s == "12") {
      spec.val_subjects.insert(s);
    } else if (s == "13" || s == "14") {
      spec.test_subjects.insert(s);
    } else {
      spec.train_subjects.insert(s);
    }
  }
  return spec;
}

SplitResult split(const WindowedDataset& dataset, const SplitSpec& spec) {
  auto overlaps = [](const std::set<std::string>& a, const std::set<std::string>& b) {
    return std::any_of(a.begin(), a.end(), [&](const std::string& s) { return b.count(s) > 0; });
  };
  if (overlaps(spec.train_subjects, spec.val_subjects) || overlaps(spec.train_subjects, spec.test_subjects) ||
      overlaps(spec.val_subjects, spec.test_subjects)) {
    throw ConfigError("split: subject sets are not disjoint");
  }
  SplitResult out{dataset.like(), dataset.like(), dataset.like(), {}};
  for (const auto& w : dataset.windows) {
    if (spec.train_subjects.count(w.subject_id)) {
      out.train.windows.push_back(w);
    } else if (spec.val_subjects.count(w.subject_id)) {
      out.val.windows.push_back(w);
    } else if (spec.test_subjects.count(w.subject_id)) {
      out.test.windows.push_back(w);
    } else {
      throw ConfigError("split: subject '" + w.subject_id + "' is not assigned to any split");
    }
  }
  if (out.val.empty()) out.warnings.push_back("validation split is empty");
  if (out.test.empty()) out.warnings.push_back("test split is empty");
  for (const auto& w : out.warnings) spdlog::warn("split: {}", w);
  return out;
}

WindowedDataset label_budget(const WindowedDataset& train, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("label fraction must lie in (0, 1]");
  if (fraction == 1.0) return train;
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(train.class_count));
  for (std::size_t i = 0; i < train.windows.size(); ++i) {
    by_class.at(static_cast<std::size_t>(train.windows[i].activity_label)).push_back(i);
  }
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    if (members.empty()) throw ConfigError("label budget: class " + std::to_string(c) + " has no training windows");
    const auto n = std::max<long>(1, std::lround(fraction * static_cast<double>(members.size())));
    Rng rng(derive_seed(seed, "label_budget", c));
    std::shuffle(members.begin(), members.end(), rng);
    keep.insert(keep.end(), members.begin(), members.begin() + n);
  }
  std::sort(keep.begin(), keep.end());
  WindowedDataset out = train.like();
  out.windows.reserve(keep.size());
  for (auto i : keep) out.windows.push_back(train.windows[i]);
  return out;
}

ChannelStats channel_stats(const WindowedDataset& dataset) {
  const auto C = static_cast<std::size_t>(dataset.channels);
  std::vector<double> sum(C, 0.0), sq(C, 0.0);
  double n = 0.0;
  for (const auto& w : dataset.windows) {
    for (Eigen::Index c = 0; c < w.values.cols(); ++c) {
      sum[static_cast<std::size_t>(c)] += w.values.col(c).cast<double>().sum();
      sq[static_cast<std::size_t>(c)] += w.values.col(c).cast<double>().squaredNorm();
    }
    n += static_cast<double>(w.values.rows());
  }
  ChannelStats stats;
  for (std::size_t c = 0; c < C; ++c) {
    const double mean = n > 0 ? sum[c] / n : 0.0;
    const double var = n > 0 ? std::max(0.0, sq[c] / n - mean * mean) : 0.0;
    stats.mean.push_back(static_cast<float>(mean));
    stats.stddev.push_back(static_cast<float>(var > 1e-12 ? std::sqrt(var) : 1.0));
  }
  return stats;
}

void normalize(WindowedDataset& dataset, const ChannelStats& stats) {
  if (stats.mean.size() != static_cast<std::size_t>(dataset.channels)) {
    throw std::invalid_argument("normalize: channel stats do not match dataset channels");
  }
  for (auto& w : dataset.windows) {
    for (Eigen::Index c = 0; c < w.values.cols(); ++c) {
      const auto k = static_cast<std::size_t>(c);
      w.values.col(c) = (w.values.col(c).array() - stats.mean[k]) / stats.stddev[k];
    }
  }
}

std::vector<float> gather(const WindowedDataset& dataset, std::span<const std::size_t> indices) {
  const std::size_t per = static_cast<std::size_t>(dataset.window_length) * static_cast<std::size_t>(dataset.channels);
  std::vector<float> out(indices.size() * per);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const MatrixF& v = dataset.windows.at(indices[i]).values;
    std::copy(v.data(), v.data() + per, out.begin() + static_cast<std::ptrdiff_t>(i * per));
  }
  return out;
}

std::vector<float> gather_all(const WindowedDataset& dataset) {
  std::vector<std::size_t> idx(dataset.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return gather(dataset, idx);
}

std::vector<int> labels_of(const WindowedDataset& dataset) {
  std::vector<int> out;
  out.reserve(dataset.size());
  for (const auto& w : dataset.windows) out.push_back(w.activity_label);
  return out;
}

namespace {

void put_split(TensorArchive& ar, const std::string& name, const WindowedDataset& ds,
               const std::vector<std::string>& subject_table) {
  const auto n = static_cast<std::int64_t>(ds.size());
  ar.put_f32(name + "/values", {n, ds.window_length, ds.channels}, gather_all(ds));
  std::vector<std::int32_t> labels, subjects, ids;
  for (const auto& w : ds.windows) {
    labels.push_back(w.activity_label);
    auto it = std::lower_bound(subject_table.begin(), subject_table.end(), w.subject_id);
    subjects.push_back(static_cast<std::int32_t>(it - subject_table.begin()));
    ids.push_back(static_cast<std::int32_t>(w.id));
  }
  ar.put_i32(name + "/labels", {n}, labels);
  ar.put_i32(name + "/subjects", {n}, subjects);
  ar.put_i32(name + "/ids", {n}, ids);
}

WindowedDataset get_split(const TensorArchive& ar, const std::string& name, const WindowedDataset& header,
                          const std::vector<std::string>& subject_table) {
  WindowedDataset ds = header.like();
  const auto values = ar.get_f32(name + "/values");
  const auto labels = ar.get_i32(name + "/labels");
  const auto subjects = ar.get_i32(name + "/subjects");
  const auto ids = ar.get_i32(name + "/ids");
  const std::size_t per = static_cast<std::size_t>(ds.window_length) * static_cast<std::size_t>(ds.channels);
  if (values.size() != labels.size() * per) throw std::runtime_error("dataset cache: " + name + " tensor size mismatch");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    SensorWindow w;
    w.values = Eigen::Map<const MatrixF>(values.data() + i * per, ds.window_length, ds.channels);
    w.activity_label = labels[i];
    w.subject_id = subject_table.at(static_cast<std::size_t>(subjects[i]));
    w.id = ids[i];
    ds.windows.push_back(std::move(w));
  }
  return ds;
}

}  // namespace

void save_cache(const fs::path& path, const DatasetCache& cache) {
  std::set<std::string> all;
  for (const auto* ds : {&cache.train, &cache.val, &cache.test}) {
    auto s = ds->subjects();
    all.insert(s.begin(), s.end());
  }
  const std::vector<std::string> table(all.begin(), all.end());
  const WindowedDataset& h = cache.train;
  TensorArchive ar;
  auto& m = ar.meta();
  m["format"] = "clustercl.dataset/1";
  m["dataset"] = cache.dataset_name;
  m["window_length"] = h.window_length;
  m["stride"] = h.stride;
  m["overlap_fraction"] = cache.overlap_fraction;
  m["class_count"] = h.class_count;
  m["channels"] = h.channels;
  m["channel_names"] = h.channel_names;
  m["sample_rate_hz"] = h.sample_rate_hz;
  m["seed"] = cache.seed;
  m["subjects"] = table;
  m["split"] = {{"train_subjects", cache.spec.train_subjects},
                {"val_subjects", cache.spec.val_subjects},
                {"test_subjects", cache.spec.test_subjects},
                {"label_fraction", cache.spec.label_fraction},
                {"seed", cache.spec.seed}};
  m["normalization"] = {{"mean", cache.stats.mean}, {"std", cache.stats.stddev}};
  put_split(ar, "train", cache.train, table);
  put_split(ar, "val", cache.val, table);
  put_split(ar, "test", cache.test, table);
  ar.save(path);
}

DatasetCache load_cache(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("dataset cache '" + path.string() + "' does not exist");
  const TensorArchive ar = TensorArchive::load(path);
  const auto& m = ar.meta();
  if (m.value("format", "") != "clustercl.dataset/1") throw ConfigError("'" + path.string() + "' is not a dataset cache");
  WindowedDataset header;
  header.window_length = m.at("window_length").get<int>();
  header.stride = m.at("stride").get<int>();
  header.class_count = m.at("class_count").get<int>();
  header.channels = m.at("channels").get<int>();
  header.channel_names = m.at("channel_names").get<std::vector<std::string>>();
  header.sample_rate_hz = m.at("sample_rate_hz").get<int>();
  const auto table = m.at("subjects").get<std::vector<std::string>>();

  DatasetCache cache;
  cache.dataset_name = m.at("dataset").get<std::string>();
  cache.overlap_fraction = m.at("overlap_fraction").get<double>();
  cache.seed = m.at("seed").get<std::uint64_t>();
  const auto& sp = m.at("split");
  cache.spec.train_subjects = sp.at("train_subjects").get<std::set<std::string>>();
  cache.spec.val_subjects = sp.at("val_subjects").get<std::set<std::string>>();
  cache.spec.test_subjects = sp.at("test_subjects").get<std::set<std::string>>();
  cache.spec.label_fraction = sp.at("label_fraction").get<double>();
  cache.spec.seed = sp.at("seed").get<std::uint64_t>();
  cache.stats.mean = m.at("normalization").at("mean").get<std::vector<float>>();
  cache.stats.stddev = m.at("normalization").at("std").get<std::vector<float>>();
  cache.train = get_split(ar, "train", header, table);
  cache.val = get_split(ar, "val", header, table);
  cache.test = get_split(ar, "test", header, table);
  return cache;
}

}  // namespace clustercl

#include "clustercl/archive.hpp"

#include "clustercl/common.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>

namespace clustercl {

static_assert(std::endian::native == std::endian::little, "archive format assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'C', 'C', 'L', 'A', 'R', 'C', 'H', '1'};

std::int64_t element_count(const std::vector<std::int64_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>{});
}

const char* dtype_tag(DType d) { return d == DType::f32 ? "f32" : "i32"; }

DType parse_dtype(const std::string& s) {
  if (s == "f32") return DType::f32;
  if (s == "i32") return DType::i32;
  throw std::runtime_error("archive: unknown dtype '" + s + "'");
}

}  // namespace

void TensorArchive::put(const std::string& name, DType dtype, std::vector<std::int64_t> shape, const void* data,
                        std::size_t count) {
  if (static_cast<std::int64_t>(count) != element_count(shape)) {
    throw std::invalid_argument("archive: tensor '" + name + "' data size does not match its shape");
  }
  Entry e{name, dtype, std::move(shape), std::vector<char>(count * 4)};
  if (count) std::memcpy(e.bytes.data(), data, count * 4);
  auto it = std::find_if(entries_.begin(), entries_.end(), [&](const Entry& x) { return x.name == name; });
  if (it != entries_.end()) {
    *it = std::move(e);
  } else {
    entries_.push_back(std::move(e));
  }
}

void TensorArchive::put_f32(const std::string& name, std::vector<std::int64_t> shape, std::span<const float> data) {
  put(name, DType::f32, std::move(shape), data.data(), data.size());
}

void TensorArchive::put_i32(const std::string& name, std::vector<std::int64_t> shape,
                            std::span<const std::int32_t> data) {
  put(name, DType::i32, std::move(shape), data.data(), data.size());
}

const TensorArchive::Entry& TensorArchive::find(const std::string& name) const {
  auto it = std::find_if(entries_.begin(), entries_.end(), [&](const Entry& x) { return x.name == name; });
  if (it == entries_.end()) throw std::runtime_error("archive: missing tensor '" + name + "'");
  return *it;
}

bool TensorArchive::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& x) { return x.name == name; });
}

std::vector<std::int64_t> TensorArchive::shape(const std::string& name) const { return find(name).shape; }

std::vector<float> TensorArchive::get_f32(const std::string& name) const {
  const Entry& e = find(name);
  if (e.dtype != DType::f32) throw std::runtime_error("archive: tensor '" + name + "' is not f32");
  std::vector<float> out(e.bytes.size() / 4);
  if (!out.empty()) std::memcpy(out.data(), e.bytes.data(), e.bytes.size());
  return out;
}

std::vector<std::int32_t> TensorArchive::get_i32(const std::string& name) const {
  const Entry& e = find(name);
  if (e.dtype != DType::i32) throw std::runtime_error("archive: tensor '" + name + "' is not i32");
  std::vector<std::int32_t> out(e.bytes.size() / 4);
  if (!out.empty()) std::memcpy(out.data(), e.bytes.data(), e.bytes.size());
  return out;
}

std::vector<std::string> TensorArchive::names() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) out.push_back(e.name);
  return out;
}

void TensorArchive::save(const std::filesystem::path& path) const {
  nlohmann::json manifest = meta_;
  nlohmann::json index = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& e : entries_) {
    index.push_back({{"name", e.name},
                     {"dtype", dtype_tag(e.dtype)},
                     {"shape", e.shape},
                     {"offset", offset},
                     {"nbytes", e.bytes.size()}});
    offset += e.bytes.size();
  }
  manifest["tensors"] = std::move(index);
  const std::string text = manifest.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("archive: cannot open '" + tmp.string() + "' for writing");
    out.write(kMagic, sizeof(kMagic));
    const std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& e : entries_) out.write(e.bytes.data(), static_cast<std::streamsize>(e.bytes.size()));
    if (!out) throw std::runtime_error("archive: write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

TensorArchive TensorArchive::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("archive: cannot open '" + path.string() + "'");
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("archive: '" + path.string() + "' is not a clustercl archive");
  }
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("archive: truncated manifest in '" + path.string() + "'");

  TensorArchive ar;
  nlohmann::json manifest = nlohmann::json::parse(text);
  const nlohmann::json index = manifest.at("tensors");
  manifest.erase("tensors");
  ar.meta_ = std::move(manifest);

  std::vector<char> payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  for (const auto& t : index) {
    Entry e;
    e.name = t.at("name").get<std::string>();
    e.dtype = parse_dtype(t.at("dtype").get<std::string>());
    e.shape = t.at("shape").get<std::vector<std::int64_t>>();
    const auto off = t.at("offset").get<std::uint64_t>();
    const auto nbytes = t.at("nbytes").get<std::uint64_t>();
    if (off + nbytes > payload.size() || static_cast<std::int64_t>(nbytes / 4) != element_count(e.shape)) {
      throw std::runtime_error("archive: corrupt tensor index for '" + e.name + "'");
    }
    e.bytes.assign(payload.begin() + static_cast<std::ptrdiff_t>(off),
                   payload.begin() + static_cast<std::ptrdiff_t>(off + nbytes));
    ar.entries_.push_back(std::move(e));
  }
  return ar;
}

}  // namespace clustercl

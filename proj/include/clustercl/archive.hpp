#pragma once

// Binary container shared by dataset caches and checkpoints.
//
// Layout (little-endian):
//   bytes 0..7   magic "CCLARCH1"
//   bytes 8..15  uint64 manifest length M
//   next M bytes manifest JSON; its "tensors" array indexes the payload as
//                {name, dtype: "f32"|"i32", shape, offset, nbytes}, offsets
//                relative to the first payload byte
//   remainder    tensor payloads, back to back in manifest order

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace clustercl {

enum class DType { f32, i32 };

class TensorArchive {
 public:
  // Free-form manifest fields; "tensors" is reserved.
  nlohmann::json& meta() { return meta_; }
  const nlohmann::json& meta() const { return meta_; }

  void put_f32(const std::string& name, std::vector<std::int64_t> shape, std::span<const float> data);
  void put_i32(const std::string& name, std::vector<std::int64_t> shape, std::span<const std::int32_t> data);

  bool contains(const std::string& name) const;
  std::vector<std::int64_t> shape(const std::string& name) const;
  std::vector<float> get_f32(const std::string& name) const;
  std::vector<std::int32_t> get_i32(const std::string& name) const;
  std::vector<std::string> names() const;

  // Writes to a sibling temp file and renames, so a crash never leaves a torn archive.
  void save(const std::filesystem::path& path) const;
  static TensorArchive load(const std::filesystem::path& path);

 private:
  struct Entry {
    std::string name;
    DType dtype;
    std::vector<std::int64_t> shape;
    std::vector<char> bytes;
  };
  const Entry& find(const std::string& name) const;
  void put(const std::string& name, DType dtype, std::vector<std::int64_t> shape, const void* data,
           std::size_t count);

  nlohmann::json meta_ = nlohmann::json::object();
  std::vector<Entry> entries_;
};

}  // namespace clustercl

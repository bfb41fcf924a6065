#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "wglab/grid_function.hpp"

namespace wglab {

// Writes to a sibling temporary and renames over the target.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

// Binary field: "WGLF", u32 version (1), u64 cell count, then re/im f64 pairs,
// little endian.
void write_field(const std::filesystem::path& path, const GridFunction& f);
VecC read_field(const std::filesystem::path& path);

// 64-bit FNV-1a, as 16 hex digits.
std::string fnv1a_hex(const std::string& data);

// Stages the files of a result bundle in <out>.partial-<pid> and renames the
// directory to <out> on commit, replacing a previous <out>. An uncommitted
// staging directory is removed on destruction.
class BundleWriter {
 public:
  explicit BundleWriter(std::filesystem::path out);
  ~BundleWriter();
  BundleWriter(const BundleWriter&) = delete;
  BundleWriter& operator=(const BundleWriter&) = delete;

  void add(const std::string& name, const std::string& content);
  void add_field(const std::string& name, const GridFunction& f);
  bool has(const std::string& name) const;
  void commit();
  const std::filesystem::path& out() const { return out_; }

 private:
  std::filesystem::path out_;
  std::filesystem::path staging_;
  std::map<std::string, bool> names_;
  bool committed_ = false;
};

}  // namespace wglab

#include "wglab/io.hpp"

#include <unistd.h>

#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace wglab {

namespace fs = std::filesystem;

namespace {

void put_le(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint64_t get_le(const std::string& in, std::size_t& pos, int bytes) {
  if (pos + bytes > in.size()) fail(ErrorCode::Io, "truncated field file");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += bytes;
  return v;
}

std::string encode_field(const VecC& v) {
  std::string out = "WGLF";
  put_le(out, 1, 4);
  put_le(out, static_cast<std::uint64_t>(v.size()), 8);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    for (double x : {v[i].real(), v[i].imag()}) {
      std::uint64_t bits;
      std::memcpy(&bits, &x, 8);
      put_le(out, bits, 8);
    }
  }
  return out;
}

}  // namespace

void write_file_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += fmt::format(".tmp-{}", static_cast<long>(::getpid()));
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) fail(ErrorCode::Io, "cannot open " + tmp.string());
    os.write(content.data(), static_cast<std::streamsize>(content.size()));
    os.flush();
    if (!os) fail(ErrorCode::Io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    fail(ErrorCode::Io, fmt::format("cannot rename onto {}: {}", path.string(), ec.message()));
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_field(const fs::path& path, const GridFunction& f) { write_file_atomic(path, encode_field(f.values)); }

VecC read_field(const fs::path& path) {
  std::string in = read_file(path);
  if (in.size() < 16 || in.compare(0, 4, "WGLF") != 0) fail(ErrorCode::Io, "not a field file: " + path.string());
  std::size_t pos = 4;
  if (get_le(in, pos, 4) != 1) fail(ErrorCode::Io, "unsupported field file version");
  const std::uint64_t n = get_le(in, pos, 8);
  if (in.size() != 16 + 16 * n) fail(ErrorCode::Io, "field file size does not match its header");
  VecC v(static_cast<Eigen::Index>(n));
  for (std::uint64_t i = 0; i < n; ++i) {
    double re, im;
    std::uint64_t a = get_le(in, pos, 8), b = get_le(in, pos, 8);
    std::memcpy(&re, &a, 8);
    std::memcpy(&im, &b, 8);
    v[static_cast<Eigen::Index>(i)] = Complex(re, im);
  }
  return v;
}

std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return fmt::format("{:016x}", h);
}

BundleWriter::BundleWriter(fs::path out) : out_(std::move(out)) {
  staging_ = out_;
  staging_ += fmt::format(".partial-{}", static_cast<long>(::getpid()));
  std::error_code ec;
  fs::remove_all(staging_, ec);
  fs::create_directories(staging_, ec);
  if (ec) fail(ErrorCode::Io, fmt::format("cannot create {}: {}", staging_.string(), ec.message()));
}

BundleWriter::~BundleWriter() {
  if (!committed_) {
    std::error_code ec;
    fs::remove_all(staging_, ec);
  }
}

void BundleWriter::add(const std::string& name, const std::string& content) {
  if (committed_) fail(ErrorCode::Io, "bundle already committed");
  if (name.empty() || name.find("..") != std::string::npos || name.front() == '/')
    fail(ErrorCode::InvalidArgument, "bad artifact name '" + name + "'");
  fs::path p = staging_ / name;
  fs::create_directories(p.parent_path());
  write_file_atomic(p, content);
  names_[name] = true;
}

void BundleWriter::add_field(const std::string& name, const GridFunction& f) { add(name, encode_field(f.values)); }

bool BundleWriter::has(const std::string& name) const { return names_.count(name) > 0; }

void BundleWriter::commit() {
  if (committed_) return;
  std::error_code ec;
  if (out_.has_parent_path()) fs::create_directories(out_.parent_path(), ec);
  fs::path old = out_;
  old += fmt::format(".old-{}", static_cast<long>(::getpid()));
  const bool existed = fs::exists(out_);
  if (existed) {
    fs::rename(out_, old, ec);
    if (ec) fail(ErrorCode::Io, fmt::format("cannot move aside {}: {}", out_.string(), ec.message()));
  }
  fs::rename(staging_, out_, ec);
  if (ec) {
    if (existed) fs::rename(old, out_);
    fail(ErrorCode::Io, fmt::format("cannot publish {}: {}", out_.string(), ec.message()));
  }
  if (existed) fs::remove_all(old, ec);
  committed_ = true;
}

}  // namespace wglab

#pragma once

#include <openssl/evp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "huo/errors.hpp"

namespace huo::lab {

namespace fs = std::filesystem;

/// 17 significant digits, fixed scientific notation.
inline std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", x);
  return buf;
}

/// Minimal CSV table with a header row; numbers formatted by fmt_double.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  template <class... Cells>
  void row(const Cells&... cells) {
    std::vector<std::string> r;
    (r.push_back(cell(cells)), ...);
    if (r.size() != columns_.size()) throw ValidationError("CsvTable: row width differs from header");
    rows_.push_back(std::move(r));
  }

  const std::vector<std::string>& columns() const noexcept { return columns_; }
  std::size_t size() const noexcept { return rows_.size(); }

  std::string str() const {
    std::string out;
    auto line = [&out](const std::vector<std::string>& v) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += v[i];
      }
      out += '\n';
    };
    line(columns_);
    for (const auto& r : rows_) line(r);
    return out;
  }

 private:
  static std::string cell(double x) { return fmt_double(x); }
  static std::string cell(float x) { return fmt_double(x); }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  static std::string cell(bool b) { return b ? "1" : "0"; }
  template <class I>
    requires std::is_integral_v<I>
  static std::string cell(I i) {
    return std::to_string(i);
  }

  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

struct ParsedCsv {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline ParsedCsv read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  ParsedCsv csv;
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path.string() + ": empty CSV");
  csv.columns = split(line, ',');
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    csv.rows.push_back(split(line, ','));
  }
  return csv;
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, data.data(), data.size()) != 1 || EVP_DigestFinal_ex(ctx, md, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error("sha256: OpenSSL digest failed");
  }
  EVP_MD_CTX_free(ctx);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += kHex[md[i] >> 4];
    out += kHex[md[i] & 0xF];
  }
  return out;
}

inline std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

struct ManifestEntry {
  std::string file;
  std::string sha256;
};

/// Files are written into a hidden sibling directory and moved into place by
/// commit(); a destroyed, uncommitted stage removes everything it wrote.
class StagedOutput {
 public:
  explicit StagedOutput(fs::path target) : target_(std::move(target)) {
    if (target_.filename().empty()) target_ = target_.parent_path();
    const fs::path parent = target_.has_parent_path() ? target_.parent_path() : fs::path(".");
    fs::create_directories(parent);
    std::random_device rd;
    for (int attempt = 0; attempt < 16; ++attempt) {
      stage_ = parent / ("." + target_.filename().string() + ".stage-" + std::to_string(rd()));
      if (fs::create_directory(stage_)) return;
    }
    throw ResourceError("cannot create staging directory next to " + target_.string());
  }

  StagedOutput(const StagedOutput&) = delete;
  StagedOutput& operator=(const StagedOutput&) = delete;

  ~StagedOutput() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(stage_, ec);
    }
  }

  const fs::path& target() const noexcept { return target_; }

  void write(const std::string& name, const std::string& contents) {
    const fs::path p = stage_ / name;
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << contents;
    if (!out) throw ResourceError("failed writing " + p.string());
    manifest_.push_back({name, sha256_hex(contents)});
  }

  const std::vector<ManifestEntry>& manifest() const noexcept { return manifest_; }

  /// Replaces the target directory with the staged one.
  void commit() {
    fs::path old;
    if (fs::exists(target_)) {
      old = stage_;
      old += ".old";
      fs::rename(target_, old);
    }
    fs::rename(stage_, target_);
    committed_ = true;
    if (!old.empty()) fs::remove_all(old);
  }

 private:
  fs::path target_;
  fs::path stage_;
  std::vector<ManifestEntry> manifest_;
  bool committed_ = false;
};

/// Single-file atomic write: temp file in the same directory, then rename.
inline void write_file_atomic(const fs::path& path, const std::string& contents) {
  const fs::path parent = path.has_parent_path() ? path.parent_path() : fs::path(".");
  fs::create_directories(parent);
  const fs::path tmp = parent / ("." + path.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    out << contents;
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw ResourceError("failed writing " + path.string());
    }
  }
  fs::rename(tmp, path);
}

}  // namespace huo::lab

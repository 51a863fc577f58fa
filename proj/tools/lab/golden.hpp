#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "lab/io.hpp"

namespace huo::lab {

struct CellDiff {
  std::string file;
  std::size_t row = 0;  // 0-based data row
  std::string column;
  std::string expected;
  std::string actual;
  double abs_error = 0.0;  // NaN for non-numeric mismatches
};

struct FileVerdict {
  std::string file;
  bool pass = false;
  std::string reason;  // empty when the file matches
  std::vector<CellDiff> diffs;
};

struct GoldenReport {
  std::vector<FileVerdict> files;

  bool pass() const {
    return std::all_of(files.begin(), files.end(), [](const FileVerdict& f) { return f.pass; });
  }
  std::size_t diff_count() const {
    std::size_t n = 0;
    for (const auto& f : files) n += f.diffs.size();
    return n;
  }
};

struct GoldenTolerances {
  double default_tol = 1e-9;
  std::map<std::string, double> per_column;

  double for_column(const std::string& c) const {
    const auto it = per_column.find(c);
    return it == per_column.end() ? default_tol : it->second;
  }
};

namespace golden_detail {

inline bool to_double(const std::string& s, double& v) {
  if (s.empty()) return false;
  try {
    std::size_t pos = 0;
    v = std::stod(s, &pos);
    return pos == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace golden_detail

/// Cells match when |a - g| <= tol * max(1, |g|); non-numeric cells must be equal.
inline FileVerdict compare_csv(const std::string& name, const ParsedCsv& golden, const ParsedCsv& actual,
                               const GoldenTolerances& tol) {
  if (golden.columns != actual.columns) {
    std::string g;
    std::string a;
    for (const auto& c : golden.columns) g += (g.empty() ? "" : ",") + c;
    for (const auto& c : actual.columns) a += (a.empty() ? "" : ",") + c;
    throw SchemaError(name + ": column mismatch, golden has [" + g + "], run has [" + a + "]");
  }
  FileVerdict v{name};
  if (golden.rows.size() != actual.rows.size()) {
    v.reason = "row count " + std::to_string(actual.rows.size()) + " differs from golden " + std::to_string(golden.rows.size());
    return v;
  }
  for (std::size_t r = 0; r < golden.rows.size(); ++r) {
    const auto& gr = golden.rows[r];
    const auto& ar = actual.rows[r];
    if (gr.size() != golden.columns.size() || ar.size() != golden.columns.size()) {
      throw SchemaError(name + ": row " + std::to_string(r) + " has the wrong number of cells");
    }
    for (std::size_t c = 0; c < gr.size(); ++c) {
      if (gr[c] == ar[c]) continue;
      double g = 0.0;
      double a = 0.0;
      CellDiff d{name, r, golden.columns[c], gr[c], ar[c], std::nan("")};
      if (golden_detail::to_double(gr[c], g) && golden_detail::to_double(ar[c], a)) {
        d.abs_error = std::abs(a - g);
        if (d.abs_error <= tol.for_column(golden.columns[c]) * std::max(1.0, std::abs(g))) continue;
      }
      v.diffs.push_back(std::move(d));
    }
  }
  v.pass = v.diffs.empty();
  if (!v.pass) v.reason = std::to_string(v.diffs.size()) + " cell(s) outside tolerance";
  return v;
}

/// Compares every CSV in `golden_dir` with the file of the same name in `run_dir`.
inline GoldenReport compare_golden(const fs::path& run_dir, const fs::path& golden_dir, const GoldenTolerances& tol = {}) {
  if (!fs::is_directory(golden_dir)) throw ValidationError("golden directory '" + golden_dir.string() + "' does not exist");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(golden_dir))
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  GoldenReport report;
  for (const auto& g : files) {
    const std::string name = g.filename().string();
    const fs::path a = run_dir / name;
    if (!fs::exists(a)) {
      report.files.push_back({name, false, "missing from run output", {}});
      continue;
    }
    report.files.push_back(compare_csv(name, read_csv(g), read_csv(a), tol));
  }
  return report;
}

inline std::string format_diff(const CellDiff& d) {
  return d.file + " row " + std::to_string(d.row) + " column '" + d.column + "': golden " + d.expected + ", run " +
         d.actual + (std::isnan(d.abs_error) ? std::string() : " (|diff| " + fmt_double(d.abs_error) + ")");
}

}  // namespace huo::lab

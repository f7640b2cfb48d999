#pragma once

#include <array>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <openssl/evp.h>

#include "kgstep/error.hpp"
#include "kgstep/harness/config.hpp"
#include "kgstep/observables.hpp"

namespace kgstep::harness {

namespace fs = std::filesystem;

inline constexpr const char* kVersion = "kgstep 0.1.0";

/// 17 significant digits: enough to round-trip any double.
inline std::string fmt_double(double v) {
  std::array<char, 40> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 17);
  return {buf.data(), res.ptr};
}

/// Shortest form, used for file names such as snapshot_t2.5.csv.
inline std::string fmt_short(double v) {
  std::array<char, 40> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return {buf.data(), res.ptr};
}

class CsvWriter {
 public:
  explicit CsvWriter(const fs::path& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw Error("cannot write '" + path.string() + "'");
  }

  void header(const std::vector<std::string>& cols) {
    for (std::size_t i = 0; i < cols.size(); ++i) out_ << (i ? "," : "") << cols[i];
    out_ << '\n';
  }

  void row(std::initializer_list<double> vals) {
    bool first = true;
    for (double v : vals) {
      out_ << (first ? "" : ",") << fmt_double(v);
      first = false;
    }
    out_ << '\n';
  }

  std::ostream& stream() { return out_; }

  void close() {
    out_.close();
    if (!out_) throw Error("failed writing '" + path_.string() + "'");
  }

 private:
  fs::path path_;
  std::ofstream out_;
};

inline void write_observables_csv(const fs::path& path, const ObservableSeries& s) {
  CsvWriter w(path);
  w.header({"t", "l2_sq", "mean", "variance", "sigma", "energy"});
  for (const auto& r : s.records) w.row({r.t, r.l2_sq, r.mean, r.variance, r.sigma, r.energy});
  w.close();
}

inline void write_snapshot_csv(const fs::path& path, std::span<const double> x, std::span<const double> u) {
  CsvWriter w(path);
  w.header({"x", "u"});
  for (std::size_t i = 0; i < x.size(); ++i) w.row({x[i], u[i]});
  w.close();
}

/// Column-oriented CSV with a header row of names and numeric cells.
struct CsvTable {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;

  const std::vector<double>& column(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return columns[i];
    throw Error("CSV has no column '" + name + "'");
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    cells.push_back(cell);
  }
  return cells;
}

inline CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw Error("'" + path.string() + "' is empty");
  t.names = split_csv_line(line);
  t.columns.resize(t.names.size());
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != t.names.size())
      throw Error(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.names.size()) +
                  " cells, found " + std::to_string(cells.size()));
    for (std::size_t i = 0; i < cells.size(); ++i) {
      double v = 0.0;
      const auto* b = cells[i].data();
      const auto res = std::from_chars(b, b + cells[i].size(), v);
      if (res.ec != std::errc{} || res.ptr != b + cells[i].size())
        throw Error(path.string() + ":" + std::to_string(lineno) + ": not a number: '" + cells[i] + "'");
      t.columns[i].push_back(v);
    }
  }
  return t;
}

inline std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path.string() + "' for hashing");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error("sha256 initialisation failed");
  }
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md.data(), &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  hex.reserve(2 * len);
  char b[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(b, sizeof b, "%02x", md[i]);
    hex += b;
  }
  return hex;
}

/// Run record written next to the artifacts it lists.
struct RunManifest {
  std::string command;
  json config;
  std::string version = kVersion;
  double duration_seconds = 0.0;
  std::string status = "ok";  // ok | failed
  bool partial = false;
  std::string error;
  std::vector<std::string> warnings;
  std::vector<std::string> files;  // names relative to the manifest directory
  json extra = json::object();
};

inline void write_manifest(const fs::path& dir, const RunManifest& m) {
  json j;
  j["tool"] = "kgstep";
  j["version"] = m.version;
  j["command"] = m.command;
  j["status"] = m.status;
  j["partial"] = m.partial;
  if (!m.error.empty()) j["error"] = m.error;
  j["warnings"] = m.warnings;
  j["duration_seconds"] = m.duration_seconds;
  j["config"] = m.config;
  if (!m.extra.empty()) j["results"] = m.extra;
  json files = json::array();
  for (const auto& name : m.files) {
    const fs::path p = dir / name;
    if (!fs::exists(p)) continue;
    files.push_back({{"name", name}, {"bytes", fs::file_size(p)}, {"sha256", sha256_file(p)}});
  }
  j["files"] = files;
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) throw Error("cannot write manifest in '" + dir.string() + "'");
  out << j.dump(2) << '\n';
}

struct ManifestCheck {
  bool ok = true;
  std::vector<std::string> problems;
  int n_files = 0;
};

/// Recomputes every checksum listed in a manifest.
inline ManifestCheck verify_manifest(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw Error("cannot open '" + manifest_path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed manifest: " + std::string(e.what()));
  }
  ManifestCheck c;
  const fs::path dir = manifest_path.parent_path();
  for (const auto& f : j.at("files")) {
    ++c.n_files;
    const std::string name = f.at("name").get<std::string>();
    const fs::path p = dir / name;
    if (!fs::exists(p)) {
      c.ok = false;
      c.problems.push_back(name + ": missing");
      continue;
    }
    if (sha256_file(p) != f.at("sha256").get<std::string>()) {
      c.ok = false;
      c.problems.push_back(name + ": checksum mismatch");
    }
  }
  return c;
}

/// Small matplotlib script that plots observables.csv; emitted on request only.
inline void write_plot_script(const fs::path& dir) {
  std::ofstream out(dir / "plot_observables.py", std::ios::binary);
  out << R"(import csv
import sys
import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "observables.csv"
with open(path) as fh:
    rows = list(csv.DictReader(fh))
t = [float(r["t"]) for r in rows]
fig, ax = plt.subplots(2, 1, sharex=True)
ax[0].plot(t, [float(r["mean"]) for r in rows])
ax[0].set_ylabel("mean position")
ax[1].plot(t, [float(r["sigma"]) for r in rows])
ax[1].set_ylabel("standard deviation")
ax[1].set_xlabel("t")
fig.savefig("observables.png", dpi=120)
)";
}

}  // namespace kgstep::harness

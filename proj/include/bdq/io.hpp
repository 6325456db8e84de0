#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bdq/lattice.hpp"

namespace bdq {

/// Flat binary ensemble layout: little-endian 64-bit header fields
/// (L, a, m, n_t, seed, n_samples) followed by n_samples * n_t L*L fields
/// of little-endian doubles, column-major.
struct EnsembleHeader {
  std::uint64_t L = 0;
  double a = 0.0;
  double m = 0.0;
  std::uint64_t n_t = 1;
  std::uint64_t seed = 0;
  std::uint64_t n_samples = 0;
};

void write_ensemble(const std::filesystem::path& path,
                    const EnsembleHeader& header,
                    const std::vector<Field>& records);

struct LoadedEnsemble {
  EnsembleHeader header;
  std::vector<Field> records;
};

LoadedEnsemble read_ensemble(const std::filesystem::path& path);

/// Deterministic shortest round-trip text for a double.
std::string format_double(double x);

/// Write-to-temp-then-rename so a killed run never leaves a truncated file.
void atomic_write_text(const std::filesystem::path& path,
                       const std::string& content);

/// Small deterministic CSV table builder.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns);
  void add_row(const std::vector<std::string>& cells);
  void add_row(const std::vector<double>& values);
  std::string to_string() const;
  void write(const std::filesystem::path& path) const;
  std::size_t n_rows() const { return rows_.size(); }

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace bdq

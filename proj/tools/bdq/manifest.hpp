#pragma once

#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

#include "bdq/config.hpp"
#include "bdq/io.hpp"

namespace bdq::cli {

struct CheckRecord {
  std::string name;
  double value = 0.0;
  double se = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/**
 * One run directory: manifest, CSV tables, binary ensembles, and the data
 * dictionary. The manifest is written as incomplete at start and finalized
 * atomically, so a killed run never leaves a silently truncated record.
 */
class RunContext {
 public:
  RunContext(std::filesystem::path out_dir, const std::string& experiment,
             const Config& config);

  const std::filesystem::path& dir() const { return dir_; }

  void add_check(const std::string& name, double value, double se,
                 double tolerance, bool pass);
  void add_check(const CheckRecord& check);
  const std::vector<CheckRecord>& checks() const { return checks_; }
  bool all_pass() const;

  void write_csv(const std::string& name, const CsvTable& table);
  void describe_column(const std::string& csv, const std::string& column,
                       const std::string& meaning);

  /// Finalize the manifest (status, checks, wall clock) and emit the data
  /// dictionary. Returns the proposed process exit code.
  int finalize();

 private:
  std::filesystem::path dir_;
  std::string experiment_;
  nlohmann::json manifest_;
  std::vector<CheckRecord> checks_;
  std::vector<std::string> artifacts_;
  std::vector<std::array<std::string, 3>> dictionary_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace bdq::cli

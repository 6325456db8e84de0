#include "bdq/manifest.hpp"

#include <chrono>

namespace bdq::cli {

namespace {

nlohmann::json environment_fingerprint() {
  nlohmann::json env;
#ifdef __VERSION__
  env["compiler"] = __VERSION__;
#endif
  env["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." +
                 std::to_string(EIGEN_MAJOR_VERSION) + "." +
                 std::to_string(EIGEN_MINOR_VERSION);
  env["sizeof_double"] = sizeof(double);
  return env;
}

}  // namespace

RunContext::RunContext(std::filesystem::path out_dir,
                       const std::string& experiment, const Config& config)
    : dir_(std::move(out_dir)), experiment_(experiment),
      start_(std::chrono::steady_clock::now()) {
  std::filesystem::create_directories(dir_);
  manifest_["experiment"] = experiment_;
  manifest_["code_version"] = "bdq 0.1.0";
  manifest_["status"] = "incomplete";
  nlohmann::json cfg = nlohmann::json::object();
  for (const auto& [k, v] : config.values()) cfg[k] = v;
  manifest_["config"] = cfg;
  manifest_["environment"] = environment_fingerprint();
  atomic_write_text(dir_ / "manifest.json", manifest_.dump(2) + "\n");
}

void RunContext::add_check(const std::string& name, double value, double se,
                           double tolerance, bool pass) {
  checks_.push_back({name, value, se, tolerance, pass});
}

void RunContext::add_check(const CheckRecord& check) { checks_.push_back(check); }

bool RunContext::all_pass() const {
  for (const auto& c : checks_) {
    if (!c.pass) return false;
  }
  return true;
}

void RunContext::write_csv(const std::string& name, const CsvTable& table) {
  table.write(dir_ / name);
  artifacts_.push_back(name);
}

void RunContext::describe_column(const std::string& csv,
                                 const std::string& column,
                                 const std::string& meaning) {
  dictionary_.push_back({csv, column, meaning});
}

int RunContext::finalize() {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : checks_) {
    checks.push_back({{"name", c.name},
                      {"value", c.value},
                      {"se", c.se},
                      {"tolerance", c.tolerance},
                      {"pass", c.pass}});
  }
  manifest_["checks"] = checks;
  manifest_["artifacts"] = artifacts_;
  manifest_["status"] = "complete";
  const auto elapsed = std::chrono::steady_clock::now() - start_;
  manifest_["wall_clock_sec"] =
      std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count() /
      1000.0;

  if (!dictionary_.empty()) {
    std::string dict = "file,column,meaning\n";
    for (const auto& row : dictionary_) {
      dict += row[0] + "," + row[1] + "," + row[2] + "\n";
    }
    atomic_write_text(dir_ / "data_dictionary.csv", dict);
  }
  atomic_write_text(dir_ / "manifest.json", manifest_.dump(2) + "\n");
  return all_pass() ? 0 : 1;
}

}  // namespace bdq::cli

#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <string>

#include "softics/scenario.hpp"

namespace fixtures {

namespace fs = std::filesystem;

inline fs::path scenario_dir() { return fs::path(SOFTICS_SCENARIO_DIR); }
inline fs::path scenario_file(const std::string& name) { return scenario_dir() / (name + ".json"); }

inline softics::scenario::ScenarioConfig load(const std::string& name) {
  auto c = softics::scenario::ScenarioConfig::load(scenario_file(name));
  c.outputs = {};
  return c;
}

// Fresh scratch directory per call, removed by the destructor.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("softics-test-" + std::to_string(rd()) + "-" + std::to_string(counter.fetch_add(1)));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

// Bundled scenarios are deterministic, so one run per name serves every test.
inline const softics::scenario::RunResult& cached_run(const std::string& name) {
  static std::mutex mu;
  static std::map<std::string, softics::scenario::RunResult> runs;
  std::lock_guard lock(mu);
  auto it = runs.find(name);
  if (it == runs.end()) it = runs.emplace(name, softics::scenario::run_scenario(load(name))).first;
  return it->second;
}

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace fixtures

#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace cpmamba::cli {

// Hex SHA-1 of "blob <size>\0" + contents, as `git hash-object` prints it.
std::string git_blob_sha1(std::string_view contents);

// Named wall-clock stages of one command.
class StageTimer {
 public:
  void start(std::string name);
  void stop();
  nlohmann::json to_json() const;

 private:
  using clock = std::chrono::steady_clock;
  std::vector<std::pair<std::string, double>> stages_;
  std::string current_;
  clock::time_point began_{};
};

// Output files are staged in memory and only written by commit(), together
// with `<out>.manifest.json` and `<out>.timings.json`. If commit() fails
// midway every file it already wrote is removed again.
class Artifacts {
 public:
  Artifacts(std::string command, std::string primary_out);

  void set_config(nlohmann::json config) { config_ = std::move(config); }
  void set_seed(std::uint64_t seed) { seed_ = seed; }
  void add_input(const std::string& role, const std::string& path, std::string_view contents);
  void add_output(const std::string& path, std::string contents);
  // Timings carry no guarantee of reproducibility, so they live outside the manifest.
  void commit(const StageTimer& timer);

  nlohmann::json manifest() const;

 private:
  std::string command_;
  std::string primary_;
  nlohmann::json config_ = nlohmann::json::object();
  std::uint64_t seed_ = 0;
  nlohmann::json inputs_ = nlohmann::json::array();
  std::vector<std::pair<std::string, std::string>> outputs_;
};

// "dir/model.cpmb" -> "dir/model" + suffix.
std::string sibling_path(const std::string& path, std::string_view suffix);

}  // namespace cpmamba::cli

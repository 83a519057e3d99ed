#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include "relcox/json_io.hpp"

namespace relcox::cli {

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

// Written next to the primary output of every run.
class Manifest {
 public:
  explicit Manifest(std::string command);

  void config(const Json& resolved) { config_ = resolved; }
  void input(const std::filesystem::path& path);
  void output(const std::filesystem::path& path);
  void seed(std::uint64_t s) { seed_ = s; has_seed_ = true; }
  void note(const std::string& key, Json value) { notes_[key] = std::move(value); }

  Json to_json() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::string command_;
  Json config_ = Json::object();
  Json inputs_ = Json::array();
  std::vector<std::filesystem::path> outputs_;
  std::uint64_t seed_ = 0;
  bool has_seed_ = false;
  Json notes_ = Json::object();
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace relcox::cli

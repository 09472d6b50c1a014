#pragma once

#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace qvi {

/// Git-blob-style content hash: sha1("blob <len>\0" + bytes), hex digest.
std::string content_hash_bytes(const void* data, size_t len);
std::string content_hash_file(const std::string& path);
/// Combined hash of a directory tree: sha1 over "relpath hash\n" lines in
/// sorted order.
std::string content_hash_dir(const std::string& dir);

/// Provenance record written next to every command's artifacts.  All fields
/// except wall_clock_s are pure functions of the inputs; reproducibility
/// comparisons ignore wall_clock_s only.
struct RunManifest {
  std::string command;
  std::vector<std::pair<std::string, std::string>> inputs;  // (path, hash)
  uint64_t seed = 0;
  std::string artifact_dir;
  std::string tool_version;
  double wall_clock_s = 0.0;
  nlohmann::ordered_json resolved;  // command-specific resolved configuration

  nlohmann::ordered_json to_json() const;
  static RunManifest from_json(const nlohmann::ordered_json& j);
  void write(const std::string& path) const;
  static RunManifest read(const std::string& path);
};

const char* tool_version_string();

}  // namespace qvi

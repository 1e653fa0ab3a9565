#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace lhf {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kRunManifestName = "run_manifest.json";

/// Record of one CLI invocation, written next to its artifacts.
struct RunManifest {
  std::vector<std::string> command_line;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json seeds = nlohmann::json::object();
  std::optional<std::string> input_hash;
  std::string output_hash;
  std::string tool_version = kToolVersion;
  std::string started_at;
  double wall_seconds = 0.0;
};

/// SHA-256 (hex) over every regular file under `dir` except run manifests,
/// visited in sorted relative-path order; each file contributes its relative
/// path and its bytes.
[[nodiscard]] std::string hash_directory(const std::filesystem::path& dir);

[[nodiscard]] nlohmann::json to_json(const RunManifest& m);

/// Writes dir/run_manifest.json through a temporary file and a rename.
void write_run_manifest(const std::filesystem::path& dir, const RunManifest& m);

/// True when dir/run_manifest.json exists and its output_hash matches the
/// directory content.
[[nodiscard]] bool verify_run_manifest(const std::filesystem::path& dir);

}  // namespace lhf

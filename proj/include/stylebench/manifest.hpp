#ifndef STYLEBENCH_MANIFEST_HPP_
#define STYLEBENCH_MANIFEST_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace stylebench {

// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

// Reproducibility record written beside every CLI output as
// `<output>.manifest.json`.
struct RunManifest {
  std::string command;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  double duration_seconds = 0.0;

  // Hashes every input and output that exists and writes the manifest.
  // Returns the manifest path.
  std::filesystem::path write(const std::filesystem::path& primary_output) const;
};

std::filesystem::path manifest_path(const std::filesystem::path& output);

// Recomputes the recorded checksums; false on any mismatch or missing file.
bool verify_manifest(const std::filesystem::path& manifest);

}  // namespace stylebench

#endif  // STYLEBENCH_MANIFEST_HPP_

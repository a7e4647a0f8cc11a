#include "stylebench/manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <chrono>
#include <fstream>
#include <memory>
#include <sstream>

#include "stylebench/errors.hpp"

namespace stylebench {

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                              EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) {
      EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest.data(), &len);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex += kHex[digest[i] >> 4];
    hex += kHex[digest[i] & 0xf];
  }
  return hex;
}

std::filesystem::path manifest_path(const std::filesystem::path& output) {
  std::filesystem::path p = output;
  p += ".manifest.json";
  return p;
}

std::filesystem::path RunManifest::write(
    const std::filesystem::path& primary_output) const {
  using nlohmann::ordered_json;
  ordered_json j;
  j["command"] = command;
  j["config"] = config;
  j["seeds"] = seeds;
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  ordered_json sums = ordered_json::object();
  for (const auto* group : {&inputs, &outputs}) {
    for (const auto& f : *group) {
      if (std::filesystem::is_regular_file(f)) sums[f] = sha256_file(f);
    }
  }
  j["checksums"] = std::move(sums);
  j["duration_seconds"] = duration_seconds;
  j["written_at_unix"] = std::chrono::duration_cast<std::chrono::seconds>(
                             std::chrono::system_clock::now().time_since_epoch())
                             .count();
  const auto path = manifest_path(primary_output);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << j.dump(1) << "\n";
  return path;
}

bool verify_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest, std::ios::binary);
  if (!in) return false;
  try {
    const auto j = nlohmann::json::parse(in);
    for (const auto& [file, sum] : j.at("checksums").items()) {
      if (!std::filesystem::is_regular_file(file)) return false;
      if (sha256_file(file) != sum.get<std::string>()) return false;
    }
    return true;
  } catch (const nlohmann::json::exception&) {
    return false;
  }
}

}  // namespace stylebench

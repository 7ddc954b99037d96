#include <openssl/evp.h>

#include <algorithm>
#include <json.hpp>
#include <memory>
#include <string>

#include "firecast/errors.hpp"
#include "firecast/pipeline.hpp"

namespace firecast::pipeline {

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw IoError("sha256: digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string manifest_json(const std::filesystem::path& dir, std::uint64_t seed) {
  std::vector<std::string> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = e.path().lexically_relative(dir).generic_string();
    if (rel != "manifest.json") files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  nlohmann::json j;
  j["format"] = "firecast-manifest";
  j["version"] = 1;
  j["seed"] = seed;
  j["files"] = nlohmann::json::array();
  for (const auto& f : files) {
    const std::string bytes = read_text(dir / f);
    j["files"].push_back({{"path", f}, {"bytes", bytes.size()}, {"sha256", sha256_hex(bytes)}});
  }
  return j.dump(2) + "\n";
}

}  // namespace firecast::pipeline

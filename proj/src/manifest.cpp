#include "qvi/manifest.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "qvi/errors.hpp"

namespace fs = std::filesystem;

namespace qvi {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string sha1_hex(const void* data, size_t len) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int dlen = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, data, len) != 1 ||
      EVP_DigestFinal_ex(ctx, digest, &dlen) != 1) {
    if (ctx) EVP_MD_CTX_free(ctx);
    throw SolveError("sha1 digest failed");
  }
  EVP_MD_CTX_free(ctx);
  char hex[2 * EVP_MAX_MD_SIZE + 1];
  for (unsigned int i = 0; i < dlen; ++i)
    std::snprintf(hex + 2 * i, 3, "%02x", digest[i]);
  return std::string(hex, 2 * dlen);
}

}  // namespace

std::string content_hash_bytes(const void* data, size_t len) {
  std::string header = "blob " + std::to_string(len);
  std::string buf;
  buf.reserve(header.size() + 1 + len);
  buf.append(header);
  buf.push_back('\0');
  buf.append(static_cast<const char*>(data), len);
  return sha1_hex(buf.data(), buf.size());
}

std::string content_hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read file for hashing: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string bytes = ss.str();
  return content_hash_bytes(bytes.data(), bytes.size());
}

std::string content_hash_dir(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
  std::vector<std::string> rels;
  for (const auto& ent : fs::recursive_directory_iterator(dir))
    if (ent.is_regular_file())
      rels.push_back(fs::relative(ent.path(), dir).generic_string());
  std::sort(rels.begin(), rels.end());
  std::string lines;
  for (const auto& rel : rels)
    lines += rel + " " + content_hash_file((fs::path(dir) / rel).string()) + "\n";
  return sha1_hex(lines.data(), lines.size());
}

ordered_json RunManifest::to_json() const {
  ordered_json j;
  j["command"] = command;
  ordered_json arr = ordered_json::array();
  for (const auto& [path, hash] : inputs)
    arr.push_back(ordered_json{{"path", path}, {"hash", hash}});
  j["inputs"] = arr;
  j["seed"] = seed;
  j["artifact_dir"] = artifact_dir;
  j["tool_version"] = tool_version;
  j["wall_clock_s"] = wall_clock_s;
  j["resolved"] = resolved;
  return j;
}

RunManifest RunManifest::from_json(const ordered_json& j) {
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  for (const auto& e : j.at("inputs"))
    m.inputs.emplace_back(e.at("path").get<std::string>(),
                          e.at("hash").get<std::string>());
  m.seed = j.at("seed").get<uint64_t>();
  m.artifact_dir = j.at("artifact_dir").get<std::string>();
  m.tool_version = j.at("tool_version").get<std::string>();
  m.wall_clock_s = j.at("wall_clock_s").get<double>();
  m.resolved = j.at("resolved");
  return m;
}

void RunManifest::write(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest: " + path);
  out << to_json().dump(2) << "\n";
}

RunManifest RunManifest::read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read manifest: " + path);
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError("artifact integrity: bad manifest JSON: " + path);
  }
  return from_json(j);
}

const char* tool_version_string() { return "0.1.0"; }

}  // namespace qvi

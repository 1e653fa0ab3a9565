#include "lhf/run_manifest.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <fstream>
#include <memory>
#include <sstream>

#include "lhf/errors.hpp"

namespace lhf {

namespace fs = std::filesystem;

namespace {

struct DigestDeleter {
  void operator()(EVP_MD_CTX* ctx) const noexcept { EVP_MD_CTX_free(ctx); }
};

}  // namespace

std::string hash_directory(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().filename() != kRunManifestName)
      files.push_back(fs::relative(entry.path(), dir));
  std::sort(files.begin(), files.end());

  std::unique_ptr<EVP_MD_CTX, DigestDeleter> ctx(EVP_MD_CTX_new());
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("cannot initialise SHA-256");

  std::array<char, 1 << 16> buf{};
  for (const auto& rel : files) {
    const std::string name = rel.generic_string();
    EVP_DigestUpdate(ctx.get(), name.data(), name.size() + 1);  // include the terminating NUL as a separator
    std::ifstream in(dir / rel, std::ios::binary);
    if (!in) throw InputError("cannot read " + (dir / rel).string());
    while (in) {
      in.read(buf.data(), buf.size());
      EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
  }

  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest.data(), &len);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int k = 0; k < len; ++k) {
    hex += kHex[digest[k] >> 4];
    hex += kHex[digest[k] & 0xf];
  }
  return hex;
}

nlohmann::json to_json(const RunManifest& m) {
  nlohmann::json j = {
      {"command_line", m.command_line},
      {"config", m.config},
      {"seeds", m.seeds},
      {"output_hash", m.output_hash},
      {"tool_version", m.tool_version},
      {"started_at", m.started_at},
      {"wall_seconds", m.wall_seconds},
  };
  j["input_hash"] = m.input_hash ? nlohmann::json(*m.input_hash) : nlohmann::json(nullptr);
  return j;
}

void write_run_manifest(const fs::path& dir, const RunManifest& m) {
  fs::create_directories(dir);
  const fs::path target = dir / kRunManifestName;
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot open " + tmp.string() + " for writing");
    out << to_json(m).dump(2) << '\n';
  }
  fs::rename(tmp, target);
}

bool verify_run_manifest(const fs::path& dir) {
  std::ifstream in(dir / kRunManifestName, std::ios::binary);
  if (!in) return false;
  std::stringstream text;
  text << in.rdbuf();
  const auto j = nlohmann::json::parse(text.str(), nullptr, false);
  if (j.is_discarded() || !j.contains("output_hash") || !j["output_hash"].is_string()) return false;
  return j["output_hash"].get<std::string>() == hash_directory(dir);
}

}  // namespace lhf

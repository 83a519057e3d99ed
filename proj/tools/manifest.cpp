#include "manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <memory>

#include "relcox/error.hpp"

namespace relcox::cli {

namespace {

struct Digest {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx{EVP_MD_CTX_new(), &EVP_MD_CTX_free};
  Digest() {
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("sha256 init failed");
  }
  void update(const char* data, std::size_t n) { EVP_DigestUpdate(ctx.get(), data, n); }
  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned len = 0;
    EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (unsigned k = 0; k < len; ++k) {
      out += digits[md[k] >> 4];
      out += digits[md[k] & 15];
    }
    return out;
  }
};

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  Digest d;
  d.update(bytes.data(), bytes.size());
  return d.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open " + path.string());
  Digest d;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    d.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return d.hex();
}

Manifest::Manifest(std::string command) : command_(std::move(command)) {}

void Manifest::input(const std::filesystem::path& path) {
  inputs_.push_back({{"path", path.string()}, {"sha256", sha256_file(path)}});
}

void Manifest::output(const std::filesystem::path& path) { outputs_.push_back(path); }

Json Manifest::to_json() const {
  Json j;
  j["command"] = command_;
  j["artifact_version"] = RELCOX_VERSION;
  j["config"] = config_;
  j["config_sha256"] = sha256_hex(config_.dump());
  j["inputs"] = inputs_;
  j["seed"] = has_seed_ ? Json(seed_) : Json(nullptr);
  Json outs = Json::array();
  for (const auto& p : outputs_) {
    Json o{{"path", p.string()}};
    if (std::filesystem::exists(p)) o["sha256"] = sha256_file(p);
    outs.push_back(o);
  }
  j["outputs"] = outs;
  j["wall_clock_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  if (!notes_.empty()) j["notes"] = notes_;
  return j;
}

void Manifest::write(const std::filesystem::path& path) const { write_json(path, to_json()); }

}  // namespace relcox::cli

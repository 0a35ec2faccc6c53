#include "manifest.hpp"

#include <cstdio>
#include <filesystem>

#include <openssl/evp.h>

#include "cpmamba/binary_io.hpp"
#include "cpmamba/errors.hpp"

namespace cpmamba::cli {

using nlohmann::json;

std::string git_blob_sha1(std::string_view contents) {
  const std::string header = "blob " + std::to_string(contents.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  const bool ok = ctx && EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, contents.data(), contents.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw Error("SHA-1 digest failed");
  std::string hex;
  hex.reserve(2 * len);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

void StageTimer::start(std::string name) {
  if (!current_.empty()) stop();
  current_ = std::move(name);
  began_ = clock::now();
}

void StageTimer::stop() {
  if (current_.empty()) return;
  stages_.emplace_back(std::move(current_), std::chrono::duration<double>(clock::now() - began_).count());
  current_.clear();
}

json StageTimer::to_json() const {
  json stages = json::object();
  double total = 0.0;
  for (const auto& [name, s] : stages_) {
    stages[name] = s;
    total += s;
  }
  return json{{"stages_s", stages}, {"total_s", total}};
}

Artifacts::Artifacts(std::string command, std::string primary_out)
    : command_(std::move(command)), primary_(std::move(primary_out)) {}

void Artifacts::add_input(const std::string& role, const std::string& path, std::string_view contents) {
  inputs_.push_back(json{{"role", role}, {"path", path}, {"sha1", git_blob_sha1(contents)}, {"bytes", contents.size()}});
}

void Artifacts::add_output(const std::string& path, std::string contents) {
  outputs_.emplace_back(path, std::move(contents));
}

json Artifacts::manifest() const {
  json outputs = json::array();
  for (const auto& [path, contents] : outputs_) {
    outputs.push_back(json{{"path", path}, {"sha1", git_blob_sha1(contents)}, {"bytes", contents.size()}});
  }
  return json{{"command", command_}, {"config", config_}, {"seed", seed_}, {"inputs", inputs_}, {"outputs", outputs}};
}

void Artifacts::commit(const StageTimer& timer) {
  std::vector<std::pair<std::string, std::string>> files = outputs_;
  files.emplace_back(primary_ + ".manifest.json", manifest().dump(2) + "\n");
  json timings = timer.to_json();
  timings["command"] = command_;
  files.emplace_back(primary_ + ".timings.json", timings.dump(2) + "\n");

  std::vector<std::string> written;
  try {
    for (const auto& [path, contents] : files) {
      io::write_file_atomic(path, contents);
      written.push_back(path);
    }
  } catch (...) {
    std::error_code ec;
    for (const auto& p : written) std::filesystem::remove(p, ec);
    throw;
  }
}

std::string sibling_path(const std::string& path, std::string_view suffix) {
  std::filesystem::path p(path);
  p.replace_extension();
  return p.string() + std::string(suffix);
}

}  // namespace cpmamba::cli

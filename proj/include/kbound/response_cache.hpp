#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace kbound {

struct CachedReply {
  std::string text;
  std::optional<std::vector<double>> logprobs;
  std::chrono::milliseconds latency{0};
};

/// Content-addressed reply store: `<dir>/<endpoint>/<fingerprint>[.<k>].json`.
/// With an empty directory the cache lives in memory only. Writes are atomic.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<CachedReply> get(const std::string& endpoint, const std::string& fingerprint,
                                 int sample_index) const;
  void put(const std::string& endpoint, const std::string& fingerprint, int sample_index,
           const CachedReply& reply);

  std::filesystem::path path_for(const std::string& endpoint, const std::string& fingerprint,
                                 int sample_index) const;

 private:
  std::filesystem::path dir_;
  mutable std::mutex mu_;
  std::map<std::string, CachedReply> memory_;
};

/// Writes `bytes` to a sibling temp file and renames it over `path`.
void atomic_write(const std::filesystem::path& path, const std::string& bytes);

}  // namespace kbound

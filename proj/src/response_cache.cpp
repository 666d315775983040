#include "kbound/response_cache.hpp"

#include <atomic>
#include <fstream>
#include <iterator>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "kbound/error.hpp"

namespace kbound {
namespace fs = std::filesystem;
using json = nlohmann::json;

void atomic_write(const fs::path& path, const std::string& bytes) {
  static std::atomic<unsigned long> counter{0};
  fs::create_directories(path.parent_path());
  std::ostringstream tmp_name;
  tmp_name << path.filename().string() << ".tmp." << std::this_thread::get_id() << '.'
           << counter.fetch_add(1);
  const fs::path tmp = path.parent_path() / tmp_name.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) {}

fs::path ResponseCache::path_for(const std::string& endpoint, const std::string& fingerprint,
                                 int sample_index) const {
  std::string file = fingerprint;
  if (sample_index > 0) file += "." + std::to_string(sample_index);
  file += ".json";
  return dir_ / endpoint / file;
}

std::optional<CachedReply> ResponseCache::get(const std::string& endpoint,
                                              const std::string& fingerprint,
                                              int sample_index) const {
  if (dir_.empty()) {
    std::lock_guard lock(mu_);
    auto it = memory_.find(path_for(endpoint, fingerprint, sample_index).string());
    if (it == memory_.end()) return std::nullopt;
    return it->second;
  }
  const fs::path p = path_for(endpoint, fingerprint, sample_index);
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  json j = json::parse(bytes, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.contains("response_text")) return std::nullopt;
  CachedReply r;
  r.text = j["response_text"].get<std::string>();
  if (j.contains("token_logprobs") && !j["token_logprobs"].is_null()) {
    r.logprobs = j["token_logprobs"].get<std::vector<double>>();
  }
  r.latency = std::chrono::milliseconds(j.value("latency_ms", std::int64_t{0}));
  return r;
}

void ResponseCache::put(const std::string& endpoint, const std::string& fingerprint,
                        int sample_index, const CachedReply& reply) {
  if (dir_.empty()) {
    std::lock_guard lock(mu_);
    memory_[path_for(endpoint, fingerprint, sample_index).string()] = reply;
    return;
  }
  json j;
  j["fingerprint"] = fingerprint;
  j["sample_index"] = sample_index;
  j["response_text"] = reply.text;
  j["token_logprobs"] = reply.logprobs ? json(*reply.logprobs) : json(nullptr);
  j["latency_ms"] = reply.latency.count();
  atomic_write(path_for(endpoint, fingerprint, sample_index), j.dump(2));
}

}  // namespace kbound

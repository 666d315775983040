#include "kbound/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "kbound/error.hpp"

namespace kbound {
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string line_error(std::size_t line_no, const std::string& msg) {
  return "line " + std::to_string(line_no) + ": " + msg;
}

QueryRecord parse_record(const json& j, const fs::path& base_dir, const std::string& default_ds,
                         std::size_t line_no) {
  if (!j.is_object()) throw DatasetError(line_error(line_no, "expected a JSON object"));
  auto req_string = [&](const char* key) -> std::string {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) {
      throw DatasetError(line_error(line_no, std::string("missing or non-string '") + key + "'"));
    }
    return it->get<std::string>();
  };
  auto opt_string = [&](const char* key) -> std::optional<std::string> {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) {
      throw DatasetError(line_error(line_no, std::string("'") + key + "' must be a string"));
    }
    return it->get<std::string>();
  };

  QueryRecord r;
  r.id = req_string("id");
  if (r.id.empty()) throw DatasetError(line_error(line_no, "empty id"));
  r.dataset_id = opt_string("dataset").value_or(default_ds);
  r.question_text = req_string("question");
  if (auto img = opt_string("image")) {
    fs::path p(*img);
    if (p.is_relative()) p = base_dir / p;
    r.image_ref = p.lexically_normal().string();
  }
  r.qa_text = opt_string("qa_question");

  auto gold = j.find("gold");
  if (gold == j.end() || !gold->is_array()) {
    throw DatasetError(line_error(line_no, "missing 'gold' array"));
  }
  for (const auto& g : *gold) {
    if (!g.is_string()) throw DatasetError(line_error(line_no, "'gold' entries must be strings"));
    r.gold_answers.push_back(g.get<std::string>());
  }
  if (r.gold_answers.empty()) throw DatasetError(line_error(line_no, "'gold' must be non-empty"));

  if (auto s = opt_string("split")) {
    try {
      r.split = parse_split(*s);
    } catch (const ConfigError& e) {
      throw DatasetError(line_error(line_no, e.what()));
    }
  }
  return r;
}

}  // namespace

std::vector<QueryRecord> load_dataset(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open dataset file " + path.string());
  const fs::path base_dir = fs::absolute(path).parent_path();
  const std::string default_ds = path.stem().string();

  std::vector<QueryRecord> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DatasetError(line_error(line_no, std::string("malformed JSON: ") + e.what()));
    }
    QueryRecord r = parse_record(j, base_dir, default_ds, line_no);
    if (!seen.insert(r.id).second) {
      throw DatasetError(line_error(line_no, "duplicate id '" + r.id + "'"));
    }
    out.push_back(std::move(r));
  }
  return out;
}

void write_dataset(const fs::path& path, const std::vector<QueryRecord>& records) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DatasetError("cannot write dataset file " + path.string());
  const fs::path base_dir = fs::absolute(path).parent_path();
  for (const auto& r : records) {
    json j;
    j["id"] = r.id;
    j["dataset"] = r.dataset_id;
    j["question"] = r.question_text;
    if (r.image_ref) {
      j["image"] = fs::path(*r.image_ref).lexically_relative(base_dir).string();
    }
    if (r.qa_text) j["qa_question"] = *r.qa_text;
    j["gold"] = r.gold_answers;
    if (r.split) j["split"] = std::string(to_string(*r.split));
    out << j.dump() << '\n';
  }
}

std::vector<QueryRecord> assign_splits(std::vector<QueryRecord> records, double heldout_fraction,
                                       std::uint64_t seed) {
  if (!(heldout_fraction > 0.0 && heldout_fraction < 1.0)) {
    throw ConfigError("heldout_fraction must lie strictly between 0 and 1");
  }
  if (records.size() < 2) throw DatasetError("assign_splits needs at least 2 records");

  const auto n = records.size();
  const auto n_heldout =
      static_cast<std::size_t>(std::llround(heldout_fraction * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Fisher-Yates on raw engine output: std::shuffle is not specified bit-for-bit across
  // standard libraries, so splits would otherwise depend on the toolchain.
  std::mt19937_64 rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::uint64_t bound = i + 1;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x = rng();
    while (x >= limit) x = rng();
    std::swap(order[i], order[static_cast<std::size_t>(x % bound)]);
  }

  for (auto& r : records) r.split = Split::kEval;
  for (std::size_t i = 0; i < n_heldout; ++i) records[order[i]].split = Split::kHeldout;
  return records;
}

}  // namespace kbound

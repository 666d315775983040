#include "kbound/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "kbound/error.hpp"

namespace kbound {
namespace fs = std::filesystem;

namespace {

const std::set<std::string> kTopLevelKeys = {
    "dataset",         "datasets",        "modality",          "methods",
    "heldout_fraction", "seed",           "concurrency",       "cache_dir",
    "output_dir",      "max_tokens",      "n_samples",         "sample_temperature",
    "sigma_step",      "sigma_offset",    "cross_primary_samples", "cross_other_samples",
    "unparsed_confidence", "evaluate_on_fit_data", "thresholds_file", "abort_failure_ratio",
    "roles",           "judge",           "endpoint"};

[[noreturn]] void fail(const std::string& msg) { throw ConfigError("config: " + msg); }

template <typename T>
T get_or(const toml::table& t, std::string_view key, T fallback) {
  const toml::node* n = t.get(key);
  if (n == nullptr) return fallback;
  if (auto v = n->value<T>()) return *v;
  fail("key '" + std::string(key) + "' has the wrong type");
}

std::vector<std::string> string_list(const toml::table& t, std::string_view key) {
  std::vector<std::string> out;
  const toml::node* n = t.get(key);
  if (n == nullptr) return out;
  if (auto s = n->value<std::string>()) {
    out.push_back(*s);
    return out;
  }
  const toml::array* arr = n->as_array();
  if (arr == nullptr) fail("key '" + std::string(key) + "' must be a string or an array of strings");
  for (const auto& e : *arr) {
    auto s = e.value<std::string>();
    if (!s) fail("key '" + std::string(key) + "' must contain only strings");
    out.push_back(*s);
  }
  return out;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

EndpointConfig parse_endpoint(const toml::table& t, const fs::path& base) {
  EndpointConfig e;
  e.spec.name = get_or<std::string>(t, "name", "");
  e.spec.base_url = get_or<std::string>(t, "base_url", "");
  e.spec.model_id = get_or<std::string>(t, "model_id", e.spec.name);
  e.spec.api_key_env = get_or<std::string>(t, "api_key_env", "");
  e.spec.supports_images = get_or<bool>(t, "supports_images", true);
  e.spec.supports_logprobs = get_or<bool>(t, "supports_logprobs", false);
  e.spec.timeout = std::chrono::milliseconds(get_or<std::int64_t>(t, "timeout_ms", 60000));
  e.spec.max_retries = static_cast<int>(get_or<std::int64_t>(t, "max_retries", 3));
  if (e.spec.is_mock()) {
    const auto script = get_or<std::string>(t, "mock_script", "");
    if (script.empty()) fail("mock endpoint '" + e.spec.name + "' needs mock_script");
    try {
      e.mock_script = load_mock_script(resolve(base, script));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& ex) {
      fail("mock endpoint '" + e.spec.name + "': " + ex.what());
    }
    e.spec.max_retries = 0;
  }
  try {
    e.spec.validate();
  } catch (const std::exception& ex) {
    fail(std::string("endpoint: ") + ex.what());
  }
  return e;
}

}  // namespace

const EndpointConfig& RunConfig::endpoint(const std::string& name) const {
  for (const auto& e : endpoints) {
    if (e.spec.name == name) return e;
  }
  fail("unknown endpoint '" + name + "'");
}

void RunConfig::validate() const {
  std::set<std::string> names;
  for (const auto& e : endpoints) {
    if (!names.insert(e.spec.name).second) fail("duplicate endpoint '" + e.spec.name + "'");
  }
  if (datasets.empty()) fail("no dataset given");
  if (methods.empty()) fail("no methods given");
  if (roles.subjects.empty()) fail("roles.subject is required");
  if (!(heldout_fraction > 0 && heldout_fraction < 1)) fail("heldout_fraction must be in (0, 1)");
  if (concurrency == 0) fail("concurrency must be positive");
  if (max_tokens <= 0) fail("max_tokens must be positive");
  if (!(abort_failure_ratio > 0 && abort_failure_ratio <= 1)) {
    fail("abort_failure_ratio must be in (0, 1]");
  }
  if (cross_primary_samples < 0 || cross_other_samples < 0 ||
      cross_primary_samples + cross_other_samples == 0) {
    fail("cross-model sample counts must be non-negative and not both zero");
  }
  for (const auto& s : roles.subjects) endpoint(s);
  for (const auto& s : roles.cross_model) endpoint(s);
  if (roles.rephraser) endpoint(*roles.rephraser);
  if (roles.judge) endpoint(*roles.judge);

  for (const auto& m : methods) {
    try {
      m.validate();
    } catch (const std::exception& ex) {
      fail(ex.what());
    }
    if ((m.variant == Variant::kRephr || m.variant == Variant::kRephNois) && !roles.rephraser) {
      fail("method '" + m.name() + "' needs roles.rephraser");
    }
    if (m.variant == Variant::kCrossModel && roles.cross_model.size() != 2) {
      fail("method 'cross_model' needs exactly two roles.cross_model endpoints");
    }
    if (m.variant == Variant::kPplThr) {
      for (const auto& s : roles.subjects) {
        if (!endpoint(s).spec.supports_logprobs) {
          fail("method 'ppl_thr' needs log-probabilities but endpoint '" + s +
               "' does not support them");
        }
      }
    }
  }
  if (modality != Modality::kQa) {
    for (const auto& s : roles.subjects) {
      if (!endpoint(s).spec.supports_images) {
        fail("modality '" + std::string(to_string(modality)) + "' needs images but endpoint '" +
             s + "' is text-only");
      }
    }
  }
  if (judge.strategy == JudgeStrategy::kLlm && !roles.judge) {
    fail("judge strategy 'llm' needs roles.judge");
  }
}

RunConfig parse_run_config(std::string_view toml_text, const fs::path& base_dir) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << e.description() << " at line " << e.source().begin.line;
    fail(msg.str());
  }
  for (const auto& [k, v] : root) {
    if (!kTopLevelKeys.contains(std::string(k.str()))) {
      fail("unknown key '" + std::string(k.str()) + "'");
    }
  }

  RunConfig c;
  for (const auto& d : string_list(root, "dataset")) c.datasets.push_back(resolve(base_dir, d));
  for (const auto& d : string_list(root, "datasets")) c.datasets.push_back(resolve(base_dir, d));
  c.modality = parse_modality(get_or<std::string>(root, "modality", "vqa"));
  c.heldout_fraction = get_or<double>(root, "heldout_fraction", 0.2);
  const auto seed = get_or<std::int64_t>(root, "seed", 0);
  if (seed < 0) fail("seed must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);
  const auto concurrency = get_or<std::int64_t>(root, "concurrency", 8);
  if (concurrency <= 0) fail("concurrency must be positive");
  c.concurrency = static_cast<std::size_t>(concurrency);
  c.cache_dir = resolve(base_dir, get_or<std::string>(root, "cache_dir", "cache"));
  c.output_dir = resolve(base_dir, get_or<std::string>(root, "output_dir", "out"));
  c.max_tokens = static_cast<int>(get_or<std::int64_t>(root, "max_tokens", 512));
  c.sample_temperature = get_or<double>(root, "sample_temperature", 1.0);
  c.sigma_offset = get_or<double>(root, "sigma_offset", 0.0);
  c.cross_primary_samples = static_cast<int>(get_or<std::int64_t>(root, "cross_primary_samples", 4));
  c.cross_other_samples = static_cast<int>(get_or<std::int64_t>(root, "cross_other_samples", 3));
  c.evaluate_on_fit_data = get_or<bool>(root, "evaluate_on_fit_data", false);
  c.abort_failure_ratio = get_or<double>(root, "abort_failure_ratio", 0.5);
  if (auto t = get_or<std::string>(root, "thresholds_file", ""); !t.empty()) {
    c.thresholds_file = resolve(base_dir, t);
  }
  const auto policy = get_or<std::string>(root, "unparsed_confidence", "unconfident");
  if (policy == "unconfident") {
    c.unparsed_confidence = UnparsedPolicy::kUnconfident;
  } else if (policy == "error") {
    c.unparsed_confidence = UnparsedPolicy::kError;
  } else {
    fail("unparsed_confidence must be 'unconfident' or 'error'");
  }

  const auto n_samples = static_cast<int>(get_or<std::int64_t>(root, "n_samples", 10));
  const double sigma_step = get_or<double>(root, "sigma_step", 0.05);
  auto method_names = string_list(root, "methods");
  if (method_names.size() == 1 && method_names[0] == "all") {
    method_names.clear();
    for (const auto& m : all_methods()) method_names.push_back(m.name());
  }
  for (const auto& name : method_names) {
    MethodSpec m = parse_method(name);
    m.n_samples = n_samples;
    m.sample_temperature = c.sample_temperature;
    m.sigma_step = sigma_step;
    c.methods.push_back(m);
  }

  if (const toml::table* roles = root["roles"].as_table()) {
    c.roles.subjects = string_list(*roles, "subject");
    if (auto r = get_or<std::string>(*roles, "rephraser", ""); !r.empty()) c.roles.rephraser = r;
    if (auto j = get_or<std::string>(*roles, "judge", ""); !j.empty()) c.roles.judge = j;
    c.roles.cross_model = string_list(*roles, "cross_model");
  }
  if (const toml::table* judge = root["judge"].as_table()) {
    c.judge.strategy = parse_judge_strategy(get_or<std::string>(*judge, "strategy", "normalized"));
  }
  if (const toml::array* eps = root["endpoint"].as_array()) {
    for (const auto& e : *eps) {
      const toml::table* t = e.as_table();
      if (t == nullptr) fail("[[endpoint]] entries must be tables");
      c.endpoints.push_back(parse_endpoint(*t, base_dir));
    }
  }
  if (c.roles.judge) c.judge.judge_endpoint = c.endpoint(*c.roles.judge).spec;
  c.validate();
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.parent_path());
}

void apply_overrides(RunConfig& config, const std::vector<std::string>& methods,
                     const std::string& modality) {
  if (!methods.empty()) {
    std::vector<MethodSpec> selected;
    for (const auto& name : methods) {
      MethodSpec m = parse_method(name);
      bool found = false;
      for (const auto& c : config.methods) {
        if (c.name() == m.name()) {
          selected.push_back(c);
          found = true;
        }
      }
      if (!found) {
        if (!config.methods.empty()) {
          m.n_samples = config.methods.front().n_samples;
          m.sigma_step = config.methods.front().sigma_step;
        }
        m.sample_temperature = config.sample_temperature;
        selected.push_back(m);
      }
    }
    config.methods = selected;
  }
  if (!modality.empty()) config.modality = parse_modality(modality);
  config.validate();
}

}  // namespace kbound

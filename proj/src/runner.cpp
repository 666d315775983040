#include "kbound/runner.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <set>
#include <thread>

#include <spdlog/spdlog.h>

#include "kbound/calibration.hpp"
#include "kbound/dataset.hpp"
#include "kbound/elicitors.hpp"
#include "kbound/error.hpp"
#include "kbound/judging.hpp"
#include "kbound/mock.hpp"
#include "kbound/perturb.hpp"
#include "kbound/response_cache.hpp"
#include "kbound/serialize.hpp"

namespace kbound {
namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------------------------
// Ledger

RunLedger::RunLedger(fs::path path, bool truncate) : path_(std::move(path)) {
  if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
  if (truncate || !fs::exists(path_)) {
    std::ofstream(path_, std::ios::trunc);
    return;
  }
  // Drop a torn tail left by an interrupted write so appends start on a fresh line.
  std::ifstream in(path_, std::ios::binary);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (!text.empty() && text.back() != '\n') {
    const auto keep = text.rfind('\n');
    spdlog::warn("ledger {}: dropping torn final line", path_.string());
    fs::resize_file(path_, keep == std::string::npos ? 0 : keep + 1);
  }
}

void RunLedger::append(const std::vector<json>& lines) {
  if (lines.empty()) return;
  std::string buf;
  for (const auto& l : lines) {
    buf += l.dump();
    buf += '\n';
  }
  std::lock_guard lock(mu_);
  const int fd = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT, 0644);
  if (fd < 0) throw Error("cannot open ledger '" + path_.string() + "': " + std::strerror(errno));
  std::size_t off = 0;
  while (off < buf.size()) {
    const ssize_t n = ::write(fd, buf.data() + off, buf.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      const std::string err = std::strerror(errno);
      ::close(fd);
      throw Error("ledger write failed: " + err);
    }
    off += static_cast<std::size_t>(n);
  }
  ::fsync(fd);
  ::close(fd);
}

std::vector<json> RunLedger::read(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read ledger '" + path.string() + "'");
  std::vector<json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error&) {
      if (in.peek() == std::char_traits<char>::eof()) {
        spdlog::warn("ledger {}: skipping torn final line {}", path.string(), lineno);
        break;
      }
      throw Error("ledger " + path.string() + " line " + std::to_string(lineno) + ": bad JSON");
    }
  }
  return out;
}

std::string fit_key(const std::string& model, const std::string& dataset, Modality modality,
                    const std::string& method) {
  return model + "/" + dataset + "/" + std::string(to_string(modality)) + "/" + method;
}

namespace {

json key_json(const ReportKey& k) {
  return {{"model", k.model}, {"dataset", k.dataset}, {"method", k.method},
          {"modality", k.modality}};
}

ReportKey key_from(const json& j) {
  return {j.at("model").get<std::string>(), j.at("dataset").get<std::string>(),
          j.at("method").get<std::string>(), j.at("modality").get<std::string>()};
}

}  // namespace

ReportSet reports_from_ledger(const std::vector<json>& lines) {
  struct Entry {
    std::optional<EvalOutcome> outcome;
    bool unparsed = false;
  };
  std::map<ReportKey, std::map<std::string, Entry>> per_key;
  for (const auto& l : lines) {
    const std::string type = l.value("type", "");
    if (l.value("split", "") != "eval") continue;
    if (type == "outcome") {
      Entry e;
      e.outcome = outcome_from_json(l.at("outcome"));
      e.unparsed = l.value("unparsed_confidence", false);
      per_key[key_from(l.at("key"))][e.outcome->record_id] = e;
    } else if (type == "flagged") {
      per_key[key_from(l.at("key"))][l.at("record_id").get<std::string>()] = Entry{};
    }
  }
  ReportSet out;
  for (const auto& [key, entries] : per_key) {
    std::vector<EvalOutcome> outcomes;
    std::int64_t flagged = 0;
    std::int64_t unparsed = 0;
    for (const auto& [id, e] : entries) {
      if (!e.outcome) {
        ++flagged;
        continue;
      }
      outcomes.push_back(*e.outcome);
      unparsed += e.unparsed ? 1 : 0;
    }
    if (outcomes.empty()) {
      spdlog::warn("{}/{}/{}/{}: every record failed; no report row", key.model, key.dataset,
                   key.modality, key.method);
      continue;
    }
    MetricsReport r = compute_metrics(outcomes);
    r.flagged = flagged;
    r.unparsed_confidence = unparsed;
    out.emplace(key, r);
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// Runner

namespace {

struct RecordResult {
  std::optional<ConfidenceSignal> signal;
  bool correct = false;
  std::string error;
};

template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) fn(i);
  };
  const std::size_t k = std::min(workers, n);
  if (k <= 1) {
    work();
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(k);
  for (std::size_t t = 0; t < k; ++t) pool.emplace_back(work);
}

}  // namespace

struct Runner::Impl {
  Runner& self;
  std::unique_ptr<RunLedger> ledger;
  std::unique_ptr<ImageCache> image_cache;
  std::unique_ptr<Judge> judge;
  std::mutex image_mu;
  std::map<std::string, ImageBuffer> images;
  /// Resumable work keyed by ledger_id().
  std::map<std::string, json> done;
  std::map<std::string, ThresholdFit> fits;
  std::map<std::string, ThresholdFit> file_fits;
  std::size_t flagged = 0;

  explicit Impl(Runner& r) : self(r) {}

  const RunConfig& cfg() const { return self.config_; }

  static std::string ledger_id(const ReportKey& k, Split split, const std::string& record_id) {
    return k.model + "\x1f" + k.dataset + "\x1f" + k.method + "\x1f" + k.modality + "\x1f" +
           std::string(to_string(split)) + "\x1f" + record_id;
  }

  void open(bool resume, bool truncate) {
    const fs::path path = cfg().output_dir / "ledger.jsonl";
    done.clear();
    fits.clear();
    flagged = 0;
    if (resume && fs::exists(path)) {
      for (const auto& l : RunLedger::read(path)) {
        const std::string type = l.value("type", "");
        if (type == "signal") {
          const ReportKey k = key_from(l.at("key"));
          done[ledger_id(k, parse_split(l.at("split").get<std::string>()),
                         l.at("signal").at("record_id").get<std::string>())] = l;
        } else if (type == "flagged") {
          const ReportKey k = key_from(l.at("key"));
          done.erase(ledger_id(k, parse_split(l.at("split").get<std::string>()),
                               l.at("record_id").get<std::string>()));
        } else if (type == "fit") {
          fits[l.at("fit_key").get<std::string>()] = fit_from_json(l.at("fit"));
        }
      }
      spdlog::info("resuming: {} completed records in {}", done.size(), path.string());
    }
    ledger = std::make_unique<RunLedger>(path, truncate && !resume);
    if (cfg().thresholds_file) file_fits = read_thresholds(*cfg().thresholds_file);
  }

  std::optional<ImageBuffer> image_for(const QueryRecord& r) {
    if (!r.image_ref) return std::nullopt;
    std::lock_guard lock(image_mu);
    auto it = images.find(*r.image_ref);
    if (it == images.end()) {
      try {
        it = images.emplace(*r.image_ref, read_png(*r.image_ref)).first;
      } catch (const std::exception& e) {
        throw DatasetError("record '" + r.id + "': cannot load image '" + *r.image_ref +
                           "': " + e.what());
      }
    }
    return it->second;
  }

  Elicitor make_elicitor(const std::string& subject) {
    EndpointRoles roles;
    roles.subject = cfg().endpoint(subject).spec;
    if (cfg().roles.rephraser) roles.rephraser = cfg().endpoint(*cfg().roles.rephraser).spec;
    for (const auto& o : cfg().roles.cross_model) {
      roles.cross_model_others.push_back(cfg().endpoint(o).spec);
    }
    ElicitorOptions opt;
    opt.greedy = greedy_params();
    opt.sample_temperature = cfg().sample_temperature;
    opt.sigma_offset = cfg().sigma_offset;
    opt.seed = cfg().seed;
    opt.cross_primary_samples = cfg().cross_primary_samples;
    opt.cross_other_samples = cfg().cross_other_samples;
    opt.unparsed_is_error = cfg().unparsed_confidence == UnparsedPolicy::kError;
    if (!cfg().methods.empty()) opt.n_samples = cfg().methods.front().n_samples;
    return Elicitor(self.gateway(), *judge, roles, opt, image_cache.get());
  }

  SamplingParams greedy_params() const {
    SamplingParams p;
    p.temperature = 0.0;
    p.max_tokens = cfg().max_tokens;
    p.seed = static_cast<std::int64_t>(cfg().seed);
    return p;
  }

  /// Elicits and grades `records`, serving completed ones from the resumed ledger. Writes one
  /// signal line (plus an outcome line when `fit_for_eval` classifies it) or a flagged line per
  /// record, in record order.
  std::vector<RecordResult> run_batch(Elicitor& elicitor, const ReportKey& key,
                                      const MethodSpec& method, Modality modality, Split split,
                                      const std::vector<const QueryRecord*>& records,
                                      const std::optional<ThresholdFit>& fit_for_eval,
                                      bool classify) {
    std::vector<RecordResult> results(records.size());
    std::vector<bool> resumed(records.size(), false);
    for (std::size_t i = 0; i < records.size(); ++i) {
      auto it = done.find(ledger_id(key, split, records[i]->id));
      if (it == done.end()) continue;
      results[i].signal = signal_from_json(it->second.at("signal"));
      results[i].correct = it->second.at("correct").get<bool>();
      resumed[i] = true;
    }

    parallel_for(records.size(), cfg().concurrency, [&](std::size_t i) {
      if (resumed[i]) return;
      const QueryRecord& r = *records[i];
      try {
        const QueryInput input = prepare_input(r, modality, image_for(r));
        ConfidenceSignal s = elicitor.elicit(r, input, method);
        results[i].correct = judge->grade_answer(s.answer_text, r.gold_answers,
                                                 input.source_question);
        results[i].signal = std::move(s);
      } catch (const std::exception& e) {
        results[i].error = e.what();
      }
    });

    std::vector<json> lines;
    std::size_t failures = 0;
    std::string first_error;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& res = results[i];
      const std::string split_name(to_string(split));
      if (!res.signal) {
        ++failures;
        if (first_error.empty()) first_error = records[i]->id + ": " + res.error;
        spdlog::warn("{} [{}] record '{}' flagged: {}", key.method, key.modality, records[i]->id,
                     res.error);
        lines.push_back({{"type", "flagged"}, {"key", key_json(key)}, {"split", split_name},
                         {"record_id", records[i]->id}, {"error", res.error}});
        continue;
      }
      if (!resumed[i]) {
        lines.push_back({{"type", "signal"}, {"key", key_json(key)}, {"split", split_name},
                         {"signal", to_json(*res.signal)}, {"correct", res.correct}});
      }
      if (classify) {
        const bool confident = res.signal->kind == SignalKind::kBinary
                                   ? *res.signal->binary_value
                                   : apply_threshold(*res.signal, *fit_for_eval);
        lines.push_back({{"type", "outcome"}, {"key", key_json(key)}, {"split", split_name},
                         {"outcome", to_json(make_outcome(records[i]->id, res.signal->answer_text,
                                                          res.correct, confident))},
                         {"unparsed_confidence", res.signal->unparsed_confidence}});
      }
    }
    ledger->append(lines);
    flagged += failures;

    if (!records.empty() &&
        static_cast<double>(failures) > cfg().abort_failure_ratio * static_cast<double>(records.size())) {
      throw RunAbortedError(fmt_abort(key, split, failures, records.size(), first_error));
    }
    return results;
  }

  static std::string fmt_abort(const ReportKey& key, Split split, std::size_t failures,
                               std::size_t total, const std::string& first_error) {
    return "run aborted: " + std::to_string(failures) + " of " + std::to_string(total) + " " +
           std::string(to_string(split)) + " records failed for " + key.model + "/" +
           key.dataset + "/" + key.modality + "/" + key.method + " (first failure: " +
           first_error + ")";
  }

  ThresholdFit obtain_fit(Elicitor& elicitor, const ReportKey& key, const MethodSpec& method,
                          Modality modality, const std::vector<const QueryRecord*>& heldout) {
    const std::string fk = fit_key(key.model, key.dataset, modality, key.method);
    if (auto it = file_fits.find(fk); it != file_fits.end()) return it->second;
    if (auto it = fits.find(fk); it != fits.end()) return it->second;
    if (heldout.empty()) {
      throw ConfigError("heldout split of dataset '" + key.dataset + "' is empty; cannot fit '" +
                        key.method + "'");
    }
    const auto results =
        run_batch(elicitor, key, method, modality, Split::kHeldout, heldout, std::nullopt, false);
    std::vector<ScoredLabel> pairs;
    for (const auto& r : results) {
      if (r.signal) pairs.push_back({*r.signal->score_value, r.correct});
    }
    const ThresholdFit fit = fit_threshold(pairs, direction_for(method));
    fits[fk] = fit;
    ledger->append({{{"type", "fit"}, {"key", key_json(key)}, {"fit_key", fk},
                     {"fit", to_json(fit)}}});
    spdlog::info("{}: threshold {} ({} heldout, alignment {:.4f})", fk, fit.threshold,
                 fit.n_heldout, fit.heldout_alignment);
    return fit;
  }

  /// Groups records by dataset id, keeping file order.
  std::vector<std::pair<std::string, std::vector<const QueryRecord*>>> by_dataset(
      const std::vector<const QueryRecord*>& recs) const {
    std::vector<std::pair<std::string, std::vector<const QueryRecord*>>> out;
    for (const QueryRecord* r : recs) {
      auto it = std::find_if(out.begin(), out.end(),
                             [&](const auto& p) { return p.first == r->dataset_id; });
      if (it == out.end()) {
        out.emplace_back(r->dataset_id, std::vector<const QueryRecord*>{});
        it = std::prev(out.end());
      }
      it->second.push_back(r);
    }
    return out;
  }

  void evaluate(const std::vector<MethodSpec>& methods, const std::vector<Modality>& modalities,
                const std::vector<const QueryRecord*>& recs, bool fit_only) {
    for (const auto& subject : cfg().roles.subjects) {
      Elicitor elicitor = make_elicitor(subject);
      for (const auto& [dataset, drecs] : by_dataset(recs)) {
        std::vector<const QueryRecord*> heldout;
        std::vector<const QueryRecord*> eval;
        for (const QueryRecord* r : drecs) {
          (r->split == Split::kHeldout ? heldout : eval).push_back(r);
        }
        if (cfg().evaluate_on_fit_data) eval = drecs;
        for (Modality modality : modalities) {
          for (const MethodSpec& method : methods) {
            const ReportKey key{subject, dataset, method.name(), std::string(to_string(modality))};
            std::optional<ThresholdFit> fit;
            if (method.is_score_kind()) fit = obtain_fit(elicitor, key, method, modality, heldout);
            if (fit_only) continue;
            spdlog::info("{}/{}/{}/{}: {} eval records", subject, dataset, key.modality,
                         key.method, eval.size());
            run_batch(elicitor, key, method, modality, Split::kEval, eval, fit, true);
          }
        }
      }
    }
  }

  void write_fits() {
    if (fits.empty()) return;
    const fs::path path = cfg().output_dir / "thresholds.json";
    std::map<std::string, ThresholdFit> all;
    if (fs::exists(path)) all = read_thresholds(path);
    for (const auto& [k, f] : fits) all[k] = f;
    write_thresholds(path, all);
  }
};

Runner::Runner(RunConfig config, Gateway::Options gateway_options)
    : config_(std::move(config)), impl_(std::make_unique<Impl>(*this)) {
  config_.validate();
  gateway_options.cache_dir = config_.cache_dir;
  gateway_options.max_in_flight = config_.concurrency;
  gateway_ = std::make_unique<Gateway>(gateway_options);
  for (const auto& e : config_.endpoints) {
    if (e.mock_script) gateway_->register_backend(e.spec.name, std::make_shared<MockBackend>(*e.mock_script));
  }
  std::set<std::string> ids;
  for (const auto& path : config_.datasets) {
    auto recs = load_dataset(path);
    const bool has_splits = std::all_of(recs.begin(), recs.end(),
                                        [](const QueryRecord& r) { return r.split.has_value(); });
    if (!has_splits) recs = assign_splits(std::move(recs), config_.heldout_fraction, config_.seed);
    for (auto& r : recs) {
      if (!ids.insert(r.dataset_id + "\x1f" + r.id).second) {
        throw DatasetError("duplicate record '" + r.id + "' in dataset '" + r.dataset_id + "'");
      }
      records_.push_back(std::move(r));
    }
  }
  impl_->image_cache = std::make_unique<ImageCache>(config_.cache_dir);
  impl_->judge = std::make_unique<Judge>(config_.judge, gateway_.get(), impl_->greedy_params());
}

Runner::~Runner() = default;

namespace {

void check_images(const std::vector<QueryRecord>& records, Modality modality) {
  if (modality == Modality::kQa) return;
  for (const auto& r : records) {
    if (!r.image_ref) {
      throw ConfigError("modality '" + std::string(to_string(modality)) + "' needs images but record '" +
                        r.id + "' has none");
    }
  }
}

std::vector<const QueryRecord*> pointers(const std::vector<QueryRecord>& recs) {
  std::vector<const QueryRecord*> out;
  for (const auto& r : recs) out.push_back(&r);
  return out;
}

}  // namespace

RunSummary Runner::run(bool resume) {
  check_images(records_, config_.modality);
  fs::create_directories(config_.output_dir);
  impl_->open(resume, true);
  const std::size_t calls_before = gateway_->backend_calls();
  impl_->evaluate(config_.methods, {config_.modality}, pointers(records_), false);
  impl_->write_fits();

  RunSummary s;
  s.reports = reports_from_ledger(RunLedger::read(impl_->ledger->path()));
  s.fits = impl_->fits;
  s.flagged = impl_->flagged;
  s.backend_calls = gateway_->backend_calls() - calls_before;
  if (s.reports.empty()) throw RunAbortedError("run produced no report rows");
  for (ReportFormat f : {ReportFormat::kJson, ReportFormat::kCsv, ReportFormat::kMarkdown}) {
    emit_report(s.reports, f, config_.output_dir / ("report." + std::string(extension_for(f))));
  }
  spdlog::info("run finished: {} report rows, {} flagged records, {} backend calls",
               s.reports.size(), s.flagged, s.backend_calls);
  return s;
}

ThresholdFit Runner::fit(const std::string& method_name, bool resume) {
  const MethodSpec* method = nullptr;
  MethodSpec parsed = parse_method(method_name);
  for (const auto& m : config_.methods) {
    if (m.name() == parsed.name()) method = &m;
  }
  if (method == nullptr) {
    if (!config_.methods.empty()) {
      parsed.n_samples = config_.methods.front().n_samples;
      parsed.sigma_step = config_.methods.front().sigma_step;
    }
    parsed.sample_temperature = config_.sample_temperature;
    method = &parsed;
  }
  if (!method->is_score_kind()) {
    throw ConfigError("method '" + method_name + "' gives a binary signal; nothing to fit");
  }
  check_images(records_, config_.modality);
  fs::create_directories(config_.output_dir);
  impl_->open(resume, false);
  impl_->file_fits.clear();
  impl_->evaluate({*method}, {config_.modality}, pointers(records_), true);
  impl_->write_fits();
  return impl_->fits.begin()->second;
}

RunSummary Runner::compare_modalities(const std::string& method_name, bool resume) {
  MethodSpec method = parse_method(method_name);
  for (const auto& m : config_.methods) {
    if (m.name() == method.name()) method = m;
  }
  for (const auto& s : config_.roles.subjects) {
    if (!config_.endpoint(s).spec.supports_images) {
      throw ConfigError("compare-modalities needs an image-capable subject; '" + s + "' is not");
    }
  }
  std::vector<const QueryRecord*> usable;
  for (const auto& r : records_) {
    if (r.qa_text && r.image_ref) {
      usable.push_back(&r);
    } else {
      spdlog::warn("record '{}' lacks {}; skipped for the modality comparison", r.id,
                   r.qa_text ? "an image" : "a parallel text question");
    }
  }
  if (usable.empty()) throw DatasetError("no record has both an image and a text question");

  fs::create_directories(config_.output_dir);
  impl_->open(resume, false);
  const std::size_t calls_before = gateway_->backend_calls();
  impl_->evaluate({method}, {Modality::kQa, Modality::kVqa, Modality::kImageOnly}, usable, false);
  impl_->write_fits();

  RunSummary s;
  for (auto& [k, r] : reports_from_ledger(RunLedger::read(impl_->ledger->path()))) {
    if (k.method == method.name()) s.reports.emplace(k, r);
  }
  s.fits = impl_->fits;
  s.flagged = impl_->flagged;
  s.backend_calls = gateway_->backend_calls() - calls_before;
  if (s.reports.empty()) throw RunAbortedError("modality comparison produced no report rows");
  emit_report(s.reports, ReportFormat::kJson, config_.output_dir / "modalities.json");
  atomic_write(config_.output_dir / "modalities.md", render_modality_table(s.reports));
  return s;
}

}  // namespace kbound

#include "kbound/metrics.hpp"

#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "kbound/error.hpp"
#include "kbound/response_cache.hpp"

namespace kbound {
using json = nlohmann::json;

MetricsReport MetricsReport::from_counts(std::int64_t tp, std::int64_t fp, std::int64_t tn,
                                         std::int64_t fn) {
  if (tp < 0 || fp < 0 || tn < 0 || fn < 0) throw Error("confusion counts must be non-negative");
  MetricsReport r;
  r.tp = tp;
  r.fp = fp;
  r.tn = tn;
  r.fn = fn;
  r.total = tp + fp + tn + fn;
  if (r.total == 0) throw Error("cannot compute metrics over zero outcomes");
  r.unc_r = r.unc_r_ratio().value();
  r.acc = r.acc_ratio().value();
  r.align = r.align_ratio().value();
  r.overco = r.overco_ratio().value();
  r.conser = r.conser_ratio().value();
  return r;
}

void MetricsReport::check_invariants() const {
  if (tp + fp + tn + fn != total) throw Error("tp+fp+tn+fn != total");
  if ((tp + tn) + fp + fn != total) throw Error("align + overco + conser != 1");
  if ((fn + tn) + (tp + fn) != (tp + tn) + 2 * fn) throw Error("unc_r + acc != align + 2 conser");
  if (unc_r != unc_r_ratio().value() || acc != acc_ratio().value() ||
      align != align_ratio().value() || overco != overco_ratio().value() ||
      conser != conser_ratio().value()) {
    throw Error("metric does not equal its count ratio");
  }
}

MetricsReport compute_metrics(std::span<const EvalOutcome> outcomes) {
  if (outcomes.empty()) throw Error("compute_metrics needs at least one outcome");
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (const auto& o : outcomes) {
    switch (classify_outcome(o.correct, o.confident)) {
      case Cell::kTP: ++tp; break;
      case Cell::kFP: ++fp; break;
      case Cell::kTN: ++tn; break;
      case Cell::kFN: ++fn; break;
    }
  }
  return MetricsReport::from_counts(tp, fp, tn, fn);
}

ReportFormat parse_report_format(std::string_view s) {
  if (s == "json") return ReportFormat::kJson;
  if (s == "csv") return ReportFormat::kCsv;
  if (s == "md" || s == "markdown") return ReportFormat::kMarkdown;
  throw ConfigError("unknown report format '" + std::string(s) + "' (json, csv, md)");
}

std::string_view extension_for(ReportFormat f) {
  switch (f) {
    case ReportFormat::kJson: return "json";
    case ReportFormat::kCsv: return "csv";
    case ReportFormat::kMarkdown: return "md";
  }
  return "txt";
}

namespace {

constexpr double kDenialUncR = 0.99;

std::string f4(double v) { return fmt::format("{:.4f}", v); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string render_json(const ReportSet& reports) {
  json rows = json::array();
  for (const auto& [k, r] : reports) {
    rows.push_back({{"model", k.model},
                    {"dataset", k.dataset},
                    {"method", k.method},
                    {"modality", k.modality},
                    {"total", r.total},
                    {"tp", r.tp},
                    {"fp", r.fp},
                    {"tn", r.tn},
                    {"fn", r.fn},
                    {"flagged", r.flagged},
                    {"unparsed_confidence", r.unparsed_confidence},
                    {"unc_r", r.unc_r},
                    {"acc", r.acc},
                    {"align", r.align},
                    {"overco", r.overco},
                    {"conser", r.conser}});
  }
  return json({{"reports", rows}}).dump(2) + "\n";
}

std::string render_csv(const ReportSet& reports) {
  std::string out =
      "model,dataset,modality,method,total,tp,fp,tn,fn,unc_r,acc,align,overco,conser\n";
  for (const auto& [k, r] : reports) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", csv_field(k.model),
                       csv_field(k.dataset), csv_field(k.modality), csv_field(k.method), r.total,
                       r.tp, r.fp, r.tn, r.fn, f4(r.unc_r), f4(r.acc), f4(r.align), f4(r.overco),
                       f4(r.conser));
  }
  return out;
}

std::string render_markdown(const ReportSet& reports) {
  std::map<std::string, std::set<std::string>> datasets;
  std::map<std::string, std::set<std::pair<std::string, std::string>>> rows;
  for (const auto& [k, r] : reports) {
    datasets[k.model].insert(k.dataset);
    rows[k.model].insert({k.method, k.modality});
  }
  std::string out;
  bool any_denial = false;
  for (const auto& [model, ds] : datasets) {
    out += "### " + model + "\n\n| method |";
    std::string rule = "|---|";
    for (const auto& d : ds) {
      for (const char* col : {"Unc-R.", "Acc", "Align.", "Conser.", "Overco."}) {
        out += fmt::format(" {} {} |", d, col);
        rule += "---:|";
      }
    }
    out += "\n" + rule + "\n";
    for (const auto& [method, modality] : rows[model]) {
      std::string label = method;
      if (modality != "vqa") label += " (" + modality + ")";
      std::string cells;
      bool denial = false;
      for (const auto& d : ds) {
        auto it = reports.find(ReportKey{model, d, method, modality});
        if (it == reports.end()) {
          cells += " - | - | - | - | - |";
          continue;
        }
        const auto& r = it->second;
        denial = denial || r.unc_r >= kDenialUncR;
        cells += fmt::format(" {} | {} | {} | {} | {} |", f4(r.unc_r), f4(r.acc), f4(r.align),
                             f4(r.conser), f4(r.overco));
      }
      if (denial) {
        label += " \xe2\x80\xa0";
        any_denial = true;
      }
      out += "| " + label + " |" + cells + "\n";
    }
    out += "\n";
  }
  if (any_denial) {
    out +=
        "\xe2\x80\xa0 Unc-R >= 0.99: the model declared (nearly) every answer unconfident, so "
        "alignment mostly reflects the error rate.\n";
  }
  return out;
}

}  // namespace

std::string render_report(const ReportSet& reports, ReportFormat format) {
  if (reports.empty()) throw Error("no reports to render");
  for (const auto& [k, r] : reports) {
    r.check_invariants();
    const std::int64_t attempted = r.total + r.flagged;
    if (attempted > 0 && r.flagged * 20 > attempted) {
      spdlog::warn("{}/{}/{}/{}: {} of {} records flagged and excluded", k.model, k.dataset,
                   k.method, k.modality, r.flagged, attempted);
    }
  }
  switch (format) {
    case ReportFormat::kJson: return render_json(reports);
    case ReportFormat::kCsv: return render_csv(reports);
    case ReportFormat::kMarkdown: return render_markdown(reports);
  }
  return {};
}

void emit_report(const ReportSet& reports, ReportFormat format, const std::filesystem::path& path) {
  atomic_write(path, render_report(reports, format));
}

ReportSet parse_report_json(std::string_view text) {
  ReportSet out;
  const json j = json::parse(text);
  for (const auto& row : j.at("reports")) {
    ReportKey k{row.at("model"), row.at("dataset"), row.at("method"),
                row.value("modality", std::string("vqa"))};
    MetricsReport r = MetricsReport::from_counts(row.at("tp"), row.at("fp"), row.at("tn"),
                                                 row.at("fn"));
    r.flagged = row.value("flagged", std::int64_t{0});
    r.unparsed_confidence = row.value("unparsed_confidence", std::int64_t{0});
    if (r.total != row.at("total").get<std::int64_t>()) throw Error("report total mismatch");
    // Stored ratios must be bit-identical to the recomputed ones.
    if (row.at("unc_r").get<double>() != r.unc_r || row.at("acc").get<double>() != r.acc ||
        row.at("align").get<double>() != r.align || row.at("overco").get<double>() != r.overco ||
        row.at("conser").get<double>() != r.conser) {
      throw Error("report metrics do not match their counts");
    }
    out.emplace(std::move(k), r);
  }
  return out;
}

std::string render_modality_table(const ReportSet& reports) {
  static const std::pair<const char*, const char*> kOrder[] = {
      {"qa", "QA"}, {"vqa", "VQA"}, {"image_only", "\"V\"QA"}};
  std::string out;
  std::set<std::tuple<std::string, std::string, std::string>> groups;
  for (const auto& [k, r] : reports) groups.insert({k.model, k.dataset, k.method});
  for (const auto& [model, dataset, method] : groups) {
    out += fmt::format("### {} / {} / {}\n\n", model, dataset, method);
    out += "| query | Unc-R. | Acc | Align. | Conser. | Overco. |\n";
    out += "|---|---:|---:|---:|---:|---:|\n";
    for (const auto& [modality, label] : kOrder) {
      auto it = reports.find(ReportKey{model, dataset, method, modality});
      if (it == reports.end()) continue;
      const auto& r = it->second;
      out += fmt::format("| {} | {} | {} | {} | {} | {} |\n", label, f4(r.unc_r), f4(r.acc),
                         f4(r.align), f4(r.conser), f4(r.overco));
    }
    out += "\n";
  }
  return out;
}

}  // namespace kbound

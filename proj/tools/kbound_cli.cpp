// kbound command-line interface.
//
//   kbound run --config run.toml [--method vanilla ...] [--modality vqa|qa|image_only] [--resume]
//   kbound fit --config run.toml --method ppl_thr
//   kbound compare-modalities --config run.toml --method vanilla
//   kbound report --ledger out/ --format json|csv|md
//   kbound prompts [--name vanilla --question "..."]

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "kbound/config.hpp"
#include "kbound/error.hpp"
#include "kbound/metrics.hpp"
#include "kbound/prompts.hpp"
#include "kbound/runner.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitAborted = 3;

kbound::RunConfig load_with_overrides(const std::string& path,
                                      const std::vector<std::string>& methods,
                                      const std::string& modality) {
  kbound::RunConfig cfg = kbound::load_run_config(path);
  kbound::apply_overrides(cfg, methods, modality);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Measure how well vision-language models know their knowledge boundary"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  std::string config_path;
  std::vector<std::string> methods;
  std::string modality;
  bool resume = false;

  auto* run = app.add_subcommand("run", "Evaluate methods on the eval split");
  run->add_option("--config", config_path, "Run configuration (TOML)")->required();
  run->add_option("--method", methods, "Restrict to these methods");
  run->add_option("--modality", modality, "Override the query modality")
      ->check(CLI::IsMember({"vqa", "qa", "image_only"}));
  run->add_flag("--resume", resume, "Serve completed records from the existing ledger");

  std::string fit_method;
  auto* fit = app.add_subcommand("fit", "Fit a score threshold on the heldout split");
  fit->add_option("--config", config_path, "Run configuration (TOML)")->required();
  fit->add_option("--method", fit_method, "Score-kind method")->required();
  fit->add_flag("--resume", resume, "Serve completed records from the existing ledger");

  std::string cmp_method;
  auto* cmp = app.add_subcommand("compare-modalities", "One method under qa, vqa and image_only");
  cmp->add_option("--config", config_path, "Run configuration (TOML)")->required();
  cmp->add_option("--method", cmp_method, "Method")->required();
  cmp->add_flag("--resume", resume, "Serve completed records from the existing ledger");

  std::string ledger_dir;
  std::string format = "json";
  std::string out_path;
  auto* report = app.add_subcommand("report", "Rebuild a report from a run ledger");
  report->add_option("--ledger", ledger_dir, "Output directory holding ledger.jsonl")->required();
  report->add_option("--format", format, "json, csv or md")
      ->check(CLI::IsMember({"json", "csv", "md"}));
  report->add_option("--output", out_path, "Write here instead of stdout");

  std::string prompt_name;
  std::string prompt_question;
  auto* prompts = app.add_subcommand("prompts", "Print the prompt catalog or one rendered prompt");
  prompts->add_option("--name", prompt_name, "Template key");
  prompts->add_option("--question", prompt_question, "Question to fill in");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);
  spdlog::set_pattern("[%l] %v");

  try {
    if (*run) {
      kbound::Runner runner(load_with_overrides(config_path, methods, modality));
      const auto summary = runner.run(resume);
      std::cout << kbound::render_report(summary.reports, kbound::ReportFormat::kMarkdown);
    } else if (*fit) {
      kbound::Runner runner(load_with_overrides(config_path, {}, ""));
      const auto f = runner.fit(fit_method, resume);
      std::cout << "threshold " << f.threshold << " direction " << kbound::to_string(f.direction)
                << " heldout_alignment " << f.heldout_alignment << " n_heldout " << f.n_heldout
                << "\n";
    } else if (*cmp) {
      kbound::Runner runner(load_with_overrides(config_path, {}, ""));
      const auto summary = runner.compare_modalities(cmp_method, resume);
      std::cout << kbound::render_modality_table(summary.reports);
    } else if (*report) {
      const auto reports = kbound::reports_from_ledger(
          kbound::RunLedger::read(std::filesystem::path(ledger_dir) / "ledger.jsonl"));
      if (reports.empty()) throw kbound::Error("ledger holds no completed eval records");
      const auto f = kbound::parse_report_format(format);
      if (out_path.empty()) {
        std::cout << kbound::render_report(reports, f);
      } else {
        kbound::emit_report(reports, f, out_path);
      }
    } else if (*prompts) {
      if (prompt_name.empty()) {
        std::cout << kbound::prompts::catalog_toml();
      } else {
        std::cout << kbound::prompts::fill(kbound::prompts::find(prompt_name).text,
                                           {{kbound::prompts::kQuestionSlot, prompt_question}});
        std::cout << "\n";
      }
    }
  } catch (const kbound::ConfigError& e) {
    spdlog::error("{}", e.what());
    return kExitConfig;
  } catch (const kbound::DatasetError& e) {
    spdlog::error("{}", e.what());
    return kExitConfig;
  } catch (const kbound::RunAbortedError& e) {
    spdlog::error("{}", e.what());
    return kExitAborted;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitFailure;
  }
  return kExitOk;
}

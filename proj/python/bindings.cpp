// Python extension module `kbound._kbound`.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cmath>

#include "kbound/calibration.hpp"
#include "kbound/config.hpp"
#include "kbound/elicitors.hpp"
#include "kbound/error.hpp"
#include "kbound/judging.hpp"
#include "kbound/metrics.hpp"
#include "kbound/perturb.hpp"
#include "kbound/prompts.hpp"
#include "kbound/runner.hpp"

namespace py = pybind11;
using namespace kbound;

namespace {

py::dict metrics_dict(const MetricsReport& m) {
  py::dict d;
  d["total"] = m.total;
  d["tp"] = m.tp;
  d["fp"] = m.fp;
  d["tn"] = m.tn;
  d["fn"] = m.fn;
  d["unc_r"] = m.unc_r;
  d["acc"] = m.acc;
  d["align"] = m.align;
  d["overco"] = m.overco;
  d["conser"] = m.conser;
  d["flagged"] = m.flagged;
  d["unparsed_confidence"] = m.unparsed_confidence;
  return d;
}

py::dict fit_dict(const ThresholdFit& f) {
  py::dict d;
  d["threshold"] = f.threshold;
  d["direction"] = std::string(to_string(f.direction));
  d["heldout_alignment"] = f.heldout_alignment;
  d["n_heldout"] = f.n_heldout;
  return d;
}

py::list reports_list(const ReportSet& reports) {
  py::list out;
  for (const auto& [k, m] : reports) {
    py::dict d = metrics_dict(m);
    d["model"] = k.model;
    d["dataset"] = k.dataset;
    d["method"] = k.method;
    d["modality"] = k.modality;
    out.append(d);
  }
  return out;
}

py::dict summary_dict(const RunSummary& s) {
  py::dict fits;
  for (const auto& [k, f] : s.fits) fits[py::str(k)] = fit_dict(f);
  py::dict d;
  d["reports"] = reports_list(s.reports);
  d["fits"] = fits;
  d["backend_calls"] = s.backend_calls;
  d["flagged"] = s.flagged;
  return d;
}

/// Accepts the "confident_if_score_*" names and the short forms "at_least" / "at_most".
Direction direction_arg(const std::string& s) {
  if (s == "at_least") return Direction::kConfidentIfAtLeast;
  if (s == "at_most") return Direction::kConfidentIfAtMost;
  return parse_direction(s);
}

ImageBuffer image_from_array(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw ConfigError("image must have shape (H, W) or (H, W, C)");
  const auto h = static_cast<std::size_t>(a.shape(0));
  const auto w = static_cast<std::size_t>(a.shape(1));
  const auto c = a.ndim() == 3 ? static_cast<std::size_t>(a.shape(2)) : 1;
  std::vector<float> px(a.data(), a.data() + a.size());
  return ImageBuffer(w, h, c, std::move(px));
}

py::array_t<float> array_from_image(const ImageBuffer& img, bool squeeze) {
  std::vector<py::ssize_t> shape{static_cast<py::ssize_t>(img.height()),
                                 static_cast<py::ssize_t>(img.width())};
  if (!squeeze) shape.push_back(static_cast<py::ssize_t>(img.channels()));
  py::array_t<float> out(shape);
  std::copy(img.pixels().begin(), img.pixels().end(), out.mutable_data());
  return out;
}

py::list messages_list(const Messages& msgs) {
  py::list out;
  for (const auto& m : msgs) {
    py::dict d;
    d["role"] = m.role;
    d["text"] = m.text;
    out.append(d);
  }
  return out;
}

RunConfig config_for(const std::filesystem::path& path, const std::vector<std::string>& methods,
                     const std::string& modality) {
  RunConfig cfg = load_run_config(path);
  apply_overrides(cfg, methods, modality);
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_kbound, m) {
  m.doc() = "Knowledge-boundary perception metrics and confidence elicitation harness";

  auto base = py::register_exception<Error>(m, "KboundError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DatasetError>(m, "DatasetError", base.ptr());
  py::register_exception<TransportError>(m, "TransportError", base.ptr());
  py::register_exception<CapabilityError>(m, "CapabilityError", base.ptr());
  auto parse = py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<UnparsedConfidenceError>(m, "UnparsedConfidenceError", parse.ptr());
  py::register_exception<JudgingError>(m, "JudgingError", base.ptr());
  py::register_exception<BatchError>(m, "BatchError", base.ptr());
  py::register_exception<RunAbortedError>(m, "RunAbortedError", base.ptr());

  m.def("methods", [] {
    std::vector<std::string> out;
    for (const auto& s : all_methods()) out.push_back(s.name());
    return out;
  }, "Method names in canonical order.");

  m.def("metrics", [](std::int64_t tp, std::int64_t fp, std::int64_t tn, std::int64_t fn) {
    return metrics_dict(MetricsReport::from_counts(tp, fp, tn, fn));
  }, py::arg("tp"), py::arg("fp"), py::arg("tn"), py::arg("fn"));

  m.def("fit_threshold", [](const std::vector<double>& scores, const std::vector<bool>& correct,
                            const std::string& direction) {
    if (scores.size() != correct.size()) throw ConfigError("scores and correct differ in length");
    std::vector<ScoredLabel> pairs;
    for (std::size_t i = 0; i < scores.size(); ++i) pairs.push_back({scores[i], correct[i]});
    return fit_dict(fit_threshold(pairs, direction_arg(direction)));
  }, py::arg("scores"), py::arg("correct"), py::arg("direction"));

  m.def("is_confident", [](double score, double threshold, const std::string& direction) {
    return is_confident(score, threshold, direction_arg(direction));
  }, py::arg("score"), py::arg("threshold"), py::arg("direction"));

  m.def("parse_verbalized", [](const std::string& text) {
    const auto p = parse_verbalized(text);
    return py::make_tuple(p.answer, p.confident);
  }, py::arg("text"), "Returns (answer, confident).");
  m.def("parse_probability", [](const std::string& t) { return parse_probability(t); }, py::arg("text"));
  m.def("compute_perplexity", [](const std::vector<double>& lp) { return compute_perplexity(lp); },
        py::arg("logprobs"));

  m.def("grade_answer", [](const std::string& answer, const std::vector<std::string>& gold,
                           const std::string& strategy) {
    return grade_answer(answer, gold, JudgeSpec{parse_judge_strategy(strategy), std::nullopt}, "");
  }, py::arg("answer"), py::arg("gold"), py::arg("strategy") = "normalized");
  m.def("judge_equivalence", [](const std::string& reference, const std::string& candidate,
                                const std::string& strategy) {
    return judge_equivalence(reference, candidate, "",
                             JudgeSpec{parse_judge_strategy(strategy), std::nullopt});
  }, py::arg("reference"), py::arg("candidate"), py::arg("strategy") = "normalized");

  m.def("prompt_catalog", [] {
    py::dict d;
    for (const auto& t : prompts::catalog()) d[py::str(std::string(t.key))] = std::string(t.text);
    return d;
  }, "Template key -> raw template text.");
  m.def("render_prompt", [](const std::string& method, const std::string& question,
                            const std::string& first_answer) {
    const MethodSpec spec = parse_method(method);
    if (spec.family == Family::kVerbalizedSingle) return messages_list(prompts::render_single(spec.variant, question));
    if (spec.family == Family::kVerbalizedDouble) {
      return messages_list(prompts::render_double(spec.variant, question, first_answer));
    }
    return messages_list(prompts::render_first_round(question));
  }, py::arg("method"), py::arg("question"), py::arg("first_answer") = "",
     "Messages a method sends for one question (first round for sampling methods).");

  m.def("noise_schedule", &noise_schedule, py::arg("n"), py::arg("step") = 0.05, py::arg("offset") = 0.0);
  m.def("add_gaussian_noise", [](const py::array_t<float, py::array::c_style | py::array::forcecast>& img,
                                 double sigma, std::uint64_t seed) {
    ImageBuffer in = image_from_array(img);
    ImageBuffer out;
    {
      py::gil_scoped_release release;
      out = add_gaussian_noise(in, sigma, seed);
    }
    return array_from_image(out, img.ndim() == 2);
  }, py::arg("image"), py::arg("sigma"), py::arg("seed"),
     "Float image in [0, 1], shape (H, W) or (H, W, C); result is clipped to [0, 1].");

  m.def("run", [](const std::filesystem::path& config, const std::vector<std::string>& methods,
                  const std::string& modality, bool resume) {
    RunSummary s;
    {
      py::gil_scoped_release release;
      Runner runner(config_for(config, methods, modality));
      s = runner.run(resume);
    }
    return summary_dict(s);
  }, py::arg("config"), py::arg("methods") = std::vector<std::string>{}, py::arg("modality") = "",
     py::arg("resume") = false);

  m.def("fit", [](const std::filesystem::path& config, const std::string& method, bool resume) {
    ThresholdFit f;
    {
      py::gil_scoped_release release;
      Runner runner(config_for(config, {}, ""));
      f = runner.fit(method, resume);
    }
    return fit_dict(f);
  }, py::arg("config"), py::arg("method"), py::arg("resume") = false);

  m.def("compare_modalities", [](const std::filesystem::path& config, const std::string& method,
                                 bool resume) {
    RunSummary s;
    {
      py::gil_scoped_release release;
      Runner runner(config_for(config, {}, ""));
      s = runner.compare_modalities(method, resume);
    }
    return summary_dict(s);
  }, py::arg("config"), py::arg("method"), py::arg("resume") = false);

  m.def("report", [](const std::filesystem::path& output_dir, const std::string& format) {
    const auto reports = reports_from_ledger(RunLedger::read(output_dir / "ledger.jsonl"));
    return render_report(reports, parse_report_format(format));
  }, py::arg("output_dir"), py::arg("format") = "json",
     "Rebuild the report from output_dir/ledger.jsonl.");
}

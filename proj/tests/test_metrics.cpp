#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kbound/error.hpp"
#include "kbound/metrics.hpp"
#include "published.hpp"
#include "test_util.hpp"

using namespace kbound;

namespace {

std::vector<EvalOutcome> outcomes_from(std::int64_t tp, std::int64_t fp, std::int64_t tn,
                                       std::int64_t fn) {
  std::vector<EvalOutcome> out;
  int id = 0;
  auto add = [&](std::int64_t n, bool correct, bool confident) {
    for (std::int64_t i = 0; i < n; ++i) {
      out.push_back(make_outcome("r" + std::to_string(id++), "a", correct, confident));
    }
  };
  add(tp, true, true);
  add(fp, false, true);
  add(tn, false, false);
  add(fn, true, false);
  return out;
}

double round4(double v) { return std::round(v * 1e4) / 1e4; }

}  // namespace

TEST(Metrics, BackDerivedCountsReproduceRow) {
  // TP=823, FN=1024, TN=6800, FP=1353 over 10000 records.
  const auto r = MetricsReport::from_counts(823, 1353, 6800, 1024);
  EXPECT_EQ(r.total, 10000);
  EXPECT_DOUBLE_EQ(round4(r.unc_r), 0.7824);
  EXPECT_DOUBLE_EQ(round4(r.acc), 0.1847);
  EXPECT_DOUBLE_EQ(round4(r.align), 0.7623);
  EXPECT_DOUBLE_EQ(round4(r.overco), 0.1353);
  EXPECT_DOUBLE_EQ(round4(r.conser), 0.1024);
}

TEST(Metrics, AllTruePositives) {
  const auto r = compute_metrics(outcomes_from(5, 0, 0, 0));
  EXPECT_EQ(r.acc, 1.0);
  EXPECT_EQ(r.align, 1.0);
  EXPECT_EQ(r.unc_r, 0.0);
  EXPECT_EQ(r.overco, 0.0);
  EXPECT_EQ(r.conser, 0.0);
}

TEST(Metrics, HandComputedSmallCase) {
  // TP=2, FP=1, TN=3, FN=4 -> total 10
  const auto r = compute_metrics(outcomes_from(2, 1, 3, 4));
  EXPECT_EQ(r.tp, 2);
  EXPECT_EQ(r.fp, 1);
  EXPECT_EQ(r.tn, 3);
  EXPECT_EQ(r.fn, 4);
  EXPECT_DOUBLE_EQ(r.unc_r, 0.7);
  EXPECT_DOUBLE_EQ(r.acc, 0.6);
  EXPECT_DOUBLE_EQ(r.align, 0.5);
  EXPECT_DOUBLE_EQ(r.overco, 0.1);
  EXPECT_DOUBLE_EQ(r.conser, 0.4);
}

TEST(Metrics, IdentitiesHoldExactlyOnRandomCounts) {
  std::mt19937_64 rng(123);
  std::uniform_int_distribution<std::int64_t> count(0, 5000);
  for (int i = 0; i < 500; ++i) {
    std::int64_t c[4];
    do {
      for (auto& x : c) x = count(rng);
    } while (c[0] + c[1] + c[2] + c[3] == 0);
    const auto r = MetricsReport::from_counts(c[0], c[1], c[2], c[3]);
    const std::int64_t t = r.total;
    ASSERT_EQ(t, c[0] + c[1] + c[2] + c[3]);
    // Cross-multiplied numerators over the shared denominator.
    ASSERT_EQ(r.align_ratio().num + r.overco_ratio().num + r.conser_ratio().num, t);
    ASSERT_EQ(r.unc_r_ratio().num + r.acc_ratio().num,
              r.align_ratio().num + 2 * r.conser_ratio().num);
    EXPECT_NO_THROW(r.check_invariants());
  }
}

TEST(Metrics, PermutationInvariant) {
  auto outs = outcomes_from(7, 3, 11, 2);
  const auto a = compute_metrics(outs);
  std::mt19937 rng(5);
  std::shuffle(outs.begin(), outs.end(), rng);
  EXPECT_EQ(compute_metrics(outs), a);
}

TEST(Metrics, Errors) {
  EXPECT_THROW(compute_metrics({}), Error);
  EXPECT_THROW(MetricsReport::from_counts(0, 0, 0, 0), Error);
  EXPECT_THROW(MetricsReport::from_counts(-1, 2, 0, 0), Error);
}

TEST(Report, CsvSingleRow) {
  ReportSet set{{{"m", "d", "vanilla"}, MetricsReport::from_counts(1, 2, 3, 4)}};
  const std::string csv = render_report(set, ReportFormat::kCsv);
  std::istringstream in(csv);
  std::string header, row, extra;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_FALSE(std::getline(in, extra) && !extra.empty());
  EXPECT_EQ(header, "model,dataset,modality,method,total,tp,fp,tn,fn,unc_r,acc,align,overco,conser");
  EXPECT_EQ(row, "m,d,vqa,vanilla,10,1,2,3,4,0.7000,0.5000,0.4000,0.2000,0.4000");
  // 10 numeric columns: total, 4 counts, 5 metrics
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), 13);
}

TEST(Report, MarkdownRowsSortedByMethod) {
  ReportSet set{{{"m", "d", "vanilla"}, MetricsReport::from_counts(1, 1, 1, 1)},
                {{"m", "d", "challenge"}, MetricsReport::from_counts(2, 1, 1, 1)}};
  const std::string md = render_report(set, ReportFormat::kMarkdown);
  const auto a = md.find("| challenge");
  const auto b = md.find("| vanilla");
  ASSERT_NE(a, std::string::npos);
  ASSERT_NE(b, std::string::npos);
  EXPECT_LT(a, b);
  EXPECT_NE(md.find("Unc-R."), std::string::npos);
}

TEST(Report, DenialFootnote) {
  ReportSet set{{{"m", "d", "challenge"}, MetricsReport::from_counts(0, 0, 5, 5)}};
  const std::string md = render_report(set, ReportFormat::kMarkdown);
  EXPECT_NE(md.find("challenge †"), std::string::npos);
}

TEST(Report, JsonRoundTripFullPrecision) {
  ReportSet set{{{"m1", "d", "random", "qa"}, MetricsReport::from_counts(3, 7, 11, 13)},
                {{"m2", "e", "vanilla"}, MetricsReport::from_counts(1, 0, 0, 2)}};
  set.begin()->second.flagged = 2;
  set.begin()->second.unparsed_confidence = 1;
  const ReportSet back = parse_report_json(render_report(set, ReportFormat::kJson));
  EXPECT_EQ(back, set);
  // Emission is deterministic.
  EXPECT_EQ(render_report(back, ReportFormat::kJson), render_report(set, ReportFormat::kJson));
}

TEST(Report, Formats) {
  EXPECT_EQ(parse_report_format("json"), ReportFormat::kJson);
  EXPECT_EQ(parse_report_format("csv"), ReportFormat::kCsv);
  EXPECT_EQ(parse_report_format("md"), ReportFormat::kMarkdown);
  EXPECT_THROW(parse_report_format("xml"), Error);
  EXPECT_THROW(render_report({}, ReportFormat::kJson), Error);
}

TEST(Report, ModalityTableShape) {
  ReportSet set;
  for (const char* m : {"qa", "vqa", "image_only"}) {
    set.emplace(ReportKey{"model", "d", "vanilla", m}, MetricsReport::from_counts(1, 1, 1, 1));
  }
  const std::string md = render_modality_table(set);
  EXPECT_NE(md.find("| QA |"), std::string::npos);
  EXPECT_NE(md.find("| VQA |"), std::string::npos);
  EXPECT_NE(md.find("| \"V\"QA |"), std::string::npos);
  EXPECT_NE(md.find("Unc-R. | Acc | Align. | Conser. | Overco."), std::string::npos);
}

TEST(Published, RowsBackDeriveExceptFiveInconsistentOnes) {
  const auto rows = kbound::testing::load_published(nlohmann::json::parse(
      kbound::testing::read_file(std::string(KBOUND_SOURCE_DIR) + "/tests/data/published_tables.json")));
  ASSERT_EQ(rows.size(), 144u);
  int derived = 0;
  for (const auto& r : rows) {
    const auto c = kbound::testing::back_derive(r);
    const double gap = std::abs(kbound::testing::identity_gap(r));
    if (c) {
      ++derived;
      const auto m = MetricsReport::from_counts(c->tp, c->fp, c->tn, c->fn);
      EXPECT_NEAR(m.unc_r, r.unc_r, 0.0005 + 1e-12);
      EXPECT_NEAR(m.acc, r.acc, 0.0005 + 1e-12);
      EXPECT_NEAR(m.align, r.align, 0.0005 + 1e-12);
      EXPECT_NEAR(m.conser, r.conser, 0.0005 + 1e-12);
      EXPECT_NEAR(m.overco, r.overco, 0.0005 + 1e-12);
    } else {
      // No integer counts exist: the row breaks an exact count identity beyond rounding.
      EXPECT_GT(gap, 6 * 0.0005) << r.model << " " << r.method << " " << r.dataset;
    }
  }
  EXPECT_EQ(derived, 139);
}

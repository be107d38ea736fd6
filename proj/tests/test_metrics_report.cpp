// Copyright (C) 2026 critloop authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"

#include "critloop/metrics_report.hpp"
#include "critloop/rng.hpp"

using namespace critloop::metrics;
using critloop::eval::CriterionVerdict;
using critloop::eval::EvalTable;
using critloop::eval::Verdict;
using critloop::model::Granularity;
using critloop::model::Perspective;
using critloop::model::Strategy;
namespace ts = critloop::testsupport;

namespace {

void add_validity(EvalTable& table, const std::string& id, bool specific) {
  Verdict verdict;
  verdict.feedback_id = id;
  verdict.perspective = Perspective::validity;
  verdict.label = specific ? "specific" : "not specific";
  verdict.passed_gate = specific;
  table.verdicts.push_back(verdict);
}

void add_context(EvalTable& table, const std::string& id,
                 const std::string& label) {
  Verdict verdict;
  verdict.feedback_id = id;
  verdict.perspective = Perspective::contextualization;
  verdict.label = label;
  verdict.passed_gate = label == "match";
  table.verdicts.push_back(verdict);
}

void add_criterion(EvalTable& table, const std::string& id,
                   const std::string& criterion_id, bool critique,
                   bool helpful) {
  CriterionVerdict verdict;
  verdict.feedback_id = id;
  verdict.criterion_id = criterion_id;
  verdict.extraction = critique ? "extract" : "";
  verdict.has_critique_or_suggestion = critique;
  if (critique) {
    verdict.helpful = helpful;
  }
  table.criterion_verdicts.push_back(verdict);
}

// 10 records, 8 specific, 6 match; 20 criterion verdicts, 9 yes, 6 helpful.
EvalTable worked_example() {
  EvalTable table;
  for (int i = 0; i < 10; ++i) {
    add_validity(table, "f" + std::to_string(i), i < 8);
  }
  for (int i = 0; i < 8; ++i) {
    add_context(table, "f" + std::to_string(i), i < 6 ? "match" : "not match");
  }
  for (int i = 0; i < 20; ++i) {
    const bool critique = i < 9;
    const bool helpful = i < 6;
    add_criterion(table, "f" + std::to_string(i % 6), "c" + std::to_string(i),
                  critique, helpful);
  }
  return table;
}

} // namespace

TEST_CASE("rounding is half away from zero at one decimal") {
  CHECK(round1(66.666) == doctest::Approx(66.7));
  CHECK(round1(2.75) == doctest::Approx(2.8));
  CHECK(round1(-2.75) == doctest::Approx(-2.8));
  CHECK(round1(0.04) == doctest::Approx(0.0));
  CHECK(format_pct(66.666) == "66.7");
  CHECK(format_pct(std::nullopt) == "\xE2\x80\x94");
}

TEST_CASE("compute_rates reproduces the worked ratios") {
  const MetricsReport report = compute_rates(worked_example());
  CHECK(round1(*report.validity_pct) == doctest::Approx(80.0));
  CHECK(round1(*report.contextualization_pct) == doctest::Approx(75.0));
  CHECK(round1(*report.constructiveness_pct) == doctest::Approx(45.0));
  CHECK(round1(*report.helpfulness_pct) == doctest::Approx(66.7));
  CHECK(report.critique_count == 9);
  CHECK(report.helpful_count == 6);
}

TEST_CASE("zero denominators stay undefined, never zero") {
  EvalTable table;
  add_validity(table, "f0", true);
  add_context(table, "f0", "match");
  // Criterion verdicts exist but none say yes.
  add_criterion(table, "f0", "c0", false, false);
  const MetricsReport report = compute_rates(table);
  CHECK(report.validity_pct == doctest::Approx(100.0));
  CHECK(report.contextualization_pct == doctest::Approx(100.0));
  CHECK(report.constructiveness_pct == doctest::Approx(0.0));
  CHECK_FALSE(report.helpfulness_pct.has_value());

  const EvalTable empty;
  const MetricsReport none = compute_rates(empty);
  CHECK_FALSE(none.validity_pct.has_value());
  CHECK_FALSE(none.contextualization_pct.has_value());
  CHECK_FALSE(none.constructiveness_pct.has_value());
  CHECK_FALSE(none.helpfulness_pct.has_value());
}

TEST_CASE("overall counts pair helpful with critiques") {
  const EvalTable empty;
  CHECK(overall_counts(empty) == std::pair<long long, long long>{0, 0});

  EvalTable table;
  for (int i = 0; i < 7; ++i) {
    add_criterion(table, "f", "c" + std::to_string(i), true, i < 5);
  }
  CHECK(overall_counts(table) == std::pair<long long, long long>{5, 7});
}

TEST_CASE("per-criterion profiles follow the published conventions") {
  auto pack = ts::fixture_pack(critloop::model::TaskKind::introduction);
  const std::string c0 = pack.aspects[0].criteria[0].id;
  const std::string c1 = pack.aspects[0].criteria[1].id;
  const std::string c2 = pack.aspects[0].criteria[2].id;

  EvalTable table;
  // c0: potential 10, yes 4, helpful 3 -> (40.0, 75.0)
  for (int i = 0; i < 10; ++i) {
    add_criterion(table, "f" + std::to_string(i), c0, i < 4, i < 3);
  }
  // c1: potential 3, yes 0 -> helpful_pct 0 by convention
  for (int i = 0; i < 3; ++i) {
    add_criterion(table, "f" + std::to_string(i), c1, false, false);
  }
  // c2: no verdicts at all -> potential 0 -> critique_pct undefined

  const auto profiles = per_criterion_profile(table, pack);
  REQUIRE(profiles.size() == 3);
  CHECK(profiles[0].first == c0);
  CHECK(round1(*profiles[0].second.critique_pct) == doctest::Approx(40.0));
  CHECK(round1(profiles[0].second.helpful_pct) == doctest::Approx(75.0));
  CHECK(profiles[1].second.critique_pct == doctest::Approx(0.0));
  CHECK(profiles[1].second.helpful_pct == doctest::Approx(0.0));
  CHECK_FALSE(profiles[2].second.critique_pct.has_value());
  CHECK(profiles[2].second.helpful_pct == doctest::Approx(0.0));
}

TEST_CASE("granularity deltas reproduce the published rows") {
  MetricsReport batch;
  batch.pack_id = "reddit";
  batch.strategy = Strategy::crit;
  batch.granularity = Granularity::aspect_batch;
  MetricsReport single = batch;
  single.granularity = Granularity::single_criterion;

  batch.validity_pct = 81.0;
  single.validity_pct = 63.0;
  batch.contextualization_pct = 93.0;
  single.contextualization_pct = 74.8;
  batch.constructiveness_pct = 14.3;
  single.constructiveness_pct = 39.6;
  batch.helpfulness_pct = 67.8;
  single.helpfulness_pct = 63.1;

  const GranularityDelta delta = granularity_delta(batch, single);
  CHECK(*delta.validity == doctest::Approx(18.0).epsilon(0.0005));
  CHECK(*delta.contextualization == doctest::Approx(18.2).epsilon(0.0005));
  CHECK(*delta.constructiveness == doctest::Approx(-25.3).epsilon(0.0005));
  CHECK(*delta.helpfulness == doctest::Approx(4.7).epsilon(0.0005));

  const GranularityDelta zero = granularity_delta(batch, [&] {
    MetricsReport same = batch;
    same.granularity = Granularity::single_criterion;
    return same;
  }());
  CHECK(*zero.validity == doctest::Approx(0.0));
  CHECK(*zero.contextualization == doctest::Approx(0.0));
  CHECK(*zero.constructiveness == doctest::Approx(0.0));
  CHECK(*zero.helpfulness == doctest::Approx(0.0));

  MetricsReport other_pack = single;
  other_pack.pack_id = "different";
  CHECK_THROWS_AS((void)granularity_delta(batch, other_pack), MetricsError);
  MetricsReport other_strategy = single;
  other_strategy.strategy = Strategy::icl;
  CHECK_THROWS_AS((void)granularity_delta(batch, other_strategy),
                  MetricsError);
}

TEST_CASE("reports render deterministically with em dashes for undefined") {
  MetricsReport report = compute_rates(worked_example());
  report.pack_id = "p";
  report.strategy = Strategy::base;

  EvalTable empty;
  add_validity(empty, "f0", false); // no gated records at all
  MetricsReport sparse = compute_rates(empty);

  const std::vector<std::pair<std::string, MetricsReport>> reports = {
      {"base", report}, {"crit", sparse}};
  const std::string first = render_report(reports);
  const std::string second = render_report(reports);
  CHECK(first == second);
  // The sparse slice has one all-failing record: validity is a defined 0.0,
  // but contextualization (0 specific) renders as an em dash, not 0.
  CHECK(first.find("| validity % | 80.0 | 0.0 |") != std::string::npos);
  CHECK(first.find("| contextualization % | 75.0 | \xE2\x80\x94 |") !=
        std::string::npos);

  const std::string csv = render_csv(reports);
  CHECK(csv.find("validity_pct,80.0,0.0\r\n") != std::string::npos);
  CHECK(csv.find("contextualization_pct,75.0,\r\n") != std::string::npos);
  CHECK(csv.find("helpfulness_pct,66.7,\r\n") != std::string::npos);
}

TEST_CASE("csv quoting follows RFC 4180") {
  MetricsReport report;
  report.validity_pct = 50.0;
  const std::string csv =
      render_csv({{"label,with\"quote", report}});
  CHECK(csv.find("\"label,with\"\"quote\"") != std::string::npos);
}

TEST_CASE("identity: helpful/total equals constructiveness times helpfulness") {
  critloop::rng::DeterministicRng rng(7);
  int checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    EvalTable table;
    const std::size_t cells = 1 + rng.below(40);
    for (std::size_t i = 0; i < cells; ++i) {
      const bool critique = rng.below(100) < 55;
      const bool helpful = rng.below(100) < 60;
      add_criterion(table, "f" + std::to_string(i % 7),
                    "c" + std::to_string(i % 5), critique, helpful);
    }
    const MetricsReport report = compute_rates(table);
    REQUIRE(report.constructiveness_pct.has_value());
    if (!report.helpfulness_pct.has_value()) {
      CHECK(report.critique_count == 0);
      continue;
    }
    ++checked;
    const double lhs = static_cast<double>(report.helpful_count) /
                       static_cast<double>(cells);
    const double rhs = (*report.constructiveness_pct / 100.0) *
                       (*report.helpfulness_pct / 100.0);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
    CHECK(report.helpful_count <= report.critique_count);
  }
  CHECK(checked > 900);
}

// Copyright (C) 2026 critloop authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "critloop/layered_eval.hpp"
#include "critloop/task_model.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace critloop::metrics {

struct MetricsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Per-criterion profile. critique_pct is undefined when the criterion had
/// no fully gated record in scope; helpful_pct is 0 when no critiques were
/// generated (the published convention).
struct CriterionProfile {
  std::optional<double> critique_pct;
  double helpful_pct = 0.0;
  long long potential = 0;
  long long critiques = 0;
  long long helpful = 0;
};

/// Pooled (micro-averaged) rates and counts for one strategy slice of a
/// run. Zero-denominator rates stay undefined — never reported as 0.
struct MetricsReport {
  std::string pack_id;
  model::Strategy strategy = model::Strategy::base;
  model::Granularity granularity = model::Granularity::aspect_batch;

  std::optional<double> validity_pct;
  std::optional<double> contextualization_pct;
  std::optional<double> unsure_pct;
  std::optional<double> constructiveness_pct;
  std::optional<double> helpfulness_pct;
  long long helpful_count = 0;
  long long critique_count = 0;

  std::vector<std::pair<std::string, CriterionProfile>> per_criterion;
};

struct GranularityDelta {
  std::optional<double> validity;
  std::optional<double> contextualization;
  std::optional<double> constructiveness;
  std::optional<double> helpfulness;
};

/// Rounds to one decimal, half away from zero. Applied at render/compare
/// time only; internal arithmetic stays double precision.
double round1(double value);
/// "81.0" for defined values, the em dash for undefined ones.
std::string format_pct(const std::optional<double>& value);

MetricsReport compute_rates(const eval::EvalTable& table);

std::pair<long long, long long> overall_counts(const eval::EvalTable& table);

std::vector<std::pair<std::string, CriterionProfile>>
per_criterion_profile(const eval::EvalTable& table,
                      const model::TaskPack& pack);

/// Batch minus single per rate, 1-decimal. Both reports must come from the
/// same pack and strategy, with the expected granularities.
GranularityDelta granularity_delta(const MetricsReport& batch,
                                   const MetricsReport& single);

/// Deterministic Markdown document: strategies as columns, metrics as
/// rows, per-criterion appendix per strategy.
std::string
render_report(const std::vector<std::pair<std::string, MetricsReport>>& reports);

/// RFC-4180 CSV with the same content; undefined fields render empty.
std::string
render_csv(const std::vector<std::pair<std::string, MetricsReport>>& reports);

std::string render_delta_section(const GranularityDelta& delta,
                                 const std::string& batch_label,
                                 const std::string& single_label);

} // namespace critloop::metrics

// Copyright (C) 2026 critloop authors
// SPDX-License-Identifier: Apache-2.0

#include "critloop/metrics_report.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace critloop::metrics {

using eval::CriterionVerdict;
using eval::EvalTable;
using eval::Verdict;
using model::Perspective;

namespace {

std::optional<double> ratio_pct(long long numerator, long long denominator) {
  if (denominator == 0) {
    return std::nullopt;
  }
  return 100.0 * static_cast<double>(numerator) /
         static_cast<double>(denominator);
}

std::string format_fixed1(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.1f", round1(value));
  return buffer;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) {
    return field;
  }
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') {
      out += "\"\"";
    } else {
      out.push_back(c);
    }
  }
  out.push_back('"');
  return out;
}

std::string format_csv_pct(const std::optional<double>& value) {
  return value ? format_fixed1(*value) : std::string();
}

} // namespace

double round1(double value) { return std::round(value * 10.0) / 10.0; }

std::string format_pct(const std::optional<double>& value) {
  return value ? format_fixed1(*value) : std::string("\xE2\x80\x94");
}

MetricsReport compute_rates(const EvalTable& table) {
  long long records = 0;
  long long specific = 0;
  long long matched = 0;
  long long unsure = 0;
  for (const Verdict& verdict : table.verdicts) {
    if (verdict.perspective == Perspective::validity) {
      ++records;
      if (verdict.passed_gate) {
        ++specific;
      }
    } else if (verdict.perspective == Perspective::contextualization) {
      if (verdict.passed_gate) {
        ++matched;
      }
      if (verdict.label == "unsure") {
        ++unsure;
      }
    }
  }

  long long criterion_total = 0;
  long long critiques = 0;
  long long helpful = 0;
  for (const CriterionVerdict& verdict : table.criterion_verdicts) {
    ++criterion_total;
    if (verdict.has_critique_or_suggestion) {
      ++critiques;
      if (verdict.helpful.value_or(false)) {
        ++helpful;
      }
    }
  }

  MetricsReport report;
  report.validity_pct = ratio_pct(specific, records);
  report.contextualization_pct = ratio_pct(matched, specific);
  report.unsure_pct = ratio_pct(unsure, specific);
  report.constructiveness_pct = ratio_pct(critiques, criterion_total);
  report.helpfulness_pct = ratio_pct(helpful, critiques);
  report.critique_count = critiques;
  report.helpful_count = helpful;
  return report;
}

std::pair<long long, long long> overall_counts(const EvalTable& table) {
  long long critiques = 0;
  long long helpful = 0;
  for (const CriterionVerdict& verdict : table.criterion_verdicts) {
    if (verdict.has_critique_or_suggestion) {
      ++critiques;
      if (verdict.helpful.value_or(false)) {
        ++helpful;
      }
    }
  }
  return {helpful, critiques};
}

std::vector<std::pair<std::string, CriterionProfile>>
per_criterion_profile(const EvalTable& table, const model::TaskPack& pack) {
  std::map<std::string, CriterionProfile> by_id;
  for (const CriterionVerdict& verdict : table.criterion_verdicts) {
    CriterionProfile& profile = by_id[verdict.criterion_id];
    ++profile.potential;
    if (verdict.has_critique_or_suggestion) {
      ++profile.critiques;
      if (verdict.helpful.value_or(false)) {
        ++profile.helpful;
      }
    }
  }

  std::vector<std::pair<std::string, CriterionProfile>> profiles;
  for (const model::Aspect& aspect : pack.aspects) {
    for (const model::Criterion& criterion : aspect.criteria) {
      CriterionProfile profile = by_id.count(criterion.id)
                                     ? by_id[criterion.id]
                                     : CriterionProfile{};
      profile.critique_pct = ratio_pct(profile.critiques, profile.potential);
      if (profile.critiques > 0) {
        profile.helpful_pct = 100.0 * static_cast<double>(profile.helpful) /
                              static_cast<double>(profile.critiques);
      } else {
        profile.helpful_pct = 0.0;
      }
      profiles.emplace_back(criterion.id, profile);
    }
  }
  return profiles;
}

GranularityDelta granularity_delta(const MetricsReport& batch,
                                   const MetricsReport& single) {
  if (batch.pack_id != single.pack_id) {
    throw MetricsError("granularity delta requires reports from one pack (\"" +
                       batch.pack_id + "\" vs \"" + single.pack_id + "\")");
  }
  if (batch.strategy != single.strategy) {
    throw MetricsError("granularity delta requires one strategy (" +
                       model::to_string(batch.strategy) + " vs " +
                       model::to_string(single.strategy) + ")");
  }
  if (batch.granularity != model::Granularity::aspect_batch ||
      single.granularity != model::Granularity::single_criterion) {
    throw MetricsError(
        "granularity delta expects an aspect-batch and a single-criterion "
        "report, in that order");
  }

  auto delta = [](const std::optional<double>& b,
                  const std::optional<double>& s) -> std::optional<double> {
    if (!b || !s) {
      return std::nullopt;
    }
    return round1(round1(*b) - round1(*s));
  };

  GranularityDelta out;
  out.validity = delta(batch.validity_pct, single.validity_pct);
  out.contextualization =
      delta(batch.contextualization_pct, single.contextualization_pct);
  out.constructiveness =
      delta(batch.constructiveness_pct, single.constructiveness_pct);
  out.helpfulness = delta(batch.helpfulness_pct, single.helpfulness_pct);
  return out;
}

std::string render_report(
    const std::vector<std::pair<std::string, MetricsReport>>& reports) {
  if (reports.empty()) {
    throw MetricsError("render_report requires at least one report");
  }

  std::ostringstream out;
  out << "# Feedback quality report\n\n";
  out << "Aggregation: pooled (micro-average) across all verdicts of each "
         "strategy.\n\n";

  out << "| metric |";
  for (const auto& [label, report] : reports) {
    out << ' ' << label << " |";
  }
  out << "\n|---|";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    out << "---|";
  }
  out << '\n';

  auto rate_row = [&](const char* name, auto getter) {
    out << "| " << name << " |";
    for (const auto& [label, report] : reports) {
      out << ' ' << format_pct(getter(report)) << " |";
    }
    out << '\n';
  };
  rate_row("validity %", [](const MetricsReport& r) { return r.validity_pct; });
  rate_row("contextualization %",
           [](const MetricsReport& r) { return r.contextualization_pct; });
  rate_row("unsure %", [](const MetricsReport& r) { return r.unsure_pct; });
  rate_row("constructiveness %",
           [](const MetricsReport& r) { return r.constructiveness_pct; });
  rate_row("helpfulness %",
           [](const MetricsReport& r) { return r.helpfulness_pct; });

  out << "| critique count |";
  for (const auto& [label, report] : reports) {
    out << ' ' << report.critique_count << " |";
  }
  out << "\n| helpful count |";
  for (const auto& [label, report] : reports) {
    out << ' ' << report.helpful_count << " |";
  }
  out << '\n';

  for (const auto& [label, report] : reports) {
    if (report.per_criterion.empty()) {
      continue;
    }
    out << "\n## Per-criterion profile: " << label << "\n\n";
    out << "| criterion | critique % | helpful % |\n|---|---|---|\n";
    for (const auto& [criterion_id, profile] : report.per_criterion) {
      out << "| " << criterion_id << " | " << format_pct(profile.critique_pct)
          << " | " << format_fixed1(profile.helpful_pct) << " |\n";
    }
  }
  return out.str();
}

std::string
render_csv(const std::vector<std::pair<std::string, MetricsReport>>& reports) {
  if (reports.empty()) {
    throw MetricsError("render_csv requires at least one report");
  }
  std::ostringstream out;
  out << "metric";
  for (const auto& [label, report] : reports) {
    out << ',' << csv_escape(label);
  }
  out << "\r\n";

  auto rate_row = [&](const char* name, auto getter) {
    out << name;
    for (const auto& [label, report] : reports) {
      out << ',' << format_csv_pct(getter(report));
    }
    out << "\r\n";
  };
  rate_row("validity_pct",
           [](const MetricsReport& r) { return r.validity_pct; });
  rate_row("contextualization_pct",
           [](const MetricsReport& r) { return r.contextualization_pct; });
  rate_row("unsure_pct", [](const MetricsReport& r) { return r.unsure_pct; });
  rate_row("constructiveness_pct",
           [](const MetricsReport& r) { return r.constructiveness_pct; });
  rate_row("helpfulness_pct",
           [](const MetricsReport& r) { return r.helpfulness_pct; });

  out << "critique_count";
  for (const auto& [label, report] : reports) {
    out << ',' << report.critique_count;
  }
  out << "\r\n";
  out << "helpful_count";
  for (const auto& [label, report] : reports) {
    out << ',' << report.helpful_count;
  }
  out << "\r\n";

  // Per-criterion rows follow pack order; the first report defines the
  // criterion universe (all reports share the pack).
  const auto& first = reports.front().second.per_criterion;
  for (std::size_t i = 0; i < first.size(); ++i) {
    const std::string& criterion_id = first[i].first;
    out << csv_escape("per_criterion/" + criterion_id + "/critique_pct");
    for (const auto& [label, report] : reports) {
      const auto* profile =
          i < report.per_criterion.size() ? &report.per_criterion[i].second
                                          : nullptr;
      out << ','
          << (profile ? format_csv_pct(profile->critique_pct) : std::string());
    }
    out << "\r\n";
    out << csv_escape("per_criterion/" + criterion_id + "/helpful_pct");
    for (const auto& [label, report] : reports) {
      const auto* profile =
          i < report.per_criterion.size() ? &report.per_criterion[i].second
                                          : nullptr;
      out << ',' << (profile ? format_fixed1(profile->helpful_pct) : std::string());
    }
    out << "\r\n";
  }
  return out.str();
}

std::string render_delta_section(const GranularityDelta& delta,
                                 const std::string& batch_label,
                                 const std::string& single_label) {
  auto signed_pct = [](const std::optional<double>& value) -> std::string {
    if (!value) {
      return "\xE2\x80\x94";
    }
    const double rounded = round1(*value);
    std::string text = format_fixed1(rounded);
    if (rounded > 0) {
      text.insert(text.begin(), '+');
    }
    return text;
  };

  std::ostringstream out;
  out << "\n## Granularity comparison: " << batch_label << " minus "
      << single_label << "\n\n";
  out << "| metric | B-S |\n|---|---|\n";
  out << "| validity % | " << signed_pct(delta.validity) << " |\n";
  out << "| contextualization % | " << signed_pct(delta.contextualization)
      << " |\n";
  out << "| constructiveness % | " << signed_pct(delta.constructiveness)
      << " |\n";
  out << "| helpfulness % | " << signed_pct(delta.helpfulness) << " |\n";
  return out.str();
}

} // namespace critloop::metrics

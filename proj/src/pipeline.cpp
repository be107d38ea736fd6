// Copyright (C) 2026 critloop authors
// SPDX-License-Identifier: Apache-2.0

#include "critloop/pipeline.hpp"

#include "critloop/feedback_engine.hpp"

#include <json.hpp>

#include <algorithm>
#include <ctime>
#include <fstream>

namespace critloop::pipeline {

using model::Granularity;
using model::ProviderRef;
using model::RunManifest;
using model::Strategy;
using model::TaskPack;

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void fail(const std::string& message) {
  throw PipelineError(message);
}

std::unique_ptr<gateway::Gateway> make_gateway(const ProviderRef& ref,
                                               const RunConfig& config) {
  auto provider =
      gateway::make_provider(ref.provider, config.fixtures_dir, config.offline);
  gateway::GatewayConfig gateway_config;
  gateway_config.cache_dir = config.cache_dir;
  gateway_config.max_in_flight = config.max_in_flight;
  gateway_config.offline = config.offline;
  return std::make_unique<gateway::Gateway>(std::move(provider),
                                            gateway_config);
}

RunManifest manifest_for(const RunConfig& config, const TaskPack& pack) {
  RunManifest manifest;
  manifest.pack_id = pack.id;
  manifest.generator = config.generator;
  manifest.embedder = config.embedder;
  manifest.judge = config.judge;
  manifest.sampling = pack.sampling;
  manifest.rng_seed = config.seed;
  manifest.created_at =
      config.created_at.empty() ? now_utc_iso8601() : config.created_at;
  return manifest;
}

RunManifest open_or_create_manifest(const RunConfig& config,
                                    const TaskPack& pack) {
  const fs::path file = config.run_dir() / "manifest.json";
  if (!fs::exists(file)) {
    return manifest_for(config, pack);
  }
  RunManifest manifest = model::load_run_manifest(file);
  RunManifest expected = manifest_for(config, pack);
  expected.created_at = manifest.created_at;
  expected.generations = manifest.generations;
  if (!(manifest == expected)) {
    fail(file.string() +
         ": run manifest does not match the requested configuration; use a "
         "fresh run id");
  }
  return manifest;
}

std::string slice_label(Strategy strategy, Granularity granularity) {
  std::string label = model::to_string(strategy);
  if (granularity == Granularity::single_criterion) {
    label += "-single";
  }
  return label;
}

} // namespace

ProviderRef parse_provider_spec(const std::string& text,
                                const std::string& default_model) {
  const std::size_t colon = text.find(':');
  ProviderRef ref;
  if (colon == std::string::npos) {
    ref.provider = text;
    ref.model = default_model;
  } else {
    ref.provider = text.substr(0, colon);
    ref.model = text.substr(colon + 1);
  }
  if (ref.provider.empty() || ref.model.empty()) {
    fail("provider spec \"" + text + "\" must be provider[:model]");
  }
  return ref;
}

std::string default_chat_model(const std::string& provider) {
  return provider == "openai" ? "gpt-4" : "scripted-v1";
}

std::string default_embed_model() { return "embed-english-v2.0"; }

RunServices make_services(const RunConfig& config) {
  RunServices services;
  services.generator = make_gateway(config.generator, config);
  services.embedder = make_gateway(config.embedder, config);
  services.judge = make_gateway(config.judge, config);
  services.generator_ref = config.generator;
  services.embedder_ref = config.embedder;
  services.judge_ref = config.judge;
  return services;
}

std::string now_utc_iso8601() {
  const std::time_t now = std::time(nullptr);
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buffer;
}

void generate_run(const RunConfig& config, Strategy strategy,
                  Granularity granularity) {
  const TaskPack pack = model::load_task_pack(config.pack_dir);
  RunManifest manifest = open_or_create_manifest(config, pack);

  const model::GenerationEntry entry{strategy, granularity};
  if (std::find(manifest.generations.begin(), manifest.generations.end(),
                entry) != manifest.generations.end()) {
    fail("run \"" + config.run_id + "\" already generated " +
         slice_label(strategy, granularity));
  }

  RunServices services = make_services(config);
  gateway::Endpoint generator{*services.generator, config.generator.model};
  gateway::Endpoint embedder{*services.embedder, config.embedder.model};

  std::vector<feedback::FeedbackBundle> bundles;
  bundles.reserve(pack.test_samples.size());
  for (const model::TestSample& sample : pack.test_samples) {
    bundles.push_back(feedback::generate_feedback(sample, strategy, granularity,
                                                  pack, generator, embedder));
  }

  manifest.generations.push_back(entry);
  save_run_manifest(manifest, config.run_dir() / "manifest.json");
  feedback::append_feedback_records(config.run_dir() / "feedback.jsonl",
                                    bundles);
}

void evaluate_run(const RunConfig& config) {
  const TaskPack pack = model::load_task_pack(config.pack_dir);
  const fs::path run_dir = config.run_dir();
  const std::vector<feedback::FeedbackRecord> records =
      feedback::load_feedback_records(run_dir / "feedback.jsonl");

  std::vector<feedback::FeedbackBundle> bundles;
  for (const feedback::FeedbackRecord& record : records) {
    if (bundles.empty() || bundles.back().sample_id != record.sample_id) {
      bundles.push_back({record.sample_id, {}});
    }
    bundles.back().records.push_back(record);
  }

  RunServices services = make_services(config);
  gateway::Endpoint judge{*services.judge, config.judge.model};
  const eval::EvalTable table =
      eval::run_layered_eval(bundles, pack, judge, config.run_id);
  eval::save_eval_table(table, run_dir / "verdicts.jsonl");
}

void report_run(const RunConfig& config) {
  const TaskPack pack = model::load_task_pack(config.pack_dir);
  const fs::path run_dir = config.run_dir();
  const std::vector<feedback::FeedbackRecord> records =
      feedback::load_feedback_records(run_dir / "feedback.jsonl");
  const eval::EvalTable table =
      eval::load_eval_table(run_dir / "verdicts.jsonl");

  // Slice the table per (strategy, granularity), canonical order.
  struct Slice {
    Strategy strategy;
    Granularity granularity;
  };
  const std::vector<Slice> canonical = {
      {Strategy::base, Granularity::aspect_batch},
      {Strategy::crit, Granularity::aspect_batch},
      {Strategy::icl, Granularity::aspect_batch},
      {Strategy::cricl, Granularity::aspect_batch},
      {Strategy::crit, Granularity::single_criterion},
  };

  std::map<std::string, std::pair<Strategy, Granularity>> record_slice;
  for (const feedback::FeedbackRecord& record : records) {
    record_slice[record.feedback_id()] = {record.strategy, record.granularity};
  }

  std::vector<std::pair<std::string, metrics::MetricsReport>> reports;
  for (const Slice& slice : canonical) {
    eval::EvalTable sub;
    sub.run_id = table.run_id;
    bool any = false;
    for (const feedback::FeedbackRecord& record : records) {
      if (record.strategy == slice.strategy &&
          record.granularity == slice.granularity) {
        any = true;
      }
    }
    if (!any) {
      continue;
    }
    auto in_slice = [&](const std::string& feedback_id) {
      const auto it = record_slice.find(feedback_id);
      return it != record_slice.end() &&
             it->second.first == slice.strategy &&
             it->second.second == slice.granularity;
    };
    for (const eval::Verdict& verdict : table.verdicts) {
      if (in_slice(verdict.feedback_id)) {
        sub.verdicts.push_back(verdict);
      }
    }
    for (const eval::CriterionVerdict& verdict : table.criterion_verdicts) {
      if (in_slice(verdict.feedback_id)) {
        sub.criterion_verdicts.push_back(verdict);
      }
    }

    metrics::MetricsReport report = metrics::compute_rates(sub);
    report.pack_id = pack.id;
    report.strategy = slice.strategy;
    report.granularity = slice.granularity;
    report.per_criterion = metrics::per_criterion_profile(sub, pack);
    reports.emplace_back(slice_label(slice.strategy, slice.granularity),
                         std::move(report));
  }

  if (reports.empty()) {
    fail("run \"" + config.run_id + "\" has no records to report on");
  }

  std::string markdown = metrics::render_report(reports);
  const auto batch_it =
      std::find_if(reports.begin(), reports.end(),
                   [](const auto& entry) { return entry.first == "crit"; });
  const auto single_it =
      std::find_if(reports.begin(), reports.end(), [](const auto& entry) {
        return entry.first == "crit-single";
      });
  if (batch_it != reports.end() && single_it != reports.end()) {
    markdown += metrics::render_delta_section(
        metrics::granularity_delta(batch_it->second, single_it->second),
        "crit", "crit-single");
  }

  // Both documents carry their own terminators; write exact bytes.
  std::ofstream md(run_dir / "report.md", std::ios::binary);
  if (!md) {
    fail((run_dir / "report.md").string() + ": cannot open for writing");
  }
  md << markdown;
  std::ofstream csv(run_dir / "report.csv", std::ios::binary);
  if (!csv) {
    fail((run_dir / "report.csv").string() + ": cannot open for writing");
  }
  csv << metrics::render_csv(reports);
}

std::map<model::Perspective, eval::MetaEvalResult>
meta_eval_run(const RunConfig& config, const fs::path& annotations_file) {
  const eval::EvalTable table =
      eval::load_eval_table(config.run_dir() / "verdicts.jsonl");
  const std::vector<model::AnnotationRecord> annotations =
      model::load_annotations(annotations_file);
  const auto results = eval::meta_eval_accuracy(table, annotations);

  json out;
  for (const auto& [perspective, result] : results) {
    out[model::to_string(perspective)] =
        json{{"accuracy_pct", metrics::round1(result.accuracy_pct)},
             {"agreement_pct", metrics::round1(result.agreement_pct)},
             {"annotations", result.annotations},
             {"agreed", result.agreed}};
  }
  std::ofstream stream(config.run_dir() / "meta_eval.json", std::ios::binary);
  if (!stream) {
    fail((config.run_dir() / "meta_eval.json").string() +
         ": cannot open for writing");
  }
  stream << out.dump(2) << '\n';
  return results;
}

void record_fixture_run(const RunConfig& config,
                        const std::vector<model::GenerationEntry>& entries) {
  if (!config.cache_dir) {
    fail("record-fixtures requires a cache directory to record into");
  }
  for (const model::GenerationEntry& entry : entries) {
    generate_run(config, entry.strategy, entry.granularity);
  }
  evaluate_run(config);
  report_run(config);
}

} // namespace critloop::pipeline

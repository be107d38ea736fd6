// Copyright (C) 2026 critloop authors
// SPDX-License-Identifier: Apache-2.0

#include "critloop/curation.hpp"
#include "critloop/feedback_engine.hpp"
#include "critloop/hash.hpp"
#include "critloop/layered_eval.hpp"
#include "critloop/metrics_report.hpp"
#include "critloop/pipeline.hpp"
#include "critloop/task_model.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>

namespace {

namespace fs = std::filesystem;
using critloop::gateway::Endpoint;
using critloop::model::Granularity;
using critloop::model::Strategy;
using critloop::model::TaskPack;
using critloop::pipeline::RunConfig;

constexpr int kExitOk = 0;
constexpr int kExitDomainError = 1;
constexpr int kExitUsageError = 2;

struct ProviderOptions {
  std::string generator = "scripted";
  std::string embedder = "scripted";
  std::string judge = "scripted";
  std::string fixtures;
  std::string cache;
  bool offline = false;
  std::uint64_t seed = 0;
  std::string created_at;
  int max_in_flight = 4;
};

void add_provider_options(CLI::App* cmd, ProviderOptions& options) {
  cmd->add_option("--generator", options.generator,
                  "Generator provider[:model] (mock|scripted|openai)");
  cmd->add_option("--embedder", options.embedder,
                  "Embedding provider[:model]");
  cmd->add_option("--judge", options.judge, "Judge provider[:model]");
  cmd->add_option("--fixtures", options.fixtures,
                  "Fixture directory for the mock provider");
  cmd->add_option("--cache", options.cache,
                  "Write-through response cache directory");
  cmd->add_flag("--offline", options.offline,
                "Forbid providers that perform network calls");
  cmd->add_option("--seed", options.seed, "Seed for all sampling decisions");
  cmd->add_option("--created-at", options.created_at,
                  "Pin the manifest timestamp (ISO-8601)");
  cmd->add_option("--max-in-flight", options.max_in_flight,
                  "Provider call concurrency bound");
}

RunConfig make_run_config(const std::string& pack, const std::string& runs,
                          const std::string& run_id,
                          const ProviderOptions& options) {
  RunConfig config;
  config.pack_dir = pack;
  config.runs_dir = runs;
  config.run_id = run_id;
  config.generator = critloop::pipeline::parse_provider_spec(
      options.generator,
      critloop::pipeline::default_chat_model(options.generator));
  config.embedder = critloop::pipeline::parse_provider_spec(
      options.embedder, critloop::pipeline::default_embed_model());
  config.judge = critloop::pipeline::parse_provider_spec(
      options.judge, critloop::pipeline::default_chat_model(options.judge));
  if (!options.fixtures.empty()) {
    config.fixtures_dir = fs::path(options.fixtures);
  }
  if (!options.cache.empty()) {
    config.cache_dir = fs::path(options.cache);
  }
  config.offline = options.offline;
  config.seed = options.seed;
  config.created_at = options.created_at;
  config.max_in_flight = options.max_in_flight;
  return config;
}

// Per-demo seeds hash the base seed with a tag, so draws stay stable when
// already-drafted demos are skipped.
std::uint64_t derive_seed(std::uint64_t base, const std::string& tag) {
  const std::string digest =
      critloop::hash::sha256_hex(std::to_string(base) + "/" + tag);
  return std::stoull(digest.substr(0, 16), nullptr, 16);
}

int run_validate(const std::string& pack_dir) {
  const TaskPack pack =
      critloop::model::load_task_pack(pack_dir, /*validate=*/false);
  const std::vector<std::string> violations =
      critloop::model::validate_task_pack(pack);
  for (const std::string& violation : violations) {
    std::cerr << violation << '\n';
  }
  if (violations.empty()) {
    std::cerr << "pack \"" << pack.id << "\" is valid\n";
    return kExitOk;
  }
  return kExitDomainError;
}

int run_extract_criteria(const std::string& pack_dir,
                         const std::string& aspect_id,
                         const ProviderOptions& options) {
  RunConfig config = make_run_config(pack_dir, ".", "-", options);
  const TaskPack pack = critloop::model::load_task_pack(pack_dir,
                                                        /*validate=*/false);
  auto services = critloop::pipeline::make_services(config);
  Endpoint generator{*services.generator, config.generator.model};

  int bundles = 0;
  for (const auto& aspect : pack.aspects) {
    if (!aspect_id.empty() && aspect.id != aspect_id) {
      continue;
    }
    std::vector<std::string> warnings;
    const auto bundle = critloop::curation::extract_criteria(
        pack, aspect, generator, pack_dir, &warnings);
    for (const std::string& warning : warnings) {
      std::cerr << "warning: " << warning << '\n';
    }
    std::cerr << "aspect \"" << aspect.id << "\": " << bundle.items.size()
              << " draft criteria -> "
              << critloop::curation::review_bundle_path(
                     pack_dir, bundle.stage, bundle.bundle_id)
                     .string()
              << '\n';
    ++bundles;
  }
  if (bundles == 0) {
    std::cerr << "no aspect matched \"" << aspect_id << "\"\n";
    return kExitDomainError;
  }
  return kExitOk;
}

int run_ingest_review(const std::string& pack_dir, const std::string& stage) {
  TaskPack pack = critloop::model::load_task_pack(pack_dir, /*validate=*/false);
  const int applied = critloop::curation::apply_review_bundles(
      pack, pack_dir, critloop::curation::parse_review_stage(stage));
  std::cerr << "applied " << applied << " reviewed item(s)\n";
  return kExitOk;
}

int run_make_demos(const std::string& pack_dir, const std::string& aspect_id,
                   const std::string& phase, const std::string& seed_texts_dir,
                   const ProviderOptions& options) {
  RunConfig config = make_run_config(pack_dir, ".", "-", options);
  const TaskPack pack = critloop::model::load_task_pack(pack_dir,
                                                        /*validate=*/false);
  auto services = critloop::pipeline::make_services(config);
  Endpoint generator{*services.generator, config.generator.model};

  std::vector<fs::path> seed_files;
  if (phase == "input") {
    if (seed_texts_dir.empty()) {
      std::cerr << "make-demos --phase input requires --seed-texts\n";
      return kExitUsageError;
    }
    for (const auto& entry : fs::directory_iterator(seed_texts_dir)) {
      if (entry.is_regular_file()) {
        seed_files.push_back(entry.path());
      }
    }
    std::sort(seed_files.begin(), seed_files.end());
    if (seed_files.empty()) {
      std::cerr << "no seed texts in " << seed_texts_dir << '\n';
      return kExitDomainError;
    }
  }

  const int variants = critloop::curation::variant_count(pack);
  int drafted = 0;
  for (std::size_t a = 0; a < pack.aspects.size(); ++a) {
    const auto& aspect = pack.aspects[a];
    if (!aspect_id.empty() && aspect.id != aspect_id) {
      continue;
    }
    const int target = pack.demos_per_aspect.value_or(
        critloop::model::reproduction_demos_per_aspect(pack.task_kind)
            .value_or(variants));

    for (int j = 0; j < target; ++j) {
      const bool have_input =
          j < static_cast<int>(aspect.demonstrations.size()) &&
          !aspect.demonstrations[j].input_text.empty();
      const bool have_output =
          j < static_cast<int>(aspect.demonstrations.size()) &&
          !aspect.demonstrations[j].output_text.empty();

      critloop::curation::ReviewBundle bundle;
      bundle.aspect_id = aspect.id;
      bundle.demo_index = j;
      bundle.bundle_id = aspect.id + "__" + std::to_string(j);

      if (phase == "input") {
        if (have_input) {
          continue;
        }
        const int variant = (j % variants) + 1;
        const std::uint64_t seed =
            derive_seed(options.seed, aspect.id + "#" + std::to_string(j));
        const auto vector = critloop::curation::sample_satisfaction_vector(
            aspect, critloop::curation::variant_rule(variant), seed);
        const fs::path& seed_file =
            seed_files[(a * static_cast<std::size_t>(target) +
                        static_cast<std::size_t>(j)) %
                       seed_files.size()];
        const std::string seed_text =
            critloop::model::read_text_file(seed_file);

        critloop::curation::ReviewItem item;
        item.id = bundle.bundle_id;
        item.text = critloop::curation::synthesize_demo_input(
            pack, aspect, seed_text, vector, variant, generator);
        item.meta = nlohmann::json{
            {"flags", vector.flags},
            {"seed", seed},
            {"variant", variant},
            {"seed_source", seed_file.filename().string()}};
        bundle.stage = critloop::curation::ReviewStage::demo_input;
        bundle.items.push_back(std::move(item));
      } else {
        if (!have_input || have_output) {
          continue;
        }
        critloop::curation::ReviewItem item;
        item.id = bundle.bundle_id;
        item.text = critloop::curation::synthesize_demo_output(
            pack, aspect, aspect.demonstrations[j].input_text, generator);
        bundle.stage = critloop::curation::ReviewStage::demo_output;
        bundle.items.push_back(std::move(item));
      }

      critloop::curation::write_review_bundle(pack_dir, bundle);
      std::cerr << "drafted " << phase << " for " << bundle.bundle_id << '\n';
      ++drafted;
    }
  }
  std::cerr << drafted << " draft(s) written; review then run ingest-review\n";
  return kExitOk;
}

int run_diversify(const std::string& pack_dir, double fraction,
                  const ProviderOptions& options) {
  RunConfig config = make_run_config(pack_dir, ".", "-", options);
  TaskPack pack = critloop::model::load_task_pack(pack_dir);
  auto services = critloop::pipeline::make_services(config);
  Endpoint generator{*services.generator, config.generator.model};

  pack.test_samples = critloop::curation::diversify_test_samples(
      pack.test_samples, fraction, pack, options.seed, generator);
  critloop::model::save_task_pack(pack, pack_dir);

  int diversified = 0;
  for (const auto& sample : pack.test_samples) {
    if (sample.origin == critloop::model::SampleOrigin::diversified) {
      ++diversified;
    }
  }
  std::cerr << diversified << " of " << pack.test_samples.size()
            << " samples are diversified\n";
  return kExitOk;
}

int run_filter_code(const std::string& in_dir, const std::string& out_dir,
                    int min_code_lines) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(in_dir)) {
    if (entry.is_regular_file()) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());

  std::vector<std::pair<std::string, std::string>> samples;
  samples.reserve(files.size());
  for (const fs::path& file : files) {
    samples.emplace_back(file.filename().string(),
                         critloop::model::read_text_file(file));
  }
  const auto kept =
      critloop::curation::filter_code_samples(samples, min_code_lines);
  for (const auto& [id, text] : kept) {
    critloop::model::write_text_file(fs::path(out_dir) / id, text);
  }
  std::cerr << "kept " << kept.size() << " of " << samples.size()
            << " files\n";
  return kExitOk;
}

int run_meta_eval(const RunConfig& config, const std::string& annotations) {
  const auto results = critloop::pipeline::meta_eval_run(config, annotations);
  for (const auto& [perspective, result] : results) {
    std::cerr << critloop::model::to_string(perspective) << ": accuracy "
              << critloop::metrics::format_pct(result.accuracy_pct)
              << ", agreement "
              << critloop::metrics::format_pct(result.agreement_pct) << " ("
              << result.agreed << "/" << result.annotations << " agreed)\n";
  }
  return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"criteria-guided feedback pipeline"};
  app.require_subcommand(1);

  // validate
  std::string pack_dir;
  auto* validate = app.add_subcommand("validate", "Check pack invariants");
  validate->add_option("pack", pack_dir, "Pack directory")->required();

  // extract-criteria
  std::string extract_pack;
  std::string extract_aspect;
  ProviderOptions extract_options;
  auto* extract = app.add_subcommand(
      "extract-criteria", "Draft criteria from aspect guidelines for review");
  extract->add_option("--pack", extract_pack, "Pack directory")->required();
  extract->add_option("--aspect", extract_aspect, "Only this aspect");
  add_provider_options(extract, extract_options);

  // ingest-review
  std::string ingest_pack;
  std::string ingest_stage;
  auto* ingest = app.add_subcommand(
      "ingest-review", "Apply accepted/edited review items to the pack");
  ingest->add_option("--pack", ingest_pack, "Pack directory")->required();
  ingest->add_option("--stage", ingest_stage,
                     "criteria|demo_input|demo_output")
      ->required();

  // make-demos
  std::string demos_pack;
  std::string demos_aspect;
  std::string demos_phase = "input";
  std::string demos_seed_texts;
  ProviderOptions demos_options;
  auto* demos = app.add_subcommand(
      "make-demos", "Draft demonstration inputs/outputs for review");
  demos->add_option("--pack", demos_pack, "Pack directory")->required();
  demos->add_option("--aspect", demos_aspect, "Only this aspect");
  demos->add_option("--phase", demos_phase, "input|output")
      ->check(CLI::IsMember({"input", "output"}));
  demos->add_option("--seed-texts", demos_seed_texts,
                    "Directory of human-written seed texts (input phase)");
  add_provider_options(demos, demos_options);

  // diversify
  std::string diversify_pack;
  double diversify_fraction = 0.5;
  ProviderOptions diversify_options;
  auto* diversify =
      app.add_subcommand("diversify", "Rewrite a fraction of test samples to "
                                      "selectively violate criteria");
  diversify->add_option("--pack", diversify_pack, "Pack directory")->required();
  diversify->add_option("--fraction", diversify_fraction,
                        "Fraction of samples to modify")
      ->check(CLI::Range(0.0, 1.0));
  add_provider_options(diversify, diversify_options);

  // filter-code
  std::string filter_in;
  std::string filter_out;
  int filter_min = 30;
  auto* filter = app.add_subcommand(
      "filter-code", "Keep code files with enough non-comment lines");
  filter->add_option("--in", filter_in, "Input directory")->required();
  filter->add_option("--out", filter_out, "Output directory")->required();
  filter->add_option("--min-code-lines", filter_min,
                     "Minimum non-comment, non-blank lines");

  // generate / evaluate / report / meta-eval / record-fixtures
  std::string run_pack;
  std::string runs_dir = "runs";
  std::string run_id;
  std::string strategy_name = "base";
  std::string granularity_name = "aspect";
  ProviderOptions run_options;
  auto* generate =
      app.add_subcommand("generate", "Generate feedback for every test sample");
  generate->add_option("--pack", run_pack, "Pack directory")->required();
  generate->add_option("--runs", runs_dir, "Runs directory");
  generate->add_option("--run", run_id, "Run id")->required();
  generate->add_option("--strategy", strategy_name, "base|crit|icl|cricl")
      ->check(CLI::IsMember({"base", "crit", "icl", "cricl"}));
  generate->add_option("--granularity", granularity_name, "aspect|criterion")
      ->check(CLI::IsMember({"aspect", "criterion"}));
  add_provider_options(generate, run_options);

  std::string eval_pack;
  std::string eval_runs = "runs";
  std::string eval_run_id;
  ProviderOptions eval_options;
  auto* evaluate = app.add_subcommand(
      "evaluate", "Run the layered judge cascade over generated feedback");
  evaluate->add_option("--pack", eval_pack, "Pack directory")->required();
  evaluate->add_option("--runs", eval_runs, "Runs directory");
  evaluate->add_option("--run", eval_run_id, "Run id")->required();
  add_provider_options(evaluate, eval_options);

  std::string report_pack;
  std::string report_runs = "runs";
  std::string report_run_id;
  auto* report =
      app.add_subcommand("report", "Render report.md and report.csv");
  report->add_option("--pack", report_pack, "Pack directory")->required();
  report->add_option("--runs", report_runs, "Runs directory");
  report->add_option("--run", report_run_id, "Run id")->required();

  std::string meta_runs = "runs";
  std::string meta_run_id;
  std::string meta_annotations;
  auto* meta = app.add_subcommand(
      "meta-eval", "Judge accuracy/agreement against human annotations");
  meta->add_option("--runs", meta_runs, "Runs directory");
  meta->add_option("--run", meta_run_id, "Run id")->required();
  meta->add_option("--annotations", meta_annotations,
                   "JSON-Lines annotation file")
      ->required();

  std::string record_pack;
  std::string record_runs = "runs";
  std::string record_run_id;
  ProviderOptions record_options;
  auto* record = app.add_subcommand(
      "record-fixtures",
      "Run all four strategies + evaluate + report, recording every provider "
      "response into the cache for later mock replay");
  record->add_option("--pack", record_pack, "Pack directory")->required();
  record->add_option("--runs", record_runs, "Runs directory");
  record->add_option("--run", record_run_id, "Run id")->required();
  add_provider_options(record, record_options);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsageError;
  }

  try {
    if (validate->parsed()) {
      return run_validate(pack_dir);
    }
    if (extract->parsed()) {
      return run_extract_criteria(extract_pack, extract_aspect,
                                  extract_options);
    }
    if (ingest->parsed()) {
      return run_ingest_review(ingest_pack, ingest_stage);
    }
    if (demos->parsed()) {
      return run_make_demos(demos_pack, demos_aspect, demos_phase,
                            demos_seed_texts, demos_options);
    }
    if (diversify->parsed()) {
      return run_diversify(diversify_pack, diversify_fraction,
                           diversify_options);
    }
    if (filter->parsed()) {
      return run_filter_code(filter_in, filter_out, filter_min);
    }
    if (generate->parsed()) {
      const RunConfig config =
          make_run_config(run_pack, runs_dir, run_id, run_options);
      critloop::pipeline::generate_run(
          config, critloop::model::parse_strategy(strategy_name),
          critloop::model::parse_granularity(granularity_name));
      return kExitOk;
    }
    if (evaluate->parsed()) {
      const RunConfig config =
          make_run_config(eval_pack, eval_runs, eval_run_id, eval_options);
      critloop::pipeline::evaluate_run(config);
      return kExitOk;
    }
    if (report->parsed()) {
      RunConfig config;
      config.pack_dir = report_pack;
      config.runs_dir = report_runs;
      config.run_id = report_run_id;
      critloop::pipeline::report_run(config);
      return kExitOk;
    }
    if (meta->parsed()) {
      RunConfig config;
      config.runs_dir = meta_runs;
      config.run_id = meta_run_id;
      return run_meta_eval(config, meta_annotations);
    }
    if (record->parsed()) {
      const RunConfig config = make_run_config(record_pack, record_runs,
                                               record_run_id, record_options);
      using critloop::model::GenerationEntry;
      critloop::pipeline::record_fixture_run(
          config, {GenerationEntry{Strategy::base, Granularity::aspect_batch},
                   GenerationEntry{Strategy::crit, Granularity::aspect_batch},
                   GenerationEntry{Strategy::icl, Granularity::aspect_batch},
                   GenerationEntry{Strategy::cricl, Granularity::aspect_batch}});
      return kExitOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDomainError;
  }
  return kExitUsageError;
}

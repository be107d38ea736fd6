// Copyright (C) 2026 critloop authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace critloop::model {

struct PackError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class TaskKind { introduction, code, reddit_post, custom };
enum class Strategy { base, crit, icl, cricl };
enum class Granularity { aspect_batch, single_criterion };
enum class SampleOrigin { original, diversified };
enum class ReviewStatus { draft, human_reviewed };
enum class Perspective { validity, contextualization, constructiveness, helpfulness };

std::string to_string(TaskKind kind);
std::string to_string(Strategy strategy);
std::string to_string(Granularity granularity);
std::string to_string(SampleOrigin origin);
std::string to_string(ReviewStatus status);
std::string to_string(Perspective perspective);

TaskKind parse_task_kind(std::string_view text);
Strategy parse_strategy(std::string_view text);
Granularity parse_granularity(std::string_view text);
SampleOrigin parse_sample_origin(std::string_view text);
ReviewStatus parse_review_status(std::string_view text);
Perspective parse_perspective(std::string_view text);

/// An atomic, checkable standard for judging a piece of writing.
struct Criterion {
  std::string id;
  std::string name;
  std::string description;
  std::string aspect_id;

  bool operator==(const Criterion&) const = default;
};

/// Per-criterion satisfy/violate flags steering demonstration synthesis.
struct SatisfactionVector {
  std::vector<bool> flags; // true = criterion satisfied, false = violated
  std::string aspect_id;
  std::uint64_t seed = 0;

  bool operator==(const SatisfactionVector&) const = default;
};

/// An (input text, feedback text) pair teaching a model how to apply an
/// aspect's criteria.
struct Demonstration {
  std::string input_text;
  std::string output_text;
  SatisfactionVector vector;
  int variant = 1; // 1-based index into the task's demo-input template set
  std::optional<std::string> seed_source;
  ReviewStatus review_status = ReviewStatus::draft;

  bool operator==(const Demonstration&) const = default;
};

/// One thematic section of a writing guideline and everything grouped
/// under it.
struct Aspect {
  std::string id;
  std::string title;
  std::string guideline_text;
  std::vector<Criterion> criteria;
  std::vector<Demonstration> demonstrations;

  bool operator==(const Aspect&) const = default;
};

struct TestSample {
  std::string id;
  std::string text;
  SampleOrigin origin = SampleOrigin::original;
  std::optional<std::uint64_t> diversify_seed;

  bool operator==(const TestSample&) const = default;
};

struct SamplingConfig {
  double temperature = 0.5;
  double top_p = 1.0;
  int num_candidates = 5;
  double judge_temperature = 0.0;

  bool operator==(const SamplingConfig&) const = default;
};

struct TaskPack {
  std::string id;
  TaskKind task_kind = TaskKind::custom;
  bool reproduction = false; // enforce the published aspect/demo counts
  std::optional<int> demos_per_aspect;
  std::vector<Aspect> aspects;
  std::vector<TestSample> test_samples;
  std::map<std::string, std::string> template_set;    // slot -> relative path
  std::map<std::string, std::string> template_bodies; // slot -> body text
  SamplingConfig sampling;

  bool operator==(const TaskPack&) const = default;

  std::size_t total_criteria() const;
  const Aspect* find_aspect(std::string_view aspect_id) const;
  const Criterion* find_criterion(std::string_view criterion_id) const;
  const std::string& template_body(const std::string& slot) const;
};

/// One human annotation row used for meta-evaluating the judge.
/// criterion_id is present for constructiveness/helpfulness rows, which are
/// judged per (feedback, criterion) rather than per feedback.
struct AnnotationRecord {
  std::string feedback_id;
  std::optional<std::string> criterion_id;
  Perspective perspective;
  std::string annotator_a;
  std::string annotator_b;
};

struct ProviderRef {
  std::string provider;
  std::string model;

  bool operator==(const ProviderRef&) const = default;
};

struct GenerationEntry {
  Strategy strategy = Strategy::base;
  Granularity granularity = Granularity::aspect_batch;

  bool operator==(const GenerationEntry&) const = default;
};

/// Everything needed to reproduce a run against a fixed fixture set. One
/// manifest per run directory; repeated `generate` invocations extend the
/// generations list.
struct RunManifest {
  std::string pack_id;
  ProviderRef generator;
  ProviderRef embedder;
  ProviderRef judge;
  SamplingConfig sampling;
  std::uint64_t rng_seed = 0;
  std::string created_at; // ISO-8601 UTC
  std::vector<GenerationEntry> generations;

  bool operator==(const RunManifest&) const = default;
};

/// Published aspect counts (M) per task kind; empty for custom packs.
std::optional<int> reproduction_aspect_count(TaskKind kind);
/// Published demonstrations per aspect (k); empty for custom packs.
std::optional<int> reproduction_demos_per_aspect(TaskKind kind);

/// Lowercase-alnum-and-dash identifier derived from a display name.
std::string slugify(std::string_view name);

/// Loads a pack directory. With validate=true (the default) any invariant
/// violation raises PackError; validate=false defers to validate_task_pack
/// so tooling can report all problems at once.
TaskPack load_task_pack(const std::filesystem::path& pack_dir,
                        bool validate = true);

void save_task_pack(const TaskPack& pack,
                    const std::filesystem::path& pack_dir);

/// Pure invariant check. Returns one human-readable line per violation,
/// empty when the pack is well formed.
std::vector<std::string> validate_task_pack(const TaskPack& pack);

RunManifest load_run_manifest(const std::filesystem::path& file);
void save_run_manifest(const RunManifest& manifest,
                       const std::filesystem::path& file);

/// JSON-Lines annotation file, one AnnotationRecord per line.
std::vector<AnnotationRecord>
load_annotations(const std::filesystem::path& file);

/// Reads a UTF-8 text file, normalizes line endings to LF and strips one
/// trailing newline (pack text fields exclude the conventional final LF).
std::string read_text_file(const std::filesystem::path& file);
void write_text_file(const std::filesystem::path& file,
                     std::string_view content);

} // namespace critloop::model

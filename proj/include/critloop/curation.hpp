// Copyright (C) 2026 critloop authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "critloop/llm_gateway.hpp"
#include "critloop/task_model.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace critloop::curation {

struct CurationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ReviewStage { criteria, demo_input, demo_output };
enum class ItemStatus { pending, accepted, edited, rejected };

std::string to_string(ReviewStage stage);
std::string to_string(ItemStatus status);
ReviewStage parse_review_stage(std::string_view text);
ItemStatus parse_item_status(std::string_view text);

/// One draft awaiting human review. `meta` carries machine state that must
/// survive the edit round-trip (satisfaction vector, seeds, variants).
struct ReviewItem {
  std::string id;
  ItemStatus status = ItemStatus::pending;
  std::string text;
  nlohmann::json meta;
};

/// Model-drafted content checkpointed for human review. Downstream stages
/// consume only accepted/edited items.
struct ReviewBundle {
  ReviewStage stage = ReviewStage::criteria;
  std::string bundle_id;
  std::string aspect_id;
  std::optional<int> demo_index;
  std::vector<ReviewItem> items;
};

std::filesystem::path review_bundle_path(const std::filesystem::path& pack_dir,
                                         ReviewStage stage,
                                         const std::string& bundle_id);
void write_review_bundle(const std::filesystem::path& pack_dir,
                         const ReviewBundle& bundle);
ReviewBundle load_review_bundle(const std::filesystem::path& file);
std::vector<ReviewBundle>
load_review_bundles(const std::filesystem::path& pack_dir, ReviewStage stage);

struct CriterionDraft {
  std::string name;
  std::string description;
};

struct ParsedCriteria {
  std::vector<CriterionDraft> items;
  std::vector<std::string> warnings;
};

/// Parses a numbered or bulleted list of "**Name**: description" items
/// (bold markers optional). Duplicate names (case-insensitive) collapse to
/// the first occurrence with a warning. Zero recognized items is a
/// gateway::ParseError carrying the raw text.
ParsedCriteria parse_criteria_list(const std::string& text);

/// How a demo-input template variant constrains the satisfaction vector.
/// Variants cycle violate-all, mixed-adhere, mixed-violate, adhere-all.
enum class VectorRule { violate_all, mixed_adhere, mixed_violate, adhere_all };

VectorRule variant_rule(int variant); // 1-based
bool is_mixed(VectorRule rule);
/// Adhere variants render satisfied positions in SAMPLED_NUMBERINGS,
/// violate variants the violated ones.
bool numbering_true_positions(VectorRule rule);

/// Demo-input template variants available to a pack (2 for introduction,
/// 4 for code/reddit, slot-count for custom packs).
int variant_count(const model::TaskPack& pack);
std::vector<int> mixed_variant_indices(const model::TaskPack& pack);

/// Seed-deterministic satisfaction vector. Mixed rules resample fair coins
/// until both flag values are present, which is impossible (and an error)
/// for single-criterion aspects.
model::SatisfactionVector
sample_satisfaction_vector(const model::Aspect& aspect, VectorRule rule,
                           std::uint64_t seed);

/// Drafts criteria for an aspect and writes them as a pending ReviewBundle.
/// Nothing is committed to the pack until the bundle is reviewed and
/// ingested.
ReviewBundle extract_criteria(const model::TaskPack& pack,
                              const model::Aspect& aspect,
                              gateway::Endpoint generator,
                              const std::filesystem::path& pack_dir,
                              std::vector<std::string>* warnings = nullptr);

/// The fully rendered demo-input prompt for one variant (the generator
/// call issued by synthesize_demo_input).
std::string build_demo_input_prompt(const model::TaskPack& pack,
                                    const model::Aspect& aspect,
                                    const std::string& seed_text,
                                    const model::SatisfactionVector& vector,
                                    int variant);

/// The fully rendered demo-output prompt.
std::string build_demo_output_prompt(const model::TaskPack& pack,
                                     const model::Aspect& aspect,
                                     const std::string& demo_input);

/// Drafts a demonstration input by asking the generator to modify a
/// human-written seed text per the variant's template.
std::string synthesize_demo_input(const model::TaskPack& pack,
                                  const model::Aspect& aspect,
                                  const std::string& seed_text,
                                  const model::SatisfactionVector& vector,
                                  int variant, gateway::Endpoint generator);

/// Drafts the feedback side of a demonstration for the given input.
std::string synthesize_demo_output(const model::TaskPack& pack,
                                   const model::Aspect& aspect,
                                   const std::string& demo_input,
                                   gateway::Endpoint generator);

/// Rewrites round(fraction * |samples|) seed-selected samples through the
/// demo-input procedure (random aspect, mixed vector, no review
/// checkpoint); the rest pass through untouched. Order is preserved.
std::vector<model::TestSample>
diversify_test_samples(const std::vector<model::TestSample>& samples,
                       double fraction, const model::TaskPack& pack,
                       std::uint64_t seed, gateway::Endpoint generator);

/// Lines that are neither blank nor comment-only (stripped text starting
/// with '#').
int count_code_lines(const std::string& text);

/// Keeps files with at least `min_code_lines` code lines; order-preserving
/// and idempotent.
std::vector<std::pair<std::string, std::string>>
filter_code_samples(const std::vector<std::pair<std::string, std::string>>& files,
                    int min_code_lines = 30);

/// Applies accepted/edited review items of one stage to the pack and saves
/// it. Returns the number of items applied.
int apply_review_bundles(model::TaskPack& pack,
                         const std::filesystem::path& pack_dir,
                         ReviewStage stage);

} // namespace critloop::curation

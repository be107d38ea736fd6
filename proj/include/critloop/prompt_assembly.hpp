// Copyright (C) 2026 critloop authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "critloop/task_model.hpp"

#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace critloop::prompts {

struct TemplateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A prompt template asset. Placeholders are tokens of the form <NAME>
/// where NAME is uppercase A-Z, 0-9 and underscores; anything else in
/// angle brackets (e.g. the <answer> tags of judge prompts) is literal
/// text.
struct PromptTemplate {
  std::string slot;
  std::string body;
};

using PlaceholderBinding = std::map<std::string, std::string>;

/// Divider between demonstration blocks. 55 dashes on a line of their own.
inline constexpr std::string_view kDemoDivider =
    "-------------------------------------------------------";

/// Placeholder tokens present in `body`, first-occurrence order, deduped.
std::vector<std::string> find_placeholders(std::string_view body);

/// The placeholder set a slot may legally use for the given task kind.
/// Throws TemplateError for unknown slots.
std::set<std::string> declared_placeholders(std::string_view slot,
                                            model::TaskKind kind);

/// Checks that every placeholder in the body is declared for the slot.
void validate_template(const PromptTemplate& tmpl, model::TaskKind kind);

/// Exact placeholder substitution, no other transformation. Every declared
/// placeholder present in the body must be bound; binding values must not
/// themselves contain declared placeholder tokens.
std::string render_template(const PromptTemplate& tmpl,
                            const PlaceholderBinding& binding,
                            model::TaskKind kind);

/// Declared placeholder tokens still present in `text` (empty = clean).
std::vector<std::string> scan_unreplaced(std::string_view text,
                                         const std::set<std::string>& declared);

/// Placeholder naming the writing under review (INTRODUCTION/CODE/POST).
std::string input_placeholder(model::TaskKind kind);
/// Placeholder naming the human-written seed text in demo-input prompts
/// (the introduction task modifies a PAPER, the others reuse their input
/// placeholder).
std::string seed_placeholder(model::TaskKind kind);
/// Bracket label for demonstration inputs ("Example Introduction", ...).
std::string example_input_label(model::TaskKind kind);

/// Criteria rendered as a numbered list, one "N. **Name**: description"
/// line per criterion.
std::string format_criteria_list(std::span<const model::Criterion> criteria);

/// 0-based positions as an English ordinal phrase: "the first",
/// "the first and third", "the first, second, and fifth".
std::string ordinal_phrase(const std::vector<std::size_t>& positions);

/// SAMPLED_NUMBERINGS value: ordinal phrase over the vector's true flags
/// (adhere variants) or false flags (violate variants).
std::string sampled_numberings(const model::SatisfactionVector& vector,
                               bool true_positions);

/// Demonstrations wrapped in the task's bracket tags and separated by the
/// dash divider, order preserved. Errors on an empty list.
std::string
format_demonstration_block(std::span<const model::Demonstration> demos,
                           model::TaskKind kind);

/// Full feedback prompt for one strategy. `aspect` is required for every
/// strategy except base; `criterion` narrows a crit prompt to a single
/// criterion (single-criterion granularity).
std::string assemble_strategy_prompt(model::Strategy strategy,
                                     const model::TestSample& sample,
                                     const model::Aspect* aspect,
                                     const model::TaskPack& pack,
                                     const model::Criterion* criterion = nullptr);

/// Template slot used by a strategy (feedback_base, feedback_crit, ...).
std::string strategy_slot(model::Strategy strategy);

} // namespace critloop::prompts

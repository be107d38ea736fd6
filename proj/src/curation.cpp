// Copyright (C) 2026 critloop authors
// SPDX-License-Identifier: Apache-2.0

#include "critloop/curation.hpp"

#include "critloop/prompt_assembly.hpp"
#include "critloop/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace critloop::curation {

using gateway::ChatRequest;
using gateway::Endpoint;
using gateway::ParseError;
using model::Aspect;
using model::SatisfactionVector;
using model::TaskKind;
using model::TaskPack;
using model::TestSample;

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& message) {
  throw CurationError(message);
}

std::string trim(std::string_view text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) {
    ++begin;
  }
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) {
    --end;
  }
  return std::string(text.substr(begin, end - begin));
}

std::string strip_bold(std::string_view text) {
  std::string out = trim(text);
  while (out.size() >= 2 && (out.front() == '*' || out.front() == '_')) {
    out.erase(0, 1);
  }
  while (!out.empty() && (out.back() == '*' || out.back() == '_')) {
    out.pop_back();
  }
  return trim(out);
}

std::string lowercase(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

// Returns the content of a list item start line, or nullopt for plain text.
std::optional<std::string> list_item_content(const std::string& line) {
  std::size_t pos = 0;
  while (pos < line.size() &&
         std::isspace(static_cast<unsigned char>(line[pos]))) {
    ++pos;
  }
  if (pos >= line.size()) {
    return std::nullopt;
  }
  if (line[pos] == '-' || line[pos] == '*') {
    if (pos + 1 < line.size() && line[pos + 1] == ' ') {
      return line.substr(pos + 2);
    }
    return std::nullopt;
  }
  if (std::isdigit(static_cast<unsigned char>(line[pos]))) {
    std::size_t digits = pos;
    while (digits < line.size() &&
           std::isdigit(static_cast<unsigned char>(line[digits]))) {
      ++digits;
    }
    if (digits < line.size() && (line[digits] == '.' || line[digits] == ')')) {
      return trim(line.substr(digits + 1));
    }
  }
  return std::nullopt;
}

ChatRequest generator_request(const TaskPack& pack, Endpoint generator,
                              const std::string& prompt) {
  ChatRequest request;
  request.provider_id = generator.gateway.provider().id();
  request.model_id = generator.model;
  request.prompt = prompt;
  request.temperature = pack.sampling.temperature;
  request.top_p = pack.sampling.top_p;
  request.candidate_index = 0;
  return request;
}

} // namespace

std::string to_string(ReviewStage stage) {
  switch (stage) {
    case ReviewStage::criteria: return "criteria";
    case ReviewStage::demo_input: return "demo_input";
    case ReviewStage::demo_output: return "demo_output";
  }
  return "criteria";
}

std::string to_string(ItemStatus status) {
  switch (status) {
    case ItemStatus::pending: return "pending";
    case ItemStatus::accepted: return "accepted";
    case ItemStatus::edited: return "edited";
    case ItemStatus::rejected: return "rejected";
  }
  return "pending";
}

ReviewStage parse_review_stage(std::string_view text) {
  if (text == "criteria") return ReviewStage::criteria;
  if (text == "demo_input") return ReviewStage::demo_input;
  if (text == "demo_output") return ReviewStage::demo_output;
  fail("unknown review stage \"" + std::string(text) + "\"");
}

ItemStatus parse_item_status(std::string_view text) {
  if (text == "pending") return ItemStatus::pending;
  if (text == "accepted") return ItemStatus::accepted;
  if (text == "edited") return ItemStatus::edited;
  if (text == "rejected") return ItemStatus::rejected;
  fail("unknown review status \"" + std::string(text) + "\"");
}

fs::path review_bundle_path(const fs::path& pack_dir, ReviewStage stage,
                            const std::string& bundle_id) {
  std::string name = bundle_id;
  std::replace(name.begin(), name.end(), '/', '_');
  return pack_dir / "review" / to_string(stage) / (name + ".md");
}

void write_review_bundle(const fs::path& pack_dir, const ReviewBundle& bundle) {
  std::ostringstream out;
  out << "stage: " << to_string(bundle.stage) << '\n';
  out << "aspect: " << bundle.aspect_id << '\n';
  if (bundle.demo_index) {
    out << "demo: " << *bundle.demo_index << '\n';
  }
  for (const ReviewItem& item : bundle.items) {
    out << "\n## " << item.id << '\n';
    out << "status: " << to_string(item.status) << '\n';
    if (!item.meta.is_null()) {
      out << "meta: " << item.meta.dump() << '\n';
    }
    out << '\n' << item.text << '\n';
  }
  const fs::path file =
      review_bundle_path(pack_dir, bundle.stage, bundle.bundle_id);
  fs::create_directories(file.parent_path());
  std::ofstream stream(file, std::ios::binary);
  if (!stream) {
    fail(file.string() + ": cannot open for writing");
  }
  stream << out.str();
}

ReviewBundle load_review_bundle(const fs::path& file) {
  const std::string text = model::read_text_file(file);
  std::istringstream in(text);

  ReviewBundle bundle;
  bundle.bundle_id = file.stem().string();

  std::string line;
  ReviewItem* current = nullptr;
  bool expect_status = false;
  std::vector<std::string> body;

  auto flush_body = [&]() {
    if (current == nullptr) {
      return;
    }
    while (!body.empty() && trim(body.back()).empty()) {
      body.pop_back();
    }
    while (!body.empty() && trim(body.front()).empty()) {
      body.erase(body.begin());
    }
    std::string joined;
    for (std::size_t i = 0; i < body.size(); ++i) {
      if (i > 0) joined += '\n';
      joined += body[i];
    }
    current->text = joined;
    body.clear();
  };

  while (std::getline(in, line)) {
    if (line.rfind("## ", 0) == 0) {
      flush_body();
      bundle.items.emplace_back();
      current = &bundle.items.back();
      current->id = trim(line.substr(3));
      expect_status = true;
      continue;
    }
    if (current == nullptr) {
      if (line.rfind("stage: ", 0) == 0) {
        bundle.stage = parse_review_stage(trim(line.substr(7)));
      } else if (line.rfind("aspect: ", 0) == 0) {
        bundle.aspect_id = trim(line.substr(8));
      } else if (line.rfind("demo: ", 0) == 0) {
        bundle.demo_index = std::stoi(trim(line.substr(6)));
      }
      continue;
    }
    if (expect_status) {
      if (trim(line).empty()) {
        continue;
      }
      if (line.rfind("status: ", 0) != 0) {
        fail(file.string() + ": item \"" + current->id +
             "\" must start with a status line");
      }
      current->status = parse_item_status(trim(line.substr(8)));
      expect_status = false;
      continue;
    }
    if (line.rfind("meta: ", 0) == 0 && current->text.empty() && body.empty()) {
      current->meta = json::parse(trim(line.substr(6)));
      continue;
    }
    body.push_back(line);
  }
  flush_body();
  return bundle;
}

std::vector<ReviewBundle> load_review_bundles(const fs::path& pack_dir,
                                              ReviewStage stage) {
  const fs::path dir = pack_dir / "review" / to_string(stage);
  std::vector<fs::path> files;
  if (fs::exists(dir)) {
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".md") {
        files.push_back(entry.path());
      }
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<ReviewBundle> bundles;
  bundles.reserve(files.size());
  for (const fs::path& file : files) {
    bundles.push_back(load_review_bundle(file));
  }
  return bundles;
}

ParsedCriteria parse_criteria_list(const std::string& text) {
  ParsedCriteria parsed;
  std::vector<std::string> item_texts;

  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const std::optional<std::string> content = list_item_content(line);
    if (content) {
      item_texts.push_back(*content);
    } else if (!item_texts.empty() && !trim(line).empty()) {
      item_texts.back() += '\n' + line;
    }
  }
  if (item_texts.empty()) {
    throw ParseError("no criteria list found in reply", text);
  }

  std::set<std::string> seen;
  for (const std::string& item : item_texts) {
    CriterionDraft draft;
    const std::size_t colon = item.find(':');
    if (colon == std::string::npos) {
      draft.name = strip_bold(item);
    } else {
      draft.name = strip_bold(item.substr(0, colon));
      draft.description = trim(item.substr(colon + 1));
    }
    if (draft.name.empty()) {
      continue;
    }
    if (!seen.insert(lowercase(draft.name)).second) {
      parsed.warnings.push_back("duplicate criterion name \"" + draft.name +
                                "\" collapsed to first occurrence");
      continue;
    }
    parsed.items.push_back(std::move(draft));
  }
  if (parsed.items.empty()) {
    throw ParseError("no criteria list found in reply", text);
  }
  return parsed;
}

VectorRule variant_rule(int variant) {
  switch ((variant - 1) % 4) {
    case 0: return VectorRule::violate_all;
    case 1: return VectorRule::mixed_adhere;
    case 2: return VectorRule::mixed_violate;
    default: return VectorRule::adhere_all;
  }
}

bool is_mixed(VectorRule rule) {
  return rule == VectorRule::mixed_adhere || rule == VectorRule::mixed_violate;
}

bool numbering_true_positions(VectorRule rule) {
  return rule == VectorRule::mixed_adhere || rule == VectorRule::adhere_all;
}

int variant_count(const TaskPack& pack) {
  switch (pack.task_kind) {
    case TaskKind::introduction: return 2;
    case TaskKind::code:
    case TaskKind::reddit_post: return 4;
    case TaskKind::custom: {
      int count = 0;
      while (pack.template_set.contains("demo_input_variant_" +
                                        std::to_string(count + 1))) {
        ++count;
      }
      return count;
    }
  }
  return 0;
}

std::vector<int> mixed_variant_indices(const TaskPack& pack) {
  std::vector<int> mixed;
  const int total = variant_count(pack);
  for (int v = 1; v <= total; ++v) {
    if (is_mixed(variant_rule(v))) {
      mixed.push_back(v);
    }
  }
  return mixed;
}

SatisfactionVector sample_satisfaction_vector(const Aspect& aspect,
                                              VectorRule rule,
                                              std::uint64_t seed) {
  const std::size_t n = aspect.criteria.size();
  if (n == 0) {
    fail("aspect \"" + aspect.id + "\" has no criteria to sample over");
  }
  SatisfactionVector vector;
  vector.aspect_id = aspect.id;
  vector.seed = seed;

  switch (rule) {
    case VectorRule::violate_all:
      vector.flags.assign(n, false);
      return vector;
    case VectorRule::adhere_all:
      vector.flags.assign(n, true);
      return vector;
    case VectorRule::mixed_adhere:
    case VectorRule::mixed_violate:
      break;
  }

  if (n == 1) {
    fail("mixed satisfaction vector impossible for single-criterion aspect \"" +
         aspect.id + "\"");
  }
  rng::DeterministicRng rng(seed);
  while (true) {
    vector.flags.clear();
    bool has_true = false;
    bool has_false = false;
    for (std::size_t i = 0; i < n; ++i) {
      const bool flag = rng.coin();
      vector.flags.push_back(flag);
      has_true = has_true || flag;
      has_false = has_false || !flag;
    }
    if (has_true && has_false) {
      return vector;
    }
  }
}

ReviewBundle extract_criteria(const TaskPack& pack, const Aspect& aspect,
                              Endpoint generator, const fs::path& pack_dir,
                              std::vector<std::string>* warnings) {
  if (aspect.guideline_text.empty()) {
    fail("aspect \"" + aspect.id + "\": guideline text empty");
  }
  const prompts::PromptTemplate tmpl{"extract_criteria",
                                     pack.template_body("extract_criteria")};
  const std::string prompt = prompts::render_template(
      tmpl, {{"GUIDELINE", aspect.guideline_text}}, pack.task_kind);

  const ParsedCriteria parsed = gateway::complete_with_repair(
      generator.gateway, generator_request(pack, generator, prompt),
      [](const std::string& reply) { return parse_criteria_list(reply); });
  if (warnings != nullptr) {
    *warnings = parsed.warnings;
  }

  ReviewBundle bundle;
  bundle.stage = ReviewStage::criteria;
  bundle.bundle_id = aspect.id;
  bundle.aspect_id = aspect.id;
  for (std::size_t i = 0; i < parsed.items.size(); ++i) {
    ReviewItem item;
    item.id = aspect.id + "-" + std::to_string(i + 1);
    item.text = "**" + parsed.items[i].name +
                "**: " + parsed.items[i].description;
    bundle.items.push_back(std::move(item));
  }
  write_review_bundle(pack_dir, bundle);
  return bundle;
}

std::string build_demo_input_prompt(const TaskPack& pack, const Aspect& aspect,
                                    const std::string& seed_text,
                                    const SatisfactionVector& vector,
                                    int variant) {
  if (seed_text.empty()) {
    fail("demo input synthesis requires a non-empty seed text");
  }
  const int total = variant_count(pack);
  if (variant < 1 || variant > total) {
    fail("variant " + std::to_string(variant) + " undefined for " +
         model::to_string(pack.task_kind));
  }
  const std::string slot = "demo_input_variant_" + std::to_string(variant);
  const prompts::PromptTemplate tmpl{slot, pack.template_body(slot)};

  prompts::PlaceholderBinding binding;
  binding["GUIDELINE"] = aspect.guideline_text;
  binding["CRITERIA"] = prompts::format_criteria_list(aspect.criteria);
  binding[prompts::seed_placeholder(pack.task_kind)] = seed_text;
  const std::vector<std::string> used = prompts::find_placeholders(tmpl.body);
  if (std::find(used.begin(), used.end(), "SAMPLED_NUMBERINGS") != used.end()) {
    binding["SAMPLED_NUMBERINGS"] = prompts::sampled_numberings(
        vector, numbering_true_positions(variant_rule(variant)));
  }
  return prompts::render_template(tmpl, binding, pack.task_kind);
}

std::string build_demo_output_prompt(const TaskPack& pack, const Aspect& aspect,
                                     const std::string& demo_input) {
  if (demo_input.empty()) {
    fail("demo output synthesis requires a non-empty demo input");
  }
  const prompts::PromptTemplate tmpl{"demo_output",
                                     pack.template_body("demo_output")};
  prompts::PlaceholderBinding binding;
  binding["GUIDELINE"] = aspect.guideline_text;
  binding["CRITERIA"] = prompts::format_criteria_list(aspect.criteria);
  binding[prompts::input_placeholder(pack.task_kind)] = demo_input;
  return prompts::render_template(tmpl, binding, pack.task_kind);
}

std::string synthesize_demo_input(const TaskPack& pack, const Aspect& aspect,
                                  const std::string& seed_text,
                                  const SatisfactionVector& vector,
                                  int variant, Endpoint generator) {
  const std::string prompt =
      build_demo_input_prompt(pack, aspect, seed_text, vector, variant);
  return generator.gateway.complete(generator_request(pack, generator, prompt))
      .text;
}

std::string synthesize_demo_output(const TaskPack& pack, const Aspect& aspect,
                                   const std::string& demo_input,
                                   Endpoint generator) {
  const std::string prompt =
      build_demo_output_prompt(pack, aspect, demo_input);
  const std::string reply =
      generator.gateway.complete(generator_request(pack, generator, prompt))
          .text;
  if (reply.empty()) {
    fail("generator returned an empty demo output");
  }
  return reply;
}

std::vector<TestSample>
diversify_test_samples(const std::vector<TestSample>& samples, double fraction,
                       const TaskPack& pack, std::uint64_t seed,
                       Endpoint generator) {
  if (samples.empty()) {
    fail("diversify requires a non-empty sample list");
  }
  if (fraction < 0.0 || fraction > 1.0) {
    fail("fraction must be in [0, 1]");
  }

  const std::size_t n = samples.size();
  const std::size_t k =
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));

  rng::DeterministicRng rng(seed);

  // Seeded partial Fisher-Yates; the first k entries are the selection.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = 0; i < k && i + 1 < n; ++i) {
    const std::size_t j = i + rng.below(n - i);
    std::swap(order[i], order[j]);
  }
  std::vector<std::size_t> selected(order.begin(),
                                    order.begin() + static_cast<long>(k));
  std::sort(selected.begin(), selected.end());

  std::vector<std::size_t> eligible_aspects;
  for (std::size_t a = 0; a < pack.aspects.size(); ++a) {
    if (pack.aspects[a].criteria.size() >= 2) {
      eligible_aspects.push_back(a);
    }
  }
  const std::vector<int> mixed = mixed_variant_indices(pack);

  std::vector<TestSample> out = samples;
  for (std::size_t index : selected) {
    if (eligible_aspects.empty()) {
      fail("no aspect with >=2 criteria available for mixed-vector "
           "diversification");
    }
    if (mixed.empty()) {
      fail("pack has no mixed demo-input variant");
    }
    const Aspect& aspect =
        pack.aspects[eligible_aspects[rng.below(eligible_aspects.size())]];
    const int variant = mixed[rng.below(mixed.size())];
    const std::uint64_t sample_seed = rng.next();
    const SatisfactionVector vector =
        sample_satisfaction_vector(aspect, variant_rule(variant), sample_seed);

    TestSample& sample = out[index];
    // Diversified rewrites take no review checkpoint.
    sample.text = synthesize_demo_input(pack, aspect, sample.text, vector,
                                        variant, generator);
    sample.origin = model::SampleOrigin::diversified;
    sample.diversify_seed = sample_seed;
  }
  return out;
}

int count_code_lines(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int count = 0;
  while (std::getline(in, line)) {
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') {
      continue;
    }
    ++count;
  }
  return count;
}

std::vector<std::pair<std::string, std::string>>
filter_code_samples(const std::vector<std::pair<std::string, std::string>>& files,
                    int min_code_lines) {
  if (min_code_lines < 0) {
    fail("min_code_lines must be >= 0");
  }
  std::vector<std::pair<std::string, std::string>> kept;
  for (const auto& file : files) {
    if (count_code_lines(file.second) >= min_code_lines) {
      kept.push_back(file);
    }
  }
  return kept;
}

int apply_review_bundles(TaskPack& pack, const fs::path& pack_dir,
                         ReviewStage stage) {
  int applied = 0;

  std::set<std::string> taken_ids;
  for (const Aspect& aspect : pack.aspects) {
    for (const model::Criterion& criterion : aspect.criteria) {
      taken_ids.insert(criterion.id);
    }
  }

  for (const ReviewBundle& bundle : load_review_bundles(pack_dir, stage)) {
    Aspect* aspect = nullptr;
    for (Aspect& candidate : pack.aspects) {
      if (candidate.id == bundle.aspect_id) {
        aspect = &candidate;
        break;
      }
    }
    if (aspect == nullptr) {
      fail("review bundle \"" + bundle.bundle_id +
           "\" references unknown aspect \"" + bundle.aspect_id + "\"");
    }

    for (const ReviewItem& item : bundle.items) {
      if (item.status != ItemStatus::accepted &&
          item.status != ItemStatus::edited) {
        continue;
      }
      switch (stage) {
        case ReviewStage::criteria: {
          const ParsedCriteria parsed = parse_criteria_list("- " + item.text);
          for (const CriterionDraft& draft : parsed.items) {
            model::Criterion criterion;
            std::string slug = model::slugify(draft.name);
            int suffix = 2;
            while (!taken_ids.insert(slug).second) {
              slug = model::slugify(draft.name) + "-" + std::to_string(suffix);
              ++suffix;
            }
            criterion.id = slug;
            criterion.name = draft.name;
            criterion.description = draft.description;
            criterion.aspect_id = aspect->id;
            aspect->criteria.push_back(std::move(criterion));
            ++applied;
          }
          break;
        }
        case ReviewStage::demo_input:
        case ReviewStage::demo_output: {
          if (!bundle.demo_index) {
            fail("review bundle \"" + bundle.bundle_id +
                 "\" is missing its demo index");
          }
          const std::size_t index = static_cast<std::size_t>(*bundle.demo_index);
          while (aspect->demonstrations.size() <= index) {
            aspect->demonstrations.emplace_back();
          }
          model::Demonstration& demo = aspect->demonstrations[index];
          if (stage == ReviewStage::demo_input) {
            demo.input_text = item.text;
            if (item.meta.is_object()) {
              if (item.meta.contains("flags")) {
                demo.vector.flags =
                    item.meta["flags"].get<std::vector<bool>>();
              }
              demo.vector.seed = item.meta.value("seed", std::uint64_t(0));
              demo.variant = item.meta.value("variant", 1);
              if (item.meta.contains("seed_source")) {
                demo.seed_source =
                    item.meta["seed_source"].get<std::string>();
              }
            }
            demo.vector.aspect_id = aspect->id;
          } else {
            demo.output_text = item.text;
            if (!demo.input_text.empty()) {
              demo.review_status = model::ReviewStatus::human_reviewed;
            }
          }
          ++applied;
          break;
        }
      }
    }
  }

  if (applied > 0) {
    save_task_pack(pack, pack_dir);
  }
  return applied;
}

} // namespace critloop::curation

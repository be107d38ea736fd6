// Copyright (C) 2026 critloop authors
// SPDX-License-Identifier: Apache-2.0

#include "critloop/task_model.hpp"

#include "critloop/hash.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace critloop::model {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void fail(const std::string& message) { throw PackError(message); }

json load_json_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) {
    fail(file.string() + ": file not found");
  }
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail(file.string() + ": " + e.what());
  }
}

std::string require_string(const json& obj, const char* key,
                           const fs::path& file) {
  if (!obj.contains(key) || !obj[key].is_string()) {
    fail(file.string() + ": missing or non-string field \"" +
         std::string(key) + "\"");
  }
  return obj[key].get<std::string>();
}

SamplingConfig sampling_from_json(const json& obj, const fs::path& file) {
  SamplingConfig config;
  if (obj.contains("temperature")) config.temperature = obj["temperature"].get<double>();
  if (obj.contains("top_p")) config.top_p = obj["top_p"].get<double>();
  if (obj.contains("num_candidates")) config.num_candidates = obj["num_candidates"].get<int>();
  if (obj.contains("judge_temperature")) config.judge_temperature = obj["judge_temperature"].get<double>();
  (void)file;
  return config;
}

json sampling_to_json(const SamplingConfig& config) {
  return json{{"temperature", config.temperature},
              {"top_p", config.top_p},
              {"num_candidates", config.num_candidates},
              {"judge_temperature", config.judge_temperature}};
}

ProviderRef provider_from_json(const json& obj, const fs::path& file) {
  return ProviderRef{require_string(obj, "provider", file),
                     require_string(obj, "model", file)};
}

json provider_to_json(const ProviderRef& ref) {
  return json{{"provider", ref.provider}, {"model", ref.model}};
}

void write_json_file(const fs::path& file, const json& value) {
  fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) {
    fail(file.string() + ": cannot open for writing");
  }
  out << value.dump(2) << '\n';
}

} // namespace

std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::introduction: return "introduction";
    case TaskKind::code: return "code";
    case TaskKind::reddit_post: return "reddit_post";
    case TaskKind::custom: return "custom";
  }
  return "custom";
}

std::string to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::base: return "base";
    case Strategy::crit: return "crit";
    case Strategy::icl: return "icl";
    case Strategy::cricl: return "cricl";
  }
  return "base";
}

std::string to_string(Granularity granularity) {
  return granularity == Granularity::aspect_batch ? "aspect_batch"
                                                  : "single_criterion";
}

std::string to_string(SampleOrigin origin) {
  return origin == SampleOrigin::original ? "original" : "diversified";
}

std::string to_string(ReviewStatus status) {
  return status == ReviewStatus::draft ? "draft" : "human_reviewed";
}

std::string to_string(Perspective perspective) {
  switch (perspective) {
    case Perspective::validity: return "validity";
    case Perspective::contextualization: return "contextualization";
    case Perspective::constructiveness: return "constructiveness";
    case Perspective::helpfulness: return "helpfulness";
  }
  return "validity";
}

TaskKind parse_task_kind(std::string_view text) {
  if (text == "introduction") return TaskKind::introduction;
  if (text == "code") return TaskKind::code;
  if (text == "reddit_post") return TaskKind::reddit_post;
  if (text == "custom") return TaskKind::custom;
  fail("unknown task kind \"" + std::string(text) + "\"");
}

Strategy parse_strategy(std::string_view text) {
  if (text == "base") return Strategy::base;
  if (text == "crit") return Strategy::crit;
  if (text == "icl") return Strategy::icl;
  if (text == "cricl") return Strategy::cricl;
  fail("unknown strategy \"" + std::string(text) + "\"");
}

Granularity parse_granularity(std::string_view text) {
  if (text == "aspect_batch" || text == "aspect") return Granularity::aspect_batch;
  if (text == "single_criterion" || text == "criterion") return Granularity::single_criterion;
  fail("unknown granularity \"" + std::string(text) + "\"");
}

SampleOrigin parse_sample_origin(std::string_view text) {
  if (text == "original") return SampleOrigin::original;
  if (text == "diversified") return SampleOrigin::diversified;
  fail("unknown sample origin \"" + std::string(text) + "\"");
}

ReviewStatus parse_review_status(std::string_view text) {
  if (text == "draft") return ReviewStatus::draft;
  if (text == "human_reviewed") return ReviewStatus::human_reviewed;
  fail("unknown review status \"" + std::string(text) + "\"");
}

Perspective parse_perspective(std::string_view text) {
  if (text == "validity") return Perspective::validity;
  if (text == "contextualization") return Perspective::contextualization;
  if (text == "constructiveness") return Perspective::constructiveness;
  if (text == "helpfulness") return Perspective::helpfulness;
  fail("unknown perspective \"" + std::string(text) + "\"");
}

std::size_t TaskPack::total_criteria() const {
  std::size_t total = 0;
  for (const Aspect& aspect : aspects) {
    total += aspect.criteria.size();
  }
  return total;
}

const Aspect* TaskPack::find_aspect(std::string_view aspect_id) const {
  for (const Aspect& aspect : aspects) {
    if (aspect.id == aspect_id) {
      return &aspect;
    }
  }
  return nullptr;
}

const Criterion* TaskPack::find_criterion(std::string_view criterion_id) const {
  for (const Aspect& aspect : aspects) {
    for (const Criterion& criterion : aspect.criteria) {
      if (criterion.id == criterion_id) {
        return &criterion;
      }
    }
  }
  return nullptr;
}

const std::string& TaskPack::template_body(const std::string& slot) const {
  auto it = template_bodies.find(slot);
  if (it == template_bodies.end()) {
    fail("pack \"" + id + "\": no template for slot \"" + slot + "\"");
  }
  return it->second;
}

std::optional<int> reproduction_aspect_count(TaskKind kind) {
  switch (kind) {
    case TaskKind::introduction: return 5;
    case TaskKind::code: return 14;
    case TaskKind::reddit_post: return 6;
    case TaskKind::custom: return std::nullopt;
  }
  return std::nullopt;
}

std::optional<int> reproduction_demos_per_aspect(TaskKind kind) {
  switch (kind) {
    case TaskKind::introduction: return 2;
    case TaskKind::code: return 4;
    case TaskKind::reddit_post: return 4;
    case TaskKind::custom: return std::nullopt;
  }
  return std::nullopt;
}

std::string slugify(std::string_view name) {
  std::string slug;
  slug.reserve(name.size());
  bool pending_dash = false;
  for (char c : name) {
    const unsigned char uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc)) {
      if (pending_dash && !slug.empty()) {
        slug.push_back('-');
      }
      pending_dash = false;
      slug.push_back(static_cast<char>(std::tolower(uc)));
    } else {
      pending_dash = true;
    }
  }
  if (slug.empty()) {
    slug = "item";
  }
  return slug;
}

std::string read_text_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) {
    fail(file.string() + ": file not found");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  std::string text = hash::normalize_newlines(buffer.str());
  if (!text.empty() && text.back() == '\n') {
    text.pop_back();
  }
  return text;
}

void write_text_file(const fs::path& file, std::string_view content) {
  fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) {
    fail(file.string() + ": cannot open for writing");
  }
  out << content << '\n';
}

TaskPack load_task_pack(const fs::path& pack_dir, bool validate) {
  const fs::path manifest_path = pack_dir / "manifest.json";
  const json manifest = load_json_file(manifest_path);

  TaskPack pack;
  pack.id = require_string(manifest, "id", manifest_path);
  pack.task_kind =
      parse_task_kind(require_string(manifest, "task_kind", manifest_path));
  pack.reproduction = manifest.value("reproduction", false);
  if (manifest.contains("demos_per_aspect")) {
    pack.demos_per_aspect = manifest["demos_per_aspect"].get<int>();
  }
  if (manifest.contains("sampling")) {
    pack.sampling = sampling_from_json(manifest["sampling"], manifest_path);
  }

  if (!manifest.contains("aspects") || !manifest["aspects"].is_array()) {
    fail(manifest_path.string() + ": missing \"aspects\" array");
  }
  for (const json& entry : manifest["aspects"]) {
    Aspect aspect;
    aspect.id = require_string(entry, "id", manifest_path);
    aspect.title = entry.value("title", aspect.id);

    const fs::path aspect_dir = pack_dir / "aspects" / aspect.id;
    aspect.guideline_text = read_text_file(aspect_dir / "guideline.txt");

    const fs::path criteria_path = aspect_dir / "criteria.json";
    const json criteria = load_json_file(criteria_path);
    if (!criteria.is_array()) {
      fail(criteria_path.string() + ": expected a JSON array");
    }
    for (const json& row : criteria) {
      Criterion criterion;
      criterion.id = require_string(row, "id", criteria_path);
      criterion.name = require_string(row, "name", criteria_path);
      criterion.description = require_string(row, "description", criteria_path);
      criterion.aspect_id = aspect.id;
      aspect.criteria.push_back(std::move(criterion));
    }

    const fs::path demos_dir = aspect_dir / "demos";
    if (fs::exists(demos_dir)) {
      std::vector<int> indices;
      for (const auto& entry_it : fs::directory_iterator(demos_dir)) {
        if (!entry_it.is_directory()) continue;
        const std::string name = entry_it.path().filename().string();
        try {
          indices.push_back(std::stoi(name));
        } catch (const std::exception&) {
          fail(entry_it.path().string() + ": demo directory name must be a number");
        }
      }
      std::sort(indices.begin(), indices.end());
      for (int index : indices) {
        const fs::path demo_dir = demos_dir / std::to_string(index);
        Demonstration demo;
        demo.input_text = read_text_file(demo_dir / "input.txt");
        if (fs::exists(demo_dir / "output.txt")) {
          demo.output_text = read_text_file(demo_dir / "output.txt");
        }
        const fs::path vector_path = demo_dir / "vector.json";
        const json vec = load_json_file(vector_path);
        if (!vec.contains("flags") || !vec["flags"].is_array()) {
          fail(vector_path.string() + ": missing \"flags\" array");
        }
        for (const json& flag : vec["flags"]) {
          if (!flag.is_boolean()) {
            fail(vector_path.string() + ": flags must be booleans");
          }
          demo.vector.flags.push_back(flag.get<bool>());
        }
        demo.vector.aspect_id = aspect.id;
        demo.vector.seed = vec.value("seed", std::uint64_t(0));
        demo.variant = vec.value("variant", 1);
        if (vec.contains("seed_source")) {
          demo.seed_source = vec["seed_source"].get<std::string>();
        }
        demo.review_status =
            parse_review_status(vec.value("review_status", "draft"));
        aspect.demonstrations.push_back(std::move(demo));
      }
    }
    pack.aspects.push_back(std::move(aspect));
  }

  if (manifest.contains("samples")) {
    for (const json& entry : manifest["samples"]) {
      TestSample sample;
      if (entry.is_string()) {
        sample.id = entry.get<std::string>();
      } else {
        sample.id = require_string(entry, "id", manifest_path);
        sample.origin =
            parse_sample_origin(entry.value("origin", "original"));
        if (entry.contains("diversify_seed")) {
          sample.diversify_seed = entry["diversify_seed"].get<std::uint64_t>();
        }
      }
      sample.text = read_text_file(pack_dir / "samples" / (sample.id + ".txt"));
      pack.test_samples.push_back(std::move(sample));
    }
  }

  if (manifest.contains("templates")) {
    for (const auto& [slot, rel] : manifest["templates"].items()) {
      const std::string rel_path = rel.get<std::string>();
      pack.template_set[slot] = rel_path;
      pack.template_bodies[slot] = read_text_file(pack_dir / rel_path);
    }
  }

  if (validate) {
    const std::vector<std::string> violations = validate_task_pack(pack);
    if (!violations.empty()) {
      std::string message =
          pack_dir.string() + ": pack validation failed:";
      for (const std::string& violation : violations) {
        message += "\n  - " + violation;
      }
      fail(message);
    }
  }
  return pack;
}

void save_task_pack(const TaskPack& pack, const fs::path& pack_dir) {
  json manifest;
  manifest["id"] = pack.id;
  manifest["task_kind"] = to_string(pack.task_kind);
  manifest["reproduction"] = pack.reproduction;
  if (pack.demos_per_aspect) {
    manifest["demos_per_aspect"] = *pack.demos_per_aspect;
  }
  manifest["sampling"] = sampling_to_json(pack.sampling);

  json aspects = json::array();
  for (const Aspect& aspect : pack.aspects) {
    aspects.push_back(json{{"id", aspect.id}, {"title", aspect.title}});

    const fs::path aspect_dir = pack_dir / "aspects" / aspect.id;
    write_text_file(aspect_dir / "guideline.txt", aspect.guideline_text);

    json criteria = json::array();
    for (const Criterion& criterion : aspect.criteria) {
      criteria.push_back(json{{"id", criterion.id},
                              {"name", criterion.name},
                              {"description", criterion.description}});
    }
    write_json_file(aspect_dir / "criteria.json", criteria);

    for (std::size_t j = 0; j < aspect.demonstrations.size(); ++j) {
      const Demonstration& demo = aspect.demonstrations[j];
      const fs::path demo_dir = aspect_dir / "demos" / std::to_string(j);
      write_text_file(demo_dir / "input.txt", demo.input_text);
      if (!demo.output_text.empty()) {
        write_text_file(demo_dir / "output.txt", demo.output_text);
      }
      json vec;
      vec["flags"] = demo.vector.flags;
      vec["seed"] = demo.vector.seed;
      vec["variant"] = demo.variant;
      vec["review_status"] = to_string(demo.review_status);
      if (demo.seed_source) {
        vec["seed_source"] = *demo.seed_source;
      }
      write_json_file(demo_dir / "vector.json", vec);
    }
  }
  manifest["aspects"] = aspects;

  json samples = json::array();
  for (const TestSample& sample : pack.test_samples) {
    json entry{{"id", sample.id}, {"origin", to_string(sample.origin)}};
    if (sample.diversify_seed) {
      entry["diversify_seed"] = *sample.diversify_seed;
    }
    samples.push_back(entry);
    write_text_file(pack_dir / "samples" / (sample.id + ".txt"), sample.text);
  }
  manifest["samples"] = samples;

  json templates = json::object();
  for (const auto& [slot, rel_path] : pack.template_set) {
    templates[slot] = rel_path;
    auto body = pack.template_bodies.find(slot);
    if (body != pack.template_bodies.end()) {
      write_text_file(pack_dir / rel_path, body->second);
    }
  }
  manifest["templates"] = templates;

  write_json_file(pack_dir / "manifest.json", manifest);
}

std::vector<std::string> validate_task_pack(const TaskPack& pack) {
  std::vector<std::string> violations;
  auto report = [&violations](std::string message) {
    violations.push_back(std::move(message));
  };

  if (pack.id.empty()) {
    report("pack: id empty");
  }
  if (pack.aspects.empty()) {
    report("pack: aspects list empty");
  }

  if (pack.sampling.temperature < 0) {
    report("sampling: temperature must be >= 0");
  }
  if (!(pack.sampling.top_p > 0 && pack.sampling.top_p <= 1.0)) {
    report("sampling: top_p must be in (0, 1]");
  }
  if (pack.sampling.num_candidates < 1) {
    report("sampling: num_candidates must be >= 1");
  }
  if (pack.sampling.judge_temperature < 0) {
    report("sampling: judge_temperature must be >= 0");
  }

  std::optional<int> expected_demos = pack.demos_per_aspect;
  if (pack.reproduction) {
    const std::optional<int> paper_m = reproduction_aspect_count(pack.task_kind);
    if (paper_m && static_cast<int>(pack.aspects.size()) != *paper_m) {
      report("pack: reproduction " + to_string(pack.task_kind) +
             " pack must have " + std::to_string(*paper_m) +
             " aspects (found " + std::to_string(pack.aspects.size()) + ")");
    }
    const std::optional<int> paper_k =
        reproduction_demos_per_aspect(pack.task_kind);
    if (paper_k) {
      if (expected_demos && *expected_demos != *paper_k) {
        report("pack: demos_per_aspect " + std::to_string(*expected_demos) +
               " conflicts with reproduction value " + std::to_string(*paper_k));
      }
      expected_demos = paper_k;
    }
  }

  std::set<std::string> aspect_ids;
  std::set<std::string> criterion_ids;
  const int kind_variants = pack.task_kind == TaskKind::introduction ? 2
                            : pack.task_kind == TaskKind::custom     ? 0
                                                                     : 4;
  for (const Aspect& aspect : pack.aspects) {
    if (!aspect_ids.insert(aspect.id).second) {
      report("aspect \"" + aspect.id + "\": duplicate aspect id");
    }
    if (aspect.criteria.empty()) {
      report("aspect \"" + aspect.id + "\": aspect must hold >=1 criterion");
    }
    for (const Criterion& criterion : aspect.criteria) {
      if (!criterion_ids.insert(criterion.id).second) {
        report("criterion \"" + criterion.id + "\": duplicate criterion id");
      }
      if (criterion.name.empty()) {
        report("criterion \"" + criterion.id + "\": name empty");
      }
      if (criterion.description.empty()) {
        report("criterion \"" + criterion.id + "\": description empty");
      }
      if (criterion.aspect_id != aspect.id) {
        report("criterion \"" + criterion.id + "\": aspect_id \"" +
               criterion.aspect_id + "\" does not match owning aspect \"" +
               aspect.id + "\"");
      }
    }

    if (expected_demos &&
        static_cast<int>(aspect.demonstrations.size()) != *expected_demos) {
      report("aspect \"" + aspect.id + "\": expected " +
             std::to_string(*expected_demos) + " demonstrations (found " +
             std::to_string(aspect.demonstrations.size()) + ")");
    }

    for (std::size_t j = 0; j < aspect.demonstrations.size(); ++j) {
      const Demonstration& demo = aspect.demonstrations[j];
      const std::string where =
          "aspect \"" + aspect.id + "\" demo " + std::to_string(j);
      if (demo.vector.flags.size() != aspect.criteria.size()) {
        report(where + ": vector length " +
               std::to_string(demo.vector.flags.size()) + " != criteria " +
               std::to_string(aspect.criteria.size()));
      }
      if (demo.variant < 1) {
        report(where + ": variant must be >= 1");
      } else if (kind_variants > 0 && demo.variant > kind_variants) {
        report(where + ": variant " + std::to_string(demo.variant) +
               " undefined for " + to_string(pack.task_kind) + " packs");
      }
      // Variants cycle violate-all, mixed-adhere, mixed-violate, adhere-all;
      // the two mixed variants require both flag values.
      const int rule = (demo.variant - 1) % 4;
      if ((rule == 1 || rule == 2) && !demo.vector.flags.empty()) {
        const bool has_true = std::find(demo.vector.flags.begin(),
                                        demo.vector.flags.end(),
                                        true) != demo.vector.flags.end();
        const bool has_false = std::find(demo.vector.flags.begin(),
                                         demo.vector.flags.end(),
                                         false) != demo.vector.flags.end();
        if (!has_true || !has_false) {
          report(where +
                 ": mixed-variant vector must contain both satisfied and "
                 "violated flags");
        }
      }
      if (demo.review_status == ReviewStatus::human_reviewed &&
          (demo.input_text.empty() || demo.output_text.empty())) {
        report(where +
               ": human_reviewed demo requires non-empty input and output");
      }
    }
  }

  std::set<std::string> sample_ids;
  for (const TestSample& sample : pack.test_samples) {
    if (!sample_ids.insert(sample.id).second) {
      report("sample \"" + sample.id + "\": duplicate sample id");
    }
    if (sample.text.empty()) {
      report("sample \"" + sample.id + "\": text empty");
    }
    if (sample.origin == SampleOrigin::diversified && !sample.diversify_seed) {
      report("sample \"" + sample.id +
             "\": diversified sample missing diversify_seed");
    }
  }

  return violations;
}

RunManifest load_run_manifest(const fs::path& file) {
  const json obj = load_json_file(file);
  RunManifest manifest;
  manifest.pack_id = require_string(obj, "pack_id", file);
  manifest.generator = provider_from_json(obj.at("generator"), file);
  manifest.embedder = provider_from_json(obj.at("embedder"), file);
  manifest.judge = provider_from_json(obj.at("judge"), file);
  manifest.sampling = sampling_from_json(obj.at("sampling"), file);
  manifest.rng_seed = obj.value("rng_seed", std::uint64_t(0));
  manifest.created_at = require_string(obj, "created_at", file);
  if (obj.contains("generations")) {
    for (const json& entry : obj["generations"]) {
      GenerationEntry generation;
      generation.strategy =
          parse_strategy(require_string(entry, "strategy", file));
      generation.granularity =
          parse_granularity(require_string(entry, "granularity", file));
      manifest.generations.push_back(generation);
    }
  }
  return manifest;
}

void save_run_manifest(const RunManifest& manifest, const fs::path& file) {
  json obj;
  obj["pack_id"] = manifest.pack_id;
  obj["generator"] = provider_to_json(manifest.generator);
  obj["embedder"] = provider_to_json(manifest.embedder);
  obj["judge"] = provider_to_json(manifest.judge);
  obj["sampling"] = sampling_to_json(manifest.sampling);
  obj["rng_seed"] = manifest.rng_seed;
  obj["created_at"] = manifest.created_at;
  json generations = json::array();
  for (const GenerationEntry& entry : manifest.generations) {
    generations.push_back(json{{"strategy", to_string(entry.strategy)},
                               {"granularity", to_string(entry.granularity)}});
  }
  obj["generations"] = generations;
  write_json_file(file, obj);
}

std::vector<AnnotationRecord> load_annotations(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) {
    fail(file.string() + ": file not found");
  }
  std::vector<AnnotationRecord> records;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(file.string() + ":" + std::to_string(line_number) + ": " + e.what());
    }
    AnnotationRecord record;
    record.feedback_id = require_string(obj, "feedback_id", file);
    if (obj.contains("criterion_id") && !obj["criterion_id"].is_null()) {
      record.criterion_id = obj["criterion_id"].get<std::string>();
    }
    record.perspective =
        parse_perspective(require_string(obj, "perspective", file));
    record.annotator_a = require_string(obj, "annotator_a", file);
    record.annotator_b = require_string(obj, "annotator_b", file);
    records.push_back(std::move(record));
  }
  return records;
}

} // namespace critloop::model

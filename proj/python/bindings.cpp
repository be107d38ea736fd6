// Copyright (C) 2026 critloop authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "critloop/curation.hpp"
#include "critloop/feedback_engine.hpp"
#include "critloop/hash.hpp"
#include "critloop/layered_eval.hpp"
#include "critloop/llm_gateway.hpp"
#include "critloop/metrics_report.hpp"
#include "critloop/prompt_assembly.hpp"
#include "critloop/task_model.hpp"

#include <optional>

namespace py = pybind11;

namespace {

using critloop::model::TaskKind;
using critloop::model::TaskPack;

critloop::curation::VectorRule parse_rule(const std::string& rule) {
  if (rule == "violate_all") return critloop::curation::VectorRule::violate_all;
  if (rule == "adhere_all") return critloop::curation::VectorRule::adhere_all;
  if (rule == "mixed_adhere") {
    return critloop::curation::VectorRule::mixed_adhere;
  }
  if (rule == "mixed_violate") {
    return critloop::curation::VectorRule::mixed_violate;
  }
  throw py::value_error("unknown vector rule \"" + rule + "\"");
}

py::dict pack_summary(const TaskPack& pack) {
  py::dict summary;
  summary["id"] = pack.id;
  summary["task_kind"] = critloop::model::to_string(pack.task_kind);
  summary["criteria_total"] = pack.total_criteria();
  py::list aspects;
  for (const auto& aspect : pack.aspects) {
    py::dict entry;
    entry["id"] = aspect.id;
    entry["title"] = aspect.title;
    entry["criteria"] = aspect.criteria.size();
    entry["demonstrations"] = aspect.demonstrations.size();
    aspects.append(entry);
  }
  summary["aspects"] = aspects;
  py::list samples;
  for (const auto& sample : pack.test_samples) {
    samples.append(sample.id);
  }
  summary["samples"] = samples;
  return summary;
}

} // namespace

PYBIND11_MODULE(_critloop, m) {
  m.doc() = "Criteria-guided feedback pipeline: core operations";

  m.def("sha256_hex", &critloop::hash::sha256_hex, py::arg("data"),
        "SHA-256 digest as lowercase hex");

  m.def("slugify", &critloop::model::slugify, py::arg("name"));

  m.def(
      "chat_cache_key",
      [](const std::string& model, const std::string& prompt,
         double temperature, double top_p, int candidate_index,
         int max_output_tokens) {
        critloop::gateway::ChatRequest request;
        request.model_id = model;
        request.prompt = prompt;
        request.temperature = temperature;
        request.top_p = top_p;
        request.candidate_index = candidate_index;
        request.max_output_tokens = max_output_tokens;
        return critloop::gateway::cache_key(request);
      },
      py::arg("model"), py::arg("prompt"), py::arg("temperature") = 0.5,
      py::arg("top_p") = 1.0, py::arg("candidate_index") = 0,
      py::arg("max_output_tokens") = critloop::gateway::kDefaultMaxOutputTokens,
      "Content-addressed cache key of a chat request");

  m.def(
      "parse_criteria_list",
      [](const std::string& text) {
        const auto parsed = critloop::curation::parse_criteria_list(text);
        py::list items;
        for (const auto& item : parsed.items) {
          items.append(py::make_tuple(item.name, item.description));
        }
        return py::make_tuple(items, parsed.warnings);
      },
      py::arg("text"),
      "Parses a numbered/bulleted criteria list into (items, warnings)");

  m.def(
      "sample_satisfaction_flags",
      [](std::size_t criteria_count, const std::string& rule,
         std::uint64_t seed) {
        critloop::model::Aspect aspect;
        aspect.id = "aspect";
        for (std::size_t i = 0; i < criteria_count; ++i) {
          critloop::model::Criterion criterion;
          criterion.id = "c" + std::to_string(i);
          criterion.name = "C";
          criterion.description = "d";
          criterion.aspect_id = aspect.id;
          aspect.criteria.push_back(std::move(criterion));
        }
        return critloop::curation::sample_satisfaction_vector(
                   aspect, parse_rule(rule), seed)
            .flags;
      },
      py::arg("criteria_count"), py::arg("rule"), py::arg("seed"),
      "Seed-deterministic satisfaction flags "
      "(violate_all|adhere_all|mixed_adhere|mixed_violate)");

  m.def("ordinal_phrase", &critloop::prompts::ordinal_phrase,
        py::arg("positions"),
        "0-based positions as 'the first, second, and fifth'");

  m.def(
      "render_template",
      [](const std::string& slot, const std::string& body,
         const std::map<std::string, std::string>& binding,
         const std::string& task_kind) {
        return critloop::prompts::render_template(
            {slot, body}, binding, critloop::model::parse_task_kind(task_kind));
      },
      py::arg("slot"), py::arg("body"), py::arg("binding"),
      py::arg("task_kind") = "custom",
      "Exact placeholder substitution for one template slot");

  m.def(
      "format_demonstration_block",
      [](const std::vector<std::pair<std::string, std::string>>& demos,
         const std::string& task_kind) {
        std::vector<critloop::model::Demonstration> converted;
        converted.reserve(demos.size());
        for (const auto& [input, output] : demos) {
          critloop::model::Demonstration demo;
          demo.input_text = input;
          demo.output_text = output;
          converted.push_back(std::move(demo));
        }
        return critloop::prompts::format_demonstration_block(
            converted, critloop::model::parse_task_kind(task_kind));
      },
      py::arg("demos"), py::arg("task_kind"),
      "Bracketed demonstration block with the 55-dash divider");

  m.def("most_consistent_index", &critloop::feedback::most_consistent_index,
        py::arg("embeddings"),
        "Index with maximal mean cosine to the other candidates; ties to "
        "the lowest index");

  m.def("parse_tagged_field", &critloop::eval::parse_tagged_field,
        py::arg("reply"), py::arg("tag"),
        "Content of the first <tag>...</tag> pair (case-insensitive)");

  m.def("count_code_lines", &critloop::curation::count_code_lines,
        py::arg("text"), "Lines that are neither blank nor comment-only");

  m.def(
      "filter_code_samples",
      [](const std::vector<std::pair<std::string, std::string>>& files,
         int min_code_lines) {
        return critloop::curation::filter_code_samples(files, min_code_lines);
      },
      py::arg("files"), py::arg("min_code_lines") = 30);

  m.def(
      "load_pack_summary",
      [](const std::string& path) {
        return pack_summary(critloop::model::load_task_pack(path));
      },
      py::arg("path"), "Loads and validates a pack, returning a summary dict");

  m.def(
      "validate_pack",
      [](const std::string& path) {
        return critloop::model::validate_task_pack(
            critloop::model::load_task_pack(path, /*validate=*/false));
      },
      py::arg("path"), "Invariant violations of a pack directory (empty = ok)");

  m.def(
      "assemble_strategy_prompt",
      [](const std::string& pack_path, const std::string& strategy,
         const std::string& sample_id,
         const std::optional<std::string>& aspect_id,
         const std::optional<std::string>& criterion_id) {
        const TaskPack pack = critloop::model::load_task_pack(pack_path);
        const critloop::model::TestSample* sample = nullptr;
        for (const auto& candidate : pack.test_samples) {
          if (candidate.id == sample_id) {
            sample = &candidate;
          }
        }
        if (sample == nullptr) {
          throw py::value_error("unknown sample \"" + sample_id + "\"");
        }
        const critloop::model::Aspect* aspect =
            aspect_id ? pack.find_aspect(*aspect_id) : nullptr;
        if (aspect_id && aspect == nullptr) {
          throw py::value_error("unknown aspect \"" + *aspect_id + "\"");
        }
        const critloop::model::Criterion* criterion =
            criterion_id ? pack.find_criterion(*criterion_id) : nullptr;
        if (criterion_id && criterion == nullptr) {
          throw py::value_error("unknown criterion \"" + *criterion_id + "\"");
        }
        return critloop::prompts::assemble_strategy_prompt(
            critloop::model::parse_strategy(strategy), *sample, aspect, pack,
            criterion);
      },
      py::arg("pack_path"), py::arg("strategy"), py::arg("sample_id"),
      py::arg("aspect_id") = std::nullopt,
      py::arg("criterion_id") = std::nullopt,
      "Full feedback prompt for one strategy against a pack on disk");

  m.def("round1", &critloop::metrics::round1, py::arg("value"),
        "One decimal, half away from zero");

  m.attr("__version__") = "0.1.0";
}

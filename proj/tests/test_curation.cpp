// Copyright (C) 2026 critloop authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"

#include "critloop/curation.hpp"

#include <filesystem>
#include <set>

using namespace critloop::curation;
using critloop::gateway::ChatRequest;
using critloop::gateway::Endpoint;
using critloop::gateway::Gateway;
using critloop::gateway::GatewayConfig;
using critloop::gateway::ParseError;
using critloop::model::Aspect;
using critloop::model::SatisfactionVector;
using critloop::model::TaskKind;
using critloop::model::TaskPack;
using critloop::model::TestSample;
namespace ts = critloop::testsupport;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "critloop-cur" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Aspect aspect_with(int criteria) {
  Aspect aspect;
  aspect.id = "a";
  aspect.title = "A";
  aspect.guideline_text = "g";
  for (int i = 0; i < criteria; ++i) {
    critloop::model::Criterion criterion;
    criterion.id = "c" + std::to_string(i);
    criterion.name = "C" + std::to_string(i);
    criterion.description = "d";
    criterion.aspect_id = "a";
    aspect.criteria.push_back(criterion);
  }
  return aspect;
}

} // namespace

TEST_CASE("criteria lists parse from numbered and bulleted forms") {
  const auto parsed =
      parse_criteria_list("1. **A**: x\n2. **B**: y");
  REQUIRE(parsed.items.size() == 2);
  CHECK(parsed.items[0].name == "A");
  CHECK(parsed.items[0].description == "x");
  CHECK(parsed.items[1].name == "B");
  CHECK(parsed.items[1].description == "y");
  CHECK(parsed.warnings.empty());

  const auto clarity = parse_criteria_list(
      "1. **Clarity**: Is it clear?\n2. **Brevity**: Is it brief?");
  REQUIRE(clarity.items.size() == 2);
  CHECK(clarity.items[0].name == "Clarity");
  CHECK(clarity.items[1].name == "Brevity");
}

TEST_CASE("duplicate names collapse case-insensitively with a warning") {
  const auto parsed = parse_criteria_list("- A: x\n- a: y");
  REQUIRE(parsed.items.size() == 1);
  CHECK(parsed.items[0].name == "A");
  CHECK(parsed.items[0].description == "x");
  REQUIRE(parsed.warnings.size() == 1);
  CHECK(parsed.warnings[0].find("duplicate") != std::string::npos);
}

TEST_CASE("text without list structure is a parse error with the raw text") {
  try {
    (void)parse_criteria_list("no list here");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.raw_reply == "no list here");
  }
}

TEST_CASE("continuation lines attach to the open item") {
  const auto parsed =
      parse_criteria_list("1. **A**: first line\nsecond line\n2. B: z");
  REQUIRE(parsed.items.size() == 2);
  CHECK(parsed.items[0].description == "first line\nsecond line");
}

TEST_CASE("forced satisfaction vectors") {
  const Aspect three = aspect_with(3);
  const auto violate =
      sample_satisfaction_vector(three, VectorRule::violate_all, 1);
  CHECK(violate.flags == std::vector<bool>{false, false, false});

  const Aspect two = aspect_with(2);
  const auto adhere =
      sample_satisfaction_vector(two, VectorRule::adhere_all, 1);
  CHECK(adhere.flags == std::vector<bool>{true, true});
}

TEST_CASE("mixed vectors are seed-deterministic and contain both values") {
  const Aspect four = aspect_with(4);
  const auto first =
      sample_satisfaction_vector(four, VectorRule::mixed_adhere, 77);
  const auto second =
      sample_satisfaction_vector(four, VectorRule::mixed_adhere, 77);
  CHECK(first.flags == second.flags);

  bool has_true = false;
  bool has_false = false;
  for (bool flag : first.flags) {
    (flag ? has_true : has_false) = true;
  }
  CHECK(has_true);
  CHECK(has_false);
}

TEST_CASE("mixed vector for a single-criterion aspect is impossible") {
  const Aspect one = aspect_with(1);
  CHECK_THROWS_AS(
      (void)sample_satisfaction_vector(one, VectorRule::mixed_violate, 1),
      CurationError);
}

TEST_CASE("over many seeds every flag position takes both values") {
  const Aspect five = aspect_with(5);
  std::vector<int> trues(5, 0);
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto vector =
        sample_satisfaction_vector(five, VectorRule::mixed_adhere, seed);
    for (std::size_t i = 0; i < 5; ++i) {
      trues[i] += vector.flags[i] ? 1 : 0;
    }
  }
  for (int count : trues) {
    CHECK(count > 0);
    CHECK(count < 1000);
  }
}

TEST_CASE("variant table: rules cycle and intro stops at two") {
  CHECK(variant_rule(1) == VectorRule::violate_all);
  CHECK(variant_rule(2) == VectorRule::mixed_adhere);
  CHECK(variant_rule(3) == VectorRule::mixed_violate);
  CHECK(variant_rule(4) == VectorRule::adhere_all);

  const TaskPack intro = ts::fixture_pack(TaskKind::introduction);
  CHECK(variant_count(intro) == 2);
  CHECK(mixed_variant_indices(intro) == std::vector<int>{2});

  const TaskPack code = ts::fixture_pack(TaskKind::code);
  CHECK(variant_count(code) == 4);
  CHECK(mixed_variant_indices(code) == std::vector<int>{2, 3});

  // Variant 3 undefined for introduction packs.
  SatisfactionVector vector;
  vector.flags = {true, false, true};
  CHECK_THROWS_WITH_AS(
      (void)build_demo_input_prompt(intro, intro.aspects[0], "seed", vector, 3),
      doctest::Contains("variant 3 undefined for introduction"),
      CurationError);
}

TEST_CASE("code variant 4 instructs returning the original code") {
  const TaskPack code = ts::fixture_pack(TaskKind::code);
  SatisfactionVector vector;
  vector.flags = {true, true, true};
  const std::string prompt =
      build_demo_input_prompt(code, code.aspects[0], "seed code", vector, 4);
  CHECK(prompt.find("please just return my original code") !=
        std::string::npos);
}

TEST_CASE("extract_criteria drafts a pending bundle, commits nothing") {
  const fs::path pack_dir = fresh_dir("extract");
  const TaskPack pack = ts::fixture_pack(TaskKind::introduction);

  auto provider = std::make_shared<ts::FnProvider>();
  provider->on_chat = [](const ChatRequest&) {
    return ts::plain_reply(
        "1. **Clarity**: Is it clear?\n2. **Brevity**: Is it brief?");
  };
  Gateway gateway(provider, GatewayConfig{});
  Endpoint generator{gateway, "m"};

  const ReviewBundle bundle =
      extract_criteria(pack, pack.aspects[0], generator, pack_dir);
  REQUIRE(bundle.items.size() == 2);
  CHECK(bundle.items[0].status == ItemStatus::pending);
  CHECK(bundle.items[0].text == "**Clarity**: Is it clear?");
  CHECK(fs::exists(
      review_bundle_path(pack_dir, ReviewStage::criteria, "style")));

  // Unparseable reply (after the bounded re-issue) carries the raw text.
  auto bad = std::make_shared<ts::FnProvider>();
  bad->on_chat = [](const ChatRequest&) {
    return ts::plain_reply("nothing resembling a list");
  };
  Gateway bad_gateway(bad, GatewayConfig{});
  Endpoint bad_generator{bad_gateway, "m"};
  try {
    (void)extract_criteria(pack, pack.aspects[0], bad_generator, pack_dir);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.raw_reply.find("nothing resembling") != std::string::npos);
  }
}

TEST_CASE("review bundles round-trip through their file form") {
  const fs::path pack_dir = fresh_dir("bundle");
  ReviewBundle bundle;
  bundle.stage = ReviewStage::demo_input;
  bundle.bundle_id = "a__0";
  bundle.aspect_id = "a";
  bundle.demo_index = 0;
  ReviewItem item;
  item.id = "a__0";
  item.status = ItemStatus::edited;
  item.text = "line one\n\nline three";
  item.meta = nlohmann::json{{"seed", 5}, {"variant", 2},
                             {"flags", std::vector<bool>{true, false}}};
  bundle.items.push_back(item);
  write_review_bundle(pack_dir, bundle);

  const ReviewBundle loaded = load_review_bundle(
      review_bundle_path(pack_dir, ReviewStage::demo_input, "a__0"));
  CHECK(loaded.stage == ReviewStage::demo_input);
  CHECK(loaded.aspect_id == "a");
  CHECK(loaded.demo_index == 0);
  REQUIRE(loaded.items.size() == 1);
  CHECK(loaded.items[0].status == ItemStatus::edited);
  CHECK(loaded.items[0].text == "line one\n\nline three");
  CHECK(loaded.items[0].meta["variant"] == 2);
}

TEST_CASE("only accepted or edited items reach the pack") {
  const fs::path pack_dir = fresh_dir("ingest");
  TaskPack pack = ts::fixture_pack(TaskKind::introduction);
  critloop::model::save_task_pack(pack, pack_dir);

  ReviewBundle bundle;
  bundle.stage = ReviewStage::criteria;
  bundle.bundle_id = "style";
  bundle.aspect_id = "style";
  bundle.items.push_back({"style-1", ItemStatus::accepted,
                          "**Fresh Angle**: Does it say something new?",
                          nullptr});
  bundle.items.push_back({"style-2", ItemStatus::rejected,
                          "**Rejected**: Should not appear.", nullptr});
  bundle.items.push_back({"style-3", ItemStatus::pending,
                          "**Pending**: Should not appear either.", nullptr});
  write_review_bundle(pack_dir, bundle);

  const int applied = apply_review_bundles(pack, pack_dir, ReviewStage::criteria);
  CHECK(applied == 1);
  const std::size_t n = pack.aspects[0].criteria.size();
  CHECK(pack.aspects[0].criteria[n - 1].name == "Fresh Angle");
  CHECK(pack.aspects[0].criteria[n - 1].id == "fresh-angle");
  for (const auto& criterion : pack.aspects[0].criteria) {
    CHECK(criterion.name != "Rejected");
    CHECK(criterion.name != "Pending");
  }
}

TEST_CASE("criterion slugs get a numeric suffix on collision") {
  const fs::path pack_dir = fresh_dir("ingest-collision");
  TaskPack pack = ts::fixture_pack(TaskKind::introduction);
  critloop::model::save_task_pack(pack, pack_dir);

  ReviewBundle bundle;
  bundle.stage = ReviewStage::criteria;
  bundle.bundle_id = "style";
  bundle.aspect_id = "style";
  // "Concrete References" already exists in the fixture pack.
  bundle.items.push_back({"style-1", ItemStatus::accepted,
                          "**Concrete References**: A refined wording.",
                          nullptr});
  write_review_bundle(pack_dir, bundle);

  apply_review_bundles(pack, pack_dir, ReviewStage::criteria);
  const auto& added = pack.aspects[0].criteria.back();
  CHECK(added.id == "concrete-references-2");
  CHECK(added.name == "Concrete References");
}

TEST_CASE("demo output ingest marks the demo human_reviewed") {
  const fs::path pack_dir = fresh_dir("ingest-demo");
  TaskPack pack = ts::fixture_pack(TaskKind::introduction);
  pack.aspects[0].demonstrations[0].output_text.clear();
  pack.aspects[0].demonstrations[0].review_status =
      critloop::model::ReviewStatus::draft;
  critloop::model::save_task_pack(pack, pack_dir);

  ReviewBundle bundle;
  bundle.stage = ReviewStage::demo_output;
  bundle.bundle_id = "style__0";
  bundle.aspect_id = "style";
  bundle.demo_index = 0;
  bundle.items.push_back({"style__0", ItemStatus::edited,
                          "Edited feedback text, exactly as typed.", nullptr});
  write_review_bundle(pack_dir, bundle);

  apply_review_bundles(pack, pack_dir, ReviewStage::demo_output);
  const auto& demo = pack.aspects[0].demonstrations[0];
  CHECK(demo.output_text == "Edited feedback text, exactly as typed.");
  CHECK(demo.review_status == critloop::model::ReviewStatus::human_reviewed);
}

TEST_CASE("demo output synthesis passes the draft through; empty replies "
          "fail") {
  const TaskPack pack = ts::fixture_pack(TaskKind::introduction);
  auto provider = std::make_shared<ts::FnProvider>();
  provider->on_chat = [](const ChatRequest&) {
    return ts::plain_reply("drafted feedback F");
  };
  Gateway gateway(provider, GatewayConfig{});
  CHECK(synthesize_demo_output(pack, pack.aspects[0], "demo input",
                               Endpoint{gateway, "m"}) ==
        "drafted feedback F");

  auto empty = std::make_shared<ts::FnProvider>();
  empty->on_chat = [](const ChatRequest&) { return ts::plain_reply(""); };
  Gateway empty_gateway(empty, GatewayConfig{});
  CHECK_THROWS_AS((void)synthesize_demo_output(pack, pack.aspects[0], "in",
                                               Endpoint{empty_gateway, "m"}),
                  critloop::gateway::GatewayError);

  CHECK_THROWS_AS((void)synthesize_demo_output(pack, pack.aspects[0], "",
                                               Endpoint{gateway, "m"}),
                  CurationError);
}

TEST_CASE("diversify: fraction 0 is the identity") {
  const TaskPack pack = ts::fixture_pack(TaskKind::introduction);
  auto provider = std::make_shared<ts::FnProvider>();
  provider->on_chat = [](const ChatRequest&) {
    return ts::plain_reply("rewritten");
  };
  Gateway gateway(provider, GatewayConfig{});
  Endpoint generator{gateway, "m"};

  std::vector<TestSample> samples;
  for (int i = 0; i < 10; ++i) {
    samples.push_back({"s" + std::to_string(i), "text", {}, {}});
  }
  const auto out = diversify_test_samples(samples, 0.0, pack, 3, generator);
  CHECK(out == samples);
}

TEST_CASE("diversify: fraction 0.5 of 100 modifies exactly 50, same seed "
          "selects the same set") {
  const TaskPack pack = ts::fixture_pack(TaskKind::introduction);
  auto provider = std::make_shared<ts::FnProvider>();
  provider->on_chat = [](const ChatRequest&) {
    return ts::plain_reply("rewritten text");
  };
  Gateway gateway(provider, GatewayConfig{});
  Endpoint generator{gateway, "m"};

  std::vector<TestSample> samples;
  for (int i = 0; i < 100; ++i) {
    samples.push_back({"s" + std::to_string(i), "original text", {}, {}});
  }

  const auto first = diversify_test_samples(samples, 0.5, pack, 42, generator);
  const auto second = diversify_test_samples(samples, 0.5, pack, 42, generator);

  std::set<std::string> first_ids;
  std::set<std::string> second_ids;
  int count = 0;
  for (std::size_t i = 0; i < first.size(); ++i) {
    CHECK(first[i].id == samples[i].id); // order preserved
    if (first[i].origin == critloop::model::SampleOrigin::diversified) {
      ++count;
      first_ids.insert(first[i].id);
      CHECK(first[i].diversify_seed.has_value());
      CHECK(first[i].text == "rewritten text");
    } else {
      CHECK(first[i] == samples[i]);
    }
    if (second[i].origin == critloop::model::SampleOrigin::diversified) {
      second_ids.insert(second[i].id);
    }
  }
  CHECK(count == 50);
  CHECK(first_ids == second_ids);

  const auto other = diversify_test_samples(samples, 0.5, pack, 43, generator);
  std::set<std::string> other_ids;
  for (const auto& sample : other) {
    if (sample.origin == critloop::model::SampleOrigin::diversified) {
      other_ids.insert(sample.id);
    }
  }
  CHECK(other_ids != first_ids);
}

TEST_CASE("code line filter: threshold, comments, idempotence") {
  std::string code29;
  for (int i = 0; i < 29; ++i) {
    code29 += "x = " + std::to_string(i) + "\n";
  }
  std::string comments;
  for (int i = 0; i < 10; ++i) {
    comments += "# comment\n";
  }
  std::string code30 = code29 + "x = 29\n";

  CHECK(count_code_lines(code29 + comments) == 29);
  CHECK(count_code_lines(code30) == 30);
  CHECK(count_code_lines("# a\n\n  # b\n") == 0);

  const std::vector<std::pair<std::string, std::string>> files = {
      {"reject.py", code29 + comments},
      {"keep.py", code30},
      {"comments.py", comments},
  };
  const auto kept = filter_code_samples(files, 30);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].first == "keep.py");
  CHECK(filter_code_samples(kept, 30) == kept);
}

# Copyright (C) 2026 critloop authors
# SPDX-License-Identifier: Apache-2.0
"""Smoke tests for the compiled module: one probe per exposed operation."""

import os

import pytest

import _critloop as cl


def test_sha256_reference_vector():
    assert (
        cl.sha256_hex("abc")
        == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
    )


def test_slugify():
    assert cl.slugify("Introduce Your Topic") == "introduce-your-topic"


def test_cache_key_distinguishes_candidates():
    base = cl.chat_cache_key("m", "prompt", candidate_index=0)
    other = cl.chat_cache_key("m", "prompt", candidate_index=1)
    assert base != other
    assert base == cl.chat_cache_key("m", "prompt", candidate_index=0)


def test_parse_criteria_list():
    items, warnings = cl.parse_criteria_list("1. **A**: x\n2. **B**: y")
    assert items == [("A", "x"), ("B", "y")]
    assert warnings == []


def test_satisfaction_flags_deterministic():
    first = cl.sample_satisfaction_flags(4, "mixed_adhere", 7)
    second = cl.sample_satisfaction_flags(4, "mixed_adhere", 7)
    assert first == second
    assert True in first and False in first
    assert cl.sample_satisfaction_flags(3, "violate_all", 0) == [False] * 3


def test_ordinal_phrase():
    assert cl.ordinal_phrase([0, 1, 4]) == "the first, second, and fifth"


def test_render_template_and_errors():
    assert cl.render_template("feedback_base", "A <INPUT> B", {"INPUT": "q"}) == "A q B"
    with pytest.raises(RuntimeError):
        cl.render_template("feedback_base", "A <INPUT> B", {})


def test_demonstration_block():
    block = cl.format_demonstration_block(
        [("in one", "out one"), ("in two", "out two")], "code"
    )
    assert block.count("-" * 55) == 1
    assert "[Begin Example Code]" in block


def test_most_consistent_index_matches_worked_examples():
    assert cl.most_consistent_index([[1, 0], [1, 0], [0, 1]]) == 0
    assert cl.most_consistent_index([[1, 0], [0.6, 0.8], [0, 1]]) == 1


def test_parse_tagged_field():
    assert cl.parse_tagged_field("<ANSWER> match </ANSWER>", "answer") == "match"
    with pytest.raises(RuntimeError):
        cl.parse_tagged_field("<answer>unclosed", "answer")


def test_code_line_filter():
    code = "\n".join(f"x{i} = {i}" for i in range(30)) + "\n# comment\n"
    assert cl.count_code_lines(code) == 30
    kept = cl.filter_code_samples([("keep.py", code), ("drop.py", "# only\n")], 30)
    assert [name for name, _ in kept] == ["keep.py"]


def test_pack_operations():
    pack = os.environ["CRITLOOP_PACK"]
    assert cl.validate_pack(pack) == []
    summary = cl.load_pack_summary(pack)
    assert summary["id"] == "tiny-intro"
    assert summary["criteria_total"] == 5
    assert len(summary["aspects"]) == 2

    prompt = cl.assemble_strategy_prompt(pack, "base", "s1")
    assert "Below is my introduction" in prompt
    crit = cl.assemble_strategy_prompt(
        pack, "crit", "s1", aspect_id="topic-and-motivation"
    )
    assert "Criteria to Critique" in crit

"""Smoke tests for the python bindings."""

import json
import os
import subprocess

import pytest

import sciforge


def test_normalize_and_tokenize():
    assert sciforge.normalize_text("  Hello,   World! ") == "hello world"
    assert sciforge.tokenize("F = m*a") == ["f", "m", "a"]


def test_parse_rollout_and_boxed():
    parsed = sciforge.parse_rollout("reasoning</think>The final answer is: \\boxed{\\frac{1}{12}}")
    assert parsed.think == "reasoning"
    assert parsed.final_answer == "\\frac{1}{12}"
    assert not parsed.no_boxed
    assert sciforge.extract_last_boxed("\\boxed{a} \\boxed{b}") == "b"
    assert sciforge.extract_last_boxed("nothing") is None


def test_canonicalize_and_rule_verification():
    c = sciforge.canonicalize_answer("\\frac{1}{12}")
    assert c.kind == "number"
    assert abs(c.value - 1 / 12) < 1e-12
    assert sciforge.verify_answer_rule("0.08333", "\\frac{1}{12}") == 1
    assert sciforge.verify_answer_rule("(b)", "B") == 1
    assert sciforge.verify_answer_rule(None, "42") == 0


def test_aggregate_matches_worked_value():
    result = sciforge.aggregate_reward(
        1, [("Essential", 1), ("Important", 1), ("Optional", 0), ("Pitfall", 1)]
    )
    assert abs(result["reward"] - 6.6 / 6.9) < 1e-12


def test_score_rollout_with_python_judge():
    record = {
        "question": "Explain the mechanism.",
        "reference_answer": "Stepwise mechanism.",
        "verification": "OpenEnded",
        "rubrics": [
            {"title": "Key Step", "description": "Names the key step. YES_CASE", "category": "Essential"},
            {"title": "Unit Slip", "description": "Mixes up units. NO_CASE", "category": "Pitfall"},
        ],
    }

    def judge(messages):
        last_user = [content for role, content in messages if role == "user"][-1]
        verdict = "Yes" if "YES_CASE" in last_user or "## Candidate Answer" in last_user else "No"
        return f"Final Decision: \\boxed{{{verdict}}}"

    result = sciforge.score_rollout(record, "think</think>Explanation \\boxed{stepwise}", judge)
    # j_ans=1, Essential yes, Pitfall fault absent -> everything satisfied
    assert result["reward"] == pytest.approx(1.0)
    assert result["final_answer_correct"] == 1
    assert len(result["items"]) == 2
    assert result["items"][1]["satisfied"] == 1  # pitfall inverted


def test_verifiable_score_without_judge():
    record = {
        "question": "What is 6*7?",
        "reference_answer": "42",
        "verification": "Verifiable",
    }
    result = sciforge.score_rollout(record, "\\boxed{42}")
    assert result["reward"] == 1.0
    wrong = sciforge.score_rollout(record, "\\boxed{41}")
    assert wrong["reward"] == 0.0


def test_coverage_selection():
    gram_sets = [["1", "2"], ["2", "3"], ["1", "2", "3", "4"]]
    state = sciforge.select_lazy_greedy(gram_sets, 2, ids=["A", "B", "C"])
    assert state["picked_ids"] == ["C", "A"]
    assert state["gains"] == [4, 0]
    naive = sciforge.select_greedy(gram_sets, 2, ids=["A", "B", "C"])
    assert naive["picked_ids"] == state["picked_ids"]


def test_curriculum_loop():
    cfg = sciforge.CurriculumConfig()
    state = sciforge.partition(
        [("easy", 7), ("easy2", 6), ("hard", 2), ("trivial", 8)], cfg
    )
    assert state.epoch == 0
    assert sorted(state.train) == ["easy", "easy2"]
    assert state.discard == ["trivial"]
    sciforge.record_rollout(state, "easy", True, 8)
    report = sciforge.epoch_end(state)
    assert report["mastered"] == 1
    assert report["replaced"] == 1
    assert sorted(state.train) == ["easy2", "hard"]


def test_reward_stats():
    stats = sciforge.reward_stats([0.0, 1.0])
    assert stats["mean"] == pytest.approx(0.5)
    assert stats["std"] == pytest.approx(0.5)
    assert stats["histogram"][0] == 1 and stats["histogram"][19] == 1
    with pytest.raises(Exception):
        sciforge.reward_stats([])


def test_prompt_rendering():
    prompt = sciforge.render_instruction("physics", "Why?")
    assert "physics problem" in prompt
    assert prompt.endswith("Why?")
    assert "<SUBJECT>" not in prompt


@pytest.mark.skipif("SCIFORGE_CLI" not in os.environ, reason="CLI path not provided")
def test_cli_roundtrip(tmp_path):
    cli = os.environ["SCIFORGE_CLI"]
    raw = tmp_path / "raw.jsonl"
    out = tmp_path / "out.jsonl"
    raw.write_text(json.dumps({"question": "What is 2+2?", "reference_answer": "4"}) + "\n")
    subprocess.run([cli, "ingest", "--in", str(raw), "--out", str(out)], check=True)
    record = json.loads(out.read_text().splitlines()[0])
    assert record["question"] == "What is 2+2?"
    assert len(record["id"]) == 16

"""End-to-end CLI pipeline: every stage subcommand over a small corpus."""

import json
import os
import subprocess

import pytest

CLI = os.environ.get("SCIFORGE_CLI")

pytestmark = pytest.mark.skipif(CLI is None, reason="SCIFORGE_CLI not set")


def run(*args, check=True):
    return subprocess.run([CLI, *args], check=check, capture_output=True, text=True)


def write_jsonl(path, rows):
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))


def read_jsonl(path):
    return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]


@pytest.fixture()
def corpus(tmp_path):
    prose = (
        "The plesiomorphies of archosaurs include four chambered hearts and pneumatic bones, "
        "which distinguish the group from other reptile lineages through improved respiration "
        "and reduced skeletal weight across many descendant clades."
    )
    rows = [
        {"question": "What is 6*7 in base ten arithmetic?", "reference_answer": "42"},
        {"question": "What is 6*7  in base ten arithmetic?", "reference_answer": "42.0"},
        {"question": "Estimate the accretion efficiency of a quasar disk.",
         "reference_answer": "$\\epsilon \\sim \\frac{1}{12}$"},
        {"question": "Which option names the powerhouse of the cell?", "reference_answer": "(B)"},
        {"question": "Explain the plesiomorphies of archosaurs and how they distinguish "
                     "the group from other reptiles.", "reference_answer": prose},
        {"question": "Prove that the sum of two odd integers is even.",
         "reference_answer": "A proof by parity decomposition " + "with many prose words " * 20},
        {"question": "Broken record with empty answer", "reference_answer": ""},
        {"question": "Placeholder record", "reference_answer": "$ANSWER"},
    ]
    path = tmp_path / "raw.jsonl"
    write_jsonl(path, rows)
    return path


def test_full_stage_composition(tmp_path, corpus):
    ingested = tmp_path / "ingested.jsonl"
    run("ingest", "--in", str(corpus), "--out", str(ingested))
    assert len(read_jsonl(ingested)) == 8
    manifest = json.loads((tmp_path / "ingested.jsonl.manifest.json").read_text())
    assert manifest["subcommand"] == "ingest"
    assert manifest["counts"]["read"] == 8
    assert manifest["config"]["curriculum.tau_pending"]["origin"] == "paper-default"

    cleaned = tmp_path / "cleaned.jsonl"
    run("clean", "--in", str(ingested), "--out", str(cleaned),
        "--drops", str(tmp_path / "clean_drops.jsonl"))
    assert len(read_jsonl(cleaned)) == 6
    drops = read_jsonl(tmp_path / "clean_drops.jsonl")
    assert sorted(d["reason"] for d in drops) == ["empty_answer", "placeholder"]

    subjects = tmp_path / "subjects.jsonl"
    run("subject", "--in", str(cleaned), "--out", str(subjects), "--classifier", "keyword")
    labelled = read_jsonl(subjects)
    assert all("subject" in r for r in labelled)

    # force math label for the proof record so the math-discard rule fires
    for r in labelled:
        if r["question"].startswith("Prove"):
            r["subject"] = "math"
    write_jsonl(subjects, labelled)

    split = tmp_path / "split.jsonl"
    run("split", "--in", str(subjects), "--out", str(split),
        "--drops", str(tmp_path / "split_drops.jsonl"))
    split_rows = read_jsonl(split)
    assert len(split_rows) == 5  # proof record dropped as open-ended math
    verifications = {r["question"][:12]: r["verification"] for r in split_rows}
    assert verifications["Estimate the"] == "Verifiable"
    assert verifications["Explain the "] == "OpenEnded"

    deduped = tmp_path / "deduped.jsonl"
    judge_script = tmp_path / "judge.jsonl"
    write_jsonl(judge_script, [{"response": "Final Decision: \\boxed{Yes}"}])
    run("dedup", "--in", str(split), "--out", str(deduped),
        "--judge", f"scripted:{judge_script}",
        "--pairs", str(tmp_path / "pairs.jsonl"),
        "--conflicts", str(tmp_path / "conflicts.jsonl"))
    deduped_rows = read_jsonl(deduped)
    # the two 6*7 variants conflict (42 vs 42.0), judged equivalent, collapse to one
    assert len(deduped_rows) == 4
    conflicts = read_jsonl(tmp_path / "conflicts.jsonl")
    assert len(conflicts) == 1 and conflicts[0]["equivalent"]

    benchmark = tmp_path / "benchmark.txt"
    benchmark.write_text("Which option names the powerhouse of the cell?\n")
    decontaminated = tmp_path / "decontaminated.jsonl"
    run("decontaminate", "--in", str(deduped), "--out", str(decontaminated),
        "--benchmark", str(benchmark))
    assert len(read_jsonl(decontaminated)) == 3

    rubric_script = tmp_path / "rubric_gen.jsonl"
    rubric_array = [
        {"title": f"Point {i}", "description": f"Checks point {i}.",
         "category": ["Essential", "Important", "Optional", "Pitfall"][i % 4]}
        for i in range(8)
    ]
    write_jsonl(rubric_script, [{"response": "analysis\n" + json.dumps(rubric_array)}])
    with_rubrics = tmp_path / "rubrics.jsonl"
    run("rubric-gen", "--in", str(decontaminated), "--out", str(with_rubrics),
        "--generator", f"scripted:{rubric_script}")
    rub_rows = read_jsonl(with_rubrics)
    open_rows = [r for r in rub_rows if r["verification"] == "OpenEnded"]
    assert open_rows and all(len(r["rubrics"]) == 8 for r in open_rows)

    # difficulty: scripted generator answers every question with one
    # canned rollout set; open-ended verification uses the judge script
    gen_script = tmp_path / "gen.jsonl"
    write_jsonl(gen_script, [{"response": "The final answer is: \\boxed{42}"}])
    scored = tmp_path / "scored.jsonl"
    run("difficulty", "--in", str(with_rubrics), "--out", str(scored),
        "--generator", f"scripted:{gen_script}", "--judge", f"scripted:{judge_script}",
        "--estimates", str(tmp_path / "estimates.jsonl"))
    scored_rows = read_jsonl(scored)
    estimates = read_jsonl(tmp_path / "estimates.jsonl")
    assert all(e["trials"] == 8 for e in estimates)
    # judge says Yes to everything, so open-ended records go 8/8 and drop;
    # the 42-answer matches only the arithmetic question
    assert all(0 <= r["difficulty"] <= 8 for r in scored_rows)

    stats_path = tmp_path / "stats.json"
    run("stats", "--in", str(scored), "--out", str(stats_path))
    stats = json.loads(stats_path.read_text())
    assert stats["records"] == len(scored_rows)
    assert len(stats["difficulty_histogram"]) == 9


def test_curriculum_cli_cycle(tmp_path):
    records = [
        {"question": f"q{i}", "reference_answer": "a", "difficulty": k, "id": f"q{i}"}
        for i, k in enumerate([6, 7, 5, 3, 8])
    ]
    data = tmp_path / "records.jsonl"
    write_jsonl(data, records)
    state0 = tmp_path / "state0.json"
    run("curriculum-init", "--in", str(data), "--state-out", str(state0))
    state = json.loads(state0.read_text())
    assert sorted(state["train"]) == ["q0", "q1"]
    assert state["discard"] == ["q4"]

    events = tmp_path / "events.jsonl"
    write_jsonl(events, [
        {"question_id": "q0", "correct": True, "count": 8},
        {"question_id": "q1", "correct": True, "count": 4},
        {"question_id": "q1", "correct": False, "count": 4},
    ])
    state1 = tmp_path / "state1.json"
    run("curriculum-step", "--state", str(state0), "--events", str(events),
        "--state-out", str(state1))

    state2 = tmp_path / "state2.json"
    report_path = tmp_path / "epoch.json"
    run("curriculum-epoch-end", "--state", str(state1), "--state-out", str(state2),
        "--report", str(report_path))
    report = json.loads(report_path.read_text())
    assert report["mastered"] == 1
    assert report["replaced"] == 1
    final = json.loads(state2.read_text())
    assert sorted(final["train"]) == ["q1", "q2"]  # easiest pending (d=5/8) pulled in
    assert final["epoch"] == 1

    # desync: rollout for a non-train question fails with a structured error
    bad_events = tmp_path / "bad_events.jsonl"
    write_jsonl(bad_events, [{"question_id": "q4", "correct": True}])
    result = run("curriculum-step", "--state", str(state2), "--events", str(bad_events),
                 "--state-out", str(tmp_path / "never.json"), check=False)
    assert result.returncode == 1
    assert "error" in json.loads(result.stderr.splitlines()[-1])


def test_select_sft_fixture(tmp_path):
    examples = [
        {"question_id": "A", "prompt": "", "response": "one two", "mode": "think"},
        {"question_id": "B", "prompt": "", "response": "two three", "mode": "think"},
        {"question_id": "C", "prompt": "", "response": "one two three four", "mode": "think"},
    ]
    # use 1-gram width so the fixture reproduces the documented gram sets
    data = tmp_path / "pool.jsonl"
    write_jsonl(data, examples)
    out = tmp_path / "selected.json"
    report = tmp_path / "report.json"
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"coverage.gram_width": 1}))
    run("--config", str(cfg), "select-sft", "--in", str(data), "--n", "2",
        "--out", str(out), "--mode", "think", "--report", str(report))
    selected = json.loads(out.read_text())
    assert selected["selected_ids"] == ["C", "A"]
    rep = json.loads(report.read_text())
    assert rep["unique_grams"] == 4
    assert rep["gain_curve"] == [4, 0]


def test_simulate_cli(tmp_path):
    records = [
        {"question": f"s{i}", "reference_answer": "a", "id": f"s{i}", "difficulty": i % 9}
        for i in range(90)
    ]
    data = tmp_path / "sim.jsonl"
    write_jsonl(data, records)
    out = tmp_path / "trajectory.jsonl"
    run("simulate", "--in", str(data), "--out", str(out), "--epochs", "4",
        "--rollouts", "8", "--sim-policy", "logistic:bias=-4,epoch_gain=1,ease_gain=5",
        "--seed", "7")
    trajectory = read_jsonl(out)
    assert len(trajectory) == 4
    assert all("replace_ratio" in e and "mean_train_difficulty" in e for e in trajectory)


def test_outputs_and_manifests_are_reproducible(tmp_path):
    rows = [{"question": f"stable {i}", "reference_answer": str(i)} for i in range(20)]
    data = tmp_path / "in.jsonl"
    write_jsonl(data, rows)

    def run_once(tag):
        out = tmp_path / f"out_{tag}.jsonl"
        manifest = tmp_path / f"manifest_{tag}.json"
        run("ingest", "--in", str(data), "--out", str(out), "--manifest", str(manifest),
            "--seed", "11")
        m = json.loads(manifest.read_text())
        m.pop("elapsed_ms", None)
        # output path differs by construction; compare digests instead
        for o in m["outputs"]:
            o["path"] = "OUT"
        return out.read_text(), json.dumps(m, sort_keys=True)

    out_a, manifest_a = run_once("a")
    out_b, manifest_b = run_once("b")
    assert out_a == out_b
    assert manifest_a == manifest_b


def test_unknown_flag_exits_2():
    result = run("clean", "--definitely-not-a-flag", check=False)
    assert result.returncode == 2
    result2 = run("no-such-subcommand", check=False)
    assert result2.returncode == 2


def test_gate_flag_changes_reward(tmp_path):
    request = {
        "question": "Explain.",
        "reference_answer": "Reference.",
        "verification": "OpenEnded",
        "rubrics": [
            {"title": f"P{i}", "description": f"Point {i}.", "category": "Essential"}
            for i in range(10)
        ],
        "rollout_text": "no boxed span, strong rubric coverage",
    }
    judge_script = tmp_path / "yes_judge.jsonl"
    write_jsonl(judge_script, [{"response": "Final Decision: \\boxed{Yes}"}])
    req_path = tmp_path / "req.jsonl"
    write_jsonl(req_path, [request])

    ungated_path = tmp_path / "ungated.jsonl"
    run("reward-batch", "--in", str(req_path), "--out", str(ungated_path),
        "--judge", f"scripted:{judge_script}")
    ungated = read_jsonl(ungated_path)[0]
    assert ungated["reward"] > 0.5  # rubric mass alone
    assert ungated["final_answer"]["correct"] == 0

    gated_path = tmp_path / "gated.jsonl"
    run("reward-batch", "--in", str(req_path), "--out", str(gated_path),
        "--judge", f"scripted:{judge_script}", "--gate")
    gated = read_jsonl(gated_path)[0]
    assert gated["reward"] < 0.5
    assert gated["gated"]

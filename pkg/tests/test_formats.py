"""Golden checks pinning the artifact formats frozen in docs/formats.md."""

import json

import pytest

from celab.cli import main

HISTORY_COLUMNS = "epoch,player,mean_terminal_reward,rho_1,rho_2,rho_3,rho_4"

LAYER_NAMES = [
    "analyzer_a",
    "analyzer_b",
    "dense_1",
    "dense_2",
    "dense_3",
    "wide_1",
    "wide_2",
    "wide_3",
    "output",
]

REPORT_KEYS = {
    "status",
    "permutation",
    "sorted_known_payoffs",
    "sorted_distribution",
    "constraints",
    "skipped_windows",
    "main_mix_probability",
    "branch",
    "objective",
    "estimate",
    "violated_families",
    "round_trip",
}

MANIFEST_KEYS = {
    "reproducibility",
    "status",
    "main_player",
    "seed",
    "passes",
    "players",
    "decisions",
    "config",
    "knowledge",
    "tasks",
    "ce_results",
    "stalled_tasks",
}


@pytest.fixture(scope="module")
def train_dir(tmp_path_factory, request):
    fixtures = request.getfixturevalue("fixtures_dir")
    out = tmp_path_factory.mktemp("train")
    main(
        ["train", str(fixtures / "coordination_2x2.json"), "--seed", "5",
         "--epochs", "1", "--out-dir", str(out)]
    )
    return out


def test_history_csv_layout(train_dir):
    lines = (train_dir / "train_history.csv").read_text().splitlines()
    meta = json.loads(lines[0][2:])
    assert set(meta) == {"config", "players", "seed"}
    assert lines[1] == HISTORY_COLUMNS
    # one row per player per epoch, both players of the pair
    assert [row.split(",")[1] for row in lines[2:]] == ["p1", "p2"]


def test_checkpoint_layout(train_dir):
    ckpt = json.loads((train_dir / "train_checkpoint_p2.json").read_text())
    assert set(ckpt) == {"widths", "seed", "config", "layers"}
    assert set(ckpt["widths"]) == {"h", "j", "width_in", "width_mid"}
    assert [layer["name"] for layer in ckpt["layers"]] == LAYER_NAMES
    assert all(set(layer) == {"name", "weights", "bias"} for layer in ckpt["layers"])


def test_p_tilde_layout(train_dir):
    summary = json.loads((train_dir / "train_p_tilde.json").read_text())
    assert set(summary) == {
        "reproducibility",
        "players",
        "stable",
        "epochs_run",
        "stability_tolerance",
        "p_tilde",
    }
    assert set(summary["reproducibility"]) == {"command", "game", "seed", "options"}


def test_solve_ce_layout(fixtures_dir, tmp_path):
    out = tmp_path / "ce.json"
    main(["solve", str(fixtures_dir / "chicken.json"), "--mode", "ce",
          "--out", str(out)])
    payload = json.loads(out.read_text())
    assert set(payload) == {
        "reproducibility",
        "mode",
        "players",
        "outcomes",
        "distribution",
        "welfare",
        "deviation_check",
    }
    assert payload["outcomes"] == ["C,C", "C,D", "D,C", "D,D"]
    assert set(payload["deviation_check"]) == {"ok", "max_violation"}


def test_estimate_report_layout(fixtures_dir, tmp_path):
    dist = tmp_path / "dist.json"
    dist.write_text("[1.0, 0.0, 0.0, 0.0]")
    out = tmp_path / "report.json"
    main(["estimate", str(fixtures_dir / "coordination_2x2.json"),
          "--known-player", "p1", "--distribution", str(dist),
          "--round-trip", "--out", str(out)])
    payload = json.loads(out.read_text())
    assert set(payload) == {
        "reproducibility",
        "known_player",
        "estimated_player",
        "axes_swapped",
        "report",
        "estimate_game_order",
        "round_trip_verdict",
    }
    assert set(payload["report"]) == REPORT_KEYS
    row = payload["report"]["constraints"][0]
    assert set(row) == {"kind", "position", "window", "coefficients", "rhs", "sense"}
    assert sorted(payload["report"]["permutation"]) == [0, 1, 2, 3]
    assert set(payload["round_trip_verdict"]) == {"l_inf", "tol", "match"}


def test_pipeline_manifest_layout(fixtures_dir, tmp_path):
    out = tmp_path / "manifest.json"
    main(["pipeline", str(fixtures_dir / "coordination_2x2.json"),
          "--known-player", "p1", "--known-player", "p2", "--out", str(out)])
    payload = json.loads(out.read_text())
    assert set(payload) == MANIFEST_KEYS
    task = payload["tasks"][0]
    assert set(task) == {"index", "players", "fixed", "status", "detail"}
    ce = payload["ce_results"][0]
    assert set(ce) == {
        "task_index",
        "players",
        "fixed",
        "source",
        "distribution",
        "welfare",
        "is_ce",
        "max_violation",
    }
    knowledge = payload["knowledge"]["p1"]
    assert set(knowledge) == {"provenance", "vector", "source"}

"""The full pairwise pipeline on the three-player fixture.

Only p1's payoffs are given. The pipeline trains p1 against p2 and p3 in
every fixed-decision slice, estimates the unknown vectors from the stable
distributions, and then solves the p2-p3 equilibria analytically, without
those two ever interacting. Takes ten seconds or so.
"""

import json
from pathlib import Path

import numpy as np

from celab.games import load_game
from celab.pipeline import run_pipeline, validate_manifest
from celab.training import TrainingConfig

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
OUT = Path(__file__).resolve().parent / "out"
OUT.mkdir(exist_ok=True)

game = load_game(FIXTURES / "three_player.json")
config = TrainingConfig(epochs=600, stability_tol=0.004)

print("running the pipeline (known: p1)...")
result = run_pipeline(game, known_players=("p1",), config=config, seed=0)

print(f"status: {result.status} after {result.passes} passes")
for record in result.records:
    print(f"  task {record.index} {record.task.describe()}: {record.status}")
for p in game.players:
    entry = result.knowledge[p]
    if entry.provenance == "given":
        print(f"  {p}: given")
    else:
        print(f"  {p}: estimated {entry.values.round(3).tolist()}")
        print(f"      ({entry.source})")
for ce in result.ce_records:
    print(
        f"  CE task {ce.task_index} [{ce.source}]: "
        f"{np.round(ce.distribution, 3).tolist()} welfare {ce.welfare:.3f}"
    )

manifest = result.manifest()
findings = validate_manifest(manifest)
print(f"manifest findings: {findings if findings else 'none'}")

path = OUT / "three_player_manifest.json"
path.write_text(json.dumps(manifest, indent=2) + "\n")
print(f"manifest written to {path}")

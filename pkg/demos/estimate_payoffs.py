"""Inverse side of the model: recover an opponent's payoff vector from an
observed stable joint distribution, then sanity-check it by re-solving the
equilibrium (the round trip).

Two runs: a coordination point mass, where the estimate round-trips exactly,
and the mirror game's published distribution, which is infeasible under the
pressure constraints; the report names the constraint families that break.
"""

import json
from pathlib import Path

import numpy as np

from celab.estimation import estimate_payoff, estimation_report
from celab.games import load_game

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
OUT = Path(__file__).resolve().parent / "out"
OUT.mkdir(exist_ok=True)

# --- feasible case: everyone sits on the coordination corner -------------
game = load_game(FIXTURES / "coordination_2x2.json")
observed = np.array([1.0, 0.0, 0.0, 0.0])
result = estimate_payoff(game.payoff("p1"), observed)
print("coordination game, observed point mass on (A,A):")
print(f"  status {result.status}, branch {result.branch}")
print(f"  estimated opponent vector: {result.estimate.round(4).tolist()}")
print(
    f"  round trip: distribution {result.round_trip.distribution.round(4).tolist()}"
    f", L_inf {result.round_trip.l_inf:.2e}"
)

# --- infeasible case: the mirror game's published distribution -----------
mirror = load_game(FIXTURES / "mirror_2x2.json")
claimed = np.array([1 / 3, 1 / 3, 1 / 3, 0.0])
result = estimate_payoff(mirror.payoff("p1"), claimed)
print("\nmirror game, observed {1/3, 1/3, 1/3, 0}:")
print(f"  status {result.status}")
print(f"  violated constraint families: {result.violated}")

report = estimation_report(result)
path = OUT / "mirror_estimation_report.json"
path.write_text(json.dumps(report, indent=2) + "\n")
print(f"  full constraint ledger ({len(report['constraints'])} rows) in {path}")

"""Walk through the solver stack on the chicken fixture: enumerate the Nash
equilibria, solve for the welfare-max correlated equilibrium, and show that
its payoff pair lies outside the hull of the Nash payoffs."""

from pathlib import Path

import numpy as np

from celab.equilibrium import (
    enumerate_equilibria,
    in_nash_payoff_hull,
    is_correlated_equilibrium,
    max_welfare_correlated_equilibrium,
)
from celab.games import load_game

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

game = load_game(FIXTURES / "chicken.json")
print("chicken, normalized payoffs:")
for p in game.players:
    print(f"  {p}: {game.payoff(p).round(4).tolist()}")

print("\nNash equilibria:")
equilibria = enumerate_equilibria(game)
for eq in equilibria:
    strategies = ", ".join(
        f"{p}={s.round(3).tolist()}" for p, s in zip(game.players, eq.strategies)
    )
    print(f"  {eq.kind:5s} {strategies}  payoffs {np.round(eq.payoffs, 4).tolist()}")

ce = max_welfare_correlated_equilibrium(game)
check = is_correlated_equilibrium(game, ce.distribution)
print(f"\nwelfare-max CE: {ce.distribution.round(4).tolist()}")
print(f"welfare {ce.welfare:.4f}, deviation check ok={check.ok}")

# the CE splits its welfare evenly; compare that payoff pair against the
# convex hull of the Nash payoff pairs
u1, u2 = game.payoff("p1"), game.payoff("p2")
ce_payoffs = (float(ce.distribution @ u1), float(ce.distribution @ u2))
ne_payoffs = [eq.payoffs for eq in equilibria]
inside = in_nash_payoff_hull(ne_payoffs, ce_payoffs)
print(f"\nCE payoff pair {np.round(ce_payoffs, 4).tolist()}")
print(f"inside the Nash payoff hull? {inside}")
best_ne = max(eq.welfare for eq in equilibria)
print(f"CE welfare {ce.welfare:.4f} vs best Nash welfare {best_ne:.4f}")

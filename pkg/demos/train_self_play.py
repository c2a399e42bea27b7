"""Self-play on the coordination game: both agents walk the outcome simplex
and settle on the Pareto-dominant corner."""

from pathlib import Path

from celab.games import load_game
from celab.training import TrainingConfig, train_pair, write_history_csv

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
OUT = Path(__file__).resolve().parent / "out"
OUT.mkdir(exist_ok=True)

game = load_game(FIXTURES / "coordination_2x2.json")
config = TrainingConfig()  # 16 rounds x 60 steps, theta 0.02, 300-epoch cap
seed = 0

print(f"training p1/p2 on the coordination game, seed {seed}")
result = train_pair(game, ("p1", "p2"), config, seed)

for stats in result.history[:: max(1, len(result.history) // 10)]:
    r = stats.mean_terminal_reward
    print(
        f"  epoch {stats.epoch:3d}  rewards ({r['p1']:.3f}, {r['p2']:.3f})  "
        f"terminal {stats.terminal_state.round(3).tolist()}"
    )

if result.stable:
    print(f"stable after {result.epochs_run} epochs (tol {config.tolerance})")
else:
    print(f"hit the {config.epochs}-epoch cap without stabilizing")
print(f"stable distribution: {result.p_tilde.round(4).tolist()}")

csv_path = OUT / "coordination_history.csv"
write_history_csv(result, csv_path)
print(f"epoch history written to {csv_path}")

"""Pairwise estimation pipeline for games with more than two players.

The pipeline decomposes an I-player game into two-player interactions: one
task per unordered player pair per combination of the remaining players'
decisions. Tasks whose pair has exactly one known payoff vector are trained
in self-play and the unknown side estimated from the stable distribution;
tasks whose pair is fully known get their correlated equilibrium computed
directly, without interaction. Estimated slices are stitched back into full
payoff vectors, which unlocks further tasks, until the queue drains or a full
pass makes no progress (a stall, reported as a partial result).

The game object carries the simulation ground truth for every player that can
act; `known_players` declares which of those vectors the estimator is given.
Everything else must be recovered through interactions.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .equilibrium import (
    enumerate_equilibria,
    is_correlated_equilibrium,
    max_welfare_correlated_equilibrium,
)
from .errors import PreconditionError
from .estimation import estimate_payoff, estimation_report
from .games import Game, make_game
from .training import TrainingConfig, train_pair

SLICE_MASS_TOL = 1e-9

# 2x2 transpose as an outcome permutation; its own inverse.
_SWAP_2X2 = np.array([0, 2, 1, 3])

TASK_STATUSES = frozenset(
    {
        "pending",
        "trained_estimated",
        "estimation_infeasible",
        "analytic_ce",
        "skipped_not_against",
        "stalled",
    }
)


@dataclass(frozen=True)
class InteractionTask:
    """One pairwise interaction: an unordered player pair plus the decisions
    every other player is held at. `player_a` precedes `player_b` in the
    game's player order, so the induced view is a-major."""

    player_a: str
    player_b: str
    fixed_decisions: tuple[tuple[str, str], ...]

    @property
    def pair(self) -> tuple[str, str]:
        return (self.player_a, self.player_b)

    def describe(self) -> str:
        fixed = ", ".join(f"{p}={d}" for p, d in self.fixed_decisions)
        core = f"{self.player_a}-{self.player_b}"
        return f"{core} [{fixed}]" if fixed else core


def build_task_set(game: Game) -> list[InteractionTask]:
    """All interaction tasks of a game, in deterministic order.

    Pairs are enumerated in player order; for each pair the remaining
    players' decision combinations fan out row-major.
    """
    tasks: list[InteractionTask] = []
    for a, b in itertools.combinations(game.players, 2):
        others = [p for p in game.players if p != a and p != b]
        menus = [game.decisions[game.players.index(p)] for p in others]
        for combo in itertools.product(*menus):
            fixed = tuple(zip(others, combo))
            tasks.append(InteractionTask(player_a=a, player_b=b, fixed_decisions=fixed))
    return tasks


def _slice_indices(game: Game, task: InteractionTask) -> tuple[int, ...]:
    """Flat outcome indices matching a task's fixed decisions, in view order
    (player_a-major, player_b-minor)."""
    fixed = dict(task.fixed_decisions)
    per_player: list[Sequence[int]] = []
    for p, menu in zip(game.players, game.decisions):
        if p in fixed:
            label = fixed[p]
            if label not in menu:
                raise PreconditionError(f"unknown decision label {label!r} for {p!r}")
            per_player.append([menu.index(label)])
        else:
            per_player.append(range(len(menu)))
    sizes = game.menu_sizes
    indices = []
    for combo in itertools.product(*per_player):
        flat = 0
        for pos, n in zip(combo, sizes):
            flat = flat * n + pos
        indices.append(flat)
    return tuple(indices)


@dataclass
class PairView:
    """A two-player game induced by fixing all other players' decisions.

    Sliced payoff vectors are renormalized to the simplex; `slice_mass`
    records each supplied player's original mass on the slice so expected
    rewards can be mapped back if needed.
    """

    task: InteractionTask
    players: tuple[str, str]
    outcome_indices: tuple[int, ...]
    game: Game
    slice_mass: dict[str, float]


def pair_view(
    game: Game,
    task: InteractionTask,
    payoffs: Mapping[str, np.ndarray | None] | None = None,
) -> PairView:
    """Induce the two-player view of a task.

    `payoffs` overrides the source of full vectors (for knowledge-base views);
    by default the game's own vectors are sliced. Missing vectors stay None.
    """
    source = game.payoffs if payoffs is None else payoffs
    indices = _slice_indices(game, task)
    a, b = task.pair
    menus = (
        game.decisions[game.players.index(a)],
        game.decisions[game.players.index(b)],
    )
    sliced: dict[str, np.ndarray | None] = {}
    mass: dict[str, float] = {}
    for p in (a, b):
        full = source.get(p)
        if full is None:
            sliced[p] = None
            continue
        v = np.asarray(full, dtype=np.float64)[list(indices)]
        total = float(v.sum())
        if total <= SLICE_MASS_TOL:
            raise PreconditionError(
                f"payoff mass of {p!r} on view {task.describe()} is {total}; "
                "cannot renormalize"
            )
        sliced[p] = v / total
        mass[p] = total
    view_game = make_game((a, b), menus, sliced)
    return PairView(
        task=task,
        players=(a, b),
        outcome_indices=indices,
        game=view_game,
        slice_mass=mass,
    )


def against_set(game: Game, task: InteractionTask) -> bool:
    """Whether the pair would bother interacting: the induced view (true
    payoffs) must admit at least two equilibria, otherwise play collapses
    onto the single prediction and the interaction reveals nothing."""
    view = pair_view(game, task)
    for p in view.players:
        if view.game.payoffs.get(p) is None:
            raise PreconditionError(
                f"cannot evaluate the interaction gate for {task.describe()}: "
                f"true payoff of {p!r} is unknown"
            )
    return len(enumerate_equilibria(view.game)) >= 2


@dataclass
class KnownVector:
    values: np.ndarray
    provenance: str  # "given" | "estimated"
    source: str = ""


@dataclass
class TaskRecord:
    index: int
    task: InteractionTask
    status: str = "pending"
    detail: dict = field(default_factory=dict)


@dataclass
class CERecord:
    task_index: int
    players: tuple[str, str]
    fixed_decisions: tuple[tuple[str, str], ...]
    source: str  # "analytic" (both known when processed) | "post_estimation"
    distribution: np.ndarray
    welfare: float
    ce_ok: bool
    max_violation: float


@dataclass
class PipelineResult:
    status: str  # "complete" | "partial"
    main_player: str
    seed: int
    config: TrainingConfig
    game: Game
    records: list[TaskRecord]
    ce_records: list[CERecord]
    knowledge: dict[str, KnownVector | None]
    passes: int

    @property
    def stalled_tasks(self) -> list[TaskRecord]:
        return [r for r in self.records if r.status == "stalled"]

    def manifest(self) -> dict:
        knowledge = {}
        for p in self.game.players:
            entry = self.knowledge.get(p)
            if entry is None:
                knowledge[p] = {"provenance": "unknown", "vector": None}
            else:
                knowledge[p] = {
                    "provenance": entry.provenance,
                    "vector": [float(x) for x in entry.values],
                    "source": entry.source,
                }
        return {
            "status": self.status,
            "main_player": self.main_player,
            "seed": self.seed,
            "passes": self.passes,
            "players": list(self.game.players),
            "decisions": {
                p: list(menu) for p, menu in zip(self.game.players, self.game.decisions)
            },
            "config": self.config.to_dict(),
            "knowledge": knowledge,
            "tasks": [
                {
                    "index": r.index,
                    "players": list(r.task.pair),
                    "fixed": {p: d for p, d in r.task.fixed_decisions},
                    "status": r.status,
                    "detail": r.detail,
                }
                for r in self.records
            ],
            "ce_results": [
                {
                    "task_index": c.task_index,
                    "players": list(c.players),
                    "fixed": {p: d for p, d in c.fixed_decisions},
                    "source": c.source,
                    "distribution": [float(x) for x in c.distribution],
                    "welfare": c.welfare,
                    "is_ce": c.ce_ok,
                    "max_violation": c.max_violation,
                }
                for c in self.ce_records
            ],
            "stalled_tasks": [r.index for r in self.stalled_tasks],
        }


def _task_seed(seed: int, task_index: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(2, task_index)).generate_state(1)[0])


def _oriented(known_first: bool) -> np.ndarray:
    """Outcome permutation putting the known player on the major axis."""
    return np.arange(4) if known_first else _SWAP_2X2


def _knowledge_slice(
    view: PairView, entry: KnownVector
) -> np.ndarray:
    """The known player's knowledge-base vector restricted to the view."""
    v = entry.values[list(view.outcome_indices)]
    total = float(v.sum())
    if total <= SLICE_MASS_TOL:
        raise PreconditionError(
            f"known payoff mass on view {view.task.describe()} is {total}; "
            "cannot renormalize"
        )
    return v / total


def _ce_record(
    game: Game,
    knowledge: Mapping[str, KnownVector | None],
    record: TaskRecord,
    source: str,
) -> CERecord:
    a, b = record.task.pair
    view = pair_view(
        game,
        record.task,
        payoffs={a: knowledge[a].values, b: knowledge[b].values},
    )
    ce = max_welfare_correlated_equilibrium(view.game)
    check = is_correlated_equilibrium(view.game, ce.distribution)
    return CERecord(
        task_index=record.index,
        players=record.task.pair,
        fixed_decisions=record.task.fixed_decisions,
        source=source,
        distribution=ce.distribution,
        welfare=ce.welfare,
        ce_ok=check.ok,
        max_violation=check.max_violation,
    )


def run_pipeline(
    game: Game,
    main_player: str | None = None,
    known_players: Sequence[str] | None = None,
    config: TrainingConfig | None = None,
    seed: int = 0,
    comparison_tol: float = 1e-9,
    rotate_opponent: bool = False,
    threads: int = 1,
) -> PipelineResult:
    """Run the full pairwise estimation pipeline.

    Every task is either processed exactly once (trained and estimated,
    solved analytically, or skipped because the pair is not against each
    other) or reported stalled when a full pass over the queue makes no
    progress. Finally, a correlated equilibrium is computed for every task
    whose pair is fully known, each verified with the deviation check.
    """
    if main_player is None:
        main_player = game.players[0]
    if main_player not in game.players:
        raise PreconditionError(f"unknown main player {main_player!r}")
    if known_players is None:
        known_players = (main_player,)
    known_players = tuple(known_players)
    if main_player not in known_players:
        raise PreconditionError("the main player's payoff vector must be known")
    if config is None:
        config = TrainingConfig()
    if threads < 1:
        raise PreconditionError(f"threads must be >= 1, got {threads}")

    knowledge: dict[str, KnownVector | None] = {p: None for p in game.players}
    for p in known_players:
        if p not in game.players:
            raise PreconditionError(f"unknown player {p!r} in known_players")
        v = game.payoffs.get(p)
        if v is None:
            raise PreconditionError(
                f"player {p!r} is declared known but the game has no payoff vector"
            )
        knowledge[p] = KnownVector(values=np.asarray(v, dtype=np.float64), provenance="given")

    tasks = build_task_set(game)
    records = [TaskRecord(index=i, task=t) for i, t in enumerate(tasks)]
    queue: list[TaskRecord] = list(records)
    ce_records: list[CERecord] = []
    # per unknown player, per partner pair: {task index: (indices, slice)}
    pieces: dict[str, dict[tuple[str, str], dict[int, tuple[tuple[int, ...], np.ndarray]]]] = {}

    def simulatable(task: InteractionTask) -> bool:
        return all(game.payoffs.get(p) is not None for p in task.pair)

    def try_assemble(player: str) -> bool:
        for pair_key, got in pieces.get(player, {}).items():
            count = sum(len(idx) for idx, _ in got.values())
            if count != game.num_outcomes:
                continue
            full = np.zeros(game.num_outcomes)
            weight = 1.0 / len(got)
            for idx, vec in got.values():
                full[list(idx)] = weight * vec
            knowledge[player] = KnownVector(
                values=full,
                provenance="estimated",
                source=f"slices from pair {pair_key[0]}-{pair_key[1]} "
                f"({len(got)} combination(s), weight {weight:g} each)",
            )
            return True
        return False

    passes = 0
    stalled = False
    while queue:
        passes += 1
        progress = False
        for record in list(queue):
            task = record.task
            a, b = task.pair
            known_a = knowledge[a] is not None
            known_b = knowledge[b] is not None
            if known_a and known_b:
                ce_records.append(_ce_record(game, knowledge, record, "analytic"))
                record.status = "analytic_ce"
                queue.remove(record)
                progress = True
                continue
            if not (known_a or known_b):
                continue
            if not simulatable(task):
                continue
            if not against_set(game, task):
                record.status = "skipped_not_against"
                record.detail = {"reason": "induced view has fewer than 2 equilibria"}
                queue.remove(record)
                progress = True
                continue

            true_view = pair_view(game, task)
            task_seed = _task_seed(seed, record.index)
            trained = train_pair(true_view.game, true_view.players, config, task_seed)

            known_p = a if known_a else b
            unknown_p = b if known_a else a
            order = _oriented(known_first=known_p == true_view.players[0])
            v_main = _knowledge_slice(true_view, knowledge[known_p])[order]
            p_tilde = trained.p_tilde[order]
            est = estimate_payoff(
                v_main,
                p_tilde,
                comparison_tol=comparison_tol,
                rotate_opponent=rotate_opponent,
            )
            report = estimation_report(est)
            record.detail = {
                "trained_pair": list(true_view.players),
                "epochs_run": trained.epochs_run,
                "stable": trained.stable,
                "seed": task_seed,
                "known_player": known_p,
                "estimated_player": unknown_p,
                "estimation": {
                    "status": report["status"],
                    "branch": report["branch"],
                    "objective": report["objective"],
                    "violated_families": report["violated_families"],
                    "round_trip": report["round_trip"],
                },
            }
            if est.status != "ok":
                record.status = "estimation_infeasible"
                queue.remove(record)
                progress = True
                continue

            slice_in_view = est.estimate[order]
            store = pieces.setdefault(unknown_p, {}).setdefault(task.pair, {})
            store[record.index] = (true_view.outcome_indices, slice_in_view)
            try_assemble(unknown_p)
            record.status = "trained_estimated"
            queue.remove(record)
            progress = True
        if not progress:
            stalled = True
            break

    if stalled:
        for record in queue:
            record.status = "stalled"

    sweep = [
        r
        for r in records
        if r.status in ("trained_estimated", "skipped_not_against")
        and knowledge[r.task.player_a] is not None
        and knowledge[r.task.player_b] is not None
    ]
    if threads > 1 and len(sweep) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [
                pool.submit(_ce_record, game, knowledge, r, "post_estimation")
                for r in sweep
            ]
            ce_records.extend(f.result() for f in futures)
    else:
        ce_records.extend(
            _ce_record(game, knowledge, r, "post_estimation") for r in sweep
        )
    ce_records.sort(key=lambda c: c.task_index)

    return PipelineResult(
        status="partial" if stalled else "complete",
        main_player=main_player,
        seed=seed,
        config=config,
        game=game,
        records=records,
        ce_records=ce_records,
        knowledge=knowledge,
        passes=passes,
    )


def validate_manifest(manifest: Mapping) -> list[str]:
    """Structural checks on a pipeline manifest. Returns findings; empty
    means the manifest is internally consistent."""
    findings: list[str] = []
    required = (
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
    )
    for key in required:
        if key not in manifest:
            findings.append(f"missing key {key!r}")
    if findings:
        return findings

    status = manifest["status"]
    if status not in ("complete", "partial"):
        findings.append(f"unknown status {status!r}")
    stalled = manifest["stalled_tasks"]
    if status == "complete" and stalled:
        findings.append("complete run lists stalled tasks")
    if status == "partial" and not stalled:
        findings.append("partial run lists no stalled tasks")

    players = manifest["players"]
    main = manifest["main_player"]
    if main not in players:
        findings.append(f"main player {main!r} not among players")

    knowledge = manifest["knowledge"]
    for p in players:
        entry = knowledge.get(p)
        if entry is None:
            findings.append(f"knowledge entry missing for {p!r}")
            continue
        prov = entry.get("provenance")
        if prov not in ("given", "estimated", "unknown"):
            findings.append(f"{p}: unknown provenance {prov!r}")
            continue
        vector = entry.get("vector")
        if prov == "unknown":
            if vector is not None:
                findings.append(f"{p}: unknown provenance but a vector is present")
            continue
        if vector is None:
            findings.append(f"{p}: provenance {prov} but no vector")
            continue
        v = np.asarray(vector, dtype=np.float64)
        if abs(float(v.sum()) - 1.0) > 1e-6 or np.any(v < -1e-9):
            findings.append(f"{p}: vector is not a distribution (sum={v.sum()})")
    main_entry = knowledge.get(main) or {}
    if main_entry.get("provenance") != "given":
        findings.append("main player's vector is not marked given")

    indices = set()
    for t in manifest["tasks"]:
        idx = t.get("index")
        if idx in indices:
            findings.append(f"duplicate task index {idx}")
        indices.add(idx)
        if t.get("status") not in TASK_STATUSES or t.get("status") == "pending":
            findings.append(f"task {idx}: invalid status {t.get('status')!r}")
        if t.get("status") == "stalled" and idx not in stalled:
            findings.append(f"task {idx}: stalled but not listed in stalled_tasks")
    for idx in stalled:
        if idx not in indices:
            findings.append(f"stalled task index {idx} not among tasks")

    for c in manifest["ce_results"]:
        idx = c.get("task_index")
        if idx not in indices:
            findings.append(f"ce result references unknown task {idx}")
        dist = np.asarray(c.get("distribution", ()), dtype=np.float64)
        if dist.size == 0 or abs(float(dist.sum()) - 1.0) > 1e-6 or np.any(dist < -1e-9):
            findings.append(f"ce result for task {idx}: not a distribution")
        if not c.get("is_ce", False):
            findings.append(f"ce result for task {idx}: deviation check failed")
    return findings

"""Normal-form games with joint-outcome payoff vectors.

A game has I players, each with a finite decision menu. The joint outcomes
are the H = n_1 * ... * n_I decision combinations, enumerated row-major with
the first player's decision varying slowest. Each player's payoff is a single
vector of H values, one per joint outcome, normalized to sum to 1 with every
entry non-negative.

Payoff vectors may be omitted (None) to model players whose preferences are
unknown; operations that need them raise PreconditionError.
"""

from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import InvalidGameError, PreconditionError

NORMALIZATION_TOL = 1e-9
RENORMALIZE_TOL = 1e-6


class RenormalizedPayoffWarning(UserWarning):
    """A payoff vector was off simplex by more than 1e-9 and got rescaled."""


@dataclass(frozen=True)
class DecisionSet:
    """One joint outcome: its 1-based index and the per-player decision labels."""

    index: int
    labels: tuple[str, ...]


@dataclass(frozen=True)
class Game:
    """Immutable normal-form game. Build with :func:`make_game` or :func:`load_game`."""

    players: tuple[str, ...]
    decisions: tuple[tuple[str, ...], ...]
    payoffs: Mapping[str, np.ndarray | None] = field(repr=False)

    @property
    def menu_sizes(self) -> tuple[int, ...]:
        return tuple(len(d) for d in self.decisions)

    @property
    def num_outcomes(self) -> int:
        return math.prod(self.menu_sizes)

    def decision_sets(self) -> tuple[DecisionSet, ...]:
        """All joint outcomes in canonical (row-major) order, 1-based indices."""
        combos = itertools.product(*self.decisions)
        return tuple(
            DecisionSet(index=i + 1, labels=labels) for i, labels in enumerate(combos)
        )

    def outcome_index(self, labels: Sequence[str]) -> int:
        """0-based canonical index of a joint decision combination."""
        if len(labels) != len(self.players):
            raise PreconditionError(
                f"expected {len(self.players)} decision labels, got {len(labels)}"
            )
        idx = 0
        for label, menu in zip(labels, self.decisions):
            try:
                pos = menu.index(label)
            except ValueError:
                raise PreconditionError(f"unknown decision label {label!r}") from None
            idx = idx * len(menu) + pos
        return idx

    def payoff(self, player: str) -> np.ndarray:
        """Payoff vector of a player; raises if the player or vector is missing."""
        if player not in self.payoffs:
            raise PreconditionError(f"unknown player {player!r}")
        v = self.payoffs[player]
        if v is None:
            raise PreconditionError(f"payoff vector for {player!r} is unknown")
        return v

    def payoff_matrix(self, player: str) -> np.ndarray:
        """Payoff vector reshaped to the menu grid (2-player convenience)."""
        return self.payoff(player).reshape(self.menu_sizes)


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.asarray(arr, dtype=np.float64).copy()
    out.flags.writeable = False
    return out


def make_game(
    players: Sequence[str],
    decisions: Sequence[Sequence[str]] | Mapping[str, Sequence[str]],
    payoffs: Mapping[str, Sequence[float] | None],
) -> Game:
    """Validate and construct a Game.

    Payoff vectors must be non-negative and sum to 1 within 1e-9; sums off by
    up to 1e-6 are renormalized with a RenormalizedPayoffWarning, anything
    worse raises InvalidGameError.
    """
    players_t = tuple(players)
    if len(players_t) < 2:
        raise InvalidGameError("a game needs at least two players")
    if len(set(players_t)) != len(players_t):
        raise InvalidGameError("duplicate player ids")

    if isinstance(decisions, Mapping):
        missing = [p for p in players_t if p not in decisions]
        if missing:
            raise InvalidGameError(f"decision menus missing for players {missing}")
        menus = tuple(tuple(decisions[p]) for p in players_t)
    else:
        if len(decisions) != len(players_t):
            raise InvalidGameError("one decision menu per player required")
        menus = tuple(tuple(m) for m in decisions)
    for p, menu in zip(players_t, menus):
        if len(menu) < 1:
            raise InvalidGameError(f"empty decision menu for {p!r}")
        if len(set(menu)) != len(menu):
            raise InvalidGameError(f"duplicate decision labels for {p!r}")

    h = math.prod(len(m) for m in menus)
    vectors: dict[str, np.ndarray | None] = {}
    for p in players_t:
        raw = payoffs.get(p)
        if raw is None:
            vectors[p] = None
            continue
        v = np.asarray(raw, dtype=np.float64)
        if v.shape != (h,):
            raise InvalidGameError(
                f"payoff vector for {p!r} has shape {v.shape}, expected ({h},)"
            )
        if not np.all(np.isfinite(v)):
            raise InvalidGameError(f"non-finite payoff entries for {p!r}")
        if np.any(v < -NORMALIZATION_TOL):
            raise InvalidGameError(f"negative payoff entries for {p!r}")
        v = np.maximum(v, 0.0)
        total = float(v.sum())
        if abs(total - 1.0) > RENORMALIZE_TOL:
            raise InvalidGameError(
                f"payoff vector for {p!r} sums to {total}, expected 1"
            )
        if abs(total - 1.0) > NORMALIZATION_TOL:
            warnings.warn(
                f"payoff vector for {p!r} renormalized (sum was {total})",
                RenormalizedPayoffWarning,
                stacklevel=2,
            )
            v = v / total
        vectors[p] = _freeze(v)

    extra = set(payoffs) - set(players_t)
    if extra:
        raise InvalidGameError(f"payoffs given for unknown players {sorted(extra)}")
    return Game(players=players_t, decisions=menus, payoffs=vectors)


def expected_reward(state: np.ndarray, payoff: np.ndarray) -> float:
    """Dot product of a distribution state with a payoff vector."""
    s = np.asarray(state, dtype=np.float64)
    v = np.asarray(payoff, dtype=np.float64)
    if s.shape != v.shape or s.ndim != 1:
        raise ValueError(f"shape mismatch: state {s.shape} vs payoff {v.shape}")
    return float(s @ v)


@dataclass
class ValidationReport:
    """Outcome of validate_game: per-check verdicts plus human-readable findings."""

    normalized: dict[str, bool]
    restriction_ok: dict[str, bool]
    equilibrium_count: int | None
    multiple_equilibria: bool | None
    findings: list[str]

    @property
    def ok(self) -> bool:
        checks = list(self.normalized.values()) + list(self.restriction_ok.values())
        if self.multiple_equilibria is not None:
            checks.append(self.multiple_equilibria)
        return all(checks)


def _restriction_pairs(game: Game, player_pos: int) -> list[tuple[int, int]]:
    """Outcome index pairs that differ only in player_pos's own decision.

    The validity restriction demands a player's payoff take distinct values
    across its own decisions whenever everyone else's decisions are fixed
    (otherwise indifference mixes degenerate).
    """
    sizes = game.menu_sizes
    pairs: list[tuple[int, int]] = []
    groups: dict[tuple[int, ...], list[int]] = {}
    for flat, combo in enumerate(itertools.product(*(range(n) for n in sizes))):
        key = combo[:player_pos] + combo[player_pos + 1 :]
        groups.setdefault(key, []).append(flat)
    for members in groups.values():
        pairs.extend(itertools.combinations(members, 2))
    return pairs


def validate_game(game: Game, tol: float = 1e-9) -> ValidationReport:
    """Check normalization, the unequal-reward restriction, and (for 2-player
    games with both payoffs known) that the game has at least two equilibria."""
    normalized: dict[str, bool] = {}
    restriction: dict[str, bool] = {}
    findings: list[str] = []
    for pos, p in enumerate(game.players):
        v = game.payoffs.get(p)
        if v is None:
            findings.append(f"{p}: payoff unknown, checks skipped")
            continue
        total = float(v.sum())
        normalized[p] = abs(total - 1.0) <= tol and bool(np.all(v >= -tol))
        if not normalized[p]:
            findings.append(f"{p}: not normalized (sum={total})")
        rest_ok = True
        for i, j in _restriction_pairs(game, pos):
            if abs(v[i] - v[j]) <= tol:
                rest_ok = False
                findings.append(
                    f"{p}: equal rewards at outcomes {i + 1} and {j + 1} "
                    f"(value {v[i]:.6g})"
                )
        restriction[p] = rest_ok

    eq_count: int | None = None
    multiple: bool | None = None
    all_known = all(game.payoffs.get(p) is not None for p in game.players)
    if len(game.players) == 2 and all_known:
        if all(restriction.values()):
            from .equilibrium import count_equilibria

            eq_count = count_equilibria(game)
            multiple = eq_count >= 2
            if not multiple:
                findings.append(
                    f"game has {eq_count} equilibrium; at least 2 required"
                )
        else:
            findings.append("equilibrium count skipped: restriction violated")
    return ValidationReport(
        normalized=normalized,
        restriction_ok=restriction,
        equilibrium_count=eq_count,
        multiple_equilibria=multiple,
        findings=findings,
    )


def game_to_dict(game: Game) -> dict:
    return {
        "players": list(game.players),
        "decisions": {p: list(m) for p, m in zip(game.players, game.decisions)},
        "payoffs": {
            p: (None if v is None else [float(x) for x in v])
            for p, v in game.payoffs.items()
            if v is not None
        },
    }


def game_from_dict(data: Mapping) -> Game:
    try:
        players = data["players"]
        decisions = data["decisions"]
    except (KeyError, TypeError) as exc:
        raise InvalidGameError(f"missing required field: {exc}") from None
    payoffs = data.get("payoffs", {})
    if not isinstance(payoffs, Mapping):
        raise InvalidGameError("payoffs must be a mapping of player id to vector")
    return make_game(players, decisions, payoffs)


def load_game(path) -> Game:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidGameError(
                f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
            ) from None
    return game_from_dict(data)


def save_game(game: Game, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(game_to_dict(game), fh, indent=2)
        fh.write("\n")

"""Nash and correlated equilibria for two-player views.

Correlated equilibria are joint distributions over the H outcome cells such
that no player, told its own component of a sampled cell, gains by swapping
to a different decision. The welfare-maximal CE comes out of a small LP; the
deviation checker `is_correlated_equilibrium` is written as direct sums,
deliberately not sharing code with the LP row builder, so the two act as
independent routes to the same definition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .games import Game
from .lp import LinearProgram, LPSolution, solve_lp

__all__ = [
    "CESolution",
    "NashEquilibrium",
    "CECheck",
    "correlated_equilibrium_program",
    "max_welfare_correlated_equilibrium",
    "solve_lp",
    "enumerate_pure_nash",
    "mixed_nash_2x2",
    "count_equilibria",
    "in_nash_payoff_hull",
    "is_correlated_equilibrium",
]

PURE_NE_SLACK = 1e-12
CE_TOL = 1e-9


@dataclass(frozen=True)
class CESolution:
    distribution: np.ndarray
    welfare: float
    status: str


@dataclass(frozen=True)
class NashEquilibrium:
    kind: str  # "pure" | "mixed"
    strategies: tuple[np.ndarray, ...]
    payoffs: tuple[float, ...]

    @property
    def welfare(self) -> float:
        return float(sum(self.payoffs))


@dataclass(frozen=True)
class CECheck:
    ok: bool
    max_violation: float
    worst: str | None = None

    def __bool__(self) -> bool:
        return self.ok


def _two_player(game: Game) -> tuple[np.ndarray, np.ndarray]:
    if len(game.players) != 2:
        raise PreconditionError("operation requires a 2-player view")
    return game.payoff_matrix(game.players[0]), game.payoff_matrix(game.players[1])


def correlated_equilibrium_program(game: Game) -> LinearProgram:
    """LP over cell probabilities rho whose feasible set is the CE polytope.

    One row per player per ordered pair of own decisions (told a, deviate to
    a'), stored in <= form; the objective is total welfare.
    """
    u1, u2 = _two_player(game)
    n1, n2 = u1.shape
    h = n1 * n2

    def flat(i: int, j: int) -> int:
        return i * n2 + j

    rows = []
    for a in range(n1):
        for a_alt in range(n1):
            if a_alt == a:
                continue
            row = np.zeros(h)
            for j in range(n2):
                row[flat(a, j)] = u1[a, j] - u1[a_alt, j]
            rows.append(-row)  # keep >= 0 rows as -row <= 0
    for b in range(n2):
        for b_alt in range(n2):
            if b_alt == b:
                continue
            row = np.zeros(h)
            for i in range(n1):
                row[flat(i, b)] = u2[i, b] - u2[i, b_alt]
            rows.append(-row)

    welfare = (u1 + u2).reshape(-1)
    return LinearProgram(
        objective=welfare,
        ineq_rows=np.array(rows),
        ineq_rhs=np.zeros(len(rows)),
        eq_rows=np.ones((1, h)),
        eq_rhs=np.array([1.0]),
        bounds=[(0.0, 1.0)] * h,
    )


def max_welfare_correlated_equilibrium(game: Game) -> CESolution:
    """Welfare-maximal correlated equilibrium of a 2-player view."""
    lp = correlated_equilibrium_program(game)
    sol: LPSolution = solve_lp(lp)
    if sol.status != "optimal":
        # any pure NE point mass is feasible for valid games, so this is a bug
        raise RuntimeError(f"CE program unexpectedly {sol.status}")
    dist = np.maximum(sol.x, 0.0)
    check = is_correlated_equilibrium(game, dist)
    if not check.ok:
        raise RuntimeError(
            f"CE solver output violates deviation check by {check.max_violation}"
        )
    return CESolution(distribution=dist, welfare=float(sol.objective), status="optimal")


def is_correlated_equilibrium(
    game: Game, distribution: np.ndarray, tol: float = CE_TOL
) -> CECheck:
    """Exhaustive deviation check, independent of the LP route.

    For each player and each decision it might be told, compare the expected
    payoff of obeying with every unilateral swap, conditioning on the told
    decision. Returns the worst slack found.
    """
    u1, u2 = _two_player(game)
    n1, n2 = u1.shape
    rho = np.asarray(distribution, dtype=np.float64).reshape(n1, n2)
    worst = 0.0
    worst_desc = None
    for a in range(n1):
        for a_alt in range(n1):
            if a_alt == a:
                continue
            gain = 0.0
            for j in range(n2):
                gain += rho[a, j] * (u1[a, j] - u1[a_alt, j])
            if gain < -worst:
                worst = -gain
                worst_desc = f"player 1 told {a + 1} prefers {a_alt + 1}"
    for b in range(n2):
        for b_alt in range(n2):
            if b_alt == b:
                continue
            gain = 0.0
            for i in range(n1):
                gain += rho[i, b] * (u2[i, b] - u2[i, b_alt])
            if gain < -worst:
                worst = -gain
                worst_desc = f"player 2 told {b + 1} prefers {b_alt + 1}"
    return CECheck(ok=worst <= tol, max_violation=worst, worst=worst_desc)


def enumerate_pure_nash(game: Game) -> list[NashEquilibrium]:
    """Every cell that is a mutual best response (1e-12 comparison slack)."""
    u1, u2 = _two_player(game)
    n1, n2 = u1.shape
    out = []
    for i in range(n1):
        for j in range(n2):
            if u1[i, j] < u1[:, j].max() - PURE_NE_SLACK:
                continue
            if u2[i, j] < u2[i, :].max() - PURE_NE_SLACK:
                continue
            s1 = np.zeros(n1)
            s1[i] = 1.0
            s2 = np.zeros(n2)
            s2[j] = 1.0
            out.append(
                NashEquilibrium(
                    kind="pure",
                    strategies=(s1, s2),
                    payoffs=(float(u1[i, j]), float(u2[i, j])),
                )
            )
    return out


def mixed_nash_2x2(game: Game) -> NashEquilibrium | None:
    """Interior mixed equilibrium of a 2x2 view, if the indifference system
    has a solution with both probabilities strictly inside (0, 1)."""
    u1, u2 = _two_player(game)
    if u1.shape != (2, 2):
        raise PreconditionError("mixed enumeration implemented for 2x2 views only")
    for pos, u in enumerate((u1, u2)):
        # own decision varies along axis `pos`, the opponent's stays fixed
        diffs = np.diff(u, axis=pos).ravel()
        if np.any(np.abs(diffs) <= 1e-12):
            raise PreconditionError(
                f"player {pos + 1} has equal payoffs across its own decisions; "
                "indifference system is degenerate"
            )

    # p = P(row plays first decision) chosen to make the column player indifferent
    den_p = u2[0, 0] - u2[1, 0] - u2[0, 1] + u2[1, 1]
    den_q = u1[0, 0] - u1[0, 1] - u1[1, 0] + u1[1, 1]
    if abs(den_p) < 1e-15 or abs(den_q) < 1e-15:
        return None
    p = (u2[1, 1] - u2[1, 0]) / den_p
    q = (u1[1, 1] - u1[0, 1]) / den_q
    if not (0.0 < p < 1.0 and 0.0 < q < 1.0):
        return None
    s1 = np.array([p, 1.0 - p])
    s2 = np.array([q, 1.0 - q])
    return NashEquilibrium(
        kind="mixed",
        strategies=(s1, s2),
        payoffs=(float(s1 @ u1 @ s2), float(s1 @ u2 @ s2)),
    )


def enumerate_equilibria(game: Game) -> list[NashEquilibrium]:
    """Pure equilibria for any 2-player view; plus the interior mixed one for 2x2."""
    out = enumerate_pure_nash(game)
    u1, _ = _two_player(game)
    if u1.shape == (2, 2):
        mixed = mixed_nash_2x2(game)
        if mixed is not None:
            out.append(mixed)
    return out


def count_equilibria(game: Game) -> int:
    return len(enumerate_equilibria(game))


def in_nash_payoff_hull(
    ne_payoffs: list[tuple[float, float]], point: tuple[float, float]
) -> bool:
    """Whether a payoff pair is a convex combination of NE payoff pairs."""
    if not ne_payoffs:
        raise PreconditionError("hull test needs at least one equilibrium payoff")
    pts = np.asarray(ne_payoffs, dtype=np.float64)
    k = pts.shape[0]
    target = np.asarray(point, dtype=np.float64)
    lp = LinearProgram(
        objective=np.zeros(k),
        eq_rows=np.vstack([pts.T, np.ones((1, k))]),
        eq_rhs=np.concatenate([target, [1.0]]),
        bounds=[(0.0, 1.0)] * k,
    )
    return solve_lp(lp).status == "optimal"

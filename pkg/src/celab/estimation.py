"""Recover an opponent's payoff vector from a stable joint distribution.

The inverse model ranks the known player's payoffs in ascending order, reads
directed preference pressure between ranked neighbours off the distribution,
and turns each window into a linear row over the unknown opponent payoffs.
Together with simplex constraints and the requirement that the implied 2x2
game still admits a mixed equilibrium, the rows form a small LP whose optimum
is the estimate. Infeasible systems are diagnosed (which row families cannot
hold simultaneously) and reported, never silently relaxed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .equilibrium import max_welfare_correlated_equilibrium
from .errors import PreconditionError
from .games import make_game
from .lp import LinearProgram, solve_lp

COMPARISON_TOL = 1e-9
SLACK_TOL = 1e-7
MIX_DEGENERATE_TOL = 1e-12


@dataclass(frozen=True)
class ReorderedView:
    """Inputs re-indexed so the known payoffs ascend.

    permutation maps sorted position -> original outcome index (0-based).
    """

    permutation: tuple[int, ...]
    v_bar_main: np.ndarray
    p_bar: np.ndarray
    labels_bar: tuple[str, ...]

    @property
    def size(self) -> int:
        return len(self.permutation)

    def original_index(self, position: int, rotated: bool = False) -> int:
        """Original outcome index carried by sorted slot `position`.

        The rotated reading shifts the opponent's sorted vector by one slot
        (first element moved to the end) before mapping back.
        """
        h = self.size
        if rotated:
            return self.permutation[(position + 1) % h]
        return self.permutation[position]

    def restore(self, sorted_values: np.ndarray, rotated: bool = False) -> np.ndarray:
        out = np.empty(self.size)
        for k, value in enumerate(np.asarray(sorted_values, dtype=np.float64)):
            out[self.original_index(k, rotated)] = value
        return out


def reorder(v_main, p_tilde, labels=None) -> ReorderedView:
    """Stable ascending sort keyed by the known payoffs; the distribution and
    labels ride along under the same permutation."""
    v = np.asarray(v_main, dtype=np.float64)
    p = np.asarray(p_tilde, dtype=np.float64)
    if v.ndim != 1 or v.shape != p.shape:
        raise PreconditionError(f"payoffs {v.shape} and distribution {p.shape} must match")
    if not np.all(np.isfinite(v)) or not np.all(np.isfinite(p)):
        raise PreconditionError("payoffs and distribution must be finite")
    if p.min() < -1e-9 or abs(p.sum() - 1.0) > 1e-6:
        raise PreconditionError("distribution must be a point on the simplex")
    if labels is None:
        labels = tuple(f"outcome_{i + 1}" for i in range(v.size))
    perm = tuple(int(i) for i in np.argsort(v, kind="stable"))
    return ReorderedView(
        permutation=perm,
        v_bar_main=v[list(perm)],
        p_bar=p[list(perm)],
        labels_bar=tuple(labels[i] for i in perm),
    )


@dataclass(frozen=True)
class PressureConstraint:
    """One linear row over the sorted opponent unknowns: coefficients . w
    (sense) rhs, where rhs folds the known-payoff terms."""

    kind: str  # "outgoing" | "incoming"
    position: int  # 1-based sorted slot h
    window: int  # neighbour offset L
    coefficients: np.ndarray
    rhs: float
    sense: str  # ">=" | "==" | "<="

    @property
    def family(self) -> str:
        return f"{self.kind} h={self.position} L={self.window}"


@dataclass(frozen=True)
class SkippedWindow:
    kind: str
    position: int
    window: int
    reason: str


def build_pressure_constraints(
    view: ReorderedView, comparison_tol: float = COMPARISON_TOL
) -> tuple[list[PressureConstraint], list[SkippedWindow]]:
    """Directed-pressure rows for every position and window length.

    At sorted position h with window L, the relevant mass triple is
    (a, b, c) = (p_bar[h-L], p_bar[h], p_bar[h+L]), indices cyclic. The sense
    tables treat b as a slope reading: rising mass constrains the outgoing
    difference one way, a plateau pins it to zero, falling mass flips it.
    The first matching branch wins; triples matching no branch (a strict
    valley) produce no row and are recorded.
    """
    h_count = view.size
    p = view.p_bar
    v1 = view.v_bar_main
    tol = comparison_tol

    def lt(x, y):
        return x < y - tol

    def le(x, y):
        return x <= y + tol

    rows: list[PressureConstraint] = []
    skipped: list[SkippedWindow] = []

    for window in range(1, h_count // 2 + 1):
        for k in range(h_count):
            ahead = (k + window) % h_count
            behind = (k - window) % h_count
            a, b, c = p[behind], p[k], p[ahead]

            # outgoing: pressure to climb from slot k toward higher payoff
            if lt(a, b) and le(b, c):
                sense = ">="
            elif le(a, b) and le(c, b):
                sense = "=="
            elif lt(b, a) and le(c, b):
                sense = "<="
            else:
                sense = None
            if sense is None:
                skipped.append(
                    SkippedWindow(
                        "outgoing", k + 1, window,
                        f"mass triple ({a:.6g}, {b:.6g}, {c:.6g}) matches no branch",
                    )
                )
            else:
                coeffs = np.zeros(h_count)
                coeffs[behind] -= p[behind]
                coeffs[k] += p[behind]
                constant = p[ahead] * (v1[ahead] - v1[k])
                rows.append(
                    PressureConstraint(
                        kind="outgoing", position=k + 1, window=window,
                        coefficients=coeffs, rhs=-constant, sense=sense,
                    )
                )

            # incoming: pressure arriving at slot k from the lower neighbour;
            # at the top slot the single-step row compares against the bottom
            # slot instead of its ranked predecessor
            if lt(b, a) and le(c, b):
                sense = ">="
            elif le(a, b) and le(c, b):
                sense = "=="
            elif lt(a, b) and le(b, c):
                sense = "<="
            else:
                sense = None
            if sense is None:
                skipped.append(
                    SkippedWindow(
                        "incoming", k + 1, window,
                        f"mass triple ({a:.6g}, {b:.6g}, {c:.6g}) matches no branch",
                    )
                )
            else:
                partner = 0 if (k == h_count - 1 and window == 1) else behind
                coeffs = np.zeros(h_count)
                coeffs[k] -= p[k]
                coeffs[partner] += p[k]
                constant = p[k] * (v1[k] - v1[behind])
                rows.append(
                    PressureConstraint(
                        kind="incoming", position=k + 1, window=window,
                        coefficients=coeffs, rhs=-constant, sense=sense,
                    )
                )
    return rows, skipped


@dataclass
class RoundTrip:
    """Re-solving the 2x2 game with the estimate, compared to the input."""

    distribution: np.ndarray
    l_inf: float


@dataclass
class EstimationResult:
    status: str  # "ok" | "infeasible"
    estimate: np.ndarray | None
    view: ReorderedView
    constraints: list[PressureConstraint]
    skipped: list[SkippedWindow]
    branch: str | None
    objective: float | None
    main_mix_probability: float | None
    violated: list[str]
    round_trip: RoundTrip | None
    rotated: bool = False


def _main_mix_probability(v_main: np.ndarray) -> float | None:
    """Opponent mixing weight q on its first decision that leaves the known
    player indifferent; None when the indifference system is degenerate."""
    v1, v2, v3, v4 = v_main
    den = v1 - v3 - v2 + v4
    if abs(den) < MIX_DEGENERATE_TOL:
        return None
    return (v4 - v2) / den


def _branch_rows(view: ReorderedView, rotated: bool) -> list[np.ndarray]:
    """The opponent's own-decision payoff gaps (top row: w1-w2, bottom row:
    w4-w3) expressed over the sorted unknowns."""
    h = view.size
    inverse = np.empty(h, dtype=int)
    for k in range(h):
        inverse[view.original_index(k, rotated)] = k
    top = np.zeros(h)
    top[inverse[0]] += 1.0
    top[inverse[1]] -= 1.0
    bottom = np.zeros(h)
    bottom[inverse[3]] += 1.0
    bottom[inverse[2]] -= 1.0
    return [top, bottom]


def _assemble(view, rows, objective, extra_ineq, extra_rhs):
    h = view.size
    ineq_rows: list[np.ndarray] = list(extra_ineq)
    ineq_rhs: list[float] = list(extra_rhs)
    eq_rows: list[np.ndarray] = [np.ones(h)]
    eq_rhs: list[float] = [1.0]
    for row in rows:
        if row.sense == ">=":
            ineq_rows.append(-row.coefficients)
            ineq_rhs.append(-row.rhs)
        elif row.sense == "<=":
            ineq_rows.append(row.coefficients)
            ineq_rhs.append(row.rhs)
        else:
            eq_rows.append(row.coefficients)
            eq_rhs.append(row.rhs)
    return LinearProgram(
        objective=objective,
        ineq_rows=np.array(ineq_rows),
        ineq_rhs=np.array(ineq_rhs),
        eq_rows=np.array(eq_rows),
        eq_rhs=np.array(eq_rhs),
        bounds=[(0.0, 1.0)] * h,
    )


def _diagnose(view, rows) -> list[str]:
    """Elastic relaxation: one slack per pressure row, minimize total slack,
    keep the simplex constraints hard. Rows needing slack name the violated
    families."""
    h = view.size
    labels: list[str] = []
    ineq_rows: list[list[float]] = []
    ineq_rhs: list[float] = []
    eq_rows: list[list[float]] = []
    eq_rhs: list[float] = []
    n_slack = sum(2 if r.sense == "==" else 1 for r in rows)
    total = h + n_slack
    cursor = h

    def padded(core: np.ndarray, slack_cols: dict[int, float]) -> list[float]:
        row = np.zeros(total)
        row[:h] = core
        for col, val in slack_cols.items():
            row[col] = val
        return row.tolist()

    for r in rows:
        if r.sense == ">=":
            ineq_rows.append(padded(-r.coefficients, {cursor: -1.0}))
            ineq_rhs.append(-r.rhs)
            labels.append(r.family)
            cursor += 1
        elif r.sense == "<=":
            ineq_rows.append(padded(r.coefficients, {cursor: -1.0}))
            ineq_rhs.append(r.rhs)
            labels.append(r.family)
            cursor += 1
        else:
            eq_rows.append(padded(r.coefficients, {cursor: 1.0, cursor + 1: -1.0}))
            eq_rhs.append(r.rhs)
            labels.append(r.family)
            labels.append(r.family)
            cursor += 2
    simplex = np.zeros(total)
    simplex[:h] = 1.0
    eq_rows.append(simplex.tolist())
    eq_rhs.append(1.0)

    objective = np.zeros(total)
    objective[h:] = -1.0
    bounds = [(0.0, 1.0)] * h + [(0.0, None)] * n_slack
    solution = solve_lp(
        LinearProgram(
            objective=objective,
            ineq_rows=np.array(ineq_rows),
            ineq_rhs=np.array(ineq_rhs),
            eq_rows=np.array(eq_rows),
            eq_rhs=np.array(eq_rhs),
            bounds=bounds,
        )
    )
    if solution.status != "optimal":
        return ["pressure system (diagnosis LP failed)"]
    slacks = solution.x[h:]
    violated = []
    for label, slack in zip(labels, slacks):
        if slack > SLACK_TOL and label not in violated:
            violated.append(label)
    if not violated:
        violated.append("mixed-equilibrium sign branches (both orientations infeasible)")
    return violated


def estimate_payoff(
    v_main,
    p_tilde,
    menu: tuple[int, int] = (2, 2),
    comparison_tol: float = COMPARISON_TOL,
    rotate_opponent: bool = False,
    round_trip: bool = True,
) -> EstimationResult:
    """Estimate the opponent payoff vector that best explains `p_tilde`.

    Maximizes the expected opponent reward under the observed distribution,
    subject to the pressure rows, the simplex constraints, and the
    requirement that the estimated side still admits a mixed equilibrium:
    the opponent's own-decision payoff gaps must share a sign, so that the
    implied mixing weight lands in [0, 1]. Both sign branches are solved and
    the higher objective wins.

    The known side's own mixing weight (from `v_main` alone) is reported as
    a diagnostic; it does not gate the solve.
    """
    v = np.asarray(v_main, dtype=np.float64)
    if menu != (2, 2):
        raise PreconditionError(
            f"estimation is defined for 2x2 interactions, got menu {menu}"
        )
    if v.size != 4:
        raise PreconditionError(f"a 2x2 interaction has 4 outcomes, got {v.size}")
    view = reorder(v, p_tilde)
    rows, skipped = build_pressure_constraints(view, comparison_tol)

    result = EstimationResult(
        status="infeasible",
        estimate=None,
        view=view,
        constraints=rows,
        skipped=skipped,
        branch=None,
        objective=None,
        main_mix_probability=None,
        violated=[],
        round_trip=None,
        rotated=rotate_opponent,
    )

    result.main_mix_probability = _main_mix_probability(v)

    objective = np.asarray(p_tilde, dtype=np.float64)[
        [view.original_index(k, rotate_opponent) for k in range(view.size)]
    ]
    top, bottom = _branch_rows(view, rotate_opponent)
    branches = (
        ("gaps_nonnegative", [-top, -bottom], [0.0, 0.0]),
        ("gaps_nonpositive", [top, bottom], [0.0, 0.0]),
    )
    best = None
    for name, extra_ineq, extra_rhs in branches:
        solution = solve_lp(_assemble(view, rows, objective, extra_ineq, extra_rhs))
        if solution.status == "optimal":
            if best is None or solution.objective > best[1].objective + 1e-12:
                best = (name, solution)

    if best is None:
        result.violated = _diagnose(view, rows)
        return result

    name, solution = best
    estimate = view.restore(np.clip(solution.x, 0.0, 1.0), rotate_opponent)
    result.status = "ok"
    result.branch = name
    result.objective = solution.objective
    result.estimate = estimate
    if round_trip:
        game = make_game(
            ["known", "estimated"],
            {"known": ["a1", "a2"], "estimated": ["b1", "b2"]},
            {"known": v, "estimated": estimate},
        )
        ce = max_welfare_correlated_equilibrium(game)
        p = np.asarray(p_tilde, dtype=np.float64)
        result.round_trip = RoundTrip(
            distribution=ce.distribution,
            l_inf=float(np.abs(ce.distribution - p).max()),
        )
    return result


def constraint_slacks(result: EstimationResult) -> np.ndarray:
    """Signed satisfaction margin of each emitted row at the estimate
    (>= -1e-9 for feasible solutions; equality rows contribute -|residual|)."""
    if result.estimate is None:
        raise PreconditionError("no estimate to evaluate")
    w_bar = np.array(
        [
            result.estimate[result.view.original_index(k, result.rotated)]
            for k in range(result.view.size)
        ]
    )
    margins = []
    for row in result.constraints:
        value = float(row.coefficients @ w_bar)
        if row.sense == ">=":
            margins.append(value - row.rhs)
        elif row.sense == "<=":
            margins.append(row.rhs - value)
        else:
            margins.append(-abs(value - row.rhs))
    return np.array(margins)


def estimation_report(result: EstimationResult) -> dict:
    """JSON-ready report: permutation, constraint ledger, LP outcome, and the
    round-trip check when one ran."""
    report = {
        "status": result.status,
        "permutation": list(result.view.permutation),
        "sorted_known_payoffs": result.view.v_bar_main.tolist(),
        "sorted_distribution": result.view.p_bar.tolist(),
        "constraints": [
            {
                "kind": row.kind,
                "position": row.position,
                "window": row.window,
                "coefficients": row.coefficients.tolist(),
                "rhs": row.rhs,
                "sense": row.sense,
            }
            for row in result.constraints
        ],
        "skipped_windows": [
            {
                "kind": s.kind,
                "position": s.position,
                "window": s.window,
                "reason": s.reason,
            }
            for s in result.skipped
        ],
        "main_mix_probability": result.main_mix_probability,
        "branch": result.branch,
        "objective": result.objective,
        "estimate": None if result.estimate is None else result.estimate.tolist(),
        "violated_families": result.violated,
        "round_trip": None
        if result.round_trip is None
        else {
            "distribution": result.round_trip.distribution.tolist(),
            "l_inf": result.round_trip.l_inf,
        },
    }
    return report

"""Probability-simplex environment: states, step actions, rollouts.

A state is a distribution over the H joint outcomes. An action nudges each of
the first H-1 components by -theta, 0, or +theta; the last component absorbs
the slack. Transitions clamp to [0,1] and, when the absorbing component would
go negative, roll back the applied increases proportionally, so every reached
state is a valid simplex point.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import PreconditionError

SIMPLEX_TOL = 1e-12


def default_state(h: int) -> np.ndarray:
    """The uniform start state (1/H per outcome)."""
    if h < 2:
        raise PreconditionError("need at least two outcomes")
    return np.full(h, 1.0 / h)


def is_simplex_point(state: np.ndarray, tol: float = SIMPLEX_TOL) -> bool:
    s = np.asarray(state)
    return bool(
        np.all(s >= -tol) and np.all(s <= 1 + tol) and abs(float(s.sum()) - 1.0) <= tol
    )


def min_steps(step_size: float) -> int:
    """Smallest N that keeps every grid state reachable within one round."""
    return math.ceil(1.0 / step_size)


def enumerate_actions(h: int, step_size: float) -> np.ndarray:
    """All 3^(H-1) delta rows in canonical order.

    Ternary counting with the first component most significant and digits
    mapping 0 -> -theta, 1 -> 0, 2 -> +theta.
    """
    if h < 2:
        raise PreconditionError("need at least two outcomes")
    if not (0.0 < step_size <= 1.0):
        raise PreconditionError(f"step size must lie in (0, 1], got {step_size}")
    j = 3 ** (h - 1)
    digits = np.zeros((j, h - 1), dtype=np.int64)
    idx = np.arange(j)
    for pos in range(h - 1):
        digits[:, pos] = (idx // 3 ** (h - 2 - pos)) % 3
    return (digits - 1).astype(np.float64) * step_size


def apply_action(state: np.ndarray, deltas: np.ndarray) -> np.ndarray:
    """Apply delta rows to states; both arguments may carry batch dimensions.

    Clamp each adjusted component to [0,1]; if the absorbing component would
    drop below zero, scale back the applied increases in proportion.
    """
    s = np.asarray(state, dtype=np.float64)
    d = np.asarray(deltas, dtype=np.float64)
    if s.shape[-1] != d.shape[-1] + 1:
        raise PreconditionError(
            f"state width {s.shape[-1]} does not match delta width {d.shape[-1]} + 1"
        )
    head = s[..., :-1]
    tentative = np.clip(head + d, 0.0, 1.0)
    increases = np.maximum(tentative - head, 0.0)
    deficit = np.maximum(tentative.sum(axis=-1) - 1.0, 0.0)
    inc_total = increases.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(inc_total > 0.0, deficit / np.where(inc_total > 0, inc_total, 1.0), 0.0)
    adjusted = np.maximum(tentative - increases * scale[..., None], 0.0)
    last = np.maximum(1.0 - adjusted.sum(axis=-1), 0.0)
    return np.concatenate([adjusted, last[..., None]], axis=-1)


@dataclass
class EpisodeBatch:
    """States and action choices for M rounds of one player.

    states[m, n] is the state after n steps (states[:, 0] is the start state);
    action_indices[m, n] produced states[m, n + 1].
    """

    states: np.ndarray  # (M, N, H)
    action_indices: np.ndarray  # (M, N-1) into the canonical action order
    step_size: float

    @property
    def rounds(self) -> int:
        return self.states.shape[0]

    @property
    def steps(self) -> int:
        return self.states.shape[1]

    @property
    def num_actions(self) -> int:
        return 3 ** (self.states.shape[2] - 1)

    def choices_one_hot(self) -> np.ndarray:
        """(M, N-1, J) one-hot encoding of the recorded action indices."""
        j = self.num_actions
        eye = np.eye(j)
        return eye[self.action_indices]


def sample_index(distribution: np.ndarray, u: float | np.ndarray) -> np.ndarray:
    """Inverse-CDF sampling: count of prefix sums <= u, clipped to range.

    Vectorized over leading dimensions of `distribution` and `u`.
    """
    p = np.asarray(distribution, dtype=np.float64)
    cum = np.cumsum(p, axis=-1)
    uu = np.asarray(u, dtype=np.float64)[..., None]
    idx = (cum <= uu).sum(axis=-1)
    return np.minimum(idx, p.shape[-1] - 1)


def rollout(
    policy: Callable[[np.ndarray, np.ndarray], np.ndarray],
    rounds: int,
    steps: int,
    step_size: float,
    rngs: Sequence[np.random.Generator],
    start: np.ndarray | None = None,
    actions: np.ndarray | None = None,
) -> EpisodeBatch:
    """Run M independent rounds of N-1 policy steps from the uniform start.

    `policy` maps (current states (M,H), previous states (M,H)) to action
    distributions (M,J). One RNG per round; round m draws only from rngs[m],
    so batches are reproducible regardless of how rounds are scheduled.
    """
    if rounds < 1:
        raise PreconditionError("need at least one round")
    if steps < min_steps(step_size):
        raise PreconditionError(
            f"steps must satisfy N >= ceil(1/step_size) so every grid state "
            f"stays reachable; got N={steps}, need >= {min_steps(step_size)}"
        )
    if len(rngs) != rounds:
        raise PreconditionError("one RNG per round required")
    if actions is None:
        if start is None:
            raise PreconditionError("pass start or actions to fix the state width")
        actions = enumerate_actions(np.asarray(start).size, step_size)
    h = actions.shape[1] + 1
    if start is None:
        start = default_state(h)

    uniforms = np.stack([rng.random(steps - 1) for rng in rngs])  # (M, N-1)
    states = np.empty((rounds, steps, h))
    idx = np.empty((rounds, steps - 1), dtype=np.int64)
    states[:, 0] = start
    prev = np.broadcast_to(start, (rounds, h)).copy()
    cur = prev.copy()
    for n in range(steps - 1):
        probs = policy(cur, prev)
        chosen = sample_index(probs, uniforms[:, n])
        idx[:, n] = chosen
        nxt = apply_action(cur, actions[chosen])
        states[:, n + 1] = nxt
        prev, cur = cur, nxt
    return EpisodeBatch(states=states, action_indices=idx, step_size=step_size)


def average_states(batch_a: EpisodeBatch, batch_b: EpisodeBatch) -> np.ndarray:
    """Element-wise mean of two players' state tensors, shape (M, N, H)."""
    if batch_a.states.shape != batch_b.states.shape:
        raise ValueError(
            f"state shapes differ: {batch_a.states.shape} vs {batch_b.states.shape}"
        )
    return (batch_a.states + batch_b.states) / 2.0


def batch_to_csv(batch: EpisodeBatch, path) -> None:
    """Write one row per recorded state: round, step, action_index, rho_1..rho_H.

    The action index on a row is the action that produced that state; the
    start-state rows carry -1.
    """
    h = batch.states.shape[2]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["round", "step", "action_index"] + [f"rho_{i+1}" for i in range(h)])
        for m in range(batch.rounds):
            for n in range(batch.steps):
                action = -1 if n == 0 else int(batch.action_indices[m, n - 1])
                writer.writerow(
                    [m + 1, n + 1, action] + [repr(float(x)) for x in batch.states[m, n]]
                )

"""Two-input feed-forward policy network, plain numpy.

Topology: two linear analyzer layers (one per input state) whose outputs are
concatenated, three dense layers with LeakyReLU (slope 0.2), three dense
layers at double width with ReLU, and a softmax output over the J actions.
Forward passes record a trace so the analytic backward pass can run without
any autodiff framework.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .env import sample_index
from .errors import NumericError, PreconditionError

LEAKY_SLOPE = 0.2
PROB_EPS = 1e-12

# activation per layer position; analyzers are linear (assumption recorded in
# package docs: only the later blocks carry activation labels)
_ACTIVATIONS = (
    "linear",
    "linear",
    "leaky",
    "leaky",
    "leaky",
    "relu",
    "relu",
    "relu",
    "softmax",
)
_LAYER_NAMES = (
    "analyzer_a",
    "analyzer_b",
    "dense_1",
    "dense_2",
    "dense_3",
    "wide_1",
    "wide_2",
    "wide_3",
    "output",
)


@dataclass
class PolicyParams:
    """Weights and biases for all nine layers, with the widths that shaped them."""

    h: int
    j: int
    width_in: int
    width_mid: int
    weights: list[np.ndarray] = field(repr=False)
    biases: list[np.ndarray] = field(repr=False)

    def copy(self) -> "PolicyParams":
        return PolicyParams(
            h=self.h,
            j=self.j,
            width_in=self.width_in,
            width_mid=self.width_mid,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )


def layer_dims(h: int, j: int, width_in: int, width_mid: int) -> list[tuple[int, int]]:
    wide = 2 * width_mid
    return [
        (h, width_in),
        (h, width_in),
        (2 * width_in, width_mid),
        (width_mid, width_mid),
        (width_mid, width_mid),
        (width_mid, wide),
        (wide, wide),
        (wide, wide),
        (wide, j),
    ]


def init_policy(
    h: int, j: int, width_in: int, width_mid: int, rng: np.random.Generator
) -> PolicyParams:
    """Uniform(-limit, limit) weights with limit = sqrt(6/(fan_in+fan_out)); zero biases."""
    weights = []
    biases = []
    for fan_in, fan_out in layer_dims(h, j, width_in, width_mid):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return PolicyParams(
        h=h, j=j, width_in=width_in, width_mid=width_mid, weights=weights, biases=biases
    )


@dataclass
class ForwardTrace:
    """Per-layer inputs and pre-activations from one forward pass (2-D batch)."""

    current: np.ndarray
    previous: np.ndarray
    layer_inputs: list[np.ndarray]
    pre_activations: list[np.ndarray]
    probs: np.ndarray


def _activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "linear":
        return z
    if name == "leaky":
        return np.where(z > 0, z, LEAKY_SLOPE * z)
    if name == "relu":
        return np.maximum(z, 0.0)
    raise ValueError(name)


def forward(
    params: PolicyParams, current: np.ndarray, previous: np.ndarray
) -> tuple[np.ndarray, ForwardTrace]:
    """Action distribution for (current, previous) state pairs.

    Accepts single states (H,) or batches (B, H); the returned probabilities
    match the input arity, while the trace always stores 2-D arrays.
    """
    cur = np.atleast_2d(np.asarray(current, dtype=np.float64))
    prev = np.atleast_2d(np.asarray(previous, dtype=np.float64))
    if cur.shape != prev.shape or cur.shape[1] != params.h:
        raise PreconditionError(
            f"state widths {cur.shape}/{prev.shape} do not match H={params.h}"
        )

    layer_inputs: list[np.ndarray] = []
    pre_activations: list[np.ndarray] = []

    def dense(i: int, x: np.ndarray) -> np.ndarray:
        z = x @ params.weights[i] + params.biases[i]
        if not np.all(np.isfinite(z)):
            raise NumericError(f"non-finite activation in layer {i} ({_LAYER_NAMES[i]})")
        layer_inputs.append(x)
        pre_activations.append(z)
        return z

    a = _activate("linear", dense(0, cur))
    b = _activate("linear", dense(1, prev))
    x = np.concatenate([a, b], axis=1)
    for i in range(2, 8):
        x = _activate(_ACTIVATIONS[i], dense(i, x))
    logits = dense(8, x)
    shifted = logits - logits.max(axis=1, keepdims=True)
    expz = np.exp(shifted)
    probs = expz / expz.sum(axis=1, keepdims=True)

    trace = ForwardTrace(
        current=cur,
        previous=prev,
        layer_inputs=layer_inputs,
        pre_activations=pre_activations,
        probs=probs,
    )
    out = probs[0] if np.asarray(current).ndim == 1 else probs
    return out, trace


def sample_action(distribution: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw over the canonical action order."""
    return int(sample_index(distribution, rng.random()))


def loss_value(
    probs: np.ndarray,
    targets: np.ndarray,
    weights: np.ndarray,
    variant: str = "two_sided",
) -> float:
    """Weighted logarithmic loss, summed over the batch.

    two_sided: every action's probability enters (chosen via log p, the rest
    via log(1-p)), so a positive weight pushes unchosen probabilities down.
    chosen_only: classic score-function form, -w log p_chosen.
    """
    p = np.clip(np.atleast_2d(probs), PROB_EPS, 1.0 - PROB_EPS)
    y = np.atleast_2d(targets)
    w = np.atleast_1d(weights)
    if variant == "two_sided":
        per_unit = -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)).sum(axis=1)
    elif variant == "chosen_only":
        per_unit = -(y * np.log(p)).sum(axis=1)
    else:
        raise PreconditionError(f"unknown loss variant {variant!r}")
    return float((w * per_unit).sum())


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]


def gradients(
    params: PolicyParams,
    trace: ForwardTrace,
    targets: np.ndarray,
    weights: np.ndarray | float,
    variant: str = "two_sided",
) -> Gradients:
    """Analytic gradient of the weighted log loss, summed over the batch.

    targets: one-hot rows (B, J); weights: per-row scalars (or one scalar).
    """
    p_raw = trace.probs
    batch = p_raw.shape[0]
    y = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    w = np.broadcast_to(np.asarray(weights, dtype=np.float64), (batch,))
    p = np.clip(p_raw, PROB_EPS, 1.0 - PROB_EPS)
    if not np.all((p > 0.0) & (p < 1.0)):
        raise NumericError("probabilities escaped the epsilon guard")

    # dL/dp per unit, then through the softmax jacobian:
    # dL/dz_j = p_j * (g_j - sum_k g_k p_k)
    if variant == "two_sided":
        g = -(y / p) + (1.0 - y) / (1.0 - p)
    elif variant == "chosen_only":
        g = -(y / p)
    else:
        raise PreconditionError(f"unknown loss variant {variant!r}")
    g = g * w[:, None]
    delta = p_raw * (g - (g * p_raw).sum(axis=1, keepdims=True))

    grad_w = [np.zeros_like(wt) for wt in params.weights]
    grad_b = [np.zeros_like(bs) for bs in params.biases]

    for i in range(8, 1, -1):
        x = trace.layer_inputs[i]
        grad_w[i] = x.T @ delta
        grad_b[i] = delta.sum(axis=0)
        upstream = delta @ params.weights[i].T
        below = i - 1
        if below == 1:
            break
        z_below = trace.pre_activations[below]
        act = _ACTIVATIONS[below]
        if act == "leaky":
            delta = upstream * np.where(z_below > 0, 1.0, LEAKY_SLOPE)
        elif act == "relu":
            delta = upstream * (z_below > 0)
        else:
            raise AssertionError(act)

    # upstream now spans the concatenated analyzer outputs (both linear)
    w_in = params.width_in
    da, db = upstream[:, :w_in], upstream[:, w_in:]
    grad_w[0] = trace.current.T @ da
    grad_b[0] = da.sum(axis=0)
    grad_w[1] = trace.previous.T @ db
    grad_b[1] = db.sum(axis=0)
    return Gradients(weights=grad_w, biases=grad_b)


def save_checkpoint(
    params: PolicyParams, path, seed: int | None = None, config: dict | None = None
) -> None:
    """Bit-exact JSON checkpoint (floats survive the repr round trip).

    `config` is an optional resolved-configuration mapping stored verbatim so
    the file records how it was produced.
    """
    payload = {
        "widths": {
            "h": params.h,
            "j": params.j,
            "width_in": params.width_in,
            "width_mid": params.width_mid,
        },
        "seed": seed,
        "config": config,
        "layers": [
            {
                "name": _LAYER_NAMES[i],
                "weights": params.weights[i].tolist(),
                "bias": params.biases[i].tolist(),
            }
            for i in range(9)
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_checkpoint(path) -> tuple[PolicyParams, int | None]:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    widths = payload["widths"]
    names = [layer["name"] for layer in payload["layers"]]
    if tuple(names) != _LAYER_NAMES:
        raise PreconditionError(f"unexpected layer order {names}")
    params = PolicyParams(
        h=widths["h"],
        j=widths["j"],
        width_in=widths["width_in"],
        width_mid=widths["width_mid"],
        weights=[np.array(layer["weights"], dtype=np.float64) for layer in payload["layers"]],
        biases=[np.array(layer["bias"], dtype=np.float64) for layer in payload["layers"]],
    )
    expected = layer_dims(params.h, params.j, params.width_in, params.width_mid)
    for wt, dims in zip(params.weights, expected):
        if wt.shape != dims:
            raise PreconditionError(f"checkpoint weight shape {wt.shape} != {dims}")
    return params, payload.get("seed")


def policy_fn(params: PolicyParams):
    """Rollout-friendly closure: (current, previous) batches -> probabilities."""

    def fn(cur: np.ndarray, prev: np.ndarray) -> np.ndarray:
        probs, _ = forward(params, cur, prev)
        return probs

    return fn

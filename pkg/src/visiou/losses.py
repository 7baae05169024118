"""Detector losses and the sign-based refinement operator.

The total objective is the sum of a softmax classification loss, a
SmoothL1 box regression loss (with steepness ``sigma`` and weight
``eta``), and a per-dimension direction ("sign") softmax loss weighted
by ``gamma``. Gradients are hand-derived closed forms; the test suite
checks them against central finite differences.

SmoothL1 with parameter sigma:

    0.5 * sigma^2 * x^2        if |x| < 1 / sigma^2
    |x| - 0.5 / sigma^2        otherwise

which is continuous and C^1 at the branch point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .boxcodec import NEG, BoxDeltas, SignTargets

BG = "bg"
PED = "ped"

DIMS = ("x", "y", "w", "h")


@dataclass(frozen=True)
class SignProbs:
    """Direction distributions, one (neg, pos) pair per box dimension.

    Each pair must be a softmax output: components in [0,1] summing
    to 1 within a small tolerance.
    """

    x: tuple[float, float]
    y: tuple[float, float]
    w: tuple[float, float]
    h: tuple[float, float]

    def __post_init__(self):
        for pair in self.as_rows():
            lo, hi = pair
            if not (-1e-9 <= lo <= 1.0 + 1e-9 and -1e-9 <= hi <= 1.0 + 1e-9):
                raise ValueError(f"sign probabilities must be in [0,1], got {pair}")
            if abs(lo + hi - 1.0) > 1e-6:
                raise ValueError(f"sign probability pair must sum to 1, got {pair}")

    def as_rows(self) -> tuple[tuple[float, float], ...]:
        return (self.x, self.y, self.w, self.h)

    @classmethod
    def uniform(cls) -> "SignProbs":
        return cls((0.5, 0.5), (0.5, 0.5), (0.5, 0.5), (0.5, 0.5))

    @classmethod
    def from_array(cls, rows) -> "SignProbs":
        rows = np.asarray(rows, dtype=float)
        if rows.shape != (4, 2):
            raise ValueError(f"expected a (4,2) array of sign probabilities, got {rows.shape}")
        return cls(*(tuple(map(float, r)) for r in rows))


@dataclass(frozen=True)
class LossConfig:
    """Loss weights: gamma for the sign loss, sigma/eta for SmoothL1."""

    gamma: float = 0.1
    sigma: float = 1.0
    eta: float = 1.0

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.sigma <= 0:
            raise ValueError("sigma must be > 0")
        if self.eta <= 0:
            raise ValueError("eta must be > 0")


def _log_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(z: np.ndarray) -> np.ndarray:
    return np.exp(_log_softmax(np.asarray(z, dtype=float)))


def cls_loss(logits, labels: Sequence[str]) -> tuple[float, np.ndarray]:
    """Mean softmax cross-entropy over (background, pedestrian) logits.

    Returns the loss and its gradient with respect to the logits,
    shaped like the input.
    """
    z = np.asarray(logits, dtype=float)
    if z.ndim != 2 or z.shape[1] != 2:
        raise ValueError(f"expected (N,2) logits, got shape {z.shape}")
    if z.shape[0] == 0:
        raise ValueError("cls_loss needs at least one sample")
    if len(labels) != z.shape[0]:
        raise ValueError("labels and logits length mismatch")
    idx = np.array([0 if lab == BG else 1 for lab in labels])
    for lab in labels:
        if lab not in (BG, PED):
            raise ValueError(f"label must be {BG!r} or {PED!r}, got {lab!r}")
    n = z.shape[0]
    logp = _log_softmax(z)
    loss = -float(logp[np.arange(n), idx].mean())
    grad = np.exp(logp)
    grad[np.arange(n), idx] -= 1.0
    return loss, grad / n


def smooth_l1(x: float, sigma: float) -> float:
    cut = 1.0 / (sigma * sigma)
    ax = abs(x)
    if ax < cut:
        return 0.5 * sigma * sigma * x * x
    return ax - 0.5 * cut


def smooth_l1_grad(x: float, sigma: float) -> float:
    cut = 1.0 / (sigma * sigma)
    if abs(x) < cut:
        return sigma * sigma * x
    return math.copysign(1.0, x)


def _deltas_array(items: Sequence[BoxDeltas]) -> np.ndarray:
    return np.array([d.as_tuple() for d in items], dtype=float).reshape(len(items), 4)


def box_loss(
    pred: Sequence[BoxDeltas],
    target: Sequence[BoxDeltas],
    cfg: LossConfig,
    n_reg: int | None = None,
) -> tuple[float, np.ndarray]:
    """SmoothL1 regression loss, eta/N_reg * sum over samples and dims.

    `n_reg` defaults to the number of samples; it is accepted
    explicitly so batches normalized by a global positive count stay
    unambiguous. Gradient is with respect to `pred`, shape (N, 4).
    """
    if len(pred) != len(target):
        raise ValueError("pred and target length mismatch")
    if len(pred) == 0:
        raise ValueError("box_loss needs at least one sample")
    if n_reg is None:
        n_reg = len(pred)
    if n_reg <= 0:
        raise ValueError("n_reg must be positive")
    diff = _deltas_array(pred) - _deltas_array(target)
    sig2 = cfg.sigma * cfg.sigma
    cut = 1.0 / sig2
    quad = np.abs(diff) < cut
    vals = np.where(quad, 0.5 * sig2 * diff * diff, np.abs(diff) - 0.5 * cut)
    grads = np.where(quad, sig2 * diff, np.sign(diff))
    scale = cfg.eta / n_reg
    return float(scale * vals.sum()), scale * grads


def sign_loss(
    probs: Sequence[SignProbs],
    targets: Sequence[SignTargets],
    cfg: LossConfig,
    n_reg: int,
) -> tuple[float, np.ndarray]:
    """Direction-prediction loss over positive samples.

    gamma/N_reg * sum over dims and samples of the cross-entropy of
    the target sign class. Returns the gradient with respect to the
    pre-softmax logits, shape (N, 4, 2); with ``n_reg == 0`` the loss
    is 0 by contract and no division happens.
    """
    if len(probs) != len(targets):
        raise ValueError("probs and targets length mismatch")
    if n_reg < 0:
        raise ValueError("n_reg must be >= 0")
    if n_reg == 0:
        return 0.0, np.zeros((len(probs), 4, 2))
    p = np.array([sp.as_rows() for sp in probs], dtype=float).reshape(len(probs), 4, 2)
    idx = np.array([st.as_indices() for st in targets], dtype=int).reshape(len(targets), 4)
    onehot = np.zeros_like(p)
    ii, kk = np.meshgrid(np.arange(p.shape[0]), np.arange(4), indexing="ij")
    onehot[ii, kk, idx] = 1.0
    # floor avoids log(0) for fully confident wrong-direction pairs
    picked = np.clip((p * onehot).sum(axis=-1), 1e-300, None)
    scale = cfg.gamma / n_reg
    loss = float(-scale * np.log(picked).sum())
    grad = scale * (p - onehot)
    return loss, grad


def total_loss(cls: float, box: float, sign: float) -> float:
    """Sum of the three components."""
    return cls + box + sign


def refine(d: BoxDeltas, p: SignProbs) -> BoxDeltas:
    """Scale each delta by the predicted probability of its own direction.

    Shrinks every dimension (probabilities are <= 1), strongly when the
    sign head disagrees with the regressed direction; this is what keeps
    a box from drifting too far the wrong way. t = 0 uses the negative
    branch, where both branches agree at 0.
    """
    out = []
    for t, (s_minus, s_plus) in zip(d.as_tuple(), p.as_rows()):
        out.append(t * s_minus if t <= 0.0 else t * s_plus)
    return BoxDeltas(*out)


def sign_probs_from_logits(logits) -> list[SignProbs]:
    """Softmax (N,4,2) sign logits into SignProbs instances."""
    z = np.asarray(logits, dtype=float)
    if z.ndim != 3 or z.shape[1:] != (4, 2):
        raise ValueError(f"expected (N,4,2) sign logits, got {z.shape}")
    p = softmax(z)
    return [SignProbs.from_array(rows) for rows in p]

"""Decay functions mapping a visible ratio in [0,1] to a weight in [0,1].

Four kinds are supported:

* ``none``    -- constant 1, so the decayed overlap equals plain IoU
* ``sigmoid`` -- normalized logistic ``(s(x)-s(0)) / (s(1)-s(0))`` with
  ``s(x) = 1 / (1 + exp(-beta*(x-alpha)))``
* ``ramp``    -- linear from (x1, 0) to (x2, 1), clamped outside
* ``cosine``  -- ``-0.5*cos(pi*x) + 0.5``

Every valid spec is monotone non-decreasing on [0,1]. Inputs outside
[0,1] are clamped rather than rejected (visible ratios are bounded but
may carry floating-point noise).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

KINDS = ("none", "sigmoid", "ramp", "cosine")


@dataclass(frozen=True)
class DecaySpec:
    """Parameterized choice of decay function.

    Use the classmethod constructors; they validate parameters so
    evaluation never has to.
    """

    kind: str
    beta: float = 0.0
    alpha: float = 0.0
    x1: float = 0.0
    x2: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown decay kind {self.kind!r}, expected one of {KINDS}")
        if self.kind == "sigmoid":
            if not self.beta > 0:
                raise ValueError("sigmoid decay requires beta > 0")
            if not 0.0 < self.alpha < 1.0:
                raise ValueError("sigmoid decay requires alpha in (0, 1)")
        if self.kind == "ramp" and not self.x1 < self.x2:
            raise ValueError("ramp decay requires x1 < x2")

    @classmethod
    def none(cls) -> "DecaySpec":
        return cls("none")

    @classmethod
    def sigmoid(cls, beta: float, alpha: float = 0.5) -> "DecaySpec":
        return cls("sigmoid", beta=beta, alpha=alpha)

    @classmethod
    def ramp(cls, x1: float, x2: float) -> "DecaySpec":
        return cls("ramp", x1=x1, x2=x2)

    @classmethod
    def cosine(cls) -> "DecaySpec":
        return cls("cosine")

    def spec_string(self) -> str:
        """Textual form accepted by :func:`parse_decay`."""
        if self.kind == "sigmoid":
            return f"sigmoid:{_fmt(self.beta)},{_fmt(self.alpha)}"
        if self.kind == "ramp":
            return f"ramp:{_fmt(self.x1)},{_fmt(self.x2)}"
        return self.kind


def _fmt(v: float) -> str:
    return f"{v:g}"


def parse_decay(text: str) -> DecaySpec:
    """Parse the CLI grammar: ``none``, ``sigmoid:<beta>,<alpha>``,
    ``ramp:<x1>,<x2>``, ``cosine``.
    """
    name, _, argstr = text.strip().partition(":")
    name = name.lower()
    if name in ("none", "cosine"):
        if argstr:
            raise ValueError(f"decay kind {name!r} takes no parameters")
        return DecaySpec(name)
    if name in ("sigmoid", "ramp"):
        parts = argstr.split(",") if argstr else []
        if len(parts) != 2:
            raise ValueError(f"decay kind {name!r} needs two comma-separated parameters")
        try:
            a, b = (float(p) for p in parts)
        except ValueError as exc:
            raise ValueError(f"bad decay parameters in {text!r}") from exc
        return DecaySpec.sigmoid(a, b) if name == "sigmoid" else DecaySpec.ramp(a, b)
    raise ValueError(f"unknown decay spec {text!r}")


def _logistic(x: float, beta: float, alpha: float) -> float:
    return 1.0 / (1.0 + math.exp(-beta * (x - alpha)))


def eval_decay(spec: DecaySpec, x: float) -> float:
    """Evaluate the decay function at x; x is clamped into [0,1]."""
    x = min(1.0, max(0.0, x))
    if spec.kind == "none":
        return 1.0
    if spec.kind == "sigmoid":
        s0 = _logistic(0.0, spec.beta, spec.alpha)
        s1 = _logistic(1.0, spec.beta, spec.alpha)
        return (_logistic(x, spec.beta, spec.alpha) - s0) / (s1 - s0)
    if spec.kind == "ramp":
        if x <= spec.x1:
            return 0.0
        if x >= spec.x2:
            return 1.0
        return (x - spec.x1) / (spec.x2 - spec.x1)
    # cosine
    return -0.5 * math.cos(math.pi * x) + 0.5

"""Box regression codec and sign-class targets.

Standard center/size delta parameterization: a delta (tx, ty, tw, th)
moves an RoI onto a target box via

    gx = tx * pw + pcx        gw = pw * exp(tw)
    gy = ty * ph + pcy        gh = ph * exp(th)

No dataset-level mean/std normalization is applied to the targets.
The sign class of each dimension is ``neg`` when the target delta is
<= 0 and ``pos`` otherwise (zero belongs to the negative class).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import Box

NEG = "neg"
POS = "pos"


@dataclass(frozen=True)
class BoxDeltas:
    """Normalized regression offsets for X, Y, width and height."""

    tx: float
    ty: float
    tw: float
    th: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.as_tuple()):
            raise ValueError(f"deltas must be finite, got {self}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.tx, self.ty, self.tw, self.th)


@dataclass(frozen=True)
class SignTargets:
    """Per-dimension direction class, each ``neg`` or ``pos``."""

    sx: str
    sy: str
    sw: str
    sh: str

    def __post_init__(self):
        for v in self.as_tuple():
            if v not in (NEG, POS):
                raise ValueError(f"sign class must be {NEG!r} or {POS!r}, got {v!r}")

    def as_tuple(self) -> tuple[str, str, str, str]:
        return (self.sx, self.sy, self.sw, self.sh)

    def as_indices(self) -> tuple[int, int, int, int]:
        """0 for neg, 1 for pos; the column order of sign-probability pairs."""
        return tuple(0 if v == NEG else 1 for v in self.as_tuple())


def _center_size(b: Box) -> tuple[float, float, float, float]:
    return (0.5 * (b.x1 + b.x2), 0.5 * (b.y1 + b.y2), b.x2 - b.x1, b.y2 - b.y1)


def encode(roi: Box, gt: Box) -> BoxDeltas:
    """Deltas that move `roi` exactly onto `gt`.

    Raises ValueError when either box is degenerate (zero width or
    height), since the log-size terms are undefined there.
    """
    pcx, pcy, pw, ph = _center_size(roi)
    gcx, gcy, gw, gh = _center_size(gt)
    if pw <= 0.0 or ph <= 0.0:
        raise ValueError("cannot encode against a degenerate RoI")
    if gw <= 0.0 or gh <= 0.0:
        raise ValueError("cannot encode a degenerate target box")
    return BoxDeltas(
        tx=(gcx - pcx) / pw,
        ty=(gcy - pcy) / ph,
        tw=math.log(gw / pw),
        th=math.log(gh / ph),
    )


def decode(roi: Box, d: BoxDeltas) -> Box:
    """Apply deltas to an RoI; exact inverse of :func:`encode`."""
    pcx, pcy, pw, ph = _center_size(roi)
    if pw <= 0.0 or ph <= 0.0:
        raise ValueError("cannot decode against a degenerate RoI")
    cx = d.tx * pw + pcx
    cy = d.ty * ph + pcy
    w = pw * math.exp(d.tw)
    h = ph * math.exp(d.th)
    return Box(cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h)


def sign_targets(t_star: BoxDeltas) -> SignTargets:
    """Direction classes of the target deltas; t* = 0 falls in ``neg``."""
    return SignTargets(*(NEG if v <= 0.0 else POS for v in t_star.as_tuple()))


def clip_box(b: Box, width: float, height: float) -> Box:
    """Clip a box to image bounds [0, width] x [0, height]."""
    x1 = min(max(b.x1, 0.0), width)
    y1 = min(max(b.y1, 0.0), height)
    x2 = min(max(b.x2, 0.0), width)
    y2 = min(max(b.y2, 0.0), height)
    return Box(x1, y1, x2, y2)

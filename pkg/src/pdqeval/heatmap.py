"""Per-pixel probability maps for probabilistic boxes.

A pbox induces, at every lattice point, the probability that the point lies
inside the detected box. Each corner coordinate is modelled as an
independent Gaussian whose variance is the matching diagonal covariance
entry, which factorizes the probability into four CDF terms:

    p(x, y) = F((x - x1)/sx1) * F((y - y1)/sy1) * F((x2 - x)/sx2) * F((y2 - y)/sy2)

with F the standard normal CDF and s* the corner standard deviations
(square roots of the diagonal entries). A zero sigma degenerates its factor
to the closed-box step function: the probability is 1 exactly on the
boundary coordinate and 0 beyond it.

Only diagonal covariances are supported; anything else raises
:class:`UnsupportedCovarianceError` instead of being silently approximated.

Rendering is truncated to a support rectangle (box grown by ``k_sigma``
standard deviations per side, default 4). Outside that rectangle the map is
treated as exactly zero; the untruncated value there is below
F(-4) < 3.2e-5, so the per-pixel error introduced by truncation is bounded
by that amount.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import UnsupportedCovarianceError
from .model import PBox

DEFAULT_K_SIGMA = 4.0


@dataclass(frozen=True)
class ProbMap:
    """Dense probability patch anchored at integer offset (x0, y0)."""

    x0: int
    y0: int
    width: int
    height: int
    values: np.ndarray  # shape (height, width), float64 in [0, 1]

    def __post_init__(self):
        object.__setattr__(self, "values", np.ascontiguousarray(self.values, dtype=np.float64))
        self.values.setflags(write=False)

    @property
    def x1(self) -> int:
        """Inclusive right edge."""
        return self.x0 + self.width - 1

    @property
    def y1(self) -> int:
        """Inclusive bottom edge."""
        return self.y0 + self.height - 1

    def prob_at(self, x: int, y: int) -> float:
        """Truncated probability: exactly 0 outside the support rectangle."""
        if self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1:
            return float(self.values[y - self.y0, x - self.x0])
        return 0.0


def corner_sigmas(p: PBox) -> tuple[float, float, float, float]:
    """(sx1, sy1, sx2, sy2) from the diagonal covariance entries."""
    for name, cov in (("top-left", p.cov_tl), ("bottom-right", p.cov_br)):
        if not cov.is_diagonal:
            raise UnsupportedCovarianceError(
                f"{name} corner covariance has off-diagonal entries; only diagonal "
                "covariances are supported"
            )
    return (
        math.sqrt(p.cov_tl.xx),
        math.sqrt(p.cov_tl.yy),
        math.sqrt(p.cov_br.xx),
        math.sqrt(p.cov_br.yy),
    )


def _factor(delta: float, sigma: float) -> float:
    # delta >= 0 means "inside" relative to this corner coordinate.
    if sigma == 0.0:
        return 1.0 if delta >= 0.0 else 0.0
    return float(ndtr(delta / sigma))


def pixel_prob(p: PBox, x: float, y: float) -> float:
    """Untruncated probability that lattice point (x, y) is inside the pbox."""
    sx1, sy1, sx2, sy2 = corner_sigmas(p)
    b = p.box
    return (
        _factor(x - b.x1, sx1)
        * _factor(y - b.y1, sy1)
        * _factor(b.x2 - x, sx2)
        * _factor(b.y2 - y, sy2)
    )


def support_region(
    p: PBox, frame_w: int, frame_h: int, k_sigma: float = DEFAULT_K_SIGMA
) -> tuple[int, int, int, int]:
    """Inclusive pixel rectangle (x0, y0, x1, y1) covering the box grown by
    k_sigma standard deviations per side, clipped to the frame."""
    sx1, sy1, sx2, sy2 = corner_sigmas(p)
    b = p.box
    x0 = max(0, math.floor(b.x1 - k_sigma * sx1))
    y0 = max(0, math.floor(b.y1 - k_sigma * sy1))
    x1 = min(frame_w - 1, math.ceil(b.x2 + k_sigma * sx2))
    y1 = min(frame_h - 1, math.ceil(b.y2 + k_sigma * sy2))
    return (x0, y0, x1, y1)


def _axis_profile(coords: np.ndarray, lo: float, hi: float, s_lo: float, s_hi: float) -> np.ndarray:
    if s_lo == 0.0:
        f_lo = (coords >= lo).astype(np.float64)
    else:
        f_lo = ndtr((coords - lo) / s_lo)
    if s_hi == 0.0:
        f_hi = (coords <= hi).astype(np.float64)
    else:
        f_hi = ndtr((hi - coords) / s_hi)
    return f_lo * f_hi


def render(
    p: PBox, frame_w: int, frame_h: int, k_sigma: float = DEFAULT_K_SIGMA
) -> ProbMap:
    """Evaluate pixel_prob over the support region.

    The CDF product is separable, so the map is the outer product of one
    profile per axis.
    """
    sx1, sy1, sx2, sy2 = corner_sigmas(p)
    x0, y0, x1, y1 = support_region(p, frame_w, frame_h, k_sigma)
    if x0 > x1 or y0 > y1:
        return ProbMap(x0, y0, 0, 0, np.zeros((0, 0)))
    b = p.box
    fx = _axis_profile(np.arange(x0, x1 + 1, dtype=np.float64), b.x1, b.x2, sx1, sx2)
    fy = _axis_profile(np.arange(y0, y1 + 1, dtype=np.float64), b.y1, b.y2, sy1, sy2)
    return ProbMap(x0, y0, x1 - x0 + 1, y1 - y0 + 1, np.outer(fy, fx))

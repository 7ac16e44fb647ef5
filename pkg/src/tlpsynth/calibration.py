"""Dispersion-based calibration of a generated trace image against a real one.

The filter has three steps:

1. a weighted L1 pixel distance between the real and generated images,
   whose extrema over the image give the normalising range;
2. a dispersion vector per pixel: the generated pixel divided by its
   beta-weighted neighbourhood sum, scaled by a normalised match distance,
   then reduced to a scalar score and min-max normalised into [0, 1];
3. pixel selection: where the score exceeds lambda the real pixel replaces
   the generated one.

The neighbourhood kernel is the outer product ``beta x beta`` over the
``(2n+1) x (2n+1)`` window. Windows clipped by the image border are rescaled
by ``full_weight / clipped_weight`` so border pixels are not biased low.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from scipy.ndimage import correlate1d

from .codec import TraceImage
from .errors import ConfigError, DimensionMismatch

DEFAULT_ALPHA = (1.0, 100.0, 10000.0)
DEFAULT_BETA = (1 / 12, 1 / 6, 1 / 2, 1 / 6, 1 / 12)
VARIANTS = ("literal", "per_pixel")
REDUCTIONS = ("mean_abs", "max_abs")
# score spreads below this fraction of the peak are rounding noise
FLAT_TOLERANCE = 1e-9


@dataclass(frozen=True)
class CalibrationParams:
    alpha: Tuple[float, float, float] = DEFAULT_ALPHA
    beta: Tuple[float, ...] = DEFAULT_BETA
    radius: int = 2
    lam: float = 1e-8
    epsilon: float = 1e-9
    variant: str = "literal"
    score_reduction: str = "mean_abs"

    def __post_init__(self):
        alpha = tuple(float(a) for a in self.alpha)
        beta = tuple(float(b) for b in self.beta)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        if len(alpha) != 3 or not all(a > 0 for a in alpha):
            raise ConfigError(f"alpha must be 3 positive weights, got {alpha}")
        if not isinstance(self.radius, (int, np.integer)) or self.radius < 1:
            raise ConfigError(f"radius must be a positive integer, got {self.radius}")
        if len(beta) != 2 * self.radius + 1 or not all(b > 0 for b in beta):
            raise ConfigError(
                f"beta must be {2 * self.radius + 1} positive weights for radius "
                f"{self.radius}, got {len(beta)}")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"lambda must lie in [0, 1], got {self.lam}")
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.score_reduction not in REDUCTIONS:
            raise ConfigError(
                f"score_reduction must be one of {REDUCTIONS}, got {self.score_reduction!r}")


@dataclass(frozen=True, eq=False)
class DistanceField:
    values: np.ndarray
    max_d: float
    min_d: float


@dataclass(frozen=True, eq=False)
class DispersionField:
    scores: np.ndarray
    raw: np.ndarray


def _check_pair(a: TraceImage, b: TraceImage):
    if a.pixels.shape != b.pixels.shape:
        raise DimensionMismatch(f"image widths differ: {a.width} vs {b.width}")


def pixel_distance(x, y, alpha=DEFAULT_ALPHA) -> float:
    return float(sum(a * abs(int(xi) - int(yi)) for a, xi, yi in zip(alpha, x, y)))


def distance_field(real: TraceImage, gen: TraceImage, alpha=DEFAULT_ALPHA) -> DistanceField:
    _check_pair(real, gen)
    diff = np.abs(real.pixels.astype(np.int64) - gen.pixels.astype(np.int64))
    values = diff.astype(np.float64) @ np.asarray(alpha, dtype=np.float64)
    values.setflags(write=False)
    return DistanceField(values, float(values.max()), float(values.min()))


def neighbourhood_sum(gen: np.ndarray, beta) -> np.ndarray:
    """Border-renormalised ``beta x beta`` weighted sum around each pixel."""
    beta = np.asarray(beta, dtype=np.float64)
    g = gen.astype(np.float64)
    s = correlate1d(correlate1d(g, beta, axis=0, mode="constant"), beta, axis=1, mode="constant")
    ones = np.ones(gen.shape[:2])
    w = correlate1d(correlate1d(ones, beta, axis=0, mode="constant"), beta, axis=1, mode="constant")
    full = beta.sum() ** 2
    return s * (full / w)[..., None]


def dispersion_field(real: TraceImage, gen: TraceImage, match_distance: float,
                     params: CalibrationParams = CalibrationParams()) -> DispersionField:
    """Per-pixel dispersion vectors and their normalised scalar scores.

    ``match_distance`` is the embedding-space distance recorded by the
    ground-truth match; it is used only by the ``literal`` variant.
    """
    dist = distance_field(real, gen, params.alpha)
    span = dist.max_d - dist.min_d + params.epsilon
    if params.variant == "literal":
        scale = np.full(dist.values.shape, (match_distance - dist.min_d) / span)
    else:
        scale = (dist.values - dist.min_d) / span

    g = gen.pixels.astype(np.float64)
    denom = neighbourhood_sum(gen.pixels, params.beta) + params.epsilon
    raw = scale[..., None] * g / denom

    mag = np.abs(raw)
    s = mag.mean(axis=2) if params.score_reduction == "mean_abs" else mag.max(axis=2)
    lo, hi = s.min(), s.max()
    if hi - lo > FLAT_TOLERANCE * hi:
        scores = (s - lo) / (hi - lo)
    else:
        scores = np.zeros_like(s)
    scores = np.clip(scores, 0.0, 1.0)
    raw.setflags(write=False)
    scores.setflags(write=False)
    return DispersionField(scores, raw)


def replacement_mask(disp: DispersionField, lam: float) -> np.ndarray:
    """Pixels to take from the real image. lambda 0 rejects everything."""
    if not 0.0 <= lam <= 1.0:
        raise ConfigError(f"lambda must lie in [0, 1], got {lam}")
    if lam == 0.0:
        return np.ones(disp.scores.shape, dtype=bool)
    return disp.scores > lam


def calibrate(gen: TraceImage, real: TraceImage, disp: DispersionField, lam: float) -> TraceImage:
    _check_pair(real, gen)
    if disp.scores.shape != gen.pixels.shape[:2]:
        raise DimensionMismatch("dispersion field does not match image size")
    mask = replacement_mask(disp, lam)
    return TraceImage(np.where(mask[..., None], real.pixels, gen.pixels))


@dataclass(frozen=True, eq=False)
class CalibrationOutcome:
    image: TraceImage
    dispersion: DispersionField
    replaced: int = field(default=0)


def calibrate_against(gen: TraceImage, real: TraceImage, match_distance: float,
                      params: CalibrationParams = CalibrationParams()) -> CalibrationOutcome:
    """Dispersion scoring followed by replacement at ``params.lam``."""
    disp = dispersion_field(real, gen, match_distance, params)
    mask = replacement_mask(disp, params.lam)
    out = TraceImage(np.where(mask[..., None], real.pixels, gen.pixels))
    return CalibrationOutcome(out, disp, int(mask.sum()))

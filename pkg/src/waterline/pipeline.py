"""Waterline prediction from a binary canoe mask.

The chain, applied per image:

1. take the mask,
2. extract its contour pixels,
3. keep only the bottom envelope (per column, the largest y),
4. fit a first least-squares line,
5. drop envelope points above that line (waves/splashes bite into the hull
   from below, so the outliers sit high),
6. refit on the survivors; the second line is the predicted waterline.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateRegressionError, NoForegroundError
from .geometry import Line, WaterlineParams, line_to_params
from .mask import Mask


@dataclass(frozen=True)
class PointSet:
    """Pixel coordinates as parallel integer arrays (xs = columns, ys = rows)."""

    xs: np.ndarray = field(repr=False)
    ys: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        xs = np.asarray(self.xs, dtype=np.int64)
        ys = np.asarray(self.ys, dtype=np.int64)
        if xs.shape != ys.shape or xs.ndim != 1:
            raise ValueError("xs and ys must be 1-D arrays of equal length")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    def __len__(self) -> int:
        return int(self.xs.size)

    def as_tuples(self) -> set[tuple[int, int]]:
        return set(zip(self.xs.tolist(), self.ys.tolist()))

    @classmethod
    def from_tuples(cls, points) -> "PointSet":
        pts = list(points)
        xs = np.array([p[0] for p in pts], dtype=np.int64)
        ys = np.array([p[1] for p in pts], dtype=np.int64)
        return cls(xs, ys)


def extract_contour(mask: Mask) -> PointSet:
    """Foreground pixels with a background 4-neighbor, or lying on the image border."""
    fg = mask.pixels
    if not fg.any():
        raise NoForegroundError("mask has no foreground pixel")
    padded = np.pad(fg, 1, mode="constant", constant_values=False)
    has_bg_neighbor = ~(
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    rows, cols = np.nonzero(fg & has_bg_neighbor)
    return PointSet(xs=cols, ys=rows)


def bottom_envelope(contour: PointSet) -> PointSet:
    """One point per distinct column: the largest y found there (y=0 is the top row)."""
    if len(contour) == 0:
        raise ValueError("contour is empty")
    xs, ys = contour.xs, contour.ys
    unique_x, inverse = np.unique(xs, return_inverse=True)
    max_y = np.full(unique_x.size, np.iinfo(np.int64).min, dtype=np.int64)
    np.maximum.at(max_y, inverse, ys)
    return PointSet(xs=unique_x, ys=max_y)


def fit_line_ols(points: PointSet) -> Line:
    """Ordinary least squares of y on x.  Needs at least two distinct columns."""
    xs = points.xs.astype(np.float64)
    ys = points.ys.astype(np.float64)
    if np.unique(xs).size < 2:
        raise DegenerateRegressionError(
            f"regression needs >= 2 distinct x values, got {np.unique(xs).size}"
        )
    x_mean = xs.mean()
    y_mean = ys.mean()
    dx = xs - x_mean
    slope = float((dx * (ys - y_mean)).sum() / (dx * dx).sum())
    intercept = float(y_mean - slope * x_mean)
    return Line(slope=slope, intercept=intercept)


def filter_above(points: PointSet, line: Line) -> PointSet:
    """Drop points above the line (smaller y); points exactly on it are kept."""
    keep = points.ys >= line.slope * points.xs + line.intercept
    return PointSet(xs=points.xs[keep], ys=points.ys[keep])


def detect_waterline(mask: Mask, center_x: int | None = None) -> WaterlineParams:
    """Run the full chain on one mask and return the predicted waterline.

    ``center_x`` defaults to ``mask.width // 2``.  If the outlier removal
    leaves fewer than two distinct columns, the first fit is returned as-is
    rather than failing mid-pipeline.
    """
    if center_x is None:
        center_x = mask.width // 2
    contour = extract_contour(mask)
    envelope = bottom_envelope(contour)
    first_fit = fit_line_ols(envelope)
    survivors = filter_above(envelope, first_fit)
    if np.unique(survivors.xs).size < 2:
        refit = first_fit
    else:
        refit = fit_line_ols(survivors)
    return line_to_params(refit, center_x)

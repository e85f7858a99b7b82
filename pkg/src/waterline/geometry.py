"""Waterline representations and conversions.

A waterline is a straight line in image coordinates (y grows downward).
Besides the raw slope/intercept form, it is carried around as the pair
(h, alpha): the y-coordinate of the line at a reference abscissa, and its
signed angle to the horizontal in degrees.  A line whose right end sits
visually higher (smaller y) has positive alpha.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace


class StudyGroup(str, enum.Enum):
    """Experiment arm controlling how the initial line shown to an expert is distorted."""

    A = "A"  # shown as predicted
    B = "B"  # shifted up by 3 px
    C = "C"  # shifted down 2 px, rotated -1.5 deg
    D = "D"  # shifted down 2 px, rotated +1.5 deg

    def __str__(self) -> str:
        return self.value


# (height offset in px, angle offset in deg) applied to the initial line per group
GROUP_OFFSETS: dict[StudyGroup, tuple[float, float]] = {
    StudyGroup.A: (0.0, 0.0),
    StudyGroup.B: (-3.0, 0.0),
    StudyGroup.C: (2.0, -1.5),
    StudyGroup.D: (2.0, 1.5),
}


@dataclass(frozen=True)
class Line:
    """Line in slope-intercept form: y = slope * x + intercept, y measured downward."""

    slope: float
    intercept: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.slope) and math.isfinite(self.intercept)):
            raise ValueError(f"line coefficients must be finite, got {self!r}")

    def y_at(self, x: float) -> float:
        return self.slope * x + self.intercept


@dataclass(frozen=True)
class WaterlineParams:
    """Waterline as (height at reference abscissa, signed angle to horizontal).

    h is in pixels, alpha in degrees, center_x is the integer reference
    column at which h is read off.
    """

    h: float
    alpha: float
    center_x: int

    def __post_init__(self) -> None:
        if not math.isfinite(self.h):
            raise ValueError(f"h must be finite, got {self.h}")
        if not -90.0 < self.alpha < 90.0:
            raise ValueError(f"alpha must lie in (-90, 90) degrees, got {self.alpha}")
        if self.center_x < 0:
            raise ValueError(f"center_x must be >= 0, got {self.center_x}")

    def to_dict(self) -> dict:
        return {"h": self.h, "alpha": self.alpha, "center_x": self.center_x}

    @classmethod
    def from_dict(cls, d: dict) -> "WaterlineParams":
        return cls(h=float(d["h"]), alpha=float(d["alpha"]), center_x=int(d["center_x"]))


def line_to_params(line: Line, center_x: int) -> WaterlineParams:
    """Convert a slope-intercept line to its (h, alpha) form at the given column.

    alpha = atan(-slope): with y growing downward, a negative slope means the
    line rises to the right on screen, which reads as a positive angle.
    """
    h = line.y_at(center_x) + 0.0
    alpha = math.degrees(math.atan(-line.slope)) + 0.0  # + 0.0 turns -0.0 into 0.0
    return WaterlineParams(h=h, alpha=alpha, center_x=center_x)


def params_to_line(p: WaterlineParams) -> Line:
    """Inverse of :func:`line_to_params`.  Rejects vertical lines (|alpha| >= 90)."""
    if not -90.0 < p.alpha < 90.0:
        raise ValueError(f"cannot build a line for alpha={p.alpha} (vertical)")
    slope = -math.tan(math.radians(p.alpha))
    intercept = p.h - slope * p.center_x
    return Line(slope=slope, intercept=intercept)


def perturb(p: WaterlineParams, group: StudyGroup) -> WaterlineParams:
    """Apply the study-group distortion to a waterline.

    The height shift is applied first; the rotation then pivots about
    (center_x, shifted h), so h itself is unchanged by the rotation.
    """
    try:
        dh, dalpha = GROUP_OFFSETS[StudyGroup(group)]
    except (KeyError, ValueError):
        raise ValueError(f"unknown study group: {group!r}") from None
    return replace(p, h=p.h + dh, alpha=p.alpha + dalpha)

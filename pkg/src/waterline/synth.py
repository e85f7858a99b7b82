"""Synthetic hull masks with a known waterline.

Each mask is a band of foreground hull_height rows tall spanning the columns
of ``x_range``; per column the bottom row sits at round(line(x)).  Optional
notches raise the bottom locally, imitating small waves cropping into the
silhouette; the detection pipeline is expected to ignore them.  The returned
truth is the continuous line, so rasterization error is the only thing
separating a detector from a perfect score.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np

from .geometry import Line, WaterlineParams, line_to_params
from .mask import Mask


@dataclass(frozen=True)
class Notch:
    """Columns x_start .. x_start + width - 1 get their bottom raised by depth pixels."""

    x_start: int
    width: int
    depth: int

    def __post_init__(self) -> None:
        if self.x_start < 0 or self.width < 1:
            raise ValueError(f"bad notch span x_start={self.x_start} width={self.width}")
        if self.depth < 1:
            raise ValueError(f"notch depth must be >= 1, got {self.depth}")

    @property
    def x_end(self) -> int:  # inclusive
        return self.x_start + self.width - 1


@dataclass(frozen=True)
class SynthSpec:
    width: int
    height: int
    line: Line
    hull_height: int
    x_range: tuple[int, int] | None = None  # inclusive column span, None = full width
    notches: tuple[Notch, ...] = ()

    def __post_init__(self) -> None:
        if self.width < 2 or self.height < 1:
            raise ValueError(f"bad image size {self.width}x{self.height}")
        if self.hull_height < 1:
            raise ValueError(f"hull height must be >= 1, got {self.hull_height}")
        x0, x1 = self.span
        if not 0 <= x0 < x1 <= self.width - 1:
            raise ValueError(f"bad hull column span ({x0}, {x1}) for width {self.width}")
        for notch in self.notches:
            if notch.x_start < x0 or notch.x_end > x1:
                raise ValueError(
                    f"notch columns {notch.x_start}..{notch.x_end} outside hull span {x0}..{x1}"
                )
            if notch.depth >= self.hull_height:
                raise ValueError(
                    f"notch depth {notch.depth} would cut through the {self.hull_height}px hull"
                )

    @property
    def span(self) -> tuple[int, int]:
        return self.x_range if self.x_range is not None else (0, self.width - 1)


def generate(spec: SynthSpec, center_x: int | None = None) -> tuple[Mask, WaterlineParams]:
    """Rasterize the hull band and return it with the true line parameters."""
    x0, x1 = spec.span
    xs = np.arange(x0, x1 + 1)
    bottom = np.rint(spec.line.slope * xs + spec.line.intercept).astype(np.int64)
    top = bottom - spec.hull_height + 1
    if top.min() < 0 or bottom.max() > spec.height - 1:
        raise ValueError(
            f"hull rows {top.min()}..{bottom.max()} fall outside image height {spec.height}"
        )

    depth = np.zeros(xs.size, dtype=np.int64)
    for notch in spec.notches:
        span = slice(notch.x_start - x0, notch.x_end - x0 + 1)
        depth[span] = np.maximum(depth[span], notch.depth)

    pixels = np.zeros((spec.height, spec.width), dtype=bool)
    rows = np.arange(spec.height)[:, None]
    pixels[:, x0 : x1 + 1] = (rows >= top[None, :]) & (rows <= (bottom - depth)[None, :])

    cx = spec.width // 2 if center_x is None else center_x
    return Mask(pixels), line_to_params(spec.line, cx)


def generate_batch(
    count: int,
    width: int = 1024,
    height: int = 576,
    seed: int = 0,
    notch_fraction: float = 0.5,
    center_x: int | None = None,
) -> list[tuple[str, Mask, WaterlineParams]]:
    """Deterministic batch of (image_id, mask, truth) triples for a given seed.

    Slopes are drawn uniformly from [-0.03, 0.03]; notches cover at most 20%
    of the columns and are at most 10 px deep.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    rng = random.Random(seed)
    out = []
    for i in range(count):
        slope = rng.uniform(-0.03, 0.03)
        hull_height = rng.randint(40, 80)
        x0 = rng.randint(0, width // 8)
        x1 = width - 1 - rng.randint(0, width // 8)
        # keep the whole band inside the frame with slack for the slope's sweep
        sweep = abs(slope) * width
        b_center = rng.uniform(hull_height + sweep + 2, height - sweep - 3)
        intercept = b_center - slope * (width / 2)

        notches: list[Notch] = []
        if rng.random() < notch_fraction:
            budget = (x1 - x0 + 1) // 5
            for _ in range(rng.randint(1, 3)):
                notch_width = rng.randint(8, max(8, budget // 3))
                if notch_width > budget:
                    break
                budget -= notch_width
                x_start = rng.randint(x0, x1 - notch_width + 1)
                depth = rng.randint(3, min(10, hull_height - 1))
                notches.append(Notch(x_start, notch_width, depth))

        spec = SynthSpec(
            width=width,
            height=height,
            line=Line(slope=slope, intercept=intercept),
            hull_height=hull_height,
            x_range=(x0, x1),
            notches=tuple(notches),
        )
        mask, truth = generate(spec, center_x=center_x)
        out.append((f"synth-{i:04d}", mask, truth))
    return out

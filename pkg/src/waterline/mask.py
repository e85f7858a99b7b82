"""Binary instance masks and their on-disk forms.

Two interchangeable encodings are supported and must round-trip bit-exactly:

* an 8-bit single-channel raster image (any nonzero pixel is foreground), and
* a run-length record ``{"width": w, "height": h, "rle": [...]}`` whose run
  lengths alternate background/foreground over the row-major flattened mask,
  starting with a background run (which may be 0).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image


@dataclass(frozen=True)
class Mask:
    """Binary foreground raster of one canoe instance.

    ``pixels`` has shape (height, width), dtype bool, True = foreground.
    """

    pixels: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        arr = np.asarray(self.pixels)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError(f"mask must be a non-empty 2-D array, got shape {arr.shape}")
        object.__setattr__(self, "pixels", arr.astype(bool))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def foreground_count(self) -> int:
        return int(self.pixels.sum())

    def same_shape(self, other: "Mask") -> bool:
        return self.pixels.shape == other.pixels.shape

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Mask):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    __hash__ = None  # type: ignore[assignment]

    # -- run-length encoding ------------------------------------------------

    def to_rle(self) -> dict:
        flat = self.pixels.ravel()
        # run boundaries over the flattened raster
        changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
        starts = np.concatenate(([0], changes))
        ends = np.concatenate((changes, [flat.size]))
        runs = (ends - starts).tolist()
        if flat[0]:
            runs = [0] + runs  # encoding always starts with a background run
        return {"width": self.width, "height": self.height, "rle": runs}

    @classmethod
    def from_rle(cls, record: dict) -> "Mask":
        try:
            width = int(record["width"])
            height = int(record["height"])
            runs = list(record["rle"])
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed RLE record: {exc}") from exc
        if width <= 0 or height <= 0:
            raise ValueError(f"mask dimensions must be positive, got {width}x{height}")
        if any((not isinstance(r, int)) or r < 0 for r in runs):
            raise ValueError("RLE run lengths must be non-negative integers")
        if sum(runs) != width * height:
            raise ValueError(
                f"RLE runs sum to {sum(runs)}, expected {width * height} for {width}x{height}"
            )
        flat = np.zeros(width * height, dtype=bool)
        pos = 0
        for i, run in enumerate(runs):
            if i % 2 == 1:  # odd runs are foreground
                flat[pos : pos + run] = True
            pos += run
        return cls(flat.reshape(height, width))

    # -- files --------------------------------------------------------------

    def save(self, path: str | Path) -> None:
        """Write the mask to ``path``; `.json` means an RLE record, else a raster image."""
        path = Path(path)
        if path.suffix == ".json":
            path.write_text(json.dumps(self.to_rle()) + "\n")
        else:
            img = Image.fromarray(self.pixels.astype(np.uint8) * 255, mode="L")
            img.save(path)

    @classmethod
    def load(cls, path: str | Path) -> "Mask":
        path = Path(path)
        if path.suffix == ".json":
            return cls.from_rle(json.loads(path.read_text()))
        with Image.open(path) as img:
            arr = np.asarray(img.convert("L"))
        return cls(arr != 0)

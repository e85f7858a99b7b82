"""Run configuration shared by the CLI and the service.

Every output record embeds ``config_hash`` so downstream consumers can tell
which settings produced a prediction without carrying the whole config
around.  The hash is the sha256 of the canonical JSON form (sorted keys,
compact separators), so semantically equal configs always hash the same.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path


@dataclass(frozen=True)
class Config:
    # None means: use floor(width / 2) of whatever image is being processed
    center_x: int | None = None
    coverage_target: float = 0.95
    u_grid_step: float = 0.1
    joint_calibration: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.center_x is not None and self.center_x < 0:
            raise ValueError(f"center_x must be >= 0, got {self.center_x}")
        if not 0.0 < self.coverage_target < 1.0:
            raise ValueError(f"coverage_target must be in (0, 1), got {self.coverage_target}")
        if self.u_grid_step <= 0.0:
            raise ValueError(f"u_grid_step must be positive, got {self.u_grid_step}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Config":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        unknown = set(d) - set(known)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**known)

    @classmethod
    def from_file(cls, path: str | Path) -> "Config":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ValueError(f"{path}: config must be a JSON object")
        return cls.from_dict(data)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @property
    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()

"""Consensus ground truth, expert agreement, and acceptance calibration.

Given a set of expert waterline annotations, this module derives per-image
consensus lines (arithmetic means of h and alpha), the signed deviations of
each expert from that consensus, a Kruskal-Wallis check that the experts'
deviation distributions are exchangeable, pooled uncertainty estimates
sigma_h / sigma_alpha, and the u-fold acceptance interval within which a
target fraction of individual annotations falls.  Predictions are then
graded against the consensus using that interval.

The annotation dataset format is newline-delimited JSON with one record per
line: {image_id, expert_id, h, alpha, center_x, group, modified, timestamp}.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import chi2

from .geometry import StudyGroup, WaterlineParams


@dataclass(frozen=True)
class AnnotationRecord:
    """One expert's waterline for one image."""

    image_id: str
    expert_id: str
    params: WaterlineParams
    group: StudyGroup
    modified: bool
    timestamp: float

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "expert_id": self.expert_id,
            "h": self.params.h,
            "alpha": self.params.alpha,
            "center_x": self.params.center_x,
            "group": str(self.group),
            "modified": self.modified,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnnotationRecord":
        return cls(
            image_id=str(d["image_id"]),
            expert_id=str(d["expert_id"]),
            params=WaterlineParams(
                h=float(d["h"]), alpha=float(d["alpha"]), center_x=int(d["center_x"])
            ),
            group=StudyGroup(d["group"]),
            modified=bool(d["modified"]),
            timestamp=float(d["timestamp"]),
        )


@dataclass(frozen=True)
class GroundTruthLine:
    """Per-image consensus: mean h and alpha over the annotating experts."""

    image_id: str
    h: float
    alpha: float
    n_experts: int
    center_x: int

    def __post_init__(self) -> None:
        if self.n_experts < 1:
            raise ValueError("consensus needs at least one expert")


@dataclass(frozen=True)
class DeviationRow:
    image_id: str
    expert_id: str
    eps_h: float
    eps_alpha: float


@dataclass(frozen=True)
class DeviationTable:
    rows: list[DeviationRow]

    def eps_h(self) -> np.ndarray:
        return np.array([r.eps_h for r in self.rows], dtype=np.float64)

    def eps_alpha(self) -> np.ndarray:
        return np.array([r.eps_alpha for r in self.rows], dtype=np.float64)

    def by_expert(self) -> dict[str, "DeviationTable"]:
        """Split rows into one table per expert, pooling that expert's images."""
        grouped: dict[str, list[DeviationRow]] = {}
        for row in self.rows:
            grouped.setdefault(row.expert_id, []).append(row)
        return {eid: DeviationTable(rows) for eid, rows in sorted(grouped.items())}


@dataclass(frozen=True)
class AcceptanceRange:
    """Calibrated acceptance interval: predictions within +/- delta of the consensus pass."""

    sigma_h: float
    sigma_alpha: float
    u: float
    delta_h: float
    delta_alpha: float
    coverage_target: float

    def __post_init__(self) -> None:
        if abs(self.delta_h - self.u * self.sigma_h) > 1e-9:
            raise ValueError("delta_h must equal u * sigma_h")
        if abs(self.delta_alpha - self.u * self.sigma_alpha) > 1e-9:
            raise ValueError("delta_alpha must equal u * sigma_alpha")
        if not 0.0 < self.coverage_target < 1.0:
            raise ValueError(f"coverage_target must be in (0, 1), got {self.coverage_target}")

    def to_dict(self) -> dict:
        return {
            "sigma_h": self.sigma_h,
            "sigma_alpha": self.sigma_alpha,
            "u": self.u,
            "delta_h": self.delta_h,
            "delta_alpha": self.delta_alpha,
            "coverage_target": self.coverage_target,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AcceptanceRange":
        return cls(**{k: float(d[k]) for k in (
            "sigma_h", "sigma_alpha", "u", "delta_h", "delta_alpha", "coverage_target")})


@dataclass(frozen=True)
class KruskalWallisResult:
    H: float
    p: float


@dataclass(frozen=True)
class AcceptanceResult:
    accepted: bool
    eps_h: float
    eps_alpha: float
    h_ok: bool
    alpha_ok: bool


# -- consensus and deviations ------------------------------------------------


def aggregate_ground_truth(records: list[AnnotationRecord]) -> list[GroundTruthLine]:
    """Per-image arithmetic mean of h and alpha over the annotating experts.

    All records of one image must share center_x, and each expert may
    annotate an image only once.
    """
    if not records:
        raise ValueError("no annotation records")
    by_image: dict[str, list[AnnotationRecord]] = {}
    for rec in records:
        by_image.setdefault(rec.image_id, []).append(rec)
    out = []
    for image_id in sorted(by_image):
        recs = by_image[image_id]
        experts = [r.expert_id for r in recs]
        if len(set(experts)) != len(experts):
            raise ValueError(f"image {image_id} has duplicate expert annotations")
        centers = {r.params.center_x for r in recs}
        if len(centers) != 1:
            raise ValueError(f"image {image_id} has mixed center_x values: {sorted(centers)}")
        out.append(
            GroundTruthLine(
                image_id=image_id,
                h=float(np.mean([r.params.h for r in recs])),
                alpha=float(np.mean([r.params.alpha for r in recs])),
                n_experts=len(recs),
                center_x=centers.pop(),
            )
        )
    return out


def deviations(
    records: list[AnnotationRecord], gts: list[GroundTruthLine]
) -> DeviationTable:
    """Signed deviation of each annotation from its image's consensus."""
    by_image = {gt.image_id: gt for gt in gts}
    rows = []
    for rec in records:
        gt = by_image.get(rec.image_id)
        if gt is None:
            raise ValueError(f"no ground-truth line for image {rec.image_id}")
        rows.append(
            DeviationRow(
                image_id=rec.image_id,
                expert_id=rec.expert_id,
                eps_h=rec.params.h - gt.h,
                eps_alpha=rec.params.alpha - gt.alpha,
            )
        )
    return DeviationTable(rows)


# -- agreement test ----------------------------------------------------------


def _midranks(values: np.ndarray) -> np.ndarray:
    """Ranks 1..n with tied values sharing their average rank."""
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    _, run_starts, run_lengths = np.unique(sorted_vals, return_index=True, return_counts=True)
    # average of the 1-based positions occupied by each tied run
    run_mid = run_starts + (run_lengths + 1) / 2.0
    ranks = np.empty(values.size, dtype=np.float64)
    ranks[order] = np.repeat(run_mid, run_lengths)
    return ranks


def kruskal_wallis(groups: list[list[float]]) -> KruskalWallisResult:
    """Kruskal-Wallis rank test across groups, with mid-rank tie correction.

    H is the rank-sum statistic divided by 1 - sum(t^3 - t)/(N^3 - N); the
    p-value comes from the chi-square survival function with df = groups - 1.
    When every value is identical the test is vacuous and (H=0, p=1) is
    returned.
    """
    if len(groups) < 2:
        raise ValueError(f"need at least 2 groups, got {len(groups)}")
    sizes = [len(g) for g in groups]
    if any(n == 0 for n in sizes):
        raise ValueError("groups must be non-empty")
    pooled = np.concatenate([np.asarray(g, dtype=np.float64) for g in groups])
    total = pooled.size
    if total < 3:
        raise ValueError(f"need at least 3 values in total, got {total}")
    if not np.isfinite(pooled).all():
        raise ValueError("values must be finite")

    ranks = _midranks(pooled)
    _, tie_lengths = np.unique(pooled, return_counts=True)
    tie_term = float(((tie_lengths**3) - tie_lengths).sum())
    correction = 1.0 - tie_term / (total**3 - total)
    if correction == 0.0:  # every value identical
        return KruskalWallisResult(H=0.0, p=1.0)

    h_stat = 0.0
    offset = 0
    for n in sizes:
        rank_sum = float(ranks[offset : offset + n].sum())
        h_stat += rank_sum**2 / n
        offset += n
    h_stat = 12.0 / (total * (total + 1)) * h_stat - 3.0 * (total + 1)
    h_stat = max(h_stat / correction, 0.0)
    p = float(chi2.sf(h_stat, df=len(groups) - 1))
    return KruskalWallisResult(H=h_stat, p=p)


# -- uncertainty and acceptance interval -------------------------------------


def pooled_sigma(table: DeviationTable) -> tuple[float, float]:
    """Root-mean-square of the signed deviations about zero (denominator N).

    The deviations are already centered per image by construction, so no
    further mean removal is applied.
    """
    if len(table.rows) < 2:
        raise ValueError(f"need at least 2 deviation rows, got {len(table.rows)}")
    sigma_h = float(np.sqrt(np.mean(table.eps_h() ** 2)))
    sigma_alpha = float(np.sqrt(np.mean(table.eps_alpha() ** 2)))
    return sigma_h, sigma_alpha


def calibrate_u(
    table: DeviationTable,
    sigma_h: float,
    sigma_alpha: float,
    coverage: float = 0.95,
    grid_step: float = 0.1,
    joint: bool = True,
) -> AcceptanceRange:
    """Smallest grid multiple u such that enough annotations fall inside +/- u*sigma.

    ``joint=True`` requires each counted annotation to sit inside both the
    height and the angle interval simultaneously; ``joint=False`` requires
    each parameter's marginal containment to reach the target on its own.
    """
    if not 0.0 < coverage < 1.0:
        raise ValueError(f"coverage must be in (0, 1), got {coverage}")
    if grid_step <= 0.0:
        raise ValueError(f"grid step must be positive, got {grid_step}")
    if not table.rows:
        raise ValueError("empty deviation table")
    if sigma_h < 0 or sigma_alpha < 0:
        raise ValueError("sigmas must be non-negative")

    abs_h = np.abs(table.eps_h())
    abs_alpha = np.abs(table.eps_alpha())

    # rows that can never be contained (zero sigma but nonzero deviation)
    always_out = np.zeros(len(table.rows), dtype=bool)
    if sigma_h == 0.0:
        always_out |= abs_h > 0
    if sigma_alpha == 0.0:
        always_out |= abs_alpha > 0
    if sigma_h == 0.0 and sigma_alpha == 0.0 and always_out.any():
        raise ValueError("both sigmas are zero but nonzero deviations are present")
    reachable = 1.0 - always_out.mean() if joint else min(
        1.0 - (abs_h > 0).mean() if sigma_h == 0.0 else 1.0,
        1.0 - (abs_alpha > 0).mean() if sigma_alpha == 0.0 else 1.0,
    )
    if reachable < coverage:
        raise ValueError(
            f"requested coverage {coverage} unreachable (max {reachable:.4f} with these sigmas)"
        )

    def contained_fraction(u: float) -> float:
        within_h = abs_h <= u * sigma_h
        within_alpha = abs_alpha <= u * sigma_alpha
        if joint:
            return float((within_h & within_alpha).mean())
        return min(float(within_h.mean()), float(within_alpha.mean()))

    # upper bound on the search from the largest finite requirement
    bounds = []
    if sigma_h > 0:
        bounds.append(abs_h.max() / sigma_h)
    if sigma_alpha > 0:
        bounds.append(abs_alpha.max() / sigma_alpha)
    max_k = int(math.ceil(max(bounds, default=0.0) / grid_step)) + 1

    for k in range(max_k + 1):
        u = round(k * grid_step, 10)
        if contained_fraction(u) >= coverage:
            break
    else:
        raise ValueError("coverage not reached within the search bound")

    return AcceptanceRange(
        sigma_h=sigma_h,
        sigma_alpha=sigma_alpha,
        u=u,
        delta_h=u * sigma_h,
        delta_alpha=u * sigma_alpha,
        coverage_target=coverage,
    )


def acceptance_check(
    pred: WaterlineParams, gt: GroundTruthLine, interval: AcceptanceRange
) -> AcceptanceResult:
    """Grade one prediction against the consensus line of the same image."""
    if pred.center_x != gt.center_x:
        raise ValueError(
            f"center_x mismatch: prediction {pred.center_x} vs ground truth {gt.center_x}"
        )
    eps_h = abs(gt.h - pred.h)
    eps_alpha = abs(gt.alpha - pred.alpha)
    h_ok = eps_h <= interval.delta_h
    alpha_ok = eps_alpha <= interval.delta_alpha
    return AcceptanceResult(
        accepted=h_ok and alpha_ok,
        eps_h=eps_h,
        eps_alpha=eps_alpha,
        h_ok=h_ok,
        alpha_ok=alpha_ok,
    )


# -- summary report ----------------------------------------------------------


def _quartiles(values: np.ndarray) -> dict:
    q1, med, q3 = np.percentile(values, [25.0, 50.0, 75.0])  # linear interpolation
    return {"q1": float(q1), "median": float(med), "q3": float(q3)}


@dataclass(frozen=True)
class StudyReport:
    n_images: int
    h_rate: float
    alpha_rate: float
    joint_rate: float
    quartiles: dict
    interval: AcceptanceRange

    def to_dict(self) -> dict:
        return {
            "n_images": self.n_images,
            "h_rate": self.h_rate,
            "alpha_rate": self.alpha_rate,
            "joint_rate": self.joint_rate,
            "quartiles": self.quartiles,
            "acceptance_range": self.interval.to_dict(),
        }


def study_report(
    records: list[AnnotationRecord],
    predictions: dict[str, WaterlineParams],
    interval: AcceptanceRange,
    disciplines: dict[str, str] | None = None,
) -> StudyReport:
    """Acceptance rates and error quartiles of predictions against the consensus.

    ``disciplines`` optionally maps image_id to a discipline label, adding
    per-discipline quartile breakdowns next to the combined ones.
    """
    gts = aggregate_ground_truth(records)
    missing = [gt.image_id for gt in gts if gt.image_id not in predictions]
    if missing:
        raise ValueError(f"no predictions for images: {missing}")

    results = {gt.image_id: acceptance_check(predictions[gt.image_id], gt, interval) for gt in gts}
    n = len(results)
    checks = list(results.values())
    eps_h = np.array([c.eps_h for c in checks])
    eps_alpha = np.array([c.eps_alpha for c in checks])

    quartiles = {
        "combined": {"eps_h": _quartiles(eps_h), "eps_alpha": _quartiles(eps_alpha)}
    }
    if disciplines:
        labels = sorted({disciplines[i] for i in results if i in disciplines})
        for label in labels:
            ids = [i for i in results if disciplines.get(i) == label]
            quartiles[label] = {
                "eps_h": _quartiles(np.array([results[i].eps_h for i in ids])),
                "eps_alpha": _quartiles(np.array([results[i].eps_alpha for i in ids])),
            }

    return StudyReport(
        n_images=n,
        h_rate=sum(c.h_ok for c in checks) / n,
        alpha_rate=sum(c.alpha_ok for c in checks) / n,
        joint_rate=sum(c.accepted for c in checks) / n,
        quartiles=quartiles,
        interval=interval,
    )


# -- dataset files -----------------------------------------------------------


def load_annotations(path: str | Path) -> list[AnnotationRecord]:
    """Read a newline-delimited annotation dataset, rejecting duplicate (image, expert) pairs."""
    records = []
    seen: set[tuple[str, str]] = set()
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = AnnotationRecord.from_dict(json.loads(line))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{path}:{lineno}: bad annotation record: {exc}") from exc
        key = (rec.image_id, rec.expert_id)
        if key in seen:
            raise ValueError(f"{path}:{lineno}: duplicate annotation for {key}")
        seen.add(key)
        records.append(rec)
    return records


def save_annotations(records: list[AnnotationRecord], path: str | Path) -> None:
    lines = [json.dumps(rec.to_dict()) for rec in records]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))

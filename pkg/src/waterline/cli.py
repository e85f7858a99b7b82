"""Command-line entry point.

Batch commands (detect, evaluate, build-study, metrics, synth) call the
library directly and write deterministic machine-readable outputs; serve
boots the HTTP annotation service.  Exit codes: 0 success, 1 when some items
failed but the run produced output, 2 when the input was unusable.
"""

from __future__ import annotations

import json
import sys
from dataclasses import replace
from pathlib import Path

import click
from PIL import Image

from .config import Config
from .errors import WaterlineError
from .geometry import WaterlineParams
from .pipeline import detect_waterline
from .segmentation import (
    CLASSES,
    f1_per_class,
    iou,
    load_detection_index,
    load_groundtruth_index,
    select_instance,
)
from .stats import (
    aggregate_ground_truth,
    calibrate_u,
    deviations,
    kruskal_wallis,
    load_annotations,
    pooled_sigma,
    study_report,
)
from .study import GroupSizes, ImageRef, base_image_id, build_study, save_manifest
from .synth import generate_batch


def _fail(message: object, code: int = 2) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_config(config_path: str | None, **overrides) -> Config:
    try:
        cfg = Config.from_file(config_path) if config_path else Config()
        changed = {k: v for k, v in overrides.items() if v is not None}
        return replace(cfg, **changed) if changed else cfg
    except (OSError, ValueError) as exc:
        _fail(exc)


def _write_ndjson(path: str | Path, lines: list[str]) -> None:
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def _load_predictions(path: str | Path) -> dict[str, WaterlineParams]:
    """Prediction records keyed by image id; error records are skipped."""
    preds: dict[str, WaterlineParams] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
        if "error" in rec:
            continue
        try:
            image_id = str(rec["image_id"])
            params = WaterlineParams(
                h=float(rec["h"]), alpha=float(rec["alpha"]), center_x=int(rec["center_x"])
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{path}:{lineno}: bad prediction record: {exc}") from exc
        if image_id in preds:
            raise ValueError(f"{path}:{lineno}: duplicate prediction for {image_id}")
        preds[image_id] = params
    return preds


@click.group()
def main() -> None:
    """Waterline estimation and expert-study toolkit."""


@main.command()
@click.argument("index_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_file", type=click.Path(dir_okay=False, writable=True))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--center-x", type=int, default=None, help="reference abscissa for h")
def detect(index_file: str, out_file: str, config_path: str | None, center_x: int | None) -> None:
    """Fit a waterline for every image of a detection index."""
    cfg = _load_config(config_path, center_x=center_x)
    try:
        sets = load_detection_index(index_file)
    except (OSError, ValueError) as exc:
        _fail(exc)

    lines = []
    failures = 0
    for ds in sets:
        try:
            det = select_instance(ds)
            params = detect_waterline(det.mask, center_x=cfg.center_x)
            lines.append(json.dumps({
                "image_id": ds.image_id,
                "h": params.h,
                "alpha": params.alpha,
                "center_x": params.center_x,
                "config_hash": cfg.config_hash,
            }))
        except WaterlineError as exc:
            failures += 1
            lines.append(json.dumps({
                "image_id": ds.image_id,
                "error": type(exc).__name__.removesuffix("Error"),
                "message": str(exc),
                "config_hash": cfg.config_hash,
            }))
    _write_ndjson(out_file, lines)
    click.echo(f"wrote {len(lines)} records to {out_file}" +
               (f" ({failures} failed)" if failures else ""))
    if failures:
        sys.exit(1)


@main.command()
@click.argument("annotations_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("predictions_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--coverage", type=float, default=None, help="target containment fraction")
@click.option("--joint/--per-parameter", "joint", default=None,
              help="calibrate u on joint or per-parameter containment")
@click.option("--report", "report_path", type=click.Path(dir_okay=False, writable=True),
              help="also write a machine-readable report")
def evaluate(annotations_file: str, predictions_file: str, config_path: str | None,
             coverage: float | None, joint: bool | None, report_path: str | None) -> None:
    """Grade predictions against the expert consensus of an annotation dataset."""
    cfg = _load_config(config_path, coverage_target=coverage, joint_calibration=joint)
    try:
        records = load_annotations(annotations_file)
        raw_preds = _load_predictions(predictions_file)
        if not records:
            raise ValueError(f"{annotations_file}: no annotation records")
        gts = aggregate_ground_truth(records)
        # a re-shown image is graded against the prediction of the underlying picture
        missing = [gt.image_id for gt in gts if base_image_id(gt.image_id) not in raw_preds]
        if missing:
            raise ValueError(f"no predictions for annotated images: {missing}")
        preds = {gt.image_id: raw_preds[base_image_id(gt.image_id)] for gt in gts}

        table = deviations(records, gts)
        per_expert = table.by_expert()
        kw_h = kw_alpha = None
        if len(per_expert) >= 2:
            kw_h = kruskal_wallis([t.eps_h().tolist() for t in per_expert.values()])
            kw_alpha = kruskal_wallis([t.eps_alpha().tolist() for t in per_expert.values()])
        sigma_h, sigma_alpha = pooled_sigma(table)
        interval = calibrate_u(
            table, sigma_h, sigma_alpha,
            coverage=cfg.coverage_target, grid_step=cfg.u_grid_step,
            joint=cfg.joint_calibration,
        )
        report = study_report(records, preds, interval)
    except (OSError, ValueError) as exc:
        _fail(exc)

    click.echo(f"images: {report.n_images}   annotations: {len(records)}   "
               f"experts: {len(per_expert)}")
    click.echo(f"sigma_h = {sigma_h:.4f} px   sigma_alpha = {sigma_alpha:.4f} deg")
    click.echo(f"u = {interval.u:g}  ->  delta_h = +/-{interval.delta_h:.2f} px, "
               f"delta_alpha = +/-{interval.delta_alpha:.2f} deg")
    if kw_h is not None:
        click.echo(f"expert agreement, height: H = {kw_h.H:.4f}, p = {kw_h.p:.4f}")
        click.echo(f"expert agreement, angle:  H = {kw_alpha.H:.4f}, p = {kw_alpha.p:.4f}")
    else:
        click.echo("expert agreement: needs at least 2 experts, skipped")
    click.echo(f"acceptance rates: height {report.h_rate:.4f}, angle {report.alpha_rate:.4f}, "
               f"joint {report.joint_rate:.4f}")

    if report_path:
        payload = report.to_dict()
        payload["n_annotations"] = len(records)
        payload["n_experts"] = len(per_expert)
        payload["kruskal_wallis"] = None if kw_h is None else {
            "h": {"H": kw_h.H, "p": kw_h.p},
            "alpha": {"H": kw_alpha.H, "p": kw_alpha.p},
        }
        payload["config_hash"] = cfg.config_hash
        Path(report_path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _read_index_images(path: str | Path) -> list[tuple[str, str]]:
    """(image_id, image_file) pairs of a detection index, without loading masks."""
    out = []
    seen: set[str] = set()
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            image_id, image_file = str(rec["image_id"]), str(rec["image_file"])
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ValueError(f"{path}:{lineno}: bad index record: {exc}") from exc
        if image_id in seen:
            raise ValueError(f"{path}:{lineno}: duplicate image id {image_id}")
        seen.add(image_id)
        out.append((image_id, image_file))
    return out


@main.command("build-study")
@click.argument("index_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("predictions_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_manifest", type=click.Path(dir_okay=False, writable=True))
@click.option("--sizes", default="90,20,10,10", show_default=True,
              help="group sizes A,B,C,D; B re-shows images from A")
@click.option("--seed", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
def build_study_cmd(index_file: str, predictions_file: str, out_manifest: str,
                    sizes: str, seed: int | None, config_path: str | None) -> None:
    """Assemble the study manifest: groups, perturbed initial lines, task ids."""
    cfg = _load_config(config_path, seed=seed)
    try:
        parts = [int(p) for p in sizes.split(",")]
        if len(parts) != 4:
            raise ValueError(f"--sizes wants 4 comma-separated counts, got {sizes!r}")
        group_sizes = GroupSizes(*parts)
        base = Path(index_file).parent
        images = []
        for image_id, image_file in _read_index_images(index_file):
            file_path = Path(image_file)
            if not file_path.is_absolute():
                file_path = base / file_path
            with Image.open(file_path) as im:
                width, height = im.size
            images.append(ImageRef(image_id=image_id, image_file=image_file,
                                   width=width, height=height))
        predictions = _load_predictions(predictions_file)
        tasks = build_study(images, predictions, group_sizes, seed=cfg.seed)
    except (OSError, ValueError) as exc:
        _fail(exc)
    save_manifest(tasks, out_manifest)
    click.echo(f"wrote {len(tasks)} tasks over {group_sizes.distinct_images} images "
               f"to {out_manifest}")


@main.command()
@click.argument("detection_index", type=click.Path(exists=True, dir_okay=False))
@click.argument("groundtruth_index", type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--report", "report_path", type=click.Path(dir_okay=False, writable=True))
def metrics(detection_index: str, groundtruth_index: str,
            config_path: str | None, report_path: str | None) -> None:
    """Segmentation overlap (IoU) and classification (F1) against ground truth."""
    cfg = _load_config(config_path)
    try:
        det_sets = load_detection_index(detection_index)
        truths = {gt.image_id: gt for gt in load_groundtruth_index(groundtruth_index)}
        if {ds.image_id for ds in det_sets} != set(truths):
            raise ValueError("detection and ground-truth indexes cover different images")
    except (OSError, ValueError) as exc:
        _fail(exc)

    per_image: dict[str, float] = {}
    pred_classes, true_classes = [], []
    errors = []
    for ds in det_sets:
        gt = truths[ds.image_id]
        try:
            det = select_instance(ds)
            per_image[ds.image_id] = iou(det.mask, gt.mask)
        except (WaterlineError, ValueError) as exc:
            errors.append((ds.image_id, str(exc)))
            continue
        pred_classes.append(det.cls)
        true_classes.append(gt.cls)

    if not per_image:
        _fail("no image produced a usable detection")
    vals = list(per_image.values())
    mean = sum(vals) / len(vals)
    std = (sum((v - mean) ** 2 for v in vals) / len(vals)) ** 0.5
    f1 = {cls: f1_per_class(pred_classes, true_classes, cls) for cls in CLASSES}

    click.echo(f"images: {len(per_image)}" + (f" ({len(errors)} failed)" if errors else ""))
    click.echo(f"iou: mean {mean:.4f}  std {std:.4f}  min {min(vals):.4f}  max {max(vals):.4f}")
    for cls in CLASSES:
        click.echo(f"f1[{cls}] = {f1[cls]:.4f}")
    for image_id, message in errors:
        click.echo(f"failed {image_id}: {message}", err=True)

    if report_path:
        payload = {
            "iou": {"per_image": per_image, "mean": mean, "std": std,
                    "min": min(vals), "max": max(vals)},
            "f1": f1,
            "failed": [{"image_id": i, "message": m} for i, m in errors],
            "config_hash": cfg.config_hash,
        }
        Path(report_path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    if errors:
        sys.exit(1)


@main.command()
@click.option("--manifest", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--log", "log_path", required=True, type=click.Path(dir_okay=False, writable=True),
              help="append-only annotation log; replayed on restart")
@click.option("--experts", default=None,
              help="comma-separated roster; omit to accept any expert id")
@click.option("--seed", type=int, default=None)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
def serve(manifest: str, log_path: str, experts: str | None, seed: int | None,
          host: str, port: int, config_path: str | None) -> None:
    """Run the annotation study HTTP service."""
    import uvicorn

    from .service import create_app

    cfg = _load_config(config_path, seed=seed)
    roster = None
    if experts:
        roster = [e.strip() for e in experts.split(",") if e.strip()]
    try:
        app = create_app(manifest, log_path, experts=roster, seed=cfg.seed, config=cfg)
    except (OSError, ValueError) as exc:
        _fail(exc)
    uvicorn.run(app, host=host, port=port)


@main.command()
@click.option("--count", type=int, default=10, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--width", type=int, default=1024, show_default=True)
@click.option("--height", type=int, default=576, show_default=True)
@click.option("--notch-fraction", type=float, default=0.5, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
def synth(count: int, out_dir: str, width: int, height: int, notch_fraction: float,
          seed: int | None, config_path: str | None) -> None:
    """Generate synthetic hull masks with known waterlines."""
    cfg = _load_config(config_path, seed=seed)
    try:
        batch = generate_batch(count, width=width, height=height, seed=cfg.seed,
                               notch_fraction=notch_fraction, center_x=cfg.center_x)
    except ValueError as exc:
        _fail(exc)
    out = Path(out_dir)
    (out / "masks").mkdir(parents=True, exist_ok=True)

    index_lines, truth_lines = [], []
    for i, (image_id, mask, truth) in enumerate(batch):
        mask_file = f"masks/{image_id}.png"
        mask.save(out / mask_file)
        index_lines.append(json.dumps({
            "image_id": image_id,
            "image_file": mask_file,
            "detections": [
                {"class": CLASSES[i % len(CLASSES)], "confidence": 1.0, "mask_file": mask_file}
            ],
        }))
        truth_lines.append(json.dumps({
            "image_id": image_id,
            "h": truth.h,
            "alpha": truth.alpha,
            "center_x": truth.center_x,
            "config_hash": cfg.config_hash,
        }))
    _write_ndjson(out / "detection_index.jsonl", index_lines)
    _write_ndjson(out / "truths.jsonl", truth_lines)
    click.echo(f"wrote {count} masks, detection_index.jsonl and truths.jsonl to {out}")


if __name__ == "__main__":
    main()

from __future__ import annotations

from pathlib import Path

import pytest

from waterline import (
    GroupSizes,
    ImageRef,
    build_study,
    detect_waterline,
    generate_batch,
    save_manifest,
)


@pytest.fixture
def small_study(tmp_path: Path) -> dict:
    """A ready-to-serve study: 4 synthetic images, predictions, 5-task manifest."""
    batch = generate_batch(4, width=320, height=240, seed=11, notch_fraction=0.0)
    images = []
    predictions = {}
    masks_dir = tmp_path / "masks"
    masks_dir.mkdir()
    for image_id, mask, _truth in batch:
        path = masks_dir / f"{image_id}.png"
        mask.save(path)
        images.append(
            ImageRef(
                image_id=image_id,
                image_file=str(path),
                width=mask.width,
                height=mask.height,
            )
        )
        predictions[image_id] = detect_waterline(mask)
    tasks = build_study(images, predictions, GroupSizes(2, 1, 1, 1), seed=11)
    manifest = tmp_path / "manifest.jsonl"
    save_manifest(tasks, manifest)
    return {
        "tmp_path": tmp_path,
        "images": images,
        "predictions": predictions,
        "tasks": tasks,
        "manifest": manifest,
        "log": tmp_path / "annotations.log",
    }

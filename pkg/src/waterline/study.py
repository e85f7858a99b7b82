"""Assembly of the expert annotation study.

The study shows each expert a sequence of images with a pre-drawn waterline.
Group A tasks carry the unmodified automatic line, group B re-shows a subset
of A's images with the line shifted 3 px up, and groups C and D use fresh
images with the line shifted 2 px down and rotated -1.5 / +1.5 degrees.
Group membership stays server-side; the task an expert sees never reveals it.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

from .geometry import StudyGroup, WaterlineParams, perturb


@dataclass(frozen=True)
class ImageRef:
    """An image on disk plus its pixel dimensions."""

    image_id: str
    image_file: str
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError(f"bad image size {self.width}x{self.height}")


@dataclass(frozen=True)
class GroupSizes:
    a: int
    b: int
    c: int
    d: int

    def __post_init__(self) -> None:
        for name, n in zip("abcd", (self.a, self.b, self.c, self.d)):
            if n < 0:
                raise ValueError(f"group {name} size must be >= 0, got {n}")
        if self.b > self.a:
            raise ValueError(f"group B ({self.b}) cannot exceed group A ({self.a})")

    @property
    def total(self) -> int:
        return self.a + self.b + self.c + self.d

    @property
    def distinct_images(self) -> int:
        # B re-uses A's images, so it adds tasks but no new images
        return self.a + self.c + self.d


@dataclass(frozen=True)
class StudyTask:
    """One image shown to the experts, with the line they start from."""

    task_id: str
    image: ImageRef
    group: StudyGroup
    initial_params: WaterlineParams
    order_index: int

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "image_id": self.image.image_id,
            "image_file": self.image.image_file,
            "width": self.image.width,
            "height": self.image.height,
            "group": str(self.group),
            "h": self.initial_params.h,
            "alpha": self.initial_params.alpha,
            "center_x": self.initial_params.center_x,
            "order_index": self.order_index,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StudyTask":
        return cls(
            task_id=str(d["task_id"]),
            image=ImageRef(
                image_id=str(d["image_id"]),
                image_file=str(d["image_file"]),
                width=int(d["width"]),
                height=int(d["height"]),
            ),
            group=StudyGroup(d["group"]),
            initial_params=WaterlineParams(
                h=float(d["h"]), alpha=float(d["alpha"]), center_x=int(d["center_x"])
            ),
            order_index=int(d["order_index"]),
        )


def build_study(
    images: list[ImageRef],
    predictions: dict[str, WaterlineParams],
    sizes: GroupSizes,
    seed: int = 0,
) -> list[StudyTask]:
    """Partition images into groups and attach the (possibly perturbed) shown line.

    ``images`` must contain exactly the distinct images the study needs
    (A + C + D of them); B's tasks re-show images drawn from A.  Assignment
    and the B subset are decided by ``seed`` alone, so the same inputs always
    produce the same study.
    """
    ids = [img.image_id for img in images]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate image ids")
    if len(images) != sizes.distinct_images:
        raise ValueError(
            f"need exactly {sizes.distinct_images} images for sizes {sizes}, got {len(images)}"
        )
    missing = [i for i in ids if i not in predictions]
    if missing:
        raise ValueError(f"no prediction for images: {missing}")

    rng = random.Random(seed)
    pool = list(images)
    rng.shuffle(pool)
    group_a = pool[: sizes.a]
    group_c = pool[sizes.a : sizes.a + sizes.c]
    group_d = pool[sizes.a + sizes.c :]
    group_b = rng.sample(group_a, sizes.b)

    tasks = []
    for group, members in (
        (StudyGroup.A, group_a),
        (StudyGroup.B, group_b),
        (StudyGroup.C, group_c),
        (StudyGroup.D, group_d),
    ):
        for img in members:
            initial = perturb(predictions[img.image_id], group)
            tasks.append(
                StudyTask(
                    task_id=f"{group}:{img.image_id}",
                    image=img,
                    group=group,
                    initial_params=initial,
                    order_index=len(tasks),
                )
            )
    return tasks


def shuffle_for_expert(tasks: list[StudyTask], expert_id: str, seed: int = 0) -> list[StudyTask]:
    """Deterministic per-expert presentation order.

    Seeding with the string "{seed}|{expert_id}" gives every expert their own
    stable shuffle while keeping the whole study reproducible.
    """
    order = list(tasks)
    random.Random(f"{seed}|{expert_id}").shuffle(order)
    return order


def save_manifest(tasks: list[StudyTask], path: str | Path) -> None:
    lines = [json.dumps(t.to_dict()) for t in tasks]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


# Group B re-shows an image that group A already contains, so a full study
# can hold two annotations of the same picture by the same expert.  To keep
# datasets keyed uniquely on (image_id, expert_id), the re-shown instance is
# recorded under "<image_id>#B"; analyses that need the underlying picture
# (e.g. to look up its prediction) strip the suffix again.
B_RESHOW_SUFFIX = "#B"


def dataset_image_id(task: StudyTask) -> str:
    """Identity of the task's image inside an annotation dataset."""
    if task.group is StudyGroup.B:
        return task.image.image_id + B_RESHOW_SUFFIX
    return task.image.image_id


def base_image_id(image_id: str) -> str:
    """Undo dataset_image_id: the id of the underlying picture."""
    return image_id.removesuffix(B_RESHOW_SUFFIX)


def load_manifest(path: str | Path) -> list[StudyTask]:
    tasks = []
    seen: set[str] = set()
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            task = StudyTask.from_dict(json.loads(line))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{path}:{lineno}: bad study task: {exc}") from exc
        if task.task_id in seen:
            raise ValueError(f"{path}:{lineno}: duplicate task id {task.task_id}")
        seen.add(task.task_id)
        tasks.append(task)
    return tasks

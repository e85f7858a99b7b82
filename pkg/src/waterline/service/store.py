"""Study state: manifest, per-expert ordering, and the durable annotation log.

The log is append-only newline-delimited JSON; each line is an annotation
dataset record plus the task_id it answers.  A line is flushed and fsynced
before the submission is acknowledged, and replayed on startup, so a crash
never loses an acknowledged annotation.  The log is the single serialization
point: submissions take a lock, everything else reads immutable data.
"""

from __future__ import annotations

import json
import os
import threading
import time
from pathlib import Path

from ..geometry import WaterlineParams
from ..stats import AnnotationRecord
from ..study import StudyTask, dataset_image_id, load_manifest, shuffle_for_expert


class UnknownExpertError(Exception):
    pass


class DuplicateSubmissionError(Exception):
    pass


class StudyStore:
    def __init__(
        self,
        manifest_path: str | Path,
        log_path: str | Path,
        experts: list[str] | None = None,
        seed: int = 0,
    ) -> None:
        self.tasks = load_manifest(manifest_path)
        if not self.tasks:
            raise ValueError(f"{manifest_path}: empty study manifest")
        self.by_task_id = {t.task_id: t for t in self.tasks}
        self.manifest_dir = Path(manifest_path).resolve().parent
        self.images = {}
        for task in self.tasks:
            self.images.setdefault(task.image.image_id, task.image)
        self.log_path = Path(log_path)
        self.roster = list(experts) if experts else None
        self.seed = seed
        self._lock = threading.Lock()
        self._records: dict[tuple[str, str], AnnotationRecord] = {}
        self._order_cache: dict[str, list[StudyTask]] = {}
        if self.log_path.exists():
            self._replay()

    def _replay(self) -> None:
        for lineno, line in enumerate(self.log_path.read_text().splitlines(), start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                record = AnnotationRecord.from_dict(raw)
                task_id = str(raw["task_id"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{self.log_path}:{lineno}: bad log line: {exc}") from exc
            if task_id not in self.by_task_id:
                raise ValueError(f"{self.log_path}:{lineno}: unknown task {task_id}")
            self._records[(task_id, record.expert_id)] = record

    def check_expert(self, expert_id: str) -> None:
        """With a roster configured, only listed experts may participate."""
        if not expert_id:
            raise UnknownExpertError("empty expert id")
        if self.roster is not None and expert_id not in self.roster:
            raise UnknownExpertError(f"unknown expert {expert_id!r}")

    def order_for(self, expert_id: str) -> list[StudyTask]:
        order = self._order_cache.get(expert_id)
        if order is None:
            order = shuffle_for_expert(self.tasks, expert_id, self.seed)
            self._order_cache[expert_id] = order
        return order

    def next_task(self, expert_id: str) -> StudyTask | None:
        for task in self.order_for(expert_id):
            if (task.task_id, expert_id) not in self._records:
                return task
        return None

    def progress(self, expert_id: str) -> tuple[int, int]:
        completed = sum(1 for key in self._records if key[1] == expert_id)
        return completed, len(self.tasks)

    def image_path(self, image_id: str) -> Path | None:
        ref = self.images.get(image_id)
        if ref is None:
            return None
        path = Path(ref.image_file)
        return path if path.is_absolute() else self.manifest_dir / path

    def submit(
        self, task: StudyTask, expert_id: str, params: WaterlineParams
    ) -> AnnotationRecord:
        """Durably append one annotation; raises on a repeated (task, expert) pair."""
        initial = task.initial_params
        modified = (
            abs(params.h - initial.h) > 1e-6 or abs(params.alpha - initial.alpha) > 1e-6
        )
        record = AnnotationRecord(
            image_id=dataset_image_id(task),
            expert_id=expert_id,
            params=params,
            group=task.group,
            modified=modified,
            timestamp=time.time(),
        )
        key = (task.task_id, expert_id)
        line = json.dumps({"task_id": task.task_id, **record.to_dict()})
        with self._lock:
            if key in self._records:
                raise DuplicateSubmissionError(
                    f"expert {expert_id!r} already annotated task {task.task_id!r}"
                )
            with open(self.log_path, "a") as fh:
                fh.write(line + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            self._records[key] = record
        return record

    def export_records(self) -> list[AnnotationRecord]:
        return list(self._records.values())

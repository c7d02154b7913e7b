"""Annotation queue and HTTP API for the manual eye-clicking pass.

Images the automatic pipeline routed to failure buckets become tasks in
a FIFO queue.  A client leases the oldest pending task, fetches the
image, clicks the two eye centers, and submits; the service resumes the
pipeline from the clicked points and appends a manual_success /
manual_failed record to the run manifest.

Queue state is a JSONL journal under the run root, replayed on startup,
so a restart resumes exactly where the service stopped.  All mutations
go through one lock; submits are idempotent per task.
"""

import base64
import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DegenerateEyePairError, FacepipeError
from .image_io import encode_png_bytes, load_image
from .pipeline import (
    BUCKETS,
    PipelineConfig,
    PipelineResult,
    append_manifest_record,
    resume_with_manual_eyes,
)

JOURNAL_NAME = "annotations.jsonl"
DEFAULT_LEASE_SECONDS = 600.0

_CONTENT_TYPES = {
    ".pgm": "image/x-portable-graymap",
    ".ppm": "image/x-portable-pixmap",
    ".png": "image/png",
    ".jpg": "image/jpeg",
    ".jpeg": "image/jpeg",
}


class UnknownTaskError(KeyError):
    pass


class StaleLeaseError(RuntimeError):
    pass


class AnnotationBoundsError(ValueError):
    pass


@dataclass
class AnnotationTask:
    """One bucket image awaiting (or holding) a manual eye annotation."""

    id: str  # basename; also the dedup key across buckets
    rel_path: str  # e.g. "enf/portrait.pgm", relative to the run root
    bucket: str
    status: str = "pending"  # pending | leased | done
    lease_client: str | None = None
    lease_expires: float = 0.0
    record: dict | None = None  # manifest record stored at submit time
    _size: tuple[int, int] | None = field(default=None, repr=False)


class AnnotationQueue:
    """FIFO task queue over the failure buckets of one pipeline run.

    The clock is injectable so lease expiry is testable without
    sleeping.  All public methods are thread-safe; the journal gets one
    line per state change and is replayed on construction.
    """

    def __init__(
        self,
        config: PipelineConfig,
        lease_seconds: float = DEFAULT_LEASE_SECONDS,
        clock=time.time,
    ):
        self.config = config
        self.run_root = Path(config.run_root)
        self.lease_seconds = float(lease_seconds)
        self.clock = clock
        self.tasks: dict[str, AnnotationTask] = {}
        self.order: list[str] = []
        self.manual_success = 0
        self.manual_failed = 0
        self._lock = threading.Lock()
        self._journal_path = self.run_root / JOURNAL_NAME
        self._replay()
        self._journal = open(self._journal_path, "a")

    # -- persistence ---------------------------------------------------

    def _replay(self) -> None:
        if not self._journal_path.exists():
            return
        for line in self._journal_path.read_text().splitlines():
            if not line.strip():
                continue
            ev = json.loads(line)
            kind = ev["event"]
            if kind == "enqueue":
                task = AnnotationTask(id=ev["task"], rel_path=ev["path"], bucket=ev["bucket"])
                self.tasks[task.id] = task
                self.order.append(task.id)
            elif kind == "lease":
                task = self.tasks[ev["task"]]
                task.status = "leased"
                task.lease_client = ev["client"]
                task.lease_expires = ev["expires"]
            elif kind == "submit":
                task = self.tasks[ev["task"]]
                task.status = "done"
                task.record = ev["record"]
                if ev["outcome"] == "manual_success":
                    self.manual_success += 1
                else:
                    self.manual_failed += 1

    def _log(self, event: dict) -> None:
        self._journal.write(json.dumps(event) + "\n")
        self._journal.flush()

    def close(self) -> None:
        self._journal.close()

    # -- queue operations ----------------------------------------------

    def enqueue_from_buckets(self) -> int:
        """One pending task per bucket image not seen before; idempotent."""
        added = 0
        with self._lock:
            for bucket in BUCKETS:
                folder = self.run_root / bucket
                if not folder.is_dir():
                    continue
                for path in sorted(folder.iterdir()):
                    if not path.is_file() or path.name in self.tasks:
                        continue
                    task = AnnotationTask(
                        id=path.name, rel_path=f"{bucket}/{path.name}", bucket=bucket
                    )
                    self.tasks[task.id] = task
                    self.order.append(task.id)
                    self._log(
                        {
                            "event": "enqueue",
                            "task": task.id,
                            "path": task.rel_path,
                            "bucket": bucket,
                        }
                    )
                    added += 1
        return added

    def _effective_status(self, task: AnnotationTask, now: float) -> str:
        if task.status == "leased" and task.lease_expires <= now:
            return "pending"
        return task.status

    def next_task(self, client: str) -> AnnotationTask | None:
        """Lease the oldest pending (or lease-expired) task to client."""
        now = self.clock()
        with self._lock:
            for task_id in self.order:
                task = self.tasks[task_id]
                if self._effective_status(task, now) != "pending":
                    continue
                task.status = "leased"
                task.lease_client = client
                task.lease_expires = now + self.lease_seconds
                self._log(
                    {
                        "event": "lease",
                        "task": task.id,
                        "client": client,
                        "expires": task.lease_expires,
                    }
                )
                return task
            return None

    def task_image_path(self, task_id: str) -> Path:
        task = self.tasks.get(task_id)
        if task is None:
            raise UnknownTaskError(task_id)
        return self.run_root / task.rel_path

    def task_image_size(self, task_id: str) -> tuple[int, int]:
        """(width, height), decoded once and cached on the task."""
        task = self.tasks.get(task_id)
        if task is None:
            raise UnknownTaskError(task_id)
        if task._size is None:
            img = load_image(self.run_root / task.rel_path)
            task._size = (img.width, img.height)
        return task._size

    def submit(
        self, task_id: str, client: str, left: tuple[float, float], right: tuple[float, float]
    ) -> tuple[dict, PipelineResult | None]:
        """Apply a clicked annotation; returns (manifest record, result).

        Re-submitting a done task returns the stored record without
        re-running anything.  The points must be distinct and inside the
        image; the lease must belong to the caller and be unexpired.
        """
        now = self.clock()
        with self._lock:
            task = self.tasks.get(task_id)
            if task is None:
                raise UnknownTaskError(task_id)
            if task.status == "done":
                return task.record, None
            if (
                task.status != "leased"
                or task.lease_client != client
                or task.lease_expires <= now
            ):
                raise StaleLeaseError(
                    f"task {task_id} is not currently leased by {client!r}"
                )
            w, h = self.task_image_size(task_id)
            for name, (x, y) in (("left", left), ("right", right)):
                if not (0 <= x < w and 0 <= y < h):
                    raise AnnotationBoundsError(
                        f"{name} point ({x}, {y}) outside image bounds {w}x{h}"
                    )
            # raises DegenerateEyePairError for coincident points before
            # any state changes
            result = resume_with_manual_eyes(
                self.run_root / task.rel_path, left, right, self.config
            )
            outcome = "manual_success" if result.ok else "manual_failed"
            record = result.manifest_record()
            record["outcome"] = outcome
            task.status = "done"
            task.record = record
            if result.ok:
                self.manual_success += 1
            else:
                self.manual_failed += 1
            append_manifest_record(record, self.run_root / "manifest.jsonl")
            self._log(
                {
                    "event": "submit",
                    "task": task_id,
                    "client": client,
                    "left": list(left),
                    "right": list(right),
                    "outcome": outcome,
                    "record": record,
                }
            )
            return record, result

    def progress(self) -> dict:
        now = self.clock()
        with self._lock:
            counts = {"pending": 0, "leased": 0, "done": 0}
            for task in self.tasks.values():
                counts[self._effective_status(task, now)] += 1
            counts["manual_success"] = self.manual_success
            counts["manual_failed"] = self.manual_failed
            return counts


def create_app(queue: AnnotationQueue, static_dir: Path | None = None):
    """FastAPI app exposing the queue; optionally serves the UI at /."""
    from fastapi import FastAPI, HTTPException, Response
    from fastapi.responses import JSONResponse
    from pydantic import BaseModel

    class ClickPoint(BaseModel):
        x: float
        y: float

    class AnnotationBody(BaseModel):
        left: ClickPoint
        right: ClickPoint
        client: str

    app = FastAPI(title="eye annotation service", docs_url=None, redoc_url=None)

    def error(status: int, code: str, message: str) -> JSONResponse:
        return JSONResponse(
            status_code=status, content={"error": {"code": code, "message": message}}
        )

    @app.get("/v1/tasks/next")
    def tasks_next(client: str):
        task = queue.next_task(client)
        if task is None:
            return Response(status_code=204)
        w, h = queue.task_image_size(task.id)
        return {
            "id": task.id,
            "image_url": f"/v1/images/{task.id}",
            "width": w,
            "height": h,
            "bucket": task.bucket,
            "lease_expires": task.lease_expires,
        }

    @app.get("/v1/images/{task_id}")
    def task_image(task_id: str, format: str | None = None):
        try:
            path = queue.task_image_path(task_id)
        except UnknownTaskError:
            raise HTTPException(status_code=404, detail=f"unknown task {task_id!r}")
        if format == "png":
            # browsers cannot render PGM/PPM, so the UI asks for PNG
            img = load_image(path)
            return Response(content=encode_png_bytes(img), media_type="image/png")
        if format is not None:
            raise HTTPException(status_code=422, detail=f"unsupported format {format!r}")
        media = _CONTENT_TYPES.get(path.suffix.lower(), "application/octet-stream")
        return Response(content=path.read_bytes(), media_type=media)

    @app.post("/v1/tasks/{task_id}/annotation")
    def submit_annotation(task_id: str, body: AnnotationBody):
        try:
            record, result = queue.submit(
                task_id, body.client, (body.left.x, body.left.y), (body.right.x, body.right.y)
            )
        except UnknownTaskError:
            return error(404, "unknown_task", f"unknown task {task_id!r}")
        except StaleLeaseError as exc:
            return error(409, "stale_lease", str(exc))
        except AnnotationBoundsError as exc:
            return error(422, "out_of_bounds", str(exc))
        except DegenerateEyePairError as exc:
            return error(422, "degenerate_pair", str(exc))
        except FacepipeError as exc:
            return error(500, "pipeline_error", str(exc))
        payload = dict(record)
        if result is not None and result.ok and result.output:
            chip = load_image(queue.run_root / result.output)
            payload["preview_png_base64"] = base64.b64encode(
                encode_png_bytes(chip)
            ).decode("ascii")
        return payload

    @app.get("/v1/progress")
    def progress():
        return queue.progress()

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app


def packaged_static_dir() -> Path | None:
    """Bundled browser UI, if the static assets were built and shipped."""
    root = Path(__file__).parent / "static"
    return root if (root / "index.html").is_file() else None

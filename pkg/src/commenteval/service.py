"""HTTP facade for the annotation workflow.

File-backed persistence only: an append-only rating log is the commit
point, and a restart replays it against the loaded assignment set. All
state transitions funnel through one lock.
"""

from __future__ import annotations

import json
import threading
import time
from pathlib import Path

from fastapi import FastAPI, HTTPException, Response
from fastapi.responses import PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .humaneval import (
    Ack,
    AssignmentSet,
    DuplicateRatingError,
    Rating,
    RatingProtocol,
    ScoreRangeError,
    UnknownRaterError,
    UnknownTaskError,
    WrongRaterError,
)


class AnnotationService:
    """Protocol state plus the rating log; safe for concurrent handlers."""

    def __init__(self, assignments: AssignmentSet, log_path, clock=time.time):
        self.protocol = RatingProtocol(assignments)
        self.log_path = Path(log_path)
        self._clock = clock
        self._lock = threading.Lock()
        if self.log_path.exists():
            with open(self.log_path, encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    entry = json.loads(line)
                    self.protocol.submit_rating(Rating(
                        task_id=entry["task_id"],
                        rater_id=entry["rater_id"],
                        naturalness=entry["naturalness"],
                        consistency=entry["consistency"],
                        usefulness=entry["usefulness"],
                        timestamp=entry.get("timestamp", 0.0),
                    ))
        self._log_fh = open(self.log_path, "a", encoding="utf-8")

    def close(self):
        self._log_fh.close()

    def next_task(self, rater_id: str):
        with self._lock:
            return self.protocol.next_task(rater_id)

    def post_rating(self, task_id: str, rater_id: str, naturalness: int,
                    consistency: int, usefulness: int,
                    timestamp: float | None = None) -> Ack:
        rating = Rating(
            task_id=task_id,
            rater_id=rater_id,
            naturalness=naturalness,
            consistency=consistency,
            usefulness=usefulness,
            timestamp=self._clock() if timestamp is None else timestamp,
        )
        with self._lock:
            ack = self.protocol.submit_rating(rating)
            self._log_fh.write(json.dumps({
                "task_id": rating.task_id,
                "rater_id": rating.rater_id,
                "naturalness": rating.naturalness,
                "consistency": rating.consistency,
                "usefulness": rating.usefulness,
                "timestamp": rating.timestamp,
            }) + "\n")
            self._log_fh.flush()
        return ack

    def progress(self) -> dict:
        with self._lock:
            return self.protocol.progress()

    def export_jsonl(self) -> str:
        with self._lock:
            return self.protocol.export_jsonl()

    def aggregate(self):
        with self._lock:
            return self.protocol.aggregate()


class RatingPayload(BaseModel):
    task_id: str
    rater_id: str
    naturalness: int = Field(ge=1, le=5)
    consistency: int = Field(ge=1, le=5)
    usefulness: int = Field(ge=1, le=5)
    timestamp: float | None = None


def create_app(service: AnnotationService, ui_dir=None) -> FastAPI:
    app = FastAPI(title="commenteval annotation service")

    @app.get("/api/raters/{rater_id}/next")
    def next_task(rater_id: str):
        try:
            task = service.next_task(rater_id)
        except UnknownRaterError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        if task is None:
            return Response(status_code=204)
        return task.to_view()

    @app.post("/api/ratings")
    def post_rating(payload: RatingPayload):
        try:
            ack = service.post_rating(
                task_id=payload.task_id,
                rater_id=payload.rater_id,
                naturalness=payload.naturalness,
                consistency=payload.consistency,
                usefulness=payload.usefulness,
                timestamp=payload.timestamp,
            )
        except (UnknownTaskError, UnknownRaterError) as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except WrongRaterError as exc:
            raise HTTPException(status_code=403, detail=str(exc))
        except DuplicateRatingError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except ScoreRangeError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"accepted": ack.accepted, "conflict_escalated": ack.conflict_escalated}

    @app.get("/api/progress")
    def progress():
        return service.progress()

    @app.get("/api/export")
    def export():
        return PlainTextResponse(service.export_jsonl(),
                                 media_type="application/x-ndjson")

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def load_assignments(path) -> AssignmentSet:
    with open(path, encoding="utf-8") as fh:
        return AssignmentSet.from_json(json.load(fh))


def save_assignments(assignments: AssignmentSet, path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(assignments.to_json(), fh, ensure_ascii=False, indent=2)
        fh.write("\n")
    return path

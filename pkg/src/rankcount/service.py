"""HTTP service for live pairwise annotation sessions.

Each session keeps a judgment graph over a pool of image ids.  Proposed
pairs are drawn seeded-uniform from the pairs that are still undecided:
not implied by the closure of earlier judgments, not skipped, and with
both images under the per-image judgment cap.  Contradictory judgments
are rejected with the witness path that proves the opposite order.
"""
from __future__ import annotations

import itertools
import threading
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.exceptions import RequestValidationError
from fastapi.responses import FileResponse, JSONResponse, Response
from pydantic import BaseModel

from .rankgraph import MANUAL, RELATION_UNKNOWN, ConflictError, RankGraph
from .synthdata import manifest_paths, sparsity_report

DEFAULT_CAP = 3
MEDIA_TYPES = {
    ".pgm": "image/x-portable-graymap",
    ".png": "image/png",
    ".jpg": "image/jpeg",
    ".jpeg": "image/jpeg",
}


class SessionCreate(BaseModel):
    pool: list[str] | None = None  # None: every image in the manifest
    cap: int | None = None
    seed: int | None = None


class JudgmentBody(BaseModel):
    i: str
    j: str
    verdict: int


class AnnotationSession:
    def __init__(self, session_id: str, pool: list[str], cap: int, seed: int):
        self.id = session_id
        self.pool = sorted(pool)
        self.cap = cap
        self.graph = RankGraph()
        self.skipped: set[frozenset[str]] = set()
        self.judgment_counts = {sid: 0 for sid in self.pool}
        self.rng = np.random.default_rng(seed)
        self.lock = threading.Lock()

    def eligible_pairs(self) -> list[tuple[str, str]]:
        out = []
        for a, b in itertools.combinations(self.pool, 2):
            if self.judgment_counts[a] >= self.cap or self.judgment_counts[b] >= self.cap:
                continue
            if frozenset((a, b)) in self.skipped:
                continue
            if self.graph.query_relation(a, b) != RELATION_UNKNOWN:
                continue
            out.append((a, b))
        return out

    def next_pair(self) -> tuple[str, str] | None:
        eligible = self.eligible_pairs()
        if not eligible:
            return None
        return eligible[int(self.rng.integers(len(eligible)))]

    def submit(self, i: str, j: str, verdict: int) -> dict:
        if verdict == 0:
            self.skipped.add(frozenset((i, j)))
        else:
            self.graph.add_pair(i, j, verdict)  # ConflictError leaves state untouched
        self.judgment_counts[i] += 1
        self.judgment_counts[j] += 1
        return self.stats()

    def stats(self) -> dict:
        label = self.graph.label_stats()
        manual_pairs = [p for p in self.graph.transitive_closure() if p.provenance == MANUAL]
        return {
            "manual": label.manual,
            "implied": label.implied,
            "total": label.total,
            "remaining": len(self.eligible_pairs()),
            "zeta_mean": sparsity_report(manual_pairs).zeta_mean,
        }

    def export_csv(self) -> str:
        manual_pairs = [p for p in self.graph.transitive_closure() if p.provenance == MANUAL]
        lines = ["i,j,q"]
        lines.extend(f"{p.hi},{p.lo},1" for p in manual_pairs)
        return "\n".join(lines) + "\n"


def create_app(manifest, cap: int = DEFAULT_CAP, default_seed: int = 0, static_dir=None) -> FastAPI:
    images = manifest_paths(manifest)
    if cap < 1:
        raise ValueError("cap must be >= 1")
    app = FastAPI(title="rankcount annotation service")
    sessions: dict[str, AnnotationSession] = {}
    registry_lock = threading.Lock()
    counter = itertools.count(1)

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request, exc):
        return JSONResponse(status_code=400, content={"detail": str(exc.errors()[:1])})

    def get_session(session_id: str) -> AnnotationSession:
        with registry_lock:
            session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        return session

    @app.get("/pool")
    def pool_info():
        return {"ids": sorted(images), "cap": cap, "seed": default_seed}

    @app.post("/sessions", status_code=201)
    def create_session(body: SessionCreate):
        pool = sorted(images) if body.pool is None else body.pool
        session_cap = cap if body.cap is None else body.cap
        seed = default_seed if body.seed is None else body.seed
        if len(pool) < 2:
            raise HTTPException(status_code=400, detail="pool must contain at least 2 ids")
        if len(set(pool)) != len(pool):
            raise HTTPException(status_code=400, detail="pool contains duplicate ids")
        unknown = sorted(set(pool) - set(images))
        if unknown:
            raise HTTPException(status_code=400, detail=f"unknown image ids: {unknown[:5]}")
        if session_cap < 1:
            raise HTTPException(status_code=400, detail="cap must be >= 1")
        with registry_lock:
            session_id = f"s{next(counter):06d}"
            sessions[session_id] = AnnotationSession(session_id, pool, session_cap, seed)
        return {"session_id": session_id}

    @app.get("/sessions/{session_id}/next")
    def next_pair(session_id: str):
        session = get_session(session_id)
        with session.lock:
            pair = session.next_pair()
        if pair is None:
            return {"done": True}
        return {"i": pair[0], "j": pair[1]}

    @app.post("/sessions/{session_id}/judgments")
    def submit_judgment(session_id: str, body: JudgmentBody):
        session = get_session(session_id)
        if body.verdict not in (-1, 0, 1):
            raise HTTPException(status_code=400, detail="verdict must be -1, 0, or 1")
        for sid in (body.i, body.j):
            if sid not in session.judgment_counts:
                raise HTTPException(status_code=404, detail=f"unknown image {sid!r}")
        if body.i == body.j:
            raise HTTPException(status_code=400, detail="cannot judge an image against itself")
        with session.lock:
            try:
                stats = session.submit(body.i, body.j, body.verdict)
            except ConflictError as exc:
                return JSONResponse(status_code=409, content={"witness": list(exc.witness)})
        return {"accepted": True, "stats": stats}

    @app.get("/sessions/{session_id}/stats")
    def session_stats(session_id: str):
        session = get_session(session_id)
        with session.lock:
            return session.stats()

    @app.get("/sessions/{session_id}/export")
    def export_session(session_id: str):
        session = get_session(session_id)
        with session.lock:
            text = session.export_csv()
        return Response(content=text, media_type="text/csv")

    @app.get("/images/{image_id}")
    def serve_image(image_id: str):
        path = images.get(image_id)
        if path is None or not Path(path).is_file():
            raise HTTPException(status_code=404, detail=f"unknown image {image_id!r}")
        media = MEDIA_TYPES.get(Path(path).suffix.lower(), "application/octet-stream")
        return FileResponse(path, media_type=media)

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app

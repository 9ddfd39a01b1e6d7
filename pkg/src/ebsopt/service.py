"""HTTP facade: submit queries, poll jobs, read the roster.

Jobs run on a small in-process worker pool over a bounded queue; completed
jobs (trace included) are persisted to the data directory so a restart
loses nothing. GETs never mutate; the job registry is guarded by a single
lock and job payloads become immutable once a terminal state is reached.
"""

from __future__ import annotations

import json
import os
import queue
import threading
import time
import uuid
from dataclasses import dataclass, field

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse, PlainTextResponse
from pydantic import BaseModel

from .agent import AgentConfig, MockAdapter, Query, run
from .forest import load as load_forest
from .history import load_store
from .metrics import locality
from .model import K_FULL, K_LOW, K_MID, SOC_LEVELS, SystemConfig
from .solver import SolverOptions

QUEUE_DEPTH = 8
TERMINAL = ("done", "failed")


class QueryRequest(BaseModel):
    text: str
    declared_spots: list[int] | None = None
    max_parameterized: int | None = None
    adapter: str = "mock"
    idempotency_key: str | None = None
    time_limit: float | None = None


@dataclass
class Job:
    id: str
    request: dict
    status: str = "queued"
    iteration: int = 0
    created: float = field(default_factory=time.time)
    finished: float | None = None
    result: dict | None = None
    trace: dict | None = None
    reason: str = ""

    def payload(self, include_trace=True):
        out = {
            "id": self.id,
            "status": self.status,
            "query": self.request.get("text", ""),
            "created": self.created,
        }
        if self.status == "running":
            out["iteration"] = self.iteration
        if self.status == "done" and self.result is not None:
            out.update(self.result)
        if self.status == "failed":
            out["reason"] = self.reason
        if include_trace and self.status in TERMINAL and self.trace is not None:
            out["trace"] = self.trace
        return out


class ServiceState:
    def __init__(self, data_dir, workers=1):
        self.data_dir = data_dir
        self.jobs: dict[str, Job] = {}
        self.by_idempotency: dict[str, str] = {}
        self.lock = threading.Lock()
        self.queue: queue.Queue = queue.Queue(maxsize=QUEUE_DEPTH)
        self.store = None
        self.forest = None
        self.system_config = SystemConfig()
        self._load_data()
        self._restore_jobs()
        self.workers = [
            threading.Thread(target=self._worker, daemon=True, name=f"ebsopt-worker-{i}")
            for i in range(workers)
        ]
        for w in self.workers:
            w.start()

    # -- data ------------------------------------------------------------

    def _load_data(self):
        store_dir = os.path.join(self.data_dir, "store")
        forest_path = os.path.join(self.data_dir, "forest.txt")
        config_path = os.path.join(self.data_dir, "config.json")
        if os.path.isdir(store_dir):
            self.store = load_store(store_dir)
        if os.path.exists(forest_path):
            self.forest = load_forest(forest_path)
        if os.path.exists(config_path):
            with open(config_path, encoding="utf-8") as fh:
                self.system_config = SystemConfig(**json.load(fh))

    @property
    def ready(self):
        return self.store is not None and self.forest is not None and bool(self.store.ops)

    # -- persistence -----------------------------------------------------

    def _trace_dir(self):
        path = os.path.join(self.data_dir, "traces")
        os.makedirs(path, exist_ok=True)
        return path

    def _persist(self, job: Job):
        path = os.path.join(self._trace_dir(), f"{job.id}.json")
        blob = {"job": job.payload(include_trace=False), "request": job.request,
                "trace": job.trace, "reason": job.reason, "result": job.result,
                "status": job.status, "created": job.created, "finished": job.finished}
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(blob, fh, default=str)
        os.replace(tmp, path)

    def _restore_jobs(self):
        trace_dir = os.path.join(self.data_dir, "traces")
        if not os.path.isdir(trace_dir):
            return
        for name in sorted(os.listdir(trace_dir)):
            if not name.endswith(".json"):
                continue
            try:
                with open(os.path.join(trace_dir, name), encoding="utf-8") as fh:
                    blob = json.load(fh)
            except (OSError, json.JSONDecodeError):
                continue
            job = Job(id=name[:-5], request=blob.get("request", {}),
                      status=blob.get("status", "done"),
                      created=blob.get("created", 0.0),
                      finished=blob.get("finished"),
                      result=blob.get("result"), trace=blob.get("trace"),
                      reason=blob.get("reason", ""))
            if job.status in TERMINAL:
                self.jobs[job.id] = job
                key = job.request.get("idempotency_key")
                if key:
                    self.by_idempotency[key] = job.id

    # -- job execution -----------------------------------------------------

    def _worker(self):
        while True:
            job_id = self.queue.get()
            if job_id is None:
                return
            with self.lock:
                job = self.jobs.get(job_id)
                if job is None:
                    continue
                job.status = "running"
            try:
                self._execute(job)
            except Exception as exc:  # noqa: BLE001 - job failure is data
                with self.lock:
                    job.status = "failed"
                    job.reason = f"{type(exc).__name__}: {exc}"
                    job.finished = time.time()
            self._persist(job)

    def _execute(self, job: Job):
        req = job.request
        adapter = MockAdapter()
        if req.get("adapter") == "live":
            from .agent import LiveHttpAdapter
            adapter = LiveHttpAdapter()
        declared = req.get("declared_spots")
        query = Query(req["text"],
                      tuple(declared) if declared is not None else None,
                      req.get("max_parameterized"))
        # jobs always carry a wall-clock budget; callers may shorten it
        solver = SolverOptions(time_limit=req.get("time_limit") or 120.0,
                               rel_gap=1e-6)
        config = AgentConfig(solver=solver)

        def on_iteration(t):
            with self.lock:
                job.iteration = t

        response, trace = run(query, self.store, self.forest, adapter, config,
                              system_config=self.system_config,
                              on_iteration=on_iteration)
        with self.lock:
            job.iteration = len(trace.iterations)
            job.trace = trace.to_dict()
            if response.status == "failed":
                job.status = "failed"
                job.reason = trace.error
            else:
                job.status = "done"
                n = self.store.n_spots
                protected = sorted({s for it in trace.iterations
                                    for s in it.free_spots}) if trace.iterations else []
                job.result = {
                    "agent_status": response.status,
                    "satisfaction": None if response.satisfaction is None
                    else (None if response.satisfaction.baseline_zero
                          else response.satisfaction.value),
                    "satisfaction_sentinel": bool(
                        response.satisfaction and response.satisfaction.baseline_zero),
                    "cost_objective": response.cost_objective,
                    "qr_objective": response.qr_objective,
                    "qr_text": response.qr_text,
                    "decisions": {str(k): v for k, v in response.decisions.items()},
                    "explanation": response.explanation,
                    "metrics": {
                        "locality": locality(len(protected), n) if protected else None,
                        "iterations": len(trace.iterations),
                        "solver_invocations": 2 * len(trace.iterations),
                        "wall_time": sum(it.wall_time for it in trace.iterations),
                    },
                }
            job.finished = time.time()

    # -- API operations ----------------------------------------------------

    def submit(self, req: QueryRequest) -> str:
        if not req.text.strip():
            raise HTTPException(400, "query text must be nonempty")
        if not self.ready:
            raise HTTPException(503, "data not ingested; prepare the data directory first")
        if req.declared_spots:
            n = self.store.n_spots
            for s in req.declared_spots:
                if not 0 <= s < n:
                    raise HTTPException(400, f"unknown spot {s}; roster is 0..{n - 1}")
        if req.adapter not in ("mock", "live"):
            raise HTTPException(400, f"unknown adapter {req.adapter!r}")
        with self.lock:
            if req.idempotency_key and req.idempotency_key in self.by_idempotency:
                return self.by_idempotency[req.idempotency_key]
            job = Job(id=uuid.uuid4().hex[:12], request=req.model_dump())
            try:
                self.queue.put_nowait(job.id)
            except queue.Full:
                raise HTTPException(503, "job queue is full; retry later") from None
            self.jobs[job.id] = job
            if req.idempotency_key:
                self.by_idempotency[req.idempotency_key] = job.id
            return job.id

    def job_payload(self, job_id: str) -> dict:
        with self.lock:
            job = self.jobs.get(job_id)
            if job is None:
                raise HTTPException(404, f"unknown job {job_id!r}")
            return job.payload()

    def spots_payload(self) -> list:
        if self.store is None or not self.store.ops:
            raise HTTPException(503, "not ingested")
        latest = self.store.ops[-1]
        out = []
        for s in self.store.spots:
            stock = latest.u[s.id]
            out.append({
                "id": s.id,
                "name": self.store.station_names[s.id],
                "lat": s.latitude,
                "lon": s.longitude,
                "capacity": s.capacity,
                "stock": {SOC_LEVELS[K_LOW]: int(stock[K_LOW]),
                          SOC_LEVELS[K_MID]: int(stock[K_MID]),
                          SOC_LEVELS[K_FULL]: int(stock[K_FULL])},
            })
        return out


def create_app(data_dir, workers=1, console_dist=None) -> FastAPI:
    app = FastAPI(title="ebsopt service", version="1")
    state = ServiceState(data_dir, workers=workers)
    app.state.service = state

    @app.post("/api/queries", status_code=202)
    def submit_query(req: QueryRequest):
        return {"job_id": state.submit(req)}

    @app.get("/api/jobs/{job_id}")
    def get_job(job_id: str):
        return state.job_payload(job_id)

    @app.get("/api/spots")
    def get_spots():
        return state.spots_payload()

    @app.get("/api/health")
    def health():
        return {"ready": state.ready, "jobs": len(state.jobs)}

    dist = console_dist or os.environ.get("EBSOPT_CONSOLE_DIST")
    if dist and os.path.isdir(dist):
        @app.get("/", include_in_schema=False)
        def index():
            return FileResponse(os.path.join(dist, "index.html"))

        @app.get("/static/{path:path}", include_in_schema=False)
        def static(path: str):
            full = os.path.realpath(os.path.join(dist, path))
            if not full.startswith(os.path.realpath(dist)) or not os.path.isfile(full):
                raise HTTPException(404, "not found")
            return FileResponse(full)
    else:
        @app.get("/", include_in_schema=False)
        def index_plain():
            return PlainTextResponse("ebsopt service; console assets not installed")

    return app

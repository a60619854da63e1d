"""Live ROM session service: HTTP+JSON API over the angle pipeline.

Sessions group the recordings of one evaluation visit. Frames stream in
as batches; each batch returns a live angle update computed against the
recording's starting orientation. The final ROM always comes from the
full offline pipeline on the gated frames, so a stopped recording yields
exactly what the CLI computes on the same persisted file.

Angles in API payloads are serialized with 2 decimals; the results store
keeps full precision.
"""

from __future__ import annotations

import json
import os
import queue
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, StreamingResponse

from . import io as rio
from .config import EngineConfig
from .engine import _angle_deg, evaluate_movement
from .errors import (
    RecordingStateError,
    RomKitError,
    UnknownMovementError,
    UnknownSessionError,
    UnusableRecordingError,
)
from .landmarks import (
    ORIENTATION_HINTS,
    SOURCE_WEBCAM,
    MovementDefinition,
    Recording,
    list_movements,
    registry_lookup,
    resolve_segment,
)

DEFAULT_NOMINAL_RATE = 15.0


def _round2(x):
    return None if x is None else round(float(x), 2)


def _new_id(prefix: str) -> str:
    return f"{prefix}-{uuid.uuid4().hex[:12]}"


@dataclass
class RecordingMeta:
    id: str
    movement: str
    side: str | None
    phase: str | None
    repetition: int
    status: str  # recording | completed | failed
    frames_file: str
    nominal_rate: float = DEFAULT_NOMINAL_RATE
    frames_received: int = 0
    frames_accepted: int = 0
    dropped_low_visibility: int = 0
    rejected_out_of_order: int = 0
    rejected_degenerate: int = 0
    rom_deg: float | None = None
    needs_review: bool | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["rom_deg"] = _round2(self.rom_deg)
        return d


@dataclass
class SessionState:
    id: str
    subject: str
    created_at: str
    recordings: list[RecordingMeta] = field(default_factory=list)

    def open_recording(self) -> RecordingMeta | None:
        for rec in self.recordings:
            if rec.status == "recording":
                return rec
        return None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "subject": self.subject,
            "created_at": self.created_at,
            "recordings": [r.to_dict() for r in self.recordings],
        }


class LiveRecording:
    """In-memory buffer and live-angle state of one open recording."""

    def __init__(self, meta: RecordingMeta, session: SessionState,
                 movement: MovementDefinition):
        self.meta = meta
        self.session = session
        self.movement = movement
        self.spec = movement.segment_for(SOURCE_WEBCAM)
        self.required = self.spec.landmark_names()
        self.frames = []
        self.reference: np.ndarray | None = None
        self.last_t: float | None = None
        self.last_alpha: float | None = None
        self.running_max: float | None = None
        self.subscribers: list[queue.Queue] = []

    def update_payload(self) -> dict:
        return {
            "t": self.last_t,
            "alpha": _round2(self.last_alpha),
            "running_max": _round2(self.running_max),
            "frames_received": self.meta.frames_received,
            "frames_accepted": self.meta.frames_accepted,
            "dropped_low_visibility": self.meta.dropped_low_visibility,
            "rejected_out_of_order": self.meta.rejected_out_of_order,
            "rejected_degenerate": self.meta.rejected_degenerate,
        }


class SessionService:
    """File-backed session/recording state with a single state lock."""

    def __init__(self, data_dir: str | Path,
                 engine_config: EngineConfig | None = None,
                 registry_overrides: dict | None = None):
        self.data_dir = Path(data_dir)
        self.config = engine_config or EngineConfig()
        self.registry_overrides = registry_overrides or {}
        self.sessions_dir = self.data_dir / "sessions"
        self.recordings_dir = self.data_dir / "recordings"
        self.results_path = self.data_dir / "results.jsonl"
        self.sessions_dir.mkdir(parents=True, exist_ok=True)
        self.recordings_dir.mkdir(parents=True, exist_ok=True)
        self.lock = threading.RLock()
        self.sessions: dict[str, SessionState] = {}
        self.live: dict[str, LiveRecording] = {}
        self._load_sessions()

    # -- persistence -------------------------------------------------------

    def _session_path(self, session_id: str) -> Path:
        return self.sessions_dir / f"{session_id}.json"

    def _save_session(self, session: SessionState) -> None:
        payload = {
            "id": session.id,
            "subject": session.subject,
            "created_at": session.created_at,
            "recordings": [dict(r.__dict__) for r in session.recordings],
        }
        tmp = self._session_path(session.id).with_suffix(".json.tmp")
        tmp.write_text(json.dumps(payload, sort_keys=True))
        os.replace(tmp, self._session_path(session.id))

    def _load_sessions(self) -> None:
        for path in sorted(self.sessions_dir.glob("*.json")):
            raw = json.loads(path.read_text())
            recs = []
            for r in raw.get("recordings", []):
                meta = RecordingMeta(**r)
                if meta.status == "recording":
                    # open at shutdown: the buffer is gone, the frames file
                    # survives for offline analysis
                    meta.status = "failed"
                    meta.error = "interrupted by service restart"
                recs.append(meta)
            session = SessionState(id=raw["id"], subject=raw["subject"],
                                   created_at=raw["created_at"], recordings=recs)
            self.sessions[session.id] = session
            self._save_session(session)

    # -- operations ---------------------------------------------------------

    def create_session(self, subject: str) -> SessionState:
        with self.lock:
            session = SessionState(
                id=_new_id("s"),
                subject=subject,
                created_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
            )
            self.sessions[session.id] = session
            self._save_session(session)
            return session

    def get_session(self, session_id: str) -> SessionState:
        with self.lock:
            if session_id not in self.sessions:
                raise UnknownSessionError(f"unknown session {session_id!r}")
            return self.sessions[session_id]

    def start_recording(self, session_id: str, movement: str,
                        side: str | None, repetition: int,
                        phase: str | None = None,
                        nominal_rate: float = DEFAULT_NOMINAL_RATE) -> dict:
        with self.lock:
            session = self.get_session(session_id)
            definition = registry_lookup(movement, side, self.registry_overrides)
            if session.open_recording() is not None:
                raise RecordingStateError(
                    f"session {session_id} already has an open recording")
            rec_id = _new_id("r")
            frames_file = self.recordings_dir / f"{rec_id}.jsonl"
            meta = RecordingMeta(
                id=rec_id, movement=movement, side=side, phase=phase,
                repetition=repetition, status="recording",
                frames_file=str(frames_file), nominal_rate=nominal_rate,
            )
            header = {
                "format_version": rio.FORMAT_VERSION,
                "source": SOURCE_WEBCAM,
                "topology": "webcam-33",
                "movement": movement,
                "side": side,
                "phase": phase,
                "subject": session.subject,
                "repetition": repetition,
                "nominal_rate": nominal_rate,
            }
            with open(frames_file, "w", encoding="utf-8") as fh:
                fh.write(json.dumps({"header": header},
                                    separators=(",", ":")) + "\n")
            live = LiveRecording(meta, session, definition)
            session.recordings.append(meta)
            self.live[rec_id] = live
            self._save_session(session)
            return {
                "recording_id": rec_id,
                "movement": movement,
                "side": side,
                "orientation": definition.orientation,
                "orientation_hint": ORIENTATION_HINTS[definition.orientation],
                "segment_landmarks": sorted(live.required),
            }

    def _get_live(self, recording_id: str) -> LiveRecording:
        if recording_id in self.live:
            return self.live[recording_id]
        for session in self.sessions.values():
            for meta in session.recordings:
                if meta.id == recording_id:
                    raise RecordingStateError(
                        f"recording {recording_id} is {meta.status}, not open")
        raise UnknownSessionError(f"unknown recording {recording_id!r}")

    def append_frames(self, recording_id: str, frames: list[dict]) -> dict:
        with self.lock:
            live = self._get_live(recording_id)
            parsed = [
                rio._parse_frame_obj(obj, SOURCE_WEBCAM, f"batch:{recording_id}", i)
                for i, obj in enumerate(frames, start=1)
            ]
            accepted_lines = []
            for frame in parsed:
                live.meta.frames_received += 1
                if live.last_t is not None and frame.t <= live.last_t:
                    live.meta.rejected_out_of_order += 1
                    continue
                if not all(frame.vis(nm) >= self.config.visibility_threshold
                           for nm in live.required):
                    live.meta.dropped_low_visibility += 1
                    continue
                p1, p2 = resolve_segment(frame, live.spec)
                d = np.asarray(p1, dtype=float) - np.asarray(p2, dtype=float)
                norm = float(np.linalg.norm(d))
                if norm < 1e-9:
                    live.meta.rejected_degenerate += 1
                    continue
                v = d / norm
                if live.reference is None:
                    live.reference = v
                    alpha = 0.0
                else:
                    alpha = _angle_deg(float(np.dot(v, live.reference)))
                live.frames.append(frame)
                live.meta.frames_accepted += 1
                live.last_t = frame.t
                live.last_alpha = alpha
                live.running_max = (alpha if live.running_max is None
                                    else max(live.running_max, alpha))
                accepted_lines.append(rio.frame_line(frame))
            if accepted_lines:
                with open(live.meta.frames_file, "a", encoding="utf-8") as fh:
                    fh.write("".join(line + "\n" for line in accepted_lines))
                    fh.flush()
            update = live.update_payload()
            for sub in live.subscribers:
                sub.put(update)
            return update

    def stop_recording(self, recording_id: str) -> dict:
        with self.lock:
            live = self._get_live(recording_id)
            session = live.session
            meta = live.meta
            recording = Recording(
                frames=tuple(live.frames),
                source=SOURCE_WEBCAM,
                nominal_rate=meta.nominal_rate,
                movement=meta.movement,
                subject=session.subject,
                repetition=meta.repetition,
                side=meta.side,
                phase=meta.phase,
            )
            try:
                evaluation = evaluate_movement(recording, live.movement,
                                               self.config)
            except RomKitError as exc:
                meta.status = "failed"
                meta.error = str(exc)
                del self.live[recording_id]
                for sub in live.subscribers:
                    sub.put(None)
                self._save_session(session)
                raise
            result = evaluation.result
            record = rio.result_record(
                subject=session.subject,
                movement=meta.movement,
                side=meta.side,
                phase=meta.phase,
                rater=SOURCE_WEBCAM,
                repetition=meta.repetition,
                rom_deg=result.rom_deg,
                peak_t=result.peak_t,
                needs_review=result.needs_review,
                anomaly_count=len(result.anomalies),
                config_fingerprint=self.config.fingerprint(),
                session_id=session.id,
                recording_id=meta.id,
            )
            rio.write_result(record, self.results_path)
            meta.status = "completed"
            meta.rom_deg = result.rom_deg
            meta.needs_review = result.needs_review
            del self.live[recording_id]
            for sub in live.subscribers:
                sub.put(None)
            self._save_session(session)
            return {
                "recording_id": meta.id,
                "movement": meta.movement,
                "side": meta.side,
                "phase": meta.phase,
                "repetition": meta.repetition,
                "rom_deg": _round2(result.rom_deg),
                "peak_t": result.peak_t,
                "anomaly_count": len(result.anomalies),
                "needs_review": result.needs_review,
                "candidate_peaks": [[t, _round2(a)]
                                    for t, a in result.candidate_peaks],
            }

    def session_results(self, session_id: str) -> dict:
        with self.lock:
            session = self.get_session(session_id)
            records = []
            if self.results_path.exists():
                records = [r for r in rio.read_results(self.results_path)
                           if r.get("session_id") == session_id]
            movements: dict[str, dict] = {}
            for rec in sorted(records, key=lambda r: (r["movement"],
                                                      r["repetition"])):
                label = rec["movement"]
                if rec.get("side"):
                    label += f" [{rec['side']}]"
                if rec.get("phase"):
                    label += f" ({rec['phase']})"
                slot = movements.setdefault(label, {"repetitions": []})
                slot["repetitions"].append({
                    "repetition": rec["repetition"],
                    "rom_deg": _round2(rec["rom_deg"]),
                    "needs_review": rec["needs_review"],
                    "anomaly_count": rec["anomaly_count"],
                })
            for slot in movements.values():
                roms = [r["rom_deg"] for r in slot["repetitions"]]
                slot["mean_rom_deg"] = _round2(sum(roms) / len(roms))
                slot["range_rom_deg"] = _round2(max(roms) - min(roms))
                slot["any_needs_review"] = any(r["needs_review"]
                                               for r in slot["repetitions"])
            return {"session_id": session_id, "subject": session.subject,
                    "movements": movements}

    def subscribe(self, recording_id: str) -> queue.Queue:
        with self.lock:
            live = self._get_live(recording_id)
            q: queue.Queue = queue.Queue()
            live.subscribers.append(q)
            return q


def create_app(data_dir: str | Path,
               engine_config: EngineConfig | None = None,
               registry_overrides: dict | None = None) -> FastAPI:
    """Build the HTTP app over a file-backed SessionService."""
    service = SessionService(data_dir, engine_config, registry_overrides)
    app = FastAPI(title="romkit session service")
    app.state.service = service

    def _error(status: int, exc: Exception) -> JSONResponse:
        return JSONResponse(status_code=status, content={"error": str(exc)})

    @app.exception_handler(UnknownSessionError)
    async def _unknown(request: Request, exc: UnknownSessionError):
        return _error(404, exc)

    @app.exception_handler(UnknownMovementError)
    async def _unknown_movement(request: Request, exc: UnknownMovementError):
        return _error(400, exc)

    @app.exception_handler(RecordingStateError)
    async def _state(request: Request, exc: RecordingStateError):
        return _error(409, exc)

    @app.exception_handler(UnusableRecordingError)
    async def _unusable(request: Request, exc: UnusableRecordingError):
        return _error(422, exc)

    @app.exception_handler(RomKitError)
    async def _other(request: Request, exc: RomKitError):
        return _error(422, exc)

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/movements")
    def movements():
        return list_movements()

    @app.post("/sessions", status_code=201)
    def create_session(body: dict):
        session = service.create_session(str(body.get("subject", "")))
        return session.to_dict()

    @app.get("/sessions")
    def list_sessions():
        with service.lock:
            return [s.to_dict() for s in service.sessions.values()]

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return service.get_session(session_id).to_dict()

    @app.post("/sessions/{session_id}/recordings", status_code=201)
    def start_recording(session_id: str, body: dict):
        if "movement" not in body:
            return _error(400, ValueError("body needs 'movement'"))
        return service.start_recording(
            session_id,
            movement=body["movement"],
            side=body.get("side"),
            repetition=int(body.get("repetition", 1)),
            phase=body.get("phase"),
            nominal_rate=float(body.get("nominal_rate", DEFAULT_NOMINAL_RATE)),
        )

    @app.post("/recordings/{recording_id}/frames")
    def append_frames(recording_id: str, body: dict):
        frames = body.get("frames")
        if not isinstance(frames, list):
            return _error(400, ValueError("body needs a 'frames' list"))
        return service.append_frames(recording_id, frames)

    @app.post("/recordings/{recording_id}/stop")
    def stop_recording(recording_id: str):
        return service.stop_recording(recording_id)

    @app.get("/recordings/{recording_id}/live")
    def live_updates(recording_id: str):
        q = service.subscribe(recording_id)

        def gen():
            while True:
                try:
                    update = q.get(timeout=30.0)
                except queue.Empty:
                    yield ": keepalive\n\n"
                    continue
                if update is None:
                    return
                yield f"data: {json.dumps(update, sort_keys=True)}\n\n"

        return StreamingResponse(gen(), media_type="text/event-stream")

    @app.get("/sessions/{session_id}/results")
    def session_results(session_id: str):
        return service.session_results(session_id)

    return app

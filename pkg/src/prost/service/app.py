"""HTTP service around the tracking pipeline.

Two kinds of surface: streaming sessions, where a client pushes frames
one at a time and receives segmentation masks back, and synchronous
batch jobs that run a whole sequence (or synthetic benchmark) on
server-local paths.  Session state is held in memory; one lock per
session serializes frame pushes, matching the tracker's single-owner
contract.
"""

from __future__ import annotations

import base64
import threading
import uuid
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import CodecError, NonFiniteError, ProstError, SequenceError
from ..evaluate import MEASURE_NAMES, SyntheticStreamSpec, measures_csv_rows, rows_to_csv
from ..frameio import decode_pnm, encode_pnm
from ..jobs import (
    StreamTracker,
    effective_i_init,
    resolve_sequence,
    run_evaluate,
    run_sweep,
    run_synth,
    run_track,
)
from .schemas import (
    EvaluateJob,
    EvaluateReportModel,
    FramePush,
    FrameResult,
    MeasureRow,
    SequenceRef,
    SessionCreate,
    SessionInfo,
    SnapshotPayload,
    SnapshotRestore,
    SweepJob,
    SweepPointModel,
    SweepReportModel,
    SynthJob,
    SynthReportModel,
    SynthRow,
    TrackJob,
    TrackReportModel,
)

__all__ = ["create_app"]


class _Session:
    def __init__(self, tracker: StreamTracker):
        self.tracker = tracker
        self.lock = threading.Lock()


def _measure_rows(labeled) -> list[MeasureRow]:
    rows = []
    for name, delta, counts, mset in labeled:
        rows.append(
            MeasureRow(
                sequence=name,
                delta=delta,
                tp=counts.tp,
                fp=counts.fp,
                tn=counts.tn,
                fn=counts.fn,
                **{field: getattr(mset, field) for field in MEASURE_NAMES},
            )
        )
    return rows


def _sequence_spec(ref: SequenceRef):
    return resolve_sequence(
        ref.path,
        pattern=ref.pattern,
        groundtruth_dir=ref.groundtruth_dir,
        eval_range=tuple(ref.eval_range) if ref.eval_range else None,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="prost", version=__version__)
    sessions: dict[str, _Session] = {}
    registry_lock = threading.Lock()

    @app.exception_handler(ProstError)
    def _prost_error(request: Request, exc: ProstError) -> JSONResponse:
        # "kind" lets clients map failures onto their own exit codes.
        if isinstance(exc, NonFiniteError):
            kind = "numeric"
        elif isinstance(exc, (CodecError, SequenceError)):
            kind = "io"
        else:
            kind = "validation"
        return JSONResponse(status_code=400, content={"detail": str(exc), "kind": kind})

    @app.exception_handler(FileNotFoundError)
    def _missing_file(request: Request, exc: FileNotFoundError) -> JSONResponse:
        return JSONResponse(status_code=404, content={"detail": str(exc), "kind": "io"})

    def _get(session_id: str) -> _Session:
        try:
            return sessions[session_id]
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no session {session_id}")

    def _register(tracker: StreamTracker) -> SessionInfo:
        session_id = uuid.uuid4().hex[:12]
        with registry_lock:
            sessions[session_id] = _Session(tracker)
        return _session_info(session_id, sessions[session_id])

    def _session_info(session_id: str, session: _Session) -> SessionInfo:
        tracker = session.tracker
        return SessionInfo(
            session_id=session_id,
            frame_index=tracker.frame_index,
            started=tracker.started,
            config=tracker.config.echo(tracker.i_init),
        )

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.post("/sessions", response_model=SessionInfo)
    def create_session(req: SessionCreate) -> SessionInfo:
        return _register(StreamTracker(req.settings.to_config()))

    @app.get("/sessions/{session_id}", response_model=SessionInfo)
    def session_info(session_id: str) -> SessionInfo:
        return _session_info(session_id, _get(session_id))

    @app.delete("/sessions/{session_id}")
    def delete_session(session_id: str) -> dict:
        _get(session_id)
        with registry_lock:
            del sessions[session_id]
        return {"deleted": session_id}

    @app.post("/sessions/{session_id}/frames", response_model=FrameResult)
    def push_frame(session_id: str, req: FramePush) -> FrameResult:
        session = _get(session_id)
        frame = decode_pnm(base64.b64decode(req.pnm_b64))
        with session.lock:
            record = session.tracker.push(frame)
        return FrameResult(
            frame_index=record.frame_index,
            mask_pgm_b64=base64.b64encode(encode_pnm(record.mask)).decode(),
            foreground_fraction=record.mask.foreground_fraction(),
            fit_cost=record.fit_cost,
            step=record.step,
        )

    @app.get("/sessions/{session_id}/snapshot", response_model=SnapshotPayload)
    def session_snapshot(session_id: str) -> SnapshotPayload:
        session = _get(session_id)
        with session.lock:
            blob = session.tracker.snapshot_bytes()
        return SnapshotPayload(snapshot_b64=base64.b64encode(blob).decode())

    @app.post("/sessions/from-snapshot", response_model=SessionInfo)
    def session_from_snapshot(req: SnapshotRestore) -> SessionInfo:
        blob = base64.b64decode(req.snapshot_b64)
        return _register(StreamTracker.restore_bytes(blob, req.settings.to_config()))

    @app.post("/jobs/track", response_model=TrackReportModel)
    def track_job(job: TrackJob) -> TrackReportModel:
        report = run_track(
            _sequence_spec(job.sequence),
            job.settings.to_config(),
            output_dir=job.output_dir,
            emit_masks=job.emit_masks,
            emit_backgrounds=job.emit_backgrounds,
            snapshot_in=job.snapshot_in,
            snapshot_out=job.snapshot_out,
        )
        return TrackReportModel(
            frames=report.frames,
            fps=report.fps,
            masks_written=report.masks_written,
            config=report.config_echo,
        )

    @app.post("/jobs/evaluate", response_model=EvaluateReportModel)
    def evaluate_job(job: EvaluateJob) -> EvaluateReportModel:
        named = []
        for ref in job.sequences:
            name = ref.name or Path(ref.path).name
            named.append((name, _sequence_spec(ref)))
        report = run_evaluate(named, job.settings.to_config())
        labeled = [(name, delta, counts, mset) for name, delta, counts, mset in report.rows]
        pooled_counts, pooled_measures = report.overall_pooled
        delta = job.settings.to_config().delta
        labeled.append(("overall_pooled", delta, pooled_counts, pooled_measures))
        labeled.append(("overall_averaged", delta, pooled_counts, report.overall_averaged))
        csv = rows_to_csv(
            measures_csv_rows([(n, d, m) for n, d, _, m in labeled])
        )
        return EvaluateReportModel(
            rows=_measure_rows(labeled), csv=csv, config=report.config_echo
        )

    @app.post("/jobs/sweep", response_model=SweepReportModel)
    def sweep_job(job: SweepJob) -> SweepReportModel:
        spec = _sequence_spec(job.sequence)
        config = job.settings.to_config()
        points = run_sweep(spec, config, job.deltas, replay=job.replay)
        name = job.sequence.name or Path(job.sequence.path).name
        labeled = [(name, pt.delta, pt.counts, pt.measures) for pt in points]
        csv = rows_to_csv(measures_csv_rows([(n, d, m) for n, d, _, m in labeled]))
        return SweepReportModel(
            points=[
                SweepPointModel(delta=pt.delta, fpr=pt.measures.fpr, recall=pt.measures.recall)
                for pt in points
            ],
            rows=_measure_rows(labeled),
            csv=csv,
            config=config.echo(effective_i_init(spec, config)),
        )

    @app.post("/jobs/synth", response_model=SynthReportModel)
    def synth_job(job: SynthJob) -> SynthReportModel:
        spec = SyntheticStreamSpec(
            m=job.m,
            k=job.k,
            n_frames=job.n_frames,
            outlier_fraction=job.outlier_fraction,
            outlier_magnitude=job.outlier_magnitude,
            noise_sigma=job.noise_sigma,
        )
        report = run_synth(spec, job.settings.to_config(), job.p_values, job.seeds)
        csv_rows = [["p", "seed", "error"]]
        for p, seed, error in report.rows:
            csv_rows.append([f"{p:.6g}", str(seed), f"{error:.6g}"])
        return SynthReportModel(
            rows=[SynthRow(p=p, seed=s, error=e) for p, s, e in report.rows],
            medians={f"{p:g}": v for p, v in report.medians.items()},
            verdict=report.verdict,
            csv=rows_to_csv(csv_rows),
            config=report.config_echo,
        )

    return app

"""Request and response models of the tracking service."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field

from ..jobs import RunConfig


class TrackerSettings(BaseModel):
    """Pipeline configuration; unset fields take the benchmark defaults."""

    subspace_dim: int = 15
    p: float = 0.25
    mu: Optional[float] = Field(default=None, description="None derives it from delta and p")
    delta: float = 0.35
    omega: float = 5e-5
    t_init: float = 5e-3
    t_min: float = 1e-4
    i_init: Optional[int] = None
    tau: Optional[float] = None
    cg_max_iters: int = 5
    target_width: int = 160
    target_height: int = 120
    grayscale: bool = False
    seed: int = 0

    def to_config(self) -> RunConfig:
        return RunConfig(**self.model_dump())


class SessionCreate(BaseModel):
    settings: TrackerSettings = Field(default_factory=TrackerSettings)


class SessionInfo(BaseModel):
    session_id: str
    frame_index: int
    started: bool
    config: dict


class FramePush(BaseModel):
    """One frame as base64-encoded binary PGM/PPM bytes."""

    pnm_b64: str


class FrameResult(BaseModel):
    frame_index: int
    mask_pgm_b64: str
    foreground_fraction: float
    fit_cost: float
    step: float


class SnapshotPayload(BaseModel):
    snapshot_b64: str


class SnapshotRestore(BaseModel):
    snapshot_b64: str
    settings: TrackerSettings = Field(default_factory=TrackerSettings)


class SequenceRef(BaseModel):
    """A sequence directory on the server's filesystem.

    ``path`` may point at the frames directly or at a
    changedetection-style directory containing ``input/`` and
    ``groundtruth/``.
    """

    path: str
    pattern: str = "in%06d.ppm"
    groundtruth_dir: Optional[str] = None
    eval_range: Optional[tuple[int, int]] = None
    name: Optional[str] = None


class TrackJob(BaseModel):
    sequence: SequenceRef
    settings: TrackerSettings = Field(default_factory=TrackerSettings)
    output_dir: Optional[str] = None
    emit_masks: bool = True
    emit_backgrounds: bool = False
    snapshot_in: Optional[str] = None
    snapshot_out: Optional[str] = None


class TrackReportModel(BaseModel):
    frames: int
    fps: float
    masks_written: int
    config: dict


class EvaluateJob(BaseModel):
    sequences: list[SequenceRef]
    settings: TrackerSettings = Field(default_factory=TrackerSettings)


class MeasureRow(BaseModel):
    sequence: str
    delta: float
    tp: int
    fp: int
    tn: int
    fn: int
    recall: float
    specificity: float
    fpr: float
    fnr: float
    pwc: float
    precision: float
    fmeasure: float


class EvaluateReportModel(BaseModel):
    rows: list[MeasureRow]
    csv: str
    config: dict


class SweepJob(BaseModel):
    sequence: SequenceRef
    deltas: list[float]
    settings: TrackerSettings = Field(default_factory=TrackerSettings)
    replay: bool = False


class SweepPointModel(BaseModel):
    delta: float
    fpr: float
    recall: float


class SweepReportModel(BaseModel):
    points: list[SweepPointModel]
    rows: list[MeasureRow]
    csv: str
    config: dict


class SynthJob(BaseModel):
    m: int = 100
    k: int = 5
    n_frames: int = 2000
    outlier_fraction: float = 0.1
    outlier_magnitude: float = 1.0
    noise_sigma: float = 1e-3
    p_values: list[float] = Field(default_factory=lambda: [0.25, 0.5, 1.0, 2.0])
    seeds: list[int] = Field(default_factory=lambda: list(range(10)))
    settings: TrackerSettings = Field(default_factory=TrackerSettings)


class SynthRow(BaseModel):
    p: float
    seed: int
    error: float


class SynthReportModel(BaseModel):
    rows: list[SynthRow]
    medians: dict[str, float]
    verdict: str
    csv: str
    config: dict

"""End-to-end runs over frame sequences and synthetic streams.

This is the layer the HTTP service calls into.  A ``StreamTracker``
holds the full per-frame pipeline (grayscale collapse, resampling,
running-statistics normalization, the tracking step, thresholding and
the median filter) and is equally usable for streaming sessions and for
batch jobs over directories.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .cost import LpConfig, smoothing_from_threshold
from .errors import ConfigError, SequenceError
from .evaluate import (
    MEASURE_NAMES,
    ConfusionCounts,
    MeasureSet,
    SyntheticStreamSpec,
    accumulate,
    compare_modes,
    measures,
)
from .fit import CgOptions
from .frameio import SequenceSpec, open_sequence, sequence_indices, write_pnm
from .pipeline import (
    FrameBuffer,
    PreprocStats,
    SegmentationMask,
    foreground_weights_from_mask,
    median3x3,
    resample,
    segment,
    upsample_mask,
)
from .tracker import (
    ProstParams,
    TrackerState,
    bootstrap,
    load_snapshot,
    pack_snapshot,
    process_frame,
    save_snapshot,
    step_size,
    tau_from_init,
    unpack_snapshot,
)

__all__ = [
    "RunConfig",
    "StreamTracker",
    "FrameRecord",
    "resolve_sequence",
    "effective_i_init",
    "run_track",
    "run_evaluate",
    "run_sweep",
    "run_synth",
    "TrackReport",
    "EvaluateReport",
    "SweepPoint",
    "SynthReport",
]

DEFAULT_I_INIT = 100


@dataclass(frozen=True)
class RunConfig:
    """Fully-resolved pipeline configuration.

    ``mu`` set to ``None`` means "derive from delta and p" via the
    threshold coupling (falling back to 1e-3 when p >= 1, where the
    coupling is undefined).  ``i_init`` is the length of the
    initialization window in frames: statistics collect and the step
    size decays over this window.
    """

    subspace_dim: int = 15
    p: float = 0.25
    mu: Optional[float] = None
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

    def resolved_mu(self) -> float:
        if self.mu is not None:
            return self.mu
        if self.p < 1.0:
            return smoothing_from_threshold(self.delta, self.p)
        return 1e-3

    def params(self, i_init: int) -> ProstParams:
        tau = self.tau if self.tau is not None else tau_from_init(
            self.t_init, self.t_min, i_init
        )
        return ProstParams(
            k=self.subspace_dim,
            cfg=LpConfig(p=self.p, mu=self.resolved_mu()),
            delta=self.delta,
            omega=self.omega,
            t_init=self.t_init,
            t_min=self.t_min,
            tau=tau,
            cg=CgOptions(max_iters=self.cg_max_iters),
        )

    def echo(self, i_init: int) -> dict:
        """Every materialized setting, for reproducibility logging."""
        return {
            "subspace_dim": self.subspace_dim,
            "p": self.p,
            "mu": self.resolved_mu(),
            "delta": self.delta,
            "omega": self.omega,
            "t_init": self.t_init,
            "t_min": self.t_min,
            "i_init": i_init,
            "tau": self.params(i_init).tau,
            "cg_max_iters": self.cg_max_iters,
            "target_width": self.target_width,
            "target_height": self.target_height,
            "grayscale": self.grayscale,
            "seed": self.seed,
        }


@dataclass
class FrameRecord:
    """What one pushed frame produced, at model resolution."""

    frame_index: int
    mask: SegmentationMask  # after the median filter
    raw_mask: SegmentationMask  # pre-filter thresholding
    residual: np.ndarray
    fit_cost: float
    step: float


class StreamTracker:
    """Stateful frame-in, mask-out pipeline around one tracker.

    Dimensions are fixed by the first frame pushed.  Exactly one thread
    may push frames at a time.
    """

    def __init__(self, config: RunConfig, i_init: Optional[int] = None):
        self.config = config
        self.i_init = i_init if i_init is not None else (
            config.i_init if config.i_init is not None else DEFAULT_I_INIT
        )
        if self.i_init < 1:
            raise ConfigError(f"i_init must be >= 1, got {self.i_init}")
        self.params = config.params(self.i_init)
        self.stats: Optional[PreprocStats] = None
        self.state: Optional[TrackerState] = None
        self.channels: Optional[int] = None

    @property
    def started(self) -> bool:
        return self.state is not None

    @property
    def frame_index(self) -> int:
        return self.state.frame_index if self.state is not None else 0

    def _prepare(self, frame: FrameBuffer) -> FrameBuffer:
        if self.config.grayscale:
            frame = frame.to_gray()
        return resample(frame, self.config.target_width, self.config.target_height)

    def push(self, frame: FrameBuffer) -> FrameRecord:
        """Run the full pipeline on one frame and advance the model."""
        prepared = self._prepare(frame)
        if self.state is None:
            self.channels = prepared.channels
            m = prepared.data.size
            self.stats = PreprocStats.empty(m)
            self.state = bootstrap(m, self.params, seed=self.config.seed)
            self.state.preproc = self.stats
        elif prepared.channels != self.channels:
            raise SequenceError(
                f"frame has {prepared.channels} channels, expected {self.channels}"
            )

        vec = prepared.data
        if not self.stats.frozen:
            if self.state.frame_index < self.i_init:
                self.stats.update(vec)
                x = self.stats.apply_running(vec)
            else:
                self.stats.freeze()
                x = self.stats.apply(vec)
        else:
            x = self.stats.apply(vec)

        t = step_size(self.state.frame_index, self.params)
        self.state, residual, fit = process_frame(self.state, x, self.params)

        dims = (self.config.target_width, self.config.target_height, self.channels)
        raw_mask = segment(residual, dims, self.params.delta)
        # Weights follow per-pixel labels: with color input a pixel flagged
        # by any channel down-weights all three of its coordinates.
        if self.channels == 3:
            self.state.weights = foreground_weights_from_mask(
                raw_mask, 3, self.params.omega
            )
        return FrameRecord(
            frame_index=self.state.frame_index,
            mask=median3x3(raw_mask),
            raw_mask=raw_mask,
            residual=residual,
            fit_cost=fit.cost,
            step=t,
        )

    def background_frame(self) -> FrameBuffer:
        """Current model reconstruction mapped back to intensity scale."""
        if self.state is None:
            raise ConfigError("no frames pushed yet")
        normalized = self.state.basis.data @ self.state.y
        data = np.clip(self.stats.invert(normalized), 0.0, 1.0)
        return FrameBuffer(
            self.config.target_width, self.config.target_height, self.channels, data
        )

    def save(self, path) -> None:
        if self.state is None:
            raise ConfigError("no frames pushed yet; nothing to snapshot")
        save_snapshot(self.state, self.params, path)

    def snapshot_bytes(self) -> bytes:
        if self.state is None:
            raise ConfigError("no frames pushed yet; nothing to snapshot")
        return pack_snapshot(self.state, self.params)

    def _adopt(self, state: TrackerState) -> None:
        pixels = self.config.target_width * self.config.target_height
        channels, remainder = divmod(state.basis.m, pixels)
        if remainder or channels not in (1, 3):
            raise ConfigError(
                f"snapshot dimension {state.basis.m} does not match "
                f"{self.config.target_width}x{self.config.target_height} frames"
            )
        if state.preproc is None:
            state.preproc = PreprocStats.empty(state.basis.m)
        self.state = state
        self.stats = state.preproc
        self.channels = channels

    @classmethod
    def restore(cls, path, config: RunConfig, i_init: Optional[int] = None) -> "StreamTracker":
        tracker = cls(config, i_init=i_init)
        tracker._adopt(load_snapshot(path, tracker.params))
        return tracker

    @classmethod
    def restore_bytes(
        cls, blob: bytes, config: RunConfig, i_init: Optional[int] = None
    ) -> "StreamTracker":
        tracker = cls(config, i_init=i_init)
        tracker._adopt(unpack_snapshot(blob, tracker.params))
        return tracker


@dataclass
class TrackReport:
    frames: int
    fps: float
    masks_written: int
    config_echo: dict


@dataclass
class EvaluateReport:
    """Pooled per-sequence rows plus the two overall aggregates."""

    rows: list[tuple[str, float, ConfusionCounts, MeasureSet]]
    overall_pooled: tuple[ConfusionCounts, MeasureSet]
    overall_averaged: MeasureSet
    config_echo: dict


@dataclass
class SweepPoint:
    delta: float
    counts: ConfusionCounts
    measures: MeasureSet


@dataclass
class SynthReport:
    rows: list[tuple[float, int, float]]
    medians: dict[float, float]
    verdict: str
    config_echo: dict


def resolve_sequence(
    path,
    pattern: str = "in%06d.ppm",
    groundtruth_dir=None,
    eval_range: Optional[tuple[int, int]] = None,
) -> SequenceSpec:
    """Build a sequence spec from either a frames directory or a
    changedetection-style directory (``input/`` + ``groundtruth/`` +
    optional ``temporalROI.txt``)."""
    root = Path(path)
    input_dir = root
    gt_dir = Path(groundtruth_dir) if groundtruth_dir else None
    if (root / "input").is_dir():
        input_dir = root / "input"
        if gt_dir is None and (root / "groundtruth").is_dir():
            gt_dir = root / "groundtruth"
        roi_file = root / "temporalROI.txt"
        if eval_range is None and roi_file.exists():
            first, last = map(int, roi_file.read_text().split()[:2])
            eval_range = (first, last)

    spec = SequenceSpec(
        input_dir=input_dir,
        groundtruth_dir=gt_dir,
        eval_range=eval_range,
        frame_pattern=pattern,
    )
    if not sequence_indices(spec):
        # Grayscale sequences ship as PGM; probe it before giving up.
        fallback = replace(spec, frame_pattern=pattern.replace(".ppm", ".pgm"))
        if fallback.frame_pattern != spec.frame_pattern and sequence_indices(fallback):
            return fallback
    return spec


def effective_i_init(seq: SequenceSpec, config: RunConfig) -> int:
    if config.i_init is not None:
        return config.i_init
    if seq.eval_range is not None:
        pre_eval = sum(1 for i in sequence_indices(seq) if i < seq.eval_range[0])
        if pre_eval >= 1:
            return pre_eval
    return DEFAULT_I_INIT


def run_track(
    seq: SequenceSpec,
    config: RunConfig,
    output_dir=None,
    emit_masks: bool = True,
    emit_backgrounds: bool = False,
    snapshot_in=None,
    snapshot_out=None,
) -> TrackReport:
    """Track a whole sequence, optionally writing per-frame artifacts.

    Masks are written as ``bin<NNNNNN>.pgm`` at the native input
    resolution; background reconstructions as ``bg<NNNNNN>`` images at
    model resolution.
    """
    i_init = effective_i_init(seq, config)
    if snapshot_in is not None:
        tracker = StreamTracker.restore(snapshot_in, config, i_init=i_init)
    else:
        tracker = StreamTracker(config, i_init=i_init)
    out = Path(output_dir) if output_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    frames = 0
    masks_written = 0
    start = time.perf_counter()
    for index, frame, _ in open_sequence(seq):
        record = tracker.push(frame)
        frames += 1
        if out is not None and emit_masks:
            native = upsample_mask(record.mask, frame.width, frame.height)
            write_pnm(native, out / f"bin{index:06d}.pgm")
            masks_written += 1
        if out is not None and emit_backgrounds:
            bg = tracker.background_frame()
            ext = "pgm" if bg.channels == 1 else "ppm"
            write_pnm(bg, out / f"bg{index:06d}.{ext}")
    elapsed = time.perf_counter() - start
    if snapshot_out is not None:
        tracker.save(snapshot_out)
    return TrackReport(
        frames=frames,
        fps=frames / elapsed if elapsed > 0 else float("inf"),
        masks_written=masks_written,
        config_echo=config.echo(i_init),
    )


def _score_sequence(
    seq: SequenceSpec, config: RunConfig
) -> tuple[ConfusionCounts, int]:
    """One tracking pass; pooled confusion counts over annotated frames."""
    if seq.groundtruth_dir is None:
        raise SequenceError(f"sequence {seq.input_dir} has no ground-truth directory")
    i_init = effective_i_init(seq, config)
    tracker = StreamTracker(config, i_init=i_init)
    counts = ConfusionCounts()
    frames = 0
    for _, frame, gt in open_sequence(seq):
        record = tracker.push(frame)
        frames += 1
        if gt is not None:
            native = upsample_mask(record.mask, gt.width, gt.height)
            counts = accumulate(counts, native, gt)
    return counts, frames


def run_evaluate(
    sequences: list[tuple[str, SequenceSpec]], config: RunConfig
) -> EvaluateReport:
    """Score one or more annotated sequences under a single configuration.

    Per-sequence measures derive from counts pooled over that sequence.
    Across sequences both aggregates are reported: measures of the
    pooled counts, and the plain average of per-sequence measures.
    """
    if not sequences:
        raise ConfigError("no sequences given")
    rows = []
    pooled = ConfusionCounts()
    for name, seq in sequences:
        counts, _ = _score_sequence(seq, config)
        rows.append((name, config.delta, counts, measures(counts)))
        pooled = pooled + counts
    averaged = MeasureSet(
        *(
            float(np.mean([getattr(mset, name) for _, _, _, mset in rows]))
            for name in MEASURE_NAMES
        )
    )
    first_seq = sequences[0][1]
    return EvaluateReport(
        rows=rows,
        overall_pooled=(pooled, measures(pooled)),
        overall_averaged=averaged,
        config_echo=config.echo(effective_i_init(first_seq, config)),
    )


def run_sweep(
    seq: SequenceSpec,
    config: RunConfig,
    deltas: list[float],
    replay: bool = False,
) -> list[SweepPoint]:
    """Score the sequence at several thresholds, sorted by threshold.

    Full mode runs one independent tracking pass per threshold, since
    the threshold feeds back into the pixel weights.  Replay mode runs a
    single pass at the configured threshold, keeps the residuals of
    annotated frames, and only re-thresholds: faster, approximate, and
    memory-proportional to the number of annotated frames.
    """
    if not deltas:
        raise ConfigError("at least one delta is required")
    if any(d <= 0 for d in deltas):
        raise ConfigError("deltas must be positive")
    ordered = sorted(deltas)

    if not replay:
        points = []
        for delta in ordered:
            counts, _ = _score_sequence(seq, replace(config, delta=delta))
            points.append(SweepPoint(delta, counts, measures(counts)))
        return points

    if seq.groundtruth_dir is None:
        raise SequenceError(f"sequence {seq.input_dir} has no ground-truth directory")
    i_init = effective_i_init(seq, config)
    tracker = StreamTracker(config, i_init=i_init)
    kept: list[tuple[np.ndarray, object]] = []
    for _, frame, gt in open_sequence(seq):
        record = tracker.push(frame)
        if gt is not None:
            kept.append((record.residual, gt))
    dims = (config.target_width, config.target_height, tracker.channels)
    points = []
    for delta in ordered:
        counts = ConfusionCounts()
        for residual, gt in kept:
            mask = median3x3(segment(residual, dims, delta))
            counts = accumulate(counts, upsample_mask(mask, gt.width, gt.height), gt)
        points.append(SweepPoint(delta, counts, measures(counts)))
    return points


def run_synth(
    stream_spec: SyntheticStreamSpec,
    config: RunConfig,
    p_values: list[float],
    seeds: list[int],
) -> SynthReport:
    """Paired synthetic comparison across exponent settings."""
    i_init = config.i_init if config.i_init is not None else DEFAULT_I_INIT
    params = config.params(i_init)
    rows = compare_modes(stream_spec, params, p_values, seeds)
    medians = {
        p: float(np.median([err for pv, _, err in rows if pv == p])) for p in p_values
    }
    if all(v < 0.01 for v in medians.values()):
        verdict = "all modes converge (max median error {:.3g})".format(
            max(medians.values())
        )
    else:
        ranked = sorted(medians)
        ordered_ok = all(
            medians[a] <= medians[b] for a, b in zip(ranked, ranked[1:])
        )
        listing = ", ".join(f"p={p:g}: {medians[p]:.3g}" for p in ranked)
        if ordered_ok:
            verdict = f"median error grows with p ({listing})"
        else:
            verdict = f"no monotone ordering ({listing})"
    return SynthReport(
        rows=rows,
        medians=medians,
        verdict=verdict,
        config_echo=config.echo(i_init),
    )

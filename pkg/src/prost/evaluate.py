"""Change-detection scoring and the synthetic benchmark generator.

Scoring pools per-pixel confusion counts, from which the seven standard
measures derive (recall, specificity, FPR, FNR, PWC, precision,
F-measure).  Pixels labeled outside the region of interest or unknown
are skipped entirely; shadow counts as background truth.

The synthetic generator emits streams of the form

    x = U* y + s + noise

with a known orthonormal basis U*, per-frame Gaussian coordinates,
sparse Rademacher outliers on a fresh uniform support each frame, and
i.i.d. Gaussian noise.  It is the ground truth for subspace-recovery
experiments and the paired comparison of exponent settings.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, replace

import numpy as np

from .cost import LpConfig
from .errors import ConfigError, DimensionError
from .frameio import GroundTruthFrame, GtLabel
from .manifold import SubspaceBasis, random_orthonormal
from .pipeline import SegmentationMask
from .tracker import ProstParams, bootstrap, process_frame

__all__ = [
    "ConfusionCounts",
    "MeasureSet",
    "MEASURE_NAMES",
    "accumulate",
    "measures",
    "SyntheticStreamSpec",
    "SyntheticStream",
    "generate_stream",
    "subspace_error",
    "signal_scale",
    "track_stream",
    "compare_modes",
    "measures_csv_rows",
    "rows_to_csv",
]

MEASURE_NAMES = ("recall", "specificity", "fpr", "fnr", "pwc", "precision", "fmeasure")


@dataclass(frozen=True)
class ConfusionCounts:
    """Pooled per-pixel classification counts; merge by addition."""

    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn
        )

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MeasureSet:
    """The seven change-detection measures derived from pooled counts."""

    recall: float
    specificity: float
    fpr: float
    fnr: float
    pwc: float
    precision: float
    fmeasure: float

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in MEASURE_NAMES)


def accumulate(
    counts: ConfusionCounts, predicted: SegmentationMask, truth: GroundTruthFrame
) -> ConfusionCounts:
    """Score one frame against its annotation and merge into ``counts``."""
    if (predicted.width, predicted.height) != (truth.width, truth.height):
        raise DimensionError(
            f"mask {predicted.width}x{predicted.height} does not match "
            f"ground truth {truth.width}x{truth.height}"
        )
    labels = truth.labels
    scoreable = (labels != GtLabel.OUTSIDE_ROI) & (labels != GtLabel.UNKNOWN)
    truth_fg = labels == GtLabel.FOREGROUND
    pred_fg = predicted.labels != 0
    frame = ConfusionCounts(
        tp=int(np.sum(scoreable & truth_fg & pred_fg)),
        fp=int(np.sum(scoreable & ~truth_fg & pred_fg)),
        tn=int(np.sum(scoreable & ~truth_fg & ~pred_fg)),
        fn=int(np.sum(scoreable & truth_fg & ~pred_fg)),
    )
    return counts + frame


def measures(counts: ConfusionCounts) -> MeasureSet:
    """Derive the seven measures, with defined values on zero denominators.

    Convention for empty denominators: a ratio whose denominator is zero
    is 1 when the frame-level situation is vacuously perfect (no
    positives exist and none were predicted, or symmetrically for
    negatives) and 0 otherwise.  FNR and FPR are the exact complements
    of recall and specificity in every case.
    """
    tp, fp, tn, fn = counts.tp, counts.fp, counts.tn, counts.fn
    if tp + fn > 0:
        recall = tp / (tp + fn)
    else:
        recall = 1.0 if fp == 0 else 0.0
    if tn + fp > 0:
        specificity = tn / (tn + fp)
    else:
        specificity = 1.0 if fn == 0 else 0.0
    if tp + fp > 0:
        precision = tp / (tp + fp)
    else:
        precision = 1.0 if fn == 0 else 0.0
    pwc = 100.0 * (fn + fp) / counts.total if counts.total > 0 else 0.0
    if precision + recall > 0:
        fmeasure = 2.0 * precision * recall / (precision + recall)
    else:
        fmeasure = 0.0
    return MeasureSet(
        recall=recall,
        specificity=specificity,
        fpr=1.0 - specificity,
        fnr=1.0 - recall,
        pwc=pwc,
        precision=precision,
        fmeasure=fmeasure,
    )


@dataclass(frozen=True)
class SyntheticStreamSpec:
    """Shape and corruption levels of a generated stream."""

    m: int = 100
    k: int = 5
    n_frames: int = 2000
    outlier_fraction: float = 0.1
    outlier_magnitude: float = 1.0
    noise_sigma: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.k < self.m:
            raise ConfigError(f"need 1 <= k < m, got m={self.m}, k={self.k}")
        if self.n_frames < 1:
            raise ConfigError(f"n_frames must be >= 1, got {self.n_frames}")
        if not 0.0 <= self.outlier_fraction < 1.0:
            raise ConfigError(
                f"outlier_fraction must be in [0, 1), got {self.outlier_fraction}"
            )
        if self.noise_sigma < 0.0:
            raise ConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma}")


@dataclass
class SyntheticStream:
    """Frames plus everything needed to score recovery against them."""

    frames: np.ndarray  # (n_frames, m)
    truth_basis: SubspaceBasis
    coords: np.ndarray  # (n_frames, k), the clean low-rank coordinates
    outlier_masks: np.ndarray  # (n_frames, m) bool supports


def generate_stream(spec: SyntheticStreamSpec) -> SyntheticStream:
    """Draw a deterministic corrupted low-rank stream for the given spec.

    Outlier supports are drawn uniformly without replacement each frame
    (size ``round(fraction * m)``), values are ``+-magnitude`` with
    random sign.
    """
    rng = np.random.default_rng(spec.seed)
    truth = random_orthonormal(spec.m, spec.k, seed=spec.seed + 1)
    n_outliers = int(round(spec.outlier_fraction * spec.m))

    coords = rng.standard_normal((spec.n_frames, spec.k))
    frames = coords @ truth.data.T
    masks = np.zeros((spec.n_frames, spec.m), dtype=bool)
    for i in range(spec.n_frames):
        if n_outliers:
            support = rng.choice(spec.m, size=n_outliers, replace=False)
            signs = rng.choice((-1.0, 1.0), size=n_outliers)
            frames[i, support] += spec.outlier_magnitude * signs
            masks[i, support] = True
    if spec.noise_sigma > 0.0:
        frames += spec.noise_sigma * rng.standard_normal(frames.shape)
    return SyntheticStream(frames=frames, truth_basis=truth, coords=coords, outlier_masks=masks)


def subspace_error(estimate: SubspaceBasis, truth: SubspaceBasis) -> float:
    """Sine of the largest principal angle between the two spans.

    Computed as the spectral norm of the truth basis projected off the
    estimated span; invariant under rotation of either basis.
    """
    if (estimate.m, estimate.k) != (truth.m, truth.k):
        raise DimensionError(
            f"bases disagree: {estimate.m}x{estimate.k} vs {truth.m}x{truth.k}"
        )
    off_span = truth.data - estimate.data @ (estimate.data.T @ truth.data)
    return float(np.linalg.svd(off_span, compute_uv=False)[0])


def signal_scale(spec: SyntheticStreamSpec) -> float:
    """Normalization factor giving the clean component unit variance.

    The generator's clean frames have average per-coordinate variance
    ``k / m`` by construction, so multiplying by ``sqrt(m / k)`` puts
    the stream on the same unit intensity scale the video pipeline's
    standard-deviation normalization produces.  The threshold and
    smoothing parameters are calibrated for that scale; feeding raw
    streams whose scale varies with the corruption level would change
    the effective calibration between experiments.
    """
    return float(np.sqrt(spec.m / spec.k))


def track_stream(
    stream: SyntheticStream,
    params: ProstParams,
    basis_seed: int,
    scale: float = 1.0,
    initial_basis: SubspaceBasis | None = None,
) -> SubspaceBasis:
    """Run the online tracker over a whole synthetic stream.

    ``scale`` multiplies every frame (see :func:`signal_scale`);
    ``initial_basis`` overrides the random bootstrap, for experiments
    that isolate tracking from the startup transient.
    """
    m = stream.frames.shape[1]
    state = bootstrap(m, params, seed=basis_seed)
    if initial_basis is not None:
        state.basis = initial_basis
    for frame in stream.frames:
        state, _, _ = process_frame(state, frame if scale == 1.0 else frame * scale, params)
    return state.basis


def compare_modes(
    spec: SyntheticStreamSpec,
    params: ProstParams,
    p_values: list[float],
    seeds: list[int],
) -> list[tuple[float, int, float]]:
    """Final subspace error per (p, seed), everything else held fixed.

    For each seed one stream is generated and every exponent tracks that
    identical stream from the identical random initialization, so rows
    with the same seed are paired.  Only ``p`` varies; the smoothing
    offset stays at the caller's value.
    """
    for p in p_values:
        if not (0.0 < p <= 2.0):
            raise ConfigError(f"p values must be in (0, 2], got {p}")
    rows = []
    scale = signal_scale(spec)
    for seed in seeds:
        stream = generate_stream(replace(spec, seed=seed))
        for p in p_values:
            mode = replace(params, cfg=LpConfig(p=p, mu=params.cfg.mu))
            basis = track_stream(stream, mode, basis_seed=seed + 1_000_003, scale=scale)
            rows.append((p, seed, subspace_error(basis, stream.truth_basis)))
    return rows


def measures_csv_rows(
    labeled: list[tuple[str, float, MeasureSet]]
) -> list[list[str]]:
    """Rows of (sequence, delta, seven measures) formatted for CSV."""
    header = ["sequence", "delta", *MEASURE_NAMES]
    rows = [header]
    for name, delta, mset in labeled:
        rows.append([name, f"{delta:.6g}", *(f"{v:.6g}" for v in mset.as_tuple())])
    return rows


def rows_to_csv(rows: list[list[str]]) -> str:
    buf = io.StringIO()
    for row in rows:
        buf.write(",".join(row))
        buf.write("\n")
    return buf.getvalue()

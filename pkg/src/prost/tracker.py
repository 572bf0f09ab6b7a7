"""The online tracking loop.

Each frame is processed in three stages: fit the subspace coordinates to
the frame under the current pixel weights, take one geodesic descent
step of the basis along the (rank-one) projected gradient, then relabel
pixels by thresholding the residual against the updated model.  The
labels become the weights for the next frame, so known foreground
barely influences the model while fresh background keeps it current.

A tracker state is single-owner mutable: process frames on one thread
at a time.  States may move between threads between frames.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

from .cost import LpConfig, basis_gradient_factor
from .errors import ConfigError, DimensionError, SnapshotError
from .fit import CgOptions, FitResult, fit_coordinates
from .manifold import SubspaceBasis, geodesic_step, project_rank_one, random_orthonormal
from .pipeline import PreprocStats

__all__ = [
    "ProstParams",
    "TrackerState",
    "step_size",
    "tau_from_init",
    "bootstrap",
    "process_frame",
    "pack_snapshot",
    "save_snapshot",
    "load_snapshot",
    "unpack_snapshot",
    "params_hash",
]

SNAPSHOT_MAGIC = b"PROSTSNAP1"


@dataclass(frozen=True)
class ProstParams:
    """All tracker tunables.

    ``tau`` controls the exponential step-size decay; derive it from an
    initialization length with :func:`tau_from_init`.  ``omega`` is the
    fit weight given to coordinates labeled foreground (1 disables
    weighting entirely).
    """

    k: int
    cfg: LpConfig
    delta: float
    omega: float = 1.0
    t_init: float = 5e-3
    t_min: float = 1e-4
    tau: float = 0.0
    cg: CgOptions = field(default_factory=CgOptions)

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"subspace dimension must be >= 1, got {self.k}")
        if not self.delta > 0.0:
            raise ConfigError(f"delta must be > 0, got {self.delta}")
        if not (0.0 < self.omega <= 1.0):
            raise ConfigError(f"omega must be in (0, 1], got {self.omega}")
        if not (0.0 < self.t_min <= self.t_init):
            raise ConfigError(
                f"need 0 < t_min <= t_init, got t_min={self.t_min}, t_init={self.t_init}"
            )
        if self.tau < 0.0:
            raise ConfigError(f"tau must be >= 0, got {self.tau}")


@dataclass
class TrackerState:
    """Everything the loop carries from one frame to the next."""

    basis: SubspaceBasis
    y: np.ndarray
    weights: np.ndarray
    frame_index: int = 0
    preproc: PreprocStats | None = None


def tau_from_init(t_init: float, t_min: float, i_init: int) -> float:
    """Decay rate that brings the step from t_init to t_min in i_init frames."""
    if not (0.0 < t_min <= t_init):
        raise ConfigError(f"need 0 < t_min <= t_init, got t_min={t_min}, t_init={t_init}")
    if i_init < 1:
        raise ConfigError(f"i_init must be >= 1, got {i_init}")
    return -float(np.log(t_min / t_init)) / i_init


def step_size(i: int, params: ProstParams) -> float:
    """Exponentially decaying step, floored at t_min: max(e^(-tau i) t_init, t_min)."""
    if i < 0:
        raise ConfigError(f"frame index must be >= 0, got {i}")
    return max(float(np.exp(-params.tau * i)) * params.t_init, params.t_min)


def bootstrap(m: int, params: ProstParams, seed: int) -> TrackerState:
    """Fresh state: random orthonormal basis, zero coordinates, unit weights.

    There is no separate batch training phase; the model is learned
    directly from the (possibly corrupted) stream.
    """
    basis = random_orthonormal(m, params.k, seed)
    return TrackerState(
        basis=basis,
        y=np.zeros(params.k),
        weights=np.ones(m),
        frame_index=0,
    )


def process_frame(
    state: TrackerState, x: np.ndarray, params: ProstParams
) -> tuple[TrackerState, np.ndarray, FitResult]:
    """Advance the tracker by one preprocessed frame.

    Returns the updated state, the residual of the frame against the
    updated model (the vector segmentation thresholds), and the fit
    diagnostics.  The first frame cold-starts the coordinates from the
    least-squares projection; later frames warm-start from the previous
    solution.
    """
    basis = state.basis
    if x.shape != (basis.m,):
        raise DimensionError(f"frame must have shape ({basis.m},), got {x.shape}")

    warm = None if state.frame_index == 0 else state.y
    fit = fit_coordinates(basis, x, warm, params.cfg, state.weights, params.cg)

    # One descent step of the basis along the post-fit gradient.
    factor = basis_gradient_factor(fit.residual, params.cfg, state.weights)
    direction = project_rank_one(basis, factor, fit.y)
    t = step_size(state.frame_index, params)
    new_basis = geodesic_step(basis, direction, t, descend=True)

    # Relabel against the freshest model; the labels weight the next fit.
    residual = x - new_basis.data @ fit.y
    new_weights = np.where(np.abs(residual) < params.delta, 1.0, params.omega)

    new_state = TrackerState(
        basis=new_basis,
        y=fit.y,
        weights=new_weights,
        frame_index=state.frame_index + 1,
        preproc=state.preproc,
    )
    return new_state, residual, fit


def params_hash(params: ProstParams) -> int:
    """Stable 64-bit digest of the resolved parameter set."""
    canonical = "|".join(
        repr(v)
        for v in (
            params.k,
            params.cfg.p,
            params.cfg.mu,
            params.delta,
            params.omega,
            params.t_init,
            params.t_min,
            params.tau,
            params.cg.max_iters,
            params.cg.grad_tol,
            params.cg.initial_step,
            params.cg.shrink,
            params.cg.sufficient_decrease,
            params.cg.max_backtracks,
        )
    )
    digest = hashlib.sha256(canonical.encode()).digest()
    return struct.unpack("<Q", digest[:8])[0]


def _pack_state(state: TrackerState, params: ProstParams) -> bytes:
    m, k = state.basis.m, state.basis.k
    parts = [
        SNAPSHOT_MAGIC,
        struct.pack("<IIQQB", m, k, state.frame_index, params_hash(params),
                    1 if state.preproc is not None else 0),
        state.basis.data.astype("<f8").tobytes(order="C"),
        state.y.astype("<f8").tobytes(),
        state.weights.astype("<f8").tobytes(),
    ]
    pre = state.preproc
    if pre is not None:
        parts.append(
            struct.pack(
                "<IBQddQd",
                pre.mean.size,
                1 if pre.frozen else 0,
                pre.frames_seen,
                pre.value_sum,
                pre.value_sumsq,
                pre.value_count,
                pre.std,
            )
        )
        parts.append(pre.mean.astype("<f8").tobytes())
    return b"".join(parts)


def pack_snapshot(state: TrackerState, params: ProstParams) -> bytes:
    """Serialize a tracker state into resumable snapshot bytes."""
    return _pack_state(state, params)


def save_snapshot(state: TrackerState, params: ProstParams, path) -> None:
    """Write a resumable binary snapshot of the tracker state."""
    with open(path, "wb") as fh:
        fh.write(_pack_state(state, params))


def load_snapshot(path, params: ProstParams) -> TrackerState:
    """Restore a tracker state saved by :func:`save_snapshot`."""
    with open(path, "rb") as fh:
        blob = fh.read()
    return unpack_snapshot(blob, params, source=str(path))


def unpack_snapshot(blob: bytes, params: ProstParams, source: str = "<bytes>") -> TrackerState:
    """Rebuild a tracker state from snapshot bytes.

    The stored parameter hash must match ``params``; resuming under a
    different configuration would silently change the model's meaning.
    """
    path = source
    if not blob.startswith(SNAPSHOT_MAGIC):
        raise SnapshotError(f"{path}: not a tracker snapshot")
    offset = len(SNAPSHOT_MAGIC)

    def take(fmt: str):
        nonlocal offset
        size = struct.calcsize(fmt)
        if offset + size > len(blob):
            raise SnapshotError(f"{path}: truncated snapshot")
        values = struct.unpack_from(fmt, blob, offset)
        offset += size
        return values

    def take_array(count: int) -> np.ndarray:
        nonlocal offset
        size = count * 8
        if offset + size > len(blob):
            raise SnapshotError(f"{path}: truncated snapshot")
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=offset).copy()
        offset += size
        return arr

    m, k, frame_index, stored_hash, has_preproc = take("<IIQQB")
    if stored_hash != params_hash(params):
        raise SnapshotError(
            f"{path}: snapshot was written with different parameters"
        )
    if k != params.k:
        raise SnapshotError(f"{path}: snapshot k={k} does not match params k={params.k}")
    basis = SubspaceBasis(take_array(m * k).reshape(m, k))
    y = take_array(k)
    weights = take_array(m)

    preproc = None
    if has_preproc:
        length, frozen, frames_seen, vsum, vsumsq, vcount, std = take("<IBQddQd")
        mean = take_array(length)
        preproc = PreprocStats(
            mean=mean,
            frames_seen=frames_seen,
            frozen=bool(frozen),
            std=std,
            value_sum=vsum,
            value_sumsq=vsumsq,
            value_count=vcount,
        )
    return TrackerState(
        basis=basis, y=y, weights=weights, frame_index=frame_index, preproc=preproc
    )

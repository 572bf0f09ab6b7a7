"""Orthonormal bases and rank-one geodesic motion between subspaces.

A subspace model is stored as one orthonormal m-by-k matrix; two bases
spanning the same subspace are interchangeable.  The online tracker only
ever moves along rank-one tangent directions, so the geodesic here is the
rank-one specialization: it rotates the single in-span direction ``U v``
toward (or away from) a unit vector orthogonal to the span and leaves the
complementary columns fixed.

All functions are pure.  Matrix products reduce through numpy/BLAS, whose
accumulation order is fixed for a given build, so results are
deterministic within a process.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError

__all__ = [
    "ORTHONORMALITY_TOL",
    "DEGENERACY_FLOOR",
    "REORTHONORMALIZE_EVERY",
    "SubspaceBasis",
    "Rank1Direction",
    "random_orthonormal",
    "tangent_project",
    "project_rank_one",
    "geodesic_step",
]

# Frobenius drift of U^T U from the identity above which a thin QR is rerun.
ORTHONORMALITY_TOL = 1e-8
# Norms below this are treated as exactly zero when forming unit vectors.
DEGENERACY_FLOOR = 1e-14
# Unconditional re-orthonormalization cadence for long streams.
REORTHONORMALIZE_EVERY = 1000


def _orthonormality_drift(data: np.ndarray) -> float:
    k = data.shape[1]
    gram = data.T @ data
    return float(np.linalg.norm(gram - np.eye(k)))


@dataclass
class SubspaceBasis:
    """An m-by-k matrix with orthonormal columns (1 <= k < m).

    ``steps_since_qr`` counts geodesic steps taken since the columns were
    last explicitly re-orthonormalized; treat instances as immutable.
    """

    data: np.ndarray
    steps_since_qr: int = field(default=0, compare=False)

    def __post_init__(self):
        if self.data.ndim != 2:
            raise DimensionError(f"basis must be a matrix, got shape {self.data.shape}")
        m, k = self.data.shape
        if not 1 <= k < m:
            raise DimensionError(f"need 1 <= k < m, got m={m}, k={k}")
        drift = _orthonormality_drift(self.data)
        if drift > ORTHONORMALITY_TOL:
            raise DimensionError(
                f"columns are not orthonormal (drift {drift:.3e} > {ORTHONORMALITY_TOL})"
            )

    @property
    def m(self) -> int:
        return self.data.shape[0]

    @property
    def k(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class Rank1Direction:
    """Compact SVD of a rank-one tangent matrix ``scale * left @ right.T``.

    ``left`` is a unit m-vector orthogonal to the span of the basis the
    direction was projected against, ``right`` a unit k-vector.  A
    degenerate (zero) direction is flagged by ``scale == 0``; its unit
    vectors are then meaningless.
    """

    left: np.ndarray
    right: np.ndarray
    scale: float

    @property
    def is_zero(self) -> bool:
        return self.scale == 0.0


def random_orthonormal(m: int, k: int, seed: int) -> SubspaceBasis:
    """Draw a uniformly random k-dimensional subspace of R^m.

    A standard-normal m-by-k matrix is reduced by thin QR; the Gaussian
    draw makes the distribution rotation invariant.  Column signs are
    fixed so the result is a deterministic function of the seed.
    """
    if not 1 <= k < m:
        raise DimensionError(f"need 1 <= k < m, got m={m}, k={k}")
    rng = np.random.default_rng(seed)
    gauss = rng.standard_normal((m, k))
    q, r = np.linalg.qr(gauss)
    q = q * np.where(np.diag(r) < 0.0, -1.0, 1.0)
    return SubspaceBasis(q)


def tangent_project(basis: SubspaceBasis, ambient: np.ndarray) -> np.ndarray:
    """Project an ambient m-by-k matrix (or m-vector) off the span of the basis.

    Returns ``H - U (U^T H)``, the component orthogonal to every basis
    column, without forming the m-by-m projector.
    """
    u = basis.data
    if ambient.shape[0] != u.shape[0]:
        raise DimensionError(
            f"ambient rows {ambient.shape[0]} do not match basis m={u.shape[0]}"
        )
    return ambient - u @ (u.T @ ambient)


def project_rank_one(
    basis: SubspaceBasis, ambient: np.ndarray, coords: np.ndarray
) -> Rank1Direction:
    """Compact SVD of the projected outer product ``pi(ambient) @ coords.T``.

    The projected gradient of the tracking cost always has this rank-one
    form, so its SVD is available in closed form: left singular vector is
    the normalized projection of ``ambient``, right singular vector the
    normalized ``coords``, and the singular value the product of their
    norms.  The full m-by-k matrix is never materialized.
    """
    if ambient.shape != (basis.m,):
        raise DimensionError(f"ambient must have shape ({basis.m},), got {ambient.shape}")
    if coords.shape != (basis.k,):
        raise DimensionError(f"coords must have shape ({basis.k},), got {coords.shape}")
    projected = tangent_project(basis, ambient)
    left_norm = float(np.linalg.norm(projected))
    right_norm = float(np.linalg.norm(coords))
    if left_norm < DEGENERACY_FLOOR or right_norm < DEGENERACY_FLOOR:
        return Rank1Direction(
            left=np.zeros(basis.m), right=np.zeros(basis.k), scale=0.0
        )
    return Rank1Direction(
        left=projected / left_norm,
        right=coords / right_norm,
        scale=left_norm * right_norm,
    )


def geodesic_step(
    basis: SubspaceBasis, direction: Rank1Direction, t: float, descend: bool = True
) -> SubspaceBasis:
    """Move the basis along the geodesic of a rank-one direction.

    With rotation angle ``phi = scale * t`` the update is

        U' = U + ((cos(phi) - 1) * (U v) + sign * sin(phi) * s) v^T,

    where ``s``/``v`` are the direction's unit vectors and ``sign`` is -1
    when descending (motion against the gradient).  The update rotates
    within the plane spanned by ``U v`` and ``s`` and is exactly
    orthonormality-preserving; accumulated floating-point drift is removed
    by a thin QR every ``REORTHONORMALIZE_EVERY`` steps or whenever the
    drift check fires.
    """
    if t < 0.0:
        raise ConfigError(f"step size must be nonnegative, got {t}")
    if direction.is_zero or t == 0.0:
        return basis
    if direction.left.shape != (basis.m,) or direction.right.shape != (basis.k,):
        raise DimensionError("direction dimensions do not match basis")

    u = basis.data
    v = direction.right
    phi = direction.scale * t
    sign = -1.0 if descend else 1.0
    in_span = u @ v
    update = np.outer(
        (np.cos(phi) - 1.0) * in_span + (sign * np.sin(phi)) * direction.left, v
    )
    new_data = u + update

    steps = basis.steps_since_qr + 1
    if steps >= REORTHONORMALIZE_EVERY or _orthonormality_drift(new_data) > ORTHONORMALITY_TOL:
        q, r = np.linalg.qr(new_data)
        new_data = q * np.where(np.diag(r) < 0.0, -1.0, 1.0)
        steps = 0
    return SubspaceBasis(new_data, steps_since_qr=steps)

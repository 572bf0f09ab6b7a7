"""Robust coordinate fitting by nonlinear conjugate gradient.

Given a frame ``x`` and a fixed basis ``U``, minimize the weighted
smoothed lp cost of the residual ``x - U y`` over the coordinates ``y``.
The cost is non-convex for p < 1, but a handful of CG iterations from a
warm start is enough in practice, so the solver runs on a small fixed
budget.  Descent is enforced by an Armijo backtracking line search: the
returned cost is never worse than the starting point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cost import LpConfig, cost_and_gradient, smoothed_lp_cost
from .errors import ConfigError, DimensionError, NonFiniteError
from .manifold import SubspaceBasis

__all__ = ["CgOptions", "FitResult", "fit_coordinates"]


@dataclass(frozen=True)
class CgOptions:
    """Budget and line-search knobs for the coordinate solver."""

    max_iters: int = 5
    grad_tol: float = 1e-8
    initial_step: float = 1.0
    shrink: float = 0.5
    sufficient_decrease: float = 1e-4
    max_backtracks: int = 20

    def __post_init__(self):
        if self.max_iters < 1:
            raise ConfigError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.grad_tol < 0.0:
            raise ConfigError(f"grad_tol must be >= 0, got {self.grad_tol}")
        if not (0.0 < self.shrink < 1.0):
            raise ConfigError(f"shrink must be in (0, 1), got {self.shrink}")
        if not (0.0 < self.sufficient_decrease <= 0.5):
            raise ConfigError(
                f"sufficient_decrease must be in (0, 0.5], got {self.sufficient_decrease}"
            )
        if self.max_backtracks < 1:
            raise ConfigError(f"max_backtracks must be >= 1, got {self.max_backtracks}")


@dataclass
class FitResult:
    """Fitted coordinates plus the final residual and cost.

    The residual and cost are returned so callers do not recompute them;
    the eval counters exist for budget checks.
    """

    y: np.ndarray
    residual: np.ndarray
    cost: float
    iterations: int
    cost_evals: int
    grad_evals: int


def fit_coordinates(
    basis: SubspaceBasis,
    x: np.ndarray,
    y0: np.ndarray | None,
    cfg: LpConfig,
    weights: np.ndarray | None = None,
    opts: CgOptions = CgOptions(),
) -> FitResult:
    """Minimize the smoothed lp cost of ``x - U y`` over ``y``.

    Uses Polak-Ribiere+ conjugate gradient (beta clamped at zero, which
    restarts automatically) with Armijo backtracking from the unit step.
    ``y0`` warm-starts the solve; ``None`` starts from the least-squares
    projection ``U^T x``.  Deterministic for identical inputs.
    """
    u = basis.data
    if x.shape != (basis.m,):
        raise DimensionError(f"frame must have shape ({basis.m},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteError("frame contains non-finite values")
    if y0 is None:
        y = u.T @ x
    else:
        if y0.shape != (basis.k,):
            raise DimensionError(f"warm start must have shape ({basis.k},), got {y0.shape}")
        y = y0.astype(float, copy=True)

    cost_evals = 0
    grad_evals = 0

    def eval_cost_grad(residual: np.ndarray) -> tuple[float, np.ndarray]:
        nonlocal cost_evals, grad_evals
        cost_evals += 1
        grad_evals += 1
        c, g_res = cost_and_gradient(residual, cfg, weights)
        return c, -(u.T @ g_res)

    residual = x - u @ y
    f_cur, grad = eval_cost_grad(residual)
    direction = -grad
    iterations = 0

    for it in range(opts.max_iters):
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm <= opts.grad_tol:
            break
        # Reset to steepest descent periodically and whenever the CG
        # direction stops pointing downhill.
        if it > 0 and it % basis.k == 0:
            direction = -grad
        slope = float(direction @ grad)
        if slope >= 0.0:
            direction = -grad
            slope = -grad_norm * grad_norm

        # One basis product per iteration; backtracks then only touch
        # elementwise quantities.
        u_dir = u @ direction
        alpha = opts.initial_step
        accepted = False
        for _ in range(opts.max_backtracks):
            trial_residual = residual - alpha * u_dir
            cost_evals += 1
            trial_cost = smoothed_lp_cost(trial_residual, cfg, weights)
            if trial_cost <= f_cur + opts.sufficient_decrease * alpha * slope:
                accepted = True
                break
            alpha *= opts.shrink
        if not accepted:
            break

        iterations = it + 1
        y = y + alpha * direction
        residual = trial_residual
        new_cost, new_grad = eval_cost_grad(residual)
        f_cur = new_cost
        beta = max(0.0, float(new_grad @ (new_grad - grad)) / (grad_norm * grad_norm))
        direction = -new_grad + beta * direction
        grad = new_grad

    return FitResult(
        y=y,
        residual=residual,
        cost=f_cur,
        iterations=iterations,
        cost_evals=cost_evals,
        grad_evals=grad_evals,
    )

"""Bounded nonlinear least squares with a rectangular trust region.

Minimizes ``0.5 * ||r(x)||^2`` subject to ``lower <= x <= upper``. Each
iteration solves the Gauss-Newton system on the currently free variables;
when the full step does not fit, it falls back to a dogleg path between
the steepest-descent (Cauchy) point and the Gauss-Newton point. All steps
are confined to the intersection of an infinity-norm trust region with
the feasible box, and variables pinned at a bound with an outward-pointing
gradient are frozen for the iteration.

Convergence: accepted step 2-norm below ``step_tol``, or relative cost
decrease below ``cost_tol``, within ``max_iter`` iterations. If no further
descent can be found the best point so far is returned with
``converged=False``.
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class LeastSquaresResult:
    x: np.ndarray
    residual: float  # sum of squared residuals at x
    converged: bool
    n_iter: int
    message: str


def _snap_to_bounds(x, lower, upper):
    """Pull values within one part in 1e12 of a finite bound exactly onto it.

    Clipped steps can land a rounding error short of a bound; the
    bound-activity tests compare exactly, so such a coordinate would stay
    formally free while its microscopic headroom throttles every
    steepest-descent step (the ray-to-edge distance is a single scalar for
    the whole step). Snapping restores the active-set logic.
    """
    snap_lo = 1e-12 * np.maximum(1.0, np.abs(lower))
    snap_hi = 1e-12 * np.maximum(1.0, np.abs(upper))
    x = np.where(np.isfinite(lower) & (x - lower <= snap_lo), lower, x)
    x = np.where(np.isfinite(upper) & (upper - x <= snap_hi), upper, x)
    return x


def _ray_to_box(origin, direction, lo, hi) -> float:
    """Largest t >= 0 with origin + t * direction inside [lo, hi]."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t_hi = np.where(direction > 0, (hi - origin) / direction, np.inf)
        t_lo = np.where(direction < 0, (lo - origin) / direction, np.inf)
    t = float(min(np.min(t_hi), np.min(t_lo)))
    return max(t, 0.0)


def _dogleg_step(p_newton, g, J, lo, hi):
    """A step within the rectangle [lo, hi], favoring the Gauss-Newton point.

    Returns ``(step, hit_boundary)``.
    """
    if np.all(p_newton >= lo) and np.all(p_newton <= hi):
        return p_newton, False

    Jg = J @ g
    curv = float(Jg @ Jg)
    gg = float(g @ g)
    t_edge = _ray_to_box(np.zeros_like(g), -g, lo, hi)
    t_cauchy = gg / curv if curv > 0 else np.inf
    if t_cauchy >= t_edge:
        return -t_edge * g, True
    p_c = -t_cauchy * g
    d = p_newton - p_c
    beta = min(1.0, _ray_to_box(p_c, d, lo, hi))
    return p_c + beta * d, beta < 1.0


def least_squares_dogbox(
    residual_fn,
    jacobian_fn,
    x0,
    lower,
    upper,
    max_iter: int = 200,
    step_tol: float = 1e-10,
    cost_tol: float = 1e-12,
) -> LeastSquaresResult:
    """Fit parameters by bounded least squares.

    ``residual_fn(x)`` returns the residual vector, ``jacobian_fn(x)`` its
    Jacobian (n_residuals x n_params). ``x0`` is clipped into the box
    before the first evaluation.
    """
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    x = np.clip(np.asarray(x0, dtype=np.float64), lower, upper)
    if x.shape != lower.shape or x.shape != upper.shape:
        raise ValueError("x0, lower and upper must share one shape")
    if np.any(lower > upper):
        raise ValueError("infeasible bounds: lower > upper")

    r = np.asarray(residual_fn(x), dtype=np.float64)
    cost = 0.5 * float(r @ r)
    delta = max(float(np.max(np.abs(x))), 1.0)
    converged = False
    message = "maximum iterations reached"
    n_iter = 0

    for n_iter in range(1, max_iter + 1):
        x_snapped = _snap_to_bounds(x, lower, upper)
        if np.any(x_snapped != x):
            x = x_snapped
            r = np.asarray(residual_fn(x), dtype=np.float64)
            cost = 0.5 * float(r @ r)
        J = np.atleast_2d(np.asarray(jacobian_fn(x), dtype=np.float64))
        g = J.T @ r
        free = ~(((x <= lower) & (g > 0)) | ((x >= upper) & (g < 0)))
        if not free.any():
            converged, message = True, "all variables pinned at bounds"
            break

        Jf = J[:, free]
        p_newton = np.linalg.lstsq(Jf, -r, rcond=None)[0]

        accepted = False
        step_norm = 0.0
        actual = 0.0
        for _ in range(64):
            tr_lo = np.maximum(lower[free] - x[free], -delta)
            tr_hi = np.minimum(upper[free] - x[free], delta)
            step_f, hit = _dogleg_step(p_newton, g[free], Jf, tr_lo, tr_hi)
            predicted = -(float(g[free] @ step_f) + 0.5 * float(np.sum((Jf @ step_f) ** 2)))
            if predicted <= 0:
                # no descent possible within the region: stationary point
                converged, message = True, "no predicted descent (stationary point)"
                break

            x_new = x.copy()
            x_new[free] = np.clip(x[free] + step_f, lower[free], upper[free])
            r_new = np.asarray(residual_fn(x_new), dtype=np.float64)
            cost_new = 0.5 * float(r_new @ r_new)
            actual = cost - cost_new
            step_norm = float(np.linalg.norm(x_new - x))
            ratio = actual / predicted if predicted > 0 else 0.0

            if ratio < 0.25:
                delta = 0.25 * max(float(np.max(np.abs(step_f))), step_tol)
            elif ratio > 0.75 and hit:
                delta = min(2.0 * delta, 1e8)

            if actual > 0:
                x, r, cost = x_new, r_new, cost_new
                accepted = True
                break
            if delta < step_tol:
                break
        if converged:
            break
        if not accepted:
            converged = step_norm < step_tol
            message = (
                "step norm below tolerance (no further descent)"
                if converged
                else "trust region collapsed without progress"
            )
            break

        if step_norm < step_tol:
            converged, message = True, "step norm below tolerance"
            break
        if actual < cost_tol * max(cost + actual, np.finfo(float).tiny):
            converged, message = True, "relative cost decrease below tolerance"
            break

    return LeastSquaresResult(
        x=x, residual=2.0 * cost, converged=converged, n_iter=n_iter, message=message
    )

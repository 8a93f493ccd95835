"""Dual subproblem: a nonnegative quadratic program per solver iteration.

Eliminating the primal step from the per-iteration Lagrangian leaves a
concave quadratic in the dual multipliers alpha >= 0,

    maximize  -1/2 alpha' A alpha + c' alpha

with A = G' K G / beta built from the constraint gradients and the kernel
matrix, and c collecting the constraint values and the pull of the imitation
and obstacle terms.  A is symmetric positive semi-definite up to round-off; a
tiny ridge proportional to its trace makes the problem strictly concave.

The solver is projected gradient ascent with an exact line search along the
projected (piecewise linear) search path, run in Jacobi-scaled coordinates
to even out per-row curvature, with support for warm starts.  Convergence
is declared on the KKT conditions of the original variables: alpha >= 0 (by
construction), (A alpha - c) >= -tol, and complementarity
|alpha_i (A alpha - c)_i| <= tol * (1 + |c_i|).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["DualProblem", "DualSolution", "UnboundedDualError", "build_dual", "solve_nonneg_qp"]


class UnboundedDualError(RuntimeError):
    """The dual objective increases without bound along a feasible ray."""


@dataclass
class DualProblem:
    """Canonical maximize -1/2 a'Aa + c'a over a >= 0; ridge is added to A."""

    hessian: np.ndarray
    linear: np.ndarray
    ridge: float

    def __post_init__(self):
        A = np.asarray(self.hessian, dtype=float)
        c = np.asarray(self.linear, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or c.shape != (A.shape[0],):
            raise ValueError(f"inconsistent dual shapes: A {A.shape}, c {c.shape}")
        self.hessian, self.linear = A, c

    @property
    def dim(self):
        return self.linear.size

    def regularized_hessian(self):
        A = self.hessian.copy()
        A[np.diag_indices_from(A)] += self.ridge
        return A

    def objective(self, alpha):
        A = self.regularized_hessian()
        return float(-0.5 * alpha @ A @ alpha + self.linear @ alpha)


@dataclass
class DualSolution:
    alpha: np.ndarray
    converged: bool
    n_iterations: int
    kkt_residual: float


def build_dual(gram, cross_gram, sigma_inv_residual, xi_current, linearized, lam, beta, lam_obs, obstacle_stack=None):
    """Assemble the canonical dual problem for the current iterate.

    gram is the support-grid kernel matrix K (array or BlockKernelMatrix),
    cross_gram the support-by-obstacle matrix, sigma_inv_residual the
    covariance-weighted tracking residual, xi_current the stacked states and
    linearized the constraint package.  The obstacle term may be omitted by
    passing obstacle_stack=None or lam_obs=0.
    """
    K = getattr(gram, "block", gram)
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    pull = K @ sigma_inv_residual + lam * np.asarray(xi_current, dtype=float)
    if obstacle_stack is not None and lam_obs != 0.0:
        Kt = getattr(cross_gram, "block", cross_gram)
        pull = pull + lam_obs * (Kt @ obstacle_stack)
    c = -linearized.values + linearized.rmatvec(pull) / beta

    dim = linearized.n_constraints
    A = np.zeros((dim, dim))
    if dim:
        state_dim = linearized.state_dim
        KG = np.empty((K.shape[0], dim))
        for n, block in linearized.blocks.items():
            sl = linearized.col_slices[n]
            KG[:, sl] = K[:, n * state_dim : (n + 1) * state_dim] @ block
        for n, block in linearized.blocks.items():
            sl = linearized.col_slices[n]
            A[sl, :] = block.T @ KG[n * state_dim : (n + 1) * state_dim, :]
        A /= beta
        A = 0.5 * (A + A.T)
    ridge = 1e-10 * float(np.trace(A)) / dim if dim else 0.0
    return DualProblem(hessian=A, linear=c, ridge=ridge)


def _kkt_residual(alpha, grad, c):
    """Maximum violation of the first-order conditions at alpha."""
    if alpha.size == 0:
        return 0.0
    stationarity = max(0.0, float(grad.max()))
    complementarity = float(np.max(np.abs(alpha * grad) / (1.0 + np.abs(c))))
    return max(stationarity, complementarity)


def solve_nonneg_qp(problem, alpha0=None, tol=1e-8, max_iter=10000):
    """Projected gradient ascent with exact line search and warm starting.

    Returns the best iterate with converged=False when max_iter runs out.
    Raises UnboundedDualError when a zero-curvature ascent ray exists (only
    possible when the ridge vanishes, e.g. an all-zero Hessian with a
    positive linear coefficient).
    """
    n = problem.dim
    if n == 0:
        return DualSolution(alpha=np.zeros(0), converged=True, n_iterations=0, kkt_residual=0.0)
    A = problem.regularized_hessian()
    c = problem.linear
    # Jacobi scaling: the diagonal of A mixes constraint rows of wildly
    # different physical scale (unit desired-point rows next to quadratic
    # ball rows), and plain projected gradient zigzags on that anisotropy.
    # Working in sqrt-diagonal coordinates keeps the feasible orthant and
    # the exact line search intact while evening out the curvature.
    diag = np.diag(A).copy()
    scale = np.sqrt(np.where(diag > 0.0, diag, 1.0))
    As = A / np.outer(scale, scale)
    cs = c / scale
    if alpha0 is None:
        alpha = np.zeros(n)
    else:
        alpha = np.maximum(np.asarray(alpha0, dtype=float).copy(), 0.0)
        if alpha.shape != (n,):
            raise ValueError(f"warm start has shape {alpha.shape}, expected ({n},)")
        if np.any(alpha):
            # A stale warm start (active set shifted a lot since the last
            # solve) can be far worse than starting over; keep whichever
            # start point has the smaller KKT residual.
            warm_res = _kkt_residual(alpha, c - A @ alpha, c)
            zero_res = max(0.0, float(c.max()))
            if zero_res < warm_res:
                alpha = np.zeros(n)
    a = alpha * scale

    def unscaled_residual(a_vec, gs):
        return _kkt_residual(a_vec / scale, gs * scale, c)

    gs = cs - As @ a
    residual = unscaled_residual(a, gs)
    iteration = 0
    while iteration < max_iter:
        if residual <= tol:
            # Certify convergence from a freshly computed gradient; the
            # steps below keep it up to date incrementally.
            gs = cs - As @ a
            residual = unscaled_residual(a, gs)
            if residual <= tol:
                return DualSolution(alpha=a / scale, converged=True, n_iterations=iteration, kkt_residual=residual)
            continue
        direction = np.where((a > 0.0) | (gs > 0.0), gs, 0.0)
        if not np.any(direction):
            # No admissible ascent direction: KKT holds exactly.
            return DualSolution(alpha=a / scale, converged=True, n_iterations=iteration, kkt_residual=residual)
        a, gs = _projected_search(As, cs, a, gs, direction)
        iteration += 1
        # Adjacent constraint rows are often nearly parallel (e.g. a smooth
        # arc pinned against a workspace bound), and pure gradient steps
        # crawl on such faces.  Conjugate-gradient sweeps restricted to the
        # face found by the projected step converge there quickly; a sweep
        # ends as soon as a coordinate hits the bound.
        a, gs, used = _face_sweep(As, a, gs, max_iter - iteration)
        iteration += used
        gs = cs - As @ a
        residual = unscaled_residual(a, gs)
    return DualSolution(alpha=a / scale, converged=False, n_iterations=max_iter, kkt_residual=residual)


def _projected_search(A, c, alpha, grad, direction):
    """Exactly maximize the objective along the projected ray from alpha.

    The path s -> max(alpha + s * direction, 0) is piecewise linear with a
    kink whenever a descending coordinate reaches zero.  On each piece the
    objective is a concave parabola, so the walk advances piece by piece,
    clamping coordinates as they hit the bound, and stops at the first piece
    whose interior maximum is reached (or whose start already has
    non-positive slope).  The gradient is updated incrementally and returned
    alongside the new point.
    """
    x = alpha.copy()
    g = grad.copy()
    d = direction.copy()
    p = A @ d
    slope = float(d @ g)
    curvature = float(d @ p)
    falling = np.flatnonzero(d < 0.0)
    order = falling[np.argsort(alpha[falling] / -d[falling])]
    s_prev = 0.0
    k = 0
    refreshed = False
    while True:
        if slope <= 0.0:
            break
        if curvature > 0.0:
            s_star = s_prev + slope / curvature
        else:
            s_star = np.inf
        if k < order.size:
            j = int(order[k])
            s_next = float(alpha[j] / -d[j])
        else:
            if not np.isfinite(s_star):
                # The incremental downdates can cancel badly; recompute the
                # segment quantities once before trusting a flat slope.
                if not refreshed:
                    refreshed = True
                    p = A @ d
                    slope = float(d @ g)
                    curvature = float(d @ p)
                    continue
                # A flat rising ray with no further kinks: only possible with
                # a zero ridge (e.g. A identically zero), where ascending
                # coordinates grow forever.
                raise UnboundedDualError(
                    "dual objective is unbounded along a flat ascent direction"
                )
            j = -1
            s_next = np.inf
        if s_star <= s_next:
            step = s_star - s_prev
            if step > 0.0:
                x += step * d
                g -= step * p
            break
        # Advance to the kink and clamp the coordinate that reached zero.
        step = s_next - s_prev
        if step > 0.0:
            x += step * d
            g -= step * p
            slope -= step * curvature
        x[j] = 0.0
        dj = d[j]
        d[j] = 0.0
        column = A[:, j]
        curvature += dj * (dj * column[j] - 2.0 * p[j])
        p -= dj * column
        slope -= dj * g[j]
        s_prev = s_next
        k += 1
    np.maximum(x, 0.0, out=x)
    return x, g


def _face_sweep(A, a, g, budget):
    """Conjugate-gradient ascent restricted to the strictly positive face.

    Runs plain CG on the coordinates currently away from the bound, keeping
    the full gradient g up to date, until the face gradient has dropped two
    orders of magnitude, the budget runs out, or a coordinate reaches zero
    (which changes the face and invalidates the conjugate directions).
    Returns the point, the gradient and the number of steps taken.
    """
    face = a > 0.0
    if budget <= 0 or not np.any(face):
        return a, g, 0
    r = np.where(face, g, 0.0)
    rr = float(r @ r)
    if rr == 0.0:
        return a, g, 0
    target = 1e-4 * rr
    d = r.copy()
    used = 0
    while used < budget and rr > target:
        Ad = A @ d
        dAd = float(d @ Ad)
        if dAd <= 0.0:
            break
        step = rr / dAd
        falling = d < 0.0
        limit = np.inf
        if np.any(falling):
            limit = float(np.min(a[falling] / -d[falling]))
        used += 1
        if step >= limit:
            hit = falling & (a + limit * d <= 0.0)
            a = a + limit * d
            g = g - limit * Ad
            a[hit] = 0.0
            np.maximum(a, 0.0, out=a)
            return a, g, used
        a = a + step * d
        g = g - step * Ad
        r = np.where(face, g, 0.0)
        rr_new = float(r @ r)
        d = r + (rr_new / rr) * d
        rr = rr_new
    return a, g, used

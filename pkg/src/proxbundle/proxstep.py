"""Exact solution of the bundle subproblem with a dual certificate.

The subproblem is

    x = argmin_u { Gamma(u) + ||u - center||^2 / (2 lambda) }

with Gamma = max of affine cuts + h.  Its dual maximizes, over the simplex
of cut weights w,

    D(w) = min_u { sum_i w_i cut_i(u) + h(u) + ||u - center||^2 / (2 lambda) }

whose inner minimizer is u(w) = prox_{lambda h}(center - lambda * gbar(w)),
gbar(w) the weighted slope.  One cut is solved in closed form, two cuts by
bisection on the scalar dual derivative, and three or more cuts by projected
gradient ascent on the simplex with a Barzilai-Borwein step and backtracking.

The reported gap is the primal-dual gap at (u(w), w); the h and quadratic
terms cancel so it reduces to max_i l_i(u) - sum_i w_i l_i(u), evaluated in
a cancellation-free form.  Because the gap is a difference of function
values it cannot be certified below floating-point resolution; the solver
therefore accepts a computable roundoff floor as converged and records the
achieved gap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, SubproblemError
from .simple_terms import (BallIndicator, BoxIndicator, L1, Zero, eval_h,
                           prox_h)

__all__ = ["ProxSolution", "solve_prox", "solve_prox_simplex_dual", "project_simplex"]

_EPS = float(np.finfo(float).eps)
_BISECT_TOL = 1e-14
DEFAULT_SUBPROBLEM_TOL = 1e-12
MAX_DUAL_ITERS = 100_000


@dataclass(frozen=True)
class ProxSolution:
    """Exact subproblem solution with its dual certificate.

    ``theta`` is the subproblem optimal value Gamma(x) + ||x-c||^2/(2 lam),
    ``model_value`` is Gamma(x), ``dual_value`` = theta - gap is a rigorous
    lower bound on the true optimal value, and ``model_subgrad`` is the
    element of the model subdifferential at x recovered from the prox step,
    equal to (center - x)/lambda at an exact solution.
    """

    x: np.ndarray
    theta: float
    model_value: float
    dual_weights: np.ndarray
    model_subgrad: np.ndarray
    gap: float
    dual_value: float
    n_dual_iters: int = 0


def project_simplex(v):
    """Euclidean projection onto the probability simplex."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    cond = u - css / idx > 0
    rho = int(np.nonzero(cond)[0][-1]) + 1
    theta = css[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


class _DualProblem:
    """Cached arrays for dual evaluations of one subproblem."""

    def __init__(self, model, lam):
        if lam <= 0:
            raise ParameterError("prox stepsize lambda must be positive")
        self.lam = float(lam)
        self.h = model.h
        self.center = np.asarray(model.prox_center, dtype=float)
        self.slopes = np.array([c.slope for c in model.cuts])
        self.offsets = np.array(
            [c.value_at_base - float(np.dot(c.slope, c.base_point)) for c in model.cuts])
        self.k = len(model.cuts)

    def lvals(self, u):
        return self.slopes @ u + self.offsets

    def point(self, w):
        gbar = self.slopes.T @ w
        return prox_h(self.h, self.lam, self.center - self.lam * gbar)

    def value_and_grad(self, w):
        """Dual value D(w) and gradient (the cut values at u(w))."""
        u = self.point(w)
        lv = self.lvals(u)
        d = u - self.center
        val = float(np.dot(w, lv)) + eval_h(self.h, u) \
            + float(np.dot(d, d)) / (2.0 * self.lam)
        return u, val, lv

    @staticmethod
    def gap(w, lv):
        """Primal-dual gap sum_i w_i (max_j l_j - l_i), cancellation-free."""
        return float(np.dot(w, np.max(lv) - lv))

    def shadow(self, w):
        """Pre-prox point v(w) = center - lam * gbar(w)."""
        return self.center - self.lam * (self.slopes.T @ w)

    def prox_jvp(self, v, mat):
        """Apply the prox Jacobian at v to the columns of ``mat``.

        The catalog proxes are differentiable almost everywhere: diagonal
        masks for soft-thresholding and clamping, identity inside the ball,
        and the sphere-tangent projector (r/||z||)(I - zz^T/||z||^2) outside
        it.  Returns None only where no classical Jacobian exists (exact
        kink points), which the caller treats as a bail-out.
        """
        h = self.h
        if isinstance(h, Zero):
            return mat
        if isinstance(h, L1):
            thr = self.lam * h.weight
            mask = (np.abs(v) > thr).astype(float)
            return mask[:, None] * mat
        if isinstance(h, BoxIndicator):
            mask = ((v > h.lower) & (v < h.upper)).astype(float)
            return mask[:, None] * mat
        if isinstance(h, BallIndicator):
            z = v - h.center
            dist = float(np.linalg.norm(z))
            if dist <= h.radius:
                return mat
            zn = z / dist
            return (h.radius / dist) * (mat - np.outer(zn, zn @ mat))
        return None

    def gap_floor(self, dval, lv):
        scale = 1.0 + abs(dval) + float(np.max(np.abs(lv)))
        return 64.0 * _EPS * scale

    def finish(self, w, n_iters):
        """Clean tiny weights, rebuild the primal point and certificate."""
        w = np.maximum(np.asarray(w, dtype=float), 0.0)
        w = w / np.sum(w)
        cleaned = np.where(w > 1e-12 * np.max(w), w, 0.0)
        cleaned = cleaned / np.sum(cleaned)
        u0, d0, lv0 = self.value_and_grad(w)
        u1, d1, lv1 = self.value_and_grad(cleaned)
        if self.gap(cleaned, lv1) <= self.gap(w, lv0):
            w, u, dval, lv = cleaned, u1, d1, lv1
        else:
            u, dval, lv = u0, d0, lv0
        gap = self.gap(w, lv)
        gbar = self.slopes.T @ w
        shadow = self.center - self.lam * gbar
        h_sub = (shadow - u) / self.lam
        model_value = float(np.max(lv)) + eval_h(self.h, u)
        d = u - self.center
        theta = model_value + float(np.dot(d, d)) / (2.0 * self.lam)
        return ProxSolution(x=u, theta=theta, model_value=model_value,
                            dual_weights=w, model_subgrad=gbar + h_sub,
                            gap=gap, dual_value=theta - gap, n_dual_iters=n_iters)


def _solve_two_cut(dual, tol):
    """Bisection on the scalar dual derivative over theta in [0, 1]."""

    def deriv(theta):
        u = dual.point(np.array([theta, 1.0 - theta]))
        lv = dual.lvals(u)
        return lv[0] - lv[1]

    lo, hi = 0.0, 1.0
    if deriv(1.0) >= 0.0:
        theta = 1.0
    elif deriv(0.0) <= 0.0:
        theta = 0.0
    else:
        while hi - lo > _BISECT_TOL:
            mid = 0.5 * (lo + hi)
            if deriv(mid) > 0.0:
                lo = mid
            else:
                hi = mid
        # secant polish: the derivative is (piecewise) affine in theta, so
        # one secant step inside the final bracket lands essentially on the
        # root even when u is steep in theta; keep the best candidate.
        candidates = [lo, hi, 0.5 * (lo + hi)]
        d_lo, d_hi = deriv(lo), deriv(hi)
        if d_lo > 0.0 > d_hi:
            t = lo + d_lo * (hi - lo) / (d_lo - d_hi)
            if lo <= t <= hi:
                candidates.append(t)

        def gap_at(theta):
            w = np.array([theta, 1.0 - theta])
            u = dual.point(w)
            return dual.gap(w, dual.lvals(u))

        theta = min(candidates, key=gap_at)
    return dual.finish(np.array([theta, 1.0 - theta]), 0)


def _pair_line_search(dual, w, i, j):
    """Exact step for moving weight from coordinate j onto i.

    Maximizes the concave 1-D restriction t -> D(w + t (e_i - e_j)) over
    [0, w_j] by bisection on its derivative plus a secant polish, exactly as
    in the two-cut solver.  Returns None when the direction is not ascent.
    """
    tmax = w[j]
    direction = np.zeros_like(w)
    direction[i], direction[j] = 1.0, -1.0

    def deriv(t):
        lv = dual.lvals(dual.point(w + t * direction))
        return lv[i] - lv[j]

    if deriv(0.0) <= 0.0 or tmax <= 0.0:
        return None
    if deriv(tmax) >= 0.0:
        return tmax
    lo, hi = 0.0, tmax
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if deriv(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-17 * (1.0 + lo):
            break
    d_lo, d_hi = deriv(lo), deriv(hi)
    candidates = [lo, hi, 0.5 * (lo + hi)]
    if d_lo > 0.0 > d_hi:
        t = lo + d_lo * (hi - lo) / (d_lo - d_hi)
        if lo <= t <= hi:
            candidates.append(t)

    def gap_at(t):
        wn = w + t * direction
        return dual.gap(wn, dual.lvals(dual.point(wn)))

    return min(candidates, key=gap_at)


def _face_newton(dual, w, idx):
    """Equalize the cut values over the working set by damped Newton.

    Solves lv_i(u(w)) = lv_anchor(u(w)) for i in the working set together
    with sum w = 1, moving only the working coordinates.  For piecewise
    affine proxes the system is linear and one step is exact; on the ball
    surface a few damped steps converge.  Returns (w, rel_spread) where
    rel_spread is the remaining relative inequality of the working-set
    values (> 0 when the set is overfull and cannot be equalized), or
    (None, None) where no prox Jacobian exists.
    """

    def spread_of(sub):
        scale = 1.0 + float(np.max(np.abs(sub)))
        return (float(np.max(sub)) - float(np.min(sub))) / scale

    if len(idx) == 1:
        return w, 0.0
    sub = None
    for _ in range(40):
        v = dual.shadow(w)
        u = prox_h(dual.h, dual.lam, v)
        lv = dual.lvals(u)
        sub = lv[idx]
        anchor = int(np.argmax(w[idx]))
        resid = np.delete(sub - sub[anchor], anchor)
        if spread_of(sub) <= 1e-15:
            return w, 0.0
        jsp = dual.prox_jvp(v, dual.slopes[idx].T)  # d u / d w_idx (columns)
        if jsp is None:
            return None, None
        grad_rows = dual.slopes[idx] @ (-dual.lam * jsp)  # d lv_idx / d w_idx
        diff_rows = np.delete(grad_rows - grad_rows[anchor], anchor, axis=0)
        system = np.vstack([diff_rows, np.ones(len(idx))])
        rhs = np.concatenate([-resid, [0.0]])
        delta, *_ = np.linalg.lstsq(system, rhs, rcond=None)
        norm0 = float(np.linalg.norm(resid))
        step = 1.0
        while step > 1e-12:
            w_try = w.copy()
            w_try[idx] = w[idx] + step * delta
            lv_try = dual.lvals(prox_h(dual.h, dual.lam, dual.shadow(w_try)))
            sub_try = lv_try[idx]
            resid_try = np.delete(sub_try - sub_try[anchor], anchor)
            if float(np.linalg.norm(resid_try)) <= (1.0 - 0.25 * step) * norm0:
                break
            step *= 0.5
        if step <= 1e-12:
            return w, spread_of(sub)
        w = w_try
    return w, spread_of(sub)


def _pivot_direction(dual, w, idx, entering):
    """Direction that raises the entering weight while the working set stays
    equalized and the total weight stays one.  Returns (d, rates) over the
    combined index list, or None when no such direction exists."""
    combined = idx + [entering]
    v = dual.shadow(w)
    jsp = dual.prox_jvp(v, dual.slopes[combined].T)
    if jsp is None:
        return None
    grad_rows = dual.slopes[combined] @ (-dual.lam * jsp)
    k_c = len(combined)
    rows = [np.ones(k_c)]
    rhs = [0.0]
    for pos in range(1, len(idx)):
        rows.append(grad_rows[pos] - grad_rows[0])
        rhs.append(0.0)
    unit = np.zeros(k_c)
    unit[-1] = 1.0
    rows.append(unit)
    rhs.append(1.0)
    system = np.vstack(rows)
    rhs = np.asarray(rhs)
    d, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    if float(np.linalg.norm(system @ d - rhs)) > 1e-9 * (1.0 + float(np.linalg.norm(rhs))):
        return None
    return d, grad_rows


def _face_solve(dual, tol, w, max_passes=200):
    """Active-set refinement of the dual on its optimal face.

    Maintains a working set whose cut values are equalized (Newton restores
    equalization after every change); a violated cut enters through a pivot
    step along the direction that preserves equalization, with a ratio test
    deciding whether an incumbent leaves first.  Stops when no cut value
    exceeds the common level, i.e. the primal-dual gap is at roundoff.
    Returns (w_best, converged_flag).
    """
    u, dval, lv = dual.value_and_grad(w)
    best_w, best_gap = w, dual.gap(w, lv)
    working = [int(np.argmax(lv))]
    w_cur = np.zeros(dual.k)
    w_cur[working[0]] = 1.0
    stale = 0
    for _ in range(max_passes):
        idx = sorted(working)
        w_new, spread = _face_newton(dual, w_cur.copy(), idx)
        if w_new is None:
            break
        if len(idx) > 1 and float(np.min(w_new[idx])) < -1e-12:
            working.remove(idx[int(np.argmin(w_new[idx]))])
            w_cur = np.maximum(w_new, 0.0)
            w_cur /= np.sum(w_cur)
            continue
        if len(idx) > 1 and spread > 1e-12:
            working.remove(idx[int(np.argmin(w_new[idx]))])
            w_cur = np.maximum(w_new, 0.0)
            w_cur /= np.sum(w_cur)
            continue
        w_cur = np.maximum(w_new, 0.0)
        w_cur /= np.sum(w_cur)
        u, dval, lv = dual.value_and_grad(w_cur)
        gap_new = dual.gap(w_cur, lv)
        if gap_new < 0.5 * best_gap:
            stale = 0
        else:
            stale += 1
            if stale > 40:
                break
        if gap_new < best_gap:
            best_w, best_gap = w_cur, gap_new
        if gap_new <= max(tol, dual.gap_floor(dval, lv)):
            return w_cur, True
        entering = int(np.argmax(lv))
        if entering in working:
            break
        level = float(np.mean(lv[idx]))
        if lv[entering] <= level + 1e-15 * (1.0 + abs(level)):
            break
        piv = _pivot_direction(dual, w_cur, idx, entering)
        if piv is None:
            break
        d, grad_rows = piv
        combined = idx + [entering]
        # ratio test: first incumbent weight to hit zero along the direction
        t_drop, drop_i = np.inf, None
        for pos, i in enumerate(idx):
            if d[pos] < -1e-14:
                t_i = -w_cur[i] / d[pos]
                if t_i < t_drop:
                    t_drop, drop_i = t_i, i
        # step at which the entering value meets the (moving) common level
        r0 = lv[entering] - level
        rate = float(np.dot(grad_rows[-1] - grad_rows[0], d))
        t_level = r0 / -rate if rate < -1e-18 else np.inf
        t = min(t_drop, t_level)
        if not np.isfinite(t) or t <= 0.0:
            break
        w_try = w_cur.copy()
        for pos, i in enumerate(combined):
            w_try[i] += t * d[pos]
        w_cur = np.maximum(w_try, 0.0)
        w_cur /= np.sum(w_cur)
        if t_drop <= t_level and drop_i is not None:
            working.remove(drop_i)
        working.append(entering)
    return best_w, False


def _pairwise_rounds(dual, tol, w, budget):
    """Pairwise weight exchanges with exact line search.

    Each exchange moves mass from a weighted low-value cut onto the
    top-value cut; in exact arithmetic no ascent pair exists only at the
    optimum.  Returns (w, status, n_spent) with status in
    {"converged", "no_pair", "budget"}.
    """
    u, dval, grad = dual.value_and_grad(w)
    for n in range(budget):
        gap = dual.gap(w, grad)
        if gap <= max(tol, dual.gap_floor(dval, grad)):
            return w, "converged", n
        i_star = int(np.argmax(grad))
        donors = [j for j in range(dual.k) if w[j] > 0.0 and j != i_star]
        donors.sort(key=lambda j: grad[j])
        moved = False
        for j in donors:
            t = _pair_line_search(dual, w, i_star, j)
            if t is not None and t > 0.0:
                w = w.copy()
                w[i_star] += t
                w[j] -= t
                w = np.maximum(w, 0.0)
                w /= np.sum(w)
                u, dval, grad = dual.value_and_grad(w)
                moved = True
                break
        if not moved:
            return w, "no_pair", n + 1
    return w, "budget", budget


def _terminal_refine(dual, tol, w, n_used, max_iters):
    """Finisher: alternate exact face solves with pairwise exchanges."""
    n = n_used
    for _ in range(8):
        w, ok = _face_solve(dual, tol, w)
        if ok:
            return dual.finish(w, n)
        budget = min(400, max(max_iters - n, 1))
        w, status, spent = _pairwise_rounds(dual, tol, w, budget)
        n += spent
        if status == "converged":
            return dual.finish(w, n)
        if status == "no_pair":
            u, dval, grad = dual.value_and_grad(w)
            gap = dual.gap(w, grad)
            if gap <= max(tol, 8.0 * dual.gap_floor(dval, grad)):
                return dual.finish(w, n)
            raise SubproblemError(
                f"subproblem not converged (no ascent pair, gap={gap:.3e})",
                achieved_gap=gap)
        if n >= max_iters:
            break
    u, dval, grad = dual.value_and_grad(w)
    gap = dual.gap(w, grad)
    if gap <= max(tol, dual.gap_floor(dval, grad)):
        return dual.finish(w, n)
    raise SubproblemError(
        f"subproblem not converged (gap={gap:.3e} after {n} dual steps)",
        achieved_gap=gap)


def _solve_simplex_pg(dual, tol, w0, max_iters):
    """Projected gradient ascent with BB steps, backtracking, and a pairwise
    exchange finisher once the bulk phase stalls near the optimal face."""
    w = project_simplex(w0)
    u, dval, grad = dual.value_and_grad(w)
    row_sq = float(np.max(np.sum(dual.slopes ** 2, axis=1)))
    step = 1.0 / max(dual.lam * row_sq * dual.k, 1e-12)
    prev_w = prev_grad = None
    best_gap, best_n = np.inf, 0
    n = 0
    for n in range(1, max_iters + 1):
        gap = dual.gap(w, grad)
        if gap <= max(tol, dual.gap_floor(dval, grad)):
            return dual.finish(w, n - 1)
        if gap < 0.5 * best_gap:
            best_gap, best_n = gap, n
        elif n - best_n > 50:
            # bulk phase has plateaued; hand over to the finisher
            return _terminal_refine(dual, tol, w, n, max_iters)
        if prev_w is not None:
            s = w - prev_w
            y = grad - prev_grad
            curv = -float(np.dot(s, y))
            if curv > 0:
                step = float(np.dot(s, s)) / curv
        step = min(max(step, 1e-30), 1e30)
        # backtracking: quadratic upper model of -D must hold at the trial
        while True:
            w_new = project_simplex(w + step * grad)
            delta = w_new - w
            dn = float(np.dot(delta, delta))
            if dn == 0.0:
                break
            u_new, dval_new, grad_new = dual.value_and_grad(w_new)
            if dval_new >= dval + float(np.dot(grad, delta)) - dn / (2.0 * step):
                break
            step *= 0.5
            if step < 1e-30:
                break
        if dn == 0.0 or step < 1e-30:
            return _terminal_refine(dual, tol, w, n, max_iters)
        prev_w, prev_grad = w, grad
        w, u, dval, grad = w_new, u_new, dval_new, grad_new
    return _terminal_refine(dual, tol, w, max_iters // 2, max_iters)


def solve_prox_simplex_dual(model, lam, tol=DEFAULT_SUBPROBLEM_TOL, warm_start=None,
                            max_iters=MAX_DUAL_ITERS):
    """Simplex-dual projected-gradient solver, any cut count (for cross-checks)."""
    dual = _DualProblem(model, lam)
    if warm_start is not None and len(warm_start) == dual.k:
        w0 = np.asarray(warm_start, dtype=float)
    else:
        w0 = np.full(dual.k, 1.0 / dual.k)
    return _solve_simplex_pg(dual, tol, w0, max_iters)


def solve_prox(model, lam, tol=DEFAULT_SUBPROBLEM_TOL, warm_start=None,
               max_iters=MAX_DUAL_ITERS):
    """Solve the bundle subproblem exactly.

    Args:
        model: BundleModel whose cuts minorize the convexified objective.
        lam: prox stepsize (> 0).
        tol: primal-dual gap tolerance; the achieved gap is recorded on the
            returned ProxSolution.
        warm_start: optional simplex weights from the previous subproblem.
        max_iters: dual iteration cap; exceeding it raises SubproblemError.

    Returns:
        ProxSolution with the minimizer, optimal value, simplex dual
        weights, model subgradient and achieved primal-dual gap.
    """
    if tol is None:
        tol = DEFAULT_SUBPROBLEM_TOL
    if tol <= 0:
        raise ParameterError("subproblem tolerance must be positive")
    dual = _DualProblem(model, lam)
    if dual.k == 1:
        return dual.finish(np.array([1.0]), 0)
    if dual.k == 2:
        return _solve_two_cut(dual, tol)
    if warm_start is not None and len(warm_start) == dual.k:
        w0 = np.asarray(warm_start, dtype=float)
    else:
        w0 = np.full(dual.k, 1.0 / dual.k)
    return _solve_simplex_pg(dual, tol, w0, max_iters)

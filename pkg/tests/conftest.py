"""Shared problem builders and independent brute-force oracles for tests."""

import numpy as np
import pytest

from proxbundle import HybridOracle, Problem, Zero
from proxbundle.simple_terms import eval_h


def make_problem(f, g, dim, m, M=0.0, L=0.0, h=None, lower=None):
    """Wrap plain callables into a Problem (h defaults to Zero)."""
    oracle = HybridOracle(eval=lambda x: float(f(np.asarray(x, dtype=float))),
                          subgrad=lambda x: np.asarray(g(np.asarray(x, dtype=float)),
                                                       dtype=float),
                          dimension=dim, M=M, L=L)
    return Problem(f=oracle, h=h if h is not None else Zero(dim), m=m,
                   phi_lower_hint=lower)


@pytest.fixture
def abs_problem():
    """phi(u) = |u| in 1-D; convex, M = 1, any positive m is valid."""
    return make_problem(lambda x: abs(x[0]), lambda x: np.sign(x), 1,
                        m=1e-6, M=1.0, L=0.0, lower=0.0)


@pytest.fixture
def quadratic_problem():
    """phi(u) = ||u||^2 / 2 in 2-D; smooth convex."""
    return make_problem(lambda x: 0.5 * float(x @ x), lambda x: x.copy(), 2,
                        m=1e-6, M=0.0, L=1.0, lower=0.0)


def quartic_1d_problem():
    """f(u) = u^4 - u^2, exactly 2-weakly convex; smooth on [-2, 2]."""
    return make_problem(lambda x: float(x[0] ** 4 - x[0] ** 2),
                        lambda x: np.array([4 * x[0] ** 3 - 2 * x[0]]), 1,
                        m=2.0, M=0.0, L=46.0, lower=-0.25)


def grid_prox_argmin(cuts, h, center, lam, lo, hi, coarse=2e-3, fine=1e-4,
                     window=0.05):
    """Brute-force the bundle subproblem on a 2-D grid.

    Dense evaluation at the coarse step locates the basin; a second dense
    pass at the fine step around it pins the minimizer.  Independent of the
    dual solver: only cut evaluation, h, and the quadratic are used.
    """

    def objective(points):
        vals = np.full(points.shape[0], np.inf)
        affine = np.max(np.stack([
            c.value_at_base + (points - c.base_point) @ c.slope for c in cuts
        ]), axis=0)
        for i, point in enumerate(points):
            hv = eval_h(h, point)
            if hv == np.inf:
                continue
            d = point - center
            vals[i] = affine[i] + hv + 0.5 * float(d @ d) / lam
        return vals

    def dense(lo0, hi0, step):
        xs = np.arange(lo0[0], hi0[0] + step / 2, step)
        ys = np.arange(lo0[1], hi0[1] + step / 2, step)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        vals = objective(pts)
        return pts[int(np.argmin(vals))]

    best = dense(np.asarray(lo, float), np.asarray(hi, float), coarse)
    lo2 = best - window
    hi2 = best + window
    return dense(lo2, hi2, fine)


def central_diff_grad(fun, x, step=None):
    """Central finite-difference gradient."""
    x = np.asarray(x, dtype=float)
    if step is None:
        step = 1e-6 * (1.0 + float(np.linalg.norm(x)))
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        g[i] = (fun(x + e) - fun(x - e)) / (2.0 * step)
    return g

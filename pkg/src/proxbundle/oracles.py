"""Problem interface: first-order oracle for the weakly convex term f.

A composite problem is min phi(x) = f(x) + h(x) where h is a catalog term
(see :mod:`proxbundle.simple_terms`) and f is given through a deterministic
first-order oracle together with declared constants:

* ``m`` -- weak convexity modulus: f + (m/2)||.||^2 is convex,
* ``(M, L)`` -- hybrid oracle constants: ||f'(u) - f'(v)|| <= 2M + L||u - v||
  on dom h.

Constants are declared, never estimated; :func:`check_hybrid_condition` and
:func:`check_weak_convexity` verify them by sampling.  Problems and oracles
are immutable after construction and safe to share across concurrent runs;
oracle callables must be reentrant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError
from .simple_terms import SimpleTerm, eval_h, prox_h

__all__ = [
    "HybridOracle",
    "Problem",
    "Linearization",
    "linearize",
    "regularized_linearize",
    "phi",
    "phi_mod",
    "f_mod",
    "CountingOracle",
    "check_hybrid_condition",
    "check_weak_convexity",
    "sample_domain_points",
]


@dataclass(frozen=True)
class HybridOracle:
    """First-order oracle for f with declared hybrid constants (M, L).

    ``eval`` returns f(x) (finite on dom h) and ``subgrad`` returns a fixed
    deterministic element f'(x) of the subdifferential; ties inside the
    subdifferential are broken by the oracle implementation once and for all
    so that traces are reproducible.
    """

    eval: Callable[[np.ndarray], float]
    subgrad: Callable[[np.ndarray], np.ndarray]
    dimension: int
    M: float = 0.0
    L: float = 0.0

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("oracle dimension must be a positive integer")
        if self.M < 0 or self.L < 0:
            raise ValueError("hybrid constants M, L must be nonnegative")


@dataclass(frozen=True)
class Problem:
    """Composite problem record: f-oracle, simple term h, and modulus m."""

    f: HybridOracle
    h: SimpleTerm
    m: float
    phi_lower_hint: Optional[float] = None

    def __post_init__(self):
        if self.m <= 0:
            raise ValueError("weak convexity modulus m must be positive")
        if self.f.dimension != self.h.dimension:
            raise ValueError("oracle and simple term dimensions disagree")

    @property
    def dimension(self):
        return self.f.dimension


@dataclass(frozen=True)
class Linearization:
    """Affine function u -> value_at_base + <slope, u - base_point>."""

    base_point: np.ndarray
    value_at_base: float
    slope: np.ndarray

    def value(self, u):
        return self.value_at_base + float(np.dot(self.slope, np.asarray(u) - self.base_point))


def phi(problem, u):
    """Composite objective phi(u) = f(u) + h(u); may be +inf."""
    hv = eval_h(problem.h, u)
    if hv == np.inf:
        return np.inf
    return problem.f.eval(u) + hv


def phi_mod(problem, u, z, mod):
    """Regularization phi(u) + (mod/2)||u - z||^2."""
    base = phi(problem, u)
    if base == np.inf:
        return np.inf
    d = np.asarray(u, dtype=float) - z
    return base + 0.5 * mod * float(np.dot(d, d))


def f_mod(problem, u, z):
    """f(u) + (m/2)||u - z||^2, the convexified f around center z."""
    d = np.asarray(u, dtype=float) - z
    return problem.f.eval(u) + 0.5 * problem.m * float(np.dot(d, d))


def _require_in_domain(problem, x):
    if eval_h(problem.h, x) == np.inf:
        raise DomainError("point outside dom h")


def linearize(problem, x):
    """Linearization of f at x: u -> f(x) + <f'(x), u - x>."""
    x = np.asarray(x, dtype=float)
    _require_in_domain(problem, x)
    return Linearization(base_point=x.copy(), value_at_base=float(problem.f.eval(x)),
                         slope=np.asarray(problem.f.subgrad(x), dtype=float).copy())


def regularized_linearize(problem, center, base):
    """Linearization of f_m(.; center) at base.

    The affine function base -> f_m(base; center) with slope
    f'(base) + m (base - center); it minorizes f_m(.; center) with the
    quadratic-plus-linear error envelope controlled by (M, L + m).
    """
    center = np.asarray(center, dtype=float)
    base = np.asarray(base, dtype=float)
    _require_in_domain(problem, base)
    slope = np.asarray(problem.f.subgrad(base), dtype=float) + problem.m * (base - center)
    return Linearization(base_point=base.copy(),
                         value_at_base=float(f_mod(problem, base, center)),
                         slope=slope)


class CountingOracle:
    """Wrapper around a HybridOracle that counts eval/subgrad calls.

    Counting is per-wrapper, so each solver run gets its own instance.
    """

    def __init__(self, inner):
        self.inner = inner
        self.n_eval = 0
        self.n_subgrad = 0

    def _eval(self, x):
        self.n_eval += 1
        return self.inner.eval(x)

    def _subgrad(self, x):
        self.n_subgrad += 1
        return self.inner.subgrad(x)

    def oracle(self):
        return HybridOracle(eval=self._eval, subgrad=self._subgrad,
                            dimension=self.inner.dimension,
                            M=self.inner.M, L=self.inner.L)

    @property
    def total(self):
        return self.n_eval + self.n_subgrad


def sample_domain_points(problem, rng, n, box_radius):
    """Sample n points of dom h from a uniform box, projecting indicators.

    The box is [-box_radius, box_radius]^dim; indicator variants are handled
    by projecting the raw sample onto dom h via the exact prox.
    """
    dim = problem.dimension
    raw = rng.uniform(-box_radius, box_radius, size=(n, dim))
    out = np.empty_like(raw)
    for i in range(n):
        out[i] = prox_h(problem.h, 1.0, raw[i])
    return out


def check_hybrid_condition(problem, rng, n_pairs=1000, box_radius=2.0):
    """Max violation of ||f'(u)-f'(v)|| <= 2M + L||u-v|| over sampled pairs.

    A slack of 1e-9 * (1 + ||u-v||) is alloted for roundoff; the returned
    value is <= 0 when the declared constants hold on the sample.
    """
    pts = sample_domain_points(problem, rng, 2 * n_pairs, box_radius)
    u, v = pts[:n_pairs], pts[n_pairs:]
    worst = -np.inf
    for a, b in zip(u, v):
        gap = float(np.linalg.norm(problem.f.subgrad(a) - problem.f.subgrad(b)))
        dist = float(np.linalg.norm(a - b))
        worst = max(worst, gap - (2.0 * problem.f.M + problem.f.L * dist)
                    - 1e-9 * (1.0 + dist))
    return worst


def check_weak_convexity(problem, rng, n_pairs=1000, box_radius=2.0):
    """Max violation of the weak-convexity subgradient inequality.

    Checks f(y) >= f(x) + <f'(x), y-x> - (m/2)||y-x||^2 over sampled pairs
    of dom h; returns the largest left-minus-right deficit (<= ~0 when the
    declared m is valid).
    """
    pts = sample_domain_points(problem, rng, 2 * n_pairs, box_radius)
    xs, ys = pts[:n_pairs], pts[n_pairs:]
    worst = -np.inf
    for x, y in zip(xs, ys):
        lhs = problem.f.eval(y)
        d = y - x
        rhs = problem.f.eval(x) + float(np.dot(problem.f.subgrad(x), d)) \
            - 0.5 * problem.m * float(np.dot(d, d))
        worst = max(worst, rhs - lhs - 1e-9 * (1.0 + abs(lhs)))
    return worst

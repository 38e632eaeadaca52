"""Catalog of simple convex terms h with exact proximal maps.

Every variant is a proper lsc convex function whose prox is available in
closed form, so bundle subproblems can be solved exactly:

* ``Zero``          -- h = 0, prox is the identity.
* ``L1``            -- h = w * ||u||_1, prox is soft-thresholding.
* ``BoxIndicator``  -- indicator of a box (entries may be +-inf), prox clamps.
* ``BallIndicator`` -- indicator of a Euclidean ball, prox projects radially.

All terms are immutable, shareable and reentrant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SimpleTerm",
    "Zero",
    "L1",
    "BoxIndicator",
    "BallIndicator",
    "eval_h",
    "prox_h",
    "term_to_dict",
    "term_from_dict",
]

# Relative slack used for indicator membership so that points produced by the
# exact projection formulas are never rejected due to roundoff.
_MEMBER_RTOL = 1e-12


class SimpleTerm:
    """Base class: a convex term with exact value and prox."""

    dimension: int

    def value(self, u):
        raise NotImplementedError

    def prox(self, t, v):
        """Return argmin_u { h(u) + ||u - v||^2 / (2t) } for t > 0."""
        raise NotImplementedError


@dataclass(frozen=True)
class Zero(SimpleTerm):
    dimension: int

    def value(self, u):
        return 0.0

    def prox(self, t, v):
        return np.asarray(v, dtype=float).copy()


@dataclass(frozen=True)
class L1(SimpleTerm):
    dimension: int
    weight: float = 1.0

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError("L1 weight must be nonnegative")

    def value(self, u):
        return self.weight * float(np.sum(np.abs(u)))

    def prox(self, t, v):
        v = np.asarray(v, dtype=float)
        thr = t * self.weight
        return np.sign(v) * np.maximum(np.abs(v) - thr, 0.0)


@dataclass(frozen=True)
class BoxIndicator(SimpleTerm):
    """Indicator of {u : lower <= u <= upper}; bounds may be +-inf."""

    dimension: int
    lower: np.ndarray = field(repr=False)
    upper: np.ndarray = field(repr=False)

    def __post_init__(self):
        lo = np.broadcast_to(np.asarray(self.lower, dtype=float), (self.dimension,)).copy()
        hi = np.broadcast_to(np.asarray(self.upper, dtype=float), (self.dimension,)).copy()
        if np.any(lo > hi):
            raise ValueError("box lower bound exceeds upper bound")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def value(self, u):
        u = np.asarray(u, dtype=float)
        slack = _MEMBER_RTOL * np.maximum(1.0, np.abs(u))
        inside = np.all(u >= self.lower - slack) and np.all(u <= self.upper + slack)
        return 0.0 if inside else np.inf

    def prox(self, t, v):
        return np.clip(np.asarray(v, dtype=float), self.lower, self.upper)


@dataclass(frozen=True)
class BallIndicator(SimpleTerm):
    """Indicator of the Euclidean ball {u : ||u - center|| <= radius}."""

    dimension: int
    center: np.ndarray = field(repr=False)
    radius: float = 1.0

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("ball radius must be positive")
        c = np.broadcast_to(np.asarray(self.center, dtype=float), (self.dimension,)).copy()
        c.setflags(write=False)
        object.__setattr__(self, "center", c)

    def value(self, u):
        d = float(np.linalg.norm(np.asarray(u, dtype=float) - self.center))
        if d <= self.radius * (1.0 + _MEMBER_RTOL) + _MEMBER_RTOL:
            return 0.0
        return np.inf

    def prox(self, t, v):
        v = np.asarray(v, dtype=float)
        d = float(np.linalg.norm(v - self.center))
        if d <= self.radius:
            return v.copy()
        return self.center + (self.radius / d) * (v - self.center)


def eval_h(term, u):
    """Value of h at u; +inf exactly when u is outside dom h."""
    return term.value(u)


def prox_h(term, t, v):
    """Exact proximal map argmin_u { h(u) + ||u - v||^2 / (2t) }, t > 0."""
    if t <= 0:
        raise ValueError("prox stepsize t must be positive")
    return term.prox(t, v)


def term_to_dict(term):
    """Serialize a term as a tagged record for instance files."""
    if isinstance(term, Zero):
        return {"variant": "zero", "dimension": term.dimension}
    if isinstance(term, L1):
        return {"variant": "l1", "dimension": term.dimension, "weight": term.weight}
    if isinstance(term, BoxIndicator):
        return {
            "variant": "box",
            "dimension": term.dimension,
            "lower": term.lower.tolist(),
            "upper": term.upper.tolist(),
        }
    if isinstance(term, BallIndicator):
        return {
            "variant": "ball",
            "dimension": term.dimension,
            "center": term.center.tolist(),
            "radius": term.radius,
        }
    raise TypeError(f"unknown simple term {type(term)!r}")


def term_from_dict(rec):
    """Rebuild a term from its tagged record."""
    variant = rec["variant"]
    dim = int(rec["dimension"])
    if variant == "zero":
        return Zero(dim)
    if variant == "l1":
        return L1(dim, weight=float(rec["weight"]))
    if variant == "box":
        return BoxIndicator(dim, lower=np.asarray(rec["lower"], dtype=float),
                            upper=np.asarray(rec["upper"], dtype=float))
    if variant == "ball":
        return BallIndicator(dim, center=np.asarray(rec["center"], dtype=float),
                             radius=float(rec["radius"]))
    raise ValueError(f"unknown simple term variant {variant!r}")

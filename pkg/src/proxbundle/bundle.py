"""Bundle models minorizing the convexified objective, and their updates.

A model is ``max_i cut_i(u) + h(u)`` where each cut is an affine minorant of
g = f_m(.; prox_center).  The three supported update schemes follow the
generic update contract (a convex combination sandwich between the retained
model and the newest cut):

* one-cut:   every affine piece is replaced by its convex combination with
  the newest cut, weight tau on the old piece;
* two-cut:   an aggregate affine piece (dual-weighted combination of the
  previous two) plus the newest cut;
* multi-cut: the active cuts plus the newest one, with optional eviction of
  inactive cuts, oldest first.

After a serious step the model is rebuilt around the new center, either from
scratch (FreshCut) or by exactly re-centering every stored cut and adding the
fresh one (ShiftedMax).

A BundleModel is owned by a single solver run; updates are functional and
return new instances.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import DegenerateActiveSetError
from .oracles import Linearization, f_mod, regularized_linearize
from .simple_terms import eval_h

__all__ = [
    "Scheme",
    "ResetPolicy",
    "Cut",
    "BundleModel",
    "NullUpdateResult",
    "initial_model",
    "eval_model",
    "eval_cuts",
    "active_cut_indices",
    "null_update",
    "serious_reset",
    "DEFAULT_ACTIVE_TOL",
    "DEFAULT_MAX_CUTS",
]

DEFAULT_ACTIVE_TOL = 1e-10
DEFAULT_MAX_CUTS = 50


class Scheme(str, enum.Enum):
    ONE_CUT = "onecut"
    TWO_CUT = "twocut"
    MULTI_CUT = "multicut"


class ResetPolicy(str, enum.Enum):
    FRESH_CUT = "fresh"
    SHIFTED_MAX = "shifted-max"


@dataclass(frozen=True)
class Cut:
    """Affine piece value_at_base + <slope, u - base_point>, with a trace id."""

    base_point: np.ndarray
    value_at_base: float
    slope: np.ndarray
    id: int

    def value(self, u):
        return self.value_at_base + float(np.dot(self.slope, np.asarray(u) - self.base_point))


def _cut_from_linearization(lin: Linearization, cut_id: int) -> Cut:
    return Cut(base_point=lin.base_point, value_at_base=lin.value_at_base,
               slope=lin.slope, id=cut_id)


@dataclass(frozen=True)
class BundleModel:
    """Piecewise-affine minorant of f_m(.; prox_center), plus the shared h."""

    scheme: Scheme
    cuts: tuple
    h: object
    prox_center: np.ndarray
    m: float
    max_cuts: Optional[int] = DEFAULT_MAX_CUTS
    next_cut_id: int = 0

    def __post_init__(self):
        if not self.cuts:
            raise ValueError("bundle model needs at least one cut")
        if self.max_cuts is not None and self.max_cuts < 2:
            raise ValueError("max_cuts must be at least 2 (or None for unbounded)")


def initial_model(problem, scheme, center, max_cuts=DEFAULT_MAX_CUTS):
    """Model for a cycle start: the single cut of f at the center, plus h."""
    center = np.asarray(center, dtype=float)
    lin = regularized_linearize(problem, center, center)
    cut = _cut_from_linearization(lin, 0)
    return BundleModel(scheme=Scheme(scheme), cuts=(cut,), h=problem.h,
                       prox_center=center.copy(), m=problem.m,
                       max_cuts=max_cuts, next_cut_id=1)


def eval_cuts(model, u):
    """Values of every affine piece at u, as an array."""
    u = np.asarray(u, dtype=float)
    return np.array([c.value(u) for c in model.cuts])


def eval_model(model, u):
    """Model value max_i cut_i(u) + h(u); +inf outside dom h."""
    hv = eval_h(model.h, u)
    if hv == np.inf:
        return np.inf
    return float(np.max(eval_cuts(model, u))) + hv


def active_cut_indices(model, x, active_tol=DEFAULT_ACTIVE_TOL):
    """Indices of cuts active at x within the relative tolerance.

    A cut c is active iff Gamma(x) - (c(x) + h(x)) <= tol * (1 + |Gamma(x)|);
    the h(x) terms cancel so only the affine parts are compared.
    """
    vals = eval_cuts(model, x)
    top = float(np.max(vals))
    hv = eval_h(model.h, x)
    gamma = top + hv if hv != np.inf else top
    thr = active_tol * (1.0 + abs(gamma))
    idx = np.nonzero(top - vals <= thr)[0]
    if idx.size == 0:
        raise DegenerateActiveSetError("degenerate active set")
    return idx


def _combine_cuts(cuts, weights, base, new_id):
    """Exact convex combination of affine pieces, re-based at ``base``."""
    base = np.asarray(base, dtype=float)
    value = float(sum(w * c.value(base) for w, c in zip(weights, cuts)))
    slope = np.zeros_like(base)
    for w, c in zip(weights, cuts):
        slope = slope + w * c.slope
    return Cut(base_point=base.copy(), value_at_base=value, slope=slope, id=new_id)


def _shift_cut(cut, new_center, old_center, m, new_id):
    """Re-center a cut of f_m(.; old_center) into a cut of f_m(.; new_center).

    The shift is exact: the result is the linearization of the re-centered
    function at the same base point.
    """
    d = np.asarray(new_center, dtype=float) - np.asarray(old_center, dtype=float)
    value = cut.value_at_base - m * float(np.dot(d, cut.base_point - new_center)) \
        - 0.5 * m * float(np.dot(d, d))
    return Cut(base_point=cut.base_point, value_at_base=value,
               slope=cut.slope - m * d, id=new_id)


@dataclass(frozen=True)
class NullUpdateResult:
    """Updated model plus the retained part used in the update sandwich.

    ``bar_cuts`` are the affine pieces of the retained model (the aggregate
    for one-/two-cut, the active cuts for multi-cut); together with h they
    attain the old model value at x and keep x optimal for the subproblem.
    ``old_cuts`` are the pre-update pieces, aligned with the subproblem's
    dual weights (used for warm starts).
    """

    model: BundleModel
    bar_cuts: tuple
    old_cuts: tuple = None


def null_update(model, problem, sol, tau, active_tol=DEFAULT_ACTIVE_TOL):
    """Null-step model update at the exact subproblem solution ``sol``.

    Args:
        model: current model (its prox center is unchanged by a null step).
        problem: composite problem supplying the f oracle.
        sol: ProxSolution for this model; sol.x must be the exact minimizer
            and sol.dual_weights its simplex certificate.
        tau: convex-combination weight for the one-cut scheme.
        active_tol: relative activity tolerance for the multi-cut scheme.

    Returns:
        NullUpdateResult with the new model and the retained bar cuts.
    """
    x = np.asarray(sol.x, dtype=float)
    fresh = _cut_from_linearization(
        regularized_linearize(problem, model.prox_center, x), model.next_cut_id)
    next_id = model.next_cut_id + 1

    if model.scheme is Scheme.ONE_CUT:
        new_cuts = []
        for c in model.cuts:
            new_cuts.append(_combine_cuts((c, fresh), (tau, 1.0 - tau), x, next_id))
            next_id += 1
        result = replace(model, cuts=tuple(new_cuts), next_cut_id=next_id)
        return NullUpdateResult(model=result, bar_cuts=model.cuts, old_cuts=model.cuts)

    if model.scheme is Scheme.TWO_CUT:
        weights = np.asarray(sol.dual_weights, dtype=float)
        aggregate = _combine_cuts(model.cuts, weights, x, next_id)
        next_id += 1
        result = replace(model, cuts=(aggregate, fresh), next_cut_id=next_id)
        return NullUpdateResult(model=result, bar_cuts=(aggregate,), old_cuts=model.cuts)

    # multi-cut: keep active cuts plus the newest; evict inactive oldest-first
    active = active_cut_indices(model, x, active_tol)
    active_set = set(int(i) for i in active)
    kept = [model.cuts[i] for i in sorted(active_set)]
    if model.max_cuts is not None:
        room = model.max_cuts - len(kept) - 1
    else:
        room = len(model.cuts)
    if room > 0:
        inactive = [c for i, c in enumerate(model.cuts) if i not in active_set]
        inactive.sort(key=lambda c: c.id, reverse=True)  # newest first
        kept.extend(inactive[:room])
        kept.sort(key=lambda c: c.id)
    result = replace(model, cuts=tuple(kept) + (fresh,), next_cut_id=next_id)
    return NullUpdateResult(model=result, bar_cuts=tuple(model.cuts[i] for i in active),
                            old_cuts=model.cuts)


def serious_reset(model, problem, new_center, old_center, policy,
                  dual_weights=None):
    """Rebuild the model around the new prox center after a serious step.

    FreshCut discards history: the new model is the single cut of f at the
    new center.  ShiftedMax re-centers stored cuts exactly (slope decreases
    by m * (new_center - old_center)) and adds the fresh cut; for the one-
    and two-cut schemes the stored pieces are first collapsed to the
    dual-weighted aggregate so the scheme's piece budget is preserved.
    """
    policy = ResetPolicy(policy)
    new_center = np.asarray(new_center, dtype=float)
    if policy is ResetPolicy.FRESH_CUT:
        fresh = _cut_from_linearization(
            regularized_linearize(problem, new_center, new_center), model.next_cut_id)
        return replace(model, cuts=(fresh,), prox_center=new_center.copy(),
                       next_cut_id=model.next_cut_id + 1)

    next_id = model.next_cut_id
    if model.scheme is Scheme.MULTI_CUT:
        shifted = []
        for c in model.cuts:
            shifted.append(_shift_cut(c, new_center, old_center, model.m, next_id))
            next_id += 1
    else:
        if dual_weights is None or len(dual_weights) != len(model.cuts):
            raise ValueError("shifted-max reset needs the serious solve's dual weights")
        aggregate = _combine_cuts(model.cuts, np.asarray(dual_weights, dtype=float),
                                  new_center, next_id)
        next_id += 1
        shifted = [_shift_cut(aggregate, new_center, old_center, model.m, next_id)]
        next_id += 1
    fresh = _cut_from_linearization(
        regularized_linearize(problem, new_center, new_center), next_id)
    next_id += 1
    cuts = shifted + [fresh]
    if model.scheme is Scheme.MULTI_CUT and model.max_cuts is not None \
            and len(cuts) > model.max_cuts:
        cuts = cuts[len(cuts) - model.max_cuts:]
    return replace(model, cuts=tuple(cuts), prox_center=new_center.copy(),
                   next_cut_id=next_id)


def minorant_gap(model, problem, u):
    """f_m(u; center) + h(u) - Gamma(u); nonnegative when the model minorizes."""
    hv = eval_h(model.h, u)
    if hv == np.inf:
        return np.inf
    return f_mod(problem, u, model.prox_center) + hv - eval_model(model, u)

"""Deterministic proximal subgradient baseline with the matching audit.

The method iterates x_{t+1} = prox_{alpha_t h}(x_t - alpha_t f'(x_t)) with
the constant schedule alpha_t = gamma / sqrt(T + 1).  Its averaged Moreau
gradient bound (the envelope parameter is 1/(m_bar - m)) applies only when
L = 0; the harness still allows PS runs on L > 0 instances but flags the
audit as inapplicable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ParameterError
from .oracles import phi
from .simple_terms import prox_h
from .stationarity import moreau_oracle
from .trace import Trace, TraceRow

__all__ = ["PsParams", "PsResult", "make_ps_params", "ps_run",
           "ps_iteration_count", "davis_bound_rhs"]


@dataclass(frozen=True)
class PsParams:
    """Stepsize schedule gamma / sqrt(T+1) for T+1 proximal subgradient steps."""

    gamma: float
    T: int
    m_bar: float

    @property
    def alpha(self):
        return self.gamma / math.sqrt(self.T + 1.0)


def make_ps_params(problem, gamma, T, m_bar=None):
    """Validate the schedule against the weak convexity modulus."""
    m = problem.m
    if m_bar is None:
        m_bar = 2.0 * m
    if not m < m_bar <= 2.0 * m:
        raise ParameterError("m_bar must lie in (m, 2m]")
    if not 0.0 < gamma <= 1.0 / (2.0 * m):
        raise ParameterError("gamma must lie in (0, 1/(2m)]")
    if T < 0:
        raise ParameterError("iteration count T must be nonnegative")
    params = PsParams(gamma=float(gamma), T=int(T), m_bar=float(m_bar))
    if not 0.0 < params.alpha <= 1.0 / m_bar:
        raise ParameterError("stepsize escaped (0, 1/m_bar]")
    return params


@dataclass
class PsResult:
    iterates: list
    moreau_grad_norms: dict
    best_moreau_grad: Optional[float]
    trace: Trace


def ps_run(problem, params, x0, eval_moreau_every=None, moreau_tol=None,
           trace=None, timing=False):
    """Run PS for T+1 steps; optionally measure Moreau gradients.

    Args:
        problem: composite problem (the analysis assumes L = 0).
        params: validated PsParams.
        x0: start point in dom h.
        eval_moreau_every: if set, evaluate ||grad M^{1/m}(x_t)|| through the
            Moreau oracle every that-many iterates of {x_0..x_T} and report
            the minimum.
        moreau_tol: tolerance forwarded to the Moreau oracle.
        trace: optional Trace (PS fills only the columns it uses).

    Returns:
        PsResult with all iterates x_0..x_{T+1}.
    """
    import time as _time

    x = np.asarray(x0, dtype=float).copy()
    alpha = params.alpha
    iterates = [x.copy()]
    if trace is None:
        trace = Trace()
    trace.header.update({
        "solver": "ps", "gamma": params.gamma, "T": params.T,
        "m_bar": params.m_bar, "alpha": alpha, "m": problem.m,
        "M": problem.f.M, "L": problem.f.L, "dimension": problem.dimension,
        "timing": int(bool(timing)),
    })
    t0 = _time.perf_counter()
    for t in range(params.T + 1):
        step = x - alpha * np.asarray(problem.f.subgrad(x), dtype=float)
        x_next = prox_h(problem.h, alpha, step)
        wall = _time.perf_counter() - t0 if timing else 0.0
        trace.append(TraceRow(j=t,
                              dist_x_center=float(np.linalg.norm(x_next - x)),
                              wall_time=wall))
        x = x_next
        iterates.append(x.copy())

    grads = {}
    best = None
    if eval_moreau_every is not None:
        lam_env = 1.0 / problem.m
        for t in range(0, params.T + 1, eval_moreau_every):
            cert = moreau_oracle(problem, lam_env, iterates[t], tol=moreau_tol)
            grads[t] = cert.grad_norm
        best = min(grads.values()) if grads else None
    return PsResult(iterates=iterates, moreau_grad_norms=grads,
                    best_moreau_grad=best, trace=trace)


def ps_iteration_count(problem, rho, gamma, moreau_at_x0):
    """Iteration count sufficient for a (rho; 1/m)-Moreau stationary iterate.

    Requires a lower bound on phi* (the bound is generally not computable
    without one).
    """
    m = problem.m
    if not 0.0 < gamma <= 1.0 / (2.0 * m):
        raise ParameterError("gamma must lie in (0, 1/(2m)]")
    if problem.phi_lower_hint is None:
        raise ParameterError("PS iteration count requires a lower bound on phi*")
    gap = max(moreau_at_x0 - problem.phi_lower_hint, 0.0)
    M = problem.f.M
    num = (gap + 4.0 * m * M * M * gamma * gamma) ** 2
    return int(math.ceil(num / (gamma * gamma * rho ** 4)))


def davis_bound_rhs(problem, params, moreau_at_x0):
    """Right-hand side of the averaged Moreau gradient bound (L = 0 only).

    With the constant schedule, sum alpha_t = (T+1) alpha and
    sum alpha_t^2 = (T+1) alpha^2.  Returns None when L > 0 (inapplicable).
    """
    if problem.f.L > 0:
        return None
    if problem.phi_lower_hint is None:
        raise ParameterError("the PS audit requires a lower bound on phi*")
    m, m_bar = problem.m, params.m_bar
    alpha = params.alpha
    n_steps = params.T + 1.0
    gap = moreau_at_x0 - problem.phi_lower_hint
    M = problem.f.M
    return (m_bar / (m_bar - m)) \
        * (gap + 2.0 * m_bar * M * M * n_steps * alpha * alpha) / (n_steps * alpha)

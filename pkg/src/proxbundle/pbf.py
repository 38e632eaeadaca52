"""Main proximal bundle loop: cycles, serious-step test, and certificates.

Each iteration solves the bundle subproblem at the current prox center,
tracks the best regularized value seen in the cycle, and tests the gap

    t_j = phi_mtilde(y_j; center) - theta_j

against the cycle tolerance delta.  A null step refines the model; a
serious step moves the center, assembles the (w, eps) certificate, and
stops once ||w|| <= eta_bar and eps <= eps_bar.  A tie t_j == delta is
classified serious (the null test is strict).

Parameters follow the tolerance-driven closed forms: delta from
(eta_bar, eps_bar), tau set to equality in its defining relation (the
one-cut scheme consumes tau; the two- and multi-cut updates never use it,
but it still feeds the audit formulas), chi = 1 and lambda = 1/m by
default.  The iteration budget, serious-step bound K and the uniform
cycle-start bound t_bar are computed from a Moreau envelope value at the
start point (or its primal majorization) plus a lower bound on phi*.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import audits as audits_mod
from .bundle import (DEFAULT_ACTIVE_TOL, DEFAULT_MAX_CUTS, ResetPolicy, Scheme,
                     eval_model, initial_model, null_update, serious_reset)
from .errors import AuditError, DomainError, ParameterError
from .oracles import phi
from .proxstep import solve_prox
from .simple_terms import eval_h
from .trace import Trace, TraceRow

__all__ = [
    "PbfParams",
    "CycleState",
    "SeriousRecord",
    "RunResult",
    "derive_params",
    "corollary_tolerances",
    "serious_step_bound",
    "t_bar_bound",
    "complexity_budget",
    "run",
]


@dataclass(frozen=True)
class PbfParams:
    """Derived run parameters; see ``derive_params``."""

    lam: float
    chi: float
    tau: float
    delta: float
    eta_bar: float
    eps_bar: float
    m_tilde: float
    alpha: float
    n_coef: float
    gamma_chi: float
    max_total_iters: Optional[int] = None


@dataclass
class CycleState:
    """Mutable state of the current cycle (single-producer, not shared)."""

    k: int
    x_hat_prev: np.ndarray
    y: np.ndarray
    phi_y: float
    model: object
    j_start: int
    t_first: Optional[float] = None


@dataclass(frozen=True)
class SeriousRecord:
    """Certificate data recorded at a serious step."""

    k: int
    j: int
    x_hat: np.ndarray
    x_hat_prev: np.ndarray
    y_hat: np.ndarray
    v_hat: np.ndarray
    w_hat: np.ndarray
    eps_hat: float
    Delta: float
    w_hat_norm: float
    dist_y_center: float
    dist_y_xnew: float


@dataclass
class RunResult:
    terminal: Optional[SeriousRecord]
    status: str  # "converged" or "budget_exhausted"
    trace: Trace
    serious_records: list
    audit_report: Optional[list]
    n_iterations: int
    n_serious: int


def derive_params(problem, eta_bar, eps_bar, lam=None, gamma_chi=None,
                  max_total_iters=None):
    """Derive all run parameters from the tolerance pair.

    Args:
        problem: composite problem with declared constants (m, M, L).
        eta_bar: target bound on the certificate norm ||w||.
        eps_bar: target bound on the certificate eps.
        lam: prox stepsize; defaults to 1/m.
        gamma_chi: slack parameter in (0, 1 + m lam] steering chi; the
            default (1 + m lam) gives chi = 1.
        max_total_iters: optional hard iteration cap for ``run``.

    Returns:
        PbfParams with delta, tau (set to equality in its defining
        relation), chi, m_tilde, and the audit coefficients alpha and N.
    """
    if eta_bar <= 0 or eps_bar <= 0:
        raise ParameterError("tolerances eta_bar, eps_bar must be positive")
    m = problem.m
    if lam is None:
        lam = 1.0 / m
    if lam <= 0:
        raise ParameterError("prox stepsize lambda must be positive")
    ml = m * lam
    if gamma_chi is None:
        gamma_chi = 1.0 + ml
    if not 0.0 < gamma_chi <= 1.0 + ml:
        raise ParameterError("gamma_chi must lie in (0, 1 + m*lambda]")
    chi = (1.0 + gamma_chi) / (2.0 + ml)
    alpha = chi * (2.0 + ml) - 1.0
    if alpha <= 0:
        raise ParameterError("chi * (2 + m*lambda) - 1 must be positive")
    n_coef = 8.0 * (1.0 - chi + (ml + 1.0) ** 2) / alpha
    delta = min(
        eps_bar * alpha / (2.0 * (alpha + (1.0 - chi) * (3.0 + ml))),
        lam * eta_bar ** 2 / (8.0 + n_coef * (3.0 + ml)),
    )
    M, L = problem.f.M, problem.f.L
    ratio = lam * (4.0 * M * M / delta + L + m)
    tau = ratio / (1.0 + ratio)
    if not 0.0 < tau < 1.0:
        raise ParameterError("derived tau escaped (0, 1); check constants")
    return PbfParams(lam=lam, chi=chi, tau=tau, delta=delta, eta_bar=eta_bar,
                     eps_bar=eps_bar, m_tilde=m + chi / lam, alpha=alpha,
                     n_coef=n_coef, gamma_chi=gamma_chi,
                     max_total_iters=max_total_iters)


def corollary_tolerances(problem, rho):
    """Tolerance pair that targets a (rho; 1/m)-Moreau stationary point."""
    if rho <= 0:
        raise ParameterError("rho must be positive")
    return rho / 8.0, rho * rho / (2592.0 * problem.m)


def _tolerance_factor(params):
    terms = [params.n_coef / (params.lam * params.eta_bar ** 2)]
    if params.chi < 1.0:
        terms.append(2.0 * (1.0 - params.chi) / (params.alpha * params.eps_bar))
    return max(terms)


def _initial_gap(problem, moreau_at_x0):
    if problem.phi_lower_hint is None:
        raise ParameterError("budget requires a lower bound on phi*")
    return max(moreau_at_x0 - problem.phi_lower_hint, 0.0)


def serious_step_bound(params, problem, moreau_at_x0):
    """K: bound on the number of serious steps before the stopping test."""
    gap = _initial_gap(problem, moreau_at_x0)
    return int(math.ceil(gap * _tolerance_factor(params)))


def t_bar_bound(params, problem, moreau_at_x0):
    """Uniform bound t_bar on the cycle-start gaps t_{i_k}."""
    m, lam, chi = problem.m, params.lam, params.chi
    M, L = problem.f.M, problem.f.L
    if lam > 1.0 / (2.0 * (L + m)):
        zeta = 1.0 / (2.0 * (L + m) * lam)
    else:
        zeta = 1.0
    beta1 = (m + 2.0 / (zeta * lam)) / (m + chi / lam)
    beta2 = ((L + m) / 2.0 + 1.0) / (zeta * zeta * (1.0 / (4.0 * zeta * lam) + m / 2.0))
    gap = _initial_gap(problem, moreau_at_x0)
    big_k = serious_step_bound(params, problem, moreau_at_x0)
    return M * M + beta2 * (beta1 * gap
                            + beta1 * (3.0 + m * lam) * big_k * params.delta
                            + 4.0 * zeta * lam * M * M)


def complexity_budget(params, problem, x0, moreau_at_x0):
    """Total-iteration budget from the complexity product.

    ``moreau_at_x0`` is the Moreau envelope value at the start point (from
    the stationarity module's oracle) or any upper bound such as phi(x0).
    Requires problem.phi_lower_hint.
    """
    gap = _initial_gap(problem, moreau_at_x0)
    t_bar = t_bar_bound(params, problem, moreau_at_x0)
    M, L, m = problem.f.M, problem.f.L, problem.m
    per_cycle = (1.0 + params.lam * (4.0 * M * M / params.delta + L + m)) \
        * max(math.log(2.0 * t_bar / params.delta), 0.0) + 2.0
    cycles = gap * _tolerance_factor(params) + 1.0
    return int(math.ceil(per_cycle * cycles))


def _phi_mtilde_from(phi_val, point, center, m_tilde):
    d = np.asarray(point) - center
    return phi_val + 0.5 * m_tilde * float(np.dot(d, d))


def run(problem, params, scheme, x0, reset_policy=ResetPolicy.SHIFTED_MAX,
        trace=None, subproblem_tol=None, max_cuts=DEFAULT_MAX_CUTS,
        active_tol=DEFAULT_ACTIVE_TOL, audit_mode="warn", moreau_at_x0=None,
        timing=False, header_extra=None):
    """Run the bundle solver until the certificate stopping test holds.

    Args:
        problem: composite problem; x0 must be in dom h.
        params: PbfParams from ``derive_params``.
        scheme: bundle update scheme (one-/two-/multi-cut).
        x0: start point (becomes the first prox center and y_0).
        reset_policy: serious-step model rebuild policy.
        trace: optional Trace to append to (one is created otherwise).
        subproblem_tol: primal-dual gap tolerance for the exact subproblem
            solver; default min(1e-12, 1e-6 * delta).
        max_cuts: multi-cut model size cap (None = unbounded).
        active_tol: relative activity tolerance for multi-cut updates.
        audit_mode: "warn" (report), "fail" (raise on violation), or "off".
        moreau_at_x0: optional Moreau envelope value at x0 for the budget
            and audit bounds; phi(x0) is used as a majorant when absent.
        timing: record wall-clock times in the trace (off keeps traces
            byte-identical across runs).
        header_extra: extra key/value pairs echoed into the trace header.

    Returns:
        RunResult with the terminal certificate record, full trace, all
        serious records and the audit report.
    """
    scheme = Scheme(scheme)
    reset_policy = ResetPolicy(reset_policy)
    x0 = np.asarray(x0, dtype=float)
    if eval_h(problem.h, x0) == np.inf:
        raise DomainError("point outside dom h")
    if subproblem_tol is None:
        subproblem_tol = min(1e-12, 1e-6 * params.delta)

    m, lam, m_tilde = problem.m, params.lam, params.m_tilde
    delta, tau = params.delta, params.tau

    moreau_ref = None
    big_k = t_bar = None
    if problem.phi_lower_hint is not None:
        moreau_ref = moreau_at_x0 if moreau_at_x0 is not None else phi(problem, x0)
        big_k = serious_step_bound(params, problem, moreau_ref)
        t_bar = t_bar_bound(params, problem, moreau_ref)

    if params.max_total_iters is not None:
        max_iters = params.max_total_iters
    elif moreau_ref is not None:
        max_iters = 2 * complexity_budget(params, problem, x0, moreau_ref)
    else:
        max_iters = 10 ** 6

    if trace is None:
        trace = Trace()
    trace.header.update({
        "solver": f"pbf-{scheme.value}",
        "scheme": scheme.value,
        "reset_policy": reset_policy.value,
        "lam": params.lam, "chi": params.chi, "tau": params.tau,
        "delta": params.delta, "eta_bar": params.eta_bar,
        "eps_bar": params.eps_bar, "m_tilde": params.m_tilde,
        "alpha": params.alpha, "N": params.n_coef,
        "gamma_chi": params.gamma_chi, "m": problem.m,
        "M": problem.f.M, "L": problem.f.L,
        "dimension": problem.dimension,
        "max_cuts": "inf" if max_cuts is None else max_cuts,
        "subproblem_tol": subproblem_tol, "active_tol": active_tol,
        "max_total_iters": max_iters, "audit_mode": audit_mode,
        "timing": int(bool(timing)),
    })
    if moreau_ref is not None:
        trace.header.update({"moreau_at_x0": moreau_ref, "K": big_k,
                             "t_bar": t_bar,
                             "phi_lower": problem.phi_lower_hint})
    if header_extra:
        trace.header.update(header_extra)

    state = CycleState(k=1, x_hat_prev=x0.copy(), y=x0.copy(),
                       phi_y=phi(problem, x0),
                       model=initial_model(problem, scheme, x0, max_cuts),
                       j_start=1)
    serious_records = []
    terminal = None
    status = "budget_exhausted"
    warm = None
    t0 = time.perf_counter()
    j = 0
    for j in range(1, max_iters + 1):
        sol = solve_prox(state.model, lam, subproblem_tol, warm_start=warm)
        x_j = sol.x
        phi_x = phi(problem, x_j)
        val_x = _phi_mtilde_from(phi_x, x_j, state.x_hat_prev, m_tilde)
        val_y = _phi_mtilde_from(state.phi_y, state.y, state.x_hat_prev, m_tilde)
        if val_x <= val_y:
            state.y, state.phi_y, val_min = x_j, phi_x, val_x
        else:
            val_min = val_y
        t_j = val_min - sol.theta
        if state.t_first is None:
            state.t_first = t_j
        wall = time.perf_counter() - t0 if timing else 0.0
        dist_x = float(np.linalg.norm(x_j - state.x_hat_prev))

        if t_j > delta:
            trace.append(TraceRow(j=j, k=state.k, serious=False, t_j=t_j,
                                  theta_j=sol.theta, delta=delta,
                                  dist_x_center=dist_x, phi_mtilde_y=val_min,
                                  wall_time=wall))
            upd = null_update(state.model, problem, sol, tau, active_tol)
            state.model = upd.model
            warm = _warm_hint(scheme, upd, sol)
            continue

        # serious step
        v_hat = (state.x_hat_prev - x_j) / lam
        w_hat = v_hat - m * (state.y - state.x_hat_prev)
        d_yc = state.y - state.x_hat_prev
        phi_m_y = state.phi_y + 0.5 * m * float(np.dot(d_yc, d_yc))
        eps_hat = phi_m_y - sol.model_value - float(np.dot(v_hat, state.y - x_j))
        rec = SeriousRecord(
            k=state.k, j=j, x_hat=x_j.copy(),
            x_hat_prev=state.x_hat_prev.copy(), y_hat=state.y.copy(),
            v_hat=v_hat, w_hat=w_hat, eps_hat=eps_hat, Delta=val_min,
            w_hat_norm=float(np.linalg.norm(w_hat)),
            dist_y_center=float(np.linalg.norm(d_yc)),
            dist_y_xnew=float(np.linalg.norm(state.y - x_j)))
        serious_records.append(rec)
        trace.append(TraceRow(j=j, k=state.k, serious=True, t_j=t_j,
                              theta_j=sol.theta, delta=delta,
                              dist_x_center=dist_x, eps_hat=eps_hat,
                              w_hat_norm=rec.w_hat_norm, Delta_k=val_min,
                              cycle_len=j - state.j_start + 1,
                              dist_y_center=rec.dist_y_center,
                              dist_y_xnew=rec.dist_y_xnew,
                              phi_mtilde_y=val_min, wall_time=wall))
        if rec.w_hat_norm <= params.eta_bar and eps_hat <= params.eps_bar:
            terminal = rec
            status = "converged"
            break
        state.model = serious_reset(state.model, problem, x_j,
                                    state.x_hat_prev, reset_policy,
                                    dual_weights=sol.dual_weights)
        state.x_hat_prev = x_j.copy()
        state.k += 1
        state.j_start = j + 1
        state.t_first = None
        warm = None

    if status == "budget_exhausted" and serious_records:
        terminal = min(serious_records,
                       key=lambda r: max(r.w_hat_norm / params.eta_bar,
                                         r.eps_hat / params.eps_bar))

    audit_report = None
    if audit_mode != "off":
        audit_report = audits_mod.check_pbf_trace(
            trace.rows, delta=delta, tau=tau, lam=lam, chi=params.chi,
            alpha=params.alpha, n_coef=params.n_coef, m=problem.m,
            big_k=big_k, t_bar=t_bar)
        if audit_mode == "fail":
            failures = [r for r in audit_report if r.status == "fail"]
            if failures:
                raise AuditError(
                    "audit failure: " + "; ".join(r.name for r in failures),
                    report=audit_report)

    return RunResult(terminal=terminal, status=status, trace=trace,
                     serious_records=serious_records,
                     audit_report=audit_report, n_iterations=j,
                     n_serious=len(serious_records))


def _warm_hint(scheme, upd, sol):
    """Dual warm start for the next subproblem after a null update."""
    if scheme is not Scheme.MULTI_CUT:
        return None
    old_by_id = {c.id: w for c, w in zip(upd.old_cuts, sol.dual_weights)} \
        if upd.old_cuts is not None else {}
    weights = []
    for c in upd.model.cuts:
        weights.append(old_by_id.get(c.id, 0.0))
    weights[-1] = max(weights[-1], 1.0 / len(weights))
    total = sum(weights)
    return np.asarray(weights) / total

"""Runtime audits of the per-iteration and per-cycle inequalities.

Every completed run is checked against the quantitative relations the
solver's analysis guarantees: the null-step contraction of t_j, the cycle
length bound, the certificate estimates tying eps_hat and ||w_hat|| to the
serious-step displacement, the potential recursion across serious steps,
nonnegativity of eps_hat, and (when a lower bound on phi* is available) the
serious-step count bound K and the uniform cycle-start bound t_bar.

Audits run on trace rows, so they can be re-executed from a trace CSV alone.
Slacks are absolute 1e-8 scaled by (1 + |bound|).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

__all__ = ["AuditResult", "check_pbf_trace", "AUDIT_NAMES"]

SLACK = 1e-8
EPS_HAT_FLOOR = -1e-10

AUDIT_NAMES = [
    "eps_hat_nonnegative",
    "null_contraction",
    "cycle_length_bound",
    "eps_distance_estimate",
    "w_hat_estimate",
    "potential_recursion",
    "serious_count_bound",
    "cycle_start_bound",
]


@dataclass
class AuditResult:
    name: str
    status: str  # "pass" | "fail" | "skipped"
    n_checked: int = 0
    n_violations: int = 0
    worst: Optional[float] = None
    detail: str = ""

    def as_dict(self):
        return {"name": self.name, "status": self.status,
                "n_checked": self.n_checked, "n_violations": self.n_violations,
                "worst": self.worst, "detail": self.detail}


def _slack(bound):
    return SLACK * (1.0 + abs(bound))


def _tally(name, deficits, detail=""):
    checked = len(deficits)
    violations = [d for d in deficits if d > 0]
    worst = max(deficits) if deficits else None
    status = "pass" if not violations else "fail"
    if checked == 0:
        status = "pass"
    return AuditResult(name=name, status=status, n_checked=checked,
                       n_violations=len(violations), worst=worst, detail=detail)


def check_pbf_trace(rows, delta, tau, lam, chi, alpha, n_coef, m,
                    big_k=None, t_bar=None):
    """Run all audits over trace rows; returns one AuditResult per audit."""
    results = []
    serious = [r for r in rows if r.serious]

    # eps_hat >= 0 (up to roundoff floor)
    deficits = [EPS_HAT_FLOOR - r.eps_hat for r in serious]
    results.append(_tally("eps_hat_nonnegative", deficits))

    # t_{j+1} - delta/2 <= tau (t_j - delta/2) for every null iteration j
    deficits = []
    for a, b in zip(rows, rows[1:]):
        if a.serious or a.t_j is None or b.t_j is None:
            continue
        bound = tau * (a.t_j - delta / 2.0)
        deficits.append((b.t_j - delta / 2.0) - bound - SLACK * (1.0 + abs(a.t_j)))
    results.append(_tally("null_contraction", deficits))

    # |C_k| <= log+(2 t_first / delta) / (1 - tau) + 2 for completed cycles
    deficits = []
    cycle_first = {}
    cycle_count = {}
    completed = set()
    for r in rows:
        if r.k is None:
            continue
        cycle_first.setdefault(r.k, r.t_j)
        cycle_count[r.k] = cycle_count.get(r.k, 0) + 1
        if r.serious:
            completed.add(r.k)
    for k in sorted(completed):
        t_first = cycle_first[k]
        bound = math.log(max(2.0 * t_first / delta, 1.0)) / (1.0 - tau) + 2.0
        deficits.append(cycle_count[k] - bound - _slack(bound))
    results.append(_tally("cycle_length_bound", deficits))

    # eps_hat + ||y-x_new||^2/(2 lam) <= delta + (1-chi)/(2 lam) ||y-c||^2
    deficits = []
    for r in serious:
        lhs = r.eps_hat + r.dist_y_xnew ** 2 / (2.0 * lam)
        rhs = delta + (1.0 - chi) / (2.0 * lam) * r.dist_y_center ** 2
        deficits.append(lhs - rhs - _slack(rhs))
    results.append(_tally("eps_distance_estimate", deficits))

    # ||w||^2 <= 4 delta / lam + alpha N / (4 lam^2) ||y-c||^2
    deficits = []
    for r in serious:
        lhs = r.w_hat_norm ** 2
        rhs = 4.0 * delta / lam \
            + alpha * n_coef / (4.0 * lam * lam) * r.dist_y_center ** 2
        deficits.append(lhs - rhs - _slack(rhs))
    results.append(_tally("w_hat_estimate", deficits))

    # Delta_{k+1} + alpha/(2 lam) ||y_k - c_k||^2 <= Delta_k + (2 + m lam) delta
    deficits = []
    for a, b in zip(serious, serious[1:]):
        lhs = b.Delta_k + alpha / (2.0 * lam) * a.dist_y_center ** 2
        rhs = a.Delta_k + (2.0 + m * lam) * delta
        deficits.append(lhs - rhs - _slack(rhs))
    results.append(_tally("potential_recursion", deficits))

    # serious count <= K (at least one serious step always happens)
    if big_k is None:
        results.append(AuditResult("serious_count_bound", "skipped",
                                   detail="no lower bound on phi*"))
    else:
        bound = max(int(big_k), 1)
        deficit = len(serious) - bound
        results.append(AuditResult(
            "serious_count_bound", "pass" if deficit <= 0 else "fail",
            n_checked=1, n_violations=int(deficit > 0), worst=float(deficit),
            detail=f"serious={len(serious)} K={big_k}"))

    # t at each cycle start <= t_bar, for cycles k <= K
    if t_bar is None:
        results.append(AuditResult("cycle_start_bound", "skipped",
                                   detail="no lower bound on phi*"))
    else:
        k_cap = max(int(big_k), 1) if big_k is not None else None
        deficits = []
        for k in sorted(cycle_first):
            if k_cap is not None and k > k_cap:
                continue
            deficits.append(cycle_first[k] - t_bar - _slack(t_bar))
        results.append(_tally("cycle_start_bound", deficits,
                              detail=f"t_bar={t_bar:.6g}"))
    return results

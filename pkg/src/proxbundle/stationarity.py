"""Stationarity certificates, conversions between them, and a Moreau oracle.

Three notions of approximate stationarity for the m-weakly convex composite
phi = f + h are supported:

* regularized:  a pair (w, eps) with w an eps-subgradient of the
  convexification phi(.) + (m/2)||. - x||^2 at x -- the cheaply verifiable
  certificate the bundle solver outputs;
* directional:  a nearby witness x~ with an exhibited small subgradient of
  phi (directional derivatives are never evaluated by limits; all
  directional statements are certified through exhibited subgradients);
* Moreau:       a bound on the gradient norm of the Moreau envelope
  min_u phi(u) + ((1/lam + m)/2)||u - x||^2.

The conversions implement the constructive arguments: a regularized
certificate yields a directional witness by solving an m-strongly convex
auxiliary problem, and explicit formulas translate between the three
parameter pairs.  All functions are pure over immutable problems and safe
for concurrent validation jobs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .innersolve import minimize_strongly_convex
from .oracles import phi, phi_mod
from .simple_terms import eval_h, prox_h

__all__ = [
    "RegularizedCert",
    "DirectionalCert",
    "MoreauCert",
    "moreau_oracle",
    "regularized_to_directional",
    "regularized_to_moreau_bound",
    "directional_to_moreau",
    "moreau_to_directional",
    "check_regularized_cert",
    "check_directional_cert",
    "sample_box_around",
]


@dataclass(frozen=True)
class RegularizedCert:
    """(w, eps) with w in the eps-subdifferential of phi_m(.; x) at x."""

    x: np.ndarray
    w: np.ndarray
    eps: float
    m: float

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError("certificate eps must be nonnegative")

    @property
    def w_norm(self):
        return float(np.linalg.norm(self.w))


@dataclass(frozen=True)
class DirectionalCert:
    """Witness x_tilde within delta_d of x with dist(0, subdiff phi) <= eps_d."""

    x: np.ndarray
    x_tilde: np.ndarray
    eps_d: float
    delta_d: float
    m: float
    witness_subgrad: Optional[np.ndarray] = None


@dataclass(frozen=True)
class MoreauCert:
    """Moreau envelope gradient at x: grad_norm = (1/lam + m) ||x - x_hat||."""

    x: np.ndarray
    lam: float
    grad_norm: float
    x_hat: np.ndarray
    m: float
    envelope_value: float


def moreau_oracle(problem, lam, x, tol=None, max_iters=5000):
    """High-accuracy Moreau envelope evaluation at x.

    Solves min_u phi(u) + ((1/lam + m)/2)||u - x||^2 with the multi-cut
    bundle machinery on the convexified f until the strong-convexity gap
    certifies the minimizer within ``tol`` (default 1e-8 * (1 + ||x||), or
    floating-point resolution if that is coarser).

    Returns:
        MoreauCert carrying the envelope minimizer, gradient norm per the
        envelope gradient formula, and the envelope value.
    """
    x = np.asarray(x, dtype=float)
    if tol is None:
        tol = 1e-8 * (1.0 + float(np.linalg.norm(x)))
    m = problem.m

    def cut_fn(u):
        d = u - x
        val = problem.f.eval(u) + 0.5 * m * float(np.dot(d, d))
        slope = np.asarray(problem.f.subgrad(u), dtype=float) + m * d
        return val, slope

    res = minimize_strongly_convex(cut_fn, problem.h, x, lam, tol,
                                   max_iters=max_iters)
    x_hat = res.x
    grad_norm = (1.0 / lam + m) * float(np.linalg.norm(x - x_hat))
    return MoreauCert(x=x, lam=lam, grad_norm=grad_norm, x_hat=x_hat, m=m,
                      envelope_value=res.value)


def regularized_to_directional(problem, cert, inner_tol=None):
    """Construct the directional certificate implied by a regularized one.

    The witness is the global minimizer of the m-strongly convex function
    phi(.) + m||. - x||^2 - <w, .>, at most sqrt(2 eps / m) away from x, and
    w - 2m (x_tilde - x) is the exhibited subgradient of phi at the witness.
    """
    x = np.asarray(cert.x, dtype=float)
    m = cert.m
    eps_d = cert.w_norm + 2.0 * math.sqrt(2.0 * m * cert.eps)
    delta_d = math.sqrt(2.0 * cert.eps / m)
    if cert.eps == 0.0:
        return DirectionalCert(x=x, x_tilde=x.copy(), eps_d=eps_d,
                               delta_d=delta_d, m=m, witness_subgrad=cert.w)
    if inner_tol is None:
        inner_tol = min(1e-8 * (1.0 + float(np.linalg.norm(x))), 0.01 * delta_d)
    w = np.asarray(cert.w, dtype=float)

    def cut_fn(u):
        d = u - x
        val = problem.f.eval(u) + 0.5 * m * float(np.dot(d, d)) - float(np.dot(w, u))
        slope = np.asarray(problem.f.subgrad(u), dtype=float) + m * d - w
        return val, slope

    res = minimize_strongly_convex(cut_fn, problem.h, x, 1.0 / m, inner_tol,
                                   x_init=x)
    x_tilde = res.x
    witness = w - 2.0 * m * (x_tilde - x)
    return DirectionalCert(x=x, x_tilde=x_tilde, eps_d=eps_d, delta_d=delta_d,
                           m=m, witness_subgrad=witness)


def regularized_to_moreau_bound(cert):
    """Guaranteed bound on the Moreau gradient norm at parameter 1/m."""
    return 18.0 * math.sqrt(2.0 * cert.m * cert.eps) + 4.0 * cert.w_norm


def directional_to_moreau(cert, lam):
    """Moreau stationarity level implied by a directional certificate."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    m = cert.m
    return (m + 1.0 / lam) * ((3.0 + 2.0 * lam * m) * cert.delta_d
                              + 2.0 * lam * cert.eps_d)


def moreau_to_directional(cert):
    """Directional certificate implied by a Moreau one; witness is x_hat."""
    m = cert.m
    witness = (1.0 / cert.lam + m) * (np.asarray(cert.x) - np.asarray(cert.x_hat))
    return DirectionalCert(x=np.asarray(cert.x, dtype=float),
                           x_tilde=np.asarray(cert.x_hat, dtype=float),
                           eps_d=cert.grad_norm,
                           delta_d=cert.grad_norm / (m + 1.0 / cert.lam),
                           m=m, witness_subgrad=witness)


def sample_box_around(x, rng, n):
    """Uniform samples from the box of radius max(1, 2||x||) around x."""
    x = np.asarray(x, dtype=float)
    r = max(1.0, 2.0 * float(np.linalg.norm(x)))
    return x + rng.uniform(-r, r, size=(n, x.size))


def check_regularized_cert(problem, cert, n_samples=10_000, seed=0, slack=1e-8):
    """Max sampled violation of the eps-subgradient inequality at phi_m(.; x).

    Checks phi_m(u; x) >= phi_m(x; x) + <w, u - x> - eps - slack over
    n_samples uniform points; points outside dom h satisfy it trivially.
    Returns the worst violation (<= 0 means the certificate held).
    """
    rng = np.random.default_rng(seed)
    x = np.asarray(cert.x, dtype=float)
    base = phi(problem, x)
    worst = -np.inf
    for u in sample_box_around(x, rng, n_samples):
        lhs = phi_mod(problem, u, x, cert.m)
        if lhs == np.inf:
            continue
        rhs = base + float(np.dot(cert.w, u - x)) - cert.eps
        worst = max(worst, rhs - lhs - slack)
    return worst


def check_directional_cert(problem, cert, n_samples=10_000, seed=0, slack=1e-8,
                           dist_slack=1e-6):
    """Verify a directional certificate through its exhibited subgradient.

    Confirms ||x - x_tilde|| <= delta_d, ||witness|| <= eps_d, and the
    weak-convexity subgradient inequality for the witness subgradient at
    x_tilde over sampled points.  Returns the worst sampled violation.
    """
    if cert.witness_subgrad is None:
        raise ValueError("certificate carries no witness subgradient")
    x_tilde = np.asarray(cert.x_tilde, dtype=float)
    d = float(np.linalg.norm(np.asarray(cert.x) - x_tilde))
    if d > cert.delta_d + dist_slack:
        return d - cert.delta_d
    wn = float(np.linalg.norm(cert.witness_subgrad))
    if wn > cert.eps_d + dist_slack:
        return wn - cert.eps_d
    rng = np.random.default_rng(seed)
    base = phi(problem, x_tilde)
    worst = -np.inf
    for u in sample_box_around(x_tilde, rng, n_samples):
        lhs = phi(problem, u)
        if lhs == np.inf:
            continue
        du = u - x_tilde
        rhs = base + float(np.dot(cert.witness_subgrad, du)) \
            - 0.5 * cert.m * float(np.dot(du, du))
        worst = max(worst, rhs - lhs - slack)
    return worst

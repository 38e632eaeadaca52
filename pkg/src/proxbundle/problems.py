"""Benchmark instance generators with declared, verifiable constants.

Two families:

* robust phase retrieval: f(x) = (1/n) sum_i |<a_i, x>^2 - b_i| with
  Gaussian a_i and measurements from a planted unit-norm point; weakly
  convex with modulus (2/n) sum ||a_i||^2 and L = 0, so the domain term h
  (ball or box) bounds the subgradients and sets M;
* hybrid synthetic: a smooth nonconvex part (quadratic plus cosines, with
  an exact gradient-Lipschitz constant) plus a piecewise-linear max of
  affine kinks, giving genuinely positive M and L.

Generation is pure given the seed (PCG64 streams), instances are immutable,
and every declared constant passes the sampling checks in
:mod:`proxbundle.oracles`.  Instances serialize to JSON with the raw matrix
data, so files round-trip without re-running the generator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .oracles import (HybridOracle, Problem, check_hybrid_condition,
                      check_weak_convexity)
from .simple_terms import (BallIndicator, BoxIndicator, term_from_dict,
                           term_to_dict)

__all__ = ["Instance", "gen_phase_retrieval", "gen_hybrid_synthetic",
           "instance_to_dict", "instance_from_dict", "verify_instance"]


@dataclass(frozen=True)
class Instance:
    """A named benchmark problem with its generator provenance."""

    name: str
    problem: Problem
    seed: int
    known_phi_star_lower: Optional[float]
    x0: np.ndarray
    generator: str
    params: dict = field(default_factory=dict)
    data: dict = field(default_factory=dict)
    planted: Optional[np.ndarray] = None
    sample_box_radius: float = 2.0


def _phase_retrieval_oracle(A, b, m, M):
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    n = A.shape[0]

    def f_eval(x):
        r = (A @ x) ** 2 - b
        return float(np.mean(np.abs(r)))

    def f_subgrad(x):
        z = A @ x
        r = z * z - b
        return (2.0 / n) * (A.T @ (np.sign(r) * z))

    return HybridOracle(eval=f_eval, subgrad=f_subgrad, dimension=A.shape[1],
                        M=M, L=0.0)


def gen_phase_retrieval(n_samples, dim, seed, noise=0.0, h_choice="ball",
                        radius=2.0):
    """Robust phase retrieval instance with a planted unit-norm point.

    b_i = <a_i, x_star>^2 + noise * xi_i with standard normal xi.  The
    declared modulus is the conservative bound m = (2/n) sum ||a_i||^2 and
    M = m * R where R bounds ||x|| over dom h.  phi >= 0, so 0 is a valid
    lower bound on phi*.
    """
    if n_samples < 1 or dim < 1:
        raise ValueError("n_samples and dim must be positive")
    rng = np.random.default_rng(np.random.PCG64(seed))
    A = rng.standard_normal((n_samples, dim))
    x_star = rng.standard_normal(dim)
    x_star /= np.linalg.norm(x_star)
    b = (A @ x_star) ** 2
    if noise:
        b = b + noise * rng.standard_normal(n_samples)

    m = (2.0 / n_samples) * float(np.sum(A * A))
    if h_choice == "ball":
        h = BallIndicator(dim, center=np.zeros(dim), radius=float(radius))
        point_norm_bound = float(radius)
    elif h_choice == "box":
        h = BoxIndicator(dim, lower=-radius * np.ones(dim),
                         upper=radius * np.ones(dim))
        point_norm_bound = float(radius) * np.sqrt(dim)
    else:
        raise ValueError("h_choice must be 'ball' or 'box'")
    M = m * point_norm_bound

    oracle = _phase_retrieval_oracle(A, b, m, M)
    problem = Problem(f=oracle, h=h, m=m, phi_lower_hint=0.0)
    u = rng.standard_normal(dim)
    u /= np.linalg.norm(u)
    x0 = 0.6 * x_star + 0.4 * u
    return Instance(name=f"phase_retrieval_d{dim}_n{n_samples}_s{seed}",
                    problem=problem, seed=seed, known_phi_star_lower=0.0,
                    x0=x0, generator="phase_retrieval",
                    params={"n_samples": n_samples, "dim": dim, "seed": seed,
                            "noise": noise, "h_choice": h_choice,
                            "radius": radius},
                    data={"A": A, "b": b, "x_star": x_star, "x0": x0,
                          "m": m, "M": M},
                    planted=x_star, sample_box_radius=float(radius))


def _hybrid_oracle(A, C, d, weight, m, M, L):
    A = np.asarray(A, dtype=float)
    AtA = A.T @ A
    has_kinks = C is not None and len(C) > 0
    if has_kinks:
        C = np.asarray(C, dtype=float)
        d = np.asarray(d, dtype=float)

    def f_eval(x):
        val = weight * (0.5 * float(x @ (AtA @ x)) + float(np.sum(np.cos(x))))
        if has_kinks:
            val += float(np.max(C @ x + d))
        return val

    def f_subgrad(x):
        g = weight * (AtA @ x - np.sin(x))
        if has_kinks:
            g = g + C[int(np.argmax(C @ x + d))]
        return g

    return HybridOracle(eval=f_eval, subgrad=f_subgrad, dimension=A.shape[1],
                        M=M, L=L)


def gen_hybrid_synthetic(dim, seed, smooth_weight=1.0, kink_count=8,
                         radius=5.0, kink_scale=0.3):
    """Instance mixing a smooth nonconvex part with piecewise-linear kinks.

    The smooth part is smooth_weight * (||Ax||^2/2 + sum cos(x_i)) whose
    gradient is Lipschitz with the exact constant smooth_weight *
    (lam_max(A^T A) + 1) and whose weak convexity modulus is
    smooth_weight * max(0, 1 - lam_min(A^T A)).  The kink part
    max_i (<c_i, x> + d_i) is convex with subgradient jumps bounded by
    2 max ||c_i||, which sets M.  dom h is a ball so phi* is finite.
    """
    if dim < 1:
        raise ValueError("dim must be positive")
    if kink_count < 0:
        raise ValueError("kink_count must be nonnegative")
    rng = np.random.default_rng(np.random.PCG64(seed))
    A = rng.standard_normal((dim, dim)) / np.sqrt(dim)
    eigs = np.linalg.eigvalsh(A.T @ A)
    L = smooth_weight * (float(eigs[-1]) + 1.0)
    m = smooth_weight * max(0.0, 1.0 - float(eigs[0]))
    if m <= 0.0:
        m = 1e-6  # convex instance; any positive modulus is valid
    if kink_count > 0:
        C = kink_scale * rng.standard_normal((kink_count, dim)) / np.sqrt(dim)
        d = 0.1 * rng.standard_normal(kink_count)
        M = float(np.max(np.linalg.norm(C, axis=1)))
    else:
        C, d, M = None, None, 0.0

    oracle = _hybrid_oracle(A, C, d, smooth_weight, m, M, L)
    h = BallIndicator(dim, center=np.zeros(dim), radius=float(radius))
    lower = -smooth_weight * dim
    if kink_count > 0:
        lower += float(np.max(d - np.linalg.norm(C, axis=1) * radius))
    problem = Problem(f=oracle, h=h, m=m, phi_lower_hint=lower)
    x0 = rng.standard_normal(dim)
    x0 *= (0.5 * radius) / np.linalg.norm(x0)
    return Instance(name=f"hybrid_d{dim}_k{kink_count}_s{seed}",
                    problem=problem, seed=seed, known_phi_star_lower=lower,
                    x0=x0, generator="hybrid_synthetic",
                    params={"dim": dim, "seed": seed,
                            "smooth_weight": smooth_weight,
                            "kink_count": kink_count, "radius": radius,
                            "kink_scale": kink_scale},
                    data={"A": A, "C": C, "d": d, "x0": x0, "m": m, "M": M,
                          "L": L, "smooth_weight": smooth_weight},
                    planted=None, sample_box_radius=float(radius))


def instance_to_dict(inst):
    """JSON-serializable record: provenance, declared constants, raw data."""
    data = {}
    for key, value in inst.data.items():
        if isinstance(value, np.ndarray):
            data[key] = value.tolist()
        else:
            data[key] = value
    return {
        "name": inst.name,
        "generator": inst.generator,
        "seed": inst.seed,
        "params": inst.params,
        "known_phi_star_lower": inst.known_phi_star_lower,
        "h": term_to_dict(inst.problem.h),
        "constants": {"m": inst.problem.m, "M": inst.problem.f.M,
                      "L": inst.problem.f.L},
        "dimension": inst.problem.dimension,
        "x0": np.asarray(inst.x0).tolist(),
        "planted": None if inst.planted is None else np.asarray(inst.planted).tolist(),
        "sample_box_radius": inst.sample_box_radius,
        "data": data,
    }


def instance_from_dict(rec):
    """Rebuild an instance from its serialized record (data-authoritative)."""
    generator = rec["generator"]
    consts = rec["constants"]
    h = term_from_dict(rec["h"])
    data = rec["data"]
    if generator == "phase_retrieval":
        A = np.asarray(data["A"], dtype=float)
        b = np.asarray(data["b"], dtype=float)
        oracle = _phase_retrieval_oracle(A, b, consts["m"], consts["M"])
        arrays = {"A": A, "b": b,
                  "x_star": np.asarray(data["x_star"], dtype=float),
                  "x0": np.asarray(data["x0"], dtype=float),
                  "m": consts["m"], "M": consts["M"]}
    elif generator == "hybrid_synthetic":
        A = np.asarray(data["A"], dtype=float)
        C = None if data.get("C") is None else np.asarray(data["C"], dtype=float)
        d = None if data.get("d") is None else np.asarray(data["d"], dtype=float)
        oracle = _hybrid_oracle(A, C, d, float(data["smooth_weight"]),
                                consts["m"], consts["M"], consts["L"])
        arrays = {"A": A, "C": C, "d": d,
                  "x0": np.asarray(data["x0"], dtype=float),
                  "m": consts["m"], "M": consts["M"], "L": consts["L"],
                  "smooth_weight": float(data["smooth_weight"])}
    else:
        raise ValueError(f"unknown generator {generator!r}")
    problem = Problem(f=oracle, h=h, m=float(consts["m"]),
                      phi_lower_hint=rec.get("known_phi_star_lower"))
    planted = rec.get("planted")
    return Instance(name=rec["name"], problem=problem, seed=int(rec["seed"]),
                    known_phi_star_lower=rec.get("known_phi_star_lower"),
                    x0=np.asarray(rec["x0"], dtype=float),
                    generator=generator, params=rec.get("params", {}),
                    data=arrays,
                    planted=None if planted is None else np.asarray(planted, dtype=float),
                    sample_box_radius=float(rec.get("sample_box_radius", 2.0)))


def verify_instance(inst, n_pairs=1000, seed=0):
    """Sampling verification of the declared constants; worst violations."""
    rng = np.random.default_rng(np.random.PCG64(seed))
    prob = inst.problem
    return {
        "hybrid_condition": check_hybrid_condition(
            prob, rng, n_pairs=n_pairs, box_radius=inst.sample_box_radius),
        "weak_convexity": check_weak_convexity(
            prob, rng, n_pairs=n_pairs, box_radius=inst.sample_box_radius),
    }

"""Run orchestration: config handling, solver dispatch, outputs, audits.

A run is described by one human-editable YAML config (or equivalent CLI
flags): the instance (file path or generator spec), exactly one solver, a
tolerance spec (either the pair (eta_bar, eps_bar) or the single Moreau
target rho), plus overrides.  Outputs are a trace CSV (deterministic:
identical config + seed gives byte-identical bytes unless timing is
enabled), a JSON summary with the terminal certificate and its conversions,
and a JSON audit report.

Exit codes: 0 all good, 1 malformed config, 2 audit failure, 3 budget
exhausted.
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import yaml

from . import audits as audits_mod
from . import baseline_ps, pbf, problems, stationarity
from .bundle import DEFAULT_MAX_CUTS, ResetPolicy
from .errors import AuditError, ParameterError, ProxBundleError
from .oracles import CountingOracle, Problem, phi
from .trace import Trace, read_trace_csv

__all__ = ["RunConfig", "ConfigError", "load_config", "execute_run",
           "compare_runs", "audit_trace_file", "generate_instance_file",
           "EXIT_OK", "EXIT_CONFIG", "EXIT_AUDIT", "EXIT_BUDGET"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_AUDIT = 2
EXIT_BUDGET = 3

SOLVERS = ("pbf-onecut", "pbf-twocut", "pbf-multicut", "ps")
_SCHEME_OF = {"pbf-onecut": "onecut", "pbf-twocut": "twocut",
              "pbf-multicut": "multicut"}

OUT_DIR_ENV = "PROXBUNDLE_OUT_DIR"


class ConfigError(ProxBundleError):
    """Malformed or inconsistent run configuration."""


@dataclass
class RunConfig:
    solver: str
    instance: Optional[str] = None
    generator: Optional[dict] = None
    rho: Optional[float] = None
    eta_bar: Optional[float] = None
    eps_bar: Optional[float] = None
    lam: Optional[float] = None
    gamma_chi: Optional[float] = None
    max_cuts: Optional[int] = DEFAULT_MAX_CUTS
    subproblem_tol: Optional[float] = None
    reset_policy: str = "shifted-max"
    audit_mode: str = "warn"
    max_total_iters: Optional[int] = None
    ps_gamma: Optional[float] = None
    ps_T: Optional[int] = None
    ps_m_bar: Optional[float] = None
    verify_moreau: bool = False
    timing: bool = False
    out_dir: str = "."
    trace_file: str = "trace.csv"
    summary_file: str = "summary.json"
    audit_file: str = "audit.json"
    x0: Optional[list] = None

    def validate(self):
        if self.solver not in SOLVERS:
            raise ConfigError(f"unknown solver {self.solver!r}")
        if (self.instance is None) == (self.generator is None):
            raise ConfigError("exactly one of instance / generator is required")
        has_pair = self.eta_bar is not None and self.eps_bar is not None
        has_rho = self.rho is not None
        if self.solver == "ps":
            if not (has_rho or self.ps_T is not None):
                raise ConfigError("ps needs a tolerance: rho or an explicit T")
        elif has_pair == has_rho:
            raise ConfigError("exactly one tolerance spec is required: "
                              "rho or the pair (eta_bar, eps_bar)")
        if self.audit_mode not in ("warn", "fail", "off"):
            raise ConfigError("audit_mode must be warn, fail, or off")
        ResetPolicy(self.reset_policy)
        return self


_CONFIG_KEYS = {f.name for f in RunConfig.__dataclass_fields__.values()} \
    if hasattr(RunConfig, "__dataclass_fields__") else set()


def load_config(path):
    """Load a YAML run config; nested sections are flattened onto RunConfig."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    return config_from_dict(raw)


def config_from_dict(raw):
    flat = {}
    nested = {"tolerance": ("rho", "eta_bar", "eps_bar"),
              "overrides": ("lam", "gamma_chi", "max_cuts", "subproblem_tol",
                            "reset_policy", "audit_mode", "max_total_iters"),
              "ps": ("gamma", "T", "m_bar"),
              "output": ("dir", "trace", "summary", "audit")}
    rename = {("ps", "gamma"): "ps_gamma", ("ps", "T"): "ps_T",
              ("ps", "m_bar"): "ps_m_bar", ("output", "dir"): "out_dir",
              ("output", "trace"): "trace_file",
              ("output", "summary"): "summary_file",
              ("output", "audit"): "audit_file",
              ("overrides", "lambda"): "lam"}
    for key, value in dict(raw).items():
        if key in nested and isinstance(value, dict):
            for sub, sval in value.items():
                name = rename.get((key, sub), sub)
                if name not in RunConfig.__dataclass_fields__:
                    raise ConfigError(f"unknown config key {key}.{sub}")
                flat[name] = sval
        elif key == "lambda":
            flat["lam"] = value
        elif key in RunConfig.__dataclass_fields__:
            flat[key] = value
        else:
            raise ConfigError(f"unknown config key {key!r}")
    if "solver" not in flat:
        raise ConfigError("config must name a solver")
    try:
        return RunConfig(**flat).validate()
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _resolve_instance(cfg):
    if cfg.instance is not None:
        with open(cfg.instance, "r", encoding="utf-8") as fh:
            rec = json.load(fh)
        return problems.instance_from_dict(rec)
    spec = dict(cfg.generator)
    name = spec.pop("name", None)
    if name in ("phase_retrieval", "phase-retrieval", "pr"):
        return problems.gen_phase_retrieval(**spec)
    if name in ("hybrid_synthetic", "hybrid-synthetic", "hybrid"):
        return problems.gen_hybrid_synthetic(**spec)
    raise ConfigError(f"unknown generator {name!r}")


def _out_path(cfg, filename):
    out_dir = os.environ.get(OUT_DIR_ENV, cfg.out_dir)
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, filename)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


def _certificate_summary(problem, rec, params):
    eps = max(rec.eps_hat, 0.0)
    cert = stationarity.RegularizedCert(x=rec.y_hat, w=rec.w_hat, eps=eps,
                                        m=problem.m)
    eps_d = cert.w_norm + 2.0 * math.sqrt(2.0 * problem.m * eps)
    delta_d = math.sqrt(2.0 * eps / problem.m)
    return cert, {
        "k": rec.k, "j": rec.j,
        "x_hat": rec.x_hat, "x_hat_prev": rec.x_hat_prev, "y_hat": rec.y_hat,
        "v_hat": rec.v_hat, "w_hat": rec.w_hat,
        "w_hat_norm": rec.w_hat_norm, "eps_hat": rec.eps_hat,
        "Delta_k": rec.Delta,
        "conversions": {
            "directional": {"eps_d": eps_d, "delta_d": delta_d},
            "moreau_bound_at_1_over_m":
                stationarity.regularized_to_moreau_bound(cert),
        },
    }


@dataclass
class RunArtifacts:
    exit_code: int
    summary: dict
    trace_path: Optional[str] = None
    summary_path: Optional[str] = None
    audit_path: Optional[str] = None
    result: object = None
    instance: object = None
    counters: dict = field(default_factory=dict)


def execute_run(cfg, write_outputs=True):
    """Execute one configured run; returns artifacts with the exit code."""
    cfg.validate()
    inst = _resolve_instance(cfg)
    counting = CountingOracle(inst.problem.f)
    problem = Problem(f=counting.oracle(), h=inst.problem.h, m=inst.problem.m,
                      phi_lower_hint=inst.problem.phi_lower_hint)
    x0 = np.asarray(cfg.x0, dtype=float) if cfg.x0 is not None else inst.x0

    t_start = time.perf_counter()
    if cfg.solver == "ps":
        summary, trace, result, exit_code = _run_ps(cfg, inst, problem, x0)
    else:
        summary, trace, result, exit_code = _run_pbf(cfg, inst, problem, x0)
    summary["wall_time_s"] = time.perf_counter() - t_start
    summary["oracle_calls"] = {"eval": counting.n_eval,
                               "subgrad": counting.n_subgrad,
                               "total": counting.total}
    summary["instance"] = {"name": inst.name, "generator": inst.generator,
                           "seed": inst.seed, "params": inst.params}
    summary["config"] = asdict(cfg)

    artifacts = RunArtifacts(exit_code=exit_code, summary=summary,
                             result=result, instance=inst,
                             counters=dict(summary["oracle_calls"]))
    if write_outputs:
        artifacts.trace_path = _out_path(cfg, cfg.trace_file)
        trace.write_csv(artifacts.trace_path)
        artifacts.summary_path = _out_path(cfg, cfg.summary_file)
        with open(artifacts.summary_path, "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, default=_json_default)
        artifacts.audit_path = _out_path(cfg, cfg.audit_file)
        with open(artifacts.audit_path, "w", encoding="utf-8") as fh:
            json.dump(summary.get("audits"), fh, indent=2, default=_json_default)
    return artifacts


def _tolerances(cfg, problem):
    if cfg.rho is not None:
        return pbf.corollary_tolerances(problem, cfg.rho)
    return cfg.eta_bar, cfg.eps_bar


def _run_pbf(cfg, inst, problem, x0):
    eta_bar, eps_bar = _tolerances(cfg, problem)
    params = pbf.derive_params(problem, eta_bar, eps_bar, lam=cfg.lam,
                               gamma_chi=cfg.gamma_chi,
                               max_total_iters=cfg.max_total_iters)
    moreau_at_x0 = None
    if cfg.verify_moreau:
        env = stationarity.moreau_oracle(problem, params.lam, x0,
                                         tol=1e-6 * (1 + float(np.linalg.norm(x0))))
        moreau_at_x0 = env.envelope_value

    audit_mode = cfg.audit_mode
    try:
        result = pbf.run(problem, params, _SCHEME_OF[cfg.solver], x0,
                         reset_policy=cfg.reset_policy,
                         subproblem_tol=cfg.subproblem_tol,
                         max_cuts=cfg.max_cuts, audit_mode=audit_mode,
                         moreau_at_x0=moreau_at_x0, timing=cfg.timing,
                         header_extra={"instance": inst.name,
                                       "rho": cfg.rho if cfg.rho is not None else ""})
    except AuditError as exc:
        summary = {"solver": cfg.solver, "status": "audit_failure",
                   "error": str(exc),
                   "audits": [r.as_dict() for r in (exc.report or [])]}
        return summary, Trace(), None, EXIT_AUDIT

    summary = {
        "solver": cfg.solver,
        "status": result.status,
        "iterations": result.n_iterations,
        "serious_steps": result.n_serious,
        "params": {
            "lambda": params.lam, "chi": params.chi, "tau": params.tau,
            "delta": params.delta, "eta_bar": params.eta_bar,
            "eps_bar": params.eps_bar, "m_tilde": params.m_tilde,
            "alpha": params.alpha, "N": params.n_coef,
        },
    }
    if problem.phi_lower_hint is not None:
        ref = moreau_at_x0 if moreau_at_x0 is not None else phi(problem, x0)
        summary["budget"] = pbf.complexity_budget(params, problem, x0, ref)
        summary["K"] = pbf.serious_step_bound(params, problem, ref)
        summary["t_bar"] = pbf.t_bar_bound(params, problem, ref)
    if result.terminal is not None:
        cert, cert_summary = _certificate_summary(problem, result.terminal, params)
        summary["terminal"] = cert_summary
        if cfg.verify_moreau:
            measured = stationarity.moreau_oracle(
                problem, 1.0 / problem.m, result.terminal.y_hat,
                tol=1e-6 * (1 + float(np.linalg.norm(result.terminal.y_hat))))
            bound = stationarity.regularized_to_moreau_bound(cert)
            summary["measured_moreau"] = {
                "grad_norm": measured.grad_norm,
                "bound": bound,
                "within_bound": bool(measured.grad_norm <= 1.05 * bound),
            }
            if cfg.rho is not None:
                summary["measured_moreau"]["rho"] = cfg.rho
                summary["measured_moreau"]["within_rho"] = \
                    bool(measured.grad_norm <= cfg.rho)
    if result.audit_report is not None:
        summary["audits"] = [r.as_dict() for r in result.audit_report]
        failed = any(r.status == "fail" for r in result.audit_report)
    else:
        failed = False
    if result.status == "budget_exhausted":
        return summary, result.trace, result, EXIT_BUDGET
    return summary, result.trace, result, EXIT_AUDIT if failed else EXIT_OK


def _run_ps(cfg, inst, problem, x0):
    gamma = cfg.ps_gamma if cfg.ps_gamma is not None else 1.0 / (2.0 * problem.m)
    if cfg.ps_T is not None:
        T = cfg.ps_T
    else:
        env = stationarity.moreau_oracle(problem, 1.0 / problem.m, x0,
                                         tol=1e-6 * (1 + float(np.linalg.norm(x0))))
        T = baseline_ps.ps_iteration_count(problem, cfg.rho, gamma,
                                           env.envelope_value)
    params = baseline_ps.make_ps_params(problem, gamma, T, m_bar=cfg.ps_m_bar)
    every = None
    if cfg.verify_moreau:
        every = max(1, (params.T + 1) // 20)
    result = baseline_ps.ps_run(problem, params, x0, eval_moreau_every=every,
                                timing=cfg.timing)
    result.trace.header["instance"] = inst.name
    summary = {
        "solver": "ps", "status": "completed",
        "iterations": params.T + 1,
        "params": {"gamma": params.gamma, "T": params.T,
                   "m_bar": params.m_bar, "alpha": params.alpha},
    }
    if problem.f.L > 0:
        summary["audits"] = [{"name": "ps_averaged_moreau_bound",
                              "status": "inapplicable",
                              "detail": "inapplicable (L>0)"}]
    else:
        summary["audits"] = [{"name": "ps_averaged_moreau_bound",
                              "status": "skipped",
                              "detail": "run the test suite for the desk-scale audit"}]
    if result.best_moreau_grad is not None:
        summary["best_moreau_grad"] = result.best_moreau_grad
        summary["moreau_grad_norms"] = {str(t): g for t, g
                                        in result.moreau_grad_norms.items()}
    return summary, result.trace, result, EXIT_OK


def compare_runs(configs, out_csv=None):
    """Run several configs on one instance/tolerance; tabulate the results.

    Rejects mismatched instances or tolerance specs.  Returns the table as a
    list of dicts (and writes CSV when out_csv is given).
    """
    if len(configs) < 2:
        raise ConfigError("compare needs at least two run configs")
    keys = []
    for cfg in configs:
        cfg.validate()
        ident = (cfg.instance,
                 json.dumps(cfg.generator, sort_keys=True) if cfg.generator else None,
                 cfg.rho, cfg.eta_bar, cfg.eps_bar)
        keys.append(ident)
    if len(set(keys)) != 1:
        raise ConfigError("compare requires matching instances and tolerances")

    rows = []
    for i, cfg in enumerate(configs):
        art = execute_run(cfg, write_outputs=False)
        summary = art.summary
        rows.append({
            "run": i,
            "solver": cfg.solver,
            "status": summary.get("status"),
            "iterations": summary.get("iterations"),
            "serious_steps": summary.get("serious_steps", ""),
            "oracle_calls": summary["oracle_calls"]["total"],
            "measured_moreau_grad":
                summary.get("measured_moreau", {}).get("grad_norm", ""),
            "budget": summary.get("budget", ""),
            "within_budget": ("" if "budget" not in summary
                              else int(summary.get("iterations", 0)
                                       <= summary["budget"])),
        })
    if out_csv:
        import csv as _csv
        with open(out_csv, "w", encoding="utf-8", newline="") as fh:
            writer = _csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
    return rows


def audit_trace_file(path):
    """Re-check the audit inequalities from a trace CSV alone."""
    header, rows = read_trace_csv(path)
    if header.get("solver", "").startswith("pbf") or "tau" in header:
        def fget(key, default=None):
            value = header.get(key, "")
            if value in ("", "inf", None):
                return default
            return float(value)

        report = audits_mod.check_pbf_trace(
            rows, delta=fget("delta"), tau=fget("tau"), lam=fget("lam"),
            chi=fget("chi"), alpha=fget("alpha"), n_coef=fget("N"),
            m=fget("m"), big_k=fget("K"), t_bar=fget("t_bar"))
        failed = any(r.status == "fail" for r in report)
        return (EXIT_AUDIT if failed else EXIT_OK), report
    return EXIT_OK, [audits_mod.AuditResult(
        name="ps_averaged_moreau_bound", status="skipped",
        detail="PS traces carry no bundle audit quantities")]


def generate_instance_file(generator, out_path, **params):
    """Generate an instance and write its JSON file; returns the Instance."""
    if generator in ("phase_retrieval", "phase-retrieval", "pr"):
        inst = problems.gen_phase_retrieval(**params)
    elif generator in ("hybrid_synthetic", "hybrid-synthetic", "hybrid"):
        inst = problems.gen_hybrid_synthetic(**params)
    else:
        raise ConfigError(f"unknown generator {generator!r}")
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(problems.instance_to_dict(inst), fh, indent=2,
                  default=_json_default)
    return inst

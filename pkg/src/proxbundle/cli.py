"""Command-line front end.

Verbs:
  run      execute one solver run (trace CSV + summary JSON + audit report)
  gen      generate a benchmark instance JSON file
  compare  run several configs on the same instance and tabulate
  audit    re-check the audit inequalities from a trace CSV

Configuration comes from an optional YAML file plus flag overrides; the
PROXBUNDLE_OUT_DIR environment variable overrides the output directory.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import ProxBundleError
from .harness import (EXIT_CONFIG, ConfigError, RunConfig, audit_trace_file,
                      compare_runs, config_from_dict, execute_run,
                      generate_instance_file, load_config)

_GEN_PARAMS = {
    "phase_retrieval": (("n_samples", int, 50), ("dim", int, 10),
                        ("seed", int, 0), ("noise", float, 0.0),
                        ("h_choice", str, "ball"), ("radius", float, 2.0)),
    "hybrid_synthetic": (("dim", int, 10), ("seed", int, 0),
                         ("smooth_weight", float, 1.0),
                         ("kink_count", int, 8), ("radius", float, 5.0),
                         ("kink_scale", float, 0.3)),
}


def _add_run_flags(p):
    p.add_argument("--config", help="YAML run config; flags override it")
    p.add_argument("--instance", help="instance JSON file")
    p.add_argument("--solver", choices=["pbf-onecut", "pbf-twocut",
                                        "pbf-multicut", "ps"])
    p.add_argument("--rho", type=float, help="Moreau tolerance preset")
    p.add_argument("--eta-bar", type=float, dest="eta_bar")
    p.add_argument("--eps-bar", type=float, dest="eps_bar")
    p.add_argument("--lambda", type=float, dest="lam", help="prox stepsize")
    p.add_argument("--gamma-chi", type=float, dest="gamma_chi")
    p.add_argument("--max-cuts", type=int, dest="max_cuts")
    p.add_argument("--subproblem-tol", type=float, dest="subproblem_tol")
    p.add_argument("--reset-policy", choices=["fresh", "shifted-max"],
                   dest="reset_policy")
    p.add_argument("--audit-mode", choices=["warn", "fail", "off"],
                   dest="audit_mode")
    p.add_argument("--max-total-iters", type=int, dest="max_total_iters")
    p.add_argument("--ps-gamma", type=float, dest="ps_gamma")
    p.add_argument("--ps-T", type=int, dest="ps_T")
    p.add_argument("--ps-m-bar", type=float, dest="ps_m_bar")
    p.add_argument("--verify-moreau", action="store_true", default=None,
                   dest="verify_moreau")
    p.add_argument("--timing", action="store_true", default=None)
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--trace", dest="trace_file")
    p.add_argument("--summary", dest="summary_file")


def _config_from_args(args):
    if args.config:
        cfg = load_config(args.config)
    else:
        if not args.solver:
            raise ConfigError("a solver is required (flag or config file)")
        cfg = RunConfig(solver=args.solver, instance=args.instance)
    for name in ("instance", "solver", "rho", "eta_bar", "eps_bar", "lam",
                 "gamma_chi", "max_cuts", "subproblem_tol", "reset_policy",
                 "audit_mode", "max_total_iters", "ps_gamma", "ps_T",
                 "ps_m_bar", "verify_moreau", "timing", "out_dir",
                 "trace_file", "summary_file"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    return cfg.validate()


def main(argv=None):
    parser = argparse.ArgumentParser(prog="proxbundle", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="execute one solver run")
    _add_run_flags(p_run)

    p_gen = sub.add_parser("gen", help="generate an instance JSON file")
    p_gen.add_argument("--generator", required=True,
                       choices=list(_GEN_PARAMS))
    p_gen.add_argument("--out", required=True)
    for gname, specs in _GEN_PARAMS.items():
        for pname, ptype, default in specs:
            flag = "--" + pname.replace("_", "-")
            if not any(a.dest == pname for a in p_gen._actions):
                p_gen.add_argument(flag, type=ptype, default=None, dest=pname)

    p_cmp = sub.add_parser("compare", help="run several configs and tabulate")
    p_cmp.add_argument("configs", nargs="+", help="YAML run config files")
    p_cmp.add_argument("--out", help="comparison table CSV path")

    p_audit = sub.add_parser("audit", help="re-check audits from a trace CSV")
    p_audit.add_argument("trace", help="trace CSV file")

    args = parser.parse_args(argv)
    try:
        if args.verb == "run":
            cfg = _config_from_args(args)
            art = execute_run(cfg)
            print(json.dumps({"status": art.summary.get("status"),
                              "iterations": art.summary.get("iterations"),
                              "exit_code": art.exit_code,
                              "trace": art.trace_path,
                              "summary": art.summary_path}, indent=2))
            return art.exit_code
        if args.verb == "gen":
            specs = _GEN_PARAMS[args.generator]
            params = {}
            for pname, _, default in specs:
                value = getattr(args, pname)
                params[pname] = default if value is None else value
            inst = generate_instance_file(args.generator, args.out, **params)
            print(f"wrote {args.out}: {inst.name} "
                  f"(m={inst.problem.m:.6g}, M={inst.problem.f.M:.6g}, "
                  f"L={inst.problem.f.L:.6g})")
            return 0
        if args.verb == "compare":
            cfgs = [load_config(path) for path in args.configs]
            rows = compare_runs(cfgs, out_csv=args.out)
            for row in rows:
                print(json.dumps(row))
            return 0
        if args.verb == "audit":
            code, report = audit_trace_file(args.trace)
            for r in report:
                print(f"{r.name}: {r.status}"
                      + (f" ({r.detail})" if r.detail else ""))
            return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ProxBundleError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())

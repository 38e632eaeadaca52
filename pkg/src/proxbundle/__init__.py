"""Proximal bundle solvers for weakly convex composite optimization.

Solves min f(x) + h(x) where f is m-weakly convex with an (M, L)-hybrid
first-order oracle and h is a simple convex term with an exact prox.  The
main solver runs bundle cycles over a convexified model, emits verifiable
regularized stationarity certificates, and audits its own per-iteration
inequalities at runtime.  A deterministic proximal subgradient baseline,
benchmark instance generators, and a CLI harness round out the package.
"""

from .baseline_ps import PsParams, make_ps_params, ps_iteration_count, ps_run
from .bundle import (BundleModel, Cut, ResetPolicy, Scheme, eval_model,
                     initial_model, null_update, serious_reset)
from .errors import (AuditError, BudgetExhaustedError, DegenerateActiveSetError,
                     DomainError, InnerSolveError, ParameterError,
                     ProxBundleError, SubproblemError)
from .oracles import (HybridOracle, Linearization, Problem, linearize, phi,
                      phi_mod, regularized_linearize)
from .pbf import (PbfParams, RunResult, SeriousRecord, complexity_budget,
                  corollary_tolerances, derive_params, run,
                  serious_step_bound, t_bar_bound)
from .problems import Instance, gen_hybrid_synthetic, gen_phase_retrieval
from .proxstep import ProxSolution, solve_prox
from .simple_terms import (BallIndicator, BoxIndicator, L1, SimpleTerm, Zero,
                           eval_h, prox_h)
from .stationarity import (DirectionalCert, MoreauCert, RegularizedCert,
                           directional_to_moreau, moreau_oracle,
                           moreau_to_directional, regularized_to_directional,
                           regularized_to_moreau_bound)

__version__ = "0.1.0"

__all__ = [
    "AuditError", "BallIndicator", "BoxIndicator", "BudgetExhaustedError",
    "BundleModel", "Cut", "DegenerateActiveSetError", "DirectionalCert",
    "DomainError", "HybridOracle", "InnerSolveError", "Instance", "L1",
    "Linearization", "MoreauCert", "ParameterError", "PbfParams", "Problem",
    "ProxBundleError", "ProxSolution", "PsParams", "RegularizedCert",
    "ResetPolicy", "RunResult", "Scheme", "SeriousRecord", "SimpleTerm",
    "SubproblemError", "Zero", "complexity_budget", "corollary_tolerances",
    "derive_params", "directional_to_moreau", "eval_h", "eval_model",
    "gen_hybrid_synthetic", "gen_phase_retrieval", "initial_model",
    "linearize", "make_ps_params", "moreau_oracle", "moreau_to_directional",
    "null_update", "phi", "phi_mod", "prox_h", "ps_iteration_count", "ps_run",
    "regularized_linearize", "regularized_to_directional",
    "regularized_to_moreau_bound", "run", "serious_reset",
    "serious_step_bound", "solve_prox", "t_bar_bound",
]

"""Tabular constrained average-reward MDP toolkit.

Exact model-known evaluation (gain, bias, occupancy programs), a seeded
generative model, a projected-dual-descent solver with published
parameter schedules, lower-bound instance generators, and a benchmark
CLI that checks every guarantee numerically at desk scale.
"""

from .model import (
    CamdpError,
    CmdpInstance,
    EnumerationCapExceeded,
    GainBias,
    InfeasibleInstance,
    MixturePolicy,
    NumericalFailure,
    StructuralParams,
)
from .chains import (
    discounted_value,
    gain_at,
    gain_bias,
    mixture_value,
    span,
    stationary_matrix,
)
from .structure import structural_params
from .generative import (
    EmpiricalModel,
    PerturbedReward,
    build_empirical_model,
    perturb_rewards,
    sample_transition,
)
from .planner import primal_update, solve_discounted
from .oracle import (
    OccupancySolution,
    enumerate_policies,
    policy_from_occupancy,
    slater_constant,
    solve_camdp_lp,
)
from .primal_dual import (
    DualTrace,
    PrimalDualConfig,
    dual_regret,
    dual_regret_bound,
    dual_step,
    project_interval,
    relaxed_schedule,
    round_to_net,
    run_primal_dual,
    strict_schedule,
)

__all__ = [
    "CamdpError",
    "CmdpInstance",
    "DualTrace",
    "EmpiricalModel",
    "EnumerationCapExceeded",
    "GainBias",
    "InfeasibleInstance",
    "MixturePolicy",
    "NumericalFailure",
    "OccupancySolution",
    "PerturbedReward",
    "PrimalDualConfig",
    "StructuralParams",
    "build_empirical_model",
    "discounted_value",
    "dual_regret",
    "dual_regret_bound",
    "dual_step",
    "enumerate_policies",
    "gain_at",
    "gain_bias",
    "mixture_value",
    "perturb_rewards",
    "policy_from_occupancy",
    "primal_update",
    "project_interval",
    "relaxed_schedule",
    "round_to_net",
    "run_primal_dual",
    "sample_transition",
    "slater_constant",
    "solve_camdp_lp",
    "solve_discounted",
    "span",
    "stationary_matrix",
    "strict_schedule",
    "structural_params",
]

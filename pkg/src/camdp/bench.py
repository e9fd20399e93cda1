"""Single-solve pipeline and the desk-scale parameter instantiation.

A solve runs: sample the generative model -> perturb rewards -> size the
dual loop -> run it -> evaluate the returned mixture on the *true*
model and compare to the exact optimum.

The published schedules prescribe iteration counts that explode at desk
scale (their dual bound U carries a spurious 1/(1-gamma) and the strict
threshold shift shrinks with (1-gamma)), so by default the solver keeps
the schedule's outer parameters (gamma, omega, threshold shift) but
instantiates the inner loop the way the convergence theorem allows when
the empirical multiplier is known exactly: U = max(2 lambda_hat, 1)
with lambda_hat from the occupancy program on the empirical model,
T = ceil(U^2/eps_opt^2 (1 + 1/(U - lambda_hat)^2)) capped at a ceiling,
eps_net = eps_opt^2 (U - lambda_hat)/(6U), eta = U/sqrt(T).  The strict
threshold shift is floored at a multiple of the sampling noise scale
1/sqrt(N), without which zero-violation output is unattainable at
desk-scale N.  Pass paper_params=True to run the schedules verbatim.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, replace

import numpy as np

from . import chains, oracle, primal_dual, structure
from .generative import build_empirical_model, perturb_rewards
from .model import CmdpInstance, InfeasibleInstance, StructuralParams
from .primal_dual import PrimalDualConfig, relaxed_schedule, run_primal_dual, strict_schedule

T_CEILING = 10_000_000
STRICT_SHIFT_SCALE = 4.0  # threshold tightening floor, in units of 1/sqrt(N)


@dataclass
class SolveReport:
    """One solve's outcome, evaluated against the true model."""

    mode: str
    epsilon: float
    n_samples: int
    seed: int
    total_samples: int
    rho_hat: float          # mixture's true average reward at the start
    rho_star: float         # exact constrained optimum of the true model
    gap: float              # rho_star - rho_hat
    constraint_value: float  # mixture's true constraint average
    violation: float        # max(0, b - constraint_value)
    T: int
    wall_ms: float
    status: str             # "ok" or "truncated"

    def objective_met(self) -> bool:
        if self.mode == "strict":
            return self.gap <= self.epsilon and self.violation == 0.0
        return self.gap <= self.epsilon and self.violation <= self.epsilon

    def to_json(self) -> str:
        d = dict(self.__dict__)
        return json.dumps(d)


def default_bench_instance() -> CmdpInstance:
    """The fixed 4-state, 3-action benchmark instance.

    Action 0 chases reward, action 1 protects the constraint, action 2
    sits in between; every kernel row has full support, so every policy
    is unichain and aperiodic.  The constraint binds at the optimum
    (the optimal occupancy mixes actions on the threshold face) with a
    moderate multiplier, and the feasibility margin is about 0.35.
    """
    drift = 0.55
    rest = (1.0 - drift) / 4.0
    S, A = 4, 3
    kernel = np.full((S, A, S), rest)
    targets = {0: lambda s: (s + 1) % S, 1: lambda s: (s + 2) % S, 2: lambda s: s}
    for s in range(S):
        for a in range(A):
            kernel[s, a, targets[a](s)] += drift
    reward = np.array([
        [0.95, 0.30, 0.62],
        [0.80, 0.25, 0.55],
        [0.88, 0.35, 0.60],
        [0.72, 0.20, 0.50],
    ])
    constraint = np.array([
        [0.20, 0.92, 0.55],
        [0.30, 0.88, 0.50],
        [0.25, 0.90, 0.52],
        [0.15, 0.86, 0.48],
    ])
    return CmdpInstance(
        n_states=S, n_actions=A, kernel=kernel, reward=reward,
        constraint=constraint, threshold=0.55,
        start=np.array([0.4, 0.3, 0.2, 0.1]),
    )


def random_instance(seed: int, n_states: int = 4, n_actions: int = 3,
                    zeta: float = 0.3) -> CmdpInstance:
    """Seeded random feasible instance with feasibility margin about zeta.

    Dirichlet kernel rows with full support (so every policy is unichain
    and aperiodic), uniform rewards and constraint values away from the
    boundary, and a threshold placed zeta below the best achievable
    constraint gain.
    """
    rng = np.random.default_rng(seed)
    kernel = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    kernel = 0.9 * kernel + 0.1 / n_states  # keep rows bounded away from zero
    kernel /= kernel.sum(axis=2, keepdims=True)
    reward = rng.uniform(0.05, 0.95, size=(n_states, n_actions))
    constraint = rng.uniform(0.05, 0.95, size=(n_states, n_actions))
    start = rng.dirichlet(np.ones(n_states))
    inst = CmdpInstance(
        n_states=n_states, n_actions=n_actions, kernel=kernel,
        reward=reward, constraint=constraint, threshold=0.5, start=start,
    )
    best_c = oracle.unconstrained_optimum(inst, reward="c")
    threshold = float(np.clip(best_c - zeta, 0.02, 0.98))
    return replace(inst, threshold=threshold)


def theorem1_config(emp_instance: CmdpInstance, r_p_values, b_prime: float,
                    eps_opt: float, seed: int = 0):
    """Dual-loop sizing of the convergence theorem with the exact multiplier.

    Solves the empirical occupancy program at b_prime for lambda*, then
    sets U = max(2 lambda*, 1), T = ceil(U^2/eps_opt^2 (1 + 1/(U-lambda*)^2)),
    eps_net = eps_opt^2 (U - lambda*)/(6 U), eta = U/sqrt(T).  Returns
    (config, lambda*, empirical optimum).
    """
    sol = oracle.solve_camdp_lp(emp_instance, threshold_override=b_prime,
                                reward=r_p_values)
    if sol.status != "optimal":
        raise InfeasibleInstance("empirical program infeasible at b_prime")
    lam_star = sol.dual_lambda
    U = max(2.0 * lam_star, 1.0)
    T = math.ceil(U * U / eps_opt**2 * (1.0 + 1.0 / (U - lam_star) ** 2))
    config = PrimalDualConfig(
        U=U,
        eta=U / math.sqrt(T),
        T=T,
        eps_net=eps_opt**2 * (U - lam_star) / (6.0 * U),
        omega=0.0,
        b_prime=b_prime,
        gamma=0.99,  # unused by an exact planner; required to be in (0, 1)
        eps_opt=eps_opt,
        seed=seed,
        mode="manual",
        lambda_bar=lam_star,
    )
    return config, lam_star, sol.objective


def practical_config(mode: str, instance: CmdpInstance, empirical, r_p,
                     epsilon: float, params: StructuralParams, seed: int,
                     t_ceiling: int = T_CEILING):
    """Desk-scale loop sizing; returns (config, truncated).

    Keeps the schedule's gamma / omega / threshold shift, then sizes
    (U, T, eps_net, eta) from the exact empirical multiplier.
    """
    b = instance.threshold
    if mode == "relaxed":
        sched = relaxed_schedule(epsilon, params.B, params.H, b, seed=seed)
        b_prime = sched.b_prime
        eps_opt = sched.eps_opt
        fallback_bound = 2.0 * (1.0 + sched.omega) / (3.0 * epsilon / 8.0)
    elif mode == "strict":
        sched = strict_schedule(epsilon, params.B, params.H, params.zeta, b, seed=seed)
        shift = max(sched.b_prime - b, STRICT_SHIFT_SCALE / math.sqrt(empirical.samples_per_pair))
        shift = min(shift, params.zeta / 4.0)
        b_prime = b + shift
        eps_opt = shift / 5.0
        fallback_bound = 2.0 * (1.0 + sched.omega) / params.zeta
    else:
        raise ValueError(f"unknown mode {mode!r}")

    emp_instance = empirical.as_instance(instance)
    emp_sol = oracle.solve_camdp_lp(emp_instance, threshold_override=b_prime,
                                    reward=r_p.values)
    if emp_sol.status == "optimal":
        lam_hat = emp_sol.dual_lambda
    else:
        lam_hat = fallback_bound  # empirical program infeasible at b'
    U = min(sched.U, max(2.0 * lam_hat, 1.0))
    lam_bar = min(lam_hat, U / 2.0)
    T_want = math.ceil(U * U / eps_opt**2 * (1.0 + 1.0 / (U - lam_bar) ** 2))
    T = min(T_want, t_ceiling)
    eps_net = eps_opt**2 * (U - lam_bar) / (6.0 * U)
    eta = U / math.sqrt(T)
    config = PrimalDualConfig(
        U=U, eta=eta, T=T, eps_net=eps_net, omega=sched.omega,
        b_prime=b_prime, gamma=sched.gamma, eps_opt=eps_opt,
        seed=seed, mode=mode, lambda_bar=lam_bar,
        provenance={
            **sched.provenance,
            "U": "min(schedule U, max(2 lambda_hat_emp, 1))",
            "T": "min(ceil(U^2/eps_opt^2 (1+1/(U-lambda_bar)^2)), ceiling)",
            "eps_net": "eps_opt^2 (U - lambda_bar)/(6U)",
            "lambda_bar": "empirical occupancy-program dual",
        },
    )
    return config, T_want > t_ceiling


def run_solve(instance: CmdpInstance, mode: str, epsilon: float, n_samples: int,
              seed: int, *, t_ceiling: int = T_CEILING, paper_params: bool = False,
              params: StructuralParams | None = None,
              rho_star: float | None = None) -> SolveReport:
    """Full pipeline on one (instance, mode, epsilon, N, seed) cell."""
    t0 = time.perf_counter()
    if params is None:
        params = structure.structural_params(instance)
    if mode == "strict" and params.zeta <= 0:
        raise InfeasibleInstance(
            f"zero-violation mode needs a positive feasibility margin, got {params.zeta}"
        )
    if rho_star is None:
        true_sol = oracle.solve_camdp_lp(instance)
        if true_sol.status != "optimal":
            raise InfeasibleInstance("instance is infeasible at its own threshold")
        rho_star = true_sol.objective

    empirical = build_empirical_model(instance, n_samples, seed)
    if mode == "relaxed":
        sched = relaxed_schedule(epsilon, params.B, params.H, instance.threshold, seed=seed)
    else:
        sched = strict_schedule(epsilon, params.B, params.H, params.zeta,
                                instance.threshold, seed=seed)
    r_p = perturb_rewards(instance.reward, sched.omega, seed)

    if paper_params:
        truncated = sched.T > t_ceiling
        config = sched if not truncated else replace(
            sched, T=t_ceiling, eta=sched.U / math.sqrt(t_ceiling)
        )
    else:
        config, truncated = practical_config(
            mode, instance, empirical, r_p, epsilon, params, seed, t_ceiling
        )

    mixture, _trace = run_primal_dual(empirical, r_p, instance, config)
    rho_hat = chains.mixture_value(mixture, instance, "r")
    c_val = chains.mixture_value(mixture, instance, "c")
    wall_ms = (time.perf_counter() - t0) * 1000.0
    return SolveReport(
        mode=mode,
        epsilon=epsilon,
        n_samples=n_samples,
        seed=seed,
        total_samples=empirical.total_samples,
        rho_hat=rho_hat,
        rho_star=rho_star,
        gap=rho_star - rho_hat,
        constraint_value=c_val,
        violation=max(0.0, instance.threshold - c_val),
        T=config.T,
        wall_ms=wall_ms,
        status="truncated" if truncated else "ok",
    )

"""Dual machinery: epsilon-net, projected gradient step, the main loop,
mixture assembly, and the published parameter schedules.

The dual iterate lives on the net {0, eps_net, 2 eps_net, ...} inside
[0, U]; each iteration asks the planner for the combined-reward policy
at the current multiplier, evaluates that policy's constraint gain
exactly under the *empirical* kernel, and takes a projected, rounded
gradient step.  The uniform average of the iterate policies is the
returned mixture; iterates repeat heavily, so policies are deduplicated
and the mixture weight of a policy is its visit frequency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import chains, oracle, planner
from .model import CmdpInstance, MixturePolicy, deterministic_to_stochastic

TRACE_CAP = 2_000_000


def project_interval(x: float, U: float) -> float:
    """Clip to [0, U]."""
    if U <= 0:
        raise ValueError("U must be positive")
    return min(max(x, 0.0), U)


def round_to_net(x: float, eps_net: float, U: float) -> float:
    """Nearest point of {0, eps_net, 2 eps_net, ...} inside [0, U]; ties down."""
    if x < 0.0 or x > U:
        raise ValueError("round_to_net expects x in [0, U]; project first")
    k = math.ceil(x / eps_net - 0.5)
    k_max = math.floor(U / eps_net + 1e-9)
    if k_max * eps_net > U:
        k_max -= 1
    k = min(max(k, 0), k_max)
    return k * eps_net


def dual_step(lam: float, eta: float, rho_c_hat: float, b_prime: float,
              U: float, eps_net: float) -> float:
    """One projected, net-rounded gradient step on the dual variable."""
    return round_to_net(project_interval(lam - eta * (rho_c_hat - b_prime), U), eps_net, U)


@dataclass
class PrimalDualConfig:
    """All knobs of one dual-descent run, with the formula behind each value.

    mode is "relaxed", "strict", or "manual"; provenance maps field names
    to the formula (as a string) that produced them.
    """

    U: float
    eta: float
    T: int
    eps_net: float
    omega: float
    b_prime: float
    gamma: float
    eps_opt: float
    seed: int = 0
    mode: str = "manual"
    lambda_bar: float | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.U > 0):
            raise ValueError("U must be positive")
        if not (0 < self.eps_net <= self.U):
            raise ValueError("eps_net must lie in (0, U]")
        if not (self.eta > 0):
            raise ValueError("eta must be positive")
        if not (self.T >= 1):
            raise ValueError("T must be at least 1")
        if not (0 < self.gamma < 1):
            raise ValueError("gamma must lie in (0, 1)")
        if not (-1.0 <= self.b_prime <= 2.0):
            raise ValueError("b_prime must lie in [-1, 2]")


@dataclass
class DualTrace:
    """Per-iteration record of the dual loop.

    Stores (lambda_t, policy id, empirical constraint gain, empirical
    combined gain) for iterations up to a storage cap, plus exact
    running aggregates that remain valid however long the run is:
    sum_gap = sum_t (rho_c_hat_t - b'), sum_lambda_gap = sum_t
    lambda_t (rho_c_hat_t - b').
    """

    lambdas: np.ndarray
    policy_ids: np.ndarray
    rho_c_hat: np.ndarray
    rho_combined_hat: np.ndarray
    b_prime: float
    U: float
    t_total: int
    sum_gap: float
    sum_lambda_gap: float
    stored: int

    def to_csv(self, path):
        header = "iter,lambda,rho_c_hat,rho_combined_hat,policy_id\n"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(header)
            for t in range(self.stored):
                fh.write(
                    f"{t},{self.lambdas[t]!r},{self.rho_c_hat[t]!r},"
                    f"{self.rho_combined_hat[t]!r},{self.policy_ids[t]}\n"
                )


def dual_regret(trace: DualTrace, lam: float, b_prime: float | None = None) -> float:
    """Comparator regret sum_t (lambda_t - lam)(rho_c_hat_t - b')."""
    if b_prime is None:
        b_prime = trace.b_prime
    if trace.t_total == 0:
        return 0.0
    if trace.stored == trace.t_total and b_prime == trace.b_prime:
        gaps = trace.rho_c_hat[: trace.stored] - b_prime
        return float(np.dot(trace.lambdas[: trace.stored] - lam, gaps))
    if b_prime != trace.b_prime:
        raise ValueError("aggregate trace only supports the run's own b'")
    return trace.sum_lambda_gap - lam * trace.sum_gap


def dual_regret_bound(config: PrimalDualConfig) -> float:
    """Upper bound T^{3/2} (eps^2 + 2 eps U) / (2U) + U sqrt(T) on the regret."""
    T, eps, U = config.T, config.eps_net, config.U
    return T**1.5 * (eps * eps + 2.0 * eps * U) / (2.0 * U) + U * math.sqrt(T)


def vi_policy_oracle(kernel_hat, r_p_values, c_values, gamma, tol):
    """Planner callable lam -> policy, warm-starting VI across calls."""
    store = {"V": None}

    def plan(lam: float):
        pol, V = planner.primal_update(
            kernel_hat, r_p_values, c_values, lam, gamma, tol, v_init=store["V"]
        )
        store["V"] = V
        return pol

    return plan


def exact_policy_oracle(emp_instance: CmdpInstance, r_p_values, cap=oracle.ENUM_CAP):
    """Exact combined-reward planner by full policy enumeration.

    Precomputes every deterministic policy's perturbed-reward gain and
    constraint gain at the start under the empirical kernel; each call
    is then an argmax of r + lam c over those scalars (ties to the
    lexicographically smallest policy).
    """
    pols, g_r, g_c = [], [], []
    for pol in oracle.iter_deterministic_policies(
        emp_instance.n_states, emp_instance.n_actions, cap
    ):
        pols.append(pol)
        g_r.append(float(emp_instance.start @ chains.gain_bias(pol, emp_instance, r_p_values).gain))
        g_c.append(float(emp_instance.start @ chains.gain_bias(pol, emp_instance, "c").gain))
    g_r = np.array(g_r)
    g_c = np.array(g_c)

    def plan(lam: float):
        return pols[int(np.argmax(g_r + lam * g_c))]

    return plan


def run_primal_dual(
    empirical,
    r_p,
    instance: CmdpInstance,
    config: PrimalDualConfig,
    policy_oracle=None,
    planner_tol: float | None = None,
    trace_cap: int = TRACE_CAP,
):
    """Run T primal updates and T dual steps; return (mixture, trace).

    empirical is an EmpiricalModel, r_p a PerturbedReward, and instance
    the true model (used only for its rewards/constraint/start; all
    evaluation inside the loop happens under the empirical kernel).
    policy_oracle overrides the default warm-started VI planner; it must
    map a multiplier to a deterministic policy.  Deterministic given its
    inputs.
    """
    emp_instance = empirical.as_instance(instance)
    c_values = instance.constraint
    if policy_oracle is None:
        tol = planner_tol if planner_tol is not None else config.eps_opt / 8.0
        policy_oracle = vi_policy_oracle(
            empirical.kernel_hat, r_p.values, c_values, config.gamma, tol
        )

    start = instance.start
    T, eta, U, eps_net, b_prime = config.T, config.eta, config.U, config.eps_net, config.b_prime

    by_lambda = {}       # lam -> (policy id, rho_c_hat, rho_rp_hat)
    policy_ids = {}      # policy bytes -> id
    policies = []        # id -> deterministic policy
    policy_gains = []    # id -> (rho_c_hat, rho_rp_hat) under the empirical kernel

    def lookup(lam):
        entry = by_lambda.get(lam)
        if entry is None:
            pol = policy_oracle(lam)
            key = pol.tobytes()
            pid = policy_ids.get(key)
            if pid is None:
                pid = len(policies)
                policy_ids[key] = pid
                policies.append(pol)
                policy_gains.append((
                    float(start @ chains.gain_bias(pol, emp_instance, "c").gain),
                    float(start @ chains.gain_bias(pol, emp_instance, r_p.values).gain),
                ))
            rho_c, rho_rp = policy_gains[pid]
            entry = (pid, rho_c, rho_rp)
            by_lambda[lam] = entry
        return entry

    # The dual map lam -> dual_step(lam, ...) is a pure function, so the
    # first revisited multiplier starts an exactly periodic tail; the
    # remaining iterations are aggregated in closed form instead of
    # being stepped through one by one.  Runs that reach the explicit
    # budget without cycling fall back to a plain loop with running
    # aggregates only.
    first_seen = {}
    hist_lam, hist_pid, hist_rhoc, hist_rhorp = [], [], [], []
    lam = 0.0
    cycle_from = None
    t = 0
    explicit_budget = min(T, max(trace_cap, 1024))
    while t < explicit_budget:
        prev = first_seen.get(lam)
        if prev is not None:
            cycle_from = prev
            break
        first_seen[lam] = t
        pid, rho_c, rho_rp = lookup(lam)
        hist_lam.append(lam)
        hist_pid.append(pid)
        hist_rhoc.append(rho_c)
        hist_rhorp.append(rho_rp)
        lam = dual_step(lam, eta, rho_c, b_prime, U, eps_net)
        t += 1

    hist_lam = np.array(hist_lam)
    hist_pid = np.array(hist_pid, dtype=np.int64)
    hist_rhoc = np.array(hist_rhoc)
    hist_rhorp = np.array(hist_rhorp)
    gaps = hist_rhoc - b_prime

    tail_visits = {}
    tail_sum_gap = 0.0
    tail_sum_lambda_gap = 0.0
    if cycle_from is None and t < T:
        # no cycle inside the budget: finish with aggregates only
        while t < T:
            pid, rho_c, rho_rp = lookup(lam)
            tail_visits[pid] = tail_visits.get(pid, 0) + 1
            gap = rho_c - b_prime
            tail_sum_gap += gap
            tail_sum_lambda_gap += lam * gap
            lam = dual_step(lam, eta, rho_c, b_prime, U, eps_net)
            t += 1

    n_pol = len(policies)
    if cycle_from is None:
        visits = np.bincount(hist_pid, minlength=n_pol).astype(np.float64)
        for pid, n in tail_visits.items():
            visits[pid] += n
        sum_gap = float(gaps.sum()) + tail_sum_gap
        sum_lambda_gap = float(hist_lam @ gaps) + tail_sum_lambda_gap
        tiles = None
    else:
        L = t - cycle_from
        remaining = T - t
        full, rem = divmod(remaining, L)
        pre = slice(0, cycle_from)
        cyc = slice(cycle_from, t)
        visits = (
            np.bincount(hist_pid[pre], minlength=n_pol)
            + (full + 1) * np.bincount(hist_pid[cyc], minlength=n_pol)
            + np.bincount(hist_pid[cycle_from : cycle_from + rem], minlength=n_pol)
        ).astype(np.float64)
        sum_gap = float(
            gaps[pre].sum() + (full + 1) * gaps[cyc].sum()
            + gaps[cycle_from : cycle_from + rem].sum()
        )
        sum_lambda_gap = float(
            hist_lam[pre] @ gaps[pre]
            + (full + 1) * (hist_lam[cyc] @ gaps[cyc])
            + hist_lam[cycle_from : cycle_from + rem] @ gaps[cycle_from : cycle_from + rem]
        )
        tiles = (cycle_from, t, full, rem)

    store = T <= trace_cap
    if store and tiles is not None:
        def unroll(arr):
            c0, c1, full, rem = tiles
            return np.concatenate(
                [arr[:c1], np.tile(arr[c0:c1], full), arr[c0 : c0 + rem]]
            )
        hist_lam = unroll(hist_lam)
        hist_pid = unroll(hist_pid)
        hist_rhoc = unroll(hist_rhoc)
        hist_rhorp = unroll(hist_rhorp)
    stored = len(hist_lam) if store else 0

    weights = visits / T
    members = [deterministic_to_stochastic(p, instance.n_actions) for p in policies]
    mixture = MixturePolicy(weights=weights, members=members)
    trace = DualTrace(
        lambdas=hist_lam if store else hist_lam[:0],
        policy_ids=hist_pid if store else hist_pid[:0],
        rho_c_hat=hist_rhoc if store else hist_rhoc[:0],
        rho_combined_hat=(hist_rhorp + hist_lam * hist_rhoc) if store else hist_rhoc[:0],
        b_prime=b_prime,
        U=U,
        t_total=T,
        sum_gap=sum_gap,
        sum_lambda_gap=sum_lambda_gap,
        stored=stored,
    )
    return mixture, trace


def _effective_horizon(B: float, H: float) -> float:
    # Degenerate instances (B + H near 0) still need a discount in (0, 1).
    return max(B + H, 0.5)


def relaxed_schedule(epsilon: float, B: float, H: float, b: float, seed: int = 0) -> PrimalDualConfig:
    """Parameter schedule for the epsilon-violation regime.

    Loosens the threshold to b' = b - 3 eps / 8 and sizes the dual loop
    so the end-to-end reward gap and constraint violation are both at
    most eps given enough samples.
    """
    if not (0 < epsilon <= 1):
        raise ValueError("epsilon must lie in (0, 1]")
    eps_opt = epsilon / 4.0
    one_minus_gamma = eps_opt / (4.0 * _effective_horizon(B, H))
    gamma = 1.0 - one_minus_gamma
    omega = epsilon * one_minus_gamma / 8.0
    U = 32.0 / (5.0 * epsilon * one_minus_gamma)
    eps_net = epsilon**2 * one_minus_gamma**2 / 96.0
    lambda_bar = U / 2.0
    T = math.ceil(
        4.0 * U * U / (eps_opt**2 * one_minus_gamma**2) * (1.0 + 1.0 / (U - lambda_bar) ** 2)
    )
    eta = U / math.sqrt(T)
    return PrimalDualConfig(
        U=U, eta=eta, T=T, eps_net=eps_net, omega=omega,
        b_prime=b - 3.0 * epsilon / 8.0, gamma=gamma, eps_opt=eps_opt,
        seed=seed, mode="relaxed", lambda_bar=lambda_bar,
        provenance={
            "eps_opt": "eps/4",
            "gamma": "1 - eps_opt/(4(B+H))",
            "omega": "eps(1-gamma)/8",
            "b_prime": "b - 3 eps/8",
            "U": "32/(5 eps (1-gamma))",
            "eps_net": "eps^2 (1-gamma)^2 / 96",
            "T": "ceil(4U^2/(eps_opt^2 (1-gamma)^2) (1 + 1/(U-lambda_bar)^2)), lambda_bar=U/2",
            "eta": "U/sqrt(T)",
        },
    )


def strict_schedule(epsilon: float, B: float, H: float, zeta: float, b: float,
                    seed: int = 0) -> PrimalDualConfig:
    """Parameter schedule for the zero-violation regime.

    Tightens the threshold to b' = b + Delta with Delta =
    eps (1-gamma) zeta / 40, so sampling error cannot push the returned
    policy below the true threshold.  Requires a strictly positive
    feasibility margin.  The discount anchor uses eps/4 in place of the
    downstream eps_opt: the published choice gamma = 1 - eps_opt/(4(B+H))
    is circular here because eps_opt itself depends on 1 - gamma.
    """
    if not (0 < epsilon <= 1):
        raise ValueError("epsilon must lie in (0, 1]")
    if zeta <= 0:
        raise ValueError("the strict regime requires a positive feasibility margin")
    one_minus_gamma = (epsilon / 4.0) / (4.0 * _effective_horizon(B, H))
    gamma = 1.0 - one_minus_gamma
    delta = epsilon * one_minus_gamma * zeta / 40.0
    eps_opt = delta / 5.0
    omega = epsilon * one_minus_gamma / 10.0
    U = 8.0 / (zeta * one_minus_gamma)
    eps_net = epsilon**2 * zeta**2 * one_minus_gamma**4 / 240_000.0
    lambda_bar = U / 2.0
    T = math.ceil(
        4.0 * U * U / (eps_opt**2 * one_minus_gamma**2) * (1.0 + 1.0 / (U - lambda_bar) ** 2)
    )
    eta = U / math.sqrt(T)
    return PrimalDualConfig(
        U=U, eta=eta, T=T, eps_net=eps_net, omega=omega,
        b_prime=b + delta, gamma=gamma, eps_opt=eps_opt,
        seed=seed, mode="strict", lambda_bar=lambda_bar,
        provenance={
            "gamma": "1 - (eps/4)/(4(B+H)) (anchor; published form is circular)",
            "delta": "eps (1-gamma) zeta / 40",
            "b_prime": "b + delta",
            "eps_opt": "delta/5",
            "omega": "eps(1-gamma)/10",
            "U": "8/(zeta (1-gamma))",
            "eps_net": "eps^2 zeta^2 (1-gamma)^4 / 240000",
            "T": "ceil(4U^2/(eps_opt^2 (1-gamma)^2) (1 + 1/(U-lambda_bar)^2)), lambda_bar=U/2",
            "eta": "U/sqrt(T)",
        },
    )

"""Exact ground truth on small instances via occupancy-measure programs.

The default program is the two-block average-reward formulation that is
correct for multichain instances: long-run occupancies mu plus auxiliary
flows nu that route the initial mass into recurrent classes,

    sum_a mu(j,a) - sum_{s,a} P(j|s,a) mu(s,a)                  = 0
    sum_a mu(j,a) + sum_a nu(j,a) - sum_{s,a} P(j|s,a) nu(s,a)  = start(j)
    sum_{s,a} c(s,a) mu(s,a)                                    >= b

maximizing sum mu.r.  Summing the second block gives sum mu = 1, so no
separate normalization row is needed.  A unichain variant (flow
conservation plus an explicit normalization, no nu block) is available
as a fast path.  The multiplier of the constraint row is the optimal
dual variable lambda*.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from . import chains
from .model import CmdpInstance, EnumerationCapExceeded, NumericalFailure
from .simplex import solve_lp_max

ENUM_CAP = 10**6


@dataclass
class OccupancySolution:
    """LP solution: occupancy mu, objective, constraint value, dual lambda*.

    dual_objective is y.b from the final basis; it equals the primal
    objective whenever the solve is sound (strong duality).
    """

    mu: np.ndarray | None
    objective: float | None
    constraint_value: float | None
    dual_lambda: float | None
    status: str  # "optimal" or "infeasible"
    dual_objective: float | None = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "mu": None if self.mu is None else self.mu.tolist(),
                "objective": self.objective,
                "lambda": self.dual_lambda,
                "constraint_value": self.constraint_value,
                "status": self.status,
            }
        )


def _occupancy_rows(instance: CmdpInstance, variant: str):
    """Equality rows (A, b) over the LP variables, constraint row excluded.

    Variables are mu flattened (S*A) for "unichain", [mu, nu] (2*S*A)
    for "multichain".  Returns (A, b, n_vars).
    """
    S, A_n = instance.n_states, instance.n_actions
    n_sa = S * A_n
    # flow[j, (s,a)] = 1{s == j} - P(j|s,a)
    flow = np.zeros((S, n_sa))
    P_flat = instance.kernel.reshape(n_sa, S)
    for j in range(S):
        flow[j, :] = -P_flat[:, j]
    for s in range(S):
        flow[s, s * A_n : (s + 1) * A_n] += 1.0
    if variant == "unichain":
        rows = np.vstack([flow, np.ones((1, n_sa))])
        rhs = np.concatenate([np.zeros(S), [1.0]])
        return rows, rhs, n_sa
    if variant == "multichain":
        top = np.hstack([flow, np.zeros((S, n_sa))])
        bottom = np.hstack([_sum_a_matrix(S, A_n), flow])
        rows = np.vstack([top, bottom])
        rhs = np.concatenate([np.zeros(S), instance.start])
        return rows, rhs, 2 * n_sa
    raise ValueError(f"unknown LP variant {variant!r}")


def _sum_a_matrix(S, A_n):
    M = np.zeros((S, S * A_n))
    for s in range(S):
        M[s, s * A_n : (s + 1) * A_n] = 1.0
    return M


def solve_camdp_lp(
    instance: CmdpInstance,
    threshold_override: float | None = None,
    variant: str = "multichain",
    reward: str | np.ndarray = "r",
) -> OccupancySolution:
    """Maximize the average reward subject to the average-constraint row.

    Returns the optimal occupancy, objective, achieved constraint value,
    and the exact dual multiplier lambda* of the constraint row.  An
    unsatisfiable constraint yields status "infeasible" (which signals a
    negative feasibility margin at that threshold).
    """
    b_rhs = instance.threshold if threshold_override is None else float(threshold_override)
    S, A_n = instance.n_states, instance.n_actions
    n_sa = S * A_n
    rows, rhs, n_vars = _occupancy_rows(instance, variant)

    r_flat = np.asarray(instance.reward_values(reward), dtype=np.float64).reshape(n_sa)
    c_flat = instance.constraint.reshape(n_sa)
    constraint_row = np.zeros(n_vars + 1)
    constraint_row[:n_sa] = c_flat
    constraint_row[-1] = -1.0  # surplus: c.mu - s = b, s >= 0

    A_full = np.vstack(
        [
            np.hstack([rows, np.zeros((rows.shape[0], 1))]),
            constraint_row[None, :],
        ]
    )
    b_full = np.concatenate([rhs, [b_rhs]])
    obj = np.zeros(n_vars + 1)
    obj[:n_sa] = r_flat

    result = solve_lp_max(obj, A_full, b_full)
    if result.status != "optimal":
        return OccupancySolution(
            mu=None, objective=None, constraint_value=None, dual_lambda=None,
            status="infeasible",
        )
    mu = result.x[:n_sa].reshape(S, A_n)
    lam = -result.duals[-1]  # surplus column sign convention
    if lam < -1e-7:
        raise NumericalFailure(f"constraint multiplier came out negative: {lam}")
    return OccupancySolution(
        mu=mu,
        objective=result.objective,
        constraint_value=float(c_flat @ result.x[:n_sa]),
        dual_lambda=max(lam, 0.0),
        status="optimal",
        dual_objective=float(result.duals @ b_full),
    )


def unconstrained_optimum(instance: CmdpInstance, reward="r",
                          variant: str = "multichain") -> float:
    """Best average value of `reward` over all policies, via the LP only."""
    S, A_n = instance.n_states, instance.n_actions
    n_sa = S * A_n
    rows, rhs, n_vars = _occupancy_rows(instance, variant)
    obj = np.zeros(n_vars)
    obj[:n_sa] = np.asarray(instance.reward_values(reward), dtype=np.float64).reshape(n_sa)
    result = solve_lp_max(obj, rows, rhs)
    if result.status != "optimal":
        raise NumericalFailure("unconstrained occupancy LP reported infeasible")
    return result.objective


def slater_constant(instance: CmdpInstance) -> float:
    """Feasibility margin: max over policies of the constraint gain, minus b."""
    return unconstrained_optimum(instance, reward="c") - instance.threshold


def policy_from_occupancy(mu: np.ndarray) -> np.ndarray:
    """Stationary policy pi(a|s) = mu(s,a) / sum_a mu(s,a).

    States with no occupancy mass get the uniform row.  Faithful (gain
    equals the LP objective) on unichain instances; on multichain
    instances transient behavior is not identified by mu.
    """
    mu = np.asarray(mu, dtype=np.float64)
    if np.any(mu < -1e-12):
        raise ValueError("occupancy entries must be nonnegative")
    mu = np.clip(mu, 0.0, None)
    S, A_n = mu.shape
    policy = np.full((S, A_n), 1.0 / A_n)
    totals = mu.sum(axis=1)
    covered = totals > 1e-12
    policy[covered] = mu[covered] / totals[covered, None]
    return policy


def iter_deterministic_policies(n_states: int, n_actions: int, cap: int = ENUM_CAP):
    """Yield all deterministic policies in lexicographic order, cap-guarded."""
    total = n_actions**n_states
    if total > cap:
        raise EnumerationCapExceeded(
            f"{total} deterministic policies exceed the cap {cap}; "
            "supply structural parameters explicitly instead of enumerating"
        )
    for actions in itertools.product(range(n_actions), repeat=n_states):
        yield np.array(actions, dtype=np.int64)


def enumerate_policies(instance: CmdpInstance, which="r", cap: int = ENUM_CAP):
    """Best deterministic policy by gain at the start distribution.

    Returns (policy, gain).  Ties go to the lexicographically smallest
    policy (strict improvement required to displace the incumbent).
    """
    best_pol, best_gain = None, -np.inf
    for pol in iter_deterministic_policies(instance.n_states, instance.n_actions, cap):
        g = float(instance.start @ chains.gain_bias(pol, instance, which).gain)
        if g > best_gain + 1e-12:
            best_pol, best_gain = pol, g
    return best_pol, best_gain


def solve_lp_with_cut(instance: CmdpInstance, cut_row: np.ndarray, cut_rhs: float,
                      sense: str, threshold_override: float | None = None,
                      variant: str = "multichain") -> OccupancySolution:
    """Constrained program plus one extra linear cut over mu.

    sense is "<=" or ">=".  Used for the near-optimal-occupancy
    diagnostics on the lower-bound instance families.
    """
    b_rhs = instance.threshold if threshold_override is None else float(threshold_override)
    S, A_n = instance.n_states, instance.n_actions
    n_sa = S * A_n
    rows, rhs, n_vars = _occupancy_rows(instance, variant)

    r_flat = instance.reward.reshape(n_sa)
    c_flat = instance.constraint.reshape(n_sa)
    n_total = n_vars + 2  # constraint surplus + cut slack
    blocks = [np.hstack([rows, np.zeros((rows.shape[0], 2))])]
    con = np.zeros(n_total)
    con[:n_sa] = c_flat
    con[n_vars] = -1.0
    blocks.append(con[None, :])
    cut = np.zeros(n_total)
    cut[:n_sa] = np.asarray(cut_row, dtype=np.float64).reshape(n_sa)
    cut[n_vars + 1] = 1.0 if sense == "<=" else -1.0
    blocks.append(cut[None, :])
    A_full = np.vstack(blocks)
    b_full = np.concatenate([rhs, [b_rhs, float(cut_rhs)]])
    obj = np.zeros(n_total)
    obj[:n_sa] = r_flat

    result = solve_lp_max(obj, A_full, b_full)
    if result.status != "optimal":
        return OccupancySolution(None, None, None, None, "infeasible")
    mu = result.x[:n_sa].reshape(S, A_n)
    return OccupancySolution(
        mu=mu,
        objective=result.objective,
        constraint_value=float(c_flat @ result.x[:n_sa]),
        dual_lambda=max(-result.duals[rows.shape[0]], 0.0),
        status="optimal",
    )

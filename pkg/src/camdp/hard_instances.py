"""Lower-bound instance families and their diagnostics.

Two generators live here.  The *general* (multichain) family builds
six-state components around one multi-action decision state: action 1
moves deterministically to an absorbing state paying 1/2, while every
other action dwells for an expected B steps and then drops into one of
two absorbing states paying 0 or 1.  Swapping the two drop
probabilities of a single designated action is the only difference
between the base instance and a perturbed one, so the families are
indistinguishable except through that one categorical row.  A master
instance glues K = (S-1)/6 components to a hub.

Reward/constraint placement.  The published description fixes the
long-run averages of each decision action, not per-step values.  With
instance-independent rewards, the unique placement reproducing those
averages exactly is r = 0 and r = 1 on the two stochastic absorbers:
if the designated action flips the drop row from ((1+x)/2, (1-x)/2) to
((1-x)/2, (1+x)/2) with x = 2*eps*zeta, its average moves from (1-x)/2
to (1+x)/2.  The same algebra forces constraint values 0 and
2*kappa/(1-x) with kappa = b - zeta - eps*zeta, which reproduces every
coefficient of the occupancy programs below.  Per-step values on
transient states are set to each action's own long-run average so the
base instance's optimal policy has bias span exactly zero; in a
designated instance the optimal span is 2*B*eps*zeta (it cannot be
exactly zero with shared rewards).

The *communicating* family replaces absorption with slow (expected D/8
step) returns inside three-state leaf components hung off a tree; it is
a best-effort reconstruction, and its exact constants are documented in
`communicating_constants`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import chains
from .model import CmdpInstance
from .simplex import solve_lp_max

HARD_B_THRESHOLD = 0.5  # constraint threshold used throughout both families


@dataclass
class GeneralHardParams:
    """Parameters of the general family master instances.

    n_states counts the hub, so n_states = 6 * n_branches + 1.  s_star
    is the designated branch (None for the base instance M0) and a_star
    in {2, ..., A} the designated decision action.
    """

    n_states: int
    n_actions: int
    B: float
    epsilon: float
    zeta: float
    s_star: int | None = None
    a_star: int | None = None

    def __post_init__(self):
        if self.n_states < 7 or (self.n_states - 1) % 6 != 0:
            raise ValueError("n_states must be 6 * n_branches + 1")
        if self.n_actions < 3:
            raise ValueError("at least 3 actions are required")
        if self.B < 1:
            raise ValueError("B must be at least 1")
        if self.epsilon < 0 or self.zeta < 0:
            raise ValueError("epsilon and zeta must be nonnegative")
        if self.epsilon * self.zeta > 0.25:
            raise ValueError("need epsilon * zeta <= 1/4")
        if self.zeta * (1.0 + self.epsilon) > HARD_B_THRESHOLD:
            raise ValueError(
                "need zeta * (1 + epsilon) <= b so constraint values stay in [0, 1]"
            )
        if (self.s_star is None) != (self.a_star is None):
            raise ValueError("s_star and a_star must be supplied together")
        if self.s_star is not None:
            if not (0 <= self.s_star < self.n_branches):
                raise ValueError("s_star out of range")
            if not (2 <= self.a_star <= self.n_actions):
                raise ValueError("a_star must lie in {2, ..., A}")

    @property
    def n_branches(self) -> int:
        return (self.n_states - 1) // 6


def _component_values(epsilon: float, zeta: float):
    """Shared reward/constraint constants of the six-state component."""
    b = HARD_B_THRESHOLD
    x = 2.0 * epsilon * zeta
    kappa = b - zeta - epsilon * zeta  # nondesignated constraint average
    c3 = 2.0 * kappa / (1.0 - x)  # constraint payout of the r = 1 absorber
    return b, x, kappa, c3


def designated_row_pair(epsilon: float, zeta: float, B: float):
    """The two categorical rows (stay, drop-to-0-payer, drop-to-1-payer).

    Returns (designated, nondesignated); only this row differs between
    the base and perturbed instances.
    """
    x = 2.0 * epsilon * zeta
    stay = 1.0 - 1.0 / B
    designated = np.array([stay, (1.0 - x) / (2.0 * B), (1.0 + x) / (2.0 * B)])
    nondesignated = np.array([stay, (1.0 + x) / (2.0 * B), (1.0 - x) / (2.0 * B)])
    return designated, nondesignated


def _fill_component(kernel, reward, constraint, base: int, A: int,
                    epsilon: float, zeta: float, B: float, a_star: int | None):
    """Write one component into the arrays; local states base .. base+5.

    Local layout: 0 root, 1 decision, 2 absorber (r=0, c=0), 3 absorber
    (r=1, c=c3), 4 absorber (r=1/2, c=b-zeta), 5 absorber (r=0, c=b+zeta).
    """
    b, x, kappa, c3 = _component_values(epsilon, zeta)
    root, dec, ab0, ab1, abhalf, abmargin = (base + i for i in range(6))
    designated, nondesignated = designated_row_pair(epsilon, zeta, B)

    # root: action 0 enters the decision state, the rest exit to the margin absorber
    kernel[root, 0, dec] = 1.0
    reward[root, 0] = 0.5
    constraint[root, 0] = b - zeta
    for a in range(1, A):
        kernel[root, a, abmargin] = 1.0
        reward[root, a] = 0.0
        constraint[root, a] = b + zeta

    # decision: action 0 is the safe move, the rest dwell-and-drop
    kernel[dec, 0, abhalf] = 1.0
    reward[dec, 0] = 0.5
    constraint[dec, 0] = b - zeta
    for a in range(1, A):
        row = designated if (a_star is not None and a == a_star - 1) else nondesignated
        kernel[dec, a, dec] = row[0]
        kernel[dec, a, ab0] = row[1]
        kernel[dec, a, ab1] = row[2]
        # per-step values match the nondesignated long-run averages
        reward[dec, a] = (1.0 - x) / 2.0
        constraint[dec, a] = kappa

    for state, r_val, c_val in (
        (ab0, 0.0, 0.0),
        (ab1, 1.0, c3),
        (abhalf, 0.5, b - zeta),
        (abmargin, 0.0, b + zeta),
    ):
        for a in range(A):
            kernel[state, a, state] = 1.0
            reward[state, a] = r_val
            constraint[state, a] = c_val


def build_general_component(a_star_or_none: int | None, A: int, B: float,
                            epsilon: float, zeta: float) -> CmdpInstance:
    """Standalone six-state component; start mass on the root state."""
    GeneralHardParams(
        n_states=7, n_actions=A, B=B, epsilon=epsilon, zeta=zeta,
        s_star=None if a_star_or_none is None else 0,
        a_star=a_star_or_none,
    )
    kernel = np.zeros((6, A, 6))
    reward = np.zeros((6, A))
    constraint = np.zeros((6, A))
    _fill_component(kernel, reward, constraint, 0, A, epsilon, zeta, B, a_star_or_none)
    start = np.zeros(6)
    start[0] = 1.0
    return CmdpInstance(
        n_states=6, n_actions=A, kernel=kernel, reward=reward,
        constraint=constraint, threshold=HARD_B_THRESHOLD, start=start,
    )


def build_general_master(params: GeneralHardParams) -> CmdpInstance:
    """Hub plus (S-1)/6 components; branch s_star carries the designated action."""
    K = params.n_branches
    A = max(params.n_actions, K)
    S = params.n_states
    kernel = np.zeros((S, A, S))
    reward = np.zeros((S, A))
    constraint = np.zeros((S, A))

    # hub: one action per branch, padded by repeating the last branch
    for a in range(A):
        branch = min(a, K - 1)
        kernel[0, a, 1 + 6 * branch] = 1.0
        reward[0, a] = 0.5
        constraint[0, a] = HARD_B_THRESHOLD

    for i in range(K):
        a_star = params.a_star if (params.s_star is not None and i == params.s_star) else None
        _fill_component(
            kernel, reward, constraint, 1 + 6 * i, A,
            params.epsilon, params.zeta, params.B, a_star,
        )
    start = np.zeros(S)
    start[0] = 1.0
    return CmdpInstance(
        n_states=S, n_actions=A, kernel=kernel, reward=reward,
        constraint=constraint, threshold=HARD_B_THRESHOLD, start=start,
    )


def _check_general_layout(instance: CmdpInstance):
    S = instance.n_states
    if S < 7 or (S - 1) % 6 != 0:
        raise ValueError("not a master instance of the general family")
    K = (S - 1) // 6
    for i in range(K):
        base = 1 + 6 * i
        dec = base + 1
        if instance.kernel[dec, 0, base + 4] != 1.0:
            raise ValueError("decision-state signature missing; foreign instance")
        for s in range(base + 2, base + 6):
            if instance.kernel[s, 0, s] != 1.0:
                raise ValueError("absorber signature missing; foreign instance")
    return K


def occupancy_aggregates(instance: CmdpInstance, policy_or_mu):
    """Aggregate occupancy masses (mu0, mu1, mu2) of a master instance.

    mu0 is the long-run mass on the margin absorbers, mu1 on the
    half-paying absorbers (safe-action flow), mu2 on the two stochastic
    absorbers.  Accepts a policy (stationary occupancy is computed from
    the start) or an (S, A) occupancy array.
    """
    K = _check_general_layout(instance)
    arr = np.asarray(policy_or_mu, dtype=np.float64)
    is_occupancy = (
        arr.ndim == 2
        and arr.shape == (instance.n_states, instance.n_actions)
        and abs(arr.sum() - 1.0) < 1e-6
        and np.max(np.abs(arr.sum(axis=1) - 1.0)) > 1e-9
    )
    if is_occupancy:
        state_mass = arr.sum(axis=1)
    else:
        P_inf = chains.stationary_matrix(policy_or_mu, instance)
        state_mass = instance.start @ P_inf
    mu0 = mu1 = mu2 = 0.0
    for i in range(K):
        base = 1 + 6 * i
        mu0 += state_mass[base + 5]
        mu1 += state_mass[base + 4]
        mu2 += state_mass[base + 2] + state_mass[base + 3]
    return float(mu0), float(mu1), float(mu2)


def occupancy_fraction_mu1(instance: CmdpInstance, policy_or_mu) -> float:
    """Normalized safe-action occupancy mu1 / (1 - mu0)."""
    mu0, mu1, _ = occupancy_aggregates(instance, policy_or_mu)
    denom = 1.0 - mu0
    if denom <= 1e-12:
        raise ValueError("all mass sits on the margin absorbers; fraction undefined")
    return mu1 / denom


def branch_lp(epsilon: float, zeta: float, designated: bool,
              cut: str | None = None):
    """Aggregated occupancy program of the master family, optionally cut.

    Base variables (mu0, mu1, mu2); a designated instance adds mu3 for
    the designated action's flow.  cut is None, "mu1_low" (safe fraction
    at most 2/3) or "mu1_high" (at least 2/3).  Returns (objective,
    solution vector) and raises if infeasible.
    """
    b, x, kappa, _ = _component_values(epsilon, zeta)
    kappa_star = kappa * (1.0 + x) / (1.0 - x)
    if designated:
        obj = [0.0, 0.5, (1.0 - x) / 2.0, (1.0 + x) / 2.0]
        cons = [b + zeta, b - zeta, kappa, kappa_star]
    else:
        obj = [0.0, 0.5, (1.0 - x) / 2.0]
        cons = [b + zeta, b - zeta, kappa]
    n = len(obj)
    rows = [np.ones(n), np.array(cons)]
    rhs = [1.0, b]
    senses = ["=", ">="]
    if cut is not None:
        # mu1 <= (2/3)(1 - mu0)  <=>  (2/3) mu0 + mu1 <= 2/3, and dually for >=
        cut_row = np.zeros(n)
        cut_row[0] = 2.0 / 3.0
        cut_row[1] = 1.0
        rows.append(cut_row)
        rhs.append(2.0 / 3.0)
        senses.append("<=" if cut == "mu1_low" else ">=")
    n_slack = sum(1 for s in senses if s != "=")
    A_mat = np.zeros((len(rows), n + n_slack))
    slack_i = 0
    for r, (row, sense) in enumerate(zip(rows, senses)):
        A_mat[r, :n] = row
        if sense != "=":
            A_mat[r, n + slack_i] = 1.0 if sense == "<=" else -1.0
            slack_i += 1
    c_vec = np.zeros(n + n_slack)
    c_vec[:n] = obj
    result = solve_lp_max(c_vec, A_mat, np.array(rhs))
    if result.status != "optimal":
        raise ValueError("aggregated program infeasible at these parameters")
    return result.objective, result.x[:n]


def kl_designated_rows(epsilon: float, zeta: float, B: float):
    """KL divergence between the designated row and its base counterpart.

    Returns (kl, bound) with bound = 32 eps^2 zeta^2 / B; the divergence
    never exceeds the bound when eps * zeta <= 1/4.
    """
    if epsilon * zeta > 0.25:
        raise ValueError("need epsilon * zeta <= 1/4")
    q1, q2 = designated_row_pair(epsilon, zeta, B)
    mask = q1 > 0
    kl = float(np.sum(q1[mask] * np.log(q1[mask] / q2[mask])))
    bound = 32.0 * epsilon**2 * zeta**2 / B
    if kl > bound:
        raise AssertionError(f"kl {kl} exceeded its closed-form bound {bound}")
    return kl, bound


# ---------------------------------------------------------------------------
# Communicating family (best effort: leaf internals are reconstructed, not
# prescribed; all constants are collected here so they are auditable).
# ---------------------------------------------------------------------------

def communicating_constants(epsilon: float, zeta: float):
    """Payout constants of the communicating leaf components.

    Cycle algebra (dwell D' at the leaf entry, then D' in a payout
    state): the safe action earns exactly 1/2 and constraint b - zeta;
    a risky action earns 1/2 -/+ eps*zeta/2 with the designated variant
    on the high side, and its constraint sits eps*zeta/10 below the safe
    level in the base instance but strictly above it when designated.
    """
    b = HARD_B_THRESHOLD
    x = 2.0 * epsilon * zeta
    c_y = min(0.4, 2.0 * (b - zeta))  # high-payout dwell constraint
    c_z = 0.0
    v = 0.1
    kappa_f = b - zeta - v * epsilon * zeta
    values = {
        "x": x,
        "c_y": c_y,
        "c_z": c_z,
        "r_y": 1.0,
        "r_z": 0.0,
        "r_x_safe": 0.0,
        "c_x_safe": 2.0 * (b - zeta) - c_y,
        "r_x_risky": 0.5,
        "c_x_risky": 2.0 * kappa_f - (1.0 - x) / 2.0 * c_y,
        "gain_safe": 0.5,
        "gain_risky_base": 0.5 - epsilon * zeta / 2.0,
        "gain_risky_designated": 0.5 + epsilon * zeta / 2.0,
        "cgain_safe": b - zeta,
        "cgain_risky_base": kappa_f,
        "cgain_risky_designated": kappa_f + x * (c_y - c_z) / 2.0,
    }
    for name in ("c_x_safe", "c_x_risky"):
        if not (0.0 <= values[name] <= 1.0):
            raise ValueError(f"{name} = {values[name]} out of [0, 1]; lower zeta")
    return values


def build_communicating_hard(n_states: int, n_actions: int, diameter_budget: float,
                             epsilon: float, zeta: float,
                             k_or_none: int | None = None, l: int = 2) -> CmdpInstance:
    """Communicating lower-bound instance on a tree of slow-return leaves.

    K = ceil(S/4) leaves each get an entry state x and two payout states
    y (pays 1) and z (pays 0); dwells last an expected D/8 steps.  The
    perturbed instance flips the payout split of risky action l at leaf
    k.  Every state reaches every other state under some policy, and the
    realized diameter stays below the budget.
    """
    S, A, D = n_states, n_actions, float(diameter_budget)
    if A < 3:
        raise ValueError("at least 3 actions are required")
    if epsilon > 1.0 / 16.0:
        raise ValueError("epsilon must be at most 1/16")
    if D < max(16 * math.ceil(math.log(S) / math.log(A)), 16):
        raise ValueError("diameter budget too small for this state count")
    A_prime = A - 1
    D_prime = D / 8.0
    K = math.ceil(S / 4)
    n_tree = S - 2 * K
    if S - 3 * K < 1:
        raise ValueError("state budget leaves no internal tree nodes")
    n_heap_internal = (n_tree - 2) // A_prime + 1 if n_tree >= 2 else 0
    if n_tree - n_heap_internal < K:
        raise ValueError("tree cannot host that many leaf components")
    if k_or_none is not None and not (0 <= k_or_none < K):
        raise ValueError("designated leaf index out of range")
    if not (2 <= l <= A - 1):
        raise ValueError("designated risky action must lie in {2, ..., A-1}")

    vals = communicating_constants(epsilon, zeta)
    b = HARD_B_THRESHOLD
    x = vals["x"]
    stay = 1.0 - 1.0 / D_prime

    kernel = np.zeros((S, A, S))
    reward = np.zeros((S, A))
    constraint = np.zeros((S, A))

    def parent(i):
        return (i - 1) // A_prime if i > 0 else 0

    def children(i):
        return [c for c in range(A_prime * i + 1, A_prime * i + A_prime + 1) if c < n_tree]

    x_nodes = list(range(n_tree - K, n_tree))
    x_index = {node: k for k, node in enumerate(x_nodes)}

    for v in range(n_tree):
        kernel[v, 0, parent(v)] = 1.0
        constraint[v, 0] = b
        if v in x_index:
            k = x_index[v]
            y, z = n_tree + 2 * k, n_tree + 2 * k + 1
            # safe action: slow dwell, exits to the high payout state
            kernel[v, 1, v] = stay
            kernel[v, 1, y] = 1.0 / D_prime
            reward[v, 1] = vals["r_x_safe"]
            constraint[v, 1] = vals["c_x_safe"]
            for a in range(2, A):
                flipped = k_or_none == k and a == l
                alpha_y = (1.0 + x) / 2.0 if flipped else (1.0 - x) / 2.0
                kernel[v, a, v] = stay
                kernel[v, a, y] = alpha_y / D_prime
                kernel[v, a, z] = (1.0 - alpha_y) / D_prime
                reward[v, a] = vals["r_x_risky"]
                constraint[v, a] = vals["c_x_risky"]
            # payout states: action 0 slow-returns, action 1+ parks
            for state, r_dwell, c_dwell, c_park in (
                (y, vals["r_y"], vals["c_y"], b + zeta),
                (z, vals["r_z"], vals["c_z"], 0.0),
            ):
                kernel[state, 0, state] = stay
                kernel[state, 0, v] = 1.0 / D_prime
                reward[state, 0] = r_dwell
                constraint[state, 0] = c_dwell
                for a in range(1, A):
                    kernel[state, a, state] = 1.0
                    reward[state, a] = 0.0
                    constraint[state, a] = c_park
        else:
            kids = children(v)
            for a in range(1, A):
                if a - 1 < len(kids):
                    kernel[v, a, kids[a - 1]] = 1.0
                else:
                    kernel[v, a, v] = 1.0
                constraint[v, a] = b

    start = np.zeros(S)
    start[0] = 1.0
    return CmdpInstance(
        n_states=S, n_actions=A, kernel=kernel, reward=reward,
        constraint=constraint, threshold=b, start=start,
    )


def communicating_leaf_states(n_states: int) -> dict:
    """Index layout of a communicating instance: x nodes and (y, z) pairs."""
    K = math.ceil(n_states / 4)
    n_tree = n_states - 2 * K
    return {
        "n_tree": n_tree,
        "x_nodes": list(range(n_tree - K, n_tree)),
        "payout_pairs": [(n_tree + 2 * k, n_tree + 2 * k + 1) for k in range(K)],
    }


def communicating_safe_fraction(instance: CmdpInstance, mu: np.ndarray) -> float:
    """Safe-cycle occupancy fraction, the communicating analog of mu1'.

    mu1 collects mass on safe-cycle flows (safe action at each leaf entry
    plus the high-payout dwell), mu0 the parked mass on high-payout
    states; returns mu1 / (1 - mu0).
    """
    layout = communicating_leaf_states(instance.n_states)
    mu = np.asarray(mu, dtype=np.float64)
    mu0 = mu1 = 0.0
    for x_node, (y, _z) in zip(layout["x_nodes"], layout["payout_pairs"]):
        mu1 += mu[x_node, 1] + mu[y, 0]
        mu0 += mu[y, 1:].sum()
    denom = 1.0 - mu0
    if denom <= 1e-12:
        raise ValueError("all mass parked; fraction undefined")
    return mu1 / denom

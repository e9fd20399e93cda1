"""Structural difficulty parameters computed exactly from a known model.

H and B are maxima over all deterministic policies (enumeration, capped),
D is a per-target stochastic-shortest-path computation, and zeta comes
from the occupancy LP.  Instances past the enumeration cap must have
these supplied by the caller.
"""

from __future__ import annotations

import numpy as np

from . import chains, oracle
from .model import CmdpInstance, NumericalFailure, StructuralParams

HITTING_DIVERGED = 1e9


def expected_hitting_to_recurrent(policy, instance: CmdpInstance) -> np.ndarray:
    """Expected steps to reach the policy's recurrent states, per start state."""
    P_pi, _ = chains.policy_matrices(policy, instance)
    _, transient = chains.recurrent_classes(P_pi)
    times = np.zeros(instance.n_states)
    if transient.size:
        Q = P_pi[np.ix_(transient, transient)]
        t = np.linalg.solve(np.eye(transient.size) - Q, np.ones(transient.size))
        times[transient] = t
    return times


def min_expected_hitting_time(instance: CmdpInstance, target: int,
                              tol: float = 1e-9, max_iters: int = 2_000_000) -> np.ndarray:
    """Minimal expected hitting time to `target` over policies (SSP value iteration).

    States that cannot reach the target under any policy get +inf.
    """
    S, A = instance.n_states, instance.n_actions
    kernel = instance.kernel
    t = np.zeros(S)
    for _ in range(max_iters):
        nxt = 1.0 + np.min(kernel @ t, axis=1)
        nxt[target] = 0.0
        delta = np.max(np.abs(nxt - t))
        t = nxt
        if delta <= tol:
            break
        if t.max() > HITTING_DIVERGED:
            t[t > HITTING_DIVERGED / 2] = np.inf
            # re-run the contraction on the reachable part only
            for _ in range(max_iters):
                vals = kernel @ np.where(np.isinf(t), HITTING_DIVERGED, t)
                nxt = 1.0 + np.min(vals, axis=1)
                nxt[target] = 0.0
                nxt[np.isinf(t)] = np.inf
                finite = ~np.isinf(nxt)
                delta = np.max(np.abs(nxt[finite] - t[finite])) if finite.any() else 0.0
                t = nxt
                if delta <= tol:
                    break
            break
    else:
        raise NumericalFailure(f"hitting-time iteration for target {target} stalled")
    return t


def diameter(instance: CmdpInstance) -> float:
    """Max over ordered pairs s != z of the minimal expected hitting time."""
    worst = 0.0
    for target in range(instance.n_states):
        t = min_expected_hitting_time(instance, target)
        others = np.delete(t, target)
        worst = max(worst, float(others.max()))
    return worst


def structural_params(instance: CmdpInstance, cap: int = oracle.ENUM_CAP) -> StructuralParams:
    """H, B, D, zeta of an instance, by exact enumeration at small scale.

    H is the largest bias span over deterministic policies, taken over
    both the reward and the constraint; B the largest expected hitting
    time to a policy's recurrent class; D the diameter; zeta the LP
    feasibility margin.
    """
    H = 0.0
    B = 0.0
    for pol in oracle.iter_deterministic_policies(instance.n_states, instance.n_actions, cap):
        gb_r = chains.gain_bias(pol, instance, "r")
        gb_c = chains.gain_bias(pol, instance, "c")
        H = max(H, chains.span(gb_r.bias), chains.span(gb_c.bias))
        B = max(B, float(expected_hitting_to_recurrent(pol, instance).max()))
    return StructuralParams(
        H=H, B=B, D=diameter(instance), zeta=oracle.slater_constant(instance)
    )

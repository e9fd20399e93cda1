"""Black-box unconstrained MDP planner used inside the primal update.

The average-reward subproblem is solved through a discounted surrogate
at a discount chosen close enough to 1 that discounted optimality
transfers to average optimality.  Value iteration runs until
span(TV - V) <= tol (1 - gamma) / gamma, after which the greedy policy
is within tol of discounted-optimal; ties break toward the lowest
action index.
"""

from __future__ import annotations

import numpy as np

from .model import NumericalFailure

MAX_SWEEPS = 5_000_000


def _vi_to_tolerance(kernel_flat, reward, gamma, tol, V):
    """Run VI sweeps in place from V; return (V, Q) at the stopping rule."""
    S, A = reward.shape
    threshold = tol * (1.0 - gamma) / gamma
    for _ in range(MAX_SWEEPS):
        Q = reward + gamma * (kernel_flat @ V).reshape(S, A)
        V_new = Q.max(axis=1)
        diff = V_new - V
        if diff.max() - diff.min() <= threshold:
            return V_new, Q
        V = V_new
    raise NumericalFailure("value iteration exceeded the sweep budget")


def solve_discounted(kernel, reward, gamma: float, tol: float, v_init=None):
    """Greedy policy of the discounted MDP (kernel, reward) at discount gamma.

    Returns (policy, V) where V is the value estimate at the stopping
    rule.  v_init warm-starts the sweep; the stopping rule is valid from
    any initial vector.
    """
    if not (0.0 < gamma < 1.0):
        raise ValueError("gamma must lie in (0, 1)")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    reward = np.asarray(reward, dtype=np.float64)
    if not np.all(np.isfinite(reward)):
        raise ValueError("rewards must be finite")
    kernel = np.asarray(kernel, dtype=np.float64)
    S, A = reward.shape
    kernel_flat = kernel.reshape(S * A, S)
    V = np.zeros(S) if v_init is None else np.asarray(v_init, dtype=np.float64).copy()
    V, Q = _vi_to_tolerance(kernel_flat, reward, gamma, tol, V)
    return Q.argmax(axis=1).astype(np.int64), V


def primal_update(kernel_hat, r_p, c, lam: float, gamma: float, tol: float, v_init=None):
    """Policy of the combined-reward MDP (kernel_hat, r_p + lam * c).

    The combined reward is normalized by 1 / (1 + lam) before solving so
    planner values stay on the [0, 1 + omega] scale; the greedy argmax is
    invariant to that scaling.  Returns (policy, V) with V on the
    normalized scale.
    """
    if lam < 0:
        raise ValueError("the dual variable must be nonnegative")
    combined = (np.asarray(r_p, dtype=np.float64) + lam * np.asarray(c, dtype=np.float64))
    combined /= 1.0 + lam
    return solve_discounted(kernel_hat, combined, gamma, tol, v_init=v_init)

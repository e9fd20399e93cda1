"""Exact chain-level evaluation for a fixed policy.

Everything here is model-known linear algebra: the Cesaro-limit matrix
P_pi^inf, gain/bias pairs via the deviation matrix, discounted values,
and mixture values.  Periodic and multichain policies are handled by
working per recurrent class (strongly connected closed sets of the
support graph) rather than by power iteration.
"""

from __future__ import annotations

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .model import (
    CmdpInstance,
    GainBias,
    MixturePolicy,
    NumericalFailure,
    as_stochastic,
)

SUPPORT_EPS = 1e-15  # kernel entries below this are structural zeros
CESARO_TOL = 1e-10
BELLMAN_TOL = 1e-8


def span(v) -> float:
    """Span seminorm max(v) - min(v); invariant under adding a constant."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("span of an empty vector is undefined")
    return float(arr.max() - arr.min())


def policy_matrices(policy, instance: CmdpInstance, which="r"):
    """Transition matrix P_pi (S x S) and reward vector r_pi (S) of a policy."""
    pol = as_stochastic(policy, instance)
    P_pi = np.einsum("sa,sat->st", pol, instance.kernel)
    r_pi = np.einsum("sa,sa->s", pol, instance.reward_values(which))
    return P_pi, r_pi


def recurrent_classes(P_pi: np.ndarray):
    """Closed communicating classes and transient states of a chain.

    Returns (classes, transient) where classes is a list of index arrays,
    one per closed strongly connected component of the support graph.
    """
    support = csr_matrix(P_pi > SUPPORT_EPS)
    n_comp, labels = connected_components(support, directed=True, connection="strong")
    closed = []
    for comp in range(n_comp):
        members = np.flatnonzero(labels == comp)
        outside = np.ones(P_pi.shape[0], dtype=bool)
        outside[members] = False
        if P_pi[np.ix_(members, outside)].sum() <= SUPPORT_EPS * len(members):
            closed.append(members)
    transient_mask = np.ones(P_pi.shape[0], dtype=bool)
    for members in closed:
        transient_mask[members] = False
    return closed, np.flatnonzero(transient_mask)


def _class_stationary(P_sub: np.ndarray) -> np.ndarray:
    """Stationary distribution of an irreducible stochastic submatrix."""
    n = P_sub.shape[0]
    A = (P_sub - np.eye(n)).T
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as e:
        raise NumericalFailure(f"stationary solve failed: {e}") from e
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def stationary_matrix(policy, instance: CmdpInstance) -> np.ndarray:
    """Cesaro-limit matrix P_pi^inf = C-lim (1/T) sum_{t<T} P_pi^t.

    Rows of recurrent states carry their class's stationary distribution;
    transient rows mix class distributions by absorption probability.
    Satisfies P_pi^inf P_pi = P_pi^inf.
    """
    P_pi, _ = policy_matrices(policy, instance)
    P_inf = cesaro_limit(P_pi)
    resid = np.max(np.abs(P_inf @ P_pi - P_inf))
    if resid > CESARO_TOL:
        raise NumericalFailure(
            f"Cesaro-limit residual {resid:.3e} exceeds {CESARO_TOL:g} "
            f"for policy {np.asarray(policy).tolist()}"
        )
    return P_inf


def cesaro_limit(P_pi: np.ndarray) -> np.ndarray:
    """Cesaro limit of a row-stochastic matrix via recurrent-class analysis."""
    n = P_pi.shape[0]
    classes, transient = recurrent_classes(P_pi)
    P_inf = np.zeros((n, n))
    class_dists = []
    for members in classes:
        pi_c = _class_stationary(P_pi[np.ix_(members, members)])
        class_dists.append(pi_c)
        P_inf[np.ix_(members, members)] = np.tile(pi_c, (len(members), 1))
    if transient.size:
        Q = P_pi[np.ix_(transient, transient)]
        lhs = np.eye(transient.size) - Q
        for members, pi_c in zip(classes, class_dists):
            # absorption probability into this class from each transient state
            rhs = P_pi[np.ix_(transient, members)].sum(axis=1)
            try:
                absorb = np.linalg.solve(lhs, rhs)
            except np.linalg.LinAlgError as e:
                raise NumericalFailure(f"absorption solve failed: {e}") from e
            P_inf[np.ix_(transient, members)] = np.outer(absorb, pi_c)
    return P_inf


def gain_bias(policy, instance: CmdpInstance, which="r") -> GainBias:
    """Gain and bias of a policy for the chosen reward.

    rho = P_pi^inf r_pi, and h solves (I - P_pi + P_pi^inf) h =
    (I - P_pi^inf) r_pi, the deviation-matrix solution with
    P_pi^inf h = 0.
    """
    P_pi, r_pi = policy_matrices(policy, instance, which)
    P_inf = stationary_matrix(policy, instance)
    gain = P_inf @ r_pi
    n = P_pi.shape[0]
    try:
        bias = np.linalg.solve(np.eye(n) - P_pi + P_inf, (np.eye(n) - P_inf) @ r_pi)
    except np.linalg.LinAlgError as e:
        raise NumericalFailure(f"bias solve failed: {e}") from e
    _check_gain_bias(P_pi, r_pi, P_inf, gain, bias, policy)
    return GainBias(gain=gain, bias=bias)


def _check_gain_bias(P_pi, r_pi, P_inf, gain, bias, policy):
    r1 = np.max(np.abs(P_pi @ gain - gain))
    r2 = np.max(np.abs(gain + bias - r_pi - P_pi @ bias))
    r3 = np.max(np.abs(P_inf @ bias))
    if max(r1, r2, r3) > BELLMAN_TOL:
        raise NumericalFailure(
            f"gain/bias residuals ({r1:.2e}, {r2:.2e}, {r3:.2e}) exceed "
            f"{BELLMAN_TOL:g} for policy {np.asarray(policy).tolist()}"
        )


def discounted_value(policy, instance: CmdpInstance, which, gamma: float) -> np.ndarray:
    """Discounted value V = (I - gamma P_pi)^{-1} r_pi via dense solve."""
    if not (0.0 < gamma < 1.0):
        raise ValueError("gamma must lie in (0, 1)")
    P_pi, r_pi = policy_matrices(policy, instance, which)
    n = P_pi.shape[0]
    V = np.linalg.solve(np.eye(n) - gamma * P_pi, r_pi)
    resid = np.max(np.abs((np.eye(n) - gamma * P_pi) @ V - r_pi))
    if resid > 1e-10:
        raise NumericalFailure(f"discounted solve residual {resid:.3e}")
    return V


def gain_at(policy, instance: CmdpInstance, which="r", at=None) -> float:
    """Scalar gain <at, rho^pi>; `at` defaults to the instance start."""
    weights = instance.start if at is None else np.asarray(at, dtype=np.float64)
    return float(weights @ gain_bias(policy, instance, which).gain)


def mixture_value(mix: MixturePolicy, instance: CmdpInstance, which="r", at=None) -> float:
    """Value of a mixture: the weight-average of member gains at `at`."""
    weights = instance.start if at is None else np.asarray(at, dtype=np.float64)
    total = 0.0
    for w, member in zip(mix.weights, mix.members):
        total += float(w) * float(weights @ gain_bias(member, instance, which).gain)
    return total

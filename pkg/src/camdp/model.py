"""Core model types for tabular constrained average-reward MDPs.

A CAMDP is the tuple (S, A, P, r, c, b, start): maximize the long-run
average of r subject to the long-run average of c being at least b.
Rewards and constraint values live in [0, 1]; kernels are row-stochastic.
All arrays are dense numpy float64; instances round-trip losslessly
through JSON.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

ROW_ATOL = 1e-12


class CamdpError(Exception):
    """Base class for package errors."""


class NumericalFailure(CamdpError):
    """A linear solve or fixed-point iteration missed its tolerance."""


class EnumerationCapExceeded(CamdpError):
    """Deterministic-policy enumeration would exceed the configured cap.

    Callers hitting this should supply the structural parameters
    (H, B, D) explicitly instead of asking for exact enumeration.
    """


class InfeasibleInstance(CamdpError):
    """The constraint cannot be met by any policy at the given threshold."""


def _as_array(x, shape, name):
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass
class CmdpInstance:
    """Full tabular model: kernel P, reward r, constraint c, threshold b, start.

    kernel has shape (S, A, S) with kernel[s, a] a probability row over
    next states.  reward and constraint have shape (S, A) with entries in
    [0, 1].  start is a probability vector over states.
    """

    n_states: int
    n_actions: int
    kernel: np.ndarray
    reward: np.ndarray
    constraint: np.ndarray
    threshold: float
    start: np.ndarray

    def __post_init__(self):
        S, A = int(self.n_states), int(self.n_actions)
        if S < 1 or A < 1:
            raise ValueError("n_states and n_actions must be positive")
        self.n_states, self.n_actions = S, A
        self.kernel = _as_array(self.kernel, (S, A, S), "kernel")
        self.reward = _as_array(self.reward, (S, A), "reward")
        self.constraint = _as_array(self.constraint, (S, A), "constraint")
        self.start = _as_array(self.start, (S,), "start")
        self.threshold = float(self.threshold)
        self.validate()

    def validate(self):
        if np.any(self.kernel < 0):
            raise ValueError("kernel entries must be nonnegative")
        row_sums = self.kernel.sum(axis=2)
        if np.max(np.abs(row_sums - 1.0)) > ROW_ATOL:
            bad = np.unravel_index(np.argmax(np.abs(row_sums - 1.0)), row_sums.shape)
            raise ValueError(f"kernel row {bad} sums to {row_sums[bad]!r}, not 1")
        for name, arr in (("reward", self.reward), ("constraint", self.constraint)):
            if arr.min() < 0.0 or arr.max() > 1.0:
                raise ValueError(f"{name} entries must lie in [0, 1]")
        if not (0.0 <= self.threshold <= 1.0):
            raise ValueError("threshold must lie in [0, 1]")
        if np.any(self.start < 0) or abs(self.start.sum() - 1.0) > ROW_ATOL:
            raise ValueError("start must be a probability vector")

    def reward_values(self, which) -> np.ndarray:
        """Resolve a reward selector: 'r', 'c', or an explicit (S, A) array."""
        if isinstance(which, str):
            if which == "r":
                return self.reward
            if which == "c":
                return self.constraint
            raise ValueError(f"unknown reward selector {which!r}")
        return _as_array(which, (self.n_states, self.n_actions), "reward vector")

    def with_kernel(self, kernel, reward=None) -> "CmdpInstance":
        """Copy of this instance with a replaced kernel (and optionally reward)."""
        return replace(
            self,
            kernel=np.asarray(kernel, dtype=np.float64),
            reward=self.reward if reward is None else np.asarray(reward, dtype=np.float64),
        )

    def to_dict(self) -> dict:
        return {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "kernel": self.kernel.tolist(),
            "reward": self.reward.tolist(),
            "constraint": self.constraint.tolist(),
            "threshold": self.threshold,
            "start": self.start.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CmdpInstance":
        try:
            return cls(
                n_states=d["n_states"],
                n_actions=d["n_actions"],
                kernel=d["kernel"],
                reward=d["reward"],
                constraint=d["constraint"],
                threshold=d["threshold"],
                start=d["start"],
            )
        except KeyError as e:
            raise ValueError(f"instance JSON missing field {e.args[0]!r}") from e

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "CmdpInstance":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def check_deterministic_policy(policy, instance: CmdpInstance) -> np.ndarray:
    """Validate an action-index-per-state array against the instance."""
    pol = np.asarray(policy)
    if pol.shape != (instance.n_states,):
        raise ValueError(f"policy must have shape ({instance.n_states},)")
    if not np.issubdtype(pol.dtype, np.integer):
        if not np.all(pol == pol.astype(np.int64)):
            raise ValueError("deterministic policy entries must be integers")
        pol = pol.astype(np.int64)
    if pol.min() < 0 or pol.max() >= instance.n_actions:
        raise ValueError("policy action index out of range")
    return pol.astype(np.int64)


def check_stochastic_policy(policy, instance: CmdpInstance) -> np.ndarray:
    """Validate an (S, A) action-distribution matrix against the instance."""
    pol = np.asarray(policy, dtype=np.float64)
    if pol.shape != (instance.n_states, instance.n_actions):
        raise ValueError(
            f"policy must have shape ({instance.n_states}, {instance.n_actions})"
        )
    if np.any(pol < 0) or np.max(np.abs(pol.sum(axis=1) - 1.0)) > ROW_ATOL:
        raise ValueError("policy rows must be probability vectors")
    return pol


def deterministic_to_stochastic(policy, n_actions: int) -> np.ndarray:
    """One-hot encode a deterministic policy as an (S, A) matrix."""
    pol = np.asarray(policy, dtype=np.int64)
    out = np.zeros((pol.shape[0], n_actions))
    out[np.arange(pol.shape[0]), pol] = 1.0
    return out


def as_stochastic(policy, instance: CmdpInstance) -> np.ndarray:
    """Accept a deterministic or stochastic policy; return the (S, A) form."""
    pol = np.asarray(policy)
    if pol.ndim == 1:
        return deterministic_to_stochastic(
            check_deterministic_policy(pol, instance), instance.n_actions
        )
    return check_stochastic_policy(pol, instance)


@dataclass
class MixturePolicy:
    """Weighted list of stochastic policies, the output of the dual loop.

    The value of the mixture is the weight-average of member values: the
    mixture is executed by drawing one member at time zero and following
    it forever.
    """

    weights: np.ndarray
    members: list  # list of (S, A) stochastic policy matrices

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 1 or len(self.members) != self.weights.shape[0]:
            raise ValueError("weights and members must have equal length")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > ROW_ATOL:
            raise ValueError("mixture weights must be nonnegative and sum to 1")


@dataclass
class GainBias:
    """Gain vector rho and bias vector h of a fixed policy.

    Satisfies P_pi rho = rho,  rho + h = r_pi + P_pi h,  and the
    normalization P_pi^inf h = 0 that makes h unique.
    """

    gain: np.ndarray
    bias: np.ndarray


@dataclass
class StructuralParams:
    """Structural difficulty parameters of an instance.

    H: largest bias span over deterministic policies (reward and constraint).
    B: largest expected time to reach a policy's recurrent class.
    D: diameter, max over ordered state pairs of minimal expected hitting time.
    zeta: feasibility margin, max constraint gain at the start minus b.
    """

    H: float
    B: float
    D: float
    zeta: float

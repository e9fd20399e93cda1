"""The generative model: seeded transition sampling and reward perturbation.

Sampling uses counter-based Philox streams with one independent stream
per (s, a) pair derived from (master seed, pair index), so a model built
in parallel across pairs is bit-identical to one built serially.
(instance, N, seed) fully determines the empirical model.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import CmdpInstance

_TRANSITION_TAG = 0
_PERTURB_TAG = 1


def pair_stream(seed: int, s: int, a: int, n_actions: int, tag: int = _TRANSITION_TAG):
    """Philox generator for one (s, a) pair under a master seed."""
    key = np.array([np.uint64(seed), np.uint64((tag << 32) + s * n_actions + a)])
    return np.random.Generator(np.random.Philox(key=key))


def sample_transition(instance: CmdpInstance, s: int, a: int, rng) -> int:
    """One next-state draw from P(.|s, a) using the supplied generator."""
    if not (0 <= s < instance.n_states and 0 <= a < instance.n_actions):
        raise ValueError(f"state-action ({s}, {a}) out of range")
    row = instance.kernel[s, a]
    return int(np.searchsorted(np.cumsum(row), rng.random(), side="right"))


@dataclass
class EmpiricalModel:
    """Transition counts and the estimated kernel built from N draws per pair.

    kernel_hat rows are counts / N, so they are exact rationals with
    denominator N; counts rows sum to N exactly.
    """

    counts: np.ndarray
    samples_per_pair: int
    kernel_hat: np.ndarray
    seed: int

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        self.kernel_hat = np.asarray(self.kernel_hat, dtype=np.float64)
        N = int(self.samples_per_pair)
        if N < 1:
            raise ValueError("samples_per_pair must be at least 1")
        if np.any(self.counts.sum(axis=2) != N):
            raise ValueError("each (s, a) count row must sum to N")

    @property
    def total_samples(self) -> int:
        S, A, _ = self.counts.shape
        return self.samples_per_pair * S * A

    def as_instance(self, instance: CmdpInstance, reward=None) -> CmdpInstance:
        """The empirical CAMDP: true rewards/constraint on the estimated kernel."""
        return instance.with_kernel(self.kernel_hat, reward=reward)

    def to_dict(self, instance: CmdpInstance) -> dict:
        d = instance.to_dict()
        d["kernel"] = self.kernel_hat.tolist()
        d["counts"] = self.counts.tolist()
        d["samples_per_pair"] = self.samples_per_pair
        d["seed"] = self.seed
        return d


def build_empirical_model(instance: CmdpInstance, n_samples: int, seed: int) -> EmpiricalModel:
    """Draw exactly n_samples next states per (s, a) and tabulate frequencies."""
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    S, A = instance.n_states, instance.n_actions
    counts = np.zeros((S, A, S), dtype=np.int64)
    for s in range(S):
        for a in range(A):
            rng = pair_stream(seed, s, a, A)
            cum = np.cumsum(instance.kernel[s, a])
            draws = np.searchsorted(cum, rng.random(n_samples), side="right")
            counts[s, a] = np.bincount(draws, minlength=S)
    kernel_hat = counts / float(n_samples)
    return EmpiricalModel(
        counts=counts, samples_per_pair=int(n_samples), kernel_hat=kernel_hat, seed=int(seed)
    )


@dataclass
class PerturbedReward:
    """Reward plus i.i.d. uniform [0, omega) offsets, one per (s, a)."""

    base: np.ndarray
    omega: float
    values: np.ndarray
    seed: int

    def __post_init__(self):
        offsets = self.values - self.base
        if np.any(offsets < 0) or np.any(offsets > self.omega + 1e-15):
            raise ValueError("perturbation offsets must lie in [0, omega]")


def perturb_rewards(reward: np.ndarray, omega: float, seed: int) -> PerturbedReward:
    """Add Z(s, a) ~ Unif[0, omega) to each reward entry, seeded per pair."""
    if omega < 0:
        raise ValueError("omega must be nonnegative")
    base = np.asarray(reward, dtype=np.float64)
    S, A = base.shape
    offsets = np.zeros_like(base)
    if omega > 0:
        for s in range(S):
            for a in range(A):
                rng = pair_stream(seed, s, a, A, tag=_PERTURB_TAG)
                offsets[s, a] = omega * rng.random()
    return PerturbedReward(base=base, omega=float(omega), values=base + offsets, seed=int(seed))


def save_empirical(model: EmpiricalModel, instance: CmdpInstance, path):
    Path(path).write_text(json.dumps(model.to_dict(instance)), encoding="utf-8")


def load_empirical(path):
    """Load an empirical model JSON; returns (EmpiricalModel, CmdpInstance).

    The instance carries the empirical kernel; counts and seed metadata
    are restored alongside.
    """
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    counts = np.asarray(d["counts"], dtype=np.int64)
    n = int(d["samples_per_pair"])
    model = EmpiricalModel(
        counts=counts, samples_per_pair=n, kernel_hat=counts / float(n), seed=int(d["seed"])
    )
    inst = CmdpInstance.from_dict({k: d[k] for k in (
        "n_states", "n_actions", "kernel", "reward", "constraint", "threshold", "start")})
    return model, inst

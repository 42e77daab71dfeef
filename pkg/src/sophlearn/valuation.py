"""Scalar objectives: dynamic preferences, expected-free-energy terms and the UCB bonus.

All information quantities are in nats.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import digamma, gammaln, logsumexp

from .env import N_RESOURCE_OBS


@dataclass(frozen=True)
class PreferenceSpec:
    empty_reward: float = -1.0
    penalty: float = -100.0
    limits: tuple = (20, 22, 25)
    c: float = 0.1

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("preference precision c must be positive")
        if len(self.limits) != 3 or min(self.limits) < 1:
            raise ValueError("limits must be three positive integers (food, water, sleep)")
        if not self.penalty < self.empty_reward < max(self.limits):
            raise ValueError("need penalty < empty_reward < largest resource preference")


@dataclass(frozen=True)
class EFEBreakdown:
    """Components of the expected free energy of one action (lower total is better)."""

    epistemic: float
    novelty: float
    pragmatic: float

    @property
    def total(self) -> float:
        return -self.epistemic - self.novelty - self.pragmatic


@dataclass
class UCBState:
    visit_counts: np.ndarray
    t: int = 0

    @classmethod
    def empty(cls, n_cells: int) -> "UCBState":
        return cls(np.zeros(n_cells, dtype=np.int64), 0)

    def record(self, cell: int) -> None:
        self.visit_counts[int(cell)] += 1
        self.t += 1


def preferences(clocks, spec: PreferenceSpec) -> np.ndarray:
    """Raw reward per resource observation ``(Empty, Food, Water, Sleep)``.

    Each resource is worth its clock value and Empty is worth
    ``empty_reward``.  Once any clock has reached its limit, Empty and every
    resource at or over its limit are worth ``penalty``.
    """
    raw = np.empty(N_RESOURCE_OBS)
    raw[0] = spec.empty_reward
    raw[1:] = np.asarray(clocks, dtype=float)
    for i, (k, lim) in enumerate(zip(clocks, spec.limits)):
        if k >= lim:
            raw[0] = spec.penalty
            raw[1 + i] = spec.penalty
    return raw


def outcome_rewards(clocks, spec: PreferenceSpec) -> np.ndarray:
    """Raw reward of each outcome of the next step from a live state with ``clocks``.

    Outcomes that leave some clock at or over its limit (after consuming the
    observed resource and ageing the rest) are worth ``penalty``; the others
    take their :func:`preferences` value at the current clocks.
    """
    raw = preferences(clocks, spec)
    for o in range(N_RESOURCE_OBS):
        for r, (k, lim) in enumerate(zip(clocks, spec.limits), start=1):
            if o != r and k + 1 >= lim:
                raw[o] = spec.penalty
    return raw


def to_log_preference(raw, c: float) -> np.ndarray:
    """Log-softmax of ``c * raw``: a normalised log preference distribution."""
    x = c * np.asarray(raw, dtype=float)
    return x - logsumexp(x)


def pragmatic_value(predicted_obs, log_pref) -> float:
    q = np.asarray(predicted_obs, dtype=float)
    lp = np.asarray(log_pref, dtype=float)
    mask = q > 0
    return float(np.dot(q[mask], lp[mask]))


def epistemic_value(prior_states, A) -> float:
    """Mutual information between hidden states and outcomes under the predictive joint."""
    q = np.asarray(prior_states, dtype=float)
    L = np.asarray(A, dtype=float).reshape(-1, q.size)
    joint = L * q
    qo = joint.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(joint > 0, L / qo[:, None], 1.0)
        value = np.sum(np.where(joint > 0, joint * np.log(ratio), 0.0))
    return max(float(value), 0.0)


def dirichlet_kl(alpha_post, alpha_prior) -> np.ndarray:
    """KL(Dir(alpha_post) || Dir(alpha_prior)) per column (outcomes on axis 0)."""
    a = np.asarray(alpha_post, dtype=float)
    b = np.asarray(alpha_prior, dtype=float)
    a0 = a.sum(axis=0)
    b0 = b.sum(axis=0)
    kl = (gammaln(a0) - gammaln(a).sum(axis=0) - gammaln(b0) + gammaln(b).sum(axis=0)
          + ((a - b) * (digamma(a) - digamma(a0))).sum(axis=0))
    return np.maximum(kl, 0.0)


def increment_kl(alpha_col_r, alpha_col_total, delta):
    """KL between Dirichlets that differ by ``+delta`` on a single outcome.

    Vectorised over the inputs; only the changed entry contributes.
    """
    a_r = np.asarray(alpha_col_r, dtype=float)
    a_0 = np.asarray(alpha_col_total, dtype=float)
    d = np.asarray(delta, dtype=float)
    kl = (gammaln(a_0 + d) - gammaln(a_0) - gammaln(a_r + d) + gammaln(a_r)
          + d * (digamma(a_r + d) - digamma(a_0 + d)))
    return np.maximum(kl, 0.0)


def novelty_value(counts, node_belief, predicted_obs, posteriors=None) -> float:
    """Expected information gain about Dirichlet parameters from one more outcome.

    ``counts`` is ``(n_outcomes, *cells)``; for each outcome ``o`` the counts
    are credited with ``posteriors[o]`` (default: ``node_belief``) and the
    Dirichlet KL to the current counts is weighted by ``predicted_obs[o]``.
    """
    a = counts.counts if hasattr(counts, "counts") else np.asarray(counts, dtype=float)
    n_out = a.shape[0]
    flat = a.reshape(n_out, -1)
    totals = flat.sum(axis=0)
    belief = np.asarray(node_belief, dtype=float).reshape(-1)
    q = np.asarray(predicted_obs, dtype=float)
    value = 0.0
    for o in range(n_out):
        if q[o] <= 0:
            continue
        w = belief if posteriors is None else np.asarray(posteriors[o], dtype=float).reshape(-1)
        value += q[o] * float(increment_kl(flat[o], totals, w).sum())
    return value


def ucb_bonus(visits, t, c_ucb: float, floor: float = 1.0):
    if np.any(np.asarray(t) < 1):
        raise ValueError("UCB time index must be >= 1")
    return c_ucb * np.sqrt(np.log(t) / np.maximum(visits, floor))


def expected_reward(predicted_obs, raw) -> float:
    return float(np.dot(np.asarray(predicted_obs, dtype=float), np.asarray(raw, dtype=float)))

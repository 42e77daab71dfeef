"""Exact discrete Bayesian machinery shared by every agent.

Conventions
-----------
Likelihood tensors are indexed ``A[outcome, *state_factors]`` and transition
tensors ``B[next_state, state]`` or ``B[next_state, state, action]``; both are
column-stochastic along axis 0.  Beliefs are plain 1-D ``numpy`` arrays.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

logger = logging.getLogger(__name__)

SUM_TOL = 1e-9


class InvalidModelError(ValueError):
    """A count or probability tensor violates its invariants."""


class DegenerateEvidenceError(ArithmeticError):
    """The observation has zero probability under the prior predictive.

    ``fallback`` carries the predictive prior so callers can continue.
    """

    def __init__(self, message: str, fallback):
        super().__init__(message)
        self.fallback = fallback


def check_categorical(probs, tol: float = SUM_TOL) -> np.ndarray:
    """Return ``probs`` as a float array after validating it is a distribution."""
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise InvalidModelError(f"categorical must be a non-empty vector, got shape {p.shape}")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise InvalidModelError("categorical has negative or non-finite entries")
    if abs(p.sum() - 1.0) > tol:
        raise InvalidModelError(f"categorical sums to {p.sum():.12g}, not 1")
    return p


def normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    total = v.sum()
    if total <= 0:
        raise DegenerateEvidenceError("cannot normalise a vector with zero mass", None)
    return v / total


def onehot(index: int, size: int) -> np.ndarray:
    v = np.zeros(size)
    v[index] = 1.0
    return v


@dataclass(frozen=True)
class Categorical:
    """Probability vector over a finite support."""

    probs: np.ndarray

    def __post_init__(self):
        p = check_categorical(self.probs)
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def uniform(cls, n: int) -> "Categorical":
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def delta(cls, index: int, n: int) -> "Categorical":
        return cls(onehot(index, n))

    def __len__(self):
        return self.probs.size

    def argmax(self) -> int:
        return int(np.argmax(self.probs))

    def entropy(self) -> float:
        p = self.probs[self.probs > 0]
        return float(-(p * np.log(p)).sum())


@dataclass(frozen=True)
class DirichletCounts:
    """Concentration parameters for a conditional categorical model.

    ``counts[outcome, *conditioning]``.  ``role`` is a free-form tag such as
    ``"likelihood-A"`` or ``"transition-B"``.
    """

    counts: np.ndarray
    role: str = "likelihood-A"

    def __post_init__(self):
        c = np.array(self.counts, dtype=float)
        if c.ndim < 2:
            raise InvalidModelError("counts need an outcome axis and at least one conditioning axis")
        if not np.all(np.isfinite(c)) or np.any(c <= 0):
            raise InvalidModelError(f"{self.role} counts must be strictly positive")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @classmethod
    def flat(cls, shape: Sequence[int], alpha0: float, role: str = "likelihood-A") -> "DirichletCounts":
        return cls(np.full(tuple(shape), float(alpha0)), role)

    @property
    def shape(self):
        return self.counts.shape

    def total(self) -> float:
        return float(self.counts.sum())

    def mean(self) -> np.ndarray:
        return normalize_counts(self)


def normalize_counts(counts) -> np.ndarray:
    """Dirichlet mean of every conditioning cell (count / column sum)."""
    c = counts.counts if isinstance(counts, DirichletCounts) else np.asarray(counts, dtype=float)
    if np.any(c <= 0):
        raise InvalidModelError("normalize_counts requires strictly positive counts")
    return c / c.sum(axis=0, keepdims=True)


def check_column_stochastic(T: np.ndarray, name: str = "tensor", tol: float = 1e-8) -> None:
    T = np.asarray(T)
    if np.any(T < 0):
        raise InvalidModelError(f"{name} has negative entries")
    if not np.allclose(T.sum(axis=0), 1.0, atol=tol):
        raise InvalidModelError(f"{name} is not column-stochastic")


def transition_matrix(B: np.ndarray, action) -> np.ndarray:
    """Select the action slice of a transition tensor (action-free tensors pass through)."""
    B = np.asarray(B)
    if B.ndim == 3:
        if action is None:
            raise ValueError("action-dependent transition needs an action")
        return B[:, :, int(action)]
    return B


def predict(prior: Sequence[np.ndarray], action, B: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Push each factor through its transition matrix; ``action=None`` means no step."""
    if action is None:
        return [np.asarray(q, dtype=float) for q in prior]
    return [transition_matrix(Bf, action) @ q for q, Bf in zip(prior, B)]


def joint_likelihood(observation: Sequence[int], A: Sequence[np.ndarray]) -> np.ndarray:
    """Product over modalities of ``A[m][o_m]`` -- a tensor over the joint state space."""
    lik = None
    for o, Am in zip(observation, A):
        slice_ = np.asarray(Am)[int(o)]
        lik = slice_ if lik is None else lik * slice_
    return lik


def _outer(factors: Sequence[np.ndarray]) -> np.ndarray:
    joint = np.asarray(factors[0], dtype=float)
    for q in factors[1:]:
        joint = np.multiply.outer(joint, q)
    return joint


def marginals(joint: np.ndarray) -> list[np.ndarray]:
    axes = range(joint.ndim)
    return [joint.sum(axis=tuple(a for a in axes if a != f)) for f in axes]


def posterior_factors(predictive: Sequence[np.ndarray], observation, A) -> list[np.ndarray]:
    """Exact joint posterior under a factored prior, returned as its marginals."""
    joint = _outer(predictive) * joint_likelihood(observation, A)
    evidence = joint.sum()
    if not evidence > 0:
        raise DegenerateEvidenceError(
            f"observation {tuple(observation)} has zero probability under the prior",
            [np.asarray(q, dtype=float).copy() for q in predictive],
        )
    return marginals(joint / evidence)


@dataclass(frozen=True)
class BeliefState:
    """Factored posterior over (position, context)."""

    position: np.ndarray
    context: np.ndarray

    def __post_init__(self):
        for name in ("position", "context"):
            p = check_categorical(getattr(self, name)).copy()
            p.setflags(write=False)
            object.__setattr__(self, name, p)

    @property
    def factors(self) -> list[np.ndarray]:
        return [self.position, self.context]

    def joint(self) -> np.ndarray:
        return np.multiply.outer(self.position, self.context)


def bayes_update(prior, action, observation, A, B):
    """One filtering step: predict through ``B[action]`` then condition on ``observation``.

    ``prior`` may be a :class:`BeliefState` or a list of factor vectors; the
    return type matches.  ``observation`` holds one outcome index per
    modality in ``A``.  Raises :class:`DegenerateEvidenceError` (with the
    predictive prior as ``fallback``) if the observation is impossible.
    """
    factors = prior.factors if isinstance(prior, BeliefState) else list(prior)
    if isinstance(observation, (int, np.integer)):
        observation = (int(observation),)
    pred = predict(factors, action, B)
    try:
        post = posterior_factors(pred, observation, A)
    except DegenerateEvidenceError as err:
        if isinstance(prior, BeliefState):
            err.fallback = BeliefState(*err.fallback)
        raise
    if isinstance(prior, BeliefState):
        return BeliefState(*post)
    return post


@dataclass
class HistoryBuffer:
    """Per-step (action taken into the step, observation, filtered posterior).

    Append-only; ``actions[0]`` is ``None`` for the first step of an iteration.
    """

    actions: list = field(default_factory=list)
    observations: list = field(default_factory=list)
    posteriors: list = field(default_factory=list)

    def append(self, action, observation, posterior) -> None:
        self.actions.append(action)
        self.observations.append(observation)
        self.posteriors.append(posterior)

    def __len__(self):
        return len(self.observations)


def backward_message(likelihoods: Sequence[np.ndarray], transitions: Sequence[np.ndarray]) -> np.ndarray:
    """Backward message ``beta_tau`` from future evidence.

    ``likelihoods[j]`` is ``p(o_{tau+1+j} | s)`` and ``transitions[j]`` the
    matrix carrying step ``tau+j`` to ``tau+1+j``.
    """
    if not likelihoods:
        return None
    beta = np.ones_like(np.asarray(likelihoods[-1], dtype=float))
    for lik, T in zip(reversed(likelihoods), reversed(transitions)):
        beta = T.T @ (lik * beta)
    return beta


def smooth(filtered: np.ndarray, likelihoods, transitions) -> np.ndarray:
    """Reweight a stored filtered posterior by the evidence that followed it."""
    beta = backward_message(likelihoods, transitions)
    if beta is None:
        return np.asarray(filtered, dtype=float)
    out = np.asarray(filtered) * beta
    total = out.sum()
    if not total > 0:
        raise DegenerateEvidenceError("future evidence is impossible under the stored posterior", filtered)
    return out / total


def backwards_smoothing(history: HistoryBuffer, A: np.ndarray, B: np.ndarray, t: int, tau: int) -> np.ndarray:
    """Posterior over a single state factor at step ``tau`` given evidence up to ``t``.

    ``history.observations`` hold outcome indices into ``A`` (``A[o, s]``) and
    ``history.posteriors`` the filtered posteriors; ``B`` is ``(n, n)`` or
    ``(n, n, n_actions)``.
    """
    if tau > t:
        raise ValueError(f"tau={tau} lies after t={t}")
    if t >= len(history):
        raise ValueError(f"history has {len(history)} steps, cannot smooth up to t={t}")
    liks = [np.asarray(A)[history.observations[j]] for j in range(tau + 1, t + 1)]
    trans = [transition_matrix(B, history.actions[j]) for j in range(tau + 1, t + 1)]
    return smooth(history.posteriors[tau], liks, trans)


def update_concentration(counts: DirichletCounts, state_belief, observation: int) -> DirichletCounts:
    """Soft-count update: ``counts[observation] += belief`` over the conditioning cells."""
    belief = np.asarray(state_belief, dtype=float)
    if belief.shape != counts.shape[1:]:
        raise InvalidModelError(f"belief shape {belief.shape} does not match counts {counts.shape[1:]}")
    new = np.array(counts.counts)
    new[int(observation)] += belief
    return DirichletCounts(new, counts.role)

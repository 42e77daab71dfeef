"""The four agents and their online perceive, learn, plan loop."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .belief import (BeliefState, DegenerateEvidenceError, DirichletCounts, HistoryBuffer, bayes_update,
                     normalize_counts, onehot, update_concentration)
from .env import N_ACTIONS, N_RESOURCE_OBS, Action, GridWorld, Observation, advance_clocks
from .planner import VARIANTS, Node, PlanningModel, SearchConfig, SearchVariant, WindowStep, forward_tree_search
from .valuation import PreferenceSpec, UCBState

logger = logging.getLogger(__name__)

SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class AgentConfig:
    algorithm: str = "SL"
    search: SearchConfig = field(default_factory=SearchConfig)
    preference: PreferenceSpec = field(default_factory=PreferenceSpec)
    c_ucb: float = 0.0
    alpha0: float = 0.25
    likelihood_known: bool = False
    transition_known: bool = True

    def __post_init__(self):
        if self.algorithm not in VARIANTS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; expected one of {sorted(VARIANTS)}")
        if self.c_ucb and self.algorithm != "BA+UCB":
            raise ValueError("c_ucb applies to BA+UCB only")
        if self.c_ucb < 0:
            raise ValueError("c_ucb must be nonnegative")
        if not self.alpha0 > 0:
            raise ValueError("alpha0 must be positive")
        if not (self.likelihood_known or self.transition_known):
            raise ValueError("learning the likelihood and the transition together is not supported")

    @property
    def variant(self) -> SearchVariant:
        return VARIANTS[self.algorithm]


def true_likelihood(grid: GridWorld) -> np.ndarray:
    """One-hot resource likelihood ``A[resource, cell, context]`` of a world."""
    A = np.zeros((N_RESOURCE_OBS, grid.n_cells, grid.n_contexts))
    for c in range(grid.n_contexts):
        A[grid.layouts[c], np.arange(grid.n_cells), c] = 1.0
    return A


def context_likelihood(grid: GridWorld) -> np.ndarray:
    """``A[context outcome, cell, context]``: the hill reveals the context, elsewhere NoContext."""
    n = grid.n_contexts
    A = np.zeros((n + 1, grid.n_cells, n))
    A[n] = 1.0
    A[:, grid.hill, :] = 0.0
    A[:n, grid.hill, :] = np.eye(n)
    return A


def position_transitions(grid: GridWorld) -> np.ndarray:
    moves = grid.move_table()
    B = np.zeros((grid.n_cells, grid.n_cells, N_ACTIONS))
    for a in range(N_ACTIONS):
        B[moves[:, a], np.arange(grid.n_cells), a] = 1.0
    return B


@dataclass
class AgentState:
    config: AgentConfig
    grid: GridWorld
    belief: BeliefState
    A_counts: Optional[DirichletCounts]
    A_fixed: Optional[np.ndarray]
    B_counts: Optional[DirichletCounts]
    B_fixed: Optional[np.ndarray]
    ucb: UCBState
    clocks: tuple = (0, 0, 0)
    history: HistoryBuffer = field(default_factory=HistoryBuffer)
    window: list = field(default_factory=list)
    start: int = 0
    steps: int = 0
    hill_visits: int = 0

    def __post_init__(self):
        self._moves = self.grid.move_table()
        self._A_ctx = context_likelihood(self.grid)
        self._B_pos = position_transitions(self.grid)

    # -- model views -----------------------------------------------------------

    @property
    def A_res(self) -> np.ndarray:
        return self.A_fixed if self.A_counts is None else normalize_counts(self.A_counts)

    @property
    def B_ctx(self) -> np.ndarray:
        return self.B_fixed if self.B_counts is None else normalize_counts(self.B_counts)

    @property
    def position(self) -> int:
        return int(np.argmax(self.belief.position))

    def planning_model(self) -> PlanningModel:
        cfg = self.config
        return PlanningModel(
            moves=self._moves, hill=self.grid.hill, A_res=self.A_res, A_ctx=self._A_ctx, B_ctx=self.B_ctx,
            preference=cfg.preference,
            A_counts=None if self.A_counts is None else self.A_counts.counts,
            c_ucb=cfg.c_ucb, visits=self.ucb.visit_counts, t_global=self.ucb.t,
            window=tuple(self.window), distances=self.grid.distances(),
        )

    def root(self) -> Node:
        if self.belief.position.max() < 1.0 - 1e-9:
            raise ValueError("the planner expects a known position")
        return Node(self.position, self.belief.context, tuple(self.clocks), window=tuple(self.window))

    # -- perception and learning ---------------------------------------------

    def perceive(self, observation: Observation, action: Optional[int]) -> None:
        """Filter, learn online, and record one real observation.

        ``action`` is the move that led here (``None`` on the first step).
        """
        o = observation.as_tuple()
        prior = self.belief
        B = [self._B_pos, self.B_ctx]
        A = [self.A_res, self._A_ctx]
        try:
            post = bayes_update(prior, action, o, A, B)
        except DegenerateEvidenceError as err:
            logger.warning("impossible observation %s; keeping the predictive prior", o)
            post = err.fallback
        pos = int(np.argmax(post.position))

        if self.B_counts is not None and action is not None:
            # pairwise posterior over (previous, current) context
            lik = self.A_res[o[0], pos, :] * self._A_ctx[o[1], pos, :]
            xi = lik[:, None] * self.B_ctx * prior.context[None, :]
            total = xi.sum()
            if total > 0:
                self.B_counts = DirichletCounts(self.B_counts.counts + xi / total, self.B_counts.role)

        if self.A_counts is not None:
            credit = np.zeros((self.grid.n_cells, self.grid.n_contexts))
            credit[pos] = post.context
            self.A_counts = update_concentration(self.A_counts, credit, o[0])
            if self.config.variant.smooth_in_tree:
                self.window.append(WindowStep(pos, o, post.context.copy(), post.context.copy()))
                self._smooth_window()

        self.belief = post
        self.history.append(action, o, post)
        if action is not None:
            self.clocks = advance_clocks(self.clocks, o[0])
            self.steps += 1
        if pos == self.grid.hill:
            self.hill_visits += 1
        self.ucb.record(pos)

    def _smooth_window(self) -> None:
        """Re-credit the last ``backwards_horizon`` steps with smoothed posteriors."""
        bh = self.config.search.backwards_horizon
        steps = self.window[-(bh + 1):]
        A = self.A_res
        T = self.B_ctx
        beta = np.ones(self.grid.n_contexts)
        counts = np.array(self.A_counts.counts)
        new_steps = [None] * len(steps)
        for j in range(len(steps) - 1, -1, -1):
            s = steps[j]
            sm = s.filtered * beta
            sm = sm / sm.sum()
            counts[s.obs[0], s.pos, :] += sm - s.credit
            new_steps[j] = replace(s, credit=sm)
            lik = A[s.obs[0], s.pos, :] * self._A_ctx[s.obs[1], s.pos, :]
            beta = T.T @ (lik * beta)
        self.A_counts = DirichletCounts(np.maximum(counts, 1e-12), self.A_counts.role)
        # the oldest step leaves the window with its credit frozen
        self.window = new_steps[-bh:] if bh > 0 else []

    # -- acting -------------------------------------------------------------------

    def action_values(self, rng=None, trace=None) -> np.ndarray:
        values, _ = forward_tree_search(self.root(), self.planning_model(), self.config.search,
                                        self.config.variant, rng=rng, trace=trace)
        return values

    def plan(self, rng=None, trace=None) -> Action:
        return Action(int(np.argmax(self.action_values(rng=rng, trace=trace))))

    def model_error(self) -> float:
        """Mean over (cell, context) of KL(true likelihood || learned likelihood)."""
        if self.A_counts is None:
            return 0.0
        A_true = true_likelihood(self.grid)
        A_hat = self.A_res
        truth = np.argmax(A_true, axis=0)
        picked = np.take_along_axis(A_hat, truth[None], axis=0)[0]
        return float(np.mean(-np.log(picked)))


def make_agent(grid: GridWorld, config: AgentConfig, start: int) -> AgentState:
    n_cells, n_ctx = grid.n_cells, grid.n_contexts
    if config.likelihood_known:
        A_counts, A_fixed = None, true_likelihood(grid)
    else:
        A_counts, A_fixed = DirichletCounts.flat((N_RESOURCE_OBS, n_cells, n_ctx), config.alpha0), None
    if config.transition_known:
        B_counts, B_fixed = None, np.array(grid.context_matrix)
    else:
        B_counts, B_fixed = DirichletCounts.flat((n_ctx, n_ctx), config.alpha0, role="transition-B"), None
    belief = BeliefState(onehot(start, n_cells), np.full(n_ctx, 1.0 / n_ctx))
    return AgentState(config, grid, belief, A_counts, A_fixed, B_counts, B_fixed, UCBState.empty(n_cells), start=start)


def act(agent: AgentState, observation: Observation, action_taken: Optional[int] = None, rng=None, trace=None) -> Action:
    """Perceive ``observation`` (reached via ``action_taken``), learn, then plan the next move."""
    agent.perceive(observation, action_taken)
    return agent.plan(rng=rng, trace=trace)


def reset_for_iteration(agent: AgentState, start: int) -> AgentState:
    """Keep learned counts and visit statistics; reset belief, clocks and history."""
    n_ctx = agent.grid.n_contexts
    agent.belief = BeliefState(onehot(start, agent.grid.n_cells), np.full(n_ctx, 1.0 / n_ctx))
    agent.clocks = (0, 0, 0)
    agent.history = HistoryBuffer()
    agent.window = []
    agent.start = start
    agent.steps = 0
    agent.hill_visits = 0
    return agent


# -- snapshots -----------------------------------------------------------------


def _config_to_dict(cfg: AgentConfig) -> dict:
    d = asdict(cfg)
    d["preference"]["limits"] = list(cfg.preference.limits)
    return d


def _config_from_dict(d: dict) -> AgentConfig:
    d = dict(d)
    pref = dict(d.pop("preference"))
    pref["limits"] = tuple(pref["limits"])
    return AgentConfig(search=SearchConfig(**d.pop("search")), preference=PreferenceSpec(**pref), **d)


def snapshot(agent: AgentState) -> dict:
    g = agent.grid
    return {
        "version": SNAPSHOT_VERSION,
        "config": _config_to_dict(agent.config),
        "grid": {"width": g.width, "height": g.height, "layouts": g.layouts.tolist(),
                 "context_matrix": g.context_matrix.tolist(), "limits": list(g.limits), "penalty": g.penalty},
        "belief": {"position": agent.belief.position.tolist(), "context": agent.belief.context.tolist()},
        "A_counts": None if agent.A_counts is None else agent.A_counts.counts.tolist(),
        "B_counts": None if agent.B_counts is None else agent.B_counts.counts.tolist(),
        "ucb": {"visits": agent.ucb.visit_counts.tolist(), "t": agent.ucb.t},
        "clocks": list(agent.clocks),
        "window": [{"pos": s.pos, "obs": list(s.obs), "filtered": s.filtered.tolist(), "credit": s.credit.tolist()}
                   for s in agent.window],
        "start": agent.start,
    }


def save_snapshot(agent: AgentState, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(snapshot(agent), fh)
        fh.write("\n")


def load_snapshot(path) -> AgentState:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if data.get("version") != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported snapshot version {data.get('version')!r}")
    g = data["grid"]
    grid = GridWorld(g["width"], g["height"], np.array(g["layouts"]), np.array(g["context_matrix"]),
                     tuple(g["limits"]), g["penalty"])
    cfg = _config_from_dict(data["config"])
    agent = make_agent(grid, cfg, data["start"])
    agent.belief = BeliefState(np.array(data["belief"]["position"]), np.array(data["belief"]["context"]))
    if data["A_counts"] is not None:
        agent.A_counts = DirichletCounts(np.array(data["A_counts"]))
    if data["B_counts"] is not None:
        agent.B_counts = DirichletCounts(np.array(data["B_counts"]), role="transition-B")
    agent.ucb = UCBState(np.array(data["ucb"]["visits"], dtype=np.int64), data["ucb"]["t"])
    agent.clocks = tuple(data["clocks"])
    agent.window = [WindowStep(s["pos"], tuple(s["obs"]), np.array(s["filtered"]), np.array(s["credit"]))
                    for s in data["window"]]
    return agent

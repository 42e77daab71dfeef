"""Recursive belief-tree search shared by the four agents.

One search routine covers sophisticated inference (EFE), sophisticated
learning (EFE with in-tree count propagation and retrospective smoothing),
Bayes-adaptive RL (expected reward with in-tree count propagation) and its
UCB-augmented variant.  Node values are "higher is better": negative
expected free energy for the EFE objectives, expected reward otherwise.

The position factor is handled as a point mass (``pos`` is a cell index):
moves are deterministic and the start cell is known, so the agent's
position posterior never spreads.  Uncertainty lives in the context factor.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .belief import DegenerateEvidenceError
from .env import N_ACTIONS, N_RESOURCE_OBS, Action, advance_clocks, violated
from .valuation import PreferenceSpec, dirichlet_kl, increment_kl, outcome_rewards, preferences, to_log_preference

NEG_INF = -math.inf


class Objective(str, enum.Enum):
    EFE = "efe"                      # epistemic + pragmatic (+ predictive novelty)
    EFE_SMOOTHING = "efe-smoothing"  # ... plus in-tree learning and retrospective smoothing
    REWARD = "reward"
    REWARD_UCB = "reward-ucb"


@dataclass(frozen=True)
class SearchVariant:
    objective: Objective
    learn_in_tree: bool
    smooth_in_tree: bool

    def __post_init__(self):
        if self.smooth_in_tree and not self.learn_in_tree:
            raise ValueError("smoothing in-tree requires in-tree learning")

    @property
    def uses_efe(self) -> bool:
        return self.objective in (Objective.EFE, Objective.EFE_SMOOTHING)


VARIANTS = {
    "SI": SearchVariant(Objective.EFE, learn_in_tree=False, smooth_in_tree=False),
    "SL": SearchVariant(Objective.EFE_SMOOTHING, learn_in_tree=True, smooth_in_tree=True),
    "BA": SearchVariant(Objective.REWARD, learn_in_tree=True, smooth_in_tree=False),
    "BA+UCB": SearchVariant(Objective.REWARD_UCB, learn_in_tree=True, smooth_in_tree=False),
}


@dataclass(frozen=True)
class SearchConfig:
    horizon: int = 4
    state_prune_threshold: float = 0.16
    action_prune_margin: float = 3.0
    softmax_temperature: float = 1.0
    observation_expansion: str = "enumerate"   # or "sample"
    backwards_horizon: int = 3
    memoization: bool = True
    belief_quantization: int = 4
    leaf_value: str = "tour"       # or "none"
    leaf_weight: float = 1.0       # raw reward per step of projected survival
    leaf_cap: int = 40             # projected survival is counted up to this many steps
    leaf_uncertainty: float = 4.0  # steps charged per nat of doubt about a resource cell
    leaf_visits: int = 4           # resource visits per projected tour
    check_memo: bool = False
    engine: str = "compiled"       # or "python" (reference implementation)

    def __post_init__(self):
        if self.horizon < 0:
            raise ValueError("horizon must be >= 0")
        if not 0 <= self.state_prune_threshold < 1:
            raise ValueError("state_prune_threshold must lie in [0, 1)")
        if self.observation_expansion not in ("enumerate", "sample"):
            raise ValueError("observation_expansion must be 'enumerate' or 'sample'")
        if self.engine not in ("compiled", "python"):
            raise ValueError("engine must be 'compiled' or 'python'")
        if self.leaf_value not in ("none", "tour"):
            raise ValueError("leaf_value must be 'none' or 'tour'")
        if self.leaf_visits < 1 or self.leaf_cap < 1:
            raise ValueError("leaf_visits and leaf_cap must be >= 1")
        if self.softmax_temperature <= 0:
            raise ValueError("softmax_temperature must be positive")


class MemoConsistencyError(AssertionError):
    pass


@dataclass
class MemoTable:
    entries: dict = field(default_factory=dict)
    hits: int = 0
    misses: int = 0

    def get(self, key):
        entry = self.entries.get(key)
        if entry is None:
            self.misses += 1
        else:
            self.hits += 1
        return entry

    def put(self, key, values, posterior) -> None:
        self.entries[key] = (values, posterior)

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True)
class WindowStep:
    """One step kept for retrospective smoothing (real or imagined)."""

    pos: int
    obs: tuple          # (resource outcome, context outcome)
    filtered: np.ndarray
    credit: np.ndarray  # context weights currently credited to counts[obs[0], pos, :]


@dataclass
class PlanningModel:
    """Everything the search reads about the agent's generative model.

    ``A_res`` holds outcome probabilities ``(4, n_cells, n_ctx)``; when the
    likelihood is being learned ``A_counts`` holds the matching Dirichlet
    counts and ``A_res`` must equal their normalisation.
    """

    moves: np.ndarray
    hill: int
    A_res: np.ndarray
    A_ctx: np.ndarray
    B_ctx: np.ndarray
    preference: PreferenceSpec
    A_counts: Optional[np.ndarray] = None
    c_ucb: float = 0.0
    visits: Optional[np.ndarray] = None
    t_global: int = 0
    window: tuple = ()
    distances: Optional[np.ndarray] = None

    @property
    def n_ctx(self) -> int:
        return self.B_ctx.shape[0]

    @property
    def n_cells(self) -> int:
        return self.moves.shape[0]


@dataclass(frozen=True)
class Node:
    pos: int
    q: np.ndarray
    clocks: tuple
    depth: int = 0
    obs: Optional[tuple] = None
    overlay: dict = field(default_factory=dict)   # cell -> (4, n_ctx) in-tree count delta
    visits: dict = field(default_factory=dict)    # cell -> in-tree visit increments
    window: tuple = ()
    dead: bool = False


def softmax_expectation(values, temperature: float = 1.0) -> float:
    """``softmax(G) . G`` over the finite entries of ``values``."""
    v = np.asarray(values, dtype=float)
    finite = np.isfinite(v)
    if not finite.any():
        return NEG_INF
    v = v[finite]
    z = (v - v.max()) / temperature
    w = np.exp(z)
    w /= w.sum()
    return float(np.dot(w, v))


def viable_actions(values, margin: float) -> list[int]:
    """Actions whose value lies within ``margin`` of the best one."""
    v = np.asarray(values, dtype=float)
    if not np.isfinite(v).any():
        raise ValueError("viable_actions needs at least one finite value")
    best = np.max(v[np.isfinite(v)])
    return [int(a) for a in np.flatnonzero(np.isfinite(v) & (best - v <= margin))]


def likely_states(belief, threshold: float) -> list[int]:
    """States at or above ``threshold``; falls back to the (lowest-index) argmax."""
    p = np.asarray(belief, dtype=float)
    keep = np.flatnonzero(p >= threshold)
    if keep.size == 0:
        return [int(np.argmax(p))]
    return [int(s) for s in keep]


def _key_vec(v, digits: int) -> tuple:
    return tuple(np.round(np.asarray(v, dtype=float), digits).ravel().tolist())


@dataclass
class ActionTerms:
    """Immediate per-action quantities at one node."""

    values: np.ndarray
    pragmatic: np.ndarray
    epistemic: np.ndarray
    novelty: np.ndarray
    bonus: np.ndarray
    positions: list
    obs_lik: list      # per action: (obs tuples, L[n_obs, n_ctx])


class TreeSearch:
    """One forward search from a root node; owns its memo table and counters."""

    def __init__(self, model: PlanningModel, cfg: SearchConfig, variant: SearchVariant,
                 rng: Optional[np.random.Generator] = None, trace=None):
        self.model = model
        self.cfg = cfg
        self.variant = variant
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.trace = trace
        self.memo = MemoTable()
        self.calls = 0
        self.learning = model.A_counts is not None
        self.q_digits = cfg.belief_quantization
        ctx_rows = []
        for cell in range(model.n_cells):
            ctx_rows.append(np.flatnonzero(model.A_ctx[:, cell, :].sum(axis=1) > 0))
        self._ctx_rows = ctx_rows
        self._travel = None

    # -- model access -------------------------------------------------------

    def counts_column(self, pos: int, overlay: dict) -> np.ndarray:
        col = self.model.A_counts[:, pos, :]
        delta = overlay.get(pos)
        return col if delta is None else col + delta

    def resource_column(self, pos: int, overlay: dict) -> np.ndarray:
        if not self.learning:
            return self.model.A_res[:, pos, :]
        if pos not in overlay:
            return self.model.A_res[:, pos, :]
        col = self.counts_column(pos, overlay)
        return col / col.sum(axis=0, keepdims=True)

    def joint_likelihood(self, pos: int, overlay: dict):
        """Observation tuples possible at ``pos`` and their likelihood rows over contexts."""
        A_r = self.resource_column(pos, overlay)
        rows = self._ctx_rows[pos]
        A_k = self.model.A_ctx[rows, pos, :]
        L = (A_r[:, None, :] * A_k[None, :, :]).reshape(-1, A_r.shape[1])
        obs = [(r, int(k)) for r in range(N_RESOURCE_OBS) for k in rows]
        return obs, L

    # -- node evaluation ----------------------------------------------------

    def action_terms(self, node: Node, q_next: np.ndarray) -> ActionTerms:
        model, variant = self.model, self.variant
        n = N_ACTIONS
        pragmatic = np.zeros(n)
        epistemic = np.zeros(n)
        novelty = np.zeros(n)
        bonus = np.zeros(n)
        positions, obs_lik = [], []
        raw = outcome_rewards(node.clocks, model.preference)
        log_pref = to_log_preference(raw, model.preference.c) if variant.uses_efe else None
        per_cell = {}
        for a in range(n):
            p = int(model.moves[node.pos, a])
            positions.append(p)
            if p not in per_cell:
                per_cell[p] = self._cell_terms(p, node, q_next, raw, log_pref)
            prag, epi, nov, ucb, obs, L = per_cell[p]
            pragmatic[a], epistemic[a], novelty[a], bonus[a] = prag, epi, nov, ucb
            obs_lik.append((obs, L))
        values = pragmatic + epistemic + novelty + bonus
        return ActionTerms(values, pragmatic, epistemic, novelty, bonus, positions, obs_lik)

    def _cell_terms(self, p, node, q_next, raw, log_pref):
        model, variant = self.model, self.variant
        obs, L = self.joint_likelihood(p, node.overlay)
        A_r = self.resource_column(p, node.overlay)
        q_res = A_r @ q_next
        epi = nov = ucb = 0.0
        if variant.uses_efe:
            prag = float(np.dot(q_res, log_pref))
            joint = L * q_next
            qo = joint.sum(axis=1)
            live = qo > 0
            jl = joint[live]
            with np.errstate(divide="ignore", invalid="ignore"):
                logs = np.where(jl > 0, np.log(L[live] / qo[live, None]), 0.0)
            epi = max(float(np.sum(jl * logs)), 0.0)
            if self.learning:
                col = self.counts_column(p, node.overlay)
                totals = col.sum(axis=0)
                rr = np.array([o[0] for o in obs])[live]
                post = jl / qo[live, None]
                kl = increment_kl(col[rr], totals[None, :], post).sum(axis=1)
                nov = float(np.dot(qo[live], kl))
        else:
            prag = float(np.dot(q_res, raw))
            if variant.objective is Objective.REWARD_UCB and model.visits is not None:
                visits = model.visits[p] + node.visits.get(p, 0)
                t = max(model.t_global + node.depth + 1, 1)
                ucb = model.c_ucb * math.sqrt(math.log(t) / max(visits, 1.0))
        return prag, epi, nov, ucb, obs, L

    def death_value(self, clocks) -> float:
        """Per-step value of the absorbing dead state."""
        raw = preferences(clocks, self.model.preference)
        if self.variant.uses_efe:
            return float(to_log_preference(raw, self.model.preference.c)[0])
        return float(self.model.preference.penalty)

    def travel_tables(self):
        """Projected travel ``M[x, r, c]`` and destination ``Y[x, r, c]`` for every start cell.

        Travel to a resource cell ``y`` costs ``d(x, y) - beta ln A[r, y, c]``
        under the root model; the destination is the cheapest such cell.
        """
        if self._travel is None:
            dist = self.model.distances.astype(float)
            with np.errstate(divide="ignore"):
                doubt = -self.cfg.leaf_uncertainty * np.log(self.model.A_res[1:])    # (3, n, C)
            cost = dist[:, None, :, None] + doubt[None]                              # (x, r, y, C)
            self._travel = (cost.min(axis=2), cost.argmin(axis=2))
        return self._travel

    def leaf_bonus(self, node: Node, terms: ActionTerms, q_next: np.ndarray) -> np.ndarray:
        """Value-to-go beyond the horizon from projected resource tours.

        For each context the best sequence of ``leaf_visits`` resource visits
        (no immediate repeats) is simulated on the travel table; its survival
        time, capped at ``leaf_cap`` and averaged over the context belief, is
        worth ``leaf_weight`` raw reward per step (times the preference
        precision for EFE objectives).
        """
        cfg = self.cfg
        if cfg.leaf_value == "none" or self.model.distances is None:
            return np.zeros(N_ACTIONS)
        M, Y = self.travel_tables()
        survival = tour_survival(np.asarray(terms.positions), np.asarray(node.clocks) + 1, M, Y,
                                 self.model.preference.limits, _tour_sequences(cfg.leaf_visits), cfg.leaf_cap)
        scale = self.model.preference.c if self.variant.uses_efe else 1.0
        return scale * cfg.leaf_weight * (survival @ q_next - cfg.leaf_cap)

    # -- children -------------------------------------------------------------

    def expansions(self, obs, L, q_next):
        """(weight, observation index) pairs for one action's subtree."""
        thr = self.cfg.state_prune_threshold
        states = [s for s in likely_states(q_next, thr) if q_next[s] > 0]
        mass = sum(q_next[s] for s in states)
        weights = {}
        for s in states:
            col = L[:, s]
            if self.cfg.observation_expansion == "sample":
                tot = col.sum()
                picks = [int(self.rng.choice(col.size, p=col / tot))]
                pw = {picks[0]: 1.0}
            else:
                keep = np.flatnonzero(col >= thr) if thr > 0 else np.flatnonzero(col > 0)
                if keep.size == 0:
                    keep = np.array([int(np.argmax(col))])
                tot = col[keep].sum()
                pw = {int(o): col[o] / tot for o in keep}
            for o, w in pw.items():
                weights.setdefault(o, []).append((s, q_next[s] / mass * w))
        return weights

    def child(self, node: Node, action: int, pos: int, o_idx: int, obs, L, q_next) -> Node:
        o = obs[o_idx]
        post = L[o_idx] * q_next
        total = post.sum()
        if not total > 0:
            raise DegenerateEvidenceError("imagined observation has zero probability", q_next)
        post = post / total
        clocks = advance_clocks(node.clocks, o[0])
        dead = bool(violated(clocks, self.model.preference.limits))
        overlay, visits, window = node.overlay, node.visits, node.window
        if self.variant.learn_in_tree and self.learning and not dead:
            overlay = dict(overlay)
            delta = overlay.get(pos)
            delta = np.zeros((N_RESOURCE_OBS, self.model.n_ctx)) if delta is None else delta.copy()
            delta[o[0]] += post
            overlay[pos] = delta
        if self.variant.objective is Objective.REWARD_UCB:
            visits = dict(visits)
            visits[pos] = visits.get(pos, 0) + 1
        if self.variant.smooth_in_tree and self.learning and not dead:
            window = window + (WindowStep(pos, o, post, post),)
        return Node(pos, post, clocks, node.depth + 1, o, overlay, visits, window, dead)

    def smoothing_novelty(self, node: Node) -> tuple[float, Node]:
        """Re-credit the window with smoothed posteriors; returns (KL gain, updated node)."""
        t_idx = len(node.window) - 1
        bh = self.cfg.backwards_horizon
        steps = list(node.window[max(0, t_idx - bh):])
        T = self.model.B_ctx
        overlay = node.overlay
        liks = []
        for s in steps:
            obs, L = self.joint_likelihood(s.pos, overlay)
            liks.append(L[obs.index(s.obs)])
        beta = np.ones(self.model.n_ctx)
        smoothed = [None] * len(steps)
        for j in range(len(steps) - 1, -1, -1):
            sm = steps[j].filtered * beta
            smoothed[j] = sm / sm.sum()
            beta = T.T @ (liks[j] * beta)
        new_overlay = dict(overlay)
        touched = {}
        new_steps = []
        for s, sm in zip(steps, smoothed):
            change = sm - s.credit
            if np.any(change != 0):
                delta = new_overlay.get(s.pos)
                if s.pos not in touched:
                    touched[s.pos] = self.counts_column(s.pos, overlay)
                    delta = np.zeros((N_RESOURCE_OBS, self.model.n_ctx)) if delta is None else delta.copy()
                delta[s.obs[0]] += change
                new_overlay[s.pos] = delta
            new_steps.append(replace(s, credit=sm))
        gain = 0.0
        for pos, before in touched.items():
            after = self.counts_column(pos, new_overlay)
            gain += float(dirichlet_kl(after, before).sum())
        return gain, replace(node, overlay=new_overlay, window=tuple(new_steps))

    # -- search -----------------------------------------------------------------

    def memo_key(self, node: Node):
        d = self.q_digits
        key = (node.depth, node.pos, _key_vec(node.q, d), node.clocks, node.obs, node.dead)
        if self.variant.learn_in_tree and self.learning:
            key += (tuple((p, _key_vec(v, d)) for p, v in sorted(node.overlay.items())),)
        if self.variant.objective is Objective.REWARD_UCB:
            key += (tuple(sorted(node.visits.items())),)
        if self.variant.smooth_in_tree and self.learning:
            key += (tuple((s.pos, s.obs, _key_vec(s.filtered, d), _key_vec(s.credit, d)) for s in node.window),)
        return key

    def run(self, root: Node):
        values = self._evaluate(root)
        return values, root.q

    def _visit(self, node: Node) -> np.ndarray:
        if not self.cfg.memoization:
            return self._evaluate(node)
        key = self.memo_key(node)
        entry = self.memo.get(key)
        if entry is not None:
            if self.cfg.check_memo:
                fresh = self._evaluate(node, count=False)
                if not np.allclose(fresh, entry[0], atol=1e-9, rtol=0, equal_nan=True):
                    raise MemoConsistencyError(f"memo key collision at depth {node.depth}")
            return entry[0]
        values = self._evaluate(node)
        self.memo.put(key, values, node.q)
        return values

    def _evaluate(self, node: Node, count: bool = True) -> np.ndarray:
        if count:
            self.calls += 1
        cfg = self.cfg
        h = cfg.horizon
        if node.dead:
            return np.full(N_ACTIONS, self.death_value(node.clocks) * (h - node.depth + 1))
        extra = 0.0
        if node.depth > 0 and self.variant.smooth_in_tree and self.learning and node.window:
            extra, node = self.smoothing_novelty(node)
        q_next = self.model.B_ctx @ node.q
        terms = self.action_terms(node, q_next)
        values = terms.values.copy()
        if node.depth >= h:
            values += self.leaf_bonus(node, terms, q_next)
        else:
            actions = viable_actions(values, cfg.action_prune_margin)
            out = np.full(N_ACTIONS, NEG_INF)
            for a in actions:
                obs, L = terms.obs_lik[a]
                future = 0.0
                for o_idx, contribs in self.expansions(obs, L, q_next).items():
                    kid = self.child(node, a, terms.positions[a], o_idx, obs, L, q_next)
                    for _, w in contribs:
                        # each (state, observation) pair is its own recursive call
                        child_values = self._visit(kid)
                        future += w * softmax_expectation(child_values, cfg.softmax_temperature)
                out[a] = values[a] + future
            values = out
        values = values + extra
        if self.trace is not None:
            for a in range(N_ACTIONS):
                self.trace.writerow([node.depth, node.pos, Action(a).name, f"{terms.pragmatic[a]:.6f}",
                                     f"{terms.epistemic[a]:.6f}", f"{terms.novelty[a] + extra:.6f}",
                                     f"{terms.bonus[a]:.6f}", f"{values[a]:.6f}"])
        return values


_SEQUENCES = {}


def _tour_sequences(length: int) -> np.ndarray:
    """All resource visit orders of ``length`` with no resource visited twice in a row."""
    if length not in _SEQUENCES:
        seqs = [[r] for r in range(3)]
        for _ in range(length - 1):
            seqs = [s + [r] for s in seqs for r in range(3) if r != s[-1]]
        _SEQUENCES[length] = np.array(seqs, dtype=np.int64)
    return _SEQUENCES[length]


def tour_survival(starts, clocks, M, Y, limits, sequences, cap) -> np.ndarray:
    """Steps survived along the best visit sequence, per start cell and context.

    Returns ``(len(starts), n_contexts)`` survival times capped at ``cap``.
    Travel times are rounded up to whole steps.
    """
    starts = np.asarray(starts)
    n_ctx = M.shape[2]
    lim = np.asarray(limits, dtype=float)
    S, V = sequences.shape
    # lanes: (start, context, sequence)
    cur = np.broadcast_to(starts[:, None, None], (starts.size, n_ctx, S)).copy()
    ctx = np.broadcast_to(np.arange(n_ctx)[None, :, None], cur.shape)
    k = np.broadcast_to(np.asarray(clocks, dtype=float), cur.shape + (3,)).copy()
    t = np.zeros(cur.shape)
    alive = np.ones(cur.shape, dtype=bool)
    death = np.full(cur.shape, np.inf)
    for v in range(V):
        r = np.broadcast_to(sequences[:, v][None, None, :], cur.shape)
        d = np.maximum(np.ceil(M[cur, r, ctx]), 1.0)
        # a clock dies once it reaches its limit; the target clock resets on arrival
        room = lim - k                                                  # steps until each clock hits its limit
        target = np.take_along_axis(room, r[..., None], axis=-1)[..., 0]
        room_other = np.where(np.arange(3) == r[..., None], np.inf, room).min(axis=-1)
        dies = alive & ((room_other <= d) | (target < d))
        death = np.where(dies, t + np.minimum(room_other, target), death)
        alive &= ~dies
        t = t + d
        k = k + d[..., None]
        np.put_along_axis(k, r[..., None], 0.0, axis=-1)
        cur = Y[cur, r, ctx]
    end = np.where(alive, t + (lim - k).min(axis=-1), death)
    best = np.minimum(end, cap).max(axis=-1)
    return best


TRACE_HEADER = ["depth", "cell", "action", "pragmatic", "epistemic", "novelty", "bonus", "value"]


_OBJECTIVE_CODES = {Objective.EFE: 0, Objective.EFE_SMOOTHING: 1, Objective.REWARD: 2, Objective.REWARD_UCB: 3}


def _arr(x, dtype=float):
    # writable C-contiguous copy, so the kernel sees one array type per argument
    return np.array(x, dtype=dtype, order="C", copy=True)


class CompiledSearch:
    """Same search as :class:`TreeSearch`, run by the compiled kernel.

    Used for enumerate-mode searches without tracing or memo checking.
    """

    def __init__(self, model: PlanningModel, cfg: SearchConfig, variant: SearchVariant):
        from . import _kernels
        self._k = _kernels
        self.model = model
        self.cfg = cfg
        self.variant = variant
        self.memo = _kernels.new_memo()
        self.counters = np.zeros(2, dtype=np.int64)
        self.learning = model.A_counts is not None
        n = model.n_cells
        rows = [np.flatnonzero(model.A_ctx[:, cell, :].sum(axis=1) > 0) for cell in range(n)]
        width = max(len(r) for r in rows)
        self._ctx_rows = np.zeros((n, width), dtype=np.int64)
        self._n_ctx_rows = np.array([len(r) for r in rows], dtype=np.int64)
        for cell, r in enumerate(rows):
            self._ctx_rows[cell, :len(r)] = r
        if cfg.leaf_value == "tour" and model.distances is not None:
            ref = TreeSearch(model, cfg, variant)
            M, Y = ref.travel_tables()
            self._M, self._Y = np.ascontiguousarray(M), np.ascontiguousarray(Y).astype(np.int64)
            self._leaf = True
        else:
            self._M, self._Y = np.zeros((1, 3, 1)), np.zeros((1, 3, 1), dtype=np.int64)
            self._leaf = False

    @property
    def calls(self) -> int:
        return int(self.counters[0])

    @property
    def hits(self) -> int:
        return int(self.counters[1])

    def run(self, root: Node):
        model, cfg = self.model, self.cfg
        C = model.n_ctx
        E = len(root.window) + cfg.horizon + 2
        ent_pos = np.zeros(E, dtype=np.int64)
        ent_r = np.zeros(E, dtype=np.int64)
        ent_k = np.zeros(E, dtype=np.int64)
        ent_filt = np.zeros((E, C))
        ent_credit = np.zeros((E, C))
        ent_base = np.zeros((E, C))
        n_ent = 0
        if self.learning and self.variant.smooth_in_tree:
            for i, st in enumerate(root.window):
                ent_pos[i], ent_r[i], ent_k[i] = st.pos, st.obs[0], st.obs[1]
                ent_filt[i], ent_credit[i], ent_base[i] = st.filtered, st.credit, st.credit
            n_ent = len(root.window)
        path = np.zeros(cfg.horizon + 2, dtype=np.int64)
        counts = model.A_counts if self.learning else np.ones((1, 1, 1))
        visits = model.visits if model.visits is not None else np.zeros(model.n_cells)
        values = self._k.evaluate(
            root.depth, int(root.pos), _arr(root.q), _arr(root.clocks),
            -1, -1, bool(root.dead), ent_pos, ent_r, ent_k, ent_filt, ent_credit, ent_base, n_ent, path, 0,
            _arr(model.moves, np.int64), _arr(model.A_res), _arr(counts), _arr(model.A_ctx),
            self._ctx_rows, self._n_ctx_rows, _arr(model.B_ctx), _arr(model.preference.limits), float(model.preference.empty_reward),
            float(model.preference.penalty), float(model.preference.c), float(model.c_ucb),
            _arr(visits), int(model.t_global), self._M, self._Y, _tour_sequences(cfg.leaf_visits),
            _OBJECTIVE_CODES[self.variant.objective], self.learning, cfg.horizon, float(cfg.state_prune_threshold),
            float(cfg.action_prune_margin), float(cfg.softmax_temperature), cfg.backwards_horizon, self._leaf,
            float(cfg.leaf_weight), float(cfg.leaf_cap), cfg.memoization, float(10 ** cfg.belief_quantization),
            self.memo, self.counters, self._k.new_tour_memo(), int(max(model.preference.limits)) + 2)
        return values, root.q


def make_search(model: PlanningModel, cfg: SearchConfig, variant: SearchVariant, rng=None, trace=None):
    """The compiled engine when it can serve the request, else the reference search."""
    compiled = (cfg.engine == "compiled" and cfg.observation_expansion == "enumerate" and trace is None
                and not cfg.check_memo)
    if compiled:
        return CompiledSearch(model, cfg, variant)
    return TreeSearch(model, cfg, variant, rng=rng, trace=trace)


def forward_tree_search(root: Node, model: PlanningModel, cfg: SearchConfig, variant: SearchVariant,
                        rng=None, trace=None):
    """Values of every root action and the root posterior.

    Pruned actions carry ``-inf``.
    """
    search = make_search(model, cfg, variant, rng=rng, trace=trace)
    values, posterior = search.run(root)
    return values, posterior


def plan(model: PlanningModel, root: Node, cfg: SearchConfig, variant: SearchVariant, rng=None, trace=None) -> Action:
    """Greedy choice at the root; ties go to the earlier action in (Up, Down, Left, Right, Stay)."""
    values, _ = forward_tree_search(root, model, cfg, variant, rng=rng, trace=trace)
    return Action(int(np.argmax(values)))


def count_function_calls(model: PlanningModel, root: Node, cfg: SearchConfig, variant: SearchVariant):
    """Recursive-call counts with and without memoisation, plus both root value vectors."""
    with_memo = make_search(model, replace(cfg, memoization=True), variant)
    v_memo, _ = with_memo.run(root)
    without = make_search(model, replace(cfg, memoization=False), variant)
    v_plain, _ = without.run(root)
    return with_memo.calls, without.calls, v_memo, v_plain

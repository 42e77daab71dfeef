"""Experiment orchestration: trials, seeding, records, statistics and charts."""

from __future__ import annotations

import csv
import logging
import os
import warnings
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Iterable, Optional

import numpy as np
from scipy import stats as sps

from .agents import AgentConfig, make_agent, reset_for_iteration, save_snapshot
from .env import (EnvState, GridWorld, Outcome, Resource, generate_layout, make_world, observe, seasonal_matrix,
                  step)
from .planner import TRACE_HEADER, SearchConfig
from .valuation import PreferenceSpec

logger = logging.getLogger(__name__)

ALGORITHMS = ("SL", "SI", "BA", "BA+UCB")
SCENARIOS = ("full-model", "unknown-likelihood", "unknown-transition")
CSV_HEADER = ["algorithm", "episode", "iteration", "steps_survived", "outcome", "death_cause",
              "hill_visits", "model_error", "seed"]
EVENT_HEADER = ["algorithm", "episode", "iteration", "first_resource_step", "first_hill_step",
                "hill_within_window", "window"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    width: int = 10
    height: int = 10
    cells_per_resource: int = 1
    limits: tuple = (20, 22, 25)
    penalty: float = -100.0
    n_contexts: int = 4
    stay: float = 0.95
    layouts: Optional[tuple] = None         # fixed (context, cell) resource codes for every episode
    context_matrix: Optional[tuple] = None  # overrides the seasonal matrix built from ``stay``

    def __post_init__(self):
        if len(self.limits) != 3 or min(self.limits) < 1:
            raise ConfigError("grid limits must be three positive integers (food, water, sleep)")
        if self.width < 1 or self.height < 1:
            raise ConfigError("grid width and height must be >= 1")


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str = "unknown-likelihood"
    algorithms: tuple = ALGORITHMS
    episodes: int = 30
    iterations: int = 120
    max_steps: int = 100
    seed: int = 0
    grid: GridSpec = field(default_factory=GridSpec)
    search: SearchConfig = field(default_factory=SearchConfig)
    preference: PreferenceSpec = field(default_factory=PreferenceSpec)
    alpha0: float = 0.25
    c_ucb: float = 1.0
    start: str = "random"
    out_dir: Optional[str] = None
    workers: int = 1
    trace: bool = False

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}")
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad or not self.algorithms:
            raise ConfigError(f"unknown algorithms {bad}")
        for name in ("episodes", "iterations", "max_steps", "workers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.start != "random":
            parse_cell(self.start)
        if tuple(self.preference.limits) != tuple(self.grid.limits) or self.preference.penalty != self.grid.penalty:
            raise ConfigError("preference limits and penalty must match the grid")

    @classmethod
    def desk(cls, **overrides) -> "ExperimentConfig":
        base = cls(episodes=10, iterations=60, search=SearchConfig(horizon=3))
        return replace(base, **overrides)

    @classmethod
    def paper(cls, **overrides) -> "ExperimentConfig":
        base = cls(episodes=30, iterations=120, search=SearchConfig(horizon=4))
        return replace(base, **overrides)

    def agent_config(self, algorithm: str) -> AgentConfig:
        return AgentConfig(
            algorithm=algorithm, search=self.search, preference=self.preference,
            c_ucb=self.c_ucb if algorithm == "BA+UCB" else 0.0, alpha0=self.alpha0,
            likelihood_known=self.scenario != "unknown-likelihood",
            transition_known=self.scenario != "unknown-transition",
        )


def parse_cell(text: str) -> tuple[int, int]:
    try:
        x, y = (int(v) for v in text.split(","))
    except ValueError as err:
        raise ConfigError(f"cell must look like 'x,y', got {text!r}") from err
    return x, y


@dataclass(frozen=True)
class TrialRecord:
    algorithm: str
    episode: int
    iteration: int
    steps_survived: int
    outcome: str
    death_cause: str
    hill_visits: int
    model_error: float
    seed: int

    def row(self) -> list[str]:
        return [self.algorithm, str(self.episode), str(self.iteration), str(self.steps_survived), self.outcome,
                self.death_cause, str(self.hill_visits), f"{self.model_error:.6f}", str(self.seed)]

    @property
    def key(self):
        return (ALGORITHMS.index(self.algorithm), self.episode, self.iteration)


@dataclass(frozen=True)
class DiscoveryEvent:
    algorithm: str
    episode: int
    iteration: int
    first_resource_step: int
    first_hill_step: int        # -1 if the hill was never visited
    hill_within_window: bool
    window: int

    def row(self) -> list[str]:
        return [self.algorithm, str(self.episode), str(self.iteration), str(self.first_resource_step),
                str(self.first_hill_step), str(int(self.hill_within_window)), str(self.window)]


# -- seeding ---------------------------------------------------------------------

_LAYOUT, _ENV, _ALG = 0, 1, 2


def layout_seed(master: int, episode: int) -> int:
    return int(np.random.SeedSequence([master, _LAYOUT, episode]).generate_state(1)[0])


def env_seed(master: int, episode: int, iteration: int) -> int:
    """Shared by all algorithms so they face the same season sequences and start cells."""
    return int(np.random.SeedSequence([master, _ENV, episode, iteration]).generate_state(1)[0])


def agent_seed(master: int, episode: int, iteration: int, algorithm: str) -> int:
    return int(np.random.SeedSequence([master, _ALG, episode, iteration, ALGORITHMS.index(algorithm)]).generate_state(1)[0])


def episode_world(cfg: ExperimentConfig, episode: int) -> GridWorld:
    g = cfg.grid
    if g.layouts is not None or g.context_matrix is not None:
        layouts = (np.array(g.layouts, dtype=int) if g.layouts is not None
                   else generate_layout(layout_seed(cfg.seed, episode), g.cells_per_resource, g.width, g.height,
                                        g.n_contexts))
        T = np.array(g.context_matrix, dtype=float) if g.context_matrix is not None else seasonal_matrix(g.n_contexts, g.stay)
        return GridWorld(g.width, g.height, layouts, T, tuple(g.limits), g.penalty)
    return make_world(layout_seed(cfg.seed, episode), g.width, g.height, g.cells_per_resource, g.limits,
                      g.penalty, g.n_contexts, g.stay)


def start_cell(cfg: ExperimentConfig, grid: GridWorld, rng: np.random.Generator) -> int:
    if cfg.start != "random":
        cell = grid.index(parse_cell(cfg.start))
        if not 0 <= cell < grid.n_cells or cell == grid.hill:
            raise ConfigError("start cell must be inside the grid and off the hill")
        return cell
    free = [c for c in range(grid.n_cells) if c != grid.hill]
    return int(rng.choice(free))


# -- trials ------------------------------------------------------------------------


def run_trial(agent, grid: GridWorld, cfg: ExperimentConfig, episode: int, iteration: int, trace=None):
    """One iteration from a fresh start to death or ``max_steps``.

    Returns ``(TrialRecord, DiscoveryEvent or None)``; the agent is left in its
    end-of-trial state.
    """
    seed = env_seed(cfg.seed, episode, iteration)
    env_rng = np.random.default_rng(seed)
    alg_rng = np.random.default_rng(agent_seed(cfg.seed, episode, iteration, agent.config.algorithm))
    start = start_cell(cfg, grid, env_rng)
    context = int(env_rng.integers(grid.n_contexts))
    reset_for_iteration(agent, start)
    state = EnvState(grid.xy(start), context)
    agent.perceive(observe(state, grid), None)
    first_resource = first_hill = -1
    outcome = Outcome.ALIVE
    while outcome is Outcome.ALIVE:
        action = agent.plan(rng=alg_rng, trace=trace)
        state, obs, outcome = step(state, action, grid, env_rng, cfg.max_steps)
        agent.perceive(obs, action)
        if first_resource < 0 and obs.resource != Resource.EMPTY:
            first_resource = state.t
        if first_hill < 0 and grid.index(state.position) == grid.hill:
            first_hill = state.t
    cause = "+".join(r.name.capitalize() for r, k, lim in zip((Resource.FOOD, Resource.WATER, Resource.SLEEP),
                                                               state.clocks, grid.limits) if k >= lim)
    record = TrialRecord(agent.config.algorithm, episode, iteration, state.t, outcome.value, cause,
                         agent.hill_visits, agent.model_error(), seed)
    event = None
    if first_resource >= 0:
        window = cfg.search.backwards_horizon + 2
        hit = _hill_after(agent, grid, first_resource, window)
        event = DiscoveryEvent(agent.config.algorithm, episode, iteration, first_resource, first_hill, hit, window)
    return record, event


def _hill_after(agent, grid: GridWorld, t0: int, window: int) -> bool:
    """Whether the agent stood on the hill at any step in ``(t0, t0 + window]``."""
    positions = [int(np.argmax(p.position)) for p in agent.history.posteriors]
    return any(positions[t] == grid.hill for t in range(t0 + 1, min(t0 + window, len(positions) - 1) + 1))


def run_episode(cfg: ExperimentConfig, algorithm: str, episode: int, on_record=None):
    grid = episode_world(cfg, episode)
    agent = make_agent(grid, cfg.agent_config(algorithm), 0)
    records, events = [], []
    trace_writer = None
    trace_fh = None
    if cfg.trace and cfg.out_dir:
        trace_fh = open(os.path.join(cfg.out_dir, f"trace_{algorithm.replace('+', '_')}_{episode}.csv"), "w",
                        newline="", encoding="utf-8")
        trace_writer = csv.writer(trace_fh, lineterminator="\n")
        trace_writer.writerow(TRACE_HEADER)
    try:
        for it in range(cfg.iterations):
            rec, ev = run_trial(agent, grid, cfg, episode, it, trace=trace_writer)
            records.append(rec)
            if ev is not None:
                events.append(ev)
            if on_record is not None:
                on_record(rec, ev)
    finally:
        if trace_fh is not None:
            trace_fh.close()
    if cfg.out_dir:
        states = os.path.join(cfg.out_dir, "states")
        os.makedirs(states, exist_ok=True)
        save_snapshot(agent, os.path.join(states, f"{algorithm.replace('+', '_')}_{episode}.json"))
    return records, events


def _episode_job(args):
    cfg, algorithm, episode = args
    return run_episode(cfg, algorithm, episode)


def run_experiment(cfg: ExperimentConfig, progress=None):
    """All algorithms x episodes x iterations; returns ``(records, events)`` sorted by key.

    With ``out_dir`` set, records are appended to ``records.csv`` as they are
    produced and the file is rewritten in key order at the end, so the final
    bytes do not depend on the worker count.
    """
    jobs = [(cfg, alg, ep) for alg in cfg.algorithms for ep in range(cfg.episodes)]
    records, events = [], []
    sink = None
    if cfg.out_dir:
        os.makedirs(cfg.out_dir, exist_ok=True)
        sink = open(os.path.join(cfg.out_dir, "records.csv"), "w", newline="", encoding="utf-8")
        writer = csv.writer(sink, lineterminator="\n")
        writer.writerow(CSV_HEADER)

    def collect(result):
        recs, evs = result
        records.extend(recs)
        events.extend(evs)
        if sink is not None:
            for r in recs:
                writer.writerow(r.row())
            sink.flush()
        if progress is not None:
            progress(len(records))

    try:
        if cfg.workers > 1 and len(jobs) > 1 and not cfg.trace:
            from concurrent.futures import ProcessPoolExecutor
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                for result in pool.map(_episode_job, jobs):
                    collect(result)
        else:
            for job in jobs:
                collect(_episode_job(job))
    finally:
        if sink is not None:
            sink.close()
    records.sort(key=lambda r: r.key)
    events.sort(key=lambda e: (ALGORITHMS.index(e.algorithm), e.episode, e.iteration))
    if cfg.out_dir:
        write_records(records, os.path.join(cfg.out_dir, "records.csv"))
        write_events(events, os.path.join(cfg.out_dir, "events.csv"))
    return records, events


# -- persistence ----------------------------------------------------------------------


def write_records(records: Iterable[TrialRecord], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in records:
            writer.writerow(r.row())


def read_records(path) -> list[TrialRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER:
            raise ConfigError(f"unexpected CSV header {reader.fieldnames}")
        return [TrialRecord(r["algorithm"], int(r["episode"]), int(r["iteration"]), int(r["steps_survived"]),
                            r["outcome"], r["death_cause"], int(r["hill_visits"]), float(r["model_error"]),
                            int(r["seed"])) for r in reader]


def write_events(events: Iterable[DiscoveryEvent], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EVENT_HEADER)
        for e in events:
            writer.writerow(e.row())


def read_events(path) -> list[DiscoveryEvent]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [DiscoveryEvent(r["algorithm"], int(r["episode"]), int(r["iteration"]), int(r["first_resource_step"]),
                               int(r["first_hill_step"]), r["hill_within_window"] == "1", int(r["window"]))
                for r in csv.DictReader(fh)]


# -- statistics -------------------------------------------------------------------------


def one_way_anova(groups) -> tuple[float, float]:
    """Between/within mean-square ratio and its right-tail F probability."""
    groups = [np.asarray(g, dtype=float) for g in groups]
    if len(groups) < 2 or any(g.size < 2 for g in groups):
        raise ValueError("one_way_anova needs >= 2 groups with >= 2 samples each")
    n = sum(g.size for g in groups)
    k = len(groups)
    grand = np.concatenate(groups).mean()
    ss_between = sum(g.size * (g.mean() - grand) ** 2 for g in groups)
    ss_within = sum(((g - g.mean()) ** 2).sum() for g in groups)
    df_b, df_w = k - 1, n - k
    if ss_within == 0:
        warnings.warn("zero within-group variance; using the degenerate limit", RuntimeWarning)
        if ss_between == 0:
            return 0.0, 1.0
        return float("inf"), 0.0
    F = (ss_between / df_b) / (ss_within / df_w)
    return float(F), float(sps.f.sf(F, df_b, df_w))


@dataclass(frozen=True)
class Contrast:
    first: str
    second: str
    estimate: float
    ci_low: float
    ci_high: float
    p: float

    @property
    def excludes_zero(self) -> bool:
        return self.ci_low > 0 or self.ci_high < 0


def _window_samples(records, algorithm, window, unit):
    lo, hi = window
    rows = [r for r in records if r.algorithm == algorithm and lo <= r.iteration <= hi]
    if unit == "episode":
        eps = sorted({r.episode for r in rows})
        return np.array([np.mean([r.steps_survived for r in rows if r.episode == e]) for e in eps])
    return np.array([r.steps_survived for r in rows], dtype=float)


def bootstrap_contrasts(records, window, n_boot: int = 10_000, seed: int = 0, unit: str = "trial",
                        level: float = 0.95) -> dict:
    """Pairwise differences of window means with percentile bootstrap intervals.

    ``window`` is an inclusive iteration range ``(a, b)``.  Keys are
    ``(first, second)`` pairs in the canonical algorithm order; estimates are
    ``mean(first) - mean(second)``.
    """
    if unit not in ("trial", "episode"):
        raise ConfigError("unit must be 'trial' or 'episode'")
    present = [a for a in ALGORITHMS if any(r.algorithm == a for r in records)]
    if len(present) < 2:
        raise ConfigError("bootstrap_contrasts needs at least two algorithms")
    samples = {a: _window_samples(records, a, window, unit) for a in present}
    for a, s in samples.items():
        if s.size == 0:
            raise ConfigError(f"no records for {a} in iteration window {window}")
    rng = np.random.default_rng(seed)
    means = {}
    for a in present:
        s = samples[a]
        idx = rng.integers(0, s.size, size=(n_boot, s.size))
        means[a] = s[idx].mean(axis=1)
    alpha = (1 - level) / 2
    out = {}
    for a, b in combinations(present, 2):
        diff = means[a] - means[b]
        est = float(samples[a].mean() - samples[b].mean())
        lo, hi = np.quantile(diff, [alpha, 1 - alpha])
        p = float(min(1.0, 2 * min((diff <= 0).mean(), (diff >= 0).mean())))
        out[(a, b)] = Contrast(a, b, est, float(lo), float(hi), p)
    return out


@dataclass(frozen=True)
class SummaryStats:
    curves: dict       # algorithm -> array (iterations, 3): mean, sd, n
    anova: tuple
    contrasts: dict


def learning_curves(records) -> dict:
    out = {}
    for a in ALGORITHMS:
        rows = [r for r in records if r.algorithm == a]
        if not rows:
            continue
        n_it = max(r.iteration for r in rows) + 1
        table = np.zeros((n_it, 3))
        for it in range(n_it):
            v = np.array([r.steps_survived for r in rows if r.iteration == it], dtype=float)
            table[it] = (v.mean(), v.std(ddof=1) if v.size > 1 else 0.0, v.size)
        out[a] = table
    return out


def summarize(records, window) -> SummaryStats:
    lo, hi = window
    groups = [[r.steps_survived for r in records if r.algorithm == a and lo <= r.iteration <= hi]
              for a in ALGORITHMS]
    groups = [g for g in groups if g]
    anova = one_way_anova(groups) if len(groups) >= 2 else (float("nan"), float("nan"))
    return SummaryStats(learning_curves(records), anova, bootstrap_contrasts(records, window))


# -- charts ----------------------------------------------------------------------------------

_COLORS = {"SL": "#1b9e77", "SI": "#d95f02", "BA": "#7570b3", "BA+UCB": "#e7298a"}
SVG_NS = "http://www.w3.org/2000/svg"


def moving_average(values, width: int = 5) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    out = np.empty_like(v)
    for i in range(v.size):
        out[i] = v[max(0, i - width + 1):i + 1].mean()
    return out


def emit_learning_curves(records, out_path, window: int = 5, width: int = 720, height: int = 420) -> None:
    """Write an SVG chart of mean survival per iteration and the plotted table as CSV."""
    curves = learning_curves(records)
    if not curves:
        raise ValueError("emit_learning_curves needs records")
    left, right, top, bottom = 60, 130, 20, 50
    pw, ph = width - left - right, height - top - bottom
    n_it = max(t.shape[0] for t in curves.values())
    y_max = max(1.0, max(float(t[:, 0].max()) for t in curves.values()))
    y_max = float(np.ceil(y_max / 10.0) * 10)

    def sx(i):
        return left + (pw * i / (n_it - 1) if n_it > 1 else pw / 2)

    def sy(v):
        return top + ph * (1 - v / y_max)

    svg = ET.Element("svg", {"xmlns": SVG_NS, "version": "1.1", "width": str(width), "height": str(height),
                             "viewBox": f"0 0 {width} {height}"})
    ET.SubElement(svg, "title").text = "Mean steps survived per iteration"
    ET.SubElement(svg, "rect", {"x": "0", "y": "0", "width": str(width), "height": str(height), "fill": "white"})
    axes = ET.SubElement(svg, "g", {"id": "axes", "stroke": "black", "stroke-width": "1"})
    ET.SubElement(axes, "line", {"x1": str(left), "y1": str(top + ph), "x2": str(left + pw), "y2": str(top + ph)})
    ET.SubElement(axes, "line", {"x1": str(left), "y1": str(top), "x2": str(left), "y2": str(top + ph)})
    labels = ET.SubElement(svg, "g", {"id": "labels", "font-family": "sans-serif", "font-size": "11"})
    for k in range(6):
        v = y_max * k / 5
        t = ET.SubElement(labels, "text", {"x": str(left - 6), "y": f"{sy(v) + 4:.2f}", "text-anchor": "end"})
        t.text = f"{v:g}"
    for i in sorted({0, n_it - 1, (n_it - 1) // 2}):
        t = ET.SubElement(labels, "text", {"x": f"{sx(i):.2f}", "y": str(top + ph + 16), "text-anchor": "middle"})
        t.text = str(i + 1)
    ET.SubElement(labels, "text", {"x": str(left + pw / 2), "y": str(height - 10), "text-anchor": "middle"}).text = "iteration"
    ET.SubElement(labels, "text", {"x": "14", "y": str(top + ph / 2), "text-anchor": "middle",
                                   "transform": f"rotate(-90 14 {top + ph / 2})"}).text = "steps survived"
    series = ET.SubElement(svg, "g", {"id": "series", "fill": "none"})
    legend = ET.SubElement(svg, "g", {"id": "legend", "font-family": "sans-serif", "font-size": "12"})
    for j, (alg, table) in enumerate(curves.items()):
        color = _COLORS[alg]
        mean = table[:, 0]
        pts = " ".join(f"{sx(i):.2f},{sy(v):.2f}" for i, v in enumerate(mean))
        ET.SubElement(series, "polyline", {"class": "mean", "data-algorithm": alg, "points": pts,
                                           "stroke": color, "stroke-width": "1", "stroke-opacity": "0.45"})
        ma = moving_average(mean, window)
        pts = " ".join(f"{sx(i):.2f},{sy(v):.2f}" for i, v in enumerate(ma))
        ET.SubElement(series, "polyline", {"class": "moving-average", "data-algorithm": alg, "points": pts,
                                           "stroke": color, "stroke-width": "2.5"})
        ly = top + 14 + 20 * j
        ET.SubElement(legend, "line", {"x1": str(left + pw + 12), "y1": str(ly - 4), "x2": str(left + pw + 36),
                                       "y2": str(ly - 4), "stroke": color, "stroke-width": "2.5"})
        t = ET.SubElement(legend, "text", {"class": "legend-entry", "x": str(left + pw + 42), "y": str(ly)})
        t.text = alg
    tree = ET.ElementTree(svg)
    ET.indent(tree)
    with open(out_path, "wb") as fh:
        tree.write(fh, encoding="utf-8", xml_declaration=True)
    table_path = os.path.splitext(str(out_path))[0] + ".csv"
    with open(table_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["algorithm", "iteration", "mean", "sd", "n", "moving_average"])
        for alg, table in curves.items():
            ma = moving_average(table[:, 0], window)
            for i, (m, sd, n) in enumerate(table):
                writer.writerow([alg, i, f"{m:.6f}", f"{sd:.6f}", int(n), f"{ma[i]:.6f}"])


_SVG_ALLOWED = {"svg", "g", "title", "desc", "rect", "line", "polyline", "polygon", "path", "circle", "text"}
_REQUIRED = {"rect": ("width", "height"), "line": ("x1", "y1", "x2", "y2"), "polyline": ("points",),
             "polygon": ("points",), "circle": ("r",), "path": ("d",)}


def validate_svg(source) -> list[str]:
    """Structural checks against a small SVG 1.1 subset; returns a list of problems."""
    problems = []
    try:
        root = ET.parse(source).getroot() if not isinstance(source, bytes) else ET.fromstring(source)
    except ET.ParseError as err:
        return [f"not well-formed XML: {err}"]
    if root.tag != f"{{{SVG_NS}}}svg":
        problems.append(f"root element is {root.tag}, expected svg in the SVG namespace")
    if root.get("version") not in (None, "1.1"):
        problems.append("svg version must be 1.1")
    for attr in ("width", "height", "viewBox"):
        if root.get(attr) is None:
            problems.append(f"root lacks {attr}")
    for el in root.iter():
        tag = el.tag.split("}")[-1]
        if not el.tag.startswith(f"{{{SVG_NS}}}"):
            problems.append(f"element {el.tag} outside the SVG namespace")
        if tag not in _SVG_ALLOWED:
            problems.append(f"unsupported element {tag}")
        for attr in _REQUIRED.get(tag, ()):
            if el.get(attr) is None:
                problems.append(f"{tag} lacks required attribute {attr}")
        if tag in ("polyline", "polygon"):
            try:
                nums = [float(v) for v in el.get("points", "").replace(",", " ").split()]
            except ValueError:
                problems.append(f"{tag} has non-numeric points")
                continue
            if len(nums) % 2 or len(nums) < 2:
                problems.append(f"{tag} points must be coordinate pairs")
    return problems

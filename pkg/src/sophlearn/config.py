"""Flat ``key = value`` experiment configuration files.

One setting per line, ``#`` starts a comment, blank lines are ignored and
keys are case sensitive.  Every key is optional; missing keys keep the
defaults of :class:`~sophlearn.harness.ExperimentConfig`.  Run
``sophlearn config`` to print a complete file with all defaults.

Keys
----
``scenario``                  full-model | unknown-likelihood | unknown-transition
``algorithms``                comma list drawn from SL, SI, BA, BA+UCB
``episodes``, ``iterations``, ``max_steps``, ``seed``, ``workers``
``start``                     ``random`` or a cell ``x,y`` (never the hill)
``trace``                     true | false, per-step planner trace CSVs
``grid.width``, ``grid.height``
``grid.k``                    resource cells per resource per context
``grid.limits``               food, water, sleep limits, e.g. ``20,22,25``
``grid.penalty``              death reward (also the preference penalty)
``grid.contexts``, ``grid.stay``
``grid.context_matrix``       rows separated by ``;``, entries by ``,``
``layout.<c>``                fixed layout for context ``c``: ``Food@x,y;Water@x,y;...``
``preference.c``              preference precision
``preference.empty``          reward of an empty cell
``agent.alpha0``              flat prior concentration of learned matrices
``agent.c_ucb``               UCB weight of BA+UCB
``search.*``                  any field of :class:`~sophlearn.planner.SearchConfig`,
                              e.g. ``search.horizon``, ``search.state_prune_threshold``
"""

from __future__ import annotations

from dataclasses import fields, replace

from .env import LayoutConfigError, layout_from_text, layout_to_text, matrix_from_text, matrix_to_text
from .harness import ALGORITHMS, ConfigError, ExperimentConfig, GridSpec
from .planner import SearchConfig
from .valuation import PreferenceSpec


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _ints(text: str) -> tuple:
    return tuple(int(v) for v in text.split(","))


_TOP = {
    "scenario": ("scenario", str),
    "algorithms": ("algorithms", lambda t: tuple(a.strip() for a in t.split(",") if a.strip())),
    "episodes": ("episodes", int),
    "iterations": ("iterations", int),
    "max_steps": ("max_steps", int),
    "seed": ("seed", int),
    "workers": ("workers", int),
    "start": ("start", str),
    "trace": ("trace", _bool),
    "agent.alpha0": ("alpha0", float),
    "agent.c_ucb": ("c_ucb", float),
}
_GRID = {
    "grid.width": ("width", int),
    "grid.height": ("height", int),
    "grid.k": ("cells_per_resource", int),
    "grid.limits": ("limits", _ints),
    "grid.penalty": ("penalty", float),
    "grid.contexts": ("n_contexts", int),
    "grid.stay": ("stay", float),
}
_PREF = {
    "preference.c": ("c", float),
    "preference.empty": ("empty_reward", float),
}


def _search_parsers() -> dict:
    out = {}
    for f in fields(SearchConfig):
        kind = type(getattr(SearchConfig(), f.name))
        parse = _bool if kind is bool else kind
        out[f"search.{f.name}"] = (f.name, parse)
    return out


def parse_text(text: str) -> dict[str, str]:
    entries: dict[str, str] = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {n}: expected 'key = value'")
        key = key.strip()
        if key in entries:
            raise ConfigError(f"line {n}: duplicate key {key!r}")
        entries[key] = value.strip()
    return entries


def config_from_entries(entries: dict[str, str], base: ExperimentConfig | None = None) -> ExperimentConfig:
    base = base or ExperimentConfig()
    search_keys = _search_parsers()
    top, grid, pref, search = {}, {}, {}, {}
    layout_entries = {}
    for key, value in entries.items():
        try:
            if key in _TOP:
                name, parse = _TOP[key]
                top[name] = parse(value)
            elif key in _GRID:
                name, parse = _GRID[key]
                grid[name] = parse(value)
            elif key in _PREF:
                name, parse = _PREF[key]
                pref[name] = parse(value)
            elif key in search_keys:
                name, parse = search_keys[key]
                search[name] = parse(value)
            elif key == "grid.context_matrix":
                grid["context_matrix"] = tuple(map(tuple, matrix_from_text(value).tolist()))
            elif key.startswith("layout."):
                layout_entries[key] = value
            else:
                raise ConfigError(f"unknown key {key!r}")
        except (ValueError, TypeError) as err:
            if isinstance(err, ConfigError):
                raise
            raise ConfigError(f"bad value for {key!r}: {err}") from err
    try:
        g = replace(base.grid, **grid)
        if layout_entries:
            lay = layout_from_text(layout_entries, g.width, g.height, g.n_contexts)
            g = replace(g, layouts=tuple(map(tuple, lay.tolist())))
        p = replace(base.preference, limits=tuple(g.limits), penalty=g.penalty, **pref)
        s = replace(base.search, **search)
        return replace(base, grid=g, preference=p, search=s, **top)
    except (LayoutConfigError, ValueError, TypeError) as err:
        if isinstance(err, ConfigError):
            raise
        raise ConfigError(str(err)) from err


def load_config(path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return config_from_entries(parse_text(fh.read()), base)


def dump_config(cfg: ExperimentConfig) -> str:
    """A complete config file reproducing ``cfg``."""
    lines = [
        f"scenario = {cfg.scenario}",
        f"algorithms = {','.join(cfg.algorithms)}",
        f"episodes = {cfg.episodes}",
        f"iterations = {cfg.iterations}",
        f"max_steps = {cfg.max_steps}",
        f"seed = {cfg.seed}",
        f"workers = {cfg.workers}",
        f"start = {cfg.start}",
        f"trace = {str(cfg.trace).lower()}",
        "",
        f"grid.width = {cfg.grid.width}",
        f"grid.height = {cfg.grid.height}",
        f"grid.k = {cfg.grid.cells_per_resource}",
        f"grid.limits = {','.join(str(v) for v in cfg.grid.limits)}",
        f"grid.penalty = {cfg.grid.penalty!r}",
        f"grid.contexts = {cfg.grid.n_contexts}",
        f"grid.stay = {cfg.grid.stay!r}",
    ]
    if cfg.grid.context_matrix is not None:
        lines.append(f"grid.context_matrix = {matrix_to_text(cfg.grid.context_matrix)}")
    if cfg.grid.layouts is not None:
        for key, value in layout_to_text(cfg.grid.layouts, cfg.grid.width).items():
            lines.append(f"{key} = {value}")
    lines += [
        "",
        f"preference.c = {cfg.preference.c!r}",
        f"preference.empty = {cfg.preference.empty_reward!r}",
        f"agent.alpha0 = {cfg.alpha0!r}",
        f"agent.c_ucb = {cfg.c_ucb!r}",
        "",
    ]
    for f in fields(SearchConfig):
        value = getattr(cfg.search, f.name)
        text = str(value).lower() if isinstance(value, bool) else repr(value) if isinstance(value, float) else str(value)
        lines.append(f"search.{f.name} = {text}")
    return "\n".join(lines) + "\n"


__all__ = ["ALGORITHMS", "GridSpec", "PreferenceSpec", "config_from_entries", "dump_config", "load_config",
           "parse_text"]

"""Seasonal foraging grid world (the ground-truth generative process).

Axis convention: cells are ``(x, y)`` with the origin at the top-left,
``Up`` decreases ``y``; flat indices are row-major, ``y * width + x``.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np


class Action(enum.IntEnum):
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3
    STAY = 4


ACTIONS = tuple(Action)
N_ACTIONS = len(ACTIONS)
_DELTAS = {Action.UP: (0, -1), Action.DOWN: (0, 1), Action.LEFT: (-1, 0), Action.RIGHT: (1, 0), Action.STAY: (0, 0)}


class Season(enum.IntEnum):
    SUMMER = 0
    SPRING = 1
    AUTUMN = 2
    WINTER = 3


class Resource(enum.IntEnum):
    EMPTY = 0
    FOOD = 1
    WATER = 2
    SLEEP = 3


RESOURCES = (Resource.FOOD, Resource.WATER, Resource.SLEEP)
N_RESOURCE_OBS = len(Resource)


class Outcome(str, enum.Enum):
    ALIVE = "Alive"
    DEAD = "Dead"
    MAX_STEPS = "MaxSteps"


class IllegalTransitionError(RuntimeError):
    pass


class LayoutConfigError(ValueError):
    pass


def seasonal_matrix(n_contexts: int = 4, stay: float = 0.95) -> np.ndarray:
    """Column-stochastic cyclic chain: stay with ``stay``, else advance to the next context."""
    T = np.zeros((n_contexts, n_contexts))
    for c in range(n_contexts):
        if n_contexts == 1:
            T[c, c] = 1.0
            continue
        T[c, c] = stay
        T[(c + 1) % n_contexts, c] += 1.0 - stay
    return T


@dataclass(frozen=True)
class GridWorld:
    """Static description of one world.

    ``layouts[context, cell]`` holds a :class:`Resource` code.  ``limits`` are
    ordered (food, water, sleep).
    """

    width: int
    height: int
    layouts: np.ndarray
    context_matrix: np.ndarray = field(default_factory=seasonal_matrix)
    limits: tuple = (20, 22, 25)
    penalty: float = -100.0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("grid dimensions must be positive")
        lay = np.array(self.layouts, dtype=int)
        T = np.array(self.context_matrix, dtype=float)
        if lay.shape != (T.shape[0], self.width * self.height):
            raise ValueError(f"layouts shape {lay.shape} inconsistent with {T.shape[0]} contexts on {self.n_cells} cells")
        if not np.allclose(T.sum(axis=0), 1.0, atol=1e-12) or np.any(T < 0):
            raise ValueError("context_matrix must be column-stochastic")
        if np.any(lay[:, self.hill] != Resource.EMPTY):
            raise ValueError("the hill cell cannot hold a resource")
        lay.setflags(write=False)
        T.setflags(write=False)
        object.__setattr__(self, "layouts", lay)
        object.__setattr__(self, "context_matrix", T)
        object.__setattr__(self, "limits", tuple(int(v) for v in self.limits))

    @property
    def n_cells(self) -> int:
        return self.width * self.height

    @property
    def n_contexts(self) -> int:
        return self.context_matrix.shape[0]

    @property
    def hill_xy(self) -> tuple[int, int]:
        return (self.width // 2, self.height // 2)

    @property
    def hill(self) -> int:
        x, y = self.hill_xy
        return y * self.width + x

    def index(self, xy) -> int:
        x, y = xy
        return int(y) * self.width + int(x)

    def xy(self, index: int) -> tuple[int, int]:
        return (int(index) % self.width, int(index) // self.width)

    def move_table(self) -> np.ndarray:
        """``moves[cell, action]`` -> next cell."""
        return np.array([[self.index(position_transition(self.xy(c), a, self)) for a in ACTIONS] for c in range(self.n_cells)])

    def resource_cells(self) -> set:
        return {int(c) for c in np.flatnonzero(np.any(self.layouts != Resource.EMPTY, axis=0))}

    def distances(self) -> np.ndarray:
        """Manhattan distance between every pair of cells (moves are 4-connected, no obstacles)."""
        xs = np.arange(self.n_cells) % self.width
        ys = np.arange(self.n_cells) // self.width
        return np.abs(xs[:, None] - xs[None, :]) + np.abs(ys[:, None] - ys[None, :])


@dataclass(frozen=True)
class Observation:
    resource: Resource
    context: int  # season index, or ``n_contexts`` for NoContext

    def as_tuple(self) -> tuple[int, int]:
        return (int(self.resource), int(self.context))


@dataclass(frozen=True)
class EnvState:
    position: tuple
    context: int
    clocks: tuple = (0, 0, 0)
    t: int = 0
    dead: bool = False


def position_transition(pos, action, grid: GridWorld) -> tuple[int, int]:
    """Deterministic move; moves off the border leave the agent in place."""
    dx, dy = _DELTAS[Action(action)]
    x, y = pos[0] + dx, pos[1] + dy
    if 0 <= x < grid.width and 0 <= y < grid.height:
        return (x, y)
    return (pos[0], pos[1])


def context_transition_sample(context: int, rng: np.random.Generator, matrix: Optional[np.ndarray] = None) -> int:
    T = seasonal_matrix() if matrix is None else np.asarray(matrix)
    return int(rng.choice(T.shape[0], p=T[:, int(context)]))


def observe(state: EnvState, grid: GridWorld) -> Observation:
    cell = grid.index(state.position)
    resource = Resource(int(grid.layouts[state.context, cell]))
    ctx_obs = state.context if cell == grid.hill else grid.n_contexts
    return Observation(resource, ctx_obs)


def advance_clocks(clocks, resource: int) -> tuple[int, int, int]:
    """Reset the clock of the consumed resource and age the others by one step."""
    return tuple(0 if int(resource) == r else k + 1 for r, k in zip(RESOURCES, clocks))


def violated(clocks, limits) -> tuple:
    return tuple(r for r, k, lim in zip(RESOURCES, clocks, limits) if k >= lim)


def step(state: EnvState, action, grid: GridWorld, rng: np.random.Generator, max_steps: Optional[int] = None):
    """Advance one time-step; returns ``(new_state, observation, outcome)``."""
    if state.dead:
        raise IllegalTransitionError("cannot step a trial whose agent has died")
    if max_steps is not None and state.t >= max_steps:
        raise IllegalTransitionError("trial already reached max_steps")
    pos = position_transition(state.position, action, grid)
    ctx = context_transition_sample(state.context, rng, grid.context_matrix)
    moved = replace(state, position=pos, context=ctx)
    obs = observe(moved, grid)
    clocks = advance_clocks(state.clocks, obs.resource)
    dead = bool(violated(clocks, grid.limits))
    new = replace(moved, clocks=clocks, t=state.t + 1, dead=dead)
    if dead:
        outcome = Outcome.DEAD
    elif max_steps is not None and new.t >= max_steps:
        outcome = Outcome.MAX_STEPS
    else:
        outcome = Outcome.ALIVE
    return new, obs, outcome


def generate_layout(seed, cells_per_resource: int, width: int, height: int, n_contexts: int = 4) -> np.ndarray:
    """Seeded placement of ``k`` cells per resource per context, never on the hill."""
    k = int(cells_per_resource)
    if k < 1:
        raise LayoutConfigError("cells_per_resource must be >= 1")
    n_cells = width * height
    hill = (height // 2) * width + width // 2
    free = np.array([c for c in range(n_cells) if c != hill])
    need = k * len(RESOURCES)
    if need > free.size:
        raise LayoutConfigError(f"{need} resource cells per context do not fit in {free.size} free cells")
    rng = np.random.default_rng(seed)
    layouts = np.zeros((n_contexts, n_cells), dtype=int)
    for c in range(n_contexts):
        chosen = rng.choice(free, size=need, replace=False)
        for i, r in enumerate(RESOURCES):
            layouts[c, chosen[i * k:(i + 1) * k]] = int(r)
    return layouts


def make_world(seed, width: int = 10, height: int = 10, cells_per_resource: int = 1, limits=(20, 22, 25),
               penalty: float = -100.0, n_contexts: int = 4, stay: float = 0.95) -> GridWorld:
    layouts = generate_layout(seed, cells_per_resource, width, height, n_contexts)
    return GridWorld(width, height, layouts, seasonal_matrix(n_contexts, stay), tuple(limits), penalty)


def export_layout_csv(grid: GridWorld, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["context", "x", "y", "resource"])
        for c in range(grid.n_contexts):
            for cell in np.flatnonzero(grid.layouts[c]):
                x, y = grid.xy(cell)
                writer.writerow([c, x, y, Resource(int(grid.layouts[c, cell])).name.capitalize()])


def layout_to_text(layouts: np.ndarray, width: int) -> dict[str, str]:
    """Flat key-value encoding, one key per context: ``layout.<c> = Food@x,y;Water@x,y;...``."""
    out = {}
    for c, row in enumerate(np.asarray(layouts)):
        items = [f"{Resource(int(row[i])).name.capitalize()}@{i % width},{i // width}" for i in np.flatnonzero(row)]
        out[f"layout.{c}"] = ";".join(items)
    return out


def layout_from_text(entries: dict[str, str], width: int, height: int, n_contexts: int) -> np.ndarray:
    layouts = np.zeros((n_contexts, width * height), dtype=int)
    for c in range(n_contexts):
        text = entries.get(f"layout.{c}", "").strip()
        if not text:
            continue
        for item in text.split(";"):
            name, _, xy = item.strip().partition("@")
            x, y = (int(v) for v in xy.split(","))
            if not (0 <= x < width and 0 <= y < height):
                raise LayoutConfigError(f"layout cell {x},{y} outside the grid")
            layouts[c, y * width + x] = int(Resource[name.upper()])
    return layouts


def matrix_to_text(T: np.ndarray) -> str:
    return ";".join(",".join(repr(float(v)) for v in row) for row in np.asarray(T))


def matrix_from_text(text: str) -> np.ndarray:
    return np.array([[float(v) for v in row.split(",")] for row in text.split(";")])

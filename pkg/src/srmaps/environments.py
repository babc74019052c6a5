"""Discrete state spaces: open grid rooms, mazes and a toy lexicon.

Spatial spaces index cell ``(row, col)`` as ``row * cols + col``. All
neighbourhoods are Moore (8-connected). In mazes a diagonal step is only
allowed when both orthogonal cells it passes are free.
"""

from __future__ import annotations

import enum
import json
import logging
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from .errors import ConfigError, LayoutError, SamplingError

log = logging.getLogger(__name__)

# Compass order used everywhere an ordering of the 8 moves matters.
MOVES: tuple[tuple[int, int], ...] = (
    (-1, 0),  # N
    (-1, 1),  # NE
    (0, 1),  # E
    (1, 1),  # SE
    (1, 0),  # S
    (1, -1),  # SW
    (0, -1),  # W
    (-1, -1),  # NW
)
MOVE_NAMES = ("N", "NE", "E", "SE", "S", "SW", "W", "NW")

DEFAULT_MAZE_FREE_CELLS = 94


class SpaceKind(enum.Enum):
    GRID_ROOM = "room"
    MAZE = "maze"
    LANGUAGE = "language"


@dataclass(frozen=True)
class StateSpace:
    """A finite state graph with optional 2D layout.

    ``adjacency[s]`` lists the successors of ``s`` in ascending order. Walls
    and terminal states have an empty tuple.
    """

    kind: SpaceKind
    n_states: int
    adjacency: tuple[tuple[int, ...], ...]
    valid_mask: np.ndarray
    grid_shape: tuple[int, int] | None = None
    labels: np.ndarray | None = None
    class_names: tuple[str, ...] = ()
    reward_states: frozenset[int] = frozenset()
    name: str = ""

    @property
    def valid_states(self) -> np.ndarray:
        return np.flatnonzero(self.valid_mask)

    @property
    def terminal_mask(self) -> np.ndarray:
        """True for states without successors (walls, nouns)."""
        return np.array([len(a) == 0 for a in self.adjacency], dtype=bool)

    @property
    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.adjacency], dtype=np.int64)

    def coords(self, state: int) -> tuple[int, int]:
        if self.grid_shape is None:
            raise TypeError(f"{self.kind.value} space has no grid layout")
        return divmod(int(state), self.grid_shape[1])

    def index(self, row: int, col: int) -> int:
        if self.grid_shape is None:
            raise TypeError(f"{self.kind.value} space has no grid layout")
        return row * self.grid_shape[1] + col

    def move_target(self, state: int, move: int) -> int | None:
        """Destination of compass move ``move`` from ``state``.

        Returns None when the move leaves the grid, hits a wall or cuts a
        wall corner.
        """
        rows, cols = self.grid_shape
        r, c = self.coords(state)
        dr, dc = MOVES[move]
        nr, nc = r + dr, c + dc
        if not (0 <= nr < rows and 0 <= nc < cols):
            return None
        target = nr * cols + nc
        return target if target in self.adjacency[state] else None


@dataclass(frozen=True)
class LexiconSpec:
    """Word classes (in index order) and construction rules over them."""

    class_sizes: dict[str, int]
    rules: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        for rule in self.rules:
            if len(rule) < 2:
                raise ConfigError(f"rule {rule} needs at least two classes")
            unknown = [c for c in rule if c not in self.class_sizes]
            if unknown:
                raise ConfigError(f"rule {rule} uses undeclared classes {unknown}")
        if any(n < 1 for n in self.class_sizes.values()):
            raise ConfigError("every word class needs at least one word")

    @property
    def n_states(self) -> int:
        return sum(self.class_sizes.values())

    @classmethod
    def from_dict(cls, doc: dict) -> LexiconSpec:
        sizes = {c["name"]: int(c["size"]) for c in doc["classes"]}
        rules = tuple(tuple(r) for r in doc["rules"])
        return cls(class_sizes=sizes, rules=rules)

    @classmethod
    def from_file(cls, path: str | Path) -> LexiconSpec:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    @classmethod
    def default(cls) -> LexiconSpec:
        text = resources.files("srmaps").joinpath("data", "lexicon.json").read_text("utf-8")
        return cls.from_dict(json.loads(text))


class TransitionPair(NamedTuple):
    source: int
    target: int


@dataclass
class TrainingSet:
    """Sampled (state, successor) pairs stored as an ``(N, 2)`` int array."""

    pairs: np.ndarray
    seed: int | None
    source: str = ""
    n_states: int = 0

    @property
    def inputs(self) -> np.ndarray:
        return self.pairs[:, 0]

    @property
    def targets(self) -> np.ndarray:
        return self.pairs[:, 1]

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[TransitionPair]:
        for s, t in self.pairs:
            yield TransitionPair(int(s), int(t))


@dataclass
class TransitionMatrix:
    """One-step successor probabilities.

    ``excluded`` flags rows that carry no learnable signal: zero rows of a
    ground-truth matrix, or rows a network never saw as input.
    """

    probs: np.ndarray
    excluded: np.ndarray = field(default=None)

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.ndim != 2 or self.probs.shape[0] != self.probs.shape[1]:
            raise ValueError(f"transition matrix must be square, got {self.probs.shape}")
        if self.excluded is None:
            self.excluded = ~self.probs.any(axis=1)
        else:
            self.excluded = np.asarray(self.excluded, dtype=bool)

    @property
    def n_states(self) -> int:
        return self.probs.shape[0]


def _moore_adjacency(free: np.ndarray, no_corner_cutting: bool) -> tuple[tuple[int, ...], ...]:
    rows, cols = free.shape
    adj = []
    for r in range(rows):
        for c in range(cols):
            if not free[r, c]:
                adj.append(())
                continue
            nbrs = []
            for dr, dc in MOVES:
                nr, nc = r + dr, c + dc
                if not (0 <= nr < rows and 0 <= nc < cols) or not free[nr, nc]:
                    continue
                if no_corner_cutting and dr and dc and not (free[r + dr, c] and free[r, c + dc]):
                    continue
                nbrs.append(nr * cols + nc)
            adj.append(tuple(sorted(nbrs)))
    return tuple(adj)


def build_grid_room(rows: int, cols: int) -> StateSpace:
    """Open rectangular room with 8-neighbour moves and no walls."""
    if rows < 2 or cols < 2:
        raise ConfigError(f"room needs at least 2x2 cells, got {rows}x{cols}")
    free = np.ones((rows, cols), dtype=bool)
    return StateSpace(
        kind=SpaceKind.GRID_ROOM,
        n_states=rows * cols,
        adjacency=_moore_adjacency(free, no_corner_cutting=False),
        valid_mask=free.ravel(),
        grid_shape=(rows, cols),
        name=f"room{rows}x{cols}",
    )


def load_maze(layout_text: str, name: str = "maze") -> StateSpace:
    """Parse a maze from ``#`` (wall), ``.`` (free) and ``F`` (reward) rows."""
    lines = layout_text.replace("\r\n", "\n").split("\n")
    while lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise LayoutError("maze layout is empty")
    width = len(lines[0])
    for i, line in enumerate(lines):
        if len(line) != width:
            raise LayoutError(f"row {i} has {len(line)} characters, expected {width}")
        bad = set(line) - {"#", ".", "F"}
        if bad:
            raise LayoutError(f"row {i} contains unsupported characters {sorted(bad)}")
    grid = np.array([list(line) for line in lines])
    free = grid != "#"
    if not free.any():
        raise LayoutError("maze has no free cells")
    rewards = frozenset(int(s) for s in np.flatnonzero((grid == "F").ravel()))
    if not rewards:
        warnings.warn("maze has no reward cell 'F'; usable for exploration only", stacklevel=2)
    log.info("maze %s: %d cells, %d free, %d reward", name, free.size, int(free.sum()), len(rewards))
    return StateSpace(
        kind=SpaceKind.MAZE,
        n_states=free.size,
        adjacency=_moore_adjacency(free, no_corner_cutting=True),
        valid_mask=free.ravel(),
        grid_shape=free.shape,
        reward_states=rewards,
        name=name,
    )


def load_maze_file(path: str | Path) -> StateSpace:
    text = Path(path).read_text(encoding="utf-8")
    return load_maze(text, name=Path(path).stem)


def default_maze_text() -> str:
    return resources.files("srmaps").joinpath("data", "maze15.txt").read_text("utf-8")


def default_maze() -> StateSpace:
    space = load_maze(default_maze_text(), name="maze15")
    free = int(space.valid_mask.sum())
    if space.n_states != 225 or free != DEFAULT_MAZE_FREE_CELLS:
        raise LayoutError(f"default maze must have 94 of 225 free cells, found {free} of {space.n_states}")
    return space


def build_language_space(spec: LexiconSpec | None = None, n_states: int = 40) -> StateSpace:
    """Word graph: each word links to every word of its successor classes."""
    spec = spec or LexiconSpec.default()
    if spec.n_states != n_states:
        raise ConfigError(f"class sizes sum to {spec.n_states}, expected {n_states}")
    names = tuple(spec.class_sizes)
    starts = np.cumsum([0] + [spec.class_sizes[c] for c in names])
    members = {c: range(starts[i], starts[i + 1]) for i, c in enumerate(names)}
    successors: dict[str, set[str]] = {c: set() for c in names}
    for rule in spec.rules:
        for a, b in zip(rule, rule[1:]):
            successors[a].add(b)
    adj = []
    labels = np.empty(n_states, dtype=np.int64)
    for i, c in enumerate(names):
        nxt = sorted(w for b in successors[c] for w in members[b])
        for w in members[c]:
            labels[w] = i
            adj.append(tuple(nxt))
    return StateSpace(
        kind=SpaceKind.LANGUAGE,
        n_states=n_states,
        adjacency=tuple(adj),
        valid_mask=np.ones(n_states, dtype=bool),
        labels=labels,
        class_names=names,
        name="language",
    )


def ground_truth_tp(space: StateSpace) -> TransitionMatrix:
    """Uniform transition over each state's successors; zero rows if none."""
    n = space.n_states
    probs = np.zeros((n, n))
    for s, nbrs in enumerate(space.adjacency):
        if nbrs:
            probs[s, list(nbrs)] = 1.0 / len(nbrs)
    return TransitionMatrix(probs, excluded=space.terminal_mask)


def _padded_adjacency(space: StateSpace) -> np.ndarray:
    deg = space.degrees
    table = np.zeros((space.n_states, max(int(deg.max()), 1)), dtype=np.int64)
    for s, nbrs in enumerate(space.adjacency):
        table[s, : len(nbrs)] = nbrs
    return table


def sample_transition_pairs(space: StateSpace, count: int, seed: int | None = 0) -> TrainingSet:
    """Draw a state uniformly among non-terminal valid states, then a successor."""
    sources = np.flatnonzero(space.valid_mask & ~space.terminal_mask)
    if sources.size == 0:
        raise SamplingError(f"{space.name} has no state with successors")
    rng = np.random.default_rng(seed)
    frm = sources[rng.integers(0, sources.size, size=count)]
    deg = space.degrees[frm]
    slot = (rng.random(count) * deg).astype(np.int64)
    to = _padded_adjacency(space)[frm, slot]
    return TrainingSet(np.column_stack([frm, to]).astype(np.int64), seed, space.name, space.n_states)


def sample_sentences(
    space: StateSpace,
    count: int,
    seed: int | None = 0,
    spec: LexiconSpec | None = None,
) -> TrainingSet:
    """Sample (word, next word) pairs from the construction rules.

    Each sample picks a rule, a link inside it, a word of the link's first
    class and a label word of its second class, all uniformly.
    """
    if space.kind is not SpaceKind.LANGUAGE:
        raise TypeError(f"sentence sampling needs a language space, got {space.kind.value}")
    spec = spec or LexiconSpec.default()
    names = space.class_names
    sizes = np.array([spec.class_sizes[c] for c in names])
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    links = [[(names.index(a), names.index(b)) for a, b in zip(r, r[1:])] for r in spec.rules]

    rng = np.random.default_rng(seed)
    rule = rng.integers(0, len(links), size=count)
    pos_u = rng.random(count)
    word_u = rng.random(count)
    label_u = rng.random(count)
    pairs = np.empty((count, 2), dtype=np.int64)
    for i in range(count):
        chain = links[rule[i]]
        a, b = chain[int(pos_u[i] * len(chain))]
        pairs[i, 0] = offsets[a] + int(word_u[i] * sizes[a])
        pairs[i, 1] = offsets[b] + int(label_u[i] * sizes[b])
    return TrainingSet(pairs, seed, space.name, space.n_states)

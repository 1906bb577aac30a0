"""Graph-directed systems: directed multigraphs with a similarity ratio and a
probability on every edge, plus enumeration of admissible edge words.

Edges and vertices are indexed in lexicographic order of their ids; every
matrix, table and enumeration in the package inherits that order.
"""

from __future__ import annotations

import itertools
import json
import math
import os
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np

from .errors import (
    BadProbabilityVector,
    BadRatio,
    ConfigError,
    EnumerationCapExceeded,
    NotStronglyConnected,
)

DEFAULT_CAP = 10**8
PROB_TOL = 1e-12


def enumeration_cap() -> int:
    """Word-enumeration cap; ``MFZETA_CAP`` in the environment overrides it."""
    raw = os.environ.get("MFZETA_CAP")
    if raw is None:
        return DEFAULT_CAP
    try:
        return int(float(raw))
    except ValueError as exc:
        raise ConfigError(f"MFZETA_CAP must be an integer, got {raw!r}") from exc


@dataclass(frozen=True)
class Edge:
    id: str
    source: str
    target: str
    ratio: float
    prob: float


class GdSystem:
    """Validated graph-directed system. Build instances with :func:`build_system`."""

    def __init__(self, vertices, edges, vertex_diameters=None, osc_declared=False):
        self.vertices: tuple[str, ...] = tuple(sorted(vertices))
        self.edges: tuple[Edge, ...] = tuple(sorted(edges, key=lambda e: e.id))
        self.vertex_index = {v: i for i, v in enumerate(self.vertices)}
        self.edge_index = {e.id: k for k, e in enumerate(self.edges)}
        diam = dict(vertex_diameters or {})
        self.vertex_diameters = tuple(float(diam.get(v, 1.0)) for v in self.vertices)
        self.osc_declared = bool(osc_declared)

        self.src = _frozen(np.array([self.vertex_index[e.source] for e in self.edges], dtype=np.intp))
        self.dst = _frozen(np.array([self.vertex_index[e.target] for e in self.edges], dtype=np.intp))
        self.ratios = _frozen(np.array([e.ratio for e in self.edges], dtype=float))
        self.probs = _frozen(np.array([e.prob for e in self.edges], dtype=float))
        self.out_edges: tuple[tuple[int, ...], ...] = tuple(
            tuple(k for k in range(len(self.edges)) if self.src[k] == i)
            for i in range(len(self.vertices))
        )

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def adjacency(self) -> np.ndarray:
        """Edge-count matrix B with B[i, j] = |E_ij|."""
        b = np.zeros((self.n_vertices, self.n_vertices), dtype=np.int64)
        np.add.at(b, (self.src, self.dst), 1)
        return _frozen(b)

    @cached_property
    def _return_table(self) -> dict[tuple[int, int], tuple[int, ...]]:
        return {
            (a, b): _shortest_path(self, a, b)
            for a in range(self.n_vertices)
            for b in range(self.n_vertices)
        }

    def return_path(self, start: int, end: int) -> tuple[int, ...]:
        """Lexicographically least shortest edge path from vertex ``start`` to
        vertex ``end`` (vertex indices); empty when ``start == end``."""
        return self._return_table[(start, end)]

    @cached_property
    def max_return_length(self) -> int:
        return max(len(p) for p in self._return_table.values())

    def word(self, edges) -> "PathWord":
        """PathWord from edge ids or edge indices."""
        idx = tuple(self.edge_index[e] if isinstance(e, str) else int(e) for e in edges)
        return PathWord(self, idx)

    def to_config(self) -> dict:
        return {
            "vertices": list(self.vertices),
            "edges": [
                {"id": e.id, "from": e.source, "to": e.target, "ratio": e.ratio, "prob": e.prob}
                for e in self.edges
            ],
            "vertex_diameters": dict(zip(self.vertices, self.vertex_diameters)),
            "osc_declared": self.osc_declared,
        }

    def __repr__(self):
        return f"GdSystem(vertices={len(self.vertices)}, edges={len(self.edges)})"


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PathWord:
    """Admissible finite edge word, stored as a tuple of edge indices."""

    system: GdSystem = field(repr=False, compare=False)
    edges: tuple[int, ...]

    def __post_init__(self):
        s = self.system
        for a, b in zip(self.edges, self.edges[1:]):
            if s.dst[a] != s.src[b]:
                raise ValueError(
                    f"inadmissible word: {s.edges[a].id} ends at {s.edges[a].target}, "
                    f"{s.edges[b].id} starts at {s.edges[b].source}"
                )

    def __len__(self):
        return len(self.edges)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(self.system.edges[k].id for k in self.edges)

    @property
    def init(self) -> int | None:
        return int(self.system.src[self.edges[0]]) if self.edges else None

    @property
    def term(self) -> int | None:
        return int(self.system.dst[self.edges[-1]]) if self.edges else None

    @property
    def weight(self) -> float:
        return math.prod(float(self.system.probs[k]) for k in self.edges)

    @property
    def ratio(self) -> float:
        return math.prod(float(self.system.ratios[k]) for k in self.edges)

    @property
    def diameter(self) -> float:
        """diam K_i = ratio(i) * diam of the terminal vertex's set."""
        if not self.edges:
            raise ValueError("empty word has no terminal vertex")
        return self.ratio * self.system.vertex_diameters[self.term]

    def __add__(self, other: "PathWord") -> "PathWord":
        return PathWord(self.system, self.edges + other.edges)

    def __str__(self):
        return ".".join(self.ids) if self.edges else "ε"


def build_system(config: Mapping) -> GdSystem:
    """Validate a system description and return an immutable :class:`GdSystem`.

    ``config`` has keys ``vertices``, ``edges`` (list of objects with ``id``,
    ``from``, ``to``, ``ratio``, ``prob``), optional ``vertex_diameters``
    and ``osc_declared``.
    """
    if not isinstance(config, Mapping):
        raise ConfigError("system config must be a JSON object")
    for key in ("vertices", "edges"):
        if key not in config:
            raise ConfigError(f"missing key {key!r}")
    vertices = config["vertices"]
    if not isinstance(vertices, list) or not vertices:
        raise ConfigError("'vertices' must be a non-empty list of strings")
    vertices = [str(v) for v in vertices]
    if len(set(vertices)) != len(vertices):
        raise ConfigError("'vertices' contains duplicate ids")
    vset = set(vertices)

    edges = []
    seen = set()
    for pos, raw in enumerate(config["edges"]):
        where = f"edges[{pos}]"
        if not isinstance(raw, Mapping):
            raise ConfigError(f"{where} must be an object")
        for key in ("id", "from", "to", "ratio", "prob"):
            if key not in raw:
                raise ConfigError(f"{where}: missing key {key!r}")
        eid = str(raw["id"])
        if eid in seen:
            raise ConfigError(f"{where}: duplicate edge id {eid!r}")
        seen.add(eid)
        src, dst = str(raw["from"]), str(raw["to"])
        for key, v in (("from", src), ("to", dst)):
            if v not in vset:
                raise ConfigError(f"{where}.{key}: undeclared vertex {v!r}")
        try:
            ratio, prob = float(raw["ratio"]), float(raw["prob"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{where}: ratio and prob must be numbers") from exc
        if not 0.0 < ratio < 1.0:
            raise BadRatio(eid, f"ratio {ratio!r} outside (0, 1)")
        if not 0.0 < prob <= 1.0:
            raise BadRatio(eid, f"prob {prob!r} outside (0, 1]")
        edges.append(Edge(eid, src, dst, ratio, prob))
    if not edges:
        raise ConfigError("'edges' must be non-empty")

    diam = config.get("vertex_diameters") or {}
    if not isinstance(diam, Mapping):
        raise ConfigError("'vertex_diameters' must map vertex ids to numbers")
    for v, d in diam.items():
        if v not in vset:
            raise ConfigError(f"vertex_diameters: undeclared vertex {v!r}")
        if not float(d) > 0:
            raise ConfigError(f"vertex_diameters.{v}: must be positive")

    system = GdSystem(vertices, edges, diam, bool(config.get("osc_declared", False)))
    _check_strongly_connected(system)
    for i, v in enumerate(system.vertices):
        total = math.fsum(float(system.probs[k]) for k in system.out_edges[i])
        if abs(total - 1.0) > PROB_TOL:
            raise BadProbabilityVector(v, total)
    return system


def load_system(path: str | os.PathLike) -> GdSystem:
    text = Path(path).read_text()
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return build_system(config)


def _reachable(n: int, succ: list[list[int]], start: int) -> set[int]:
    seen = {start}
    todo = [start]
    while todo:
        for w in succ[todo.pop()]:
            if w not in seen:
                seen.add(w)
                todo.append(w)
    return seen


def _check_strongly_connected(system: GdSystem) -> None:
    n = system.n_vertices
    for i, v in enumerate(system.vertices):
        if not system.out_edges[i]:
            raise NotStronglyConnected(f"vertex {v!r} has no outgoing edge")
    fwd = [[] for _ in range(n)]
    bwd = [[] for _ in range(n)]
    for a, b in zip(system.src, system.dst):
        fwd[a].append(int(b))
        bwd[b].append(int(a))
    if len(_reachable(n, fwd, 0)) < n or len(_reachable(n, bwd, 0)) < n:
        raise NotStronglyConnected("graph is not strongly connected")


def _shortest_path(system: GdSystem, start: int, end: int) -> tuple[int, ...]:
    if start == end:
        return ()
    # BFS distances to `end` on the reversed graph, then greedy least edge.
    dist = {end: 0}
    queue = deque([end])
    while queue:
        w = queue.popleft()
        for k in range(system.n_edges):
            if system.dst[k] == w and system.src[k] not in dist:
                dist[int(system.src[k])] = dist[w] + 1
                queue.append(int(system.src[k]))
    path = []
    v = start
    while v != end:
        k = next(k for k in system.out_edges[v] if dist.get(int(system.dst[k]), -2) == dist[v] - 1)
        path.append(k)
        v = int(system.dst[k])
    return tuple(path)


def return_word(system: GdSystem, word: PathWord) -> PathWord:
    """Word leading from t(word) back to i(word): empty when the word already
    closes up, otherwise the shortest return path (ties broken by edge id)."""
    if not word.edges:
        return PathWord(system, ())
    return PathWord(system, system.return_path(word.term, word.init))


def word_count(system: GdSystem, n: int) -> int:
    """|Σ_G^n| as an exact integer."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return 1
    b = [[int(x) for x in row] for row in system.adjacency]
    vec = [1] * system.n_vertices
    for _ in range(n):
        vec = [sum(b[i][j] * vec[j] for j in range(len(vec))) for i in range(len(vec))]
    return sum(vec)


def _guard(system: GdSystem, n: int, cap: int | None) -> None:
    cap = enumeration_cap() if cap is None else cap
    count = word_count(system, n)
    if count > cap:
        raise EnumerationCapExceeded(count, cap)


def admissible_words(system: GdSystem, n: int, cap: int | None = None) -> Iterator[PathWord]:
    """Stream Σ_G^n in lexicographic order of edge ids."""
    if n < 1:
        raise ValueError("n must be >= 1")
    _guard(system, n, cap)

    def extend(prefix, v, left):
        if left == 0:
            yield prefix
            return
        for k in system.out_edges[v]:
            yield from extend(prefix + (k,), int(system.dst[k]), left - 1)

    for k in range(system.n_edges):
        for edges in extend((k,), int(system.dst[k]), n - 1):
            yield PathWord(system, edges)


def word_array(system: GdSystem, n: int, cap: int | None = None) -> np.ndarray:
    """All of Σ_G^n as an int array of shape (count, n), rows in lexicographic order."""
    if n < 1:
        raise ValueError("n must be >= 1")
    _guard(system, n, cap)
    deg = np.array([len(o) for o in system.out_edges], dtype=np.intp)
    ptr = np.concatenate([[0], np.cumsum(deg)])
    flat = np.array(list(itertools.chain.from_iterable(system.out_edges)), dtype=np.intp)
    words = np.arange(system.n_edges, dtype=np.intp)[:, None]
    for _ in range(n - 1):
        term = system.dst[words[:, -1]]
        reps = deg[term]
        parent = np.repeat(np.arange(len(words)), reps)
        offset = np.arange(len(parent)) - np.repeat(np.cumsum(reps) - reps, reps)
        child = flat[ptr[term[parent]] + offset]
        words = np.concatenate([words[parent], child[:, None]], axis=1)
    return words


def higher_block(system: GdSystem, m: int) -> GdSystem:
    """Recode the system on its (m-1)-word graph.

    Vertices become admissible words of length m-1 and edges become words of
    length m; an edge carries the ratio and probability of its last original
    edge, so probabilities stay stochastic at every new vertex.
    """
    if m < 2:
        return system
    states = [tuple(map(int, w)) for w in word_array(system, m - 1)]
    name = {w: ".".join(system.edges[k].id for k in w) for w in states}
    edges = []
    for w in word_array(system, m):
        w = tuple(map(int, w))
        last = system.edges[w[-1]]
        edges.append(Edge(".".join(system.edges[k].id for k in w), name[w[:-1]], name[w[1:]],
                          last.ratio, last.prob))
    return build_system(
        {
            "vertices": list(name.values()),
            "edges": [{"id": e.id, "from": e.source, "to": e.target, "ratio": e.ratio,
                       "prob": e.prob} for e in edges],
            "osc_declared": system.osc_declared,
        }
    )


def simple_cycles(system: GdSystem, cap: int = 200_000) -> list[tuple[int, ...]]:
    """Edge sequences of all simple cycles (no repeated vertex), each listed
    once, starting at its smallest vertex. Parallel edges give distinct cycles."""
    out: list[tuple[int, ...]] = []

    def walk(start, v, path, seen):
        for k in system.out_edges[v]:
            w = int(system.dst[k])
            if w == start:
                out.append(path + (k,))
                if len(out) > cap:
                    raise EnumerationCapExceeded(len(out), cap)
            elif w > start and w not in seen:
                walk(start, w, path + (k,), seen | {w})

    for s in range(system.n_vertices):
        walk(s, s, (), {s})
    return out


def completion_groups(system: GdSystem, words: np.ndarray):
    """Periodic completions of the rows of ``words``, grouped by return path.

    Yields ``(rows, cycles)`` where ``cycles[j]`` is the period
    ``words[rows[j]] + ĥ`` and all cycles in a group share one length.
    """
    words = np.atleast_2d(words)
    first = system.src[words[:, 0]]
    last = system.dst[words[:, -1]]
    for s in range(system.n_vertices):
        for t in range(system.n_vertices):
            rows = np.flatnonzero((first == s) & (last == t))
            if rows.size == 0:
                continue
            hat = np.asarray(system.return_path(t, s), dtype=np.intp)
            cyc = words[rows]
            if hat.size:
                cyc = np.concatenate([cyc, np.broadcast_to(hat, (rows.size, hat.size))], axis=1)
            yield rows, cyc

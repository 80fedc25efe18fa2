"""Exact maximal flow from the bottom to the top face of a box.

Integer-unit capacities, a deterministic blocking-flow (Dinic) solver with a
super-source feeding the bottom face and a super-sink draining the top face,
minimum cuts extracted from residual reachability, stream validation, and
the decomposition of discrete streams into unit paths of the parallel-edge
expansion.

Edges may carry an explicit "never cut" marker instead of a finite capacity;
the solver treats such edges as impossible to saturate, which is how the
pinned-boundary cut problems are expressed without resorting to large
sentinel numbers.
"""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .capacity import CapacityField
from .lattice import (
    BoxSpec,
    Edge,
    Point,
    box_vertices,
    edge_ids,
    edges_in_box,
    face_vertices,
)

MAX_TOTAL_UNITS = 2**63 - 1


class CapacityOverflowError(OverflowError):
    """Total capacity would overflow the 64-bit accumulator contract."""


class PinningInfeasibleError(RuntimeError):
    """No finite-weight cut exists once the uncuttable edges are excluded."""


@dataclass(eq=False)
class Stream:
    """Per-edge flow amounts in integer units, with orientations.

    ``orient[e]`` is +1 when fluid follows the canonical low-to-high
    direction of edge e and -1 otherwise. Edges with g == 0 carry the
    default orientation +1 (lexicographic tail < head).
    """

    box: BoxSpec
    resolution: int
    g: np.ndarray
    orient: np.ndarray

    def __post_init__(self) -> None:
        g = np.array(self.g, dtype=np.int64, copy=True)
        orient = np.array(self.orient, dtype=np.int8, copy=True)
        n = len(edges_in_box(self.box))
        if g.shape != (n,) or orient.shape != (n,):
            raise ValueError("stream arrays must have one entry per box edge")
        if n and int(g.min()) < 0:
            raise ValueError("flow amounts must be non-negative")
        if n and not set(np.unique(orient).tolist()) <= {-1, 1}:
            raise ValueError("orientations must be +1 or -1")
        g.setflags(write=False)
        orient.setflags(write=False)
        self.g = g
        self.orient = orient

    @classmethod
    def zero(cls, box: BoxSpec, resolution: int) -> "Stream":
        n = len(edges_in_box(box))
        return cls(box, resolution, np.zeros(n, dtype=np.int64), np.ones(n, dtype=np.int8))


@dataclass(frozen=True)
class CutSet:
    """A set of edges (by id) together with its total capacity in units."""

    edge_ids: frozenset[int]
    weight: int


@dataclass(eq=False)
class MaxFlowResult:
    value: int
    stream: Stream
    min_cut: CutSet
    source_side: frozenset[Point]


@dataclass(eq=False)
class Violation:
    kind: str  # "capacity" or "balance"
    where: object  # Edge or Point
    amount: int


@dataclass(eq=False)
class _SolverGraph:
    index: dict[Point, int]
    to: list[int]
    adj: list[list[int]]
    edge_ends: list[tuple[int, int]]
    src: int
    snk: int
    n_lattice_arcs: int


@lru_cache(maxsize=None)
def _graph(box: BoxSpec) -> _SolverGraph:
    edges = edges_in_box(box)
    points = sorted({p for e in edges for p in (e.a, e.b)})
    index = {p: i for i, p in enumerate(points)}
    src = len(points)
    snk = src + 1
    to: list[int] = []
    adj: list[list[int]] = [[] for _ in range(len(points) + 2)]

    def add(u: int, v: int) -> None:
        a = len(to)
        to.append(v)
        adj[u].append(a)
        to.append(u)
        adj[v].append(a + 1)

    edge_ends = []
    for e in edges:
        u, v = index[e.a], index[e.b]
        edge_ends.append((u, v))
        add(u, v)
    n_lattice_arcs = len(to)
    for p in sorted(face_vertices(box, "bottom")):
        add(src, index[p])
    for p in sorted(face_vertices(box, "top")):
        add(index[p], snk)
    return _SolverGraph(index, to, adj, edge_ends, src, snk, n_lattice_arcs)


@lru_cache(maxsize=None)
def _inf_mask(box: BoxSpec, never_cut: frozenset[int]) -> tuple[bool, ...]:
    g = _graph(box)
    mask = [False] * len(g.to)
    for e in never_cut:
        mask[2 * e] = True
        mask[2 * e + 1] = True
    for a in range(g.n_lattice_arcs, len(g.to), 2):
        mask[a] = True  # artificial source/sink arcs are unbounded
    return tuple(mask)


def _dinic(to, adj, is_inf, cap, src, snk) -> int:
    """Blocking-flow maximal flow; mutates ``cap`` into the residual state."""
    n = len(adj)
    value = 0
    while True:
        level = [-1] * n
        level[src] = 0
        q = deque([src])
        while q:
            v = q.popleft()
            lv = level[v] + 1
            for a in adj[v]:
                w = to[a]
                if level[w] < 0 and (is_inf[a] or cap[a] > 0):
                    level[w] = lv
                    q.append(w)
        if level[snk] < 0:
            return value
        it = [0] * n
        while True:
            vstack = [src]
            astack: list[int] = []
            found = False
            while vstack:
                v = vstack[-1]
                if v == snk:
                    found = True
                    break
                moved = False
                arcs = adj[v]
                while it[v] < len(arcs):
                    a = arcs[it[v]]
                    w = to[a]
                    if level[w] == level[v] + 1 and (is_inf[a] or cap[a] > 0):
                        vstack.append(w)
                        astack.append(a)
                        moved = True
                        break
                    it[v] += 1
                if not moved:
                    vstack.pop()
                    if not astack:
                        break
                    level[v] = -1  # dead end this phase
                    astack.pop()
                    it[vstack[-1]] += 1
            if not found:
                break
            finite = [cap[a] for a in astack if not is_inf[a]]
            if not finite:
                raise PinningInfeasibleError(
                    "augmenting path of unbounded edges: no finite cut exists"
                )
            bottleneck = min(finite)
            for a in astack:
                if not is_inf[a]:
                    cap[a] -= bottleneck
                ra = a ^ 1
                if not is_inf[ra]:
                    cap[ra] += bottleneck
            value += bottleneck


def solve_min_cut(
    box: BoxSpec, field: CapacityField, never_cut: frozenset[int] = frozenset()
) -> tuple[int, list[int], CutSet, frozenset[Point]]:
    """Core solve: value, residual arc capacities, canonical min cut, source side.

    The cut is the set of edges from the residual-reachable side of the
    super-source to its complement; edges in ``never_cut`` cannot appear.
    """
    if field.box != box:
        raise ValueError("field does not cover this box")
    if field.total_units > MAX_TOTAL_UNITS:
        raise CapacityOverflowError("total capacity exceeds the 64-bit accumulator")
    g = _graph(box)
    caps = field.caps.tolist()
    cap = [0] * len(g.to)
    for e, t in enumerate(caps):
        cap[2 * e] = t
        cap[2 * e + 1] = t
    is_inf = _inf_mask(box, never_cut)
    value = _dinic(g.to, g.adj, is_inf, cap, g.src, g.snk)

    seen = [False] * len(g.adj)
    seen[g.src] = True
    q = deque([g.src])
    while q:
        v = q.popleft()
        for a in g.adj[v]:
            w = g.to[a]
            if not seen[w] and (is_inf[a] or cap[a] > 0):
                seen[w] = True
                q.append(w)
    cut_ids = [e for e, (u, v) in enumerate(g.edge_ends) if seen[u] != seen[v]]
    weight = sum(caps[e] for e in cut_ids)
    if weight != value:
        raise RuntimeError("internal solver error: cut weight differs from flow value")
    source_side = frozenset(p for p, i in g.index.items() if seen[i])
    return value, cap, CutSet(frozenset(cut_ids), weight), source_side


def max_flow(box: BoxSpec, field: CapacityField) -> MaxFlowResult:
    """Exact maximal flow with a realising stream and a minimum-cut certificate."""
    value, cap, cut, source_side = solve_min_cut(box, field)
    n = len(edges_in_box(box))
    gvals = np.zeros(n, dtype=np.int64)
    orient = np.ones(n, dtype=np.int8)
    for e in range(n):
        f = (cap[2 * e + 1] - cap[2 * e]) // 2
        if f >= 0:
            gvals[e] = f
        else:
            gvals[e] = -f
            orient[e] = -1
    stream = Stream(box, field.resolution, gvals, orient)
    return MaxFlowResult(value, stream, cut, source_side)


@lru_cache(maxsize=None)
def _top_vertical_ids(box: BoxSpec) -> tuple[int, ...]:
    ids = edge_ids(box)
    z = box.z_hi
    return tuple(ids[Edge(base + (z - 1,), base + (z,))] for base in box.base_points())


def flow_value(stream: Stream) -> int:
    """Net amount crossing into the top face, in integer units.

    This is the signed sum over the top layer of vertical edges, which for
    height 1 boxes reads the same edges the fluid entered through.
    """
    g = stream.g
    o = stream.orient
    return int(sum(int(g[e]) * int(o[e]) for e in _top_vertical_ids(stream.box)))


@lru_cache(maxsize=None)
def _incidence(box: BoxSpec) -> dict[Point, tuple[tuple[int, int], ...]]:
    inc: dict[Point, list[tuple[int, int]]] = defaultdict(list)
    for i, e in enumerate(edges_in_box(box)):
        inc[e.a].append((i, 1))
        inc[e.b].append((i, -1))
    return {p: tuple(v) for p, v in inc.items()}


def validate_stream(box: BoxSpec, field: CapacityField, stream: Stream) -> list[Violation]:
    """Every capacity violation and every unbalanced interior vertex.

    Balance is required at all box vertices below the top face; the bottom
    face feeds the box and the top face drains it, so neither is constrained.
    """
    if field.box != box or stream.box != box:
        raise ValueError("box, field and stream shapes must match")
    violations: list[Violation] = []
    edges = edges_in_box(box)
    caps = field.caps
    for i, e in enumerate(edges):
        excess = int(stream.g[i]) - int(caps[i])
        if excess > 0:
            violations.append(Violation("capacity", e, excess))
    inc = _incidence(box)
    z_top = box.z_hi
    for v in box_vertices(box):
        if v[-1] == z_top:
            continue
        net = 0
        for i, sign in inc[v]:
            net += int(stream.g[i]) * int(stream.orient[i]) * sign
        if net != 0:
            violations.append(Violation("balance", v, net))
    return violations


def decompose_paths(box: BoxSpec, stream: Stream, k: int) -> list[tuple[Point, ...]]:
    """Peel a level-k stream into unit paths of the parallel-edge expansion.

    Each edge e stands for g(e)*k/R parallel unit copies. The peeling walks
    units from the bottom face until the top face is first reached, excising
    any loop it closes; excised and leftover units are discarded residual
    circulation. Exactly k*flow/R paths are returned and each uses a copy of
    an edge at most once.
    """
    if k < 1 or stream.resolution % k:
        raise ValueError("k must divide the stream resolution")
    step = stream.resolution // k
    g = stream.g.tolist()
    if any(x % step for x in g):
        raise ValueError(f"stream is not discrete at level {k}")
    total = flow_value(stream)
    if total < 0:
        raise ValueError("stream has negative flow")
    n_paths = (total * k) // stream.resolution

    units = [x // step for x in g]
    out: dict[Point, list[tuple[int, Point]]] = defaultdict(list)
    for i, e in enumerate(edges_in_box(box)):
        tail, head = (e.a, e.b) if stream.orient[i] > 0 else (e.b, e.a)
        out[tail].append((i, head))
    ptr: dict[Point, int] = defaultdict(int)
    top = face_vertices(box, "top")

    def next_step(v: Point) -> tuple[int, Point]:
        arcs = out[v]
        while ptr[v] < len(arcs):
            i, head = arcs[ptr[v]]
            if units[i] > 0:
                return i, head
            ptr[v] += 1  # exhausted arcs never refill
        raise RuntimeError("internal decomposition error: imbalance at " + repr(v))

    bottoms = sorted(face_vertices(box, "bottom"))
    paths: list[tuple[Point, ...]] = []
    b = 0
    for _ in range(n_paths):
        while b < len(bottoms) and all(units[i] == 0 for i, _ in out[bottoms[b]]):
            b += 1
        if b >= len(bottoms):
            raise RuntimeError("internal decomposition error: no unit leaves the bottom")
        v = bottoms[b]
        path = [v]
        pos = {v: 0}
        while v not in top:
            i, head = next_step(v)
            units[i] -= 1
            if head in pos:
                # loop closed: drop its units and resume from the repeat point
                for p in path[pos[head] + 1 :]:
                    del pos[p]
                del path[pos[head] + 1 :]
                v = head
            else:
                path.append(head)
                pos[head] = len(path) - 1
                v = head
        paths.append(tuple(path))
    return paths


def menger_count(box: BoxSpec, field: CapacityField) -> int:
    """Maximal number of edge-disjoint open paths from bottom to top.

    Requires a 0/1-valued field (capacities 0 or one full unit); equals the
    maximal flow divided by the resolution.
    """
    r = field.resolution
    if any(c not in (0, r) for c in field.caps.tolist()):
        raise ValueError("field must be 0/1-valued")
    return max_flow(box, field).value // r

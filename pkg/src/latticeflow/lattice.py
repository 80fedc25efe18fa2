"""Cylinder lattice geometry: boxes, edges, faces and boundary sets.

The ambient graph is Z^d (d >= 2) with nearest-neighbour edges. A box is a
product of half-open integer intervals ]lo_i, hi_i] over the first d - 1
axes (the base) times ]z_lo, z_hi] along the last axis (the height). An
edge belongs to a box when its interior lies inside it with the side faces
sealed: a vertical edge may span any unit interval within [z_lo, z_hi],
including the one entering from the bottom face, while a horizontal edge
needs both endpoints strictly inside the base and a height in ]z_lo, z_hi].
Fluid can therefore enter or leave a box only through its bottom and top.

All objects here are immutable after construction and safe to share across
worker processes. Edge ids are dense integers given by the canonical
lexicographic ordering of ``edges_in_box``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

Point = tuple[int, ...]

VERTICAL = "vertical"
HORIZONTAL = "horizontal"


def _unit_axis(a: Point, b: Point) -> int:
    """Axis in which two nearest neighbours differ; raise if not adjacent."""
    axis = -1
    for i, (x, y) in enumerate(zip(a, b)):
        if x != y:
            if axis >= 0 or abs(x - y) != 1:
                raise ValueError(f"not nearest neighbours: {a}, {b}")
            axis = i
    if axis < 0:
        raise ValueError(f"not nearest neighbours: {a}, {b}")
    return axis


@dataclass(frozen=True)
class Edge:
    """Unordered nearest-neighbour edge, endpoints kept in lexicographic order."""

    a: Point
    b: Point

    def __post_init__(self) -> None:
        a, b = tuple(self.a), tuple(self.b)
        if len(a) != len(b):
            raise ValueError("endpoint dimensions differ")
        if a > b:
            a, b = b, a
        _unit_axis(a, b)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def axis(self) -> int:
        return _unit_axis(self.a, self.b)

    @property
    def d(self) -> int:
        return len(self.a)


@dataclass(frozen=True)
class OrientedEdge:
    """Ordered pair of adjacent lattice points; fluid moves tail -> head."""

    tail: Point
    head: Point

    def __post_init__(self) -> None:
        tail, head = tuple(self.tail), tuple(self.head)
        _unit_axis(tail, head)
        object.__setattr__(self, "tail", tail)
        object.__setattr__(self, "head", head)

    @property
    def edge(self) -> Edge:
        return Edge(self.tail, self.head)

    def reversed(self) -> "OrientedEdge":
        return OrientedEdge(self.head, self.tail)


def classify_edge(e: Edge) -> str:
    """An edge is vertical when it varies in the last coordinate."""
    return VERTICAL if e.axis == e.d - 1 else HORIZONTAL


@dataclass(frozen=True)
class BoxSpec:
    """Axis-aligned cylinder: base side lengths, height and integer offset.

    The default offset places the box at the origin, i.e. base
    prod ]0, k_i] and heights ]0, height]. The bottom face sits at height
    ``z_lo`` (one level below the box vertices) and the top face at
    ``z_hi``; both faces carry exactly prod(dims) lattice points.
    """

    dims: tuple[int, ...]
    height: int
    offset: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        dims = tuple(int(k) for k in self.dims)
        if len(dims) < 1:
            raise ValueError("need at least one base dimension (d >= 2)")
        if any(k < 1 for k in dims):
            raise ValueError("all base side lengths must be >= 1")
        height = int(self.height)
        if height < 1:
            raise ValueError("height must be >= 1")
        offset = tuple(int(o) for o in self.offset) if self.offset else (0,) * (len(dims) + 1)
        if len(offset) != len(dims) + 1:
            raise ValueError("offset must have one entry per coordinate")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "height", height)
        object.__setattr__(self, "offset", offset)

    @property
    def d(self) -> int:
        return len(self.dims) + 1

    @property
    def z_lo(self) -> int:
        return self.offset[-1]

    @property
    def z_hi(self) -> int:
        return self.offset[-1] + self.height

    @property
    def base_area(self) -> int:
        area = 1
        for k in self.dims:
            area *= k
        return area

    def base_range(self, axis: int) -> range:
        lo = self.offset[axis]
        return range(lo + 1, lo + self.dims[axis] + 1)

    def base_points(self):
        """Base lattice points in lexicographic order."""
        return itertools.product(*(self.base_range(i) for i in range(len(self.dims))))

    def translate(self, delta: tuple[int, ...]) -> "BoxSpec":
        if len(delta) != self.d:
            raise ValueError("translation vector has wrong length")
        return BoxSpec(self.dims, self.height, tuple(o + t for o, t in zip(self.offset, delta)))


@lru_cache(maxsize=None)
def edges_in_box(box: BoxSpec) -> tuple[Edge, ...]:
    """All edges of the box, lexicographically ordered; index = dense edge id.

    Vertical edges span [z, z+1] for z_lo <= z < z_hi over every base point
    (so the edges entering from the bottom face are included even though
    their lower endpoint is not a box vertex). Horizontal edges live at
    heights z_lo+1 .. z_hi with both endpoints inside the base.
    """
    edges: list[Edge] = []
    for base in box.base_points():
        for z in range(box.z_lo, box.z_hi):
            edges.append(Edge(base + (z,), base + (z + 1,)))
    for axis in range(len(box.dims)):
        for base in box.base_points():
            if base[axis] + 1 in box.base_range(axis):
                nb = base[:axis] + (base[axis] + 1,) + base[axis + 1 :]
                for z in range(box.z_lo + 1, box.z_hi + 1):
                    edges.append(Edge(base + (z,), nb + (z,)))
    edges.sort(key=lambda e: (e.a, e.b))
    return tuple(edges)


@lru_cache(maxsize=None)
def edge_ids(box: BoxSpec) -> dict[Edge, int]:
    """Edge -> dense id map for a box. Treat the returned dict as read-only."""
    return {e: i for i, e in enumerate(edges_in_box(box))}


def face_vertices(box: BoxSpec, which: str) -> frozenset[Point]:
    """Lattice points of the bottom or top face."""
    if which == "bottom":
        z = box.z_lo
    elif which == "top":
        z = box.z_hi
    else:
        raise ValueError("which must be 'bottom' or 'top'")
    return frozenset(base + (z,) for base in box.base_points())


@lru_cache(maxsize=None)
def box_vertices(box: BoxSpec) -> tuple[Point, ...]:
    """Vertices of the box itself (top face included, bottom face excluded)."""
    out = []
    for base in box.base_points():
        for z in range(box.z_lo + 1, box.z_hi + 1):
            out.append(base + (z,))
    return tuple(sorted(out))


@dataclass(frozen=True)
class RectSpec:
    """Base hyper-rectangle prod ]lo_i, hi_i] in Z^(d-1)."""

    lo: tuple[int, ...]
    hi: tuple[int, ...]

    def __post_init__(self) -> None:
        lo = tuple(int(x) for x in self.lo)
        hi = tuple(int(x) for x in self.hi)
        if len(lo) != len(hi) or not lo:
            raise ValueError("bounds must be non-empty and of equal length")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ValueError("each interval ]a, b] needs a < b")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def cube(cls, side: int, d: int) -> "RectSpec":
        """The base ]0, side]^(d-1) of a d-dimensional cylinder."""
        return cls((0,) * (d - 1), (side,) * (d - 1))

    @property
    def sides(self) -> tuple[int, ...]:
        return tuple(b - a for a, b in zip(self.lo, self.hi))

    @property
    def area(self) -> int:
        area = 1
        for s in self.sides:
            area *= s
        return area

    def contains(self, base: tuple[int, ...]) -> bool:
        return all(a < x <= b for x, a, b in zip(base, self.lo, self.hi))

    def is_inner_boundary(self, base: tuple[int, ...]) -> bool:
        """Base point inside the rectangle with a nearest neighbour outside."""
        if not self.contains(base):
            return False
        return any(x == a + 1 or x == b for x, a, b in zip(base, self.lo, self.hi))

    def slab_box(self, half_height: int) -> BoxSpec:
        """The slab rect x ]-k, k] as a box, reusing the box edge conventions."""
        if half_height < 1:
            raise ValueError("half_height must be >= 1")
        return BoxSpec(self.sides, 2 * half_height, self.lo + (-half_height,))


@lru_cache(maxsize=None)
def inner_boundary_edges(rect: RectSpec, height_range: tuple[int, int]) -> frozenset[Edge]:
    """Edges with both endpoints on the inner boundary of the cylinder rect x R,
    restricted to heights ]z_lo, z_hi] with the box edge conventions.

    ``height_range`` is the pair (z_lo, z_hi); the returned set is exactly the
    boundary-to-boundary subset of ``edges_in_box`` of the enclosing slab box.
    """
    z_lo, z_hi = height_range
    if z_lo >= z_hi:
        raise ValueError("empty height range")
    enclosing = BoxSpec(rect.sides, z_hi - z_lo, rect.lo + (z_lo,))
    return frozenset(
        e
        for e in edges_in_box(enclosing)
        if rect.is_inner_boundary(e.a[:-1]) and rect.is_inner_boundary(e.b[:-1])
    )

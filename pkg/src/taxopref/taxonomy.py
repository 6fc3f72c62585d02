"""Finite posets of attribute values.

A value ``v`` is *below* ``w`` (``leq(v, w)``) when ``w`` is reachable from
``v`` by following parent edges, or when ``v == w``.  Down-sets are exposed as
Python integers used as bitsets over the taxonomy's internal value order,
which is what the formula layer builds on.
"""

from __future__ import annotations

import io
from collections import deque
from functools import lru_cache
from typing import Iterable, TextIO

import numpy as np

from .errors import CycleDetected, EmptyTaxonomy, MalformedLine, UnknownValue

FORBIDDEN_CHARS = frozenset(",&|>!;*#")
EAGER_LIMIT = 65536


def check_identifier(value: str) -> bool:
    """True when ``value`` may be used as a taxonomy value or attribute name."""
    return (
        bool(value)
        and value == value.strip()
        and not any(ch in FORBIDDEN_CHARS for ch in value)
        and "<=" not in value
    )


class Taxonomy:
    """Immutable taxonomy built from ``(child, parent)`` edges.

    Trees and forests use an interval encoding over a DFS preorder, so a
    down-set is a contiguous run of bits.  Other DAGs get explicit bitset
    rows, computed eagerly up to ``EAGER_LIMIT`` values and lazily above.
    """

    def __init__(self, values: Iterable[str], edges: Iterable[tuple[str, str]], name: str = ""):
        self.name = name
        seen: dict[str, None] = {}
        for v in values:
            seen.setdefault(v, None)
        edge_list: list[tuple[str, str]] = []
        edge_set = set()
        for c, p in edges:
            seen.setdefault(c, None)
            seen.setdefault(p, None)
            if (c, p) not in edge_set:
                edge_set.add((c, p))
                edge_list.append((c, p))
        if not seen:
            raise EmptyTaxonomy("taxonomy has no values", source=name or None)

        given = list(seen)
        gidx = {v: i for i, v in enumerate(given)}
        n = len(given)
        parents = [[] for _ in range(n)]
        children = [[] for _ in range(n)]
        for c, p in edge_list:
            ci, pi = gidx[c], gidx[p]
            if ci == pi:
                raise CycleDetected(f"value {c!r} is its own parent", source=name or None)
            parents[ci].append(pi)
            children[pi].append(ci)

        # Kahn from the roots downwards; leftovers sit on a cycle.
        indeg = [len(ps) for ps in parents]
        queue = deque(i for i in range(n) if indeg[i] == 0)
        topo = []
        while queue:
            i = queue.popleft()
            topo.append(i)
            for c in children[i]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    queue.append(c)
        if len(topo) != n:
            stuck = sorted(given[i] for i in range(n) if indeg[i] > 0)
            raise CycleDetected(
                "edges form a cycle through " + ", ".join(map(repr, stuck[:5])),
                source=name or None,
            )

        # Relabel in DFS preorder from the roots (first visit wins).
        order: list[int] = []
        visited = [False] * n
        for r in (i for i in range(n) if not parents[i]):
            stack = [r]
            while stack:
                i = stack.pop()
                if visited[i]:
                    continue
                visited[i] = True
                order.append(i)
                stack.extend(reversed(children[i]))
        remap = [0] * n
        for new, old in enumerate(order):
            remap[old] = new

        self._values = [given[old] for old in order]
        self._index = {v: i for i, v in enumerate(self._values)}
        self._parents = [tuple(sorted(remap[p] for p in parents[old])) for old in order]
        self._children = [tuple(sorted(remap[c] for c in children[old])) for old in order]
        self._topo = [remap[i] for i in topo]
        self._edges = tuple((self._values[remap[gidx[c]]], self._values[remap[gidx[p]]]) for c, p in edge_list)
        self.multiparent = frozenset(self._values[i] for i in range(n) if len(self._parents[i]) > 1)
        self.functional = not self.multiparent

        if self.functional:
            size = [1] * n
            for i in reversed(self._topo):
                for c in self._children[i]:
                    size[i] += size[c]
            self._size = size
            self._rows = None
        else:
            self._size = None
            if n <= EAGER_LIMIT:
                rows = [0] * n
                for i in reversed(self._topo):
                    r = 1 << i
                    for c in self._children[i]:
                        r |= rows[c]
                    rows[i] = r
                self._rows = rows
            else:
                self._rows = None
                self._lazy_down = lru_cache(maxsize=4096)(self._bfs_down)

        heights = [0] * n
        for i in reversed(self._topo):
            if self._children[i]:
                heights[i] = 1 + min(heights[c] for c in self._children[i])
        self._heights = heights

    # ---- basic accessors -------------------------------------------------
    @property
    def values(self) -> list[str]:
        return list(self._values)

    @property
    def edges(self) -> tuple[tuple[str, str], ...]:
        return self._edges

    def __len__(self) -> int:
        return len(self._values)

    def __contains__(self, value) -> bool:
        return value in self._index

    def __iter__(self):
        return iter(self._values)

    def __repr__(self):
        kind = "tree" if self.functional else "dag"
        return f"Taxonomy({self.name!r}, {len(self)} values, {kind})"

    def index(self, value: str) -> int:
        try:
            return self._index[value]
        except KeyError:
            where = f" in taxonomy {self.name!r}" if self.name else ""
            raise UnknownValue(f"unknown value {value!r}{where}") from None

    def value(self, i: int) -> str:
        return self._values[i]

    def parents(self, value: str) -> list[str]:
        return [self._values[p] for p in self._parents[self.index(value)]]

    def children(self, value: str) -> list[str]:
        return [self._values[c] for c in self._children[self.index(value)]]

    def roots(self) -> list[str]:
        return [v for i, v in enumerate(self._values) if not self._parents[i]]

    def leaves(self) -> list[str]:
        return [v for i, v in enumerate(self._values) if not self._children[i]]

    @property
    def full_mask(self) -> int:
        return (1 << len(self._values)) - 1

    # ---- order queries ---------------------------------------------------
    def _bfs_down(self, i: int) -> int:
        bits = 1 << i
        queue = deque([i])
        while queue:
            j = queue.popleft()
            for c in self._children[j]:
                if not bits >> c & 1:
                    bits |= 1 << c
                    queue.append(c)
        return bits

    def down_index(self, i: int) -> int:
        if self._size is not None:
            return ((1 << self._size[i]) - 1) << i
        if self._rows is not None:
            return self._rows[i]
        return self._lazy_down(i)

    def down(self, value: str) -> int:
        """Bitset of every value below ``value``, itself included."""
        return self.down_index(self.index(value))

    def down_values(self, value: str) -> list[str]:
        return self.decode(self.down(value))

    def decode(self, bits: int) -> list[str]:
        out = []
        while bits:
            low = bits & -bits
            out.append(self._values[low.bit_length() - 1])
            bits ^= low
        return out

    def leq_index(self, i: int, j: int) -> bool:
        if i == j:
            return True
        if self._size is not None:
            return j < i < j + self._size[j]
        return bool(self.down_index(j) >> i & 1)

    def leq(self, v1: str, v2: str) -> bool:
        """True iff ``v1`` equals or lies below ``v2``."""
        return self.leq_index(self.index(v1), self.index(v2))

    def common_descendant(self, v1: str, v2: str) -> str | None:
        """Some value below both arguments, or ``None`` if there is none."""
        i, j = self.index(v1), self.index(v2)
        if self.leq_index(i, j):
            return v1
        if self.leq_index(j, i):
            return v2
        if self.functional:
            return None
        # A maximal common descendant of two incomparable values reaches them
        # through two different parents, so scanning these nodes suffices.
        for m in self.multiparent:
            k = self._index[m]
            if self.leq_index(k, i) and self.leq_index(k, j):
                return m
        inter = self.down_index(i) & self.down_index(j)
        if inter:
            return self._values[(inter & -inter).bit_length() - 1]
        return None

    def height(self, value: str) -> int:
        """Shortest edge distance from ``value`` down to a leaf."""
        return self._heights[self.index(value)]

    def height_index(self, i: int) -> int:
        return self._heights[i]

    def depth(self) -> int:
        """Number of levels on the longest root-to-leaf path."""
        level = [1] * len(self._values)
        for i in self._topo:
            for c in self._children[i]:
                if level[i] + 1 > level[c]:
                    level[c] = level[i] + 1
        return max(level)

    def fanouts(self) -> list[int]:
        return [len(c) for c in self._children]


# ---- file format ---------------------------------------------------------

def load_taxonomy(source: TextIO | str, name: str = "") -> Taxonomy:
    """Read the ``child,parent`` CSV format.

    ``source`` is a text stream or a path.  A line ``value,`` (or just
    ``value``) declares a value without a parent; ``#`` starts a comment line.
    """
    if isinstance(source, str):
        with open(source, encoding="utf-8") as fh:
            return load_taxonomy(fh, name or source)
    label = name or getattr(source, "name", "") or ""
    values: list[str] = []
    edges: list[tuple[str, str]] = []
    for lineno, raw in enumerate(source, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) > 2 or not fields[0]:
            raise MalformedLine(f"expected 'child,parent', got {line!r}", source=label or None, line=lineno)
        for f in fields:
            if f and not check_identifier(f):
                raise MalformedLine(f"invalid value {f!r}", source=label or None, line=lineno)
        if len(fields) == 1 or not fields[1]:
            values.append(fields[0])
        else:
            edges.append((fields[0], fields[1]))
    if not values and not edges:
        raise EmptyTaxonomy("taxonomy file declares no values", source=label or None)
    return Taxonomy(values, edges, name=label)


def loads_taxonomy(text: str, name: str = "") -> Taxonomy:
    return load_taxonomy(io.StringIO(text), name=name)


def dump_taxonomy(tax: Taxonomy, out: TextIO) -> None:
    has_parent = set()
    for c, p in tax.edges:
        out.write(f"{c},{p}\n")
        has_parent.add(c)
    for v in tax.values:
        if v not in has_parent and not tax.children(v):
            out.write(f"{v},\n")


def dumps_taxonomy(tax: Taxonomy) -> str:
    buf = io.StringIO()
    dump_taxonomy(tax, buf)
    return buf.getvalue()


# ---- synthetic generators --------------------------------------------------

def _from_levels(child_counts, rng, name) -> Taxonomy:
    """Build a forest from per-node child counts listed level by level."""
    total = sum(len(level) for level in child_counts)
    names = [f"n{int(x)}" for x in rng.permutation(total)]
    n_roots = len(child_counts[0])
    edges = []
    frontier = list(range(n_roots))
    nid = n_roots
    for counts in child_counts:
        nxt = []
        for node, k in zip(frontier, counts):
            for _ in range(int(k)):
                edges.append((names[nid], names[node]))
                nxt.append(nid)
                nid += 1
        frontier = nxt
    return Taxonomy(names[:n_roots], edges, name=name)


def gen_regular(fanout: int, depth: int, seed: int = 0) -> Taxonomy:
    """``fanout`` complete trees with ``depth`` levels each."""
    if fanout < 1 or depth < 1:
        raise ValueError("fanout and depth must be positive")
    rng = np.random.default_rng(seed)
    total = fanout * (fanout**depth - 1) // (fanout - 1) if fanout > 1 else depth
    names = [f"n{int(x)}" for x in rng.permutation(total)]
    roots = list(range(fanout))
    edges = []
    frontier = roots
    nid = fanout
    for _ in range(depth - 1):
        nxt = []
        for node in frontier:
            for _ in range(fanout):
                edges.append((names[nid], names[node]))
                nxt.append(nid)
                nid += 1
        frontier = nxt
    return Taxonomy([names[r] for r in roots], edges, name=f"regular-f{fanout}-d{depth}-s{seed}")


def gen_random(avg_fanout: float, depth: int, seed: int = 0) -> Taxonomy:
    """Forest with Poisson(``avg_fanout``) children per internal node."""
    if avg_fanout <= 0 or depth < 1:
        raise ValueError("avg_fanout must be positive and depth at least 1")
    rng = np.random.default_rng(seed)
    n_roots = max(1, int(round(avg_fanout)))
    levels = [np.zeros(n_roots, dtype=np.int64)]
    width = n_roots
    for _ in range(depth - 1):
        counts = rng.poisson(avg_fanout, size=width)
        levels[-1] = counts
        width = int(counts.sum())
        levels.append(np.zeros(width, dtype=np.int64))
        if width == 0:
            break
    return _from_levels(levels, rng, f"random-f{avg_fanout:g}-d{depth}-s{seed}")


SCALE_FREE_MAX_FANOUT = 1000
SCALE_FREE_MEAN = 1.2


def scale_free_distribution(exponent: float) -> np.ndarray:
    """Probabilities for fanouts ``0..SCALE_FREE_MAX_FANOUT``.

    Positive fanouts follow ``k ** -exponent``; the mass at zero is chosen so
    that the mean fanout is slightly above one, which yields deep, narrow
    trees rather than a shallow explosion.
    """
    if exponent <= 1:
        raise ValueError("exponent must exceed 1")
    k = np.arange(1, SCALE_FREE_MAX_FANOUT + 1, dtype=float)
    w = k**-exponent
    w /= w.sum()
    mean_pos = float((k * w).sum())
    p0 = max(0.0, 1.0 - SCALE_FREE_MEAN / mean_pos)
    return np.concatenate([[p0], (1.0 - p0) * w])


def gen_scale_free(target_nodes: int, exponent: float = 2.7, seed: int = 0, roots: int = 6) -> Taxonomy:
    """Forest with power-law fanouts, grown until ``target_nodes`` is reached."""
    if target_nodes < 1:
        raise ValueError("target_nodes must be positive")
    probs = scale_free_distribution(exponent)
    rng = np.random.default_rng(seed)
    n_roots = min(roots, target_nodes)
    while True:
        levels = [np.zeros(n_roots, dtype=np.int64)]
        total = width = n_roots
        while total < target_nodes and width > 0:
            counts = rng.choice(len(probs), size=width, p=probs)
            levels[-1] = counts
            width = int(counts.sum())
            total += width
            levels.append(np.zeros(width, dtype=np.int64))
        if total >= target_nodes:
            break
        # died out before reaching the target: draw again
    return _from_levels(levels, rng, f"scalefree-g{exponent:g}-n{target_nodes}-s{seed}")

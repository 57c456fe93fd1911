"""Labeled trees on vertices 1..n: distances, Prüfer codes, communication cost.

All types are immutable after construction and all operations are pure, so
everything here is safe to share across threads.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "TreeStructureError",
    "LabeledTree",
    "DegreeSequence",
    "RequirementsMatrix",
    "DistanceMatrix",
    "PruferCode",
    "bfs_distance_matrix",
    "communication_cost",
    "degree_sequence_of",
    "prufer_decode",
    "prufer_encode",
    "random_labeled_tree",
    "read_tree",
    "write_tree",
    "tree_identity_residual",
]

Edge = tuple[int, int]


class TreeStructureError(ValueError):
    """The given edge set does not describe a tree on the declared vertices."""


def _normalize_edge(i: int, j: int) -> Edge:
    i, j = int(i), int(j)
    if i == j:
        raise TreeStructureError(f"self-loop at vertex {i}")
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class LabeledTree:
    """A tree on vertices 1..n, stored as a sorted tuple of undirected edges.

    Edges are normalized to (i, j) with i < j and sorted lexicographically,
    so equal trees hash equally and serialize identically.
    """

    n: int
    edges: tuple[Edge, ...]

    def __post_init__(self):
        edges = tuple(sorted(_normalize_edge(i, j) for i, j in self.edges))
        object.__setattr__(self, "edges", edges)
        n = self.n
        if n < 1:
            raise TreeStructureError("vertex count must be positive")
        if len(edges) != n - 1:
            raise TreeStructureError(
                f"a tree on {n} vertices needs {n - 1} edges, got {len(edges)}"
            )
        seen = set()
        for i, j in edges:
            if not (1 <= i < j <= n):
                raise TreeStructureError(f"edge ({i},{j}) out of range 1..{n}")
            if (i, j) in seen:
                raise TreeStructureError(f"duplicate edge ({i},{j})")
            seen.add((i, j))
        # n-1 edges and no cycle imply connectivity.
        parent = list(range(n + 1))

        def find(a: int) -> int:
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for i, j in edges:
            ri, rj = find(i), find(j)
            if ri == rj:
                raise TreeStructureError(f"edge ({i},{j}) closes a cycle")
            parent[ri] = rj

    @cached_property
    def _adjacency(self) -> dict[int, tuple[int, ...]]:
        adj: dict[int, list[int]] = {v: [] for v in range(1, self.n + 1)}
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        return {v: tuple(sorted(nb)) for v, nb in adj.items()}

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self._adjacency[v]

    def degree(self, v: int) -> int:
        return len(self._adjacency[v])

    def has_edge(self, i: int, j: int) -> bool:
        return _normalize_edge(i, j) in set(self.edges)


@dataclass(frozen=True)
class DegreeSequence:
    """Per-vertex degrees of a tree, indexed by vertex label.

    Invariants: every degree lies in [1, n-1] and the degrees sum to 2(n-1)
    (an arborescent sequence, realizable by at least one labeled tree).
    """

    degrees: tuple[int, ...]

    def __post_init__(self):
        degrees = tuple(int(d) for d in self.degrees)
        object.__setattr__(self, "degrees", degrees)
        n = len(degrees)
        if n < 2:
            raise ValueError("degree sequences need at least two vertices")
        if any(d < 1 or d > n - 1 for d in degrees):
            raise ValueError(f"degrees must lie in [1, {n - 1}]: {degrees}")
        if sum(degrees) != 2 * (n - 1):
            raise ValueError(
                f"sum of degrees is {sum(degrees)}, expected {2 * (n - 1)}"
            )

    @property
    def n(self) -> int:
        return len(self.degrees)

    @property
    def leaf_count(self) -> int:
        return sum(1 for d in self.degrees if d == 1)

    @property
    def internal_count(self) -> int:
        return self.n - self.leaf_count

    @property
    def diameter_bound(self) -> int:
        """Upper bound L = m + 2 on hop distances in any realization."""
        return self.internal_count + 2

    def degree(self, v: int) -> int:
        return self.degrees[v - 1]

    def leaves(self) -> tuple[int, ...]:
        return tuple(v for v, d in enumerate(self.degrees, 1) if d == 1)

    def internal_vertices(self) -> tuple[int, ...]:
        return tuple(v for v, d in enumerate(self.degrees, 1) if d > 1)


@dataclass(frozen=True, eq=False)
class RequirementsMatrix:
    """Symmetric non-negative requirement intensities with zero diagonal."""

    matrix: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.matrix)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"requirements matrix must be square, got {arr.shape}")
        if np.issubdtype(arr.dtype, np.integer) or arr.dtype == bool:
            arr = arr.astype(np.int64)
        else:
            arr = arr.astype(np.float64)
        if np.any(arr < 0):
            raise ValueError("requirements must be non-negative")
        if np.any(arr != arr.T):
            raise ValueError("requirements must be symmetric")
        if np.any(np.diagonal(arr) != 0):
            raise ValueError("requirements diagonal must be zero")
        arr.setflags(write=False)
        object.__setattr__(self, "matrix", arr)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_integral(self) -> bool:
        return np.issubdtype(self.matrix.dtype, np.integer)

    def value(self, i: int, j: int):
        return self.matrix[i - 1, j - 1].item()

    def support_pairs(self) -> tuple[Edge, ...]:
        """Unordered pairs {i, j} with positive requirement."""
        n = self.n
        return tuple(
            (i, j)
            for i in range(1, n + 1)
            for j in range(i + 1, n + 1)
            if self.matrix[i - 1, j - 1] > 0
        )

    @classmethod
    def constant(cls, n: int, value=1) -> "RequirementsMatrix":
        arr = np.full((n, n), value)
        np.fill_diagonal(arr, 0)
        return cls(arr)


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    """Pairwise path lengths of a tree; integers for unit edge lengths."""

    values: np.ndarray

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def is_integral(self) -> bool:
        return np.issubdtype(self.values.dtype, np.integer)

    def value(self, i: int, j: int):
        v = self.values[i - 1, j - 1]
        return v.item() if isinstance(v, np.generic) else v


@dataclass(frozen=True)
class PruferCode:
    """Length n-2 label sequence; label v appears degree(v) - 1 times."""

    n: int
    code: tuple[int, ...]

    def __post_init__(self):
        code = tuple(int(v) for v in self.code)
        object.__setattr__(self, "code", code)
        if self.n < 2:
            raise ValueError("Prüfer codes are defined for n >= 2")
        if len(code) != self.n - 2:
            raise ValueError(f"code length {len(code)} != n-2 = {self.n - 2}")
        for v in code:
            if not 1 <= v <= self.n:
                raise ValueError(f"code label {v} out of range 1..{self.n}")


def normalize_lengths(lengths: Mapping, edges: Iterable[Edge]) -> dict[Edge, Fraction]:
    """Validate an edge-length map against the given edges, as exact rationals."""
    table: dict[Edge, Fraction] = {}
    for key, value in lengths.items():
        i, j = key
        e = _normalize_edge(i, j)
        t = Fraction(value)
        if t <= 0:
            raise ValueError(f"edge length for {e} must be positive, got {value}")
        if e in table and table[e] != t:
            raise ValueError(f"conflicting lengths for edge {e}")
        table[e] = t
    missing = [e for e in edges if e not in table]
    if missing:
        raise ValueError(f"missing lengths for edges {missing[:5]}")
    return table


def bfs_distance_matrix(tree: LabeledTree, lengths: Mapping | None = None) -> DistanceMatrix:
    """All-pairs path lengths of a tree.

    With ``lengths`` omitted every edge counts 1 and the result is integral;
    otherwise entries are exact rationals (sums of the given edge lengths
    along the unique path).
    """
    n = tree.n
    if lengths is None:
        dist = np.zeros((n, n), dtype=np.int64)
        for s in range(1, n + 1):
            row = dist[s - 1]
            stack = [s]
            seen = {s}
            while stack:
                u = stack.pop()
                for v in tree.neighbors(u):
                    if v not in seen:
                        seen.add(v)
                        row[v - 1] = row[u - 1] + 1
                        stack.append(v)
        dist.setflags(write=False)
        return DistanceMatrix(dist)

    table = normalize_lengths(lengths, tree.edges)
    dist = np.zeros((n, n), dtype=object)
    for s in range(1, n + 1):
        acc = {s: Fraction(0)}
        stack = [s]
        while stack:
            u = stack.pop()
            for v in tree.neighbors(u):
                if v not in acc:
                    acc[v] = acc[u] + table[_normalize_edge(u, v)]
                    dist[s - 1, v - 1] = acc[v]
                    stack.append(v)
    dist.setflags(write=False)
    return DistanceMatrix(dist)


def communication_cost(tree: LabeledTree, req: RequirementsMatrix, lengths: Mapping | None = None):
    """Requirement-weighted sum of tree distances over ordered vertex pairs.

    Uses the ordered-pair convention: for symmetric requirements this equals
    twice the sum over unordered pairs. The result is exact (int when the
    data is integral, Fraction otherwise).
    """
    if req.n != tree.n:
        raise ValueError(f"requirements are {req.n}x{req.n}, tree has {tree.n} vertices")
    dist = bfs_distance_matrix(tree, lengths)
    if lengths is None and req.is_integral:
        return int((req.matrix * dist.values).sum())
    total = Fraction(0)
    for i in range(1, tree.n + 1):
        for j in range(i + 1, tree.n + 1):
            mu = req.value(i, j)
            if mu:
                total += 2 * Fraction(mu) * Fraction(dist.value(i, j))
    return int(total) if total.denominator == 1 else total


def degree_sequence_of(tree: LabeledTree) -> DegreeSequence:
    if tree.n < 2:
        raise ValueError("degree sequences are defined for n >= 2")
    return DegreeSequence(tuple(tree.degree(v) for v in range(1, tree.n + 1)))


def tree_identity_residual(tree: LabeledTree, dist: DistanceMatrix):
    """Max |sum_{k in N(i)} dist(k,j) - d_i*dist(i,j) - d_i + 2| over ordered i != j.

    Zero exactly when the neighbor-sum distance identity holds at every pair,
    which it does whenever ``dist`` is the unit-length distance matrix of
    ``tree``. Computed exactly; no tolerance involved.
    """
    worst = 0
    for i in range(1, tree.n + 1):
        d_i = tree.degree(i)
        nb = tree.neighbors(i)
        for j in range(1, tree.n + 1):
            if i == j:
                continue
            s = sum(dist.value(k, j) for k in nb)
            r = s - d_i * dist.value(i, j) - d_i + 2
            worst = max(worst, abs(r))
    return worst


def prufer_decode(code, n: int | None = None) -> LabeledTree:
    """Decode a Prüfer code into the unique labeled tree it encodes."""
    if isinstance(code, PruferCode):
        seq = list(code.code)
        n = code.n if n is None else int(n)
    else:
        seq = [int(v) for v in code]
        n = len(seq) + 2 if n is None else int(n)
    if n < 2:
        raise ValueError("Prüfer decoding needs n >= 2")
    if len(seq) != n - 2:
        raise ValueError(f"code length {len(seq)} != n-2 = {n - 2}")
    for v in seq:
        if not 1 <= v <= n:
            raise ValueError(f"code label {v} out of range 1..{n}")

    deg = [1] * (n + 1)
    for v in seq:
        deg[v] += 1
    leaves = [v for v in range(1, n + 1) if deg[v] == 1]
    heapq.heapify(leaves)
    edges = []
    for v in seq:
        u = heapq.heappop(leaves)
        edges.append((u, v))
        deg[u] -= 1
        deg[v] -= 1
        if deg[v] == 1:
            heapq.heappush(leaves, v)
    u = heapq.heappop(leaves)
    w = heapq.heappop(leaves)
    edges.append((u, w))
    return LabeledTree(n, tuple(edges))


def prufer_encode(tree: LabeledTree) -> PruferCode:
    """Encode a labeled tree as its Prüfer code (inverse of prufer_decode)."""
    n = tree.n
    if n < 2:
        raise ValueError("Prüfer encoding needs n >= 2")
    adj = {v: set(tree.neighbors(v)) for v in range(1, n + 1)}
    deg = {v: len(adj[v]) for v in adj}
    leaves = [v for v in range(1, n + 1) if deg[v] == 1]
    heapq.heapify(leaves)
    code = []
    for _ in range(n - 2):
        u = heapq.heappop(leaves)
        v = next(iter(adj[u]))
        code.append(v)
        adj[v].discard(u)
        adj[u].clear()
        deg[v] -= 1
        if deg[v] == 1:
            heapq.heappush(leaves, v)
    return PruferCode(n, tuple(code))


def random_labeled_tree(n: int, rng: int | random.Random = 0) -> LabeledTree:
    """Uniformly random labeled tree on n vertices (via a random Prüfer code)."""
    if isinstance(rng, int):
        rng = random.Random(rng)
    if n == 1:
        return LabeledTree(1, ())
    code = [rng.randint(1, n) for _ in range(n - 2)]
    return prufer_decode(code, n)


def write_tree(tree: LabeledTree) -> str:
    """Tree text format: first line n, then n-1 lines "i j" in lexicographic order."""
    lines = [str(tree.n)]
    lines.extend(f"{i} {j}" for i, j in tree.edges)
    return "\n".join(lines) + "\n"


def read_tree(text: str) -> LabeledTree:
    """Parse the tree text format produced by write_tree."""
    rows = [line.strip() for line in text.strip().splitlines() if line.strip()]
    if not rows:
        raise TreeStructureError("empty tree text")
    try:
        n = int(rows[0])
    except ValueError as exc:
        raise TreeStructureError(f"bad vertex count line: {rows[0]!r}") from exc
    edges = []
    for line in rows[1:]:
        parts = line.split()
        if len(parts) != 2:
            raise TreeStructureError(f"bad edge line: {line!r}")
        edges.append((int(parts[0]), int(parts[1])))
    return LabeledTree(n, tuple(edges))

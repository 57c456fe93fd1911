"""Problem instances: admissible graphs, requirement matrices, degree sequences.

Generators are pure functions of an explicit seed, so runs are reproducible
and safe to parallelize with distinct seeds.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .trees import (
    DegreeSequence,
    LabeledTree,
    RequirementsMatrix,
    communication_cost,
    random_labeled_tree,
)

__all__ = [
    "Instance",
    "BisectionInstance",
    "load_od_matrix",
    "random_connected_submatrix",
    "random_arborescent_degree_sequence",
    "bisection_reduction",
    "product_requirements",
    "synthetic_requirements",
    "cut_weight",
    "save_instance",
    "load_instance",
]

Edge = tuple[int, int]


def _normalize_pair(i, j) -> Edge:
    i, j = int(i), int(j)
    if i == j:
        raise ValueError(f"self-loop at vertex {i}")
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True, eq=False)
class Instance:
    """One problem: admissible edges, requirements, optional lengths, degrees.

    Leaf-leaf admissible edges are dropped at construction (for n >= 3 no
    tree with the target degree sequence can use them), so ``edges`` is
    already the preprocessed edge set E_s.
    """

    n: int
    edges: tuple[Edge, ...]
    req: RequirementsMatrix
    degseq: DegreeSequence
    lengths: tuple[tuple[int, int, object], ...] | None = None

    @classmethod
    def build(cls, req, degrees, edges="complete", lengths: Mapping | None = None) -> "Instance":
        """Assemble and validate an instance.

        ``edges`` may be the string "complete" or an iterable of pairs;
        ``lengths``, if given, must assign a positive length to every
        admissible edge that survives preprocessing.
        """
        if not isinstance(req, RequirementsMatrix):
            req = RequirementsMatrix(np.asarray(req))
        if not isinstance(degrees, DegreeSequence):
            degrees = DegreeSequence(tuple(degrees))
        n = req.n
        if degrees.n != n:
            raise ValueError(f"degree sequence has {degrees.n} vertices, matrix has {n}")
        if isinstance(edges, str):
            if edges != "complete":
                raise ValueError(f"unknown edge shorthand {edges!r}")
            edge_set = {(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)}
        else:
            edge_set = {_normalize_pair(i, j) for i, j in edges}
            for i, j in edge_set:
                if not 1 <= i < j <= n:
                    raise ValueError(f"edge ({i},{j}) out of range 1..{n}")
        if n >= 3:
            leaves = set(degrees.leaves())
            edge_set = {e for e in edge_set if not (e[0] in leaves and e[1] in leaves)}
        length_rows = None
        if lengths is not None:
            table = {}
            for key, value in lengths.items():
                e = _normalize_pair(*key)
                if e not in edge_set:
                    continue  # lengths of discarded edges are irrelevant
                v = float(value) if not isinstance(value, (int, Fraction)) else value
                if v <= 0:
                    raise ValueError(f"edge length for {e} must be positive")
                table[e] = v
            missing = sorted(edge_set - set(table))
            if missing:
                raise ValueError(f"missing lengths for admissible edges {missing[:5]}")
            length_rows = tuple((i, j, table[(i, j)]) for i, j in sorted(table))
        inst = cls(n, tuple(sorted(edge_set)), req, degrees, length_rows)
        inst._validate()
        return inst

    def _validate(self):
        adjacency = self._adjacency
        for v in range(1, self.n + 1):
            if self.degseq.degree(v) > len(adjacency.get(v, ())):
                raise ValueError(
                    f"degree {self.degseq.degree(v)} at vertex {v} exceeds its "
                    f"{len(adjacency.get(v, ()))} admissible neighbors"
                )

    @cached_property
    def _adjacency(self) -> dict[int, tuple[int, ...]]:
        adj: dict[int, list[int]] = {v: [] for v in range(1, self.n + 1)}
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        return {v: tuple(sorted(nb)) for v, nb in adj.items()}

    @cached_property
    def _edge_set(self) -> frozenset[Edge]:
        return frozenset(self.edges)

    @cached_property
    def _length_map(self) -> dict[Edge, Fraction] | None:
        if self.lengths is None:
            return None
        return {(i, j): Fraction(v) for i, j, v in self.lengths}

    @property
    def weighted(self) -> bool:
        return self.lengths is not None

    def length_table(self) -> dict[Edge, Fraction] | None:
        """Exact rational edge lengths keyed by (i, j) with i < j, or None."""
        return self._length_map

    def admissible(self, i: int, j: int) -> bool:
        return _normalize_pair(i, j) in self._edge_set

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self._adjacency[v]

    def edge_length(self, i: int, j: int) -> Fraction:
        if self._length_map is None:
            return Fraction(1)
        return self._length_map[_normalize_pair(i, j)]

    def is_admissible_tree(self, tree: LabeledTree) -> bool:
        if tree.n != self.n:
            return False
        if any(e not in self._edge_set for e in tree.edges):
            return False
        return all(tree.degree(v) == self.degseq.degree(v) for v in range(1, self.n + 1))

    def require_admissible(self, tree: LabeledTree):
        if not self.is_admissible_tree(tree):
            raise ValueError("tree is not admissible for this instance")

    def cost(self, tree: LabeledTree):
        self.require_admissible(tree)
        return communication_cost(tree, self.req, self._length_map)

    def to_dict(self) -> dict:
        mu = self.req.matrix.tolist()
        return {
            "n": self.n,
            "edges": [list(e) for e in self.edges],
            "mu": mu,
            "lengths": None if self.lengths is None
            else [[i, j, float(v)] for i, j, v in self.lengths],
            "degrees": list(self.degseq.degrees),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Instance":
        lengths = None
        if data.get("lengths") is not None:
            lengths = {(int(i), int(j)): v for i, j, v in data["lengths"]}
        return cls.build(
            np.asarray(data["mu"]),
            tuple(data["degrees"]),
            edges=[tuple(e) for e in data["edges"]],
            lengths=lengths,
        )


def save_instance(instance: Instance, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(instance.to_dict(), indent=1) + "\n")
    return path


def load_instance(path) -> Instance:
    return Instance.from_dict(json.loads(Path(path).read_text()))


# -- ingestion ----------------------------------------------------------------


def load_od_matrix(source) -> RequirementsMatrix:
    """Read a square origin-destination table and symmetrize it.

    Accepts a path or an open text file; the delimiter (comma or whitespace)
    and an optional header row are auto-detected. Directions are summed:
    mu'_ij = mu_ij + mu_ji, diagonal zeroed.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = Path(source).read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty origin-destination table")

    def split(line: str) -> list[str]:
        return [p for p in (line.split(",") if "," in line else line.split()) if p.strip()]

    def parse_row(line: str) -> list[float] | None:
        try:
            return [float(tok) for tok in split(line)]
        except ValueError:
            return None

    first = parse_row(lines[0])
    if first is None:  # header row
        lines = lines[1:]
        if not lines:
            raise ValueError("table contains only a header")
    rows = []
    for lineno, line in enumerate(lines, 1):
        row = parse_row(line)
        if row is None:
            raise ValueError(f"row {lineno}: non-numeric entry in {line!r}")
        rows.append(row)
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError("ragged rows in origin-destination table")
    if len(rows) != width:
        raise ValueError(f"table is {len(rows)}x{width}, expected square")
    arr = np.asarray(rows, dtype=np.float64)
    if np.any(arr < 0):
        raise ValueError("origin-destination entries must be non-negative")
    sym = arr + arr.T
    np.fill_diagonal(sym, 0)
    if np.all(sym == np.round(sym)):
        sym = sym.astype(np.int64)
    return RequirementsMatrix(sym)


def random_connected_submatrix(req: RequirementsMatrix, n: int, seed: int = 0) -> RequirementsMatrix:
    """Principal submatrix on n vertices whose positive support is connected.

    Grows a random ball in the support graph from a random start vertex, so
    the induced support always contains a spanning tree of the selection.
    Deterministic for a fixed seed.
    """
    if n < 1 or n > req.n:
        raise ValueError(f"submatrix size {n} out of range 1..{req.n}")
    rng = random.Random(seed)
    support = {v: set() for v in range(1, req.n + 1)}
    for i, j in req.support_pairs():
        support[i].add(j)
        support[j].add(i)

    comp_of, comp_size = {}, {}
    for v in range(1, req.n + 1):
        if v in comp_of:
            continue
        stack, members = [v], [v]
        comp_of[v] = v
        while stack:
            u = stack.pop()
            for w in support[u]:
                if w not in comp_of:
                    comp_of[w] = v
                    members.append(w)
                    stack.append(w)
        comp_size[v] = len(members)
    candidates = sorted(v for v in range(1, req.n + 1) if comp_size[comp_of[v]] >= n)
    if not candidates:
        raise ValueError(f"no connected support component of size >= {n}")

    start = rng.choice(candidates)
    chosen = {start}
    frontier = set(support[start])
    while len(chosen) < n:
        v = rng.choice(sorted(frontier))
        chosen.add(v)
        frontier |= support[v]
        frontier -= chosen
    idx = np.asarray(sorted(chosen)) - 1
    sub = req.matrix[np.ix_(idx, idx)].copy()
    return RequirementsMatrix(sub)


def random_arborescent_degree_sequence(n: int, n_internal_hint: int | None = None,
                                       seed: int = 0) -> DegreeSequence:
    """Random arborescent sequence with internal degrees in [2, 5].

    Draws the internal-vertex count (or takes the hint), places internals at
    random positions, draws their degrees uniformly in [2, 5], then repairs
    the total to 2(n-1) by +/-1 adjustments within the range.
    """
    if n < 3:
        raise ValueError("need n >= 3 to place an internal vertex")
    rng = random.Random(seed)
    lo = max(1, math.ceil((n - 2) / 4))
    hi = n - 2
    if n_internal_hint is None:
        m = rng.randint(lo, hi)
    else:
        m = int(n_internal_hint)
        if not lo <= m <= hi:
            raise ValueError(
                f"{m} internal vertices infeasible for n={n} with degrees in [2,5] "
                f"(feasible range [{lo}, {hi}])"
            )
    target = n + m - 2  # internal degrees must sum to this
    internal = rng.sample(range(1, n + 1), m)
    degs = {v: rng.randint(2, 5) for v in internal}
    guard = 0
    while True:
        diff = target - sum(degs.values())
        if diff == 0:
            break
        if diff > 0:
            pool = [v for v in internal if degs[v] < 5]
            step = 1
        else:
            pool = [v for v in internal if degs[v] > 2]
            step = -1
        if not pool:
            raise ValueError("irreparable degree draw")  # unreachable given range check
        degs[rng.choice(sorted(pool))] += step
        guard += 1
        if guard > 100 * n:
            raise ValueError("degree repair failed to converge")
    out = tuple(degs.get(v, 1) for v in range(1, n + 1))
    return DegreeSequence(out)


# -- special constructions -----------------------------------------------------


def product_requirements(vertex_weights: Sequence) -> RequirementsMatrix:
    """Requirements mu_ij = mu_i * mu_j for i != j, zero diagonal."""
    w = np.asarray(vertex_weights)
    if np.any(w < 0):
        raise ValueError("vertex weights must be non-negative")
    if np.issubdtype(w.dtype, np.integer):
        w = w.astype(np.int64)
    mat = np.outer(w, w)
    np.fill_diagonal(mat, 0)
    return RequirementsMatrix(mat)


def cut_weight(weights: np.ndarray, group: Iterable[int]):
    """cut_A(S): total weight of pairs split by S (1-based indices)."""
    arr = np.asarray(weights)
    inside = sorted({int(v) for v in group})
    outside = [v for v in range(1, arr.shape[0] + 1) if v not in inside]
    total = arr[np.ix_([v - 1 for v in inside], [v - 1 for v in outside])].sum()
    return total.item() if isinstance(total, np.generic) else total


@dataclass(frozen=True, eq=False)
class BisectionInstance:
    """Balanced-bisection reduction: 2m leaves, two internal hubs of degree m+1.

    For any admissible tree that routes leaf set S to the first hub, the
    ordered-pair communication cost is 4*sum_{i<j} mu_ij + 2*cut_A(S).
    """

    m: int
    weights: np.ndarray
    instance: Instance

    def leaf_split(self, tree: LabeledTree) -> tuple[int, ...]:
        """Leaves attached to the first internal hub (vertex 2m+1)."""
        hub = 2 * self.m + 1
        return tuple(v for v in tree.neighbors(hub) if v <= 2 * self.m)

    def predicted_cost(self, group: Iterable[int]):
        pair_sum = self.weights[np.triu_indices(2 * self.m, k=1)].sum()
        pair_sum = pair_sum.item() if isinstance(pair_sum, np.generic) else pair_sum
        return 4 * pair_sum + 2 * cut_weight(self.weights, group)


def bisection_reduction(weights) -> BisectionInstance:
    """Embed a balanced graph-bisection input as a degree-constrained instance."""
    arr = np.asarray(weights)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError("bisection weights must be a square matrix")
    if arr.shape[0] % 2 != 0 or arr.shape[0] < 4:
        raise ValueError("bisection weights must be 2m x 2m with m >= 2")
    if np.any(arr < 0):
        raise ValueError("bisection weights must be non-negative")
    if np.any(arr != arr.T):
        raise ValueError("bisection weights must be symmetric")
    m = arr.shape[0] // 2
    n = 2 * m + 2
    mu = np.zeros((n, n), dtype=arr.dtype)
    mu[: 2 * m, : 2 * m] = arr
    np.fill_diagonal(mu, 0)
    degrees = tuple([1] * (2 * m) + [m + 1, m + 1])
    instance = Instance.build(RequirementsMatrix(mu), degrees, edges="complete")
    clean = arr.copy()
    np.fill_diagonal(clean, 0)
    clean.setflags(write=False)
    return BisectionInstance(m, clean, instance)


def synthetic_requirements(n: int, seed: int = 0, density: float = 0.8,
                           low: int = 1, high: int = 9) -> RequirementsMatrix:
    """Random integer requirements with connected positive support.

    A random spanning tree guarantees connectivity; further pairs are filled
    in with probability ``density``.
    """
    if not 0 <= density <= 1:
        raise ValueError("density must lie in [0, 1]")
    rng = random.Random(seed)
    mat = np.zeros((n, n), dtype=np.int64)
    if n >= 2:
        backbone = random_labeled_tree(n, rng)
        for i, j in backbone.edges:
            mat[i - 1, j - 1] = mat[j - 1, i - 1] = rng.randint(max(low, 1), high)
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            if mat[i - 1, j - 1] == 0 and rng.random() < density:
                mat[i - 1, j - 1] = mat[j - 1, i - 1] = rng.randint(low, high)
    return RequirementsMatrix(mat)

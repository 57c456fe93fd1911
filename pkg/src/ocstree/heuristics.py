"""Feasible degree-respecting trees and degree-preserving local search.

The two neighborhood moves both preserve the exact per-vertex degree
sequence: a two-edge exchange swaps partners between two tree edges, and an
equal-degree label swap exchanges the incident edge sets of two vertices of
equal degree. Accepted steps strictly decrease the exact cost, so the search
terminates at a local optimum of the chosen neighborhood.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from itertools import combinations
from typing import Iterator

from .instances import Instance
from .trees import LabeledTree, TreeStructureError, communication_cost

__all__ = [
    "MOVES",
    "STRATEGIES",
    "NeighborhoodSpec",
    "InitialTreeError",
    "initial_tree",
    "local_search",
]

MOVES = ("two-edge-exchange", "equal-degree-label-swap")
STRATEGIES = ("best-improvement", "first-improvement")


class InitialTreeError(RuntimeError):
    """No admissible tree was found within the retry budget."""


@dataclass(frozen=True)
class NeighborhoodSpec:
    moves: tuple[str, ...] = MOVES
    strategy: str = "best-improvement"

    def __post_init__(self):
        if not self.moves:
            raise ValueError("at least one move kind must be enabled")
        for move in self.moves:
            if move not in MOVES:
                raise ValueError(f"unknown move {move!r}")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")


def _greedy_attempt(instance: Instance, internal: list[int], leaves: list[int]):
    """One greedy construction pass; returns edges or None on a dead end."""
    degseq = instance.degseq
    stubs = {v: degseq.degree(v) for v in internal}
    edges: list[tuple[int, int]] = []
    placed: list[int] = []
    for v in internal:
        if not placed:
            placed.append(v)
            continue
        candidates = [u for u in placed if stubs[u] > 0 and instance.admissible(u, v)]
        if not candidates:
            return None
        host = max(candidates, key=lambda u: (instance.req.value(u, v), -u))
        edges.append((host, v))
        stubs[host] -= 1
        stubs[v] -= 1
        placed.append(v)
    for leaf in leaves:
        candidates = [u for u in internal if stubs[u] > 0 and instance.admissible(u, leaf)]
        if not candidates:
            return None
        host = max(candidates, key=lambda u: (instance.req.value(u, leaf), -u))
        edges.append((host, leaf))
        stubs[host] -= 1
    return edges


def initial_tree(instance: Instance, seed: int = 0, max_attempts: int = 200) -> LabeledTree:
    """Greedy admissible tree: internal backbone first, then leaves by requirement.

    Internal vertices are attached (highest degree first) to the placed
    internal vertex with the largest requirement toward them; leaves go to
    the highest-requirement internal vertex with a free stub. Dead ends are
    retried with seeded random orders.
    """
    if instance.n == 2:
        if not instance.admissible(1, 2):
            raise InitialTreeError("the single edge {1,2} is not admissible")
        return LabeledTree(2, ((1, 2),))
    rng = random.Random(seed)
    degseq = instance.degseq
    internal = sorted(degseq.internal_vertices(), key=lambda v: (-degseq.degree(v), v))
    leaves = sorted(
        degseq.leaves(),
        key=lambda v: -sum(instance.req.value(v, u) for u in internal),
    )
    for attempt in range(max_attempts):
        edges = _greedy_attempt(instance, internal, leaves)
        if edges is not None:
            try:
                tree = LabeledTree(instance.n, tuple(edges))
            except TreeStructureError:
                tree = None
            if tree is not None and instance.is_admissible_tree(tree):
                return tree
        internal = list(internal)
        leaves = list(leaves)
        rng.shuffle(internal)
        rng.shuffle(leaves)
    raise InitialTreeError(f"no admissible tree found in {max_attempts} attempts")


def _two_edge_exchanges(tree: LabeledTree, instance: Instance) -> Iterator[LabeledTree]:
    edge_set = set(tree.edges)
    for (a, b), (c, d) in combinations(tree.edges, 2):
        for new1, new2 in (((a, c), (b, d)), ((a, d), (b, c))):
            p = tuple(sorted(new1))
            q = tuple(sorted(new2))
            if p[0] == p[1] or q[0] == q[1] or p == q:
                continue
            if p in edge_set or q in edge_set:
                continue
            if not (instance.admissible(*p) and instance.admissible(*q)):
                continue
            candidate = (edge_set - {(a, b), (c, d)}) | {p, q}
            try:
                yield LabeledTree(tree.n, tuple(candidate))
            except TreeStructureError:
                continue


def _label_swaps(tree: LabeledTree, instance: Instance) -> Iterator[LabeledTree]:
    degseq = instance.degseq
    for i, j in combinations(range(1, tree.n + 1), 2):
        if degseq.degree(i) != degseq.degree(j):
            continue
        relabel = {i: j, j: i}
        swapped = {
            tuple(sorted((relabel.get(a, a), relabel.get(b, b))))
            for a, b in tree.edges
        }
        if swapped == set(tree.edges):
            continue
        if not all(instance.admissible(*e) for e in swapped):
            continue
        yield LabeledTree(tree.n, tuple(swapped))


_MOVE_ITERATORS = {
    "two-edge-exchange": _two_edge_exchanges,
    "equal-degree-label-swap": _label_swaps,
}


def local_search(tree: LabeledTree, instance: Instance,
                 spec: NeighborhoodSpec = NeighborhoodSpec(),
                 trace: list | None = None) -> LabeledTree:
    """Descend to a local optimum of the enabled moves.

    Every accepted step strictly decreases the exact cost; with
    best-improvement the least-cost neighbor is taken, with first-improvement
    the first strictly better one in scan order. ``trace`` (if given) collects
    (step, move, cost) rows for accepted moves.
    """
    instance.require_admissible(tree)
    lengths = instance.length_table()
    current = tree
    current_cost = communication_cost(current, instance.req, lengths)
    step = 0
    while True:
        best = None
        for move in spec.moves:
            for candidate in _MOVE_ITERATORS[move](current, instance):
                cost = communication_cost(candidate, instance.req, lengths)
                if cost >= current_cost:
                    continue
                if best is None or cost < best[0]:
                    best = (cost, move, candidate)
                    if spec.strategy == "first-improvement":
                        break
            if best is not None and spec.strategy == "first-improvement":
                break
        if best is None:
            return current
        current_cost, move, current = best
        step += 1
        if trace is not None:
            trace.append((step, move, current_cost))
        instance.require_admissible(current)

"""Exact oracles: Prüfer-code enumeration of trees with a fixed degree
sequence, defoliated-skeleton enumeration, and optimal leaf assignment.

These are the ground truth every formulation and solver is checked against.
Enumeration order is the lexicographic order of Prüfer codes, so streams are
deterministic and partitionable by code prefix.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Iterator

from .formulations import build_f0q_qap, extract_tree, FormulationError
from .instances import Instance
from .model import linearize
from .trees import (
    DegreeSequence,
    LabeledTree,
    communication_cost,
    prufer_decode,
    write_tree,
)

__all__ = [
    "BudgetExceededError",
    "NoAdmissibleTreeError",
    "EnumerationBudget",
    "OracleResult",
    "count_trees",
    "enumerate_trees",
    "enumerate_defoliated_trees",
    "brute_force_optimum",
    "f0q_optimum",
]


class BudgetExceededError(RuntimeError):
    """The enumeration would exceed the configured tree budget."""


class NoAdmissibleTreeError(ValueError):
    """No tree with the target degree sequence fits inside E_s."""


@dataclass(frozen=True)
class EnumerationBudget:
    """Cap on how many trees an exhaustive pass may visit."""

    max_trees: int = 10_000_000

    def check(self, count: int, what: str = "trees"):
        if count > self.max_trees:
            raise BudgetExceededError(
                f"{count} {what} exceed the budget of {self.max_trees}"
            )


DEFAULT_BUDGET = EnumerationBudget()


def _coerce_budget(budget) -> EnumerationBudget:
    if budget is None:
        return DEFAULT_BUDGET
    if isinstance(budget, EnumerationBudget):
        return budget
    return EnumerationBudget(int(budget))


@dataclass(frozen=True)
class OracleResult:
    tree: LabeledTree
    cost: object  # exact int or Fraction
    trees_examined: int
    elapsed: float

    def to_dict(self) -> dict:
        return {
            "tree": write_tree(self.tree),
            "cost": float(self.cost),
            "trees_examined": self.trees_examined,
            "elapsed": self.elapsed,
        }


def count_trees(degseq: DegreeSequence) -> int:
    """Number of labeled trees with the given degrees: (n-2)! / prod (d_i - 1)!."""
    n = degseq.n
    total = math.factorial(n - 2)
    for d in degseq.degrees:
        total //= math.factorial(d - 1)
    return total


def _next_permutation(seq: list[int]) -> bool:
    """Advance to the next lexicographic permutation in place."""
    i = len(seq) - 2
    while i >= 0 and seq[i] >= seq[i + 1]:
        i -= 1
    if i < 0:
        return False
    j = len(seq) - 1
    while seq[j] <= seq[i]:
        j -= 1
    seq[i], seq[j] = seq[j], seq[i]
    seq[i + 1:] = reversed(seq[i + 1:])
    return True


def enumerate_trees(degseq: DegreeSequence, budget=None) -> Iterator[LabeledTree]:
    """Yield every labeled tree with exactly the given degrees, once each.

    Codes are the multiset permutations of {v repeated d_v - 1 times}, walked
    in lexicographic order with in-place next-permutation stepping.
    """
    budget = _coerce_budget(budget)
    budget.check(count_trees(degseq))
    code = []
    for v, d in enumerate(degseq.degrees, 1):
        code.extend([v] * (d - 1))
    code.sort()
    n = degseq.n
    while True:
        yield prufer_decode(code, n)
        if not _next_permutation(code):
            return


def iter_admissible_trees(instance: Instance, budget=None) -> Iterator[LabeledTree]:
    """enumerate_trees filtered to trees whose edges all lie in E_s."""
    edge_set = set(instance.edges)
    for tree in enumerate_trees(instance.degseq, budget):
        if all(e in edge_set for e in tree.edges):
            yield tree


def brute_force_optimum(instance: Instance, budget=None) -> OracleResult:
    """Globally minimal ordered-pair cost over admissible trees, exactly."""
    start = time.monotonic()
    lengths = instance.length_table()
    best_cost = None
    best_tree = None
    examined = 0
    for tree in iter_admissible_trees(instance, budget):
        examined += 1
        cost = communication_cost(tree, instance.req, lengths)
        if best_cost is None or cost < best_cost:
            best_cost, best_tree = cost, tree
    if best_tree is None:
        raise NoAdmissibleTreeError(
            "no tree with the target degree sequence fits the admissible edges"
        )
    return OracleResult(best_tree, best_cost, examined, time.monotonic() - start)


def enumerate_defoliated_trees(degseq: DegreeSequence, budget=None) -> Iterator[LabeledTree]:
    """Trees over the m internal vertices with skeleton degree <= target degree.

    Yields LabeledTree objects on slots 1..m, where slot k stands for the
    k-th smallest internal vertex label; attach d_k - deg_skel(k) leaves to
    each slot to recover full trees.
    """
    budget = _coerce_budget(budget)
    internal = degseq.internal_vertices()
    m = len(internal)
    if m < 1:
        raise ValueError("no internal vertices to defoliate onto")
    if m == 1:
        yield LabeledTree(1, ())
        return
    budget.check(m ** (m - 2), what="defoliated candidates")
    caps = [degseq.degree(v) - 1 for v in internal]  # code multiplicity limits
    for code in product(range(1, m + 1), repeat=m - 2):
        counts = [0] * m
        ok = True
        for v in code:
            counts[v - 1] += 1
            if counts[v - 1] > caps[v - 1]:
                ok = False
                break
        if ok:
            yield prufer_decode(code, m)


def _assign_leaves_exhaustive(instance: Instance, internal, caps, dist, cutoff):
    """Best leaf-to-slot assignment by depth-first search with cost pruning.

    Partial costs are exact lower bounds (all terms non-negative), so any
    branch meeting the cutoff is discarded. Returns (cost, slot-per-leaf) or
    None when nothing beats the cutoff.
    """
    leaves = instance.degseq.leaves()
    m = len(internal)
    admissible = [
        [k for k in range(m) if instance.admissible(i, internal[k])] for i in leaves
    ]
    link = [
        [
            sum(
                2 * (int(dist[k, l]) + 1) * instance.req.value(i, internal[l])
                for l in range(m)
            )
            for k in range(m)
        ]
        for i in leaves
    ]
    pair_mu = [
        [instance.req.value(a, b) for b in leaves] for a in leaves
    ]
    best_cost = cutoff
    best_assign = None
    slots = [0] * len(leaves)
    remaining = list(caps)

    def dfs(idx, acc):
        nonlocal best_cost, best_assign
        if best_cost is not None and acc >= best_cost:
            return
        if idx == len(leaves):
            best_cost = acc
            best_assign = tuple(slots)
            return
        for k in admissible[idx]:
            if remaining[k] == 0:
                continue
            delta = link[idx][k]
            for prev in range(idx):
                mu = pair_mu[idx][prev]
                if mu:
                    delta += 2 * (int(dist[k, slots[prev]]) + 2) * mu
            remaining[k] -= 1
            slots[idx] = k
            dfs(idx + 1, acc + delta)
            remaining[k] += 1

    dfs(0, 0)
    if best_assign is None:
        return None
    return best_cost, best_assign


def f0q_optimum(instance: Instance, leaf_solver: str = "exhaustive",
                budget=None) -> OracleResult:
    """Optimum by defoliated-skeleton enumeration plus leaf assignment.

    The incumbent cost is carried between skeletons as a cutoff. The
    "exhaustive" leaf solver searches assignments directly; "mini-milp"
    solves the linearized QAP of each skeleton.
    """
    if leaf_solver not in ("exhaustive", "mini-milp"):
        raise ValueError(f"unknown leaf solver {leaf_solver!r}")
    if instance.weighted:
        raise FormulationError("F0Q supports unit edge lengths only")
    start = time.monotonic()
    degseq = instance.degseq
    internal = degseq.internal_vertices()
    leaves = degseq.leaves()
    m = len(internal)
    edge_set = set(instance.edges)

    best_cost = None
    best_tree = None
    examined = 0
    from .trees import bfs_distance_matrix  # local to avoid import noise at top

    for skeleton in enumerate_defoliated_trees(degseq, budget):
        mapped = []
        admissible_skel = True
        for a, b in skeleton.edges:
            u, v = internal[a - 1], internal[b - 1]
            e = (u, v) if u < v else (v, u)
            if e not in edge_set:
                admissible_skel = False
                break
            mapped.append(e)
        if not admissible_skel:
            continue
        examined += 1
        caps = [degseq.degree(v) - skeleton.degree(k) for k, v in enumerate(internal, 1)]
        dist = bfs_distance_matrix(skeleton).values
        constant = 0
        for a in range(m):
            for b in range(a + 1, m):
                mu = instance.req.value(internal[a], internal[b])
                if mu:
                    constant += 2 * mu * int(dist[a, b])

        if leaf_solver == "exhaustive":
            cut = None if best_cost is None else best_cost - constant
            found = _assign_leaves_exhaustive(instance, internal, caps, dist, cut)
            if found is None:
                continue
            assign_cost, slot_of = found
            total = constant + assign_cost
            edges = list(mapped)
            for idx, i in enumerate(leaves):
                v = internal[slot_of[idx]]
                edges.append((i, v) if i < v else (v, i))
            tree = LabeledTree(instance.n, tuple(edges))
            if best_cost is None or total < best_cost:
                best_cost, best_tree = total, tree
        else:
            from .milp import SolveParams, solve_mip  # lazy: avoid hard cycle

            model = linearize(build_f0q_qap(skeleton, instance))
            cutoff = None if best_cost is None else float(best_cost)
            result = solve_mip(model, SolveParams(cutoff=cutoff))
            if result.status != "optimal" or result.record is None:
                continue
            tree = extract_tree(result.record, instance, "F0Q")
            total = communication_cost(tree, instance.req)
            if best_cost is None or total < best_cost:
                best_cost, best_tree = total, tree

    if best_tree is None:
        raise NoAdmissibleTreeError(
            "no admissible tree arises from any defoliated skeleton"
        )
    return OracleResult(best_tree, best_cost, examined, time.monotonic() - start)

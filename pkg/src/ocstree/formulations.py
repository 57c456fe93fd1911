"""Builders for the seven MIP formulations over an Instance, plus tree lifts,
tree extraction from solutions, and search-space-reduction cuts.

Variable naming scheme (stable across releases; indices are vertex labels):

    x_{i}_{j}          edge indicator, i < j
    d_{i}_{j}          pairwise distance, i < j
    w_{i}_{j}_{l}      "path of length <= l exists" indicator, i < j
    y_{i}_{k}_{j}      shortest-path next-hop indicator (F1L)
    y_{i}_{k}_{j}_{l}  product x_{ik} * w_{kj}^{(l-1)} (F2L)
    u_{s}_{t}_{i}_{j}  flow for pair (s, t), s < t, on directed arc i -> j

F0Q is a model family (one quadratic assignment model per defoliated
skeleton); its assignment variables coincide with the leaf-internal edge
indicators, so lift/extract treat all kinds uniformly.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product

from .instances import Instance
from .model import Assignment, Model, as_fraction
from .trees import (
    DegreeSequence,
    LabeledTree,
    TreeStructureError,
    bfs_distance_matrix,
)

__all__ = [
    "FORMULATION_TAGS",
    "FormulationKind",
    "FormulationError",
    "LiftError",
    "ExtractionError",
    "x_var",
    "d_var",
    "w_var",
    "build",
    "build_f0q_qap",
    "attach_search_space_cuts",
    "defoliated_skeleton",
    "lift",
    "extract_tree",
]

FORMULATION_TAGS = ("F0Q", "F1Q", "F1Q_UT", "F2Q", "F0L", "F1L", "F2L")

_DISTANCE_KINDS = ("F1Q", "F1Q_UT", "F1L")
_RELAX_KINDS = ("F1L", "F2Q", "F2L")


class FormulationError(ValueError):
    """Unsupported (kind, instance) combination or malformed inputs."""


class LiftError(ValueError):
    """The tree cannot be lifted: not admissible for the instance."""


class ExtractionError(ValueError):
    """Solution values do not describe an admissible tree."""


@dataclass(frozen=True)
class FormulationKind:
    """A formulation tag plus its options.

    ``big_m`` selects the F1L deactivation constant (maximum-diameter bound L
    or n-1); ``adaptive_bounds`` tightens distance-variable upper bounds per
    vertex-pair class; ``relax`` drops integrality of the relaxable variables
    (d in F1L, w in F2Q, w and y in F2L).
    """

    tag: str
    big_m: str = "L"
    adaptive_bounds: bool = False
    relax: bool = False

    def __post_init__(self):
        if self.tag not in FORMULATION_TAGS:
            raise FormulationError(f"unknown formulation tag {self.tag!r}")
        if self.big_m not in ("L", "n-1"):
            raise FormulationError(f"big-M option must be 'L' or 'n-1', got {self.big_m!r}")
        if self.big_m != "L" and self.tag != "F1L":
            raise FormulationError(f"big-M option applies to F1L only, not {self.tag}")
        if self.adaptive_bounds and self.tag not in _DISTANCE_KINDS:
            raise FormulationError(f"adaptive bounds apply to {_DISTANCE_KINDS}, not {self.tag}")
        if self.relax and self.tag not in _RELAX_KINDS:
            raise FormulationError(f"relax option applies to {_RELAX_KINDS}, not {self.tag}")

    @property
    def label(self) -> str:
        parts = [self.tag]
        if self.tag == "F1L" and self.big_m != "L":
            parts[0] += f"(M={self.big_m})"
        if self.adaptive_bounds:
            parts.append("adaptive")
        if self.relax:
            parts.append("relax")
        return "+".join(parts)

    @classmethod
    def parse(cls, text: str) -> "FormulationKind":
        """Parse "TAG" or "TAG:opt,opt" with opts M=L | M=n-1 | adaptive | relax."""
        head, _, rest = text.partition(":")
        kwargs = {}
        for opt in filter(None, (o.strip() for o in rest.split(","))):
            if opt.startswith("M="):
                kwargs["big_m"] = opt[2:]
            elif opt == "adaptive":
                kwargs["adaptive_bounds"] = True
            elif opt == "relax":
                kwargs["relax"] = True
            else:
                raise FormulationError(f"unknown formulation option {opt!r}")
        return cls(head.strip(), **kwargs)


def _coerce_kind(kind) -> FormulationKind:
    if isinstance(kind, FormulationKind):
        return kind
    return FormulationKind.parse(str(kind))


# -- variable names -----------------------------------------------------------


def x_var(i: int, j: int) -> str:
    a, b = (i, j) if i < j else (j, i)
    return f"x_{a}_{b}"


def d_var(i: int, j: int) -> str:
    a, b = (i, j) if i < j else (j, i)
    return f"d_{a}_{b}"


def w_var(i: int, j: int, level: int) -> str:
    a, b = (i, j) if i < j else (j, i)
    return f"w_{a}_{b}_{level}"


def _y1_var(i: int, k: int, j: int) -> str:
    return f"y_{i}_{k}_{j}"


def _y2_var(i: int, k: int, j: int, level: int) -> str:
    return f"y_{i}_{k}_{j}_{level}"


def _u_var(s: int, t: int, i: int, j: int) -> str:
    return f"u_{s}_{t}_{i}_{j}"


# -- shared pieces -------------------------------------------------------------


def _ordered_pairs(n: int):
    return ((i, j) for i in range(1, n + 1) for j in range(1, n + 1) if i != j)


def _upper_pairs(n: int):
    return ((i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1))


def _add_structure(model: Model, instance: Instance):
    """Edge binaries over E_s and the exact degree constraints."""
    for i, j in instance.edges:
        model.add_variable(x_var(i, j), "binary")
    for v in range(1, instance.n + 1):
        coeffs = {x_var(v, u): 1 for u in instance.neighbors(v)}
        model.add_constraint(coeffs, "=", instance.degseq.degree(v), name=f"deg_{v}")


def _pair_class_bound(degseq: DegreeSequence, i: int, j: int) -> int:
    """Adaptive distance bound: L-2 internal pairs, L-1 mixed, L leaf pairs."""
    L = degseq.diameter_bound
    leaves = (degseq.degree(i) == 1) + (degseq.degree(j) == 1)
    return L - 2 + leaves


def _distance_bounds(instance: Instance, adaptive: bool):
    """(lb, ub) per unordered pair for the distance variables.

    Unit lengths: integers in [1, L] (optionally tightened per pair class).
    Weighted: [min edge length, sum of the m+1 largest lengths]; the paper's
    per-edge lower bound t_ij is unsound without a triangle inequality on the
    lengths, so the global minimum is used instead.
    """
    degseq = instance.degseq
    bounds = {}
    if not instance.weighted:
        L = degseq.diameter_bound
        for i, j in _upper_pairs(instance.n):
            ub = _pair_class_bound(degseq, i, j) if adaptive else L
            bounds[(i, j)] = (Fraction(1), Fraction(ub))
        return bounds
    table = instance.length_table()
    values = sorted(table.values(), reverse=True)
    ub = sum(values[: degseq.internal_count + 1], Fraction(0))
    lb = min(values)
    for i, j in _upper_pairs(instance.n):
        bounds[(i, j)] = (lb, ub)
    return bounds


def _cost_coeff(instance: Instance, i: int, j: int) -> Fraction:
    return 2 * as_fraction(instance.req.value(i, j))


# -- builders -------------------------------------------------------------------


def _build_f1q(instance: Instance, kind: FormulationKind, upper_triangular: bool) -> Model:
    model = Model(f"{kind.label}_n{instance.n}")
    _add_structure(model, instance)
    bounds = _distance_bounds(instance, kind.adaptive_bounds)
    d_kind = "continuous" if instance.weighted else "integer"
    for (i, j), (lb, ub) in bounds.items():
        model.add_variable(d_var(i, j), d_kind, lb, ub)

    lengths = instance.length_table()
    pairs = _upper_pairs(instance.n) if upper_triangular else _ordered_pairs(instance.n)
    for i, j in pairs:
        deg_i = instance.degseq.degree(i)
        if lengths is None:
            bilinear = [
                (Fraction(1), x_var(i, k), d_var(k, j))
                for k in instance.neighbors(i)
                if k != j
            ]
            coeffs = {d_var(i, j): -deg_i}
        else:
            bilinear = []
            for k in instance.neighbors(i):
                inv = 1 / lengths[(min(i, k), max(i, k))]
                if k != j:
                    bilinear.append((inv, x_var(i, k), d_var(k, j)))
                bilinear.append((-inv, x_var(i, k), d_var(i, j)))
            coeffs = {}
        model.add_constraint(coeffs, "=", deg_i - 2, name=f"ident_{i}_{j}",
                             bilinear=bilinear)

    objective = {
        d_var(i, j): _cost_coeff(instance, i, j)
        for i, j in _upper_pairs(instance.n)
        if instance.req.value(i, j)
    }
    model.set_objective(objective)
    return model.freeze()


def _build_f2(instance: Instance, kind: FormulationKind, linearized: bool) -> Model:
    model = Model(f"{kind.label}_n{instance.n}")
    _add_structure(model, instance)
    degseq = instance.degseq
    L = degseq.diameter_bound
    w_kind = "continuous" if kind.relax else "binary"
    for i, j in _upper_pairs(instance.n):
        for level in range(1, L + 1):
            model.add_variable(w_var(i, j, level), w_kind, 0, 1)
    if linearized:
        for i, j in _upper_pairs(instance.n):
            for k in instance.neighbors(i):
                if k == j:
                    continue
                for level in range(2, L + 1):
                    model.add_variable(_y2_var(i, k, j, level), w_kind, 0, 1)

    for i, j in _upper_pairs(instance.n):
        if instance.admissible(i, j):
            model.add_constraint({w_var(i, j, 1): 1, x_var(i, j): -1}, "=", 0,
                                 name=f"reach1_{i}_{j}")
        else:
            model.add_constraint({w_var(i, j, 1): 1}, "=", 0, name=f"reach1_{i}_{j}")

    for i, j in _upper_pairs(instance.n):
        neighbors = [k for k in instance.neighbors(i) if k != j]
        for level in range(2, L + 1):
            coeffs = {w_var(i, j, level): Fraction(1)}
            if instance.admissible(i, j):
                coeffs[x_var(i, j)] = Fraction(-1)
            bilinear = []
            if linearized:
                for k in neighbors:
                    coeffs[_y2_var(i, k, j, level)] = Fraction(-1)
            else:
                bilinear = [
                    (Fraction(-1), x_var(i, k), w_var(k, j, level - 1))
                    for k in neighbors
                ]
            model.add_constraint(coeffs, "<=", 0, name=f"reach_{i}_{j}_{level}",
                                 bilinear=bilinear)

    if linearized:
        for i, j in _upper_pairs(instance.n):
            for k in instance.neighbors(i):
                if k == j:
                    continue
                for level in range(2, L + 1):
                    y = _y2_var(i, k, j, level)
                    model.add_constraint({y: 1, x_var(i, k): -1}, "<=", 0,
                                         name=f"ycapx_{i}_{k}_{j}_{level}")
                    model.add_constraint({y: 1, w_var(k, j, level - 1): -1}, "<=", 0,
                                         name=f"ycapw_{i}_{k}_{j}_{level}")

    for i, j in _upper_pairs(instance.n):
        model.add_constraint({w_var(i, j, L): 1}, "=", 1, name=f"reachL_{i}_{j}")

    objective = {}
    constant = Fraction(0)
    for i, j in _upper_pairs(instance.n):
        coeff = _cost_coeff(instance, i, j)
        if coeff == 0:
            continue
        constant += coeff * L
        for level in range(1, L):
            objective[w_var(i, j, level)] = -coeff
    model.set_objective(objective, constant=constant)
    return model.freeze()


def _build_f0l(instance: Instance, kind: FormulationKind) -> Model:
    model = Model(f"{kind.label}_n{instance.n}")
    _add_structure(model, instance)
    n = instance.n
    arcs = [(i, j) for i, j in instance.edges] + [(j, i) for i, j in instance.edges]
    arcs.sort()
    for s, t in _upper_pairs(n):
        for i, j in arcs:
            model.add_variable(_u_var(s, t, i, j), "continuous", 0, 1)

    for s, t in _upper_pairs(n):
        out_s = {_u_var(s, t, s, j): Fraction(1) for j in instance.neighbors(s)}
        for j in instance.neighbors(s):
            out_s[_u_var(s, t, j, s)] = Fraction(-1)
        model.add_constraint(out_s, ">=", 1, name=f"src_{s}_{t}")
        in_t = {_u_var(s, t, i, t): Fraction(1) for i in instance.neighbors(t)}
        for i in instance.neighbors(t):
            in_t[_u_var(s, t, t, i)] = Fraction(-1)
        model.add_constraint(in_t, ">=", 1, name=f"snk_{s}_{t}")
        for v in range(1, n + 1):
            if v in (s, t):
                continue
            coeffs = {}
            for j in instance.neighbors(v):
                coeffs[_u_var(s, t, v, j)] = Fraction(1)
                coeffs[_u_var(s, t, j, v)] = Fraction(-1)
            model.add_constraint(coeffs, "=", 0, name=f"bal_{s}_{t}_{v}")
        for i, j in arcs:
            model.add_constraint({_u_var(s, t, i, j): 1, x_var(i, j): -1}, "<=", 0,
                                 name=f"cap_{s}_{t}_{i}_{j}")

    objective = {}
    for s, t in _upper_pairs(n):
        coeff = _cost_coeff(instance, s, t)
        if coeff == 0:
            continue
        for i, j in arcs:
            objective[_u_var(s, t, i, j)] = coeff * instance.edge_length(i, j)
    model.set_objective(objective)
    return model.freeze()


def _build_f1l(instance: Instance, kind: FormulationKind) -> Model:
    model = Model(f"{kind.label}_n{instance.n}")
    _add_structure(model, instance)
    degseq = instance.degseq
    bounds = _distance_bounds(instance, kind.adaptive_bounds)
    d_kind = "continuous" if (instance.weighted or kind.relax) else "integer"
    for (i, j), (lb, ub) in bounds.items():
        model.add_variable(d_var(i, j), d_kind, lb, ub)

    if instance.weighted:
        table = instance.length_table()
        big_m = max(ub for _, ub in bounds.values()) + max(table.values())
    else:
        big_m = Fraction(degseq.diameter_bound if kind.big_m == "L" else instance.n - 1)

    # Next-hop indicators and the big-M Bellman steps, for every ordered pair.
    for i, j in _ordered_pairs(instance.n):
        neighbors = [k for k in instance.neighbors(i) if k != j]
        for k in neighbors:
            y = _y1_var(i, k, j)
            model.add_variable(y, "binary")
        for k in neighbors:
            y = _y1_var(i, k, j)
            step = instance.edge_length(i, k)
            coeffs = {d_var(i, j): Fraction(1), y: -big_m}
            dk = d_var(k, j)
            coeffs[dk] = coeffs.get(dk, Fraction(0)) - 1
            model.add_constraint(coeffs, ">=", step - big_m, name=f"hop_{i}_{k}_{j}")
        picker = {_y1_var(i, k, j): Fraction(1) for k in neighbors}
        if instance.admissible(i, j):
            picker[x_var(i, j)] = Fraction(1)
        model.add_constraint(picker, "=", 1, name=f"next_{i}_{j}")
        for k in neighbors:
            model.add_constraint({_y1_var(i, k, j): 1, x_var(i, k): -1}, "<=", 0,
                                 name=f"ycap_{i}_{k}_{j}")

    objective = {
        d_var(i, j): _cost_coeff(instance, i, j)
        for i, j in _upper_pairs(instance.n)
        if instance.req.value(i, j)
    }
    model.set_objective(objective)
    return model.freeze()


def build(instance: Instance, kind) -> Model:
    """Build the model for one formulation kind over an instance.

    The integral feasible set corresponds to admissible trees and the optimum
    equals the instance's minimal ordered-pair communication cost. Requires
    n >= 3 (n = 2 is the trivial single-edge answer, handled by callers).
    F0Q is a per-skeleton model family: see build_f0q_qap.
    """
    kind = _coerce_kind(kind)
    if instance.n < 3:
        raise FormulationError("builders require n >= 3")
    if kind.tag == "F0Q":
        raise FormulationError(
            "F0Q is a model family indexed by defoliated skeletons; "
            "use build_f0q_qap or exact.f0q_optimum"
        )
    if instance.weighted and kind.tag in ("F2Q", "F2L"):
        raise FormulationError(f"{kind.tag} supports unit edge lengths only")
    if kind.tag == "F1Q":
        return _build_f1q(instance, kind, upper_triangular=False)
    if kind.tag == "F1Q_UT":
        return _build_f1q(instance, kind, upper_triangular=True)
    if kind.tag == "F2Q":
        return _build_f2(instance, kind, linearized=False)
    if kind.tag == "F2L":
        return _build_f2(instance, kind, linearized=True)
    if kind.tag == "F0L":
        return _build_f0l(instance, kind)
    if kind.tag == "F1L":
        return _build_f1l(instance, kind)
    raise FormulationError(f"unhandled tag {kind.tag!r}")  # pragma: no cover


# -- F0Q: defoliated skeleton + leaf assignment QAP ------------------------------


def defoliated_skeleton(tree: LabeledTree, degseq: DegreeSequence) -> LabeledTree:
    """Restrict a tree to its internal vertices, relabeled to slots 1..m.

    Slot k corresponds to the k-th smallest internal vertex label.
    """
    internal = degseq.internal_vertices()
    if not internal:
        raise ValueError("no internal vertices")
    slot = {v: k for k, v in enumerate(internal, 1)}
    edges = [
        (slot[i], slot[j])
        for i, j in tree.edges
        if i in slot and j in slot
    ]
    return LabeledTree(len(internal), tuple(edges))


def build_f0q_qap(defoliated: LabeledTree, instance: Instance) -> Model:
    """Leaf-assignment QAP for one defoliated skeleton.

    Binary x_{i}_{v} assigns leaf i to internal vertex v (these coincide with
    the leaf-internal edge indicators); internal-internal edge variables are
    fixed to the skeleton. The objective is the full ordered-pair cost:
    cross-slot terms, same-slot terms (leaf-leaf distance 2, leaf-host
    distance 1), and the assignment-independent internal-internal constant.
    """
    if instance.weighted:
        raise FormulationError("F0Q supports unit edge lengths only")
    degseq = instance.degseq
    internal = degseq.internal_vertices()
    leaves = degseq.leaves()
    m = len(internal)
    if defoliated.n != m:
        raise FormulationError(f"skeleton has {defoliated.n} vertices, expected {m}")
    caps = []
    for k, v in enumerate(internal, 1):
        skel_deg = defoliated.degree(k)
        if skel_deg > degseq.degree(v):
            raise FormulationError(
                f"skeleton degree {skel_deg} exceeds target degree "
                f"{degseq.degree(v)} at internal vertex {v}"
            )
        caps.append(degseq.degree(v) - skel_deg)
    skeleton_edges = set()
    for a, b in defoliated.edges:
        u, v = internal[a - 1], internal[b - 1]
        e = (u, v) if u < v else (v, u)
        if not instance.admissible(*e):
            raise FormulationError(f"skeleton edge {e} is not admissible")
        skeleton_edges.add(e)

    dist = bfs_distance_matrix(defoliated).values
    model = Model(f"F0Q_n{instance.n}_skel{defoliated.edges}")
    for i in leaves:
        for v in internal:
            if instance.admissible(i, v):
                model.add_variable(x_var(i, v), "binary")
    for a in range(m):
        for b in range(a + 1, m):
            u, v = internal[a], internal[b]
            if instance.admissible(u, v):
                val = 1 if (u, v) in skeleton_edges else 0
                model.add_variable(x_var(u, v), "binary", val, val)

    for i in leaves:
        coeffs = {x_var(i, v): 1 for v in internal if instance.admissible(i, v)}
        model.add_constraint(coeffs, "=", 1, name=f"leaf_{i}")
    for k, v in enumerate(internal, 1):
        coeffs = {x_var(i, v): 1 for i in leaves if instance.admissible(i, v)}
        model.add_constraint(coeffs, "=", caps[k - 1], name=f"slot_{v}")

    bilinear = []
    linear: dict[str, Fraction] = {}
    for ia, i in enumerate(leaves):
        for j in leaves[ia + 1:]:
            mu = instance.req.value(i, j)
            if not mu:
                continue
            for k, vk in enumerate(internal, 1):
                if not instance.admissible(i, vk):
                    continue
                for l, vl in enumerate(internal, 1):
                    if not instance.admissible(j, vl):
                        continue
                    coeff = 2 * (int(dist[k - 1, l - 1]) + 2) * as_fraction(mu)
                    bilinear.append((coeff, x_var(i, vk), x_var(j, vl)))
    for i in leaves:
        for k, vk in enumerate(internal, 1):
            if not instance.admissible(i, vk):
                continue
            total = Fraction(0)
            for l, vl in enumerate(internal, 1):
                mu = instance.req.value(i, vl)
                if mu:
                    total += 2 * (int(dist[k - 1, l - 1]) + 1) * as_fraction(mu)
            if total:
                linear[x_var(i, vk)] = total
    constant = Fraction(0)
    for a in range(m):
        for b in range(a + 1, m):
            mu = instance.req.value(internal[a], internal[b])
            if mu:
                constant += 2 * as_fraction(mu) * int(dist[a, b])

    model.set_objective(linear, constant=constant, bilinear=bilinear)
    return model.freeze()


# -- search-space cuts -----------------------------------------------------------


def attach_search_space_cuts(model: Model, instance: Instance) -> Model:
    """Add the valid inequalities that prune non-tree-like edge patterns.

    (a) leaf-leaf edges are already absent from E_s; (b) every vertex picks at
    least one internal neighbor (skipped for the hub when m = 1, whose tree
    neighbors are all leaves); (c) a degree-2 vertex picks at most one leaf
    (valid for n >= 4; for n = 3 the path itself would be cut off).
    """
    for i, j in instance.edges:
        if x_var(i, j) not in model.variables:
            raise FormulationError(
                f"model is missing {x_var(i, j)}; it was not built from this instance"
            )
    degseq = instance.degseq
    internal = set(degseq.internal_vertices())
    out = model.copy(name=f"{model.name}+cuts")
    for v in range(1, instance.n + 1):
        if len(internal) == 1 and v in internal:
            continue
        coeffs = {x_var(v, u): 1 for u in instance.neighbors(v) if u in internal}
        out.add_constraint(coeffs, ">=", 1, name=f"cutint_{v}")
    if instance.n >= 4:
        for v in range(1, instance.n + 1):
            if degseq.degree(v) != 2:
                continue
            coeffs = {x_var(v, u): 1 for u in instance.neighbors(v)
                      if degseq.degree(u) == 1}
            if coeffs:
                out.add_constraint(coeffs, "<=", 1, name=f"cutleaf_{v}")
    return out.freeze()


# -- lift and extraction -----------------------------------------------------------


def _next_hop_table(tree: LabeledTree) -> dict[tuple[int, int], int]:
    """next_hop[(i, j)] = first vertex after i on the unique i -> j path."""
    table = {}
    for j in range(1, tree.n + 1):
        parent = {j: None}
        stack = [j]
        while stack:
            u = stack.pop()
            for v in tree.neighbors(u):
                if v not in parent:
                    parent[v] = u
                    stack.append(v)
        for i in range(1, tree.n + 1):
            if i != j:
                table[(i, j)] = parent[i]
    return table


def lift(tree: LabeledTree, instance: Instance, kind) -> Assignment:
    """Build the feasible assignment a tree induces under one formulation.

    The result is complete for the corresponding model and its objective
    equals communication_cost(tree). For F0Q the matching model is the QAP
    of this tree's own defoliated skeleton.
    """
    kind = _coerce_kind(kind)
    if not instance.is_admissible_tree(tree):
        raise LiftError("tree is not admissible for the instance")
    tree_edges = set(tree.edges)
    values: dict[str, object] = {
        x_var(i, j): (1 if (i, j) in tree_edges else 0) for i, j in instance.edges
    }
    if kind.tag == "F0Q":
        return Assignment(values)

    dist = bfs_distance_matrix(tree, instance.length_table())
    n = instance.n

    if kind.tag in ("F1Q", "F1Q_UT", "F1L"):
        for i, j in _upper_pairs(n):
            values[d_var(i, j)] = dist.value(i, j)
    if kind.tag == "F1L":
        hops = _next_hop_table(tree)
        for i, j in _ordered_pairs(n):
            for k in instance.neighbors(i):
                if k != j:
                    values[_y1_var(i, k, j)] = 1 if hops[(i, j)] == k else 0
    if kind.tag in ("F2Q", "F2L"):
        L = instance.degseq.diameter_bound
        for i, j in _upper_pairs(n):
            for level in range(1, L + 1):
                values[w_var(i, j, level)] = 1 if dist.value(i, j) <= level else 0
        if kind.tag == "F2L":
            for i, j in _upper_pairs(n):
                for k in instance.neighbors(i):
                    if k == j:
                        continue
                    x_ik = values[x_var(i, k)]
                    for level in range(2, L + 1):
                        w_kj = values[w_var(k, j, level - 1)]
                        values[_y2_var(i, k, j, level)] = x_ik * w_kj
    if kind.tag == "F0L":
        hops = _next_hop_table(tree)
        arcs = [(i, j) for i, j in instance.edges] + [(j, i) for i, j in instance.edges]
        for s, t in _upper_pairs(n):
            on_path = set()
            v = s
            while v != t:
                nxt = hops[(v, t)]
                on_path.add((v, nxt))
                v = nxt
            for i, j in arcs:
                values[_u_var(s, t, i, j)] = 1 if (i, j) in on_path else 0
    return Assignment(values)


def extract_tree(assignment, instance: Instance, kind) -> LabeledTree:
    """Read the edge indicators of an integral solution back into a tree."""
    _coerce_kind(kind)  # validates the tag/options
    edges = []
    for i, j in instance.edges:
        name = x_var(i, j)
        try:
            value = as_fraction(assignment[name])
        except KeyError as exc:
            raise ExtractionError(f"assignment is missing {name}") from exc
        if value > Fraction(1, 2):
            edges.append((i, j))
    try:
        tree = LabeledTree(instance.n, tuple(edges))
    except TreeStructureError as exc:
        raise ExtractionError(f"x-values do not form a tree: {exc}") from exc
    for v in range(1, instance.n + 1):
        if tree.degree(v) != instance.degseq.degree(v):
            raise ExtractionError(
                f"extracted tree has degree {tree.degree(v)} at vertex {v}, "
                f"expected {instance.degseq.degree(v)}"
            )
    return tree

"""Desk-scale mixed-integer linear solver.

LP relaxations are delegated to scipy's HiGHS interface; on top sits a
deterministic best-bound branch-and-bound with most-fractional branching,
incumbent warm starts, and time/node/gap control. A single solve is
single-threaded; distinct solves may run concurrently.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import csr_matrix

from .model import Assignment, Model, ModelError, evaluate

__all__ = [
    "INT_TOL",
    "SolveParams",
    "LogEntry",
    "SolveResult",
    "LpSolution",
    "solve_lp",
    "solve_mip",
    "relative_gap",
]

INT_TOL = 1e-6


@dataclass(frozen=True)
class SolveParams:
    """Controls for solve_mip; tolerances must be non-negative.

    ``cutoff`` discards any subproblem that provably cannot beat the given
    objective value (used to chain solves that share an incumbent cost).
    """

    time_limit: float | None = None
    abs_gap_tol: float = 1e-4
    rel_gap_tol: float = 0.0
    incumbent: Assignment | None = None
    node_limit: int | None = None
    cutoff: float | None = None

    def __post_init__(self):
        if self.abs_gap_tol < 0 or self.rel_gap_tol < 0:
            raise ValueError("tolerances must be non-negative")
        if self.time_limit is not None and self.time_limit < 0:
            raise ValueError("time limit must be non-negative")
        if self.node_limit is not None and self.node_limit < 1:
            raise ValueError("node limit must be at least 1")


@dataclass(frozen=True)
class LogEntry:
    elapsed: float
    nodes: int
    record: float | None
    bound: float
    gap: float


@dataclass
class SolveResult:
    status: str  # optimal | feasible_time_limit | infeasible | unbounded | node_limit
    record: Assignment | None
    objective: float | None
    bound: float
    gap: float
    nodes: int
    elapsed: float
    log: list[LogEntry] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "objective": self.objective,
            "bound": self.bound,
            "gap": self.gap,
            "nodes": self.nodes,
            "elapsed": self.elapsed,
        }


@dataclass
class LpSolution:
    status: str  # optimal | infeasible | unbounded | numerical_failure
    point: Assignment | None
    objective: float | None


def relative_gap(record: float | None, bound: float | None) -> float:
    """record/bound - 1, with conventions for missing or zero bounds."""
    if record is None or bound is None:
        return math.inf
    if record == bound:
        return 0.0
    if bound <= 0:
        if bound == 0:
            return math.inf
        return (record - bound) / abs(bound)
    return record / bound - 1.0


class _CompiledModel:
    """Dense objective + sparse constraint matrices extracted from a Model."""

    def __init__(self, model: Model):
        if not model.is_linear:
            raise ModelError("solver requires a linear model; run linearize first")
        self.model = model
        self.names = list(model.variables)
        self.index = {name: i for i, name in enumerate(self.names)}
        n = len(self.names)
        self.c = np.zeros(n)
        for name, coeff in model.objective_coeffs.items():
            self.c[self.index[name]] = float(coeff)
        self.c0 = float(model.objective_constant)
        self.integers = np.array(
            [model.variables[name].kind in ("binary", "integer") for name in self.names]
        )
        lb = np.full(n, -np.inf)
        ub = np.full(n, np.inf)
        for i, name in enumerate(self.names):
            var = model.variables[name]
            if var.lb is not None:
                lb[i] = float(var.lb)
            if var.ub is not None:
                ub[i] = float(var.ub)
        self.lb, self.ub = lb, ub

        ub_rows, ub_rhs = [], []
        eq_rows, eq_rhs = [], []
        for con in model.constraints:
            row = [(self.index[v], float(c)) for v, c in con.coeffs.items()]
            rhs = float(con.rhs)
            if con.sense == "<=":
                ub_rows.append(row)
                ub_rhs.append(rhs)
            elif con.sense == ">=":
                ub_rows.append([(i, -c) for i, c in row])
                ub_rhs.append(-rhs)
            else:
                eq_rows.append(row)
                eq_rhs.append(rhs)

        def pack(rows, width):
            data, indices, indptr = [], [], [0]
            for row in rows:
                for i, c in row:
                    indices.append(i)
                    data.append(c)
                indptr.append(len(indices))
            return csr_matrix((data, indices, indptr), shape=(len(rows), width))

        self.A_ub = pack(ub_rows, n) if ub_rows else None
        self.b_ub = np.array(ub_rhs) if ub_rows else None
        self.A_eq = pack(eq_rows, n) if eq_rows else None
        self.b_eq = np.array(eq_rhs) if eq_rows else None

    def solve_relaxation(self, lb, ub):
        res = linprog(
            self.c,
            A_ub=self.A_ub,
            b_ub=self.b_ub,
            A_eq=self.A_eq,
            b_eq=self.b_eq,
            bounds=np.column_stack([lb, ub]),
            method="highs",
        )
        if res.status == 0:
            return "optimal", res.x, float(res.fun) + self.c0
        if res.status == 2:
            return "infeasible", None, None
        if res.status == 3:
            return "unbounded", None, None
        return "numerical_failure", None, None


def solve_lp(model: Model) -> LpSolution:
    """Solve the continuous relaxation of a linear model."""
    compiled = _CompiledModel(model)
    status, x, obj = compiled.solve_relaxation(compiled.lb, compiled.ub)
    if status != "optimal":
        return LpSolution(status, None, None)
    point = Assignment({name: float(v) for name, v in zip(compiled.names, x)})
    return LpSolution(status, point, obj)


def solve_mip(model: Model, params: SolveParams | None = None) -> SolveResult:
    """Best-bound branch-and-bound on the integer variables of a linear model.

    Deterministic: identical inputs and params reproduce the node sequence.
    On status "optimal" the record is within abs_gap_tol of the true integral
    optimum; time/node limits return the best record and bound found so far.
    """
    params = params or SolveParams()
    compiled = _CompiledModel(model)
    start = time.monotonic()
    log: list[LogEntry] = []

    record_obj: float | None = None
    record_point: Assignment | None = None
    if params.incumbent is not None:
        report = evaluate(model, params.incumbent)
        if not report.feasible:
            raise ValueError("incumbent assignment is not feasible for the model")
        record_obj = float(report.objective)
        record_point = params.incumbent

    def threshold() -> float:
        cut = math.inf if params.cutoff is None else params.cutoff
        rec = math.inf if record_obj is None else record_obj
        return min(cut, rec)

    def result(status: str, bound: float, nodes: int) -> SolveResult:
        if status == "optimal" and record_obj is not None:
            bound = record_obj
        gap = relative_gap(record_obj, bound)
        return SolveResult(status, record_point, record_obj, bound, gap, nodes,
                           time.monotonic() - start, log)

    def note(nodes: int, bound: float):
        log.append(LogEntry(time.monotonic() - start, nodes, record_obj, bound,
                            relative_gap(record_obj, bound)))

    nodes = 0
    status, x, obj = compiled.solve_relaxation(compiled.lb, compiled.ub)
    nodes += 1
    if status == "infeasible":
        return result("infeasible", math.inf, nodes)
    if status == "unbounded":
        return result("unbounded", -math.inf, nodes)
    if status == "numerical_failure":
        raise RuntimeError("LP relaxation failed numerically at the root")

    bound = obj
    note(nodes, bound)

    frac = np.where(compiled.integers)[0]

    def fractional_index(x) -> int | None:
        if frac.size == 0:
            return None
        vals = x[frac]
        dist = np.abs(vals - np.round(vals))
        worst = np.argmax(np.minimum(dist, 1 - dist))
        if dist[worst] <= INT_TOL:
            return None
        return int(frac[worst])

    counter = 0
    heap: list[tuple[float, int, dict, dict]] = []

    def handle(obj_val, x, lb_over, ub_over) -> bool:
        """Record an integral point or push two children. True if recorded."""
        nonlocal record_obj, record_point, counter
        branch_on = fractional_index(x)
        if branch_on is None:
            if record_obj is None or obj_val < record_obj:
                record_obj = obj_val
                record_point = Assignment(
                    {name: float(v) for name, v in zip(compiled.names, x)}
                )
                note(nodes, bound)
            return True
        value = x[branch_on]
        down = dict(ub_over)
        down[branch_on] = math.floor(value)
        up = dict(lb_over)
        up[branch_on] = math.ceil(value)
        heapq.heappush(heap, (obj_val, counter, lb_over, down))
        heapq.heappush(heap, (obj_val, counter + 1, up, ub_over))
        counter += 2
        return False

    handle(obj, x, {}, {})

    while heap:
        if params.time_limit is not None and time.monotonic() - start > params.time_limit:
            return result("feasible_time_limit", bound, nodes)
        if params.node_limit is not None and nodes >= params.node_limit:
            return result("node_limit", bound, nodes)
        key, _, lb_over, ub_over = heapq.heappop(heap)
        if key > bound:
            bound = key
            note(nodes, bound)
        if key >= threshold() - params.abs_gap_tol:
            break  # best-bound order: nothing left can improve the record
        if (
            params.rel_gap_tol > 0
            and relative_gap(record_obj, bound) <= params.rel_gap_tol
        ):
            break
        lb = compiled.lb.copy()
        ub = compiled.ub.copy()
        for i, v in lb_over.items():
            lb[i] = max(lb[i], v)
        for i, v in ub_over.items():
            ub[i] = min(ub[i], v)
        status, x, obj = compiled.solve_relaxation(lb, ub)
        nodes += 1
        if status != "optimal":
            continue  # infeasible subproblem (bounded model cannot be unbounded)
        if obj >= threshold() - params.abs_gap_tol:
            continue
        handle(obj, x, lb_over, ub_over)

    if record_obj is None:
        return result("infeasible", bound, nodes)
    return result("optimal", bound, nodes)

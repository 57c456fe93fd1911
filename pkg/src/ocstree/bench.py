"""Experiment harness: (instance x degree-sequence x formulation) grids with
per-cell time limits, append-only report rows, and Table-3-style summaries.

Cells run concurrently up to a worker count; each cell is single-threaded,
so records are reproducible for a fixed config and seeds regardless of the
worker count.
"""

from __future__ import annotations

import csv
import json
import math
import statistics
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .exact import f0q_optimum
from .formulations import FormulationKind, build, lift
from .heuristics import initial_tree, local_search
from .instances import (
    Instance,
    load_instance,
    load_od_matrix,
    random_arborescent_degree_sequence,
    random_connected_submatrix,
    synthetic_requirements,
)
from .milp import SolveParams, relative_gap, solve_mip
from .model import export_lp, linearize

__all__ = [
    "ExperimentConfig",
    "ReportRow",
    "run_experiment",
    "summarize",
    "Summary",
    "write_report",
    "read_rows_csv",
]

CSV_COLUMNS = (
    "instance_id", "n", "degseq_id", "formulation", "status",
    "record", "bound", "gap", "elapsed", "nodes", "detail",
)

SOLVER_TARGETS = ("mini-milp", "lp-export")
INIT_MODES = ("none", "local-search")


@dataclass(frozen=True)
class ExperimentConfig:
    """A full grid: instances (files or generated) x degree sequences x kinds."""

    formulations: tuple[FormulationKind, ...]
    sizes: tuple[int, ...] = ()
    degseqs_per_n: int = 1
    instance_files: tuple[str, ...] = ()
    od_source: str | None = None
    density: float = 0.8
    solver: str = "mini-milp"
    time_limit: float | None = None
    gap_tol: float = 1e-4
    seed: int = 0
    init: str = "none"
    workers: int = 1
    out_dir: str | None = None

    def __post_init__(self):
        if self.solver not in SOLVER_TARGETS:
            raise ValueError(f"solver must be one of {SOLVER_TARGETS}")
        if self.init not in INIT_MODES:
            raise ValueError(f"init must be one of {INIT_MODES}")
        if not self.formulations:
            raise ValueError("at least one formulation is required")
        if not self.sizes and not self.instance_files:
            raise ValueError("give sizes for generation or explicit instance files")
        for path in self.instance_files:
            if not Path(path).exists():
                raise ValueError(f"instance file {path} does not exist")
        if self.od_source is not None and not Path(self.od_source).exists():
            raise ValueError(f"OD source {self.od_source} does not exist")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        data = json.loads(Path(path).read_text())
        data["formulations"] = tuple(
            FormulationKind.parse(f) for f in data["formulations"]
        )
        for key in ("sizes", "instance_files"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)


@dataclass(frozen=True)
class ReportRow:
    instance_id: str
    n: int
    degseq_id: str
    formulation: str
    status: str
    record: float | None
    bound: float | None
    gap: float | None
    elapsed: float
    nodes: int
    detail: str = ""

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in CSV_COLUMNS}


@dataclass(frozen=True)
class _Cell:
    order: int
    instance_id: str
    degseq_id: str
    instance: Instance
    kind: FormulationKind
    seed: int


def _materialize_cells(config: ExperimentConfig) -> list[_Cell]:
    cells: list[_Cell] = []
    order = 0
    if config.instance_files:
        for path in config.instance_files:
            instance = load_instance(path)
            for kind in config.formulations:
                cells.append(_Cell(order, Path(path).stem, "file", instance, kind,
                                   config.seed + order))
                order += 1
        return cells
    od = load_od_matrix(config.od_source) if config.od_source else None
    for n in config.sizes:
        if od is not None:
            req = random_connected_submatrix(od, n, seed=config.seed + n)
        else:
            req = synthetic_requirements(n, seed=config.seed + n, density=config.density)
        instance_id = f"gen-n{n}-s{config.seed}"
        for k in range(config.degseqs_per_n):
            degseq = random_arborescent_degree_sequence(
                n, seed=config.seed * 1000 + n * 10 + k
            )
            instance = Instance.build(req, degseq)
            for kind in config.formulations:
                cells.append(_Cell(order, instance_id, f"d{k}", instance, kind,
                                   config.seed + order))
                order += 1
    return cells


def _run_cell(cell: _Cell, config: ExperimentConfig, out_dir: Path | None) -> ReportRow:
    instance, kind = cell.instance, cell.kind
    base = dict(instance_id=cell.instance_id, n=instance.n, degseq_id=cell.degseq_id,
                formulation=kind.label)
    started = time.monotonic()
    try:
        if config.solver == "lp-export":
            if kind.tag == "F0Q":
                raise ValueError("F0Q has no single-model export; use the solver target")
            model = linearize(build(instance, kind))
            name = f"{cell.instance_id}_{cell.degseq_id}_{kind.label}.lp"
            name = name.replace("(", "").replace(")", "").replace("=", "")
            path = (out_dir or Path(".")) / name
            path.write_text(export_lp(model))
            return ReportRow(**base, status="exported", record=None, bound=None,
                             gap=None, elapsed=time.monotonic() - started, nodes=0,
                             detail=str(path))
        if kind.tag == "F0Q":
            oracle = f0q_optimum(instance, leaf_solver="mini-milp")
            return ReportRow(**base, status="optimal", record=float(oracle.cost),
                             bound=float(oracle.cost), gap=0.0, elapsed=oracle.elapsed,
                             nodes=oracle.trees_examined, detail="skeleton enumeration")
        incumbent = None
        if config.init == "local-search":
            tree = local_search(initial_tree(instance, seed=cell.seed), instance)
            incumbent = lift(tree, instance, kind)
        model = linearize(build(instance, kind))
        params = SolveParams(time_limit=config.time_limit, abs_gap_tol=config.gap_tol,
                             incumbent=incumbent)
        res = solve_mip(model, params)
        return ReportRow(**base, status=res.status, record=res.objective,
                         bound=res.bound if math.isfinite(res.bound) else None,
                         gap=res.gap if math.isfinite(res.gap) else None,
                         elapsed=res.elapsed, nodes=res.nodes)
    except Exception as exc:  # per-cell failures land in the row, run continues
        return ReportRow(**base, status=f"error:{type(exc).__name__}", record=None,
                         bound=None, gap=None, elapsed=time.monotonic() - started,
                         nodes=0, detail=str(exc))


class _RowSink:
    """Append-only CSV sink; every row is flushed as soon as it completes."""

    def __init__(self, path: Path | None):
        self.lock = threading.Lock()
        self.handle = None
        self.writer = None
        if path is not None:
            self.handle = path.open("w", newline="")
            self.writer = csv.writer(self.handle)
            self.writer.writerow(CSV_COLUMNS)
            self.handle.flush()

    def emit(self, row: ReportRow):
        if self.writer is None:
            return
        with self.lock:
            self.writer.writerow([row.to_dict()[c] for c in CSV_COLUMNS])
            self.handle.flush()

    def close(self):
        if self.handle is not None:
            self.handle.close()


def run_experiment(config: ExperimentConfig) -> list[ReportRow]:
    """Run the grid and return one row per cell, in deterministic cell order."""
    cells = _materialize_cells(config)
    out_dir = Path(config.out_dir) if config.out_dir else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    sink = _RowSink(out_dir / "report.csv" if out_dir else None)
    results: dict[int, ReportRow] = {}
    try:
        if config.workers == 1:
            for cell in cells:
                row = _run_cell(cell, config, out_dir)
                results[cell.order] = row
                sink.emit(row)
        else:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                futures = {pool.submit(_run_cell, cell, config, out_dir): cell
                           for cell in cells}
                for future, cell in futures.items():
                    row = future.result()
                    results[cell.order] = row
                    sink.emit(row)
    finally:
        sink.close()
    rows = [results[k] for k in sorted(results)]
    if out_dir is not None:
        write_report(rows, out_dir)
    return rows


def write_report(rows: list[ReportRow], out_dir) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "report.json"
    path.write_text(json.dumps([r.to_dict() for r in rows], indent=1) + "\n")
    return path


def read_rows_csv(path) -> list[ReportRow]:
    rows = []
    with Path(path).open() as handle:
        for record in csv.DictReader(handle):
            def num(key, cast):
                text = record[key]
                return None if text in ("", "None") else cast(text)
            rows.append(ReportRow(
                instance_id=record["instance_id"], n=int(record["n"]),
                degseq_id=record["degseq_id"], formulation=record["formulation"],
                status=record["status"], record=num("record", float),
                bound=num("bound", float), gap=num("gap", float),
                elapsed=float(record["elapsed"]), nodes=int(record["nodes"]),
                detail=record.get("detail", ""),
            ))
    return rows


_ROMAN = ("I", "II", "III", "IV", "V", "VI", "VII", "VIII", "IX", "X",
          "XI", "XII", "XIII", "XIV", "XV")


def _roman(k: int) -> str:
    return _ROMAN[k - 1] if 1 <= k <= len(_ROMAN) else str(k)


TIMEOUT_STATUSES = ("feasible_time_limit", "node_limit")


@dataclass
class Summary:
    formulations: list[str]
    median_time: dict[str, float]
    mean_time: dict[str, float]
    median_rank: dict[str, str]
    mean_rank: dict[str, str]
    timeout_fraction: dict[str, float]
    mean_gap: dict[str, float | None] = field(default_factory=dict)

    def table(self) -> str:
        header = ["Formulation"] + self.formulations
        rows = [
            ["Median computation time, sec."]
            + [f"{self.median_time[f]:.3f}" for f in self.formulations],
            ["Median time rank"] + [self.median_rank[f] for f in self.formulations],
            ["Average computation time, sec."]
            + [f"{self.mean_time[f]:.3f}" for f in self.formulations],
            ["Average time rank"] + [self.mean_rank[f] for f in self.formulations],
            ["Timeout fraction"]
            + [f"{self.timeout_fraction[f]:.2f}" for f in self.formulations],
            ["Mean gap"]
            + [
                "-" if self.mean_gap.get(f) is None else f"{self.mean_gap[f]:.4f}"
                for f in self.formulations
            ],
        ]
        widths = [max(len(r[c]) for r in [header] + rows) for c in range(len(header))]
        def fmt(row):
            return " | ".join(cell.ljust(w) for cell, w in zip(row, widths))
        line = "-+-".join("-" * w for w in widths)
        return "\n".join([fmt(header), line] + [fmt(r) for r in rows])


def summarize(rows: list[ReportRow]) -> Summary:
    """Per-formulation medians, means, ranks, timeout fractions, mean gaps."""
    if not rows:
        raise ValueError("no rows to summarize")
    by_form: dict[str, list[ReportRow]] = {}
    for row in rows:
        by_form.setdefault(row.formulation, []).append(row)
    forms = list(by_form)
    median_time = {f: statistics.median(r.elapsed for r in by_form[f]) for f in forms}
    mean_time = {f: statistics.fmean(r.elapsed for r in by_form[f]) for f in forms}

    def ranks(values: dict[str, float]) -> dict[str, str]:
        ordered = sorted(forms, key=lambda f: (values[f], f))
        return {f: _roman(k) for k, f in enumerate(ordered, 1)}

    timeout_fraction = {
        f: sum(1 for r in by_form[f] if r.status in TIMEOUT_STATUSES) / len(by_form[f])
        for f in forms
    }
    mean_gap = {}
    for f in forms:
        gaps = [r.gap for r in by_form[f] if r.gap is not None]
        mean_gap[f] = statistics.fmean(gaps) if gaps else None
    return Summary(forms, median_time, mean_time, ranks(median_time),
                   ranks(mean_time), timeout_fraction, mean_gap)

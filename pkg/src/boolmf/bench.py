"""Benchmark grid: datasets x ranks, reported against reference errors.

A dataset manifest names each matrix file, its expected shape, and the
best published objective per rank; the grid runner executes a multistart
algorithm per (dataset, rank) cell and reports the signed difference
against the reference, mirroring the convention of the error tables this
suite reproduces (negative = better than the reference).
"""

from __future__ import annotations

import csv
import io as _io
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .ao import AoConfig
from .combine import ms_ao, ms_comb_ao_detailed
from .initializers import InitStrategy
from .io import load_matrix
from .matrices import Matrix


@dataclass(frozen=True)
class DatasetManifest:
    """One benchmark dataset: where it lives and what to compare against."""

    name: str
    path: str
    expected_shape: tuple[int, int]
    reference_errors: dict[int, int] = field(default_factory=dict)
    sha256: str | None = None
    note: str | None = None

    def __post_init__(self):
        bad = set(self.reference_errors) - {2, 5, 10}
        if bad:
            raise ValueError("reference errors only defined for ranks 2/5/10, got %s" % bad)


def load_manifest(path) -> list[DatasetManifest]:
    """Read a manifest JSON file; dataset paths resolve relative to it."""
    path = Path(path)
    doc = json.loads(path.read_text())
    out = []
    for entry in doc["datasets"]:
        out.append(
            DatasetManifest(
                name=entry["name"],
                path=str((path.parent / entry["path"]).resolve()),
                expected_shape=tuple(entry["expected_shape"]),
                reference_errors={int(k): int(v) for k, v in entry.get("reference_errors", {}).items()},
                sha256=entry.get("sha256"),
                note=entry.get("note"),
            )
        )
    return out


def load_dataset(manifest: DatasetManifest) -> Matrix:
    """Load and shape-check one dataset."""
    X = load_matrix(manifest.path)
    if X.shape != manifest.expected_shape:
        raise ValueError(
            "%s: expected shape %s, file has %s"
            % (manifest.name, manifest.expected_shape, X.shape)
        )
    return X


@dataclass
class RunReport:
    """One grid cell's outcome."""

    dataset: str
    rank: int
    algorithm: str
    seed: int
    time_budget: float | None
    runs_budget: int | None
    error: int | float
    delta_vs_reference: int | float | None
    ao_runs_completed: int
    mean_ao_iterations: float
    max_ao_iterations: int
    wall_time: float

    def to_dict(self) -> dict:
        return asdict(self)


def _cell_seed(master_seed: int, dataset_index: int, rank: int) -> int:
    ss = np.random.SeedSequence(master_seed, spawn_key=(dataset_index, rank))
    return int(ss.generate_state(1, np.uint64)[0])


def run_cell(X: Matrix, manifest: DatasetManifest, rank: int, algorithm: str,
             master_seed: int, time_budget: float | None = None,
             runs_budget: int | None = None,
             ao_config: AoConfig | None = None) -> RunReport:
    """Run one (dataset, rank) cell and build its report."""
    t0 = time.monotonic()
    if algorithm == "ms-ao":
        best, runs = ms_ao(
            X, rank, total_time=time_budget, num_runs=runs_budget,
            strategy=InitStrategy(), master_seed=master_seed, ao_config=ao_config,
        )
        iters = [f.meta.ao_iterations for f in runs]
        completed = len(runs)
        error = best.error
    elif algorithm == "ms-comb-ao":
        best, details = ms_comb_ao_detailed(
            X, rank, total_time=time_budget, num_runs=runs_budget,
            strategy=InitStrategy(), master_seed=master_seed, ao_config=ao_config,
        )
        iters = list(details.ao_iteration_counts)
        completed = details.ao_runs_completed
        error = best.error
    else:
        raise ValueError("unknown benchmark algorithm %r" % algorithm)
    ref = manifest.reference_errors.get(rank)
    return RunReport(
        dataset=manifest.name,
        rank=rank,
        algorithm=algorithm,
        seed=master_seed,
        time_budget=time_budget,
        runs_budget=runs_budget,
        error=error,
        delta_vs_reference=None if ref is None else error - ref,
        ao_runs_completed=completed,
        mean_ao_iterations=float(np.mean(iters)) if iters else 0.0,
        max_ao_iterations=int(max(iters)) if iters else 0,
        wall_time=time.monotonic() - t0,
    )


def run_benchmark(manifests, ranks, time_budget: float | None = None,
                  runs_budget: int | None = None, algorithm: str = "ms-comb-ao",
                  master_seed: int = 0, ao_config: AoConfig | None = None,
                  progress=None):
    """Execute the full grid.

    A dataset that fails to load (or any cell that errors) is recorded in
    the failure list and skipped; the rest of the grid still runs.

    Returns
    -------
    (reports, failures) : (list[RunReport], list[tuple[str, int | None, str]])
        Failures are ``(dataset, rank_or_None, message)`` entries.
    """
    reports: list[RunReport] = []
    failures: list[tuple[str, int | None, str]] = []
    for di, manifest in enumerate(manifests):
        try:
            X = load_dataset(manifest)
        except Exception as exc:  # noqa: BLE001 - cell isolation is the contract
            failures.append((manifest.name, None, str(exc)))
            continue
        for rank in ranks:
            cell_seed = _cell_seed(master_seed, di, rank)
            try:
                report = run_cell(
                    X, manifest, rank, algorithm, cell_seed,
                    time_budget=time_budget, runs_budget=runs_budget,
                    ao_config=ao_config,
                )
            except Exception as exc:  # noqa: BLE001
                failures.append((manifest.name, rank, str(exc)))
                continue
            reports.append(report)
            if progress is not None:
                progress(report)
    return reports, failures


def render_table(reports, failures=()) -> str:
    """Signed-delta table, datasets down, ranks across.

    Cells show the difference against the reference error (negative is an
    improvement); datasets without a reference for a rank show the raw
    error marked with ``*``.
    """
    if not reports:
        return "(no results)\n"
    ranks = sorted({r.rank for r in reports})
    names = []
    for r in reports:
        if r.dataset not in names:
            names.append(r.dataset)
    by_cell = {(r.dataset, r.rank): r for r in reports}
    header = reports[0]
    lines = [
        "algorithm=%s  seed=%d  budget=%s"
        % (
            header.algorithm,
            header.seed,
            "%gs" % header.time_budget if header.time_budget is not None
            else "%d runs" % (header.runs_budget or 0),
        )
    ]
    width = max(8, max(len(n) for n in names) + 2)
    lines.append("".join([" " * width] + ["r=%-8d" % r for r in ranks]))
    for name in names:
        row = [name.ljust(width)]
        for rank in ranks:
            rep = by_cell.get((name, rank))
            if rep is None:
                row.append("-".ljust(10))
            elif rep.delta_vs_reference is None:
                row.append(("%g*" % rep.error).ljust(10))
            else:
                row.append(("%+g" % rep.delta_vs_reference).ljust(10))
        lines.append("".join(row))
    for name, rank, msg in failures:
        lines.append("FAILED %s%s: %s" % (name, "" if rank is None else " r=%d" % rank, msg))
    return "\n".join(lines) + "\n"


def reports_to_json(reports, failures=()) -> str:
    doc = {
        "reports": [r.to_dict() for r in reports],
        "failures": [
            {"dataset": d, "rank": rk, "message": m} for d, rk, m in failures
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def reports_to_csv(reports) -> str:
    buf = _io.StringIO()
    fields = [
        "dataset", "rank", "algorithm", "seed", "time_budget", "runs_budget",
        "error", "delta_vs_reference", "ao_runs_completed",
        "mean_ao_iterations", "max_ao_iterations", "wall_time",
    ]
    writer = csv.DictWriter(buf, fieldnames=fields)
    writer.writeheader()
    for r in reports:
        writer.writerow(r.to_dict())
    return buf.getvalue()

"""Parameter sweeps over (epsilon, N, seed) cells with CSV output.

Sweep specs are flat ``key = value`` text files; list values are
comma-separated.  Cells are independent jobs (optionally run on a
process pool) merged deterministically by sort key, and each cell is
fully determined by its parameters, so repeated runs of the same spec
produce byte-identical CSV.  The wall-clock column is written as 0 in
sweep output to keep that guarantee; per-run timing is available from
the solve command's JSON report.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bench, oracle, structure
from .model import CmdpInstance

CSV_COLUMNS = [
    "mode", "epsilon", "N", "seed", "total_samples", "rho_hat", "rho_star",
    "gap", "constraint_value", "violation", "T", "wall_ms", "status",
]


@dataclass
class SweepSpec:
    """One sweep: an instance, a mode, and the (epsilon, N, seed) grid.

    pairing "product" crosses the epsilon and N lists; "zip" pairs them
    elementwise (the form used for the error-vs-N scaling law, where
    each N carries its matched epsilon).
    """

    instance: str
    mode: str
    epsilon: list
    samples: list
    seeds: list
    out: str
    pairing: str = "product"
    workers: int = 1
    t_ceiling: int = bench.T_CEILING
    paper_params: bool = False

    def __post_init__(self):
        if not self.epsilon or not self.samples or not self.seeds:
            raise ValueError("epsilon, samples and seeds lists must be non-empty")
        if any(n < 1 for n in self.samples):
            raise ValueError("sample counts must be at least 1")
        if any(not (0 < e <= 1) for e in self.epsilon):
            raise ValueError("epsilon values must lie in (0, 1]")
        if self.mode not in ("relaxed", "strict"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.pairing not in ("product", "zip"):
            raise ValueError("pairing must be 'product' or 'zip'")
        if self.pairing == "zip" and len(self.epsilon) != len(self.samples):
            raise ValueError("zip pairing needs equally long epsilon and N lists")

    def cells(self):
        if self.pairing == "zip":
            grid = list(zip(self.epsilon, self.samples))
        else:
            grid = [(e, n) for e in self.epsilon for n in self.samples]
        return sorted(
            (float(e), int(n), int(s)) for (e, n) in grid for s in self.seeds
        )


def parse_spec(path) -> SweepSpec:
    """Parse a flat key = value spec file."""
    values = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"bad spec line {line!r}; expected key = value")
        key, _, val = line.partition("=")
        values[key.strip()] = val.strip()
    try:
        return SweepSpec(
            instance=values["instance"],
            mode=values.get("mode", "relaxed"),
            epsilon=[float(x) for x in values["epsilon"].split(",")],
            samples=[int(x) for x in values["samples"].split(",")],
            seeds=[int(x) for x in values["seeds"].split(",")],
            out=values["out"],
            pairing=values.get("pairing", "product"),
            workers=int(values.get("workers", "1")),
            t_ceiling=int(values.get("t_ceiling", str(bench.T_CEILING))),
            paper_params=values.get("paper_params", "false").lower() == "true",
        )
    except KeyError as e:
        raise ValueError(f"sweep spec missing key {e.args[0]!r}") from e


def load_instance(ref: str) -> CmdpInstance:
    """Resolve an instance reference: a JSON path or 'bench:default'."""
    if ref == "bench:default":
        return bench.default_bench_instance()
    return CmdpInstance.load(ref)


def _run_cell(args):
    inst_dict, mode, epsilon, n, seed, t_ceiling, paper_params, params_tuple, rho_star = args
    instance = CmdpInstance.from_dict(inst_dict)
    from .model import StructuralParams

    params = StructuralParams(*params_tuple)
    try:
        rep = bench.run_solve(
            instance, mode, epsilon, n, seed,
            t_ceiling=t_ceiling, paper_params=paper_params,
            params=params, rho_star=rho_star,
        )
        return (epsilon, n, seed, rep)
    except Exception as e:  # recorded, not raised: partial failures stay rows
        return (epsilon, n, seed, f"error:{type(e).__name__}")


def _format_row(epsilon, n, seed, rep) -> str:
    if isinstance(rep, str):
        return ",".join(["", repr(float(epsilon)), str(n), str(seed)] + [""] * 8 + [rep])
    return ",".join([
        rep.mode, repr(float(rep.epsilon)), str(rep.n_samples), str(rep.seed),
        str(rep.total_samples), repr(rep.rho_hat), repr(rep.rho_star),
        repr(rep.gap), repr(rep.constraint_value), repr(rep.violation),
        str(rep.T), "0", rep.status,
    ])


def run_sweep(spec: SweepSpec) -> tuple[str, int]:
    """Execute every cell and write the CSV; returns (csv_text, n_failed).

    Structural parameters and the exact optimum are computed once and
    shared across cells; per-cell randomness is fully determined by the
    cell's own seed.
    """
    instance = load_instance(spec.instance)
    params = structure.structural_params(instance)
    true_sol = oracle.solve_camdp_lp(instance)
    if true_sol.status != "optimal":
        raise ValueError("swept instance is infeasible at its own threshold")
    inst_dict = instance.to_dict()
    params_tuple = (params.H, params.B, params.D, params.zeta)
    jobs = [
        (inst_dict, spec.mode, e, n, s, spec.t_ceiling, spec.paper_params,
         params_tuple, true_sol.objective)
        for (e, n, s) in spec.cells()
    ]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_run_cell, jobs))
    else:
        results = [_run_cell(j) for j in jobs]
    results.sort(key=lambda r: (r[0], r[1], r[2]))
    lines = [",".join(CSV_COLUMNS)]
    n_failed = 0
    for epsilon, n, seed, rep in results:
        if isinstance(rep, str):
            n_failed += 1
        lines.append(_format_row(epsilon, n, seed, rep))
    text = "\n".join(lines) + "\n"
    Path(spec.out).write_text(text, encoding="utf-8")
    return text, n_failed


def scaling_cells(n_low_exp: int = 6, n_high_exp: int = 16, coupling: float = 8.0):
    """The matched (epsilon, N) ladder for the error-vs-N scaling check.

    N runs over powers of two and each cell's accuracy target follows
    the sample-complexity inversion epsilon(N) = coupling / sqrt(N),
    clipped into (0, 1].
    """
    pairs = []
    for k in range(n_low_exp, n_high_exp + 1):
        n = 2**k
        pairs.append((min(1.0, coupling / math.sqrt(n)), n))
    return pairs


def fit_loglog_slope(values_by_n: dict) -> float:
    """Least-squares slope of log(median value) against log(N)."""
    ns = sorted(values_by_n)
    medians = [float(np.median(values_by_n[n])) for n in ns]
    if any(m <= 0 for m in medians):
        raise ValueError("medians must be positive for a log-log fit")
    slope, _ = np.polyfit(np.log(ns), np.log(medians), 1)
    return float(slope)

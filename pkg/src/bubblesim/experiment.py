"""Experiment runner: builds topologies and workloads, sweeps strategy and
team-shape combinations, and renders byte-stable CSV tables.

Speedup baseline: the same workload and cost model run serially, as one team
of one task per zone under the shared-root policy. That run provably stays on
cpu 0 (every dispatch finds all CPUs idle and serves the lowest id first), so
it is the one-CPU reference regardless of strategy, and it is computed once
per sweep since it does not depend on the team shape.
"""

from __future__ import annotations

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional, Sequence

from .simulation import (
    CostModel,
    SimReport,
    compute_speedup,
    run_simulation,
)
from .spread import SharedRoot, SpreadParams, strategy_from_name
from .topology import PRESETS, TopologySpec, build_topology
from .workload import Workload, gen_btmz_analog

DEFAULT_ZONES = 16
DEFAULT_RATIO = 25
DEFAULT_TOTAL = 1_600_000
DEFAULT_ITERATIONS = 10
DEFAULT_ALPHA = Fraction(1)
SWEEP_OUTER = (1, 2, 4, 8, 16)
SWEEP_INNER = (1, 2, 4, 8)

CSV_HEADER = "strategy,outer,inner,makespan,speedup,remote_fraction"


@dataclass(frozen=True)
class Row:
    strategy: str
    outer: int
    inner: int
    makespan: Fraction
    speedup: Fraction
    remote_fraction: Fraction

    def render(self) -> str:
        return (f"{self.strategy},{self.outer},{self.inner},"
                f"{float(self.makespan):.6f},{float(self.speedup):.6f},"
                f"{float(self.remote_fraction):.6f}")


def resolve_topology(name_or_text: str) -> TopologySpec:
    """A preset name, or the flat spec text itself."""
    if name_or_text in PRESETS:
        return PRESETS[name_or_text]
    return TopologySpec.parse(name_or_text)


def default_workload(zones: int = DEFAULT_ZONES, ratio=DEFAULT_RATIO,
                     total: int = DEFAULT_TOTAL,
                     iterations: int = DEFAULT_ITERATIONS) -> Workload:
    return gen_btmz_analog(zones, ratio, total, iterations)


def baseline_run(spec: TopologySpec, workload: Workload, model: CostModel) -> SimReport:
    """Serial reference: one team, one task per zone, shared root queue."""
    topo = build_topology(spec)
    return run_simulation(topo, workload.serial_variant(), SharedRoot(), model)


def run_point(spec: TopologySpec, workload: Workload, strategy_name: str,
              model: CostModel, alpha: Fraction = DEFAULT_ALPHA,
              load_hints: bool = True, collect_trace: bool = False,
              baseline: Optional[SimReport] = None) -> tuple[Row, SimReport]:
    """One (strategy, shape) cell: run, attach speedup, return row and report."""
    if baseline is None:
        baseline = baseline_run(spec, workload, model)
    topo = build_topology(spec)
    strategy = strategy_from_name(strategy_name, SpreadParams(explosion_ratio=alpha))
    report = run_simulation(topo, workload, strategy, model,
                            load_hints=load_hints, collect_trace=collect_trace)
    report.speedup = compute_speedup(report, baseline)
    row = Row(strategy_name, workload.n_o, workload.n_i, report.makespan,
              report.speedup, report.remote_fraction)
    return row, report


def run_sweep(spec: TopologySpec, base: Workload, strategies: Sequence[str],
              outers: Sequence[int], inners: Sequence[int], model: CostModel,
              alpha: Fraction = DEFAULT_ALPHA, load_hints: bool = True,
              collect_trace: bool = False, workers: int = 0,
              ) -> tuple[list[Row], dict[tuple[str, int, int], SimReport]]:
    """Full grid; rows come back ordered by (strategy, outer, inner)."""
    baseline = baseline_run(spec, base, model)
    points = [(name, n_o, n_i)
              for name in strategies for n_o in outers for n_i in inners]

    def one(point: tuple[str, int, int]) -> tuple[Row, SimReport]:
        name, n_o, n_i = point
        workload = replace(base, n_o=n_o, n_i=n_i)
        return run_point(spec, workload, name, model, alpha, load_hints,
                         collect_trace, baseline)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, points))
    else:
        results = [one(p) for p in points]

    rows = [row for row, _ in results]
    reports = {(row.strategy, row.outer, row.inner): report
               for row, report in results}
    order = {name: i for i, name in enumerate(strategies)}
    rows.sort(key=lambda r: (order[r.strategy], r.outer, r.inner))
    return rows, reports


def best_by_strategy(rows: Sequence[Row]) -> dict[str, Row]:
    best: dict[str, Row] = {}
    for row in rows:
        held = best.get(row.strategy)
        if held is None or row.speedup > held.speedup:
            best[row.strategy] = row
    return best


def rows_to_csv(rows: Sequence[Row], meta: dict) -> str:
    """Stable CSV: one comment line with every knob, header, then the rows."""
    out = io.StringIO()
    settings = " ".join(f"{key}={value}" for key, value in sorted(meta.items()))
    out.write(f"# {settings}\n")
    out.write(CSV_HEADER + "\n")
    for row in rows:
        out.write(row.render() + "\n")
    return out.getvalue()


def parse_csv(text: str) -> dict[tuple[str, int, int], dict[str, float]]:
    table: dict[tuple[str, int, int], dict[str, float]] = {}
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError("not a recognized report CSV")
    for line in lines[1:]:
        strategy, outer, inner, makespan, speedup, remote = line.split(",")
        table[(strategy, int(outer), int(inner))] = {
            "makespan": float(makespan),
            "speedup": float(speedup),
            "remote_fraction": float(remote),
        }
    return table


def diff_reports(csv_a: str, csv_b: str) -> str:
    """Aligned-row comparison of speedups, with per-row deltas."""
    a = parse_csv(csv_a)
    b = parse_csv(csv_b)
    lines = []
    max_delta = 0.0
    for key in sorted(set(a) | set(b)):
        name = f"{key[0]} {key[1]}x{key[2]}"
        if key not in a:
            lines.append(f"{name}: only in b (speedup {b[key]['speedup']:.6f})")
        elif key not in b:
            lines.append(f"{name}: only in a (speedup {a[key]['speedup']:.6f})")
        else:
            delta = b[key]["speedup"] - a[key]["speedup"]
            max_delta = max(max_delta, abs(delta))
            lines.append(f"{name}: a={a[key]['speedup']:.6f} "
                         f"b={b[key]['speedup']:.6f} delta={delta:+.6f}")
    lines.append(f"max |delta| = {max_delta:.6f}")
    return "\n".join(lines) + "\n"


def default_meta(model: CostModel, alpha: Fraction, workload: Workload,
                 topology: str, load_hints: bool) -> dict:
    return {
        "topology": topology,
        "zones": len(workload.zones),
        "iters": workload.iterations,
        "total": workload.total_per_iteration,
        "mem_fraction": str(model.mem_fraction),
        "exchange": model.exchange_cost,
        "explode_ratio": str(alpha),
        "load_hints": int(load_hints),
    }

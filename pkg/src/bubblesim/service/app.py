"""HTTP front end over the simulator.

Every run owns its own world, so concurrent requests are independent; the CLI
is a thin client of these same routes.
"""

from __future__ import annotations

from fractions import Fraction

from fastapi import FastAPI, HTTPException

from ..experiment import (
    Row,
    best_by_strategy,
    default_meta,
    diff_reports,
    rows_to_csv,
    run_point,
    run_sweep,
)
from ..simulation import CostModel, SimulationError
from ..spread import STRATEGY_NAMES
from ..topology import PRESETS, TopologySpec
from ..workload import Workload, gen_btmz_analog, grid_edges
from .schemas import (
    DiffRequest,
    DiffResponse,
    ModelIn,
    PresetsResponse,
    RowOut,
    SimulateRequest,
    SimulateResponse,
    SweepRequest,
    SweepResponse,
    TopologyIn,
    WorkloadIn,
)

app = FastAPI(title="bubblesim", description="Hierarchical scheduling simulator")


def _topology(spec: TopologyIn) -> tuple[TopologySpec, str]:
    if spec.text:
        return TopologySpec.parse(spec.text), "inline"
    name = spec.preset or "paper16"
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}")
    return PRESETS[name], name


def _workload(w: WorkloadIn) -> Workload:
    if w.zone_loads is not None:
        edges = tuple(tuple(e) for e in w.edges) if w.edges is not None \
            else grid_edges(len(w.zone_loads))
        return Workload(tuple(w.zone_loads), w.iterations, w.outer, w.inner, edges)
    generated = gen_btmz_analog(w.zones, w.ratio, w.total, w.iterations)
    return Workload(generated.zones, w.iterations, w.outer, w.inner,
                    generated.exchange_edges)


def _model(m: ModelIn) -> CostModel:
    return CostModel(Fraction(m.mem_fraction), m.exchange)


def _row_out(row: Row) -> RowOut:
    return RowOut(strategy=row.strategy, outer=row.outer, inner=row.inner,
                  makespan=float(row.makespan), speedup=float(row.speedup),
                  remote_fraction=float(row.remote_fraction))


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.get("/presets", response_model=PresetsResponse)
def presets() -> PresetsResponse:
    return PresetsResponse(presets=sorted(PRESETS))


@app.post("/simulate", response_model=SimulateResponse)
def simulate(req: SimulateRequest) -> SimulateResponse:
    try:
        spec, topo_name = _topology(req.topology)
        workload = _workload(req.workload)
        model = _model(req.model)
        if req.strategy not in STRATEGY_NAMES:
            raise ValueError(f"unknown strategy {req.strategy!r}")
        alpha = Fraction(req.explode_ratio)
        row, report = run_point(spec, workload, req.strategy, model, alpha,
                                req.load_hints, collect_trace=req.include_trace)
    except (ValueError, ZeroDivisionError, KeyError) as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    except SimulationError as exc:
        raise HTTPException(status_code=409, detail=str(exc))
    meta = default_meta(model, alpha, workload, topo_name, req.load_hints)
    return SimulateResponse(
        row=_row_out(row),
        per_cpu_busy=[float(b) for b in report.per_cpu_busy],
        csv=rows_to_csv([row], meta),
        trace=report.trace,
    )


@app.post("/sweep", response_model=SweepResponse)
def sweep(req: SweepRequest) -> SweepResponse:
    try:
        spec, topo_name = _topology(req.topology)
        workload = _workload(req.workload)
        model = _model(req.model)
        for name in req.strategies:
            if name not in STRATEGY_NAMES:
                raise ValueError(f"unknown strategy {name!r}")
        alpha = Fraction(req.explode_ratio)
        rows, _ = run_sweep(spec, workload, req.strategies, req.outers,
                            req.inners, model, alpha, req.load_hints,
                            workers=req.workers)
    except (ValueError, ZeroDivisionError, KeyError) as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    except SimulationError as exc:
        raise HTTPException(status_code=409, detail=str(exc))
    meta = default_meta(model, alpha, workload, topo_name, req.load_hints)
    return SweepResponse(
        rows=[_row_out(r) for r in rows],
        best={name: _row_out(r) for name, r in best_by_strategy(rows).items()},
        csv=rows_to_csv(rows, meta),
    )


@app.post("/diff", response_model=DiffResponse)
def diff(req: DiffRequest) -> DiffResponse:
    try:
        return DiffResponse(text=diff_reports(req.csv_a, req.csv_b))
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc))

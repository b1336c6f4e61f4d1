"""Request/response models for the simulation service."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field

from ..experiment import (
    DEFAULT_ITERATIONS,
    DEFAULT_RATIO,
    DEFAULT_TOTAL,
    DEFAULT_ZONES,
)
from ..simulation import DEFAULT_EXCHANGE, DEFAULT_MEM_FRACTION


class TopologyIn(BaseModel):
    preset: Optional[str] = "paper16"
    text: Optional[str] = None          # flat `kind count` spec, overrides preset


class WorkloadIn(BaseModel):
    zones: int = DEFAULT_ZONES
    ratio: float = DEFAULT_RATIO
    total: int = DEFAULT_TOTAL
    iterations: int = DEFAULT_ITERATIONS
    outer: int = 16
    inner: int = 4
    zone_loads: Optional[list[int]] = None    # explicit loads, overrides generator
    edges: Optional[list[tuple[int, int]]] = None


class ModelIn(BaseModel):
    # kept as text so the value stays exact through the wire
    mem_fraction: str = str(DEFAULT_MEM_FRACTION)
    exchange: int = DEFAULT_EXCHANGE


class SimulateRequest(BaseModel):
    topology: TopologyIn = TopologyIn()
    workload: WorkloadIn = WorkloadIn()
    model: ModelIn = ModelIn()
    strategy: str = "spread"
    explode_ratio: str = "1"
    load_hints: bool = True
    include_trace: bool = False


class RowOut(BaseModel):
    strategy: str
    outer: int
    inner: int
    makespan: float
    speedup: float
    remote_fraction: float


class SimulateResponse(BaseModel):
    row: RowOut
    per_cpu_busy: list[float]
    csv: str
    trace: Optional[list[dict]] = None


class SweepRequest(BaseModel):
    topology: TopologyIn = TopologyIn()
    workload: WorkloadIn = WorkloadIn()
    model: ModelIn = ModelIn()
    strategies: list[str] = Field(default_factory=lambda: ["spread", "shared", "rr"])
    outers: list[int] = Field(default_factory=lambda: [1, 2, 4, 8, 16])
    inners: list[int] = Field(default_factory=lambda: [1, 2, 4, 8])
    explode_ratio: str = "1"
    load_hints: bool = True
    workers: int = 0


class SweepResponse(BaseModel):
    rows: list[RowOut]
    best: dict[str, RowOut]
    csv: str


class DiffRequest(BaseModel):
    csv_a: str
    csv_b: str


class DiffResponse(BaseModel):
    text: str


class PresetsResponse(BaseModel):
    presets: list[str]

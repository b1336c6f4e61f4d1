"""Deterministic discrete-event execution of a workload on a topology.

All simulated time is exact rational arithmetic, so identical inputs produce
identical reports bit for bit. The engine owns one world per run: idle CPUs
pull work through the self-scheduler, outer teams walk their zones
sequentially within a round, a zone joins when all its tasks finish their
segment, and a global barrier closes each round. Exchange costs are charged
at the barrier: every zone pays for its cross-team neighbor faces at the
distance factor between the zones' data homes, plus one intra-team exchange
at the worst distance factor among the CPUs that executed it this round.

Memory cost model: a task's data lives where its first segment ran (first
touch). A later segment on node n costs w * (1 + m * (factor(home, n) - 1)),
so m = 0 recovers a uniform machine and m = 1 charges the full distance
factor on every remote segment.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from enum import IntEnum
from fractions import Fraction
from typing import Optional

from .entities import Task, TaskState, insert_entity
from .selfsched import SchedulerHooks, pick_next, requeue_on_finish
from .spread import PlacementLog, Strategy, apply_strategy
from .topology import Topology, numa_factor
from .workload import TeamSpec, Workload, World, instantiate

# Calibrated defaults: fully memory-bound task work and an exchange unit of
# 1900 microunits (about 0.15x the smallest default zone). Together they put
# pure inner parallelism on the 16-CPU reference machine in the high-6 range
# while zero-cost runs stay near ideal; see README for the calibration notes.
DEFAULT_MEM_FRACTION = Fraction(1)
DEFAULT_EXCHANGE = 1900


class SimulationError(RuntimeError):
    """Raised when a run cannot make progress (stalled world)."""


@dataclass(frozen=True)
class CostModel:
    """NUMA cost parameters: memory-bound fraction and per-face exchange cost."""

    mem_fraction: Fraction = DEFAULT_MEM_FRACTION
    exchange_cost: int = DEFAULT_EXCHANGE

    def __post_init__(self) -> None:
        if not 0 <= self.mem_fraction <= 1:
            raise ValueError("mem_fraction must lie in [0, 1]")
        if self.exchange_cost < 0:
            raise ValueError("exchange_cost must be >= 0")


class EventKind(IntEnum):
    """Processing order at equal timestamps follows the enum values."""

    TASK_SEGMENT_END = 0
    TEAM_JOIN = 1
    ITERATION_BARRIER = 2


@dataclass(frozen=True)
class SimEvent:
    """Heap entry; ties resolve by (kind, entity id, enqueue order)."""

    time: Fraction
    kind: EventKind
    entity_id: int
    seq: int
    payload: object = None

    def __lt__(self, other: "SimEvent") -> bool:
        return ((self.time, int(self.kind), self.entity_id, self.seq)
                < (other.time, int(other.kind), other.entity_id, other.seq))


@dataclass(frozen=True)
class Segment:
    """One executed quantum of a task on a CPU."""

    task_id: int
    zone_id: int
    outer_id: int
    iteration: int
    cpu: int
    start: Fraction
    duration: Fraction
    remote: bool


@dataclass
class SimReport:
    makespan: Fraction
    per_cpu_busy: list[Fraction]
    remote_fraction: Fraction
    segments: list[Segment]
    placements: PlacementLog
    world: World = field(repr=False)
    speedup: Optional[Fraction] = None
    trace: Optional[list[dict]] = None

    @property
    def total_work(self) -> Fraction:
        return sum(self.per_cpu_busy, Fraction(0))


def segment_time(task: Task, cpu: int, model: CostModel, topo: Topology) -> Fraction:
    """Effective duration of the task's next segment when run on `cpu`."""
    factor = Fraction(1)
    if task.home_node is not None:
        factor = numa_factor(topo, task.home_node, topo.node_of(cpu))
    return task.load * (1 + model.mem_fraction * (factor - 1))


def compute_speedup(report: SimReport, baseline_report: SimReport) -> Fraction:
    """Serial makespan over parallel makespan."""
    if report.makespan == 0:
        raise ZeroDivisionError("zero makespan")
    return baseline_report.makespan / report.makespan


def run_simulation(topo: Topology, workload: Workload, strategy: Strategy,
                   model: CostModel, hooks: Optional[SchedulerHooks] = None,
                   load_hints: bool = True, collect_trace: bool = False) -> SimReport:
    """Execute `workload` on `topo` under `strategy` and return the report."""
    engine = _Engine(topo, workload, strategy, model,
                     hooks or SchedulerHooks(), load_hints, collect_trace)
    return engine.run()


class _Engine:
    def __init__(self, topo: Topology, workload: Workload, strategy: Strategy,
                 model: CostModel, hooks: SchedulerHooks, load_hints: bool,
                 collect_trace: bool) -> None:
        self.topo = topo
        self.workload = workload
        self.strategy = strategy
        self.model = model
        self.hooks = hooks
        self.collect_trace = collect_trace
        self.world = instantiate(workload, load_hints)

        self.heap: list[SimEvent] = []
        self.counter = itertools.count()

        self.iteration = 1
        self.running_on: dict[int, Task] = {}          # cpu -> task
        self.task_cpu: dict[int, int] = {}             # task id -> cpu while running
        self.segments_done: dict[int, int] = {t.id: 0 for t in self.world.tasks}
        self.remaining: dict[int, int] = {}            # zone id -> unfinished this round
        self.executed_cpus: dict[int, set[int]] = {}   # zone id -> cpus this round
        self.team_pos: dict[int, int] = {}             # outer id -> next zone index
        self.arrived: dict[int, Fraction] = {}
        self.pending_teams = 0
        self.zone_owner = {zt.zone_id: zt.outer_id for zt in self.world.zone_teams}
        self.neighbors: dict[int, list[int]] = {z: [] for z in range(len(workload.zones))}
        for a, b in workload.exchange_edges:
            self.neighbors[a].append(b)
            self.neighbors[b].append(a)

        self.zone_of_task = {t.id: zt.zone_id
                             for zt in self.world.zone_teams for t in zt.tasks}
        self.per_cpu_busy = [Fraction(0) for _ in topo.cpus]
        self.segments: list[Segment] = []
        self.trace: list[dict] = []
        self.makespan: Optional[Fraction] = None

    # -- event plumbing --------------------------------------------------

    def _push(self, time: Fraction, kind: EventKind, entity_id: int,
              payload: object = None) -> None:
        heapq.heappush(self.heap, SimEvent(time, kind, entity_id,
                                           next(self.counter), payload))

    def _trace(self, time: Fraction, kind: str, **data) -> None:
        if self.collect_trace:
            self.trace.append({"time": str(time), "kind": kind, **data})

    # -- lifecycle --------------------------------------------------------

    def run(self) -> SimReport:
        for bubble in self.world.root_entities:
            if bubble.holder is None:
                insert_entity(self.topo.root, bubble)
        placements = apply_strategy(self.topo, self.strategy)

        zero = Fraction(0)
        self._start_round(zero)
        self._dispatch(zero)

        while self.heap:
            now = self.heap[0].time
            while self.heap and self.heap[0].time == now:
                event = heapq.heappop(self.heap)
                self._handle(now, event.kind, event.entity_id, event.payload)
            self._dispatch(now)

        unfinished = [t for t in self.world.tasks if t.state is not TaskState.FINISHED]
        if self.makespan is None or unfinished:
            raise SimulationError(
                f"no pending events but {len(unfinished)} tasks unfinished "
                f"(iteration {self.iteration}); first stuck: {unfinished[:3]}")

        report = SimReport(
            makespan=self.makespan,
            per_cpu_busy=self.per_cpu_busy,
            remote_fraction=self._remote_fraction(),
            segments=self.segments,
            placements=placements,
            world=self.world,
            trace=self.trace if self.collect_trace else None,
        )
        self._check_bounds(report)
        return report

    def _start_round(self, time: Fraction) -> None:
        self.pending_teams = len(self.world.outer_teams)
        self.arrived.clear()
        for team in self.world.outer_teams:
            self.team_pos[team.index] = 0
            self._activate_zone(team.zones[0], time)

    def _activate_zone(self, zone: TeamSpec, time: Fraction) -> None:
        self.remaining[zone.zone_id] = len(zone.tasks)
        self.executed_cpus[zone.zone_id] = set()
        for task in zone.tasks:
            task.state = TaskState.READY
        self._trace(time, "zone_start", zone=zone.zone_id, team=zone.outer_id,
                    iteration=self.iteration)

    def _handle(self, now: Fraction, kind: EventKind, entity_id: int,
                payload: object) -> None:
        if kind is EventKind.TASK_SEGMENT_END:
            self._on_segment_end(now, entity_id)
        elif kind is EventKind.TEAM_JOIN:
            self._on_zone_join(now, entity_id)
        else:
            if payload is None:
                self._on_barrier(now)
            else:
                team = payload
                assert isinstance(team, int)
                self._resume_team(now, team)

    def _on_segment_end(self, now: Fraction, task_id: int) -> None:
        cpu = self.task_cpu.pop(task_id)
        task = self.running_on.pop(cpu)
        assert task.id == task_id
        self.segments_done[task_id] += 1
        if self.segments_done[task_id] >= self.workload.iterations:
            task.state = TaskState.FINISHED
        else:
            requeue_on_finish(task)
        zone_id = self.zone_of_task[task_id]
        self.remaining[zone_id] -= 1
        if self.remaining[zone_id] == 0:
            self._push(now, EventKind.TEAM_JOIN, zone_id)

    def _on_zone_join(self, now: Fraction, zone_id: int) -> None:
        team = self.world.team_of_zone(zone_id)
        self._trace(now, "zone_join", zone=zone_id, team=team.index,
                    iteration=self.iteration)
        self.team_pos[team.index] += 1
        pos = self.team_pos[team.index]
        if pos < len(team.zones):
            self._activate_zone(team.zones[pos], now)
            return
        self.arrived[team.index] = now
        self.pending_teams -= 1
        if self.pending_teams == 0:
            self._push(now, EventKind.ITERATION_BARRIER, -1)

    def _on_barrier(self, now: Fraction) -> None:
        delays = {team.index: self._team_delay(team) for team in self.world.outer_teams}
        self._trace(now, "barrier", iteration=self.iteration,
                    delays={str(k): str(v) for k, v in delays.items()})
        if self.iteration >= self.workload.iterations:
            self.makespan = now + max(delays.values())
            return
        self.iteration += 1
        live = [t for t in self.world.tasks if t.state is not TaskState.FINISHED]
        self.strategy.on_round_start(self.topo, live, self.iteration - 1)
        self.pending_teams = len(self.world.outer_teams)
        self.arrived.clear()
        for team in self.world.outer_teams:
            self._push(now + delays[team.index], EventKind.ITERATION_BARRIER,
                       team.index, team.index)

    def _resume_team(self, now: Fraction, team_index: int) -> None:
        team = self.world.outer_teams[team_index]
        self.team_pos[team_index] = 0
        self._activate_zone(team.zones[0], now)

    # -- dispatch ---------------------------------------------------------

    def _dispatch(self, now: Fraction) -> None:
        for cpu in self.topo.cpus:
            if cpu in self.running_on:
                continue
            task = pick_next(self.topo, self.hooks, cpu)
            if task is None:
                continue
            self._start_segment(now, task, cpu)

    def _start_segment(self, now: Fraction, task: Task, cpu: int) -> None:
        node = self.topo.node_of(cpu)
        if task.home_node is None:
            task.home_node = node
        duration = segment_time(task, cpu, self.model, self.topo)
        task.state = TaskState.RUNNING
        self.running_on[cpu] = task
        self.task_cpu[task.id] = cpu
        self.per_cpu_busy[cpu] += duration
        zone_id = self.zone_of_task[task.id]
        self.executed_cpus[zone_id].add(cpu)
        seg = Segment(task.id, zone_id, self.zone_owner[zone_id], self.iteration,
                      cpu, now, duration, remote=task.home_node != node)
        self.segments.append(seg)
        self._trace(now, "segment", task=task.id, cpu=cpu, zone=zone_id,
                    duration=str(duration), iteration=self.iteration)
        self._push(now + duration, EventKind.TASK_SEGMENT_END, task.id)

    # -- costs and checks ---------------------------------------------------

    def _team_delay(self, team) -> Fraction:
        """Exchange charge at the barrier: one intra-team exchange per zone at
        the worst pairwise factor among its executing CPUs, plus one charge
        per neighbor face. A face between two zones of the same team moves no
        data off the team and costs the flat exchange unit; a face crossing
        teams is scaled by the distance factor between the zones' homes."""
        x = self.model.exchange_cost
        if x == 0:
            return Fraction(0)
        delay = Fraction(0)
        for zone in team.zones:
            delay += x * self._max_pairwise_factor(self.executed_cpus[zone.zone_id])
            home = self._zone_home(zone)
            for nbr in self.neighbors[zone.zone_id]:
                if self.zone_owner[nbr] == team.index:
                    delay += x
                else:
                    nbr_home = self._zone_home(self.world.zone_teams[nbr])
                    delay += x * numa_factor(self.topo, home, nbr_home)
        return delay

    def _zone_home(self, zone: TeamSpec) -> int:
        home = zone.tasks[0].home_node
        assert home is not None, "zone reached a barrier without running"
        return home

    def _max_pairwise_factor(self, cpus: set[int]) -> Fraction:
        nodes = sorted({self.topo.numa_node_of_cpu[c] for c in cpus})
        worst = Fraction(1)
        for i, a in enumerate(nodes):
            for b in nodes[i + 1:]:
                worst = max(worst, numa_factor(self.topo, a, b))
        return worst

    def _remote_fraction(self) -> Fraction:
        total = sum((s.duration for s in self.segments), Fraction(0))
        if total == 0:
            return Fraction(0)
        remote = sum((s.duration for s in self.segments if s.remote), Fraction(0))
        return remote / total

    def _check_bounds(self, report: SimReport) -> None:
        total = sum((s.duration for s in report.segments), Fraction(0))
        assert total == report.total_work, "per-CPU busy does not match executed segments"
        assert report.makespan >= total / self.topo.cpu_count, "makespan below work bound"
        assert report.makespan >= self._critical_path(report), "makespan below critical path"

    def _critical_path(self, report: SimReport) -> Fraction:
        longest: dict[tuple[int, int, int], Fraction] = {}
        for seg in report.segments:
            key = (seg.outer_id, seg.iteration, seg.zone_id)
            longest[key] = max(longest.get(key, Fraction(0)), seg.duration)
        per_team: dict[int, Fraction] = {}
        for (outer_id, _, _), dur in longest.items():
            per_team[outer_id] = per_team.get(outer_id, Fraction(0)) + dur
        return max(per_team.values(), default=Fraction(0))

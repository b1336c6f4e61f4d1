"""Nested fork-join workloads with irregular zone sizes.

A workload is a set of zones (per-round work in integer microunits), a round
count, the outer/inner team widths, and the face-exchange edges between
neighboring zones. Zones are dealt to the outer teams round-robin by
descending size; each outer team walks its zones sequentially within a round
while the zone's inner tasks run in parallel, which is the fork-join shape of
a nested two-level parallel program.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional, Sequence

from .entities import Bubble, Task, create_bubble, insert_entity, set_load


@dataclass(frozen=True)
class Workload:
    zones: tuple[int, ...]            # per-round work of each zone
    iterations: int
    n_o: int                          # outer team count
    n_i: int                          # tasks per zone team
    exchange_edges: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        if not self.zones:
            raise ValueError("workload needs at least one zone")
        if any(load <= 0 for load in self.zones):
            raise ValueError("zone loads must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.n_o < 1 or self.n_i < 1:
            raise ValueError("team sizes must be >= 1")
        if self.n_o > len(self.zones):
            raise ValueError("more outer teams than zones")
        n = len(self.zones)
        for a, b in self.exchange_edges:
            if not (0 <= a < n and 0 <= b < n) or a == b:
                raise ValueError(f"bad exchange edge ({a}, {b})")

    @property
    def total_per_iteration(self) -> int:
        return sum(self.zones)

    def serial_variant(self) -> "Workload":
        return replace(self, n_o=1, n_i=1)


def grid_edges(zone_count: int) -> tuple[tuple[int, int], ...]:
    """Face-neighbor edges of the zones arranged row-major on a near-square grid."""
    cols = math.ceil(math.sqrt(zone_count))
    edges = []
    for z in range(zone_count):
        right = z + 1
        if right < zone_count and right % cols != 0:
            edges.append((z, right))
        below = z + cols
        if below < zone_count:
            edges.append((z, below))
    return tuple(edges)


def gen_btmz_analog(zone_count: int, ratio, total: int, iterations: int) -> Workload:
    """Deterministic irregular-zone workload.

    Zone loads follow a geometric progression from smallest to biggest with
    max/min equal to `ratio` exactly and the per-round sum equal to `total`
    exactly (integer microunits; middle zones absorb rounding).
    """
    if zone_count < 2:
        raise ValueError("zone_count must be >= 2")
    ratio = Fraction(str(ratio))
    if ratio < 1:
        raise ValueError("ratio must be >= 1")
    if total <= 0:
        raise ValueError("total must be positive")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")

    if ratio == 1:
        if total % zone_count:
            raise ValueError("total must divide evenly across zones when ratio is 1")
        loads = [total // zone_count] * zone_count
        return Workload(tuple(loads), iterations, 1, 1, grid_edges(zone_count))

    if zone_count == 2:
        smallest_exact = total / (1 + ratio)
        if smallest_exact.denominator != 1:
            raise ValueError("total must split as total/(1+ratio) for two zones")
        smallest = int(smallest_exact)
        return Workload((smallest, total - smallest), iterations, 1, 1,
                        grid_edges(zone_count))

    steps = zone_count - 1
    raws = [float(ratio) ** (i / steps) for i in range(zone_count)]
    scale = total / sum(raws)
    smallest = max(1, round(scale))
    biggest_exact = ratio * smallest
    biggest = int(biggest_exact) if biggest_exact.denominator == 1 else round(float(biggest_exact))
    loads = [smallest] + [round(scale * raws[i]) for i in range(1, steps)] + [biggest]
    _absorb_into_middles(loads, total - sum(loads), smallest, biggest)
    return Workload(tuple(loads), iterations, 1, 1, grid_edges(zone_count))


def _absorb_into_middles(loads: list[int], diff: int, lo: int, hi: int) -> None:
    """Push the rounding residue into interior zones, keeping them in [lo, hi]."""
    if diff == 0:
        return
    step = 1 if diff > 0 else -1
    remaining = abs(diff)
    interior = range(1, len(loads) - 1)
    while remaining:
        moved = False
        for i in interior:
            if remaining == 0:
                break
            if lo <= loads[i] + step <= hi:
                loads[i] += step
                remaining -= 1
                moved = True
        if not moved:
            raise ValueError("cannot reconcile zone loads with the requested total")


def gen_uniform(tasks: int, load: int) -> Workload:
    """Flat single-round workload of equal independent tasks, no exchanges."""
    if tasks < 1:
        raise ValueError("tasks must be >= 1")
    return Workload(tuple([load] * tasks), 1, tasks, 1, ())


@dataclass
class TeamSpec:
    """One zone's inner team: its bubble, members and per-member shares."""

    zone_id: int
    outer_id: int
    bubble: Bubble
    tasks: list[Task]
    shares: tuple[int, ...]


@dataclass
class OuterTeam:
    index: int
    bubble: Bubble
    zones: list[TeamSpec]   # processing order within a round


@dataclass
class World:
    """An instantiated bubble/task hierarchy plus its team bookkeeping."""

    workload: Workload
    outer_teams: list[OuterTeam]
    zone_teams: list[TeamSpec]      # indexed by zone id
    tasks: list[Task]               # creation order
    load_hints: bool

    @property
    def root_entities(self) -> list[Bubble]:
        return [team.bubble for team in self.outer_teams]

    def team_of_zone(self, zone_id: int) -> OuterTeam:
        return self.outer_teams[self.zone_teams[zone_id].outer_id]


def deal_zones(workload: Workload) -> list[list[int]]:
    """Zone ids per outer team, dealt round-robin by descending size."""
    order = sorted(range(len(workload.zones)),
                   key=lambda z: (-workload.zones[z], z))
    teams: list[list[int]] = [[] for _ in range(workload.n_o)]
    for rank, zone in enumerate(order):
        teams[rank % workload.n_o].append(zone)
    return teams


def split_share(load: int, parts: int) -> tuple[int, ...]:
    """Split integer work into `parts` near-equal positive integer shares."""
    if parts > load:
        raise ValueError(f"cannot split load {load} into {parts} positive shares")
    base, rem = divmod(load, parts)
    return tuple(base + 1 if j < rem else base for j in range(parts))


def instantiate(workload: Workload, load_hints: bool = True) -> World:
    """Build the two-level bubble hierarchy for a workload.

    One bubble per outer team; inside it one bubble per zone holding the
    zone's inner tasks. With load hints on, every zone bubble and task gets
    its true work as an explicit load, mirroring a program that reports its
    per-zone sizes to the scheduler; with hints off the scheduler must infer
    weight from thread counts alone.
    """
    dealt = deal_zones(workload)
    next_id = 0

    outer_teams: list[OuterTeam] = []
    for index in range(workload.n_o):
        bubble = Bubble(next_id)
        next_id += 1
        outer_teams.append(OuterTeam(index, bubble, []))

    zone_teams: list[Optional[TeamSpec]] = [None] * len(workload.zones)
    owner_of_zone = {zone: t for t, zones in enumerate(dealt) for zone in zones}
    for zone_id in range(len(workload.zones)):
        outer = outer_teams[owner_of_zone[zone_id]]
        bubble = create_bubble(outer.bubble, next_id)
        next_id += 1
        if load_hints:
            set_load(bubble, workload.zones[zone_id])
        zone_teams[zone_id] = TeamSpec(zone_id, outer.index, bubble, [], ())

    all_tasks: list[Task] = []
    for zone_id, load in enumerate(workload.zones):
        team = zone_teams[zone_id]
        assert team is not None
        shares = split_share(load, workload.n_i)
        team.shares = shares
        for share in shares:
            task = Task(next_id, share)
            next_id += 1
            insert_entity(team.bubble, task)
            if load_hints:
                set_load(task, share)
            team.tasks.append(task)
            all_tasks.append(task)

    for t, zones in enumerate(dealt):
        outer_teams[t].zones = [zone_teams[z] for z in zones]  # type: ignore[misc]

    return World(workload, outer_teams, [t for t in zone_teams if t is not None],
                 all_tasks, load_hints)


def parse_workload(text: str) -> Workload:
    """Parse the structured text format: `zones`, `iterations`, `outer`,
    `inner` and `edge` lines. Blank lines and `#` comments ignored."""
    zones: Optional[tuple[int, ...]] = None
    iterations = 1
    n_o = 1
    n_i = 1
    edges: list[tuple[int, int]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *rest = line.split()
        if key == "zones":
            zones = tuple(int(v) for v in rest)
        elif key == "iterations" and len(rest) == 1:
            iterations = int(rest[0])
        elif key == "outer" and len(rest) == 1:
            n_o = int(rest[0])
        elif key == "inner" and len(rest) == 1:
            n_i = int(rest[0])
        elif key == "edge" and len(rest) == 2:
            edges.append((int(rest[0]), int(rest[1])))
        else:
            raise ValueError(f"line {lineno}: cannot parse {line!r}")
    if zones is None:
        raise ValueError("workload file must name zone loads")
    return Workload(zones, iterations, n_o, n_i, tuple(edges))

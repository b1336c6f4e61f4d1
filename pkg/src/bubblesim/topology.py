"""Hierarchical machine model: a tree of levels with one runqueue per component.

The machine is declared level by level (counts per parent), never probed from
hardware, so a run is reproducible anywhere. Each tree node is represented
directly by its runqueue; leaves carry exactly one logical CPU. NUMA distance
is a symmetric factor matrix (remote over local access time), either given
explicitly or generated from a line arrangement of the NUMA-level components.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional, Sequence

from .entities import Holder


class LevelKind(Enum):
    """Machine levels, outermost to innermost."""

    MACHINE = "machine"
    NUMA_NODE = "numanode"
    CHIP = "chip"
    CORE = "core"
    LOGICAL_CPU = "logicalcpu"


_LEVEL_RANK = {kind: rank for rank, kind in enumerate(LevelKind)}

# Factor range reported for neighbor and most distant chips; the generator
# interpolates linearly in hop distance between these two endpoints.
NEAR_FACTOR = Fraction("1.06")
FAR_FACTOR = Fraction("1.4")


class Runqueue(Holder):
    """Entity queue of one topology component, linked into the level tree."""

    def __init__(self, index: int, kind: LevelKind, ordinal: int,
                 parent: Optional["Runqueue"]) -> None:
        super().__init__()
        self.index = index            # dense id in construction (breadth-first) order
        self.kind = kind
        self.ordinal = ordinal        # position among same-kind components
        self.parent = parent
        self.children: list[Runqueue] = []
        self.cpus: tuple[int, ...] = ()

    def __repr__(self) -> str:
        return f"Runqueue({self.kind.value}-{self.ordinal})"


@dataclass(frozen=True)
class TopologySpec:
    """Declarative machine description: (kind, count per parent) outer to inner."""

    levels: tuple[tuple[LevelKind, int], ...]
    numa_factors: tuple[tuple[int, int, Fraction], ...] = ()

    @staticmethod
    def parse(text: str) -> "TopologySpec":
        """Parse the flat text format: `kind count` lines plus optional
        `numa_factor i j value` lines. Blank lines and `#` comments ignored."""
        levels: list[tuple[LevelKind, int]] = []
        factors: list[tuple[int, int, Fraction]] = []
        by_name = {kind.value: kind for kind in LevelKind}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "numa_factor":
                if len(parts) != 4:
                    raise ValueError(f"line {lineno}: expected `numa_factor i j value`")
                factors.append((int(parts[1]), int(parts[2]), Fraction(parts[3])))
                continue
            if len(parts) != 2 or parts[0] not in by_name:
                raise ValueError(f"line {lineno}: expected `kind count`, got {line!r}")
            levels.append((by_name[parts[0]], int(parts[1])))
        return TopologySpec(tuple(levels), tuple(factors))


PRESETS = {
    # 8 dual-core chips, one NUMA node per chip, 16 CPUs total.
    "paper16": TopologySpec(((LevelKind.MACHINE, 1), (LevelKind.CHIP, 8), (LevelKind.CORE, 2))),
    "single": TopologySpec(((LevelKind.MACHINE, 1), (LevelKind.LOGICAL_CPU, 1))),
}


@dataclass
class Topology:
    """Immutable after construction; scheduling state lives in the runqueues."""

    spec: TopologySpec
    root: Runqueue
    runqueues: list[Runqueue]
    cpus: list[int]
    leaf_of_cpu: dict[int, Runqueue]
    numa_node_of_cpu: list[int]
    numa_factors: list[list[Fraction]] = field(repr=False)

    @property
    def cpu_count(self) -> int:
        return len(self.cpus)

    @property
    def numa_node_count(self) -> int:
        return len(self.numa_factors)

    def node_of(self, cpu: int) -> int:
        if cpu not in self.leaf_of_cpu:
            raise KeyError(f"unknown cpu {cpu}")
        return self.numa_node_of_cpu[cpu]


def build_topology(spec: TopologySpec) -> Topology:
    """Build the runqueue tree, CPU leaves and the NUMA factor matrix."""
    if not spec.levels:
        raise ValueError("empty level list")
    kinds = [kind for kind, _ in spec.levels]
    if kinds[0] is not LevelKind.MACHINE or spec.levels[0][1] != 1:
        raise ValueError("outermost level must be `machine 1`")
    ranks = [_LEVEL_RANK[kind] for kind in kinds]
    if sorted(ranks) != ranks or len(set(ranks)) != len(ranks):
        raise ValueError("levels must appear once each, outermost to innermost")
    for kind, count in spec.levels:
        if count < 1:
            raise ValueError(f"level {kind.value}: count must be >= 1")

    runqueues: list[Runqueue] = []
    level_nodes: list[list[Runqueue]] = []
    current: list[Runqueue] = []
    for depth, (kind, count) in enumerate(spec.levels):
        nxt: list[Runqueue] = []
        parents: Sequence[Optional[Runqueue]] = current if depth else [None]
        for parent in parents:
            for _ in range(count):
                rq = Runqueue(len(runqueues), kind, 0, parent)
                runqueues.append(rq)
                if parent is not None:
                    parent.children.append(rq)
                nxt.append(rq)
        for ordinal, rq in enumerate(nxt):
            rq.ordinal = ordinal
        level_nodes.append(nxt)
        current = nxt

    leaves = current
    if not leaves:
        raise ValueError("topology has zero CPUs")
    cpus = list(range(len(leaves)))
    leaf_of_cpu: dict[int, Runqueue] = {}
    for cpu, leaf in zip(cpus, leaves):
        leaf.cpus = (cpu,)
        leaf_of_cpu[cpu] = leaf
    for depth in range(len(level_nodes) - 2, -1, -1):
        for rq in level_nodes[depth]:
            rq.cpus = tuple(c for child in rq.children for c in child.cpus)

    numa_level = _numa_level_index(kinds)
    numa_nodes = level_nodes[numa_level]
    numa_node_of_cpu = [0] * len(cpus)
    for node_id, node_rq in enumerate(numa_nodes):
        for cpu in node_rq.cpus:
            numa_node_of_cpu[cpu] = node_id
    factors = _factor_matrix(len(numa_nodes), spec.numa_factors)

    return Topology(spec, runqueues[0], runqueues, cpus, leaf_of_cpu,
                    numa_node_of_cpu, factors)


def _numa_level_index(kinds: list[LevelKind]) -> int:
    """NUMA domains follow the declared numanode level, else chips, else machine."""
    if LevelKind.NUMA_NODE in kinds:
        return kinds.index(LevelKind.NUMA_NODE)
    if LevelKind.CHIP in kinds:
        return kinds.index(LevelKind.CHIP)
    return 0


def _factor_matrix(n: int, explicit: tuple[tuple[int, int, Fraction], ...]) -> list[list[Fraction]]:
    matrix = [[_generated_factor(i, j, n) for j in range(n)] for i in range(n)]
    for i, j, value in explicit:
        if not (0 <= i < n and 0 <= j < n):
            raise KeyError(f"unknown numa node in factor ({i}, {j})")
        matrix[i][j] = value
        matrix[j][i] = value
    for i in range(n):
        if matrix[i][i] != 1:
            raise ValueError(f"numa factor ({i}, {i}) must be 1.0")
        for j in range(n):
            if matrix[i][j] < 1:
                raise ValueError(f"numa factor ({i}, {j}) below 1.0")
            if matrix[i][j] != matrix[j][i]:
                raise ValueError(f"numa factors not symmetric at ({i}, {j})")
    return matrix


def _generated_factor(i: int, j: int, n: int) -> Fraction:
    """Line-arrangement rule: neighbors at NEAR_FACTOR, the two ends at FAR_FACTOR."""
    if i == j:
        return Fraction(1)
    distance = abs(i - j)
    max_distance = n - 1
    if max_distance <= 1:
        return NEAR_FACTOR
    t = Fraction(distance - 1, max_distance - 1)
    return NEAR_FACTOR + (FAR_FACTOR - NEAR_FACTOR) * t


def runqueues_spanning(topo: Topology, cpu: int) -> list[Runqueue]:
    """The runqueue chain covering `cpu`, ordered leaf (bottom) to machine (top)."""
    if cpu not in topo.leaf_of_cpu:
        raise KeyError(f"unknown cpu {cpu}")
    chain: list[Runqueue] = []
    rq: Optional[Runqueue] = topo.leaf_of_cpu[cpu]
    while rq is not None:
        chain.append(rq)
        rq = rq.parent
    return chain


def numa_factor(topo: Topology, a: int, b: int) -> Fraction:
    n = topo.numa_node_count
    if not 0 <= a < n:
        raise KeyError(f"unknown numa node {a}")
    if not 0 <= b < n:
        raise KeyError(f"unknown numa node {b}")
    return topo.numa_factors[a][b]

"""Distribution strategies: greedy bubble spread and affinity-blind baselines.

The bubble-spread strategy walks the runqueue hierarchy top down. At each
level it sorts the current entities by load (explicit hint, else inferred
from the thread count), explodes any bubble too heavy for the level, then
greedily assigns the biggest entity to the least loaded runqueue and recurses
into each runqueue's children. Affinity is preserved by keeping bubbles
intact as long as the balance allows; explosion trades that affinity away
when one entity dominates a level.

The two baselines ignore affinity on purpose: SharedRoot keeps every task on
the machine runqueue, RoundRobinLeaves deals tasks across the leaf runqueues
by count alone. Both stand in for schedulers that balance load but know
nothing about which tasks belong together.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .entities import (
    Bubble,
    Entity,
    Task,
    explode,
    insert_entity,
    remove_entity,
)
from .topology import Runqueue, Topology

log = logging.getLogger(__name__)

TIE_BREAK_RULES = ("id", "input")


@dataclass(frozen=True)
class SpreadParams:
    """Tuning for the spread: explosion threshold ratio and sort tie-break."""

    explosion_ratio: Fraction = Fraction(1)
    tie_break: str = "id"

    def __post_init__(self) -> None:
        if self.explosion_ratio <= 0:
            raise ValueError("explosion_ratio must be positive")
        if self.tie_break not in TIE_BREAK_RULES:
            raise ValueError(f"unknown tie_break rule {self.tie_break!r}")


@dataclass
class PlacementLog:
    """Where each entity came to rest, plus which bubbles were exploded."""

    resting: dict[int, int] = field(default_factory=dict)   # entity id -> rq index
    exploded: set[int] = field(default_factory=set)

    def record(self, entity: Entity, rq: Runqueue) -> None:
        self.resting[entity.id] = rq.index

    def signature(self) -> tuple:
        return (tuple(sorted(self.resting.items())), tuple(sorted(self.exploded)))


def spread_weight(entity: Entity) -> int:
    """Placement weight: the explicit hint when given, else the thread count."""
    if entity.explicit_load is not None:
        return entity.explicit_load
    if isinstance(entity, Task):
        return 1
    assert isinstance(entity, Bubble)
    return sum(spread_weight(child) for child in entity.entities)


def queued_weight(rq: Runqueue) -> int:
    """Weight already present on a runqueue subtree."""
    total = sum(spread_weight(e) for e in rq.entities)
    for child in rq.children:
        total += queued_weight(child)
    return total


def spread(entities: Sequence[Entity], runqueues: Sequence[Runqueue],
           params: SpreadParams, placements: Optional[PlacementLog] = None) -> None:
    """Distribute `entities` over sibling `runqueues` and their subtrees.

    One level pass: sort by descending weight; while the heaviest entity is a
    bubble heavier than explosion_ratio * (level total / runqueue count),
    explode it and restart the pass; then greedily assign biggest-first to
    the least loaded runqueue and recurse into each runqueue's children.
    """
    if not runqueues:
        raise ValueError("empty runqueue list")
    work = list(entities)
    for entity in work:
        if entity.holder is not None:
            remove_entity(entity)

    while True:
        work = _sorted(work, params)
        if not work:
            break
        total = sum(spread_weight(e) for e in work)
        threshold = params.explosion_ratio * Fraction(total, len(runqueues))
        head = work[0]
        if spread_weight(head) <= threshold:
            break
        if isinstance(head, Bubble) and head.entities:
            if placements is not None:
                placements.exploded.add(head.id)
            released = explode(head)
            work = work[1:] + released
            continue
        log.debug("entity %r heavier than level share %s; placed anyway", head, threshold)
        break

    loads = {rq.index: Fraction(queued_weight(rq)) for rq in runqueues}
    assigned: dict[int, list[Entity]] = {rq.index: [] for rq in runqueues}
    for entity in work:
        target = min(runqueues, key=lambda rq: (loads[rq.index], rq.index))
        assigned[target.index].append(entity)
        loads[target.index] += spread_weight(entity)

    for rq in runqueues:
        batch = assigned[rq.index]
        if not batch:
            continue
        if rq.children:
            spread(batch, rq.children, params, placements)
        else:
            for entity in batch:
                insert_entity(rq, entity)
                if placements is not None:
                    placements.record(entity, rq)


def _sorted(work: list[Entity], params: SpreadParams) -> list[Entity]:
    if params.tie_break == "id":
        return sorted(work, key=lambda e: (-spread_weight(e), e.id))
    return sorted(work, key=lambda e: -spread_weight(e))


class Strategy:
    """Base placement policy; subclasses define initial and per-round behavior."""

    name = "base"

    def place(self, topo: Topology, entities: Sequence[Entity]) -> PlacementLog:
        raise NotImplementedError

    def on_round_start(self, topo: Topology, tasks: Sequence[Task], round_index: int) -> None:
        """Called at every synchronization round; blind policies reshuffle here."""


@dataclass(frozen=True)
class BubbleSpread(Strategy):
    params: SpreadParams = SpreadParams()
    name = "spread"

    def place(self, topo: Topology, entities: Sequence[Entity]) -> PlacementLog:
        placements = PlacementLog()
        spread(list(entities), [topo.root], self.params, placements)
        return placements


class SharedRoot(Strategy):
    """Every task on the machine runqueue; any CPU picks the head of the queue."""

    name = "shared"

    def place(self, topo: Topology, entities: Sequence[Entity]) -> PlacementLog:
        placements = PlacementLog()
        for task in _flatten(entities, placements):
            insert_entity(topo.root, task)
            placements.record(task, topo.root)
        return placements


@dataclass(frozen=True)
class RoundRobinLeaves(Strategy):
    """Tasks dealt across leaf runqueues by count, re-dealt every round.

    The start leaf rotates by `drift` every round, modeling a count-balancing
    scheduler that keeps cycling threads over the machine with no memory of
    where their data was first touched. `interleave` switches the deal order
    from plain leaf order to first-child-of-every-parent order. Both knobs
    are model constants, not user-facing tuning.
    """

    interleave: bool = False
    drift: int = 2
    name = "rr"

    def place(self, topo: Topology, entities: Sequence[Entity]) -> PlacementLog:
        placements = PlacementLog()
        self._deal(topo, _flatten(entities, placements), offset=0, placements=placements)
        return placements

    def on_round_start(self, topo: Topology, tasks: Sequence[Task], round_index: int) -> None:
        live = sorted((t for t in tasks), key=lambda t: t.id)
        for task in live:
            remove_entity(task)
        self._deal(topo, live, offset=round_index * self.drift, placements=None)

    def _deal(self, topo: Topology, tasks: Iterable[Task], offset: int,
              placements: Optional[PlacementLog]) -> None:
        leaves = interleaved_leaves(topo) if self.interleave \
            else [topo.leaf_of_cpu[cpu] for cpu in topo.cpus]
        for i, task in enumerate(tasks):
            leaf = leaves[(offset + i) % len(leaves)]
            insert_entity(leaf, task)
            task.requeue_holder = leaf
            if placements is not None:
                placements.record(task, leaf)


def interleaved_leaves(topo: Topology) -> list[Runqueue]:
    """Leaves ordered first-child-of-every-parent, then second, and so on."""
    leaves = [topo.leaf_of_cpu[cpu] for cpu in topo.cpus]
    return sorted(leaves, key=lambda rq: tuple(reversed(_path_ordinals(rq))))


def _path_ordinals(rq: Runqueue) -> list[int]:
    path = []
    node: Optional[Runqueue] = rq
    while node is not None and node.parent is not None:
        path.append(node.parent.children.index(node))
        node = node.parent
    return list(reversed(path))


def _flatten(entities: Sequence[Entity], placements: PlacementLog) -> list[Task]:
    """Pull every task out of the hierarchy; bubbles are tombstoned away."""
    tasks: list[Task] = []
    for entity in list(entities):
        if isinstance(entity, Task):
            if entity.holder is not None:
                remove_entity(entity)
            tasks.append(entity)
            continue
        assert isinstance(entity, Bubble)
        if entity.holder is not None:
            remove_entity(entity)
        placements.exploded.add(entity.id)
        tasks.extend(_flatten(explode(entity), placements))
    return sorted(tasks, key=lambda t: t.id)


def apply_strategy(topo: Topology, strategy: Strategy) -> PlacementLog:
    """Distribute the hierarchy currently held at the root runqueue."""
    return strategy.place(topo, list(topo.root.entities))


def rebalance_on_team_event(topo: Topology, bubble: Bubble,
                            params: SpreadParams = SpreadParams()) -> PlacementLog:
    """Re-run the spread on the smallest runqueue subtree holding `bubble`."""
    anchor = _holding_runqueue(topo, bubble)
    gathered: list[Entity] = []
    _collect_subtree(anchor, gathered)
    placements = PlacementLog()
    spread(gathered, [anchor], params, placements)
    return placements


def _holding_runqueue(topo: Topology, bubble: Bubble) -> Runqueue:
    holder = bubble.holder
    while isinstance(holder, Bubble):
        holder = holder.holder
    if isinstance(holder, Runqueue):
        return holder
    return topo.root


def _collect_subtree(rq: Runqueue, out: list[Entity]) -> None:
    for entity in list(rq.entities):
        remove_entity(entity)
        out.append(entity)
    for child in rq.children:
        _collect_subtree(child, out)


def strategy_from_name(name: str, params: SpreadParams = SpreadParams()) -> Strategy:
    if name == "spread":
        return BubbleSpread(params)
    if name == "shared":
        return SharedRoot()
    if name == "rr":
        return RoundRobinLeaves()
    raise ValueError(f"unknown strategy {name!r}")


STRATEGY_NAMES = ("spread", "shared", "rr")

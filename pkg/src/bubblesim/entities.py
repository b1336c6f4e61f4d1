"""Schedulable entities (tasks and bubbles) and the holders that contain them.

Tasks and bubbles are both entities; bubbles and runqueues are both holders,
so anything schedulable can be placed on anything that holds. Entity lists
preserve insertion order (FIFO) unless a distribution strategy reorders them.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Optional


class TaskState(Enum):
    WAITING = "waiting"    # alive, not eligible to run (between fork/join phases)
    READY = "ready"
    RUNNING = "running"
    FINISHED = "finished"


class Holder:
    """Anything that can contain entities: a bubble or a runqueue."""

    def __init__(self) -> None:
        self.entities: list[Entity] = []


class Entity:
    """Anything schedulable: a task or a bubble. Lives in at most one holder."""

    def __init__(self, entity_id: int) -> None:
        self.id = entity_id
        self.holder: Optional[Holder] = None
        # Explicit load hint; overrides the inferred value for placement and stats.
        self.explicit_load: Optional[int] = None

    def __repr__(self) -> str:
        return f"{type(self).__name__}(id={self.id})"


class Task(Entity):
    """A unit of work. `load` is the actual per-segment work in microunits."""

    def __init__(self, task_id: int, load: int, home_node: Optional[int] = None) -> None:
        if load <= 0:
            raise ValueError(f"task load must be positive, got {load}")
        super().__init__(task_id)
        self.load = load
        self.home_node = home_node    # NUMA node of its data; set on first touch
        self.state = TaskState.WAITING
        # Where the task goes back to after running a segment.
        self.requeue_holder: Optional[Holder] = None


class Bubble(Entity, Holder):
    """A nested group of entities that share affinity; also a holder."""

    def __init__(self, bubble_id: int) -> None:
        Entity.__init__(self, bubble_id)
        Holder.__init__(self)
        self.exploded = False

    def __repr__(self) -> str:
        return f"Bubble(id={self.id}, n={len(self.entities)})"


@dataclass(frozen=True)
class BubbleStats:
    """Aggregate over a bubble's containment subtree.

    No cache or memory statistics: the simulator carries no cache model.
    """

    total_tasks: int
    running_tasks: int
    total_load: int


def create_bubble(holding: Holder, bubble_id: int) -> Bubble:
    """Create an empty bubble inside `holding`, as a team start does."""
    bubble = Bubble(bubble_id)
    insert_entity(holding, bubble)
    return bubble


def insert_entity(holder: Holder, entity: Entity) -> None:
    """Append `entity` to `holder`; rejects containment cycles."""
    if entity.holder is not None:
        raise ValueError(f"{entity!r} already has a holder")
    if isinstance(entity, Bubble) and _contains(entity, holder):
        raise ValueError("inserting an ancestor bubble into its descendant")
    holder.entities.append(entity)
    entity.holder = holder


def remove_entity(entity: Entity) -> None:
    """Detach `entity` from its holder."""
    if entity.holder is None:
        return
    entity.holder.entities.remove(entity)
    entity.holder = None


def _contains(bubble: Bubble, target: Holder) -> bool:
    if bubble is target:
        return True
    for child in bubble.entities:
        if isinstance(child, Bubble) and _contains(child, target):
            return True
    return False


def set_load(entity: Entity, load: Optional[int]) -> None:
    """Set (or clear, with None) the explicit load hint on an entity."""
    if load is not None and load <= 0:
        raise ValueError(f"explicit load must be positive, got {load}")
    entity.explicit_load = load


def bubble_stats(bubble: Bubble) -> BubbleStats:
    """Recursive aggregation; explicit_load overrides a subtree's inferred load."""
    total_tasks = 0
    running = 0
    for task in iter_tasks(bubble):
        total_tasks += 1
        if task.state is TaskState.RUNNING:
            running += 1
    return BubbleStats(total_tasks, running, _subtree_load(bubble))


def _subtree_load(entity: Entity) -> int:
    if entity.explicit_load is not None:
        return entity.explicit_load
    if isinstance(entity, Task):
        return entity.load
    assert isinstance(entity, Bubble)
    return sum(_subtree_load(child) for child in entity.entities)


def iter_tasks(holder: Holder) -> Iterator[Task]:
    """Depth-first, in-order walk over all tasks in a containment subtree."""
    for child in holder.entities:
        if isinstance(child, Task):
            yield child
        else:
            assert isinstance(child, Bubble)
            yield from iter_tasks(child)


def explode(bubble: Bubble) -> list[Entity]:
    """Replace `bubble` by its immediate content, one level only.

    The children take the bubble's place in its holder (order preserved);
    the bubble becomes an empty tombstone excluded from further scheduling.
    Returns the released children.
    """
    children = list(bubble.entities)
    holder = bubble.holder
    for child in children:
        child.holder = None
    bubble.entities.clear()
    bubble.exploded = True
    if holder is not None:
        at = holder.entities.index(bubble)
        holder.entities[at:at + 1] = children
        bubble.holder = None
        for child in children:
            child.holder = holder
    return children

"""Ground hierarchical self-scheduling.

An idle CPU scans every runqueue that spans it, bottom to top, and takes the
first ready task it finds. Bubbles met during the scan are entered through a
pluggable hook; the default hook searches the bubble depth-first, in order.
Extraction removes the task from its holder's list but remembers where it
came from, so the task can be requeued there after its segment.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .entities import Bubble, Entity, Task, TaskState, remove_entity
from .topology import Topology, runqueues_spanning


def default_bubble_hook(bubble: Bubble, cpu: int) -> Optional[Task]:
    """Depth-first, in-order search for the first ready task in the bubble."""
    for child in bubble.entities:
        if isinstance(child, Task):
            if child.state is TaskState.READY:
                return child
        elif isinstance(child, Bubble) and not child.exploded:
            found = default_bubble_hook(child, cpu)
            if found is not None:
                return found
    return None


@dataclass
class SchedulerHooks:
    """Extension points for high-level scheduling policies.

    on_bubble_encounter must return a task from inside the given bubble's
    subtree, or None. on_timeslice_expiry is reserved for time-sliced
    policies; the default engine never fires it.
    """

    on_bubble_encounter: Callable[[Bubble, int], Optional[Task]] = field(
        default=default_bubble_hook)
    on_timeslice_expiry: Optional[Callable[[Bubble], None]] = None


def pick_next(topo: Topology, hooks: SchedulerHooks, cpu: int) -> Optional[Task]:
    """Extract the next task for an idle CPU, or None if no ready work spans it."""
    for rq in runqueues_spanning(topo, cpu):
        for entity in rq.entities:
            task = _candidate(entity, hooks, cpu)
            if task is not None:
                _assert_spans(task, cpu)
                _extract(task)
                return task
    return None


def _assert_spans(task: Task, cpu: int) -> None:
    # Placement legality: the holder chain must rise to a runqueue spanning cpu.
    holder = task.holder
    while isinstance(holder, Bubble):
        holder = holder.holder
    assert holder is not None and cpu in getattr(holder, "cpus", ()), \
        f"{task!r} extracted by cpu {cpu} outside its runqueue span"


def _candidate(entity: Entity, hooks: SchedulerHooks, cpu: int) -> Optional[Task]:
    if isinstance(entity, Task):
        return entity if entity.state is TaskState.READY else None
    if isinstance(entity, Bubble) and not entity.exploded:
        return hooks.on_bubble_encounter(entity, cpu)
    return None


def _extract(task: Task) -> None:
    task.requeue_holder = task.holder
    remove_entity(task)


def requeue_on_finish(task: Task) -> None:
    """Completed tasks leave the system; unfinished ones rejoin their holder's tail."""
    if task.state is TaskState.FINISHED:
        return
    holder = task.requeue_holder
    if holder is None:
        raise RuntimeError(f"{task!r} has nowhere to requeue")
    holder.entities.append(task)
    task.holder = holder
    task.state = TaskState.WAITING

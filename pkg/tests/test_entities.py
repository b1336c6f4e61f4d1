from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from bubblesim.entities import (
    Bubble,
    Task,
    TaskState,
    bubble_stats,
    create_bubble,
    explode,
    insert_entity,
    iter_tasks,
    remove_entity,
    set_load,
)
from bubblesim.topology import PRESETS, build_topology


def test_create_bubble_in_root_runqueue():
    topo = build_topology(PRESETS["paper16"])
    bubble = create_bubble(topo.root, 0)
    assert bubble.holder is topo.root
    assert topo.root.entities == [bubble]


def test_nesting_depth_grows_by_one():
    outer = Bubble(0)
    inner = create_bubble(outer, 1)
    innermost = create_bubble(inner, 2)
    depth = 0
    holder = innermost.holder
    while isinstance(holder, Bubble):
        depth += 1
        holder = holder.holder
    assert depth == 2


def test_team_start_call_order():
    # A team start: create the team bubble in the master's holder, move the
    # master in, then create the slaves inside it.
    topo = build_topology(PRESETS["paper16"])
    master = Task(100, load=5)
    insert_entity(topo.root, master)

    holder = master.holder
    team = create_bubble(holder, 0)
    remove_entity(master)
    insert_entity(team, master)
    slaves = []
    for i in range(3):
        slave = Task(101 + i, load=5)
        insert_entity(team, slave)
        slaves.append(slave)

    assert team.holder is topo.root
    assert team.entities == [master] + slaves
    assert bubble_stats(team).total_tasks == 4


def test_insert_rejects_double_holder():
    a, b = Bubble(0), Bubble(1)
    task = Task(2, load=1)
    insert_entity(a, task)
    with pytest.raises(ValueError):
        insert_entity(b, task)


def test_insert_rejects_containment_cycle():
    outer = Bubble(0)
    inner = create_bubble(outer, 1)
    remove_entity(outer) if outer.holder else None
    with pytest.raises(ValueError):
        insert_entity(inner, outer)


def test_remove_shrinks_holder_list():
    bubble = Bubble(0)
    task = Task(1, load=2)
    insert_entity(bubble, task)
    remove_entity(task)
    assert bubble.entities == []
    assert task.holder is None


def test_set_load_rejects_nonpositive():
    task = Task(0, load=1)
    with pytest.raises(ValueError):
        set_load(task, 0)
    with pytest.raises(ValueError):
        set_load(task, -3)


def test_set_load_then_clear_restores_inferred_stats():
    bubble = Bubble(0)
    insert_entity(bubble, Task(1, load=2))
    insert_entity(bubble, Task(2, load=3))
    set_load(bubble, 11)
    assert bubble_stats(bubble).total_load == 11
    set_load(bubble, None)
    assert bubble_stats(bubble).total_load == 5


def test_sibling_explicit_loads_drive_ordering_weight():
    from bubblesim.spread import spread_weight

    big, small = Bubble(0), Bubble(1)
    set_load(big, 25)
    set_load(small, 1)
    ordered = sorted([small, big], key=lambda e: (-spread_weight(e), e.id))
    assert ordered == [big, small]


def test_stats_empty_bubble():
    assert bubble_stats(Bubble(0)) == bubble_stats(Bubble(1))
    stats = bubble_stats(Bubble(2))
    assert (stats.total_tasks, stats.running_tasks, stats.total_load) == (0, 0, 0)


def test_stats_sum_of_task_loads():
    bubble = Bubble(0)
    insert_entity(bubble, Task(1, load=2))
    insert_entity(bubble, Task(2, load=3))
    assert bubble_stats(bubble).total_load == 5


def test_stats_explicit_load_overrides_subtree():
    bubble = Bubble(0)
    insert_entity(bubble, Task(1, load=2))
    insert_entity(bubble, Task(2, load=3))
    set_load(bubble, 7)
    stats = bubble_stats(bubble)
    assert stats.total_load == 7
    assert stats.total_tasks == 2


def test_stats_counts_running_tasks():
    bubble = Bubble(0)
    t1, t2 = Task(1, load=1), Task(2, load=1)
    insert_entity(bubble, t1)
    insert_entity(bubble, t2)
    t1.state = TaskState.RUNNING
    assert bubble_stats(bubble).running_tasks == 1


def test_explode_replaces_bubble_with_content():
    holder = Bubble(0)
    bubble = create_bubble(holder, 1)
    a, b = Task(2, load=1), Task(3, load=1)
    insert_entity(bubble, a)
    insert_entity(bubble, b)
    released = explode(bubble)
    assert released == [a, b]
    assert holder.entities == [a, b]
    assert bubble.exploded and bubble.holder is None


def test_explode_is_one_level_only():
    top = Bubble(0)
    sub = create_bubble(top, 1)
    task = Task(2, load=1)
    insert_entity(sub, Task(3, load=1))
    insert_entity(top, task)
    released = explode(top)
    assert released == [sub, task]
    assert not sub.exploded
    assert sub.entities != []


def test_explode_empty_bubble_returns_empty():
    assert explode(Bubble(0)) == []


def test_explode_preserves_position_in_holder():
    holder = Bubble(0)
    first = Task(1, load=1)
    bubble = Bubble(2)
    last = Task(3, load=1)
    insert_entity(holder, first)
    insert_entity(holder, bubble)
    insert_entity(holder, last)
    inner = Task(4, load=1)
    insert_entity(bubble, inner)
    explode(bubble)
    assert holder.entities == [first, inner, last]


@st.composite
def bubble_trees(draw, depth=2):
    """Random containment tree with integer task loads."""
    counter = draw(st.integers(min_value=0, max_value=1000))
    root = Bubble(counter)
    nodes = [root]
    next_id = counter + 1
    for _ in range(draw(st.integers(min_value=1, max_value=8))):
        parent = nodes[draw(st.integers(min_value=0, max_value=len(nodes) - 1))]
        if depth > 0 and draw(st.booleans()):
            child = create_bubble(parent, next_id)
            nodes.append(child)
        else:
            insert_entity(parent, Task(next_id, load=draw(st.integers(1, 50))))
        next_id += 1
    return root


@given(bubble_trees())
def test_stats_match_brute_force_sum_without_explicit_loads(root):
    stats = bubble_stats(root)
    tasks = list(iter_tasks(root))
    assert stats.total_tasks == len(tasks)
    assert stats.total_load == sum(t.load for t in tasks)


@given(bubble_trees())
def test_explode_preserves_count_order_and_load(root):
    before_tasks = [t.id for t in iter_tasks(root)]
    before_load = bubble_stats(root).total_load
    holder = Bubble(10_000)
    # re-home the tree under a fresh holder so explode has somewhere to splice
    insert_entity(holder, root)
    explode(root)
    after_tasks = [t.id for t in iter_tasks(holder)]
    assert after_tasks == before_tasks
    assert sum(t.load for t in iter_tasks(holder)) == before_load


@given(bubble_trees())
def test_every_entity_has_exactly_one_holder(root):
    seen: dict[int, int] = {}

    def walk(holder):
        for child in holder.entities:
            assert child.holder is holder
            seen[child.id] = seen.get(child.id, 0) + 1
            if isinstance(child, Bubble):
                walk(child)

    walk(root)
    assert all(count == 1 for count in seen.values())

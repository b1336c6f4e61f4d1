from __future__ import annotations

import pytest

from bubblesim.topology import PRESETS, Topology, TopologySpec, build_topology


@pytest.fixture
def paper16() -> Topology:
    return build_topology(PRESETS["paper16"])


@pytest.fixture
def single_cpu() -> Topology:
    return build_topology(PRESETS["single"])


def flat_topology(cpus: int) -> Topology:
    """machine -> N logical CPUs; handy for one-level distribution tests."""
    return build_topology(TopologySpec.parse(f"machine 1\nlogicalcpu {cpus}"))


def two_chip_topology() -> Topology:
    """machine -> 2 chips -> 2 cores each."""
    return build_topology(TopologySpec.parse("machine 1\nchip 2\ncore 2"))

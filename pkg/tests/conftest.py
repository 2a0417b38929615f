from __future__ import annotations

import time

import pytest

from dctesim.topology import build_clos


@pytest.fixture(scope="session")
def desk_topology():
    """The 4-pod, 160-host shape used throughout (default capacities)."""
    return build_clos(4, 4, 10)


@pytest.fixture(scope="session")
def small_topology():
    """2 pods x 2 racks x 4 hosts: small enough to enumerate by hand."""
    return build_clos(2, 2, 4)


@pytest.fixture(scope="session")
def standard_sweep(tmp_path_factory):
    """The full desk-preset sweep, run once and shared by the acceptance
    tests (scheme ordering, GFF feasibility, resource metrics)."""
    from dctesim.experiments import desk_preset, run_sweep

    out_dir = tmp_path_factory.mktemp("desk_sweep")
    started = time.perf_counter()
    outcome = run_sweep(desk_preset(), out_dir=out_dir)
    return outcome, out_dir, time.perf_counter() - started

import os

import hypothesis
import numpy as np
import pytest

from models.scenario import GridShape, SimConfig, TopologyKind, TopologySpec

np.seterr(all="warn")

hypothesis.settings.register_profile("ci", max_examples=200, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=20, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


@pytest.fixture
def small_grid():
    return GridShape(n_blocks=10, blocks_per_subframe=2, period_ms=100.0)


def fully_connected(n_vehicles, **kwargs):
    """Short fully connected scenario for unit tests"""
    kwargs.setdefault("duration_s", 20.0)
    kwargs.setdefault("warmup_s", 1.0)
    kwargs.setdefault("replications", 2)
    grid = kwargs.pop("grid", GridShape())
    return SimConfig(
        grid=grid,
        topology=TopologySpec(kind=TopologyKind.FULLY_CONNECTED, n_vehicles=n_vehicles),
        **kwargs,
    )


def linear_road(density_per_km, road_length_m=3000.0, **kwargs):
    kwargs.setdefault("duration_s", 20.0)
    kwargs.setdefault("warmup_s", 1.0)
    kwargs.setdefault("replications", 2)
    margin = kwargs.pop("edge_margin_m", 0.0)
    return SimConfig(
        topology=TopologySpec(kind=TopologyKind.LINEAR_ROAD, density_per_km=density_per_km,
                              road_length_m=road_length_m, edge_margin_m=margin),
        **kwargs,
    )

import os

import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.register_profile("ci", max_examples=100, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


@pytest.fixture
def scenario_dir():
    return os.path.join(ROOT, "scenarios")


def radial(**over):
    """Small radial scenario dict with overrides."""
    base = dict(geometry="radial", n=2, omega0={"kind": "ball", "radius": 1.0},
                growth={"form": "linear", "g0": 1.0, "p_max": 1.0},
                m_list=[40], dx=0.04, horizon=0.1, output_count=3)
    base.update(over)
    return base

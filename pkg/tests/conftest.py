"""Shared fixtures: the step-function example set, the tie example, and the
four-region continuous instance used across the suite."""

from __future__ import annotations

import pytest

from loadshed.criticality import CriticalLoad, build_ccf

# (power GW, criticality) pairs of the worked step-function example;
# ramp width 0.05
FIG_PAIRS = [
    (1.0, 0.1),
    (2.0, 0.15),
    (1.0, 0.2),
    (4.0, 0.4),
    (1.0, 0.4),
    (2.0, 0.5),
    (2.0, 0.7),
    (3.0, 0.8),
]
FIG_RAMP = 0.05

# small tie example: two loads share criticality 0.3, deficit 3
TIE_LOADS = [
    CriticalLoad(1, 1.0, 0.2),
    CriticalLoad(2, 2.0, 0.3),
    CriticalLoad(3, 2.0, 0.3),
    CriticalLoad(4, 3.0, 0.4),
]

# continuous instance: four regions, 1.2 GW capacity each, integer
# criticalities 1, 2, 2, 3, deficit 1.8 GW
CONTINUOUS_REGIONS = [(1.2, 1.0), (1.2, 2.0), (1.2, 3.0), (1.2, 2.0)]
CONTINUOUS_REGIONS_ORDERED = [(1.2, 1.0), (1.2, 2.0), (1.2, 2.0), (1.2, 3.0)]
CONTINUOUS_DEFICIT = 1.8


@pytest.fixture
def fig_loads() -> list[CriticalLoad]:
    return [CriticalLoad(i + 1, p, c) for i, (p, c) in enumerate(FIG_PAIRS)]


@pytest.fixture
def fig_ccf():
    return build_ccf(FIG_PAIRS)


def make_random_loads(rng, count: int, distinct: bool = True) -> list[CriticalLoad]:
    """Random loads with grid criticalities; optionally forced-distinct."""
    crits = []
    taken = set()
    while len(crits) < count:
        c = rng.integers(0, 10_001)
        if distinct:
            if c in taken:
                continue
            taken.add(c)
        crits.append(c / 10_000)
    powers = rng.uniform(0.5, 1.5, size=count)
    return [CriticalLoad(i + 1, float(powers[i]), crits[i]) for i in range(count)]

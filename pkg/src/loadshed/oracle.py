"""Centralized ground-truth solvers used to verify every distributed run.

Each operation is an independent reference path: greedy prefix selection,
exhaustive subset search, exact threshold inversion on the CCF and its
surrogate, and the closed-form solution of the continuous variant.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .criticality import (
    Ccf,
    CriticalLoad,
    SurrogateCcf,
    build_ccf,
    eval_ccf,
    min_gap,
    ramp,
)

BRUTE_FORCE_MAX_LOADS = 20

# absolute tolerance for detecting an exact CCF hit, f(z*) == deficit
BOUNDARY_TOL = 1e-9


class InfeasibleError(ValueError):
    """Total sheddable power is below the requested deficit."""


@dataclass(frozen=True)
class SheddingSolution:
    """Result of the centralized discrete solvers.

    ``boundary_case`` flags the measure-zero situation where the CCF meets
    the deficit exactly at the threshold, in which case the threshold
    recovered from the surrogate root sits at, not above, that root.
    """

    shed_ids: tuple[int, ...]
    total_shed: float
    z_star: float
    z_hat: float
    boundary_case: bool


@dataclass(frozen=True)
class ContinuousSolution:
    per_region_shed: tuple[float, ...]
    z_tilde: float


def exact_z_star(ccf: Ccf, deficit: float) -> float:
    """Smallest breakpoint z with f(z) >= deficit.

    The optimal threshold is always one of the criticality values present,
    so searching breakpoints is exhaustive.
    """
    if not ccf.breakpoints:
        raise ValueError("CCF has no breakpoints")
    if deficit > ccf.total_load:
        raise InfeasibleError(
            f"deficit {deficit} exceeds total sheddable power {ccf.total_load}"
        )
    return ccf.breakpoints[bisect_left(ccf.cumulative, deficit)]


def exact_z_hat(surrogate: SurrogateCcf, deficit: float) -> float:
    """Smallest z with surrogate value equal to the deficit.

    Inverts the unique ramp segment containing the deficit.  Where the
    surrogate is flat at exactly the deficit, this returns the left
    endpoint of the plateau.
    """
    ccf = surrogate.base
    if not ccf.breakpoints:
        raise ValueError("CCF has no breakpoints")
    if deficit < 0:
        raise ValueError(f"deficit {deficit} is negative")
    if deficit > ccf.total_load:
        raise InfeasibleError(
            f"deficit {deficit} exceeds total sheddable power {ccf.total_load}"
        )
    if deficit == 0.0:
        return ccf.breakpoints[0] - surrogate.ramp_width
    idx = bisect_left(ccf.cumulative, deficit)
    below = ccf.cumulative[idx - 1] if idx else 0.0
    mass = ccf.cumulative[idx] - below
    return ccf.breakpoints[idx] - surrogate.ramp_width * (1.0 - (deficit - below) / mass)


def z_star_from_z_hat(
    ccf: Ccf, z_hat: float, deficit: float, tol: float = BOUNDARY_TOL
) -> float:
    """Recover the exact threshold from the surrogate root.

    If the CCF overshoots the deficit at the threshold, the threshold is
    the smallest criticality strictly above the root; if it meets the
    deficit exactly, it is the largest criticality not above the root.
    The case is detected by evaluating the CCF at the lower candidate.
    """
    bps = ccf.breakpoints
    i = bisect_right(bps, z_hat)
    if i > 0 and abs(eval_ccf(ccf, bps[i - 1]) - deficit) <= tol:
        return bps[i - 1]
    if i == len(bps):
        raise ValueError(f"no criticality value above {z_hat}")
    return bps[i]


def greedy_shed_set(
    loads: Sequence[CriticalLoad], deficit: float, ramp_width: float | None = None
) -> SheddingSolution:
    """Shortest criticality-ordered prefix covering the deficit.

    Loads are ordered by (criticality, id); the prefix stops as soon as its
    power sum reaches the deficit, so it may split a group of equal
    criticality.  The CCF threshold ``z_star`` sheds such groups whole,
    which is why its total can exceed the greedy one.
    """
    items = sorted(loads, key=lambda l: (l.criticality, l.id))
    if not items:
        raise InfeasibleError("no loads to shed")
    if math.fsum(l.power for l in items) < deficit:
        raise InfeasibleError(
            f"total sheddable power is below the deficit {deficit}"
        )
    shed: list[CriticalLoad] = []
    acc = 0.0
    for load in items:
        if acc >= deficit:
            break
        shed.append(load)
        acc += load.power

    ccf = build_ccf((l.power, l.criticality) for l in items)
    if ramp_width is None:
        if len(ccf.breakpoints) >= 2:
            ramp_width = min_gap(l.criticality for l in items)
        else:
            ramp_width = 1.0
    surrogate = SurrogateCcf(ccf, ramp_width)
    z_star = exact_z_star(ccf, deficit)
    z_hat = exact_z_hat(surrogate, deficit)
    boundary = abs(eval_ccf(ccf, z_star) - deficit) <= BOUNDARY_TOL
    return SheddingSolution(
        shed_ids=tuple(l.id for l in shed),
        total_shed=math.fsum(l.power for l in shed),
        z_star=z_star,
        z_hat=z_hat,
        boundary_case=boundary,
    )


def _is_priority_based(mask: int, sorted_loads: Sequence[CriticalLoad]) -> bool:
    """Every included load's criticality is at most every excluded one's."""
    highest = -1
    for k in range(len(sorted_loads)):
        if mask >> k & 1:
            highest = k
    if highest < 0:
        return True
    cutoff = sorted_loads[highest].criticality
    for k in range(highest):
        if not mask >> k & 1 and sorted_loads[k].criticality < cutoff:
            return False
    return True


def brute_force_min_set(
    loads: Sequence[CriticalLoad], deficit: float, priority_only: bool = False
) -> tuple[tuple[int, ...], float]:
    """Exhaustively minimize shed power over all subsets covering the deficit.

    Verification oracle only; capped at 20 loads (2^20 subsets).  Returns
    one minimizer (ties broken by lowest bitmask) and its total.  With
    ``priority_only`` the search is restricted to priority-based subsets
    (no included load less critical than an excluded one), the feasible
    family of the prioritized problem the greedy prefix solves.
    """
    items = list(loads)
    if len(items) > BRUTE_FORCE_MAX_LOADS:
        raise ValueError(
            f"brute force capped at {BRUTE_FORCE_MAX_LOADS} loads, got {len(items)}"
        )
    if priority_only:
        ordered = sorted(items, key=lambda l: (l.criticality, l.id))
        best_ids: tuple[int, ...] | None = None
        best_total = math.inf
        for mask in range(1 << len(ordered)):
            if not _is_priority_based(mask, ordered):
                continue
            total = math.fsum(
                ordered[k].power for k in range(len(ordered)) if mask >> k & 1
            )
            if total >= deficit and total < best_total:
                best_total = total
                best_ids = tuple(
                    ordered[k].id for k in range(len(ordered)) if mask >> k & 1
                )
        if best_ids is None:
            raise InfeasibleError(f"no subset reaches the deficit {deficit}")
        return best_ids, best_total
    sums = np.zeros(1)
    for load in items:
        sums = np.concatenate([sums, sums + load.power])
    feasible = sums >= deficit
    if not feasible.any():
        raise InfeasibleError(f"no subset reaches the deficit {deficit}")
    best = int(np.argmin(np.where(feasible, sums, np.inf)))
    ids = tuple(items[k].id for k in range(len(items)) if best >> k & 1)
    return ids, float(sums[best])


def continuous_ccf_eval(regions: Iterable[tuple[float, float]], z: float) -> float:
    """Continuous-variant CCF: sum of capacity times a unit-width ramp."""
    total = 0.0
    parts = []
    for capacity, criticality in regions:
        if capacity < 0:
            raise ValueError(f"negative capacity {capacity}")
        parts.append(capacity * ramp(z - criticality, 1.0))
    return math.fsum(parts)


def continuous_solution(
    regions: Sequence[tuple[float, float]], deficit: float
) -> ContinuousSolution:
    """Closed-form split of the deficit across continuously sheddable regions.

    Finds the smallest root of the continuous CCF by piecewise-linear
    inversion over its kink points, then fills regions whole up to the
    root's floor, fractionally at the next integer level, and not at all
    above.  Regional criticalities must be integers for the fill rule.
    """
    if deficit < 0:
        raise ValueError(f"deficit {deficit} is negative")
    total = math.fsum(cap for cap, _ in regions)
    if deficit > total:
        raise InfeasibleError(f"deficit {deficit} exceeds total capacity {total}")
    kinks = sorted({c - 1.0 for _, c in regions} | {float(c) for _, c in regions})
    values = [continuous_ccf_eval(regions, k) for k in kinks]
    idx = bisect_left(values, deficit)
    if values[idx] == deficit:
        z = kinks[idx]
    else:
        lo, hi = kinks[idx - 1], kinks[idx]
        flo, fhi = values[idx - 1], values[idx]
        z = lo + (deficit - flo) * (hi - lo) / (fhi - flo)
    floor = math.floor(z)
    frac = z - floor
    shed = []
    for capacity, criticality in regions:
        if criticality <= floor:
            shed.append(capacity)
        elif floor < criticality <= math.ceil(z):
            shed.append(capacity * frac)
        else:
            shed.append(0.0)
    return ContinuousSolution(tuple(shed), z)

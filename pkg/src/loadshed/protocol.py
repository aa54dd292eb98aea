"""Synchronous-round distributed runtime for priority-based load shedding.

Each region keeps a scalar estimate of the shedding threshold, refined by
neighbor averaging plus a local correction from its own surrogate CCF and
deficit estimate; a regional cutoff (the smallest own criticality at or
above the estimate) feeds a dynamic min-consensus layer whose minimum is
the network-wide threshold.  Rounds are synchronous: every update reads
only previous-round state, and all neighbor reductions run in fixed index
order so results do not depend on evaluation order.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .criticality import CriticalLoad, SurrogateCcf, eval_surrogate, local_zeta
from .netgraph import (
    GraphSchedule,
    PeriodicSchedule,
    StaticSchedule,
    metropolis_weights,
    mixing_rows,
    neighbor_lists,
)
from .rootfind import mix_and_step
from .seeding import noise_matrix, symmetric_uniform, STREAM_NOISE


@dataclass(frozen=True)
class StepSchedule:
    """Diminishing step sizes eta(t) = gain / (t + offset)^exponent.

    The exponent is restricted to (1/2, 1] so the step sum always
    diverges while the sum of squares converges, for every parameter
    choice this class accepts.
    """

    gain: float = 1.0
    offset: float = 1.0
    exponent: float = 1.0

    def __post_init__(self):
        if self.gain <= 0:
            raise ValueError(f"step gain must be positive, got {self.gain}")
        if self.offset <= 0:
            raise ValueError(f"step offset must be positive, got {self.offset}")
        if not 0.5 < self.exponent <= 1.0:
            raise ValueError(
                f"step exponent must lie in (0.5, 1], got {self.exponent}"
            )

    def eta(self, t: int) -> float:
        base = t + self.offset
        if self.exponent == 1.0:
            return self.gain / base
        return self.gain / base ** self.exponent


@dataclass(frozen=True)
class ExactSplit:
    """Every region reports an equal share of the true deficit."""

    deficit: float
    n: int

    def __post_init__(self):
        object.__setattr__(self, "_vec", (self.deficit / self.n,) * self.n)

    def values(self, t: int) -> tuple[float, ...]:
        return self._vec


@dataclass(frozen=True)
class NoisySplit:
    """Equal split plus uniform noise decaying like 1/t.

    p_j(t) = deficit/n + e_j(t)/t with e_j(t) drawn from [-1, 1) by the
    seeded counter stream, so any round can be recomputed independently.
    The aggregate error is bounded by n/t, which stays below 2n * eta(t)
    for the default harmonic step; the tracking certificate verifies it
    numerically.
    """

    deficit: float
    n: int
    seed: int

    def values(self, t: int) -> tuple[float, ...]:
        base = self.deficit / self.n
        if t <= 0:
            return (base,) * self.n
        return tuple(
            base + symmetric_uniform(self.seed, STREAM_NOISE, t, j) / t
            for j in range(self.n)
        )


@dataclass(frozen=True)
class TraceEstimator:
    """Replay a fixed table of per-round deficit estimates.

    Row t-1 serves round t; the last row repeats past the end of the
    table.
    """

    rows: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        if not self.rows:
            raise ValueError("trace estimator needs at least one row")
        width = len(self.rows[0])
        if any(len(r) != width for r in self.rows):
            raise ValueError("trace estimator rows must have equal width")

    def values(self, t: int) -> tuple[float, ...]:
        return self.rows[min(max(t, 1) - 1, len(self.rows) - 1)]


Estimator = ExactSplit | NoisySplit | TraceEstimator

# closing stretch of unchanged cutoffs required to call a fixed-horizon
# run converged
DEFAULT_STABLE_ROUNDS = 50


def p_values(estimator: Estimator, t: int) -> tuple[float, ...]:
    """Per-region deficit estimates for round t."""
    return estimator.values(t)


def certify_deficit_tracking(
    estimator: Estimator, step: StepSchedule, t_max: int
) -> float:
    """Max over t in [1, t_max] of |sum_j p_j(t) - deficit| / eta(t).

    This is the empirical deviation-rate constant of the estimator; for
    the noisy split with the harmonic default step it never exceeds 2n.
    """
    if isinstance(estimator, ExactSplit):
        return 0.0
    if isinstance(estimator, NoisySplit):
        worst = 0.0
        chunk = 1 << 17
        for start in range(1, t_max + 1, chunk):
            ts = np.arange(start, min(start + chunk, t_max + 1), dtype=np.uint64)
            noise = noise_matrix(estimator.seed, ts, estimator.n)
            errors = np.abs(noise.sum(axis=1)) / ts.astype(np.float64)
            etas = np.array([step.eta(int(t)) for t in ts])
            worst = max(worst, float((errors / etas).max()))
        return worst
    deficit = math.fsum(estimator.rows[-1])
    worst = 0.0
    for t in range(1, t_max + 1):
        row = estimator.values(t)
        worst = max(worst, abs(math.fsum(row) - deficit) / step.eta(t))
    return worst


def x_update_round(
    x: Sequence[float],
    W: np.ndarray,
    eta_t: float,
    p: Sequence[float],
    surrogates: Sequence[SurrogateCcf],
) -> list[float]:
    """One threshold-estimate round: mix neighbor values, step against the
    gap between the local surrogate CCF and the local deficit estimate."""
    n = len(x)
    if W.shape != (n, n):
        raise ValueError(f"mixing matrix {W.shape} does not match {n} regions")
    if len(p) != n or len(surrogates) != n:
        raise ValueError("p and surrogates must have one entry per region")
    y = [eval_surrogate(surrogates[j], x[j]) - p[j] for j in range(n)]
    return mix_and_step(x, mixing_rows(W), eta_t, y)


def zeta_update(sorted_criticalities: Sequence[float], x_new: float) -> float:
    """Regional cutoff: smallest own criticality at or above the estimate."""
    return local_zeta(sorted_criticalities, x_new)


def dmc_round(
    z: Sequence[float],
    alpha: Sequence[float],
    zeta_new: Sequence[float],
    neighbors: Sequence[Sequence[int]],
    ramp_width: float,
    self_tuning: bool = True,
) -> tuple[list[float], list[float]]:
    """One dynamic min-consensus round with local self-tuning.

    Each node takes the minimum of its neighborhood's previous values
    (inflated by its own step alpha) and its fresh cutoff.  Alpha resets
    large after any increase so stale minima age out quickly, and settles
    at half the ramp width otherwise.  With self-tuning off, alpha stays
    zero: plain min-consensus, suited to static graphs once the cutoffs
    have stopped changing.
    """
    new_z: list[float] = []
    new_alpha: list[float] = []
    for j in range(len(z)):
        a_j = alpha[j]
        best = z[j] + a_j
        for k in neighbors[j]:
            cand = z[k] + a_j
            if cand < best:
                best = cand
        if zeta_new[j] < best:
            best = zeta_new[j]
        new_z.append(best)
        if self_tuning:
            new_alpha.append(0.5 if best > z[j] else ramp_width / 2.0)
        else:
            new_alpha.append(0.0)
    return new_z, new_alpha


def _graph_entry(edges, n: int):
    return (
        mixing_rows(metropolis_weights(edges, n)),
        neighbor_lists(edges, n),
    )


@dataclass(frozen=True)
class RegionNodeState:
    """Snapshot of one region's protocol state."""

    x: float
    zeta: float
    z_min: float
    alpha: float


@dataclass(frozen=True)
class ProtocolInstance:
    """Everything the runtime needs for one scenario.

    ``region_criticalities`` are sorted ascending per region and must
    match the surrogates, which all share ``ramp_width``.  A convergence
    window of None disables early stopping (fixed-horizon run).
    """

    region_criticalities: tuple[tuple[float, ...], ...]
    surrogates: tuple[SurrogateCcf, ...]
    ramp_width: float
    schedule: GraphSchedule
    step: StepSchedule
    estimator: Estimator
    convergence_window: int | None = 50
    max_rounds: int = 20_000
    x0: float = 0.0
    self_tuning: bool = True


@dataclass(frozen=True)
class RunTrace:
    """Per-round records plus final state of one protocol run.

    When recording is off (long verification sweeps), the arrays are empty
    but round counts, final state, and the length of the closing stretch
    of unchanged cutoffs are still reported.
    """

    rounds: int
    converged: bool
    final_x: tuple[float, ...]
    final_zeta: tuple[float, ...]
    final_z: tuple[float, ...]
    final_alpha: tuple[float, ...]
    zeta_stable_rounds: int
    recorded: bool
    t: np.ndarray
    eta: np.ndarray
    x: np.ndarray
    zeta: np.ndarray
    z_min: np.ndarray
    alpha: np.ndarray
    p: np.ndarray

    @property
    def z_star_distributed(self) -> float:
        return min(self.final_z)

    def final_states(self) -> tuple[RegionNodeState, ...]:
        return tuple(
            RegionNodeState(self.final_x[j], self.final_zeta[j], self.final_z[j], self.final_alpha[j])
            for j in range(len(self.final_x))
        )


def run_protocol(inst: ProtocolInstance, record_trace: bool = True) -> RunTrace:
    """Run the full protocol until the cutoff vector holds still or rounds
    run out.

    Round structure: draw the round's graph and mixing matrix, update the
    threshold estimates, recompute regional cutoffs, then run the
    min-consensus layer on the new cutoffs.  The run stops once the cutoff
    vector has been unchanged for ``convergence_window`` consecutive
    rounds; the cutoffs are the quantity with a finite-time limit, whereas
    the min-consensus values keep cycling with the graph period on
    switching networks.
    """
    n = len(inst.region_criticalities)
    if len(inst.surrogates) != n:
        raise ValueError("one surrogate per region required")
    for s in inst.surrogates:
        if s.ramp_width != inst.ramp_width:
            raise ValueError("surrogate ramp width differs from instance ramp width")
    crits = [list(c) for c in inst.region_criticalities]
    bases = [(list(s.base.breakpoints), list(s.base.cumulative)) for s in inst.surrogates]
    c = inst.ramp_width
    K = inst.convergence_window
    x = [float(inst.x0)] * n
    zeta = [math.inf] * n
    zmin = [math.inf] * n
    alpha = [c / 2.0 if inst.self_tuning else 0.0] * n
    streak = 0
    converged = False
    # static and periodic schedules repeat a short cycle of graphs; build
    # their mixing structure once instead of per round
    period_env = None
    schedule = inst.schedule
    if isinstance(schedule, StaticSchedule):
        period_env = [_graph_entry(schedule.edges_at(1), n)]
    elif isinstance(schedule, PeriodicSchedule):
        period_env = [
            _graph_entry(schedule.edges_at(t), n)
            for t in range(1, len(schedule.steps) + 1)
        ]
    cache: dict[frozenset, tuple] = {}
    step = inst.step
    harmonic = step.exponent == 1.0
    gain, offset = step.gain, step.offset
    estimator = inst.estimator
    rec_t: list[int] = []
    rec_eta: list[float] = []
    rec_x: list[list[float]] = []
    rec_zeta: list[list[float]] = []
    rec_z: list[list[float]] = []
    rec_a: list[list[float]] = []
    rec_p: list[tuple[float, ...]] = []
    rounds = 0
    region_range = range(n)
    bps_lens = [len(b) for b, _ in bases]
    crit_lens = [len(sc) for sc in crits]
    self_tuning = inst.self_tuning
    half_c = c / 2.0
    inf = math.inf
    bl, br = bisect_left, bisect_right
    for t in range(1, inst.max_rounds + 1):
        if period_env is not None:
            rows, nbrs = period_env[(t - 1) % len(period_env)]
        else:
            edges = schedule.edges_at(t)
            entry = cache.get(edges)
            if entry is None:
                entry = _graph_entry(edges, n)
                cache[edges] = entry
            rows, nbrs = entry
        eta_t = gain / (t + offset) if harmonic else step.eta(t)
        p_t = estimator.values(t)

        # one fused pass per region: threshold update (inlined surrogate
        # evaluation, same arithmetic as eval_surrogate so trajectories
        # match the generic root finder bit for bit), cutoff update, and
        # the min-consensus step, which reads only previous-round state
        new_x, new_zeta, new_z, new_alpha = [], [], [], []
        for j in region_range:
            bps, cum = bases[j]
            z = x[j]
            idx = br(bps, z)
            v = cum[idx - 1] if idx else 0.0
            if idx < bps_lens[j]:
                d = z - bps[idx]
                if d > -c:
                    v += (cum[idx] - (cum[idx - 1] if idx else 0.0)) * (d / c + 1.0)
            acc = 0.0
            for k, w in rows[j]:
                acc += w * x[k]
            xj = acc - eta_t * (v - p_t[j])
            new_x.append(xj)

            sc = crits[j]
            i = bl(sc, xj)
            zeta_j = sc[i] if i < crit_lens[j] else inf
            new_zeta.append(zeta_j)

            a_j = alpha[j]
            best = zmin[j] + a_j
            for k in nbrs[j]:
                cand = zmin[k] + a_j
                if cand < best:
                    best = cand
            if zeta_j < best:
                best = zeta_j
            new_z.append(best)
            if self_tuning:
                new_alpha.append(0.5 if best > zmin[j] else half_c)
            else:
                new_alpha.append(0.0)

        streak = streak + 1 if new_zeta == zeta else 0
        x, zeta, zmin, alpha = new_x, new_zeta, new_z, new_alpha
        if record_trace:
            rec_t.append(t)
            rec_eta.append(eta_t)
            rec_x.append(x)
            rec_zeta.append(zeta)
            rec_z.append(zmin)
            rec_a.append(alpha)
            rec_p.append(p_t)
        rounds = t
        if K is not None and streak >= K:
            converged = True
            break
    if K is None:
        converged = streak >= DEFAULT_STABLE_ROUNDS

    empty = np.empty((0, n))
    return RunTrace(
        rounds=rounds,
        converged=converged,
        final_x=tuple(x),
        final_zeta=tuple(zeta),
        final_z=tuple(zmin),
        final_alpha=tuple(alpha),
        zeta_stable_rounds=streak,
        recorded=record_trace,
        t=np.array(rec_t, dtype=np.int64) if record_trace else np.empty(0, dtype=np.int64),
        eta=np.array(rec_eta) if record_trace else np.empty(0),
        x=np.array(rec_x) if record_trace else empty,
        zeta=np.array(rec_zeta) if record_trace else empty,
        z_min=np.array(rec_z) if record_trace else empty,
        alpha=np.array(rec_a) if record_trace else empty,
        p=np.array(rec_p) if record_trace else empty,
    )


def shed_decision(loads: Sequence[CriticalLoad], z_star: float) -> list[int]:
    """Ids of the region's loads with criticality at or below the threshold."""
    if not math.isfinite(z_star):
        raise ValueError(f"shed threshold must be finite, got {z_star}")
    return [load.id for load in loads if load.criticality <= z_star]

"""Distributed root finding for time-varying node fields over switching graphs.

The recursion x(t+1) = W(t) x(t) - eta(t) y(t), with y_j(t) the local field
evaluated at the node's own state, drives every node to a common root of
the average limit field.  This module provides the shared one-round
kernel, a fixed-field runner with convergence diagnostics, and executable
checks of the boundedness, Lipschitz, sign, and deviation-rate conditions
the convergence argument rests on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .netgraph import (
    GraphSchedule,
    metropolis_weights,
    mixing_rows,
)

SIGN_TOL = 1e-9
LIPSCHITZ_SAFETY = 1.1


def mix_and_step(
    x: Sequence[float],
    w_rows: Sequence[Sequence[tuple[int, float]]],
    eta_t: float,
    y: Sequence[float],
) -> list[float]:
    """One synchronous round: neighbor averaging then a local field step.

    Rows are reduced in ascending neighbor order so results are identical
    no matter how node updates are scheduled.
    """
    out = []
    for j, row in enumerate(w_rows):
        acc = 0.0
        for k, w in row:
            acc += w * x[k]
        out.append(acc - eta_t * y[j])
    return out


@dataclass(frozen=True)
class TimeVaryingField:
    """Per-node field h(j, z, t) with an optional declared limit field.

    ``limit`` gives lim_{t->inf} h(j, z, .) when known analytically; when
    absent, certificates estimate it from late-time samples.
    """

    n: int
    evaluate: Callable[[int, float, float], float]
    limit: Callable[[int, float], float] | None = None
    claimed_bound: float | None = None
    claimed_lipschitz: float | None = None

    def average_limit(self, z: float, t_large: float) -> float:
        if self.limit is not None:
            values = [self.limit(j, z) for j in range(self.n)]
        else:
            values = [self.evaluate(j, z, t_large) for j in range(self.n)]
        return math.fsum(values) / self.n


def aux_update_round(
    x: Sequence[float],
    W: np.ndarray,
    eta_t: float,
    fld: TimeVaryingField,
    t: float,
) -> list[float]:
    """One round of the generalized recursion with a dense mixing matrix."""
    if W.shape[0] != len(x):
        raise ValueError(f"state dimension {len(x)} does not match matrix {W.shape}")
    y = [fld.evaluate(j, x[j], t) for j in range(len(x))]
    return mix_and_step(x, mixing_rows(W), eta_t, y)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float | None = None
    witness: float | None = None
    detail: str = ""

    def __str__(self) -> str:
        status = "pass" if self.passed else "FAIL"
        parts = [f"{self.name}: {status}"]
        if self.value is not None:
            parts.append(f"value={self.value:.6g}")
        if self.witness is not None:
            parts.append(f"witness={self.witness:.6g}")
        if self.detail:
            parts.append(self.detail)
        return "  ".join(parts)


@dataclass
class AssumptionCertificate:
    """Numeric evidence for the convergence conditions of one setup.

    Bound constants are empirical estimates over the sampled grid and
    horizon, not proofs; ``checks`` carries one entry per verified
    condition with the failing sample when a condition does not hold.
    """

    bound: float = math.nan            # sup |h|
    lipschitz: float = math.nan        # slope estimate, with safety factor
    deviation_rate: float = math.nan   # theta: |H - avg h(., t)| / eta(t)
    window: int = 0                    # B of the schedule in force
    consensus_ratio: float | None = None  # nu: max disagreement / eta
    sign_witness: float | None = None
    checks: dict[str, CheckResult] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def add(self, check: CheckResult) -> None:
        self.checks[check.name] = check

    def __str__(self) -> str:
        lines = [str(c) for c in self.checks.values()]
        lines.append(
            f"constants: bound={self.bound:.6g} lipschitz={self.lipschitz:.6g} "
            f"deviation_rate={self.deviation_rate:.6g} window={self.window}"
            + (
                f" consensus_ratio={self.consensus_ratio:.6g}"
                if self.consensus_ratio is not None
                else ""
            )
        )
        return "\n".join(lines)


def _sample_times(horizon: int, count: int = 24) -> list[int]:
    times = sorted({int(round(x)) for x in np.geomspace(1, max(horizon, 1), count)})
    return [t for t in times if t >= 1]


def verify_assumption_bounded_lipschitz(
    fld: TimeVaryingField, grid: np.ndarray, horizon: int
) -> tuple[CheckResult, CheckResult, float, float]:
    """Estimate sup |h| and the Lipschitz constant over grid x sample times."""
    times = _sample_times(horizon)
    bound = 0.0
    slope = 0.0
    for t in times:
        for j in range(fld.n):
            values = [fld.evaluate(j, float(z), t) for z in grid]
            bound = max(bound, max(abs(v) for v in values))
            for i in range(1, len(grid) - 1):
                quotient = abs(values[i + 1] - values[i - 1]) / (grid[i + 1] - grid[i - 1])
                slope = max(slope, quotient)
    slope *= LIPSCHITZ_SAFETY
    bounded = CheckResult(
        "field_bounded", math.isfinite(bound), bound,
        detail=f"sampled over {len(times)} times x {len(grid)} grid points",
    )
    lipschitz = CheckResult("field_lipschitz", math.isfinite(slope), slope)
    return bounded, lipschitz, bound, slope


def verify_sign_condition(
    fld: TimeVaryingField, grid: np.ndarray, t_large: float
) -> CheckResult:
    """Search for a root of the average limit validating (z - root) H(z) >= 0.

    Candidates come from sign changes of the sampled limit (or an endpoint
    when the limit never changes sign); the winner must keep the product
    above -SIGN_TOL across the whole grid.
    """
    H = np.array([fld.average_limit(float(z), t_large) for z in grid])
    candidates: list[float] = []
    for i in range(len(grid) - 1):
        if H[i] == 0.0:
            candidates.append(float(grid[i]))
        elif H[i] < 0.0 < H[i + 1]:
            candidates.append(float(grid[i] if abs(H[i]) <= abs(H[i + 1]) else grid[i + 1]))
    if H[-1] == 0.0:
        candidates.append(float(grid[-1]))
    if not candidates:
        if (H >= 0.0).all():
            candidates.append(float(grid[0]))
        elif (H <= 0.0).all():
            candidates.append(float(grid[-1]))
    best_witness, best_min = None, -math.inf
    for cand in candidates:
        worst = float(((grid - cand) * H).min())
        if worst > best_min:
            best_min, best_witness = worst, cand
    if best_witness is None:
        return CheckResult("sign_condition", False, detail="no sign change found")
    return CheckResult(
        "sign_condition",
        best_min >= -SIGN_TOL,
        value=best_min,
        witness=best_witness,
    )


def verify_deviation_rate(
    fld: TimeVaryingField,
    grid: np.ndarray,
    horizon: int,
    eta: Callable[[int], float],
) -> CheckResult:
    """Bound |H(z) - avg_j h_j(z, t)| / eta(t) and check it stabilizes.

    Passes when the running maximum of the ratio stops growing in the
    second half of the sampled horizon.
    """
    times = _sample_times(horizon, count=40)
    t_large = 10.0 * max(horizon, 1)
    H = [fld.average_limit(float(z), t_large) for z in grid]
    running = 0.0
    attained_at = 1
    for t in times:
        worst = 0.0
        for zi, z in enumerate(grid):
            avg = math.fsum(fld.evaluate(j, float(z), t) for j in range(fld.n)) / fld.n
            worst = max(worst, abs(H[zi] - avg))
        ratio = worst / eta(t)
        if ratio > running:
            running = ratio
            attained_at = t
    return CheckResult(
        "deviation_rate",
        attained_at <= max(1, horizon // 2),
        value=running,
        detail=f"running max attained at t={attained_at}",
    )


@dataclass(frozen=True)
class RootRun:
    """Trajectory and diagnostics of a root-finding run."""

    root: float
    x_final: tuple[float, ...]
    converged: bool
    rounds: int
    x: np.ndarray              # (rounds, n)
    eta: np.ndarray            # (rounds,)
    disagreement: np.ndarray   # (rounds,) max_i |x_i - mean|
    ratio_max: float           # sup_t disagreement / eta  (consensus-rate nu)
    ratio_argmax: int          # round where the sup was attained
    mean_abs_max: float        # sup_t |mean(x)|  (boundedness monitor)
    mean_abs_argmax: int


def run_to_root(
    fld: TimeVaryingField,
    schedule: GraphSchedule,
    eta: Callable[[int], float],
    x0: float | Sequence[float] = 0.0,
    tolerance: float = 1e-6,
    max_rounds: int = 10_000,
) -> RootRun:
    """Iterate the recursion until nodes agree on a root or rounds run out.

    Convergence requires both the disagreement and the average limit field
    at the mean to fall inside the tolerance.  Diagnostics cover the
    consensus ratio (disagreement over step size) and the boundedness of
    the running mean.
    """
    n = fld.n
    x = list(x0) if isinstance(x0, Sequence) else [float(x0)] * n
    if len(x) != n:
        raise ValueError(f"x0 has length {len(x)}, field has {n} nodes")
    t_large = 10.0 * max_rounds
    rows_cache: dict[frozenset, list] = {}
    xs, etas, disagreements = [], [], []
    ratio_max, ratio_argmax = 0.0, 1
    mean_abs_max, mean_abs_argmax = 0.0, 1
    converged = False
    rounds = 0
    for t in range(1, max_rounds + 1):
        edges = schedule.edges_at(t)
        rows = rows_cache.get(edges)
        if rows is None:
            rows = mixing_rows(metropolis_weights(edges, n))
            rows_cache[edges] = rows
        eta_t = eta(t)
        y = [fld.evaluate(j, x[j], t) for j in range(n)]
        x = mix_and_step(x, rows, eta_t, y)
        mean = math.fsum(x) / n
        spread = max(abs(v - mean) for v in x)
        xs.append(list(x))
        etas.append(eta_t)
        disagreements.append(spread)
        rounds = t
        if eta_t > 0 and spread / eta_t > ratio_max:
            ratio_max, ratio_argmax = spread / eta_t, t
        if abs(mean) > mean_abs_max:
            mean_abs_max, mean_abs_argmax = abs(mean), t
        if spread <= tolerance and abs(fld.average_limit(mean, t_large)) <= tolerance:
            converged = True
            break
    mean = math.fsum(x) / n
    return RootRun(
        root=mean,
        x_final=tuple(x),
        converged=converged,
        rounds=rounds,
        x=np.array(xs),
        eta=np.array(etas),
        disagreement=np.array(disagreements),
        ratio_max=ratio_max,
        ratio_argmax=ratio_argmax,
        mean_abs_max=mean_abs_max,
        mean_abs_argmax=mean_abs_argmax,
    )

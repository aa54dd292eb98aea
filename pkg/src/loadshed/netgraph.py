"""Time-varying communication graphs and doubly-stochastic mixing matrices.

Graphs are undirected over nodes 0..n-1 and stored as frozensets of
ordered pairs (i, j) with i < j.  Schedules map a 1-based round counter to
an edge set; all three kinds (static, periodic, seeded random) are pure
functions of (seed, t), so any round can be re-derived independently.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .seeding import STREAM_EDGES, STREAM_REPAIR, mix64, unit_float

Edge = tuple[int, int]


def normalize_edges(edges: Iterable[Sequence[int]], n: int) -> frozenset[Edge]:
    """Canonicalize an undirected edge list; self-loops are implicit."""
    out: set[Edge] = set()
    for i, j in edges:
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"edge ({i}, {j}) outside node range [0, {n})")
        if i == j:
            continue
        out.add((min(i, j), max(i, j)))
    return frozenset(out)


def is_connected(edges: Iterable[Edge], n: int) -> bool:
    if n <= 1:
        return True
    adjacency: list[list[int]] = [[] for _ in range(n)]
    for i, j in edges:
        adjacency[i].append(j)
        adjacency[j].append(i)
    seen = [False] * n
    stack = [0]
    seen[0] = True
    count = 1
    while stack:
        u = stack.pop()
        for v in adjacency[u]:
            if not seen[v]:
                seen[v] = True
                count += 1
                stack.append(v)
    return count == n


def connected_components(edges: Iterable[Edge], n: int) -> list[list[int]]:
    adjacency: list[list[int]] = [[] for _ in range(n)]
    for i, j in edges:
        adjacency[i].append(j)
        adjacency[j].append(i)
    seen = [False] * n
    components = []
    for start in range(n):
        if seen[start]:
            continue
        group = [start]
        seen[start] = True
        stack = [start]
        while stack:
            u = stack.pop()
            for v in adjacency[u]:
                if not seen[v]:
                    seen[v] = True
                    group.append(v)
                    stack.append(v)
        components.append(sorted(group))
    return components


def metropolis_weights(edges: Iterable[Edge], n: int) -> np.ndarray:
    """Metropolis-Hastings mixing matrix for an undirected edge set.

    Off-diagonal weights are 1/(1 + max degree of the endpoints); the
    diagonal absorbs the remainder.  The result is symmetric, doubly
    stochastic, has a positive diagonal, and every nonzero entry is at
    least 1/n.
    """
    edge_list = sorted(normalize_edges(edges, n))
    degree = [0] * n
    for i, j in edge_list:
        degree[i] += 1
        degree[j] += 1
    W = np.zeros((n, n))
    for i, j in edge_list:
        w = 1.0 / (1.0 + max(degree[i], degree[j]))
        W[i, j] = w
        W[j, i] = w
    for i in range(n):
        W[i, i] = 1.0 - W[i].sum()
    return W


def stochasticity_defect(W: np.ndarray) -> float:
    """Largest deviation of any row or column sum from 1."""
    rows = np.abs(W.sum(axis=1) - 1.0).max()
    cols = np.abs(W.sum(axis=0) - 1.0).max()
    return float(max(rows, cols))


def threshold_graph(W: np.ndarray, gamma: float) -> set[Edge]:
    """Directed edges (j, i) for every entry w_ij above the threshold."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    n = W.shape[0]
    return {(j, i) for i in range(n) for j in range(n) if W[i, j] > gamma}


def default_gamma(n: int) -> float:
    """Threshold below the Metropolis-Hastings entry floor 1/n."""
    return 1.0 / (2.0 * n)


@dataclass(frozen=True)
class StaticSchedule:
    """The same edge set at every round."""

    n: int
    edges: frozenset[Edge]
    window: int = 1

    def edges_at(self, t: int) -> frozenset[Edge]:
        return self.edges


@dataclass(frozen=True)
class PeriodicSchedule:
    """Cycle through a fixed tuple of edge sets, one per round."""

    n: int
    steps: tuple[frozenset[Edge], ...]
    window: int = 0  # 0 resolves to the period

    def __post_init__(self):
        if not self.steps:
            raise ValueError("periodic schedule needs at least one step")
        if self.window == 0:
            object.__setattr__(self, "window", len(self.steps))

    def edges_at(self, t: int) -> frozenset[Edge]:
        return self.steps[(t - 1) % len(self.steps)]


@dataclass(frozen=True)
class RandomSchedule:
    """Per-round Bernoulli edges with window connectivity enforced.

    Each potential edge appears independently with ``edge_probability``.
    On the last round of every window the union over the window is
    checked; if disconnected, a seeded chain across its components is
    added, so every window union is connected by construction.
    """

    n: int
    edge_probability: float
    window: int
    seed: int

    def __post_init__(self):
        if not 0.0 <= self.edge_probability <= 1.0:
            raise ValueError("edge probability outside [0, 1]")
        if self.window < 1:
            raise ValueError("window must be positive")

    def _pairs(self) -> list[Edge]:
        return [(i, j) for i in range(self.n) for j in range(i + 1, self.n)]

    def _raw_edges(self, t: int) -> frozenset[Edge]:
        pairs = self._pairs()
        return frozenset(
            pair
            for k, pair in enumerate(pairs)
            if unit_float(mix64(self.seed, STREAM_EDGES, t, k)) < self.edge_probability
        )

    def edges_at(self, t: int) -> frozenset[Edge]:
        edges = self._raw_edges(t)
        w, offset = divmod(t - 1, self.window)
        if offset == self.window - 1:
            union: set[Edge] = set()
            for tau in range(w * self.window + 1, (w + 1) * self.window + 1):
                union |= self._raw_edges(tau)
            if not is_connected(union, self.n):
                components = connected_components(union, self.n)
                order = sorted(
                    range(len(components)),
                    key=lambda k: mix64(self.seed, STREAM_REPAIR, w, k),
                )
                reps = [components[k][0] for k in order]
                extra = {
                    (min(a, b), max(a, b)) for a, b in zip(reps, reps[1:])
                }
                edges = edges | extra
        return edges


GraphSchedule = StaticSchedule | PeriodicSchedule | RandomSchedule


@dataclass(frozen=True)
class ConnectivityReport:
    passed: bool
    windows_checked: int
    failing_window: int | None = None
    failing_nodes: tuple[int, ...] = ()

    def __str__(self) -> str:
        if self.passed:
            return f"window connectivity: pass ({self.windows_checked} windows)"
        return (
            f"window connectivity: FAIL at window {self.failing_window} "
            f"(components led by {list(self.failing_nodes)})"
        )


def check_window_connectivity(schedule: GraphSchedule, horizon: int) -> ConnectivityReport:
    """Verify that every window's union graph over the horizon is connected.

    The horizon counts rounds 1..horizon and must be a multiple of the
    schedule window.
    """
    B = schedule.window
    if horizon % B != 0:
        raise ValueError(f"horizon {horizon} is not a multiple of the window {B}")
    windows = horizon // B
    for w in range(windows):
        union: set[Edge] = set()
        for t in range(w * B + 1, (w + 1) * B + 1):
            union |= schedule.edges_at(t)
        if not is_connected(union, schedule.n):
            leads = tuple(c[0] for c in connected_components(union, schedule.n))
            return ConnectivityReport(False, windows, w, leads)
    return ConnectivityReport(True, windows)


def mixing_rows(W: np.ndarray) -> list[list[tuple[int, float]]]:
    """Sparse row view of a mixing matrix in ascending column order.

    The protocol engine reduces neighbor sums in this fixed order so that
    results are bit-identical regardless of evaluation parallelism.
    """
    n = W.shape[0]
    return [
        [(k, float(W[j, k])) for k in range(n) if W[j, k] != 0.0] for j in range(n)
    ]


def neighbor_lists(edges: Iterable[Edge], n: int) -> list[list[int]]:
    out: list[list[int]] = [[] for _ in range(n)]
    for i, j in edges:
        out[i].append(j)
        out[j].append(i)
    for row in out:
        row.sort()
    return out

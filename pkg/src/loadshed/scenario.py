"""Scenario configuration, deterministic generation, runs, and reports.

A scenario is a single JSON document (version 1) fully describing one
load-shedding problem and the runtime that solves it: loads and regions,
the deficit, the communication schedule, step sizes, the per-region
deficit estimator, and the stopping setup.  Identical configs produce
byte-identical traces.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_left
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Iterable, Sequence

from .criticality import (
    Ccf,
    ConvexCombiner,
    CriticalLoad,
    Load,
    Region,
    SurrogateCcf,
    build_ccf,
    eval_ccf,
    min_gap,
    resolve_loads,
)
from .netgraph import (
    GraphSchedule,
    PeriodicSchedule,
    RandomSchedule,
    StaticSchedule,
    check_window_connectivity,
    connected_components,
    is_connected,
    metropolis_weights,
    normalize_edges,
    stochasticity_defect,
)
from .oracle import ContinuousSolution, continuous_solution, greedy_shed_set
from .protocol import (
    Estimator,
    ExactSplit,
    NoisySplit,
    ProtocolInstance,
    RunTrace,
    StepSchedule,
    TraceEstimator,
    run_protocol,
)
from .seeding import (
    STREAM_EDGES,
    STREAM_NATURE,
    STREAM_POWER,
    STREAM_REGION,
    STREAM_REPAIR,
    mix64,
    unit_float,
)

CONFIG_VERSION = 1

# generated scenarios reject power draws that put the surrogate root
# within this fraction of a ramp of a breakpoint; such degenerate
# instances have an ill-conditioned threshold (an exact cumulative hit
# is a measure-zero coincidence) and stall the quantized protocol state
DEGENERACY_MARGIN = 0.3

CRITICALITY_GRID = 10_000  # nature criticalities are multiples of 1e-4


class ScenarioError(ValueError):
    """Configuration failed to parse or validate."""


@dataclass(frozen=True)
class ContinuousRegion:
    id: int
    capacity: float
    criticality: int


@dataclass(frozen=True)
class GraphSpec:
    """Declarative communication-schedule description.

    kinds: ``static`` (fixed edge list), ``periodic`` (cycle of edge
    lists), ``random`` (Bernoulli edges, window-repaired).  Edges name
    region ids, not indices.
    """

    kind: str
    edges: tuple[tuple[int, int], ...] = ()
    steps: tuple[tuple[tuple[int, int], ...], ...] = ()
    edge_probability: float = 0.5
    window: int = 1


@dataclass(frozen=True)
class EstimatorSpec:
    """Deficit-estimator description: exact_split | noisy_split | trace."""

    kind: str
    rows: tuple[tuple[float, ...], ...] = ()


@dataclass(frozen=True)
class ScenarioConfig:
    version: int
    mode: str  # "discrete" | "continuous"
    deficit: float
    seed: int
    graph: GraphSpec
    step: StepSchedule
    estimator: EstimatorSpec
    max_rounds: int
    convergence_window: int | None  # None: fixed-horizon run
    combiner_weight: float = 0.5
    ramp_width: float | None = None  # None: smallest criticality gap
    x0: float = 0.0  # initial threshold estimate at every region
    regions: tuple[Region, ...] = ()
    continuous_regions: tuple[ContinuousRegion, ...] = ()


@dataclass(frozen=True)
class OracleSummary:
    z_star: float
    z_hat: float
    shed_total: float
    shed_ids: tuple[int, ...]
    greedy_total: float
    greedy_ids: tuple[int, ...]
    boundary_case: bool


@dataclass(frozen=True)
class SummaryReport:
    mode: str
    oracle: OracleSummary | None
    oracle_continuous: ContinuousSolution | None
    distributed_z_star: float | None
    per_region_final: tuple[float, ...]
    distributed_shed_total: float | None
    rounds: int
    converged: bool
    certificate_digest: dict

    def to_json(self) -> str:
        def default(obj):
            if hasattr(obj, "__dataclass_fields__"):
                return asdict(obj)
            if isinstance(obj, float) and math.isinf(obj):
                return "inf"
            raise TypeError(f"not serializable: {obj!r}")

        return json.dumps(asdict(self), default=default, sort_keys=True, indent=2)


# ---------------------------------------------------------------------------
# assembly helpers


def resolved_loads(config: ScenarioConfig) -> tuple[CriticalLoad, ...]:
    return resolve_loads(config.regions, ConvexCombiner(config.combiner_weight))


def regional_loads(config: ScenarioConfig) -> tuple[tuple[CriticalLoad, ...], ...]:
    combiner = ConvexCombiner(config.combiner_weight)
    return tuple(
        resolve_loads((region,), combiner) for region in config.regions
    )


def resolve_ramp_width(config: ScenarioConfig) -> float:
    if config.ramp_width is not None:
        return config.ramp_width
    crits = [l.criticality for l in resolved_loads(config)]
    if len(set(crits)) < 2:
        return 1.0
    return min_gap(crits)


def region_ids(config: ScenarioConfig) -> tuple[int, ...]:
    if config.mode == "continuous":
        return tuple(r.id for r in config.continuous_regions)
    return tuple(r.id for r in config.regions)


def build_schedule(config: ScenarioConfig) -> GraphSchedule:
    ids = region_ids(config)
    index = {rid: k for k, rid in enumerate(ids)}
    n = len(ids)
    spec = config.graph

    def to_indices(edges: Iterable[tuple[int, int]]) -> frozenset:
        try:
            pairs = [(index[i], index[j]) for i, j in edges]
        except KeyError as exc:
            raise ScenarioError(f"graph references unknown region id {exc.args[0]}")
        return normalize_edges(pairs, n)

    if spec.kind == "static":
        return StaticSchedule(n, to_indices(spec.edges), max(1, spec.window))
    if spec.kind == "periodic":
        return PeriodicSchedule(
            n, tuple(to_indices(step) for step in spec.steps), spec.window
        )
    if spec.kind == "random":
        return RandomSchedule(n, spec.edge_probability, spec.window, config.seed)
    raise ScenarioError(f"unknown graph kind {spec.kind!r}")


def build_estimator(config: ScenarioConfig) -> Estimator:
    n = len(region_ids(config))
    spec = config.estimator
    if spec.kind == "exact_split":
        return ExactSplit(config.deficit, n)
    if spec.kind == "noisy_split":
        return NoisySplit(config.deficit, n, config.seed)
    if spec.kind == "trace":
        return TraceEstimator(spec.rows)
    raise ScenarioError(f"unknown estimator kind {spec.kind!r}")


def build_instance(config: ScenarioConfig) -> ProtocolInstance:
    """Assemble the runtime inputs for a discrete or continuous scenario.

    Continuous regions enter the same engine as single-breakpoint CCFs
    with a unit-width ramp; their surrogate is the continuous CCF itself.
    """
    if config.mode == "continuous":
        surrogates = tuple(
            SurrogateCcf(Ccf((float(r.criticality),), (r.capacity,)), 1.0)
            for r in config.continuous_regions
        )
        crits = tuple((float(r.criticality),) for r in config.continuous_regions)
        ramp_width = 1.0
    else:
        per_region = regional_loads(config)
        ramp_width = resolve_ramp_width(config)
        surrogates = tuple(
            SurrogateCcf(build_ccf((l.power, l.criticality) for l in loads), ramp_width)
            for loads in per_region
        )
        crits = tuple(
            tuple(sorted(l.criticality for l in loads)) for loads in per_region
        )
    return ProtocolInstance(
        region_criticalities=crits,
        surrogates=surrogates,
        ramp_width=ramp_width,
        schedule=build_schedule(config),
        step=config.step,
        estimator=build_estimator(config),
        convergence_window=config.convergence_window,
        max_rounds=config.max_rounds,
        x0=config.x0,
    )


# ---------------------------------------------------------------------------
# validation


def validate(config: ScenarioConfig) -> None:
    if config.version != CONFIG_VERSION:
        raise ScenarioError(f"unsupported config version {config.version}")
    if config.mode not in ("discrete", "continuous"):
        raise ScenarioError(f"unknown mode {config.mode!r}")
    if config.deficit < 0:
        raise ScenarioError(f"deficit {config.deficit} is negative")
    if config.max_rounds < 1:
        raise ScenarioError("max_rounds must be positive")
    if config.convergence_window is not None and config.convergence_window < 1:
        raise ScenarioError("convergence window must be positive or null")

    ids = region_ids(config)
    if len(set(ids)) != len(ids):
        raise ScenarioError("region ids must be unique")

    if config.mode == "continuous":
        if not config.continuous_regions:
            raise ScenarioError("continuous mode needs continuous_regions")
        for r in config.continuous_regions:
            if r.capacity < 0:
                raise ScenarioError(f"region {r.id}: negative capacity {r.capacity}")
            if not (isinstance(r.criticality, int) and r.criticality >= 1):
                raise ScenarioError(
                    f"region {r.id}: continuous criticality must be a positive "
                    f"integer, got {r.criticality!r}"
                )
        total = math.fsum(r.capacity for r in config.continuous_regions)
        if total < config.deficit:
            raise ScenarioError(
                f"infeasible: total capacity {total} is below the deficit "
                f"{config.deficit}; the load set must cover the deficit"
            )
    else:
        if not config.regions:
            raise ScenarioError("discrete mode needs regions")
        loads = resolved_loads(config)  # validates partition and ranges
        total = math.fsum(l.power for l in loads)
        if total < config.deficit:
            raise ScenarioError(
                f"infeasible: total sheddable power {total} is below the "
                f"deficit {config.deficit}; the load set must cover the deficit"
            )
        if config.ramp_width is not None:
            crits = [l.criticality for l in loads]
            if len(set(crits)) >= 2:
                gap = min_gap(crits)
                # same few-ulp slack as the surrogate constructor
                if config.ramp_width > gap * (1.0 + 1e-12):
                    raise ScenarioError(
                        f"ramp width {config.ramp_width} exceeds the smallest "
                        f"criticality gap {gap}; the surrogate would disagree "
                        f"with the step function at breakpoints"
                    )
            elif config.ramp_width <= 0:
                raise ScenarioError("ramp width must be positive")

    # schedule sanity: buildable, and unions over one horizon window connect
    schedule = build_schedule(config)
    B = schedule.window
    horizon = max(B, (min(config.max_rounds, 50 * B) // B) * B)
    report = check_window_connectivity(schedule, horizon)
    if not report.passed:
        raise ScenarioError(
            f"communication schedule fails window connectivity at window "
            f"{report.failing_window} (window {B})"
        )


# ---------------------------------------------------------------------------
# JSON serialization


def _config_to_dict(config: ScenarioConfig) -> dict:
    doc: dict = {
        "version": config.version,
        "mode": config.mode,
        "deficit": config.deficit,
        "seed": config.seed,
        "combiner_weight": config.combiner_weight,
        "ramp_width": "auto" if config.ramp_width is None else config.ramp_width,
        "graph": {
            "kind": config.graph.kind,
            "window": config.graph.window,
        },
        "step": {
            "gain": config.step.gain,
            "offset": config.step.offset,
            "exponent": config.step.exponent,
        },
        "estimator": {"kind": config.estimator.kind},
        "max_rounds": config.max_rounds,
        "convergence_window": config.convergence_window,
        "x0": config.x0,
    }
    if config.graph.kind == "static":
        doc["graph"]["edges"] = [list(e) for e in config.graph.edges]
    elif config.graph.kind == "periodic":
        doc["graph"]["steps"] = [[list(e) for e in step] for step in config.graph.steps]
    elif config.graph.kind == "random":
        doc["graph"]["edge_probability"] = config.graph.edge_probability
    if config.estimator.kind == "trace":
        doc["estimator"]["rows"] = [list(r) for r in config.estimator.rows]
    if config.mode == "continuous":
        doc["regions"] = [
            {"id": r.id, "capacity": r.capacity, "criticality": r.criticality}
            for r in config.continuous_regions
        ]
    else:
        doc["regions"] = [
            {
                "id": region.id,
                "criticality": region.region_criticality,
                "loads": [
                    {
                        "id": load.id,
                        "power": load.power,
                        "nature_criticality": load.nature_criticality,
                    }
                    for load in region.loads
                ],
            }
            for region in config.regions
        ]
    return doc


def dump_scenario(config: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(dumps_scenario(config), encoding="utf-8")


def dumps_scenario(config: ScenarioConfig) -> str:
    return json.dumps(_config_to_dict(config), indent=2, sort_keys=True) + "\n"


def _require(doc: dict, key: str, context: str):
    if key not in doc:
        raise ScenarioError(f"missing field {key!r} in {context}")
    return doc[key]


def _config_from_dict(doc: dict) -> ScenarioConfig:
    mode = _require(doc, "mode", "config")
    graph_doc = _require(doc, "graph", "config")
    kind = _require(graph_doc, "kind", "graph")
    graph = GraphSpec(
        kind=kind,
        edges=tuple(tuple(e) for e in graph_doc.get("edges", ())),
        steps=tuple(
            tuple(tuple(e) for e in step) for step in graph_doc.get("steps", ())
        ),
        edge_probability=graph_doc.get("edge_probability", 0.5),
        window=graph_doc.get("window", 1),
    )
    step_doc = doc.get("step", {})
    step = StepSchedule(
        gain=step_doc.get("gain", 1.0),
        offset=step_doc.get("offset", 1.0),
        exponent=step_doc.get("exponent", 1.0),
    )
    est_doc = doc.get("estimator", {"kind": "exact_split"})
    estimator = EstimatorSpec(
        kind=_require(est_doc, "kind", "estimator"),
        rows=tuple(tuple(r) for r in est_doc.get("rows", ())),
    )
    ramp = doc.get("ramp_width", "auto")
    regions: tuple[Region, ...] = ()
    continuous: tuple[ContinuousRegion, ...] = ()
    region_docs = _require(doc, "regions", "config")
    if mode == "continuous":
        continuous = tuple(
            ContinuousRegion(
                id=_require(r, "id", "region"),
                capacity=_require(r, "capacity", "region"),
                criticality=_require(r, "criticality", "region"),
            )
            for r in region_docs
        )
    else:
        regions = tuple(
            Region(
                id=_require(r, "id", "region"),
                region_criticality=_require(r, "criticality", "region"),
                loads=tuple(
                    Load(
                        id=_require(l, "id", "load"),
                        power=_require(l, "power", "load"),
                        nature_criticality=_require(l, "nature_criticality", "load"),
                        region_id=r["id"],
                    )
                    for l in _require(r, "loads", "region")
                ),
            )
            for r in region_docs
        )
    config = ScenarioConfig(
        version=_require(doc, "version", "config"),
        mode=mode,
        deficit=_require(doc, "deficit", "config"),
        seed=doc.get("seed", 0),
        graph=graph,
        step=step,
        estimator=estimator,
        max_rounds=doc.get("max_rounds", 20_000),
        convergence_window=doc.get("convergence_window", 50),
        combiner_weight=doc.get("combiner_weight", 0.5),
        ramp_width=None if ramp == "auto" else float(ramp),
        x0=doc.get("x0", 0.0),
        regions=regions,
        continuous_regions=continuous,
    )
    validate(config)
    return config


def load_scenario(path: str | Path) -> ScenarioConfig:
    text = Path(path).read_text(encoding="utf-8")
    return loads_scenario(text)


def loads_scenario(text: str) -> ScenarioConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(
            f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(doc, dict):
        raise ScenarioError("config root must be a JSON object")
    return _config_from_dict(doc)


# ---------------------------------------------------------------------------
# deterministic generation


def generate_scenario(
    n_regions: int,
    loads_per_region: int,
    seed: int,
    deficit_fraction: float = 0.4,
    power_range: tuple[float, float] = (0.5, 1.5),
    graph: str = "line",
    combiner_weight: float = 0.5,
    max_rounds: int = 45_000,
    convergence_window: int | None = None,
) -> ScenarioConfig:
    """Deterministically generate a discrete scenario from a seed.

    Nature criticalities are drawn on the 1e-4 grid and resampled until
    every combined criticality is distinct (tracked on the combined-value
    grid, so distinctness survives floating-point rounding).  Power draws
    are rejected while the deficit lands within DEGENERACY_MARGIN ramps of
    a breakpoint; such near-boundary deficits make the threshold
    ill-conditioned.  The step gain is regions/total so the drift scale is
    invariant to the power units, and the offset tempers the first steps
    so the estimates do not overshoot the root.  The default is a
    fixed-horizon run: convergence is judged from the closing stretch of
    unchanged cutoffs rather than an early-stopping rule, which on
    switching graphs can freeze on transient states.
    """
    if n_regions < 1 or loads_per_region < 1:
        raise ValueError("counts must be positive")
    if combiner_weight != 0.5:
        raise ValueError("the generator assumes the default half-half combiner")
    grid = CRITICALITY_GRID
    region_grid_values = [
        int(unit_float(mix64(seed, STREAM_REGION, j)) * (grid + 1))
        for j in range(n_regions)
    ]
    # distinctness is tracked on the integer half-grid of the combined
    # value (c_nature + c_region in grid units), so two loads that agree
    # in exact arithmetic can never slip through as distinct floats
    taken: set[int] = set()
    nature: list[list[float]] = []
    combined: list[list[float]] = []
    for j in range(n_regions):
        row_n, row_c = [], []
        for i in range(loads_per_region):
            gi = j * loads_per_region + i
            attempt = 0
            while True:
                cn_i = int(unit_float(mix64(seed, STREAM_NATURE, gi, attempt)) * (grid + 1))
                key = cn_i + region_grid_values[j]
                if key not in taken:
                    taken.add(key)
                    row_n.append(cn_i / grid)
                    row_c.append(0.5 * (cn_i / grid) + 0.5 * (region_grid_values[j] / grid))
                    break
                attempt += 1
        nature.append(row_n)
        combined.append(row_c)

    # reject power draws that land the deficit too close to a breakpoint
    chosen = None
    for sub_draw in range(1000):
        powers = [
            [
                power_range[0]
                + (power_range[1] - power_range[0])
                * unit_float(mix64(seed, STREAM_POWER, sub_draw, j * loads_per_region + i))
                for i in range(loads_per_region)
            ]
            for j in range(n_regions)
        ]
        total = math.fsum(p for row in powers for p in row)
        deficit = deficit_fraction * total
        pairs = [
            (powers[j][i], combined[j][i])
            for j in range(n_regions)
            for i in range(loads_per_region)
        ]
        ccf = build_ccf(pairs)
        idx = bisect_left(ccf.cumulative, deficit)
        below = ccf.cumulative[idx - 1] if idx else 0.0
        frac = (deficit - below) / (ccf.cumulative[idx] - below)
        if DEGENERACY_MARGIN <= frac <= 1.0 - DEGENERACY_MARGIN:
            chosen = (powers, total, deficit)
            break
    if chosen is None:
        raise RuntimeError(f"seed {seed}: no admissible power draw found")
    powers, total, deficit = chosen

    regions = tuple(
        Region(
            id=j + 1,
            region_criticality=region_grid_values[j] / grid,
            loads=tuple(
                Load(
                    id=j * loads_per_region + i + 1,
                    power=powers[j][i],
                    nature_criticality=nature[j][i],
                    region_id=j + 1,
                )
                for i in range(loads_per_region)
            ),
        )
        for j in range(n_regions)
    )

    ids = [r.id for r in regions]
    if graph == "line":
        spec = GraphSpec(
            kind="static",
            edges=tuple((ids[k], ids[k + 1]) for k in range(len(ids) - 1)),
            window=1,
        )
    elif graph == "line-periodic":
        line = [(ids[k], ids[k + 1]) for k in range(len(ids) - 1)]
        odd = tuple(line[0::2])
        even = tuple(line[1::2]) or odd
        spec = GraphSpec(
            kind="periodic",
            steps=(tuple(line), odd, tuple(line), even),
            window=4,
        )
    elif graph == "random-periodic":
        spec = GraphSpec(
            kind="periodic",
            steps=_random_periodic_steps(seed, ids, period=12, window=4),
            window=4,
        )
    elif graph == "random":
        spec = GraphSpec(kind="random", edge_probability=0.45, window=2)
    else:
        raise ValueError(f"unknown graph family {graph!r}")

    return ScenarioConfig(
        version=CONFIG_VERSION,
        mode="discrete",
        deficit=deficit,
        seed=seed,
        graph=spec,
        step=StepSchedule(gain=n_regions / total, offset=50.0, exponent=1.0),
        estimator=EstimatorSpec(kind="exact_split"),
        max_rounds=max_rounds,
        convergence_window=convergence_window,
        combiner_weight=combiner_weight,
        ramp_width=None,
        regions=regions,
    )


def _random_periodic_steps(
    seed: int,
    ids: Sequence[int],
    period: int,
    window: int,
    edge_probability: float = 0.6,
) -> tuple[tuple[tuple[int, int], ...], ...]:
    """Seed-derived periodic schedule with connected window unions.

    Edges are drawn per step with the given probability; if a window's
    union is disconnected, a chain across its components is appended to
    the window's last step.
    """
    n = len(ids)
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
    steps: list[set[tuple[int, int]]] = []
    for t in range(period):
        steps.append(
            {
                pair
                for k, pair in enumerate(pairs)
                if unit_float(mix64(seed, STREAM_EDGES, t, k)) < edge_probability
            }
        )
    for w0 in range(0, period, window):
        union: set[tuple[int, int]] = set()
        for s in steps[w0 : w0 + window]:
            union |= s
        if not is_connected(union, n):
            components = connected_components(union, n)
            order = sorted(
                range(len(components)),
                key=lambda k: mix64(seed, STREAM_REPAIR, w0, k),
            )
            reps = [components[k][0] for k in order]
            steps[w0 + window - 1] |= {
                (min(a, b), max(a, b)) for a, b in zip(reps, reps[1:])
            }
    return tuple(
        tuple(sorted((ids[a], ids[b]) for a, b in step)) for step in steps
    )


# ---------------------------------------------------------------------------
# runs and reports


def oracle_summary(config: ScenarioConfig) -> OracleSummary:
    loads = resolved_loads(config)
    ramp_width = resolve_ramp_width(config)
    greedy = greedy_shed_set(loads, config.deficit, ramp_width)
    ccf = build_ccf((l.power, l.criticality) for l in loads)
    shed_ids = tuple(l.id for l in loads if l.criticality <= greedy.z_star)
    return OracleSummary(
        z_star=greedy.z_star,
        z_hat=greedy.z_hat,
        shed_total=eval_ccf(ccf, greedy.z_star),
        shed_ids=shed_ids,
        greedy_total=greedy.total_shed,
        greedy_ids=greedy.shed_ids,
        boundary_case=greedy.boundary_case,
    )


def run_scenario(config: ScenarioConfig, record_trace: bool = True) -> tuple[RunTrace, SummaryReport]:
    """Oracle solve plus full distributed run of a discrete scenario."""
    if config.mode != "discrete":
        raise ScenarioError("run_scenario handles discrete mode; use run_continuous")
    oracle = oracle_summary(config)
    inst = build_instance(config)
    trace = run_protocol(inst, record_trace=record_trace)
    z_dist = trace.z_star_distributed
    per_region = regional_loads(config)
    shed_total = None
    if math.isfinite(z_dist):
        shed_total = math.fsum(
            load.power
            for loads in per_region
            for load in loads
            if load.criticality <= z_dist
        )
    report = SummaryReport(
        mode="discrete",
        oracle=oracle,
        oracle_continuous=None,
        distributed_z_star=z_dist if math.isfinite(z_dist) else None,
        per_region_final=trace.final_z,
        distributed_shed_total=shed_total,
        rounds=trace.rounds,
        converged=trace.converged,
        certificate_digest=certificate_digest(config, inst),
    )
    return trace, report


def run_continuous(config: ScenarioConfig, record_trace: bool = True) -> tuple[RunTrace, SummaryReport]:
    """Closed-form solve plus fixed-horizon distributed run (continuous mode).

    Each region applies the fill rule to its own final threshold estimate;
    the reported shed total sums those local decisions.
    """
    if config.mode != "continuous":
        raise ScenarioError("run_continuous handles continuous mode")
    regions = [(r.capacity, float(r.criticality)) for r in config.continuous_regions]
    closed_form = continuous_solution(regions, config.deficit)
    inst = build_instance(config)
    trace = run_protocol(inst, record_trace=record_trace)
    shed = continuous_shed_from_estimates(config, trace.final_x)
    report = SummaryReport(
        mode="continuous",
        oracle=None,
        oracle_continuous=closed_form,
        distributed_z_star=math.fsum(trace.final_x) / len(trace.final_x),
        per_region_final=trace.final_x,
        distributed_shed_total=math.fsum(shed),
        rounds=trace.rounds,
        converged=trace.converged,
        certificate_digest=certificate_digest(config, inst),
    )
    return trace, report


def continuous_shed_from_estimates(
    config: ScenarioConfig, estimates: Sequence[float]
) -> tuple[float, ...]:
    """Apply the continuous fill rule region by region to local estimates."""
    shed = []
    for region, z in zip(config.continuous_regions, estimates):
        floor = math.floor(z)
        if region.criticality <= floor:
            shed.append(region.capacity)
        elif floor < region.criticality <= math.ceil(z):
            shed.append(region.capacity * (z - floor))
        else:
            shed.append(0.0)
    return tuple(shed)


def certificate_digest(config: ScenarioConfig, inst: ProtocolInstance) -> dict:
    """Small always-on sanity digest attached to every report."""
    schedule = inst.schedule
    B = schedule.window
    horizon = max(B, (min(inst.max_rounds, 20 * B) // B) * B)
    connectivity = check_window_connectivity(schedule, horizon)
    defect = 0.0
    seen = set()
    for t in range(1, min(horizon, 32) + 1):
        edges = schedule.edges_at(t)
        if edges in seen:
            continue
        seen.add(edges)
        W = metropolis_weights(edges, len(inst.region_criticalities))
        defect = max(defect, stochasticity_defect(W))
    return {
        "window": B,
        "window_connectivity": connectivity.passed,
        "stochasticity_defect": defect,
        "ramp_width": inst.ramp_width,
        "step_gain": inst.step.gain,
    }


# ---------------------------------------------------------------------------
# trace emission


def emit_trace(trace: RunTrace, path: str | Path, region_ids: Sequence[int] | None = None) -> None:
    """Write the per-round records as CSV.

    Columns: t, eta, region, x, zeta, z_min, alpha, p.  Floats carry 12
    significant digits; the infinity sentinel serializes as ``inf``.
    """
    if not trace.recorded or trace.rounds == 0:
        raise ValueError("trace has no recorded rounds")
    n = trace.x.shape[1]
    ids = list(region_ids) if region_ids is not None else list(range(1, n + 1))
    if len(ids) != n:
        raise ValueError(f"{len(ids)} region ids for {n} regions")
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            fh.write("t,eta,region,x,zeta,z_min,alpha,p\n")
            for r in range(trace.rounds):
                t = int(trace.t[r])
                eta = trace.eta[r]
                for j in range(n):
                    fh.write(
                        f"{t},{eta:.12g},{ids[j]},{trace.x[r, j]:.12g},"
                        f"{trace.zeta[r, j]:.12g},{trace.z_min[r, j]:.12g},"
                        f"{trace.alpha[r, j]:.12g},{trace.p[r, j]:.12g}\n"
                    )
    except OSError as exc:
        raise OSError(f"failed writing trace to {path}: {exc}") from exc

"""Experiment harness: reproducible occupancy, dissemination, model and
comparison runs.

Every experiment is fully determined by an ExperimentConfig and its
master seed. Per-run child seeds come from a splitmix-style mix of
(master, run index), so runs are independent of each other and of how
many run in parallel; reports are byte-for-byte reproducible.

The network size is not a config key: clique and outdegree networks use
five nodes per startup item (the standard geometry keeps items at one
fifth of the would-be total capacity), grids use side * side nodes.
"""

from __future__ import annotations

import multiprocessing
import random
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from . import kernels
from .metrics import (
    ComparisonSeries,
    PairProbs,
    RoundMetrics,
    RunEnsemble,
    aggregate,
    compare,
    estimate_p_drop_statistical,
    estimate_p_inx,
)
from .model import init_model, run_model_round
from .pairwise import (
    GossipParams,
    ProtocolVariant,
    TransitionMatrix,
    build_matrix,
    p_drop_general,
    p_drop_newscast,
    p_drop_shuffle_uniform,
    p_select,
)
from .protocols import NetworkState, Protocol, init_network, insert_item, run_startup
from .topology import (
    Topology,
    TopologyKind,
    build_clique,
    build_grid,
    build_random_outdegree,
)

__all__ = [
    "ExperimentConfig",
    "OccupancyReport",
    "DisseminationReport",
    "ModelReport",
    "ComparisonReport",
    "child_seed",
    "build_topology",
    "run_occupancy_experiment",
    "run_dissemination_experiment",
    "run_model_experiment",
    "run_comparison_experiment",
]

NODES_PER_ITEM = 5

P_DROP_MODES = ("analytic", "measured")

# occupancy pre-pass inside a comparison: rounds measured and seed salt
PROBE_ROUNDS = 200
PROBE_SALT = 0x0CC0

# disabled optional kernel outputs
_NO_OCC = np.zeros((0, 4), dtype=np.int64)
_NO_SERIES = np.zeros(0, dtype=np.int64)
_NO_REC_NODES = np.zeros((0, 3), dtype=np.int32)
_NO_REC_PRE = np.zeros((0, 2, 1), dtype=np.uint8)


@dataclass(frozen=True, kw_only=True)
class ExperimentConfig:
    """Everything a run needs. seed is mandatory; the rest has defaults
    mirroring the standard cache geometry experiments."""

    params: GossipParams
    seed: int
    protocol: Protocol = Protocol.SHUFFLE
    topology: TopologyKind = TopologyKind.CLIQUE
    grid_side: int | None = None
    outdegree: int = 4
    p_loss: float = 0.0
    startup_rounds: int = 1000
    measure_rounds: int = 1000
    runs: int = 100
    p_drop_mode: str = "analytic"
    p_inx: float | None = None

    def __post_init__(self) -> None:
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if not 0.0 <= self.p_loss <= 1.0:
            raise ValueError(f"p_loss must be in [0, 1], got {self.p_loss}")
        if self.startup_rounds < 0:
            raise ValueError("startup_rounds must be >= 0")
        if self.measure_rounds < 1:
            raise ValueError("measure_rounds must be >= 1")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.p_drop_mode not in P_DROP_MODES:
            raise ValueError(
                f"p_drop_mode must be one of {P_DROP_MODES}, got {self.p_drop_mode!r}"
            )
        if self.p_inx is not None and not 0.0 <= self.p_inx <= 1.0:
            raise ValueError(f"p_inx must be in [0, 1], got {self.p_inx}")
        if self.topology is TopologyKind.GRID:
            if self.grid_side is None or self.grid_side < 2:
                raise ValueError("grid topology needs grid_side >= 2")
        if self.topology is TopologyKind.RANDOM_OUTDEGREE and self.outdegree < 1:
            raise ValueError("outdegree must be >= 1")

    @property
    def node_count(self) -> int:
        if self.topology is TopologyKind.GRID:
            return self.grid_side * self.grid_side
        return NODES_PER_ITEM * self.params.n


def child_seed(master: int, index: int) -> int:
    """Independent 31-bit seed for run `index` under `master`.

    Splitmix-style: advance the master by a fixed odd constant per index,
    then scramble through two xor-multiply finalization steps. Any
    (master, index) pair maps to its seed directly, so runs can execute
    in any order or in parallel without changing their draws.
    """
    mask = (1 << 64) - 1
    z = (master + 0x9E3779B97F4A7C15 * (index + 1)) & mask
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
    z = z ^ (z >> 31)
    return z & 0x7FFFFFFF


def build_topology(config: ExperimentConfig, rng: random.Random) -> Topology:
    """Topology for one run. Outdegree graphs are redrawn from the run's
    rng, so every run gossips over a fresh random graph."""
    if config.topology is TopologyKind.CLIQUE:
        return build_clique(config.node_count)
    if config.topology is TopologyKind.GRID:
        return build_grid(config.grid_side)
    return build_random_outdegree(config.node_count, config.outdegree, rng)


def _prepared_network(config: ExperimentConfig, rng: random.Random) -> NetworkState:
    topo = build_topology(config, rng)
    state = init_network(topo, config.params, rng)
    run_startup(state, config.startup_rounds, config.protocol, rng)
    return state


@dataclass(frozen=True)
class OccupancyReport:
    """Pair-state statistics of one long measured run."""

    config: ExperimentConfig
    per_round: list[PairProbs]
    pooled: PairProbs
    p_inx: float
    p_drop: float


def run_occupancy_experiment(config: ExperimentConfig) -> OccupancyReport:
    """One run: startup without loss, then measure_rounds lossy rounds
    with every exchange classified against all startup items. P_inx and
    P_drop come from the pooled counts.

    Only the shuffle protocol is supported: the statistical P_drop
    estimate is the shuffle displacement form."""
    if config.protocol is not Protocol.SHUFFLE:
        raise ValueError("occupancy measurement is defined for the shuffle protocol")
    rng = random.Random(child_seed(config.seed, 0))
    state = _prepared_network(config, rng)
    n = config.params.n
    occ = np.zeros((config.measure_rounds, 4), dtype=np.int64)
    clique, offsets, flat = (
        state.topology.complete,
        *state.topology.to_csr(),
    )
    kernels.gossip_rounds(
        state.caches, state.sizes, state.masks, state.seen,
        config.params.c, config.params.s, config.protocol.kernel_code,
        clique, offsets, flat,
        config.p_loss, config.measure_rounds, rng.getrandbits(31),
        0, n, occ,
        -1, False, _NO_SERIES, _NO_SERIES,
        _NO_REC_NODES, _NO_REC_PRE,
    )
    per_round = [
        PairProbs.from_counts(
            int(row[0]), int(row[1]), int(row[2]), int(row[3]) * n
        )
        for row in occ
    ]
    totals = occ.sum(axis=0)
    pooled = PairProbs.from_counts(
        int(totals[0]), int(totals[1]), int(totals[2]), int(totals[3]) * n
    )
    p_inx = estimate_p_inx(pooled)
    p_drop = estimate_p_drop_statistical(pooled, config.params)
    return OccupancyReport(
        config=config,
        per_round=per_round,
        pooled=pooled,
        p_inx=p_inx,
        p_drop=p_drop,
    )


@dataclass(frozen=True)
class DisseminationReport:
    """Ensemble over runs that each track one freshly inserted item."""

    config: ExperimentConfig
    ensemble: RunEnsemble

    @property
    def no_successful_runs(self) -> bool:
        return self.ensemble.successful_runs == 0


def _dissemination_run(config: ExperimentConfig, index: int) -> list[RoundMetrics]:
    """One tracked-item run: warm network, insert the item at a uniform
    node, follow replication and coverage until the horizon or extinction.
    After extinction the series is padded (0 copies, final coverage)."""
    rng = random.Random(child_seed(config.seed, index))
    state = _prepared_network(config, rng)
    item = config.params.n
    node = rng.randrange(state.node_count)
    insert_item(state, item, node, rng)
    rounds = config.measure_rounds
    repl = np.zeros(rounds, dtype=np.int64)
    cov = np.zeros(rounds, dtype=np.int64)
    clique, offsets, flat = (
        state.topology.complete,
        *state.topology.to_csr(),
    )
    done, _, _ = kernels.gossip_rounds(
        state.caches, state.sizes, state.masks, state.seen,
        config.params.c, config.params.s, config.protocol.kernel_code,
        clique, offsets, flat,
        config.p_loss, rounds, rng.getrandbits(31),
        0, 0, _NO_OCC,
        item, True, repl, cov,
        _NO_REC_NODES, _NO_REC_PRE,
    )
    if done < rounds:
        repl[done:] = 0
        cov[done:] = cov[done - 1]
    out = [RoundMetrics(round=0, replication=1, coverage=1)]
    out.extend(
        RoundMetrics(round=r + 1, replication=int(repl[r]), coverage=int(cov[r]))
        for r in range(rounds)
    )
    return out


def run_dissemination_experiment(
    config: ExperimentConfig, jobs: int = 1
) -> DisseminationReport:
    runs = _map_runs(_dissemination_run, config, jobs)
    return DisseminationReport(config=config, ensemble=aggregate(runs))


@dataclass(frozen=True)
class ModelReport:
    """Ensemble over model runs plus the probabilities that drove them."""

    config: ExperimentConfig
    ensemble: RunEnsemble
    variant: ProtocolVariant
    p_select: float
    p_drop: float

    @property
    def no_successful_runs(self) -> bool:
        return self.ensemble.successful_runs == 0


def model_inputs(
    config: ExperimentConfig,
) -> tuple[ProtocolVariant, float, float, TransitionMatrix]:
    """Resolve the transition matrix the config calls for.

    Analytic mode derives P_drop from the cache geometry (shuffle
    displacement or newscast keep-step); measured mode requires p_inx in
    the config and runs it through the general displacement form. Loss is
    only modeled for the shuffle."""
    protocol = config.protocol
    if protocol is Protocol.CYCLON:
        raise ValueError("no transition matrix exists for cyclon")
    if protocol is Protocol.SHUFFLE:
        variant = (
            ProtocolVariant.SHUFFLE_LOSSY
            if config.p_loss > 0.0
            else ProtocolVariant.SHUFFLE
        )
    else:
        if config.p_loss > 0.0:
            raise ValueError(
                "newscast has no lossy transition matrix; set p_loss to 0"
            )
        variant = ProtocolVariant(protocol.value)
    q = p_select(config.params)
    if config.p_drop_mode == "measured":
        if config.p_inx is None:
            raise ValueError("p_drop_mode 'measured' needs p_inx")
        if protocol is not Protocol.SHUFFLE:
            raise ValueError("measured P_drop is a shuffle estimate")
        drop = p_drop_general(config.p_inx, q)
    elif protocol is Protocol.SHUFFLE:
        drop = p_drop_shuffle_uniform(config.params)
    else:
        drop = p_drop_newscast(config.params)
    loss = config.p_loss if variant is ProtocolVariant.SHUFFLE_LOSSY else 0.0
    return variant, q, drop, build_matrix(variant, q, drop, p_loss=loss)


def _model_run(
    config: ExperimentConfig, index: int, matrix: TransitionMatrix
) -> list[RoundMetrics]:
    seed = child_seed(config.seed, index)
    gen = np.random.default_rng(seed)
    topo = build_topology(config, random.Random(seed))
    net = init_model(topo, rng=gen)
    out = [RoundMetrics(round=0, replication=1, coverage=1)]
    rounds = config.measure_rounds
    last_cov = 1
    dead_at = None
    for r in range(rounds):
        if dead_at is not None:
            out.append(RoundMetrics(round=r + 1, replication=0, coverage=last_cov))
            continue
        run_model_round(net, matrix, gen)
        repl = net.replication()
        last_cov = net.coverage()
        out.append(RoundMetrics(round=r + 1, replication=repl, coverage=last_cov))
        if repl == 0:
            dead_at = r
    return out


def run_model_experiment(config: ExperimentConfig, jobs: int = 1) -> ModelReport:
    variant, q, drop, matrix = model_inputs(config)
    runs = _map_runs(_model_run, config, jobs, matrix)
    return ModelReport(
        config=config,
        ensemble=aggregate(runs),
        variant=variant,
        p_select=q,
        p_drop=drop,
    )


@dataclass(frozen=True)
class ComparisonReport:
    """Protocol ensemble vs model ensemble under one config."""

    config: ExperimentConfig
    protocol_ensemble: RunEnsemble
    model_ensemble: RunEnsemble
    diff: ComparisonSeries
    p_inx_used: float | None
    p_drop_used: float


def run_comparison_experiment(
    config: ExperimentConfig, jobs: int = 1
) -> ComparisonReport:
    """Dissemination ensemble against the model ensemble, same config.

    In measured P_drop mode without an explicit p_inx, a short occupancy
    pre-pass on a salted seed measures it first."""
    model_config = config
    p_inx_used = config.p_inx
    if config.p_drop_mode == "measured" and config.p_inx is None:
        probe = replace(
            config,
            seed=config.seed ^ PROBE_SALT,
            measure_rounds=min(PROBE_ROUNDS, config.measure_rounds),
        )
        p_inx_used = run_occupancy_experiment(probe).p_inx
        model_config = replace(config, p_inx=p_inx_used)
    protocol_report = run_dissemination_experiment(config, jobs=jobs)
    model_report = run_model_experiment(model_config, jobs=jobs)
    diff = compare(protocol_report.ensemble, model_report.ensemble)
    return ComparisonReport(
        config=config,
        protocol_ensemble=protocol_report.ensemble,
        model_ensemble=model_report.ensemble,
        diff=diff,
        p_inx_used=p_inx_used,
        p_drop_used=model_report.p_drop,
    )


def _map_runs(
    fn: Callable, config: ExperimentConfig, jobs: int, *extra
) -> list:
    """Run fn(config, i, *extra) for every run index, optionally across
    processes. Results keep index order, so parallelism cannot change
    any report."""
    indices = range(config.runs)
    if jobs <= 1:
        return [fn(config, i, *extra) for i in indices]
    with multiprocessing.Pool(processes=jobs) as pool:
        return pool.starmap(fn, [(config, i, *extra) for i in indices])

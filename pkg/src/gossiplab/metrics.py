"""Measurements over simulator and model runs.

Pair-state statistics (PairProbs) classify, per exchange and tracked
item, what initiator and contacted held before the exchange ran; they
feed the statistical estimates of P_inx and P_drop. Run-level series
(replication, coverage per round) aggregate into ensembles of mean and
population standard deviation over the successful runs, which is the
common currency the model comparison works in.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .pairwise import GossipParams, p_drop_general, p_select
from .protocols import ExchangeRecord

__all__ = [
    "PairProbs",
    "RoundMetrics",
    "RunEnsemble",
    "ComparisonSeries",
    "measure_pair_probs",
    "estimate_p_inx",
    "estimate_p_drop_statistical",
    "replication_series",
    "coverage_series",
    "filter_successful",
    "aggregate",
    "compare",
]

LOW_CONFIDENCE_OBSERVATIONS = 1000


@dataclass(frozen=True)
class PairProbs:
    """Frequencies of the nonempty pre-exchange pair states.

    p11: both held the item, p10: only the initiator, p01: only the
    contacted node. The empty state makes up the remainder.
    observations counts (exchange, item) classifications behind the
    frequencies; below LOW_CONFIDENCE_OBSERVATIONS the estimate is
    flagged low confidence.
    """

    p11: float
    p10: float
    p01: float
    observations: int = 0

    def __post_init__(self) -> None:
        for name in ("p11", "p10", "p01"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        total = self.p11 + self.p10 + self.p01
        if total > 1.0 + 1e-9:
            raise ValueError(f"p11 + p10 + p01 = {total} exceeds 1")
        if self.observations < 0:
            raise ValueError("observations must be >= 0")

    @property
    def p00(self) -> float:
        return 1.0 - (self.p11 + self.p10 + self.p01)

    @property
    def low_confidence(self) -> bool:
        return self.observations < LOW_CONFIDENCE_OBSERVATIONS

    @classmethod
    def from_counts(cls, n11: int, n10: int, n01: int, observations: int) -> "PairProbs":
        if observations < 1:
            raise ValueError("need at least one observation")
        return cls(
            p11=n11 / observations,
            p10=n10 / observations,
            p01=n01 / observations,
            observations=observations,
        )


def measure_pair_probs(
    records: Sequence[ExchangeRecord],
    tracked_items: Iterable[int],
) -> PairProbs:
    """Classify the pre-exchange holdings of every logged exchange for
    every tracked item. Every initiated exchange counts, whatever became
    of its messages: the classification reads state from before any
    message could act."""
    if not records:
        raise ValueError("cannot measure pair probabilities from an empty log")
    tracked = np.asarray(sorted(set(int(x) for x in tracked_items)), dtype=np.int64)
    if tracked.size == 0:
        raise ValueError("need at least one tracked item")
    width = records[0].pre_initiator.shape[0]
    if tracked[0] < 0 or tracked[-1] >= width:
        raise ValueError("tracked item outside the log's id range")
    a = np.stack([r.pre_initiator for r in records])[:, tracked]
    b = np.stack([r.pre_contacted for r in records])[:, tracked]
    n11 = int(np.sum(a & b))
    n10 = int(np.sum(a & (1 - b)))
    n01 = int(np.sum((1 - a) & b))
    return PairProbs.from_counts(n11, n10, n01, a.size)


def estimate_p_inx(probs: PairProbs) -> float:
    """Probability that the contacted node holds an item the initiator
    holds, estimated as p11 / (p10 + p11)."""
    denom = probs.p10 + probs.p11
    if denom == 0.0:
        raise ValueError("initiator never held a tracked item, P_inx undefined")
    return probs.p11 / denom


def estimate_p_drop_statistical(probs: PairProbs, params: GossipParams) -> float:
    """Shuffle drop probability from measured pair statistics: the
    general-form drop formula at the measured P_inx and s/c."""
    return p_drop_general(estimate_p_inx(probs), p_select(params))


@dataclass(frozen=True)
class RoundMetrics:
    """Replication and coverage of the tracked item after one round
    (round 0 is the insertion snapshot)."""

    round: int
    replication: int
    coverage: int
    pair_probs: PairProbs | None = None


def replication_series(run: Sequence[RoundMetrics]) -> np.ndarray:
    return np.array([m.replication for m in run], dtype=np.int64)


def coverage_series(run: Sequence[RoundMetrics]) -> np.ndarray:
    return np.array([m.coverage for m in run], dtype=np.int64)


def filter_successful(runs: Sequence[Sequence[RoundMetrics]]):
    """Runs whose item is still replicated at the final round."""
    return [run for run in runs if run[-1].replication > 0]


@dataclass(frozen=True)
class RunEnsemble:
    """Per-round mean and population standard deviation of replication
    and coverage over the successful runs of an experiment."""

    mean_replication: np.ndarray
    std_replication: np.ndarray
    mean_coverage: np.ndarray
    std_coverage: np.ndarray
    total_runs: int
    successful_runs: int

    @property
    def rounds(self) -> int:
        return len(self.mean_replication)

    @property
    def extinction_fraction(self) -> float:
        return 1.0 - self.successful_runs / self.total_runs

    @classmethod
    def empty(cls, total_runs: int) -> "RunEnsemble":
        z = np.zeros(0, dtype=np.float64)
        return cls(z, z, z, z, total_runs=total_runs, successful_runs=0)


def aggregate(runs: Sequence[Sequence[RoundMetrics]]) -> RunEnsemble:
    """Ensemble statistics over the successful runs. All runs must cover
    the same number of rounds. Zero successful runs yield the empty
    ensemble (flagged by successful_runs == 0)."""
    if not runs:
        raise ValueError("cannot aggregate zero runs")
    lengths = {len(run) for run in runs}
    if len(lengths) != 1:
        raise ValueError(f"runs cover differing round counts: {sorted(lengths)}")
    good = filter_successful(runs)
    if not good:
        return RunEnsemble.empty(total_runs=len(runs))
    repl = np.stack([replication_series(run) for run in good]).astype(np.float64)
    cov = np.stack([coverage_series(run) for run in good]).astype(np.float64)
    return RunEnsemble(
        mean_replication=repl.mean(axis=0),
        std_replication=repl.std(axis=0),
        mean_coverage=cov.mean(axis=0),
        std_coverage=cov.std(axis=0),
        total_runs=len(runs),
        successful_runs=len(good),
    )


@dataclass(frozen=True)
class ComparisonSeries:
    """Per-round absolute gap between protocol and model means, paired
    with the protocol-side spread that judges it."""

    abs_diff_replication: np.ndarray
    protocol_std_replication: np.ndarray
    abs_diff_coverage: np.ndarray
    protocol_std_coverage: np.ndarray

    @property
    def rounds(self) -> int:
        return len(self.abs_diff_replication)


def compare(protocol: RunEnsemble, model: RunEnsemble) -> ComparisonSeries:
    """Round-by-round absolute difference of ensemble means; lengths must
    match exactly."""
    if protocol.rounds != model.rounds:
        raise ValueError(
            f"ensembles cover {protocol.rounds} vs {model.rounds} rounds"
        )
    if protocol.successful_runs == 0 or model.successful_runs == 0:
        raise ValueError("cannot compare an ensemble with no successful runs")
    return ComparisonSeries(
        abs_diff_replication=np.abs(protocol.mean_replication - model.mean_replication),
        protocol_std_replication=protocol.std_replication.copy(),
        abs_diff_coverage=np.abs(protocol.mean_coverage - model.mean_coverage),
        protocol_std_coverage=protocol.std_coverage.copy(),
    )

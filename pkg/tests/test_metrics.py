"""Measurement utilities: pair statistics and ensemble aggregation."""

import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gossiplab.metrics import (
    ComparisonSeries,
    PairProbs,
    RoundMetrics,
    aggregate,
    compare,
    coverage_series,
    estimate_p_drop_statistical,
    estimate_p_inx,
    filter_successful,
    measure_pair_probs,
    replication_series,
)
from gossiplab.pairwise import GossipParams
from gossiplab.protocols import (
    ExchangeRecord,
    MessageScenario,
    Protocol,
    init_network,
    run_round,
    run_startup,
)
from gossiplab.topology import build_clique


def rec(pre_a, pre_b):
    return ExchangeRecord(
        initiator=0,
        contacted=1,
        scenario=MessageScenario.DELIVERED,
        pre_initiator=np.array(pre_a, dtype=np.uint8),
        pre_contacted=np.array(pre_b, dtype=np.uint8),
    )


class TestPairProbs:
    def test_counts_and_p00(self):
        p = PairProbs.from_counts(n11=10, n10=20, n01=30, observations=100)
        assert p.p11 == 0.1
        assert p.p10 == 0.2
        assert p.p01 == 0.3
        assert p.p00 == pytest.approx(0.4, abs=1e-12)

    def test_rejects_excess_mass(self):
        with pytest.raises(ValueError):
            PairProbs(p11=0.5, p10=0.4, p01=0.3)

    def test_low_confidence_threshold(self):
        assert PairProbs(0.1, 0.1, 0.1, observations=999).low_confidence
        assert not PairProbs(0.1, 0.1, 0.1, observations=1000).low_confidence

    def test_measure_counts_every_cell(self):
        records = [
            rec([1, 1, 0], [1, 0, 0]),
            rec([0, 1, 1], [1, 1, 1]),
        ]
        p = measure_pair_probs(records, tracked_items=[0, 1, 2])
        # cells: (1,1) (1,0) (0,0) / (0,1) (1,1) (1,1)
        assert p.observations == 6
        assert p.p11 == pytest.approx(3 / 6)
        assert p.p10 == pytest.approx(1 / 6)
        assert p.p01 == pytest.approx(1 / 6)

    def test_measure_respects_tracked_subset(self):
        records = [rec([1, 1], [0, 1])]
        p = measure_pair_probs(records, tracked_items=[1])
        assert p.observations == 1
        assert p.p11 == 1.0

    def test_measure_rejects_empty_log(self):
        with pytest.raises(ValueError):
            measure_pair_probs([], tracked_items=[0])

    def test_measure_rejects_items_outside_log(self):
        with pytest.raises(ValueError):
            measure_pair_probs([rec([1], [1])], tracked_items=[3])


class TestEstimators:
    def test_p_inx_from_probs(self):
        p = PairProbs(p11=0.04, p10=0.16, p01=0.16, observations=5000)
        assert estimate_p_inx(p) == pytest.approx(0.2, abs=1e-12)

    def test_p_inx_rejects_empty_initiator(self):
        with pytest.raises(ValueError):
            estimate_p_inx(PairProbs(p11=0.0, p10=0.0, p01=0.3))

    def test_p_drop_statistical_matches_general_form(self):
        p = PairProbs(p11=0.04, p10=0.16, p01=0.16, observations=5000)
        params = GossipParams(n=500, c=100, s=50)
        # P_inx 0.2, p_select 0.5: (1 - 0.2)/(1 - 0.1) = 8/9
        assert estimate_p_drop_statistical(p, params) == pytest.approx(
            8.0 / 9.0, abs=1e-12
        )

    def test_clique_measurement_agrees_with_kernel_counts(self):
        # one logged round of a warmed-up clique: the value-level
        # measurement and a direct mask count must classify identically
        params = GossipParams(n=60, c=12, s=6)
        state = init_network(build_clique(120), params, random.Random(3))
        run_startup(state, 80, Protocol.SHUFFLE, random.Random(4))
        log = []
        run_round(state, Protocol.SHUFFLE, 0.0, random.Random(5), log=log)
        tracked = range(params.n)
        p = measure_pair_probs(log, tracked)
        n11 = n10 = n01 = 0
        for entry in log:
            a = entry.pre_initiator[: params.n].astype(np.int64)
            b = entry.pre_contacted[: params.n].astype(np.int64)
            n11 += int((a & b).sum())
            n10 += int((a & (1 - b)).sum())
            n01 += int(((1 - a) & b).sum())
        total = len(log) * params.n
        assert p.observations == total
        assert p.p11 == pytest.approx(n11 / total)
        assert p.p10 == pytest.approx(n10 / total)
        assert p.p01 == pytest.approx(n01 / total)


def run_of(values):
    return [
        RoundMetrics(round=i, replication=r, coverage=c)
        for i, (r, c) in enumerate(values)
    ]


class TestAggregation:
    def test_series_extraction(self):
        run = run_of([(1, 1), (3, 4), (5, 9)])
        assert replication_series(run).tolist() == [1, 3, 5]
        assert coverage_series(run).tolist() == [1, 4, 9]

    def test_filter_successful_drops_extinct_runs(self):
        alive = run_of([(1, 1), (4, 5)])
        dead = run_of([(1, 1), (0, 3)])
        assert filter_successful([alive, dead]) == [alive]

    def test_aggregate_means_and_population_std(self):
        runs = [
            run_of([(1, 1), (2, 2)]),
            run_of([(1, 1), (4, 6)]),
        ]
        ens = aggregate(runs)
        assert ens.successful_runs == 2
        assert ens.total_runs == 2
        assert ens.mean_replication.tolist() == [1.0, 3.0]
        assert ens.mean_coverage.tolist() == [1.0, 4.0]
        # population std over {2, 4} is 1, over {2, 6} is 2
        assert ens.std_replication.tolist() == [0.0, 1.0]
        assert ens.std_coverage.tolist() == [0.0, 2.0]

    def test_aggregate_ignores_extinct_runs_and_counts_them(self):
        runs = [
            run_of([(1, 1), (2, 2)]),
            run_of([(1, 1), (0, 2)]),
        ]
        ens = aggregate(runs)
        assert ens.successful_runs == 1
        assert ens.total_runs == 2
        assert ens.extinction_fraction == pytest.approx(0.5)
        assert ens.mean_replication.tolist() == [1.0, 2.0]

    def test_aggregate_with_zero_successful_is_flagged_empty(self):
        runs = [run_of([(1, 1), (0, 1)])]
        ens = aggregate(runs)
        assert ens.successful_runs == 0
        assert ens.rounds == 0

    def test_aggregate_rejects_ragged_runs(self):
        with pytest.raises(ValueError):
            aggregate([run_of([(1, 1)]), run_of([(1, 1), (2, 2)])])

    @settings(max_examples=30, deadline=None)
    @given(
        data=st.lists(
            st.lists(
                st.tuples(
                    st.integers(min_value=0, max_value=50),
                    st.integers(min_value=0, max_value=50),
                ),
                min_size=3,
                max_size=3,
            ),
            min_size=1,
            max_size=8,
        )
    )
    def test_aggregate_matches_naive_two_pass(self, data):
        runs = [run_of(values) for values in data]
        good = [run for run in runs if run[-1].replication > 0]
        if not good:
            assert aggregate(runs).successful_runs == 0
            return
        ens = aggregate(runs)
        for r in range(3):
            vals = [run[r].replication for run in good]
            mean = sum(vals) / len(vals)
            var = sum((v - mean) ** 2 for v in vals) / len(vals)
            assert abs(ens.mean_replication[r] - mean) < 1e-9
            assert abs(ens.std_replication[r] - var**0.5) < 1e-9


class TestCompare:
    def test_diff_and_std_columns(self):
        a = aggregate([run_of([(1, 1), (4, 4)]), run_of([(1, 1), (6, 8)])])
        b = aggregate([run_of([(1, 1), (3, 5)])])
        d = compare(a, b)
        assert isinstance(d, ComparisonSeries)
        assert d.abs_diff_replication.tolist() == [0.0, 2.0]
        assert d.protocol_std_replication.tolist() == [0.0, 1.0]
        assert d.abs_diff_coverage.tolist() == [0.0, 1.0]
        assert d.rounds == 2

    def test_rejects_length_mismatch(self):
        a = aggregate([run_of([(1, 1), (4, 4)])])
        b = aggregate([run_of([(1, 1), (4, 4), (5, 5)])])
        with pytest.raises(ValueError):
            compare(a, b)

    def test_rejects_empty_ensembles(self):
        a = aggregate([run_of([(1, 1), (4, 4)])])
        empty = aggregate([run_of([(1, 1), (0, 4)])])
        with pytest.raises(ValueError):
            compare(a, empty)

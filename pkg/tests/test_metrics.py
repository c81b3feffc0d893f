import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subsetbench.enet import RegularizationPath
from subsetbench.metrics import (
    ConfusionCounts,
    Metric,
    best_possible,
    confusion,
    score,
    tune_to_subset_size,
)
from subsetbench.model import Method, SelectionResult, TuningRecord

counts_strategy = st.builds(
    ConfusionCounts,
    tp=st.integers(0, 400),
    fp=st.integers(0, 400),
    fn=st.integers(0, 400),
    tn=st.integers(0, 400),
)


class TestConfusion:
    def test_perfect(self):
        c = confusion(set(range(1, 11)), set(range(1, 11)), 100)
        assert (c.tp, c.fp, c.fn, c.tn) == (10, 0, 0, 90)

    def test_empty_selection(self):
        c = confusion(set(), set(range(1, 11)), 100)
        assert (c.tp, c.fp, c.fn, c.tn) == (0, 0, 10, 90)

    def test_superset_selection(self):
        c = confusion(set(range(1, 16)), set(range(1, 11)), 100)
        assert (c.tp, c.fp, c.fn, c.tn) == (10, 5, 0, 85)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            confusion({0}, {1}, 10)
        with pytest.raises(ValueError):
            confusion({1}, {11}, 10)

    @given(
        st.sets(st.integers(1, 40), max_size=20),
        st.sets(st.integers(1, 40), max_size=20),
    )
    @settings(max_examples=100, deadline=None)
    def test_against_membership_loop(self, selected, truth):
        p = 40
        c = confusion(selected, truth, p)
        tp = fp = fn = tn = 0
        for j in range(1, p + 1):
            if j in selected and j in truth:
                tp += 1
            elif j in selected:
                fp += 1
            elif j in truth:
                fn += 1
            else:
                tn += 1
        assert (c.tp, c.fp, c.fn, c.tn) == (tp, fp, fn, tn)


class TestScore:
    def test_perfect_selection(self):
        c = ConfusionCounts(10, 0, 0, 90)
        assert score(c, Metric.F1).value == 1.0
        assert score(c, Metric.MCC).value == pytest.approx(1.0)

    def test_symmetric_half(self):
        c = ConfusionCounts(tp=5, fp=5, fn=5, tn=5)
        assert score(c, Metric.PRECISION).value == 0.5
        assert score(c, Metric.RECALL).value == 0.5
        assert score(c, Metric.F1).value == 0.5
        assert score(c, Metric.F2).value == 0.5

    def test_mcc_formula(self):
        # 850 / sqrt(15 * 10 * 90 * 85)
        c = ConfusionCounts(10, 5, 0, 85)
        expected = 850.0 / math.sqrt(15 * 10 * 90 * 85)
        assert expected == pytest.approx(0.7935, abs=5e-5)
        assert score(c, Metric.MCC).value == pytest.approx(expected, abs=1e-15)

    def test_undefined_conventions(self):
        empty_sel = ConfusionCounts(0, 0, 10, 90)
        for metric in (Metric.PRECISION, Metric.F1, Metric.F2):
            s = score(empty_sel, metric)
            assert s.value == 0.0 and not s.defined
        no_truth = ConfusionCounts(0, 5, 0, 95)
        assert not score(no_truth, Metric.RECALL).defined
        assert not score(empty_sel, Metric.MCC).defined

    def test_zero_tp_with_both_errors(self):
        c = ConfusionCounts(0, 5, 5, 90)
        s = score(c, Metric.F1)
        assert s.value == 0.0 and not s.defined
        assert score(c, Metric.MCC).value < 0  # worse than chance

    @given(counts_strategy)
    @settings(max_examples=300, deadline=None)
    def test_rational_metrics_exact(self, c):
        # single-division integer forms are exactly the rounded rationals
        if c.tp + c.fp:
            assert score(c, Metric.PRECISION).value == float(
                Fraction(c.tp, c.tp + c.fp)
            )
        if c.tp + c.fn:
            assert score(c, Metric.RECALL).value == float(Fraction(c.tp, c.tp + c.fn))
        f1 = score(c, Metric.F1)
        if f1.defined:
            assert f1.value == float(Fraction(2 * c.tp, 2 * c.tp + c.fp + c.fn))
        f2 = score(c, Metric.F2)
        if f2.defined:
            assert f2.value == float(Fraction(5 * c.tp, 5 * c.tp + 4 * c.fn + c.fp))

    @given(counts_strategy)
    @settings(max_examples=200, deadline=None)
    def test_mcc_matches_indicator_correlation(self, c):
        denom = (c.tp + c.fp) * (c.tp + c.fn) * (c.tn + c.fp) * (c.tn + c.fn)
        if denom == 0:
            assert not score(c, Metric.MCC).defined
            return
        selected = np.r_[np.ones(c.tp), np.ones(c.fp), np.zeros(c.fn), np.zeros(c.tn)]
        truth = np.r_[np.ones(c.tp), np.zeros(c.fp), np.ones(c.fn), np.zeros(c.tn)]
        oracle = np.corrcoef(selected, truth)[0, 1]
        assert score(c, Metric.MCC).value == pytest.approx(oracle, abs=1e-12)

    @given(counts_strategy)
    @settings(max_examples=200, deadline=None)
    def test_ranges(self, c):
        for metric in Metric:
            v = score(c, metric).value
            if metric is Metric.MCC:
                assert -1.0 <= v <= 1.0
            else:
                assert 0.0 <= v <= 1.0

    @given(counts_strategy)
    @settings(max_examples=200, deadline=None)
    def test_f2_weights_recall(self, c):
        p_score = score(c, Metric.PRECISION)
        r_score = score(c, Metric.RECALL)
        f1, f2 = score(c, Metric.F1), score(c, Metric.F2)
        if not (p_score.defined and r_score.defined and f1.defined):
            return
        if r_score.value >= p_score.value:
            assert f2.value >= f1.value - 1e-15
        else:
            assert f2.value <= f1.value + 1e-15

    def test_permutation_invariance(self, rng):
        p = 30
        truth = set(rng.choice(np.arange(1, p + 1), 6, replace=False).tolist())
        selected = set(rng.choice(np.arange(1, p + 1), 9, replace=False).tolist())
        perm = rng.permutation(p) + 1
        relabel = {j: int(perm[j - 1]) for j in range(1, p + 1)}
        c1 = confusion(selected, truth, p)
        c2 = confusion({relabel[j] for j in selected}, {relabel[j] for j in truth}, p)
        for metric in Metric:
            assert score(c1, metric) == score(c2, metric)


def _result(support, k):
    coef = np.zeros(30)
    for j in support:
        coef[j - 1] = 1.0
    return SelectionResult(
        method=Method.FSS,
        support=frozenset(support),
        coefficients=coef,
        tuning=TuningRecord(subset_size=k),
    )


def _path(alpha, lambdas, supports, p=30):
    coefs = np.zeros((len(lambdas), p))
    for i, supp in enumerate(supports):
        for j in supp:
            coefs[i, j - 1] = 1.0
    return RegularizationPath(
        alpha=alpha,
        lambdas=np.array(lambdas, dtype=float),
        coefficients=coefs,
        supports=tuple(frozenset(s) for s in supports),
        converged=tuple(True for _ in supports),
    )


class TestBestPossible:
    def test_exact_hit_scores_one(self):
        truth = {1, 2, 3}
        cands = [_result({1}, 1), _result({1, 2, 3}, 3), _result({1, 2, 3, 4}, 4)]
        sc, tuning, counts = best_possible(cands, truth, 30, Metric.F1)
        assert sc.value == 1.0
        assert tuning.subset_size == 3
        assert counts.tp == 3 and counts.fp == 0

    def test_all_empty_candidates(self):
        cands = [_result(set(), 1)]
        sc, _, _ = best_possible(cands, {1, 2}, 30, Metric.F1)
        assert sc.value == 0.0 and not sc.defined

    def test_stepwise_trace_optimum_at_truth(self, rng):
        # nested supports growing past the truth: the scan over every
        # entry must pick exactly the k = 10 prefix
        truth = set(range(1, 11))
        cands = [_result(set(range(1, k + 1)), k) for k in range(1, 16)]
        best_by_scan = max(
            (score(confusion(c.support, truth, 30), Metric.F1).value, -len(c.support))
            for c in cands
        )
        sc, tuning, _ = best_possible(cands, truth, 30, Metric.F1)
        assert sc.value == best_by_scan[0] == 1.0
        assert tuning.subset_size == 10

    def test_monotone_in_candidates(self):
        truth = {1, 2, 3, 4}
        pool = [_result({1, 2}, 2), _result({1, 2, 3}, 3), _result({5, 6}, 2)]
        prev = -1.0
        for size in range(1, len(pool) + 1):
            sc, _, _ = best_possible(pool[:size], truth, 30, Metric.F1)
            assert sc.value >= prev
            prev = sc.value

    def test_tie_prefers_sparser(self):
        truth = {1, 2}
        # both score F1 = 2/3: {1} (tp=1, fn=1) vs {1,3,4}? no: pick exact tie
        a = _result({1}, 1)          # P=1, R=0.5, F1=2/3
        b = _result({1, 2, 3}, 3)    # P=2/3, R=1, F1=0.8
        c = _result({1, 3}, 2)       # P=0.5, R=0.5, F1=0.5
        sc, tuning, _ = best_possible([c, b, a], truth, 30, Metric.F1)
        assert sc.value == pytest.approx(0.8)
        assert tuning.subset_size == 3

    def test_path_candidates_enumerated(self):
        truth = {1, 2}
        path = _path(0.5, [4.0, 2.0, 1.0], [set(), {1}, {1, 2}])
        sc, tuning, _ = best_possible([path], truth, 30, Metric.F1)
        assert sc.value == 1.0
        assert tuning.alpha == 0.5 and tuning.lam == 1.0


def test_f1_and_mcc_agree_on_argmax_in_sparse_regime():
    # spot check on a study-style cell (n=1000, p=100, s=10): the two
    # metrics should pick the same stepwise subset size almost always
    from subsetbench.datagen import (
        BetaSpec,
        CovarianceSpec,
        ScenarioSpec,
        Structure,
        sample_dataset,
    )
    from subsetbench.stepwise import forward_stepwise

    spec = ScenarioSpec(
        scenario_id="argmax-spot",
        n=1000,
        p=100,
        covariance=CovarianceSpec(Structure.TOEPLITZ, rho=0.35),
        beta=BetaSpec(p=100, s=10),
        tau=1.22,
        replications=20,
    )
    agree = 0
    for rep in range(20):
        d = sample_dataset(spec, 31_000 + rep)
        trace = forward_stepwise(d, 15)
        cands = [
            _result_from_support(step.active_set, k)
            for k, step in enumerate(trace.steps, start=1)
        ]
        _, tune_f1, _ = best_possible(cands, d.true_support, d.p, Metric.F1)
        _, tune_mcc, _ = best_possible(cands, d.true_support, d.p, Metric.MCC)
        agree += tune_f1 == tune_mcc
    assert agree >= 19  # 95% of 20


def _result_from_support(support, k):
    coef = np.zeros(100)
    for j in support:
        coef[j - 1] = 1.0
    return SelectionResult(
        method=Method.FSS,
        support=frozenset(support),
        coefficients=coef,
        tuning=TuningRecord(subset_size=k),
    )


class TestTuneToSubsetSize:
    def test_exact_match(self):
        supports = [set(range(1, k + 1)) for k in range(0, 8)]
        path = _path(1.0, list(np.geomspace(100, 1, 8)), supports)
        res = tune_to_subset_size(path, 5)
        assert len(res.support) == 5
        assert res.method is Method.LASSO

    def test_jump_prefers_sparser_side(self):
        sizes = [0, 4, 8, 12, 14]
        supports = [set(range(1, s + 1)) for s in sizes]
        path = _path(0.3, list(np.geomspace(100, 1, 5)), supports)
        res = tune_to_subset_size(path, 10)
        assert len(res.support) == 8
        assert res.method is Method.ENET

    def test_equal_distance_takes_larger_lambda(self):
        sizes = [2, 6, 2]
        supports = [set(range(1, s + 1)) for s in sizes]
        path = _path(0.3, [9.0, 3.0, 1.0], supports)
        res = tune_to_subset_size(path, 4)
        # sizes 2 and 6 are both distance 2: sparser side wins, and among
        # the two size-2 points the larger lambda (first) is chosen
        assert len(res.support) == 2
        assert res.tuning.lam == 9.0

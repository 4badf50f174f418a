import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from iaas_select.clqp import (CoverageError, InsufficientHistory, PredictionResult, SegmentPlan,
                              clqp_predict, confidence, pcc_similarity, predict_segment_qos,
                              replay_workload, select_neighbors, similarity_weight,
                              workload_replay_trial)
from iaas_select.core import TSG, AlignmentError, ConsumerRequest, Provider, QosAttribute, TrialRecord
from iaas_select.datagen import BaselineMap, QosProfile, Simulator

from conftest import ts, tsg

A = QosAttribute("q")


def record(user, workload, observed, start=0, provider="p"):
    w = ts(workload, start)
    return TrialRecord(user, provider, w, TSG.from_matrix([A], w.timestamps, np.asarray(observed, float)))


class TestSimilarity:
    def test_pcc_identity(self):
        assert pcc_similarity([1, 3, 2, 5], [1, 3, 2, 5]) == pytest.approx(1.0)

    def test_pcc_anticorrelated(self):
        w = np.array([1.0, 3, 2, 5])
        assert pcc_similarity(w, -w + 7) == pytest.approx(-1.0)

    def test_pcc_flat_is_undefined(self):
        assert pcc_similarity([2, 2, 2], [1, 2, 3]) is None

    def test_weight(self):
        assert similarity_weight([1, 2], [1, 2]) == 1.0
        assert similarity_weight([0, 0], [1, 1]) == pytest.approx(0.5)
        assert 0 < similarity_weight([0, 0], [1e9, 1e9]) < 1e-8


class TestNeighbours:
    def test_identical_record(self):
        recs = [record("u1", [1, 2, 3], [0, 0, 0]), record("u2", [4, 4, 4], [0, 0, 0])]
        out = select_neighbors([1, 2, 3], recs, k=5)
        assert [n.user_id for n in out] == ["u1"]
        assert out[0].weight == 1.0

    def test_top_k_by_weight(self):
        # rmse distances chosen to give weights .9/.8/.1/.05/.01
        dists = {"a": 1 / 0.9 - 1, "b": 1 / 0.8 - 1, "c": 1 / 0.1 - 1, "d": 1 / 0.05 - 1, "e": 1 / 0.01 - 1}
        recs = [record(u, [d, d], [0, 0]) for u, d in dists.items()]
        out = select_neighbors([0, 0], recs, k=3)
        assert [n.user_id for n in out] == ["a", "b", "c"]
        np.testing.assert_allclose([n.weight for n in out], [0.9, 0.8, 0.1])

    def test_threshold_empties(self):
        recs = [record("u", [100, 100], [0, 0])]
        assert select_neighbors([0, 0], recs, k=3, min_weight=0.5) == []

    def test_length_mismatch(self):
        with pytest.raises(AlignmentError):
            select_neighbors([0, 0], [record("u", [0, 0, 0], [0, 0, 0])], k=1)


class TestSegmentPrediction:
    def test_single_neighbour_identity(self):
        recs = [record("u", [1, 2], [7, 9], start=30)]
        nb = select_neighbors([1, 2], recs, 1)
        out = predict_segment_qos(nb, recs, "q", timestamps=[60, 61])
        np.testing.assert_allclose(out.values, [7, 9])
        np.testing.assert_array_equal(out.timestamps, [60, 61])

    def test_equal_weights_average(self):
        recs = [record("a", [0, 0], [10, 10]), record("b", [0, 0], [20, 20])]
        nb = select_neighbors([1, 1], recs, 2)
        np.testing.assert_allclose(predict_segment_qos(nb, recs, "q").values, [15, 15])

    def test_three_to_one(self):
        # rmse 0 -> weight 1, rmse 2 -> weight 1/3
        recs = [record("a", [1, 1], [10, 10]), record("b", [3, 3], [20, 20])]
        nb = select_neighbors([1, 1], recs, 2)
        assert len(nb) == 1  # an exact match wins outright
        from iaas_select.clqp import SimilarityScore
        nb = [SimilarityScore("a", 0, None, 0.0, 3.0, 0), SimilarityScore("b", 0, None, 2.0, 1.0, 0)]
        np.testing.assert_allclose(predict_segment_qos(nb, recs, "q").values, [12.5, 12.5])

    def test_coverage_gap(self):
        from iaas_select.clqp import SimilarityScore
        recs = [record("a", [1, 1], [10, 10])]
        nb = [SimilarityScore("a", 0, None, 0.0, 1.0, 5)]
        with pytest.raises(CoverageError):
            predict_segment_qos(nb, recs, "q", timestamps=[0, 1])


@given(hnp.arrays(float, st.tuples(st.integers(1, 5), st.integers(1, 8)),
                  elements=st.floats(-1e3, 1e3)),
       st.lists(st.floats(0.01, 1.0), min_size=5, max_size=5),
       st.floats(0.1, 100))
def test_weighted_prediction_properties(obs, weights, scale):
    from iaas_select.clqp import SimilarityScore
    k, m = obs.shape
    recs = [record(f"u{i}", np.zeros(m), obs[i]) for i in range(k)]
    nb = [SimilarityScore(f"u{i}", 0, None, 0.0, weights[i], 0) for i in range(k)]
    pred = predict_segment_qos(nb, recs, "q").values
    tol = 1e-9 * (1 + np.abs(obs).max())
    # convex combination
    assert np.all(pred >= obs.min(axis=0) - tol) and np.all(pred <= obs.max(axis=0) + tol)
    # weight scaling invariance
    scaled = [SimilarityScore(n.user_id, 0, None, 0.0, n.weight * scale, 0) for n in nb]
    np.testing.assert_allclose(predict_segment_qos(scaled, recs, "q").values, pred, atol=tol)
    # uniform weights reduce to the plain mean
    uniform = [SimilarityScore(n.user_id, 0, None, 0.0, 0.37, 0) for n in nb]
    np.testing.assert_allclose(predict_segment_qos(uniform, recs, "q").values, obs.mean(axis=0), atol=tol)
    np.testing.assert_allclose(predict_segment_qos(nb, recs, "q", weighted=False).values,
                               obs.mean(axis=0), atol=tol)


@given(st.lists(st.floats(0, 50), min_size=2, max_size=12), st.integers(1, 5))
def test_neighbour_weights_positive(target, k):
    rng = np.random.default_rng(len(target))
    recs = [record(f"u{i}", rng.uniform(0, 50, len(target)), np.zeros(len(target))) for i in range(6)]
    out = select_neighbors(target, recs, k)
    assert len(out) <= k
    assert all(n.weight > 0 for n in out)
    assert [n.weight for n in out] == sorted((n.weight for n in out), reverse=True)


class FlatOracle:
    """QoS = 2 * workload for attribute q."""

    def observe_tsg(self, provider_id, workload):
        return TSG.from_matrix([A], workload.timestamps, 2 * workload.values)


def make_consumer(values, segments, segment_length):
    n = len(values)
    return ConsumerRequest(n, ts(values), tsg({"q": np.linspace(0, 1, n)}), (), segments, segment_length)


class TestReplay:
    def test_slice_one_year(self):
        w = np.arange(12 * 5, dtype=float)
        c = make_consumer(w, 12, 5)
        np.testing.assert_array_equal(replay_workload(c, 30, 5).values, w[30:35])

    def test_two_year_average(self):
        w = np.concatenate([np.full(6, 10.0), np.full(6, 20.0)])
        c = make_consumer(w, 3, 2)  # season 6, two years
        out = replay_workload(c, 2, 2)
        np.testing.assert_allclose(out.values, [15, 15])

    def test_trial_shape(self):
        c = make_consumer(np.arange(360.0), 12, 30)
        rec = workload_replay_trial(c, Provider("p", tsg({"q": np.ones(360)}), 210, 30), FlatOracle())
        assert rec.window_length == 30 and rec.window_start == 210
        np.testing.assert_allclose(rec.observed["q"].values, 2 * np.arange(210, 240))

    def test_window_outside(self):
        c = make_consumer(np.arange(60.0), 2, 30)
        with pytest.raises(ValueError):
            replay_workload(c, 50, 30)


class TestConfidence:
    def test_zero_and_gap(self):
        rec = record("c", [0, 0, 0], [1, 2, 3])
        assert confidence(rec, [1, 2, 3], "q") == 0
        assert confidence(rec, [1.5, 2.5, 3.5], "q") == pytest.approx(0.5)
        assert confidence(rec, [1.5, 2.5, 3.5], "q", scale=0.5) == pytest.approx(1.0)

    def test_alignment(self):
        rec = record("c", [0, 0, 0], [1, 2, 3])
        with pytest.raises(AlignmentError):
            confidence(rec, [1, 2], "q")
        with pytest.raises(AlignmentError):
            confidence(rec, ts([1, 2, 3], start=4), "q")

    @given(st.lists(st.floats(-100, 100), min_size=1, max_size=20), st.integers(0, 300))
    def test_self_distance_and_shift(self, vals, shift):
        a = record("c", np.zeros(len(vals)), vals)
        b = record("c", np.zeros(len(vals)), vals, start=shift)
        assert confidence(a, vals, "q") == 0
        pred = np.asarray(vals) + 1.0
        assert confidence(a, pred, "q") == pytest.approx(confidence(b, ts(pred, shift), "q"))


class TestClqpPredict:
    def setup_method(self):
        self.plan = SegmentPlan(4, 5)
        rng = np.random.default_rng(0)
        self.w = rng.uniform(1, 10, 20)
        self.c = make_consumer(self.w, 4, 5)
        self.p = Provider("p", tsg({"q": np.ones(20)}), 10, 5)
        oracle = FlatOracle()
        self.records = []
        for seg in range(4):
            win = ts(self.w[seg * 5:(seg + 1) * 5], seg * 5)
            self.records.append(TrialRecord("twin", "p", win, oracle.observe_tsg("p", win)))
            other = ts(rng.uniform(1, 10, 5), seg * 5)
            self.records.append(TrialRecord("other", "p", other, oracle.observe_tsg("p", other)))
        self.oracle = oracle

    def test_identity_propagation(self):
        res = clqp_predict(self.c, self.p, self.records, self.plan, k=3, oracle=self.oracle)
        np.testing.assert_allclose(res.predicted["q"].values, 2 * self.w, atol=1e-12)
        assert res.confidence["q"] == pytest.approx(0.0, abs=1e-12)
        assert res.method == "cooperative"
        assert all(ns[0].user_id == "twin" for ns in res.neighbors.values())

    def test_no_records_signals_fallback(self):
        with pytest.raises(InsufficientHistory):
            clqp_predict(self.c, self.p, [], self.plan, oracle=self.oracle)

    def test_partial_history_uses_fallback(self):
        recs = [r for r in self.records if r.window_start != 0]
        fb = PredictionResult("p", tsg({"q": np.full(20, -1.0)}))
        with pytest.raises(InsufficientHistory) as exc:
            clqp_predict(self.c, self.p, recs, self.plan, oracle=self.oracle)
        assert exc.value.missing == ((0, 0),)
        res = clqp_predict(self.c, self.p, recs, self.plan, oracle=self.oracle, fallback=fb)
        assert res.method == "cooperative+lqp-short"
        np.testing.assert_allclose(res.predicted["q"].values[:5], -1.0)
        assert res.missing_segments == ((0, 0),)

    def test_trial_window_holds_observations(self):
        trial = workload_replay_trial(self.c, self.p, self.oracle)
        shifted = TrialRecord("consumer", "p", trial.workload,
                              TSG.from_matrix([A], trial.workload.timestamps, trial.observed.as_matrix() + 3))
        res = clqp_predict(self.c, self.p, self.records, self.plan, trial=shifted)
        np.testing.assert_allclose(res.predicted["q"].values[10:15], 2 * self.w[10:15] + 3)
        assert res.confidence["q"] > 0

    def test_plan_must_match_horizon(self):
        with pytest.raises(ValueError):
            clqp_predict(self.c, self.p, self.records, SegmentPlan(4, 6), oracle=self.oracle)

    def test_json_provenance(self):
        res = clqp_predict(self.c, self.p, self.records, self.plan, oracle=self.oracle)
        d = res.to_json()
        assert set(d["neighbors"]) == {"s0y0", "s1y0", "s2y0", "s3y0"}
        assert d["neighbors"]["s0y0"][0]["user"] == "twin"


def test_sigma_zero_simulator_identity():
    base = BaselineMap(np.array([0.0, 40.0]), {"throughput": np.array([1000.0, 100.0])})
    prof = QosProfile("p", {"throughput": np.ones(5)}, {"throughput": np.ones(12)}, 0.0)
    sim = Simulator(base, {"p": prof}, np.array([5.0, 10, 15, 20]), 30, 0,
                    (QosAttribute("throughput"),))
    w = ts(np.linspace(1, 30, 360))
    c = ConsumerRequest(360, w, tsg({"throughput": np.linspace(1, 2, 360)}), (), 12, 30)
    plan = SegmentPlan(12, 30)
    recs = [TrialRecord("twin", "p", w.window(plan.start(s), 30), sim.observe_tsg("p", w.window(plan.start(s), 30)))
            for s in range(12)]
    p = Provider("p", tsg({"throughput": np.ones(360)}), 210, 30)
    res = clqp_predict(c, p, recs, plan, oracle=sim)
    truth = sim.observe_tsg("p", w)
    np.testing.assert_allclose(res.predicted["throughput"].values, truth["throughput"].values, rtol=0, atol=1e-9)

import numpy as np
import pytest
from hypothesis import given, strategies as st

from iaas_select import datagen
from iaas_select.clqp import SegmentPlan
from iaas_select.datagen import (BaselineMap, QosProfile, Simulator, bucket_edges,
                                 generate_advertisements, generate_trial_corpus)
from iaas_select.filtering import mts_skyline

from conftest import ts

THR = "throughput"


def flat_sim(seasonal=None, noise=0.0, attrs=(THR,)):
    base = BaselineMap(np.array([0.0, 10.0, 40.0]),
                       {THR: np.array([1000.0, 600.0, 100.0]),
                        "insert_response": np.array([1.0, 20.0, 200.0])})
    wm = {a: np.ones(5) for a in attrs}
    sm = {a: np.ones(12) if seasonal is None else np.asarray(seasonal) for a in attrs}
    prof = QosProfile("p", wm, sm, noise)
    return Simulator(base, {"p": prof}, np.array([5.0, 10, 15, 20]), 30, 7,
                     tuple(datagen.ATTRIBUTES[a] for a in attrs))


class TestObserve:
    def test_identity_profile_is_baseline(self):
        sim = flat_sim()
        assert sim.observe("p", 10.0, 3, THR) == pytest.approx(600.0)
        assert sim.observe("p", 5.0, 3, THR) == pytest.approx(800.0)

    def test_seasonal_multiplier(self):
        seasonal = np.ones(12)
        seasonal[4] = 1.2
        sim = flat_sim(seasonal)
        assert sim.observe("p", 10.0, 4 * 30 + 2, THR) == pytest.approx(1.2 * 600)
        assert sim.observe("p", 10.0, 3 * 30 + 2, THR) == pytest.approx(600)

    def test_deterministic_jitter(self):
        sim = flat_sim(noise=0.2)
        a = sim.observe_values("p", [3.0, 7.0, 11.0], [1, 2, 3], THR)
        b = sim.observe_values("p", [3.0, 7.0, 11.0], [1, 2, 3], THR)
        np.testing.assert_array_equal(a, b)
        # order of evaluation does not matter
        c = sim.observe_values("p", [11.0, 3.0], [3, 1], THR)
        np.testing.assert_array_equal(c, a[[2, 0]])
        base = flat_sim().observe_values("p", [3.0, 7.0, 11.0], [1, 2, 3], THR)
        assert np.all(np.abs(a / base - 1) <= 0.2)

    def test_unknown_provider(self):
        with pytest.raises(KeyError):
            flat_sim().observe("nope", 1.0, 0, THR)


@given(st.lists(st.floats(0, 40), min_size=2, max_size=30), st.integers(0, 359))
def test_sigma_zero_monotone_in_workload(ws, t):
    base = BaselineMap.synthetic(np.random.default_rng(0), rows=200)
    rng = np.random.default_rng(1)
    prof = datagen.random_profile("p", rng, noise_range=(0.0, 0.0))
    sim = Simulator(base, {"p": prof}, np.array([8.0, 16, 24, 30]), 30, 0)
    ws = np.sort(ws)
    times = np.full(ws.size, t)
    thr = sim.observe_values("p", ws, times, "throughput")
    rsp = sim.observe_values("p", ws, times, "insert_response")
    assert np.all(np.diff(thr) <= 1e-9 * thr.max())
    assert np.all(np.diff(rsp) >= -1e-9 * rsp.max())


class TestBaseline:
    def test_synthetic_ranges(self):
        b = BaselineMap.synthetic(np.random.default_rng(3))
        assert b.levels.size == 1500
        assert 100 <= b.values["throughput"].min() and b.values["throughput"].max() <= 10000
        assert 1 <= b.values["insert_response"].min() and b.values["insert_response"].max() <= 200

    def test_rejects_non_monotone(self):
        with pytest.raises(ValueError):
            BaselineMap(np.array([0.0, 1.0]), {THR: np.array([1.0, 2.0])})

    def test_csv_round_trip(self, tmp_path):
        b = BaselineMap.synthetic(np.random.default_rng(3), rows=50)
        b.to_csv(tmp_path / "b.csv")
        back = BaselineMap.from_csv(tmp_path / "b.csv")
        np.testing.assert_array_equal(back.levels, b.levels)
        np.testing.assert_array_equal(back.values[THR], b.values[THR])


class TestProfiles:
    def test_validation(self):
        with pytest.raises(ValueError):
            QosProfile("p", {THR: np.ones(5)}, {THR: np.ones(12)}, 0.9)
        with pytest.raises(ValueError):
            QosProfile("p", {THR: np.ones(5)}, {THR: np.zeros(12)}, 0.1)
        with pytest.raises(ValueError):
            QosProfile("p", {THR: np.arange(1.0, 6.0)}, {THR: np.ones(12)}, 0.1)

    def test_json_round_trip(self, tmp_path):
        profs = {f"S{i}": datagen.random_profile(f"S{i}", np.random.default_rng(i)) for i in range(3)}
        datagen.save_profiles(profs, tmp_path / "p.json")
        back = datagen.load_profiles(tmp_path / "p.json")
        assert set(back) == set(profs)
        np.testing.assert_array_equal(back["S1"].seasonal_map[THR], profs["S1"].seasonal_map[THR])


class TestAdvertisements:
    def test_shape(self):
        ads = generate_advertisements(60, seed=1)
        assert len(ads) == 60
        assert all(len(p.advertisement.names) == 4 for p in ads)
        assert all(len(p.advertisement.timestamps) == 360 for p in ads)

    def test_within_ranges(self):
        for p in generate_advertisements(20, seed=2):
            for name, (lo, hi) in datagen.AD_RANGES.items():
                v = p.advertisement[name].values
                assert lo <= v.min() and v.max() <= hi

    def test_seeded(self):
        a, b = generate_advertisements(5, seed=9), generate_advertisements(5, seed=9)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.advertisement.as_matrix(), y.advertisement.as_matrix())
        c = generate_advertisements(5, seed=10)
        assert not np.array_equal(a[0].advertisement.as_matrix(), c[0].advertisement.as_matrix())

    def test_single_is_its_own_skyline(self):
        ads = generate_advertisements(1, seed=0)
        assert mts_skyline(ads, list(ads[0].advertisement.names)) == ads


class TestTrialCorpus:
    def test_counts(self):
        sim = flat_sim()
        users = {f"u{i:02d}": ts(np.random.default_rng(i).uniform(0, 30, 360)) for i in range(30)}
        profs = {f"S{i}": sim.profiles["p"] for i in range(5)}
        sim = Simulator(sim.baseline, profs, sim.bucket_edges, 30, 0, sim.attributes)
        recs = generate_trial_corpus(users, SegmentPlan(12, 30), list(profs), sim)
        assert len(recs) == 30 * 5 * 12
        assert {r.window_length for r in recs} == {30}
        assert generate_trial_corpus(users, SegmentPlan(12, 30), [], sim) == []

    def test_short_trace(self):
        with pytest.raises(ValueError):
            generate_trial_corpus({"u": ts(np.ones(100))}, SegmentPlan(12, 30), ["p"], flat_sim())

    def test_reference_sizes(self, reference_corpus):
        c = reference_corpus
        assert len(c.users) == 30 and "node31" not in c.users
        assert len(c.consumer.workload) == 360
        assert len(c.records) == 1800
        assert {r.window_length for r in c.records} == {30}

    def test_ground_truth_reproducible(self, reference_corpus):
        again = datagen.ground_truth(reference_corpus.simulator, sorted(reference_corpus.truth),
                                     reference_corpus.consumer.workload)
        for pid, tsg in reference_corpus.truth.items():
            np.testing.assert_array_equal(tsg.as_matrix(), again[pid].as_matrix())


def test_bucket_edges_are_quintiles():
    edges = bucket_edges([np.arange(100.0)])
    np.testing.assert_allclose(edges, np.quantile(np.arange(100.0), [0.2, 0.4, 0.6, 0.8]))


def test_substreams_independent():
    a = datagen.substream(0, "profiles").random(3)
    b = datagen.substream(0, "advertisements").random(3)
    assert not np.array_equal(a, b)
    np.testing.assert_array_equal(a, datagen.substream(0, "profiles").random(3))


def test_expectation_has_more_attributes_than_ads(reference_corpus):
    c = reference_corpus
    assert all(len(p.advertisement.names) < len(c.consumer.expectation.names) for p in c.providers)
    assert "throughput" in c.consumer.expectation

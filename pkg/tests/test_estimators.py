import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import unit_sample
from oracles import pairwise_bessel

from matbern.errors import (
    AsymmetryError,
    BoundednessError,
    DimMismatchError,
    EmptySampleError,
    SampleTooSmall,
    WeightError,
)
from matbern.estimators import (
    MatrixSample,
    RunningProxy,
    bessel_variance,
    estimate_summary,
    even_count,
    paired_variance,
    rescale,
    running_proxy_norms,
    running_proxy_update,
    sample_mean,
    weighted_mean,
)
from matbern.symmat import SymMat, eigvalsh, spectral_norm


class TestIngestion:
    def test_interval_violation(self):
        with pytest.raises(BoundednessError):
            MatrixSample([np.diag([0.5, 1.1])])

    def test_tolerance(self):
        MatrixSample([np.diag([-5e-10, 1 + 5e-10])])

    def test_asymmetric(self):
        with pytest.raises(AsymmetryError):
            MatrixSample([[[0.5, 0.1], [0.0, 0.5]]])

    def test_mixed_dims(self):
        with pytest.raises((DimMismatchError, ValueError)):
            MatrixSample([np.eye(2) / 2, np.eye(3) / 2])

    def test_empty(self):
        with pytest.raises(EmptySampleError):
            MatrixSample(np.zeros((0, 2, 2)))

    def test_scalars(self):
        s = MatrixSample([0.1, 0.9])
        assert (s.n, s.dim) == (2, 1)

    def test_iteration_yields_symmat(self):
        s = MatrixSample([np.eye(2) / 2] * 3)
        assert all(isinstance(x, SymMat) for x in s) and len(s) == 3


class TestMeans:
    def test_constant(self):
        a = np.array([[0.3, 0.1], [0.1, 0.6]])
        np.testing.assert_allclose(sample_mean(MatrixSample([a] * 7)).entries, a, atol=1e-15)

    def test_zero_identity(self):
        assert sample_mean(MatrixSample([np.zeros((2, 2)), np.eye(2)])) == SymMat.identity(2) / 2

    def test_vs_entrywise(self, rng):
        x = unit_sample(rng, 25, 3)
        ref = [[sum(x[k][i][j] for k in range(25)) / 25 for j in range(3)] for i in range(3)]
        np.testing.assert_allclose(sample_mean(MatrixSample(x)).entries, ref, atol=1e-12)

    def test_uniform_weights(self, rng):
        s = MatrixSample(unit_sample(rng, 10, 3))
        np.testing.assert_allclose(weighted_mean(s, np.ones(10)).entries, sample_mean(s).entries, atol=1e-15)

    def test_bad_weights(self):
        s = MatrixSample([np.eye(2) / 2] * 2)
        with pytest.raises(WeightError):
            weighted_mean(s, [1.0, 0.0])
        with pytest.raises(WeightError):
            weighted_mean(s, [1.0])

    def test_weighted_vs_loop(self, rng):
        x = unit_sample(rng, 12, 2)
        w = rng.uniform(0.1, 1.0, size=12)
        num = sum(w[k] * x[k] for k in range(12))
        np.testing.assert_allclose(weighted_mean(MatrixSample(x), w).entries, num / w.sum(), atol=1e-12)

    def test_rescale_commutes_with_mean(self, rng):
        a, b = -2.0, 3.0
        u = unit_sample(rng, 8, 3)
        raw = MatrixSample(a * np.eye(3) + (b - a) * u, interval=(a, b))
        lhs = sample_mean(rescale(raw)).entries
        rhs = (sample_mean(raw).entries - a * np.eye(3)) / (b - a)
        np.testing.assert_allclose(lhs, rhs, atol=1e-14)


class TestPairedVariance:
    def test_constant(self):
        assert paired_variance(MatrixSample([np.eye(2) / 3] * 6)) == SymMat.zeros(2)

    def test_zero_identity(self):
        v = paired_variance(MatrixSample([np.zeros((2, 2)), np.eye(2)]))
        np.testing.assert_allclose(v.entries, np.eye(2) / 2)

    def test_three_pairs(self, rng):
        x = unit_sample(rng, 6, 3)
        ref = sum((x[2 * j] - x[2 * j + 1]) @ (x[2 * j] - x[2 * j + 1]) for j in range(3)) / 6
        np.testing.assert_allclose(paired_variance(MatrixSample(x)).entries, ref, atol=1e-12)

    def test_odd_drops_last(self, rng):
        x = unit_sample(rng, 7, 2)
        assert even_count(7) == 6
        np.testing.assert_allclose(paired_variance(MatrixSample(x)).entries,
                                   paired_variance(MatrixSample(x[:6])).entries, atol=0)
        _, meta = estimate_summary(MatrixSample(x), "paired")
        assert meta["n_used"] == 6

    def test_too_small(self):
        with pytest.raises(SampleTooSmall):
            paired_variance(MatrixSample([np.eye(2) / 2]))
        with pytest.raises(EmptySampleError):
            paired_variance(MatrixSample([np.eye(2) / 2]))

    def test_psd_and_bounded(self, rng):
        for _ in range(100):
            s = MatrixSample(unit_sample(rng, 11, 3))
            w = eigvalsh(paired_variance(s))
            assert w[0] >= -1e-10 and w[-1] <= 1 + 1e-12


class TestBesselVariance:
    def test_constant(self):
        assert spectral_norm(bessel_variance(MatrixSample([np.eye(3) / 4] * 5))) <= 1e-16

    def test_zero_identity_against_pairwise(self):
        x = [np.zeros((2, 2)), np.eye(2)]
        got = bessel_variance(MatrixSample(x)).entries
        np.testing.assert_allclose(got, pairwise_bessel(x), atol=1e-15)
        np.testing.assert_allclose(got, np.eye(2) / 2, atol=1e-15)

    def test_n20_vs_pairwise(self, rng):
        x = unit_sample(rng, 20, 3)
        got = bessel_variance(MatrixSample(x)).entries
        assert np.linalg.norm(got - np.array(pairwise_bessel(x.tolist()))) <= 1e-10

    def test_psd(self, rng):
        for _ in range(100):
            assert eigvalsh(bessel_variance(MatrixSample(unit_sample(rng, 9, 3))))[0] >= -1e-10


class TestRunningProxy:
    def test_fresh(self):
        r = RunningProxy.fresh(3, 0.05, 100)
        floor = 5 * mpmath.log(mpmath.mpf(60)) / 100
        assert r.floor == pytest.approx(float(floor), rel=1e-15)
        assert float(floor) == pytest.approx(0.2047172, abs=1e-7)
        assert r.vbar == 0.25
        assert r.variance == SymMat.identity(3) / 4

    def test_constant_stream_hits_floor(self):
        r = RunningProxy.fresh(2, 0.05, 50)
        for _ in range(5):
            r = running_proxy_update(r, np.eye(2) * 0.3)
        assert r.norm <= 1e-15 and r.vbar == r.floor

    def test_vs_batch(self, rng):
        x = unit_sample(rng, 10, 3)
        r = RunningProxy.fresh(3, 0.05, 10)
        for xi in x:
            r = running_proxy_update(r, xi)
        c = x - x.mean(axis=0)
        ref = np.einsum("kij,kjl->il", c, c) / 10
        np.testing.assert_allclose(r.variance.entries, ref, atol=1e-10)
        assert r.vbar >= r.floor

    def test_batch_norms_match_stream(self, rng):
        x = unit_sample(rng, 40, 3)
        norms = running_proxy_norms(x)
        r = RunningProxy.fresh(3, 0.05, 40)
        for k in range(40):
            assert norms[k] == pytest.approx(r.norm, abs=1e-13)
            r = running_proxy_update(r, x[k])

    def test_dim_mismatch(self):
        with pytest.raises(DimMismatchError):
            running_proxy_update(RunningProxy.fresh(3, 0.05, 10), np.eye(2))


def test_summary_fields(rng):
    s = MatrixSample(unit_sample(rng, 5, 2))
    for name in ("mean", "paired", "bessel"):
        _, meta = estimate_summary(s, name)
        assert set(meta) == {"n_used", "estimator", "spectral_norm"}


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 30), st.integers(1, 4))
def test_bessel_matches_pairwise_property(seed, n, d):
    x = unit_sample(np.random.default_rng(seed), n, d)
    got = bessel_variance(MatrixSample(x, validate=False)).entries
    np.testing.assert_allclose(got, pairwise_bessel(x.tolist()), atol=1e-10)


def test_variance_consistency():
    """||V_k - I/12|| shrinks with k on the projection mixture and is small at 10^4."""
    from matbern.simharness import gen_projection_mixture, replication_rng

    errs = np.empty((200, 3))
    for seed in range(200):
        x = gen_projection_mixture(replication_rng(seed, 99), 10_000).data
        for j, k in enumerate((100, 1_000, 10_000)):
            c = x[:k] - x[:k].mean(axis=0)
            v = np.einsum("kij,kjl->il", c, c) / k
            errs[seed, j] = spectral_norm(v - np.eye(3) / 12)
    mean_err = errs.mean(axis=0)
    assert mean_err[0] > mean_err[1] > mean_err[2]
    assert np.mean(errs[:, 2] < 0.05) >= 0.95
    assert math.isfinite(mean_err.sum())

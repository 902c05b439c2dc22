import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import random_sym
from oracles import charpoly_eigenvalues

from matbern.errors import AsymmetryError, ConvergenceError, DimMismatchError, DomainError, NonFiniteError
from matbern.symmat import (
    SymMat,
    eig_sym,
    eigvalsh,
    expm,
    jacobi_eigh,
    lambda_max,
    lambda_min,
    log_trace_exp,
    logm,
    loewner_leq,
    spectral_fn,
    spectral_norm,
    spectral_norms,
    sym_from_dense,
    trace_exp,
)


class TestConstruction:
    def test_identity_passes_through(self):
        s = sym_from_dense(np.eye(3), atol=1e-9)
        assert np.array_equal(s.entries, np.eye(3))

    def test_negligible_skew_is_symmetrised(self):
        s = sym_from_dense([[1, 2 + 1e-12], [2, 1]], atol=1e-9)
        np.testing.assert_allclose(s.entries, [[1, 2], [2, 1]], atol=1e-12)
        assert s.entries[0, 1] == s.entries[1, 0]

    def test_skew_rejected(self):
        with pytest.raises(AsymmetryError):
            sym_from_dense([[0, 1], [0, 0]], atol=1e-9)

    def test_non_finite_rejected(self):
        with pytest.raises(NonFiniteError):
            sym_from_dense([[np.nan, 0], [0, 1]])
        with pytest.raises(NonFiniteError):
            sym_from_dense([[np.inf, 0], [0, 1]])

    def test_shape_rejected(self):
        with pytest.raises(DimMismatchError):
            sym_from_dense(np.zeros((2, 3)))

    def test_entries_are_read_only(self):
        s = SymMat.identity(2)
        with pytest.raises(ValueError):
            s.entries[0, 0] = 5.0

    def test_arithmetic(self):
        a = SymMat.of([[1, 2], [2, 3]])
        b = SymMat.identity(2)
        assert (a + b) == SymMat.of([[2, 2], [2, 4]])
        assert (a - a) == SymMat.zeros(2)
        assert (2 * a) == a * 2.0
        assert a.square() == SymMat.of([[5, 8], [8, 13]])
        with pytest.raises(DimMismatchError):
            a + SymMat.identity(3)

    def test_hash_matches_equality(self):
        assert hash(SymMat.of([[1.0]])) == hash(SymMat.of([[1.0]]))


class TestEigen:
    def test_diagonal(self):
        dec = eig_sym(SymMat.of(np.diag([3.0, 1.0, 2.0])))
        np.testing.assert_allclose(dec.eigenvalues, [1, 2, 3])
        np.testing.assert_allclose(np.abs(dec.eigenvectors), np.eye(3)[:, [1, 2, 0]])

    def test_exchange_matrix(self):
        np.testing.assert_allclose(eig_sym(SymMat.of([[0, 1], [1, 0]])).eigenvalues, [-1, 1], atol=1e-15)

    def test_seed_42_five_by_five_vs_charpoly(self):
        a = random_sym(np.random.default_rng(42), 5)
        np.testing.assert_allclose(eig_sym(SymMat.of(a)).eigenvalues, charpoly_eigenvalues(a), atol=1e-8)

    def test_ties_keep_basis_order(self):
        dec = eig_sym(SymMat.identity(4))
        assert np.array_equal(dec.eigenvectors, np.eye(4))

    def test_deterministic(self):
        a = SymMat.of(random_sym(np.random.default_rng(3), 6))
        d1, d2 = eig_sym(a), eig_sym(a)
        assert np.array_equal(d1.eigenvalues, d2.eigenvalues)
        assert np.array_equal(d1.eigenvectors, d2.eigenvectors)

    def test_sign_convention(self):
        dec = eig_sym(SymMat.of(random_sym(np.random.default_rng(4), 5)))
        for j in range(5):
            col = dec.eigenvectors[:, j]
            assert col[np.flatnonzero(np.abs(col) > 1e-12)[0]] > 0

    @pytest.mark.parametrize("d", [1, 2, 3, 5, 10])
    def test_reconstruction_many_seeds(self, d):
        for seed in range(200):
            a = random_sym(np.random.default_rng(seed), d, scale=10.0 ** (seed % 5 - 2))
            dec = eig_sym(SymMat.of(a))
            u = dec.eigenvectors
            assert np.linalg.norm(dec.reconstruct() - a) <= 1e-10 * (1 + np.linalg.norm(a))
            assert np.linalg.norm(u.T @ u - np.eye(d)) <= 1e-10
            assert np.all(np.diff(dec.eigenvalues) >= 0)

    def test_batched_matches_single(self):
        rng = np.random.default_rng(5)
        stack = np.array([random_sym(rng, 4) for _ in range(30)])
        batch = eigvalsh(stack)
        for a, w in zip(stack, batch):
            np.testing.assert_array_equal(eigvalsh(a), w)

    def test_matches_lapack(self):
        rng = np.random.default_rng(6)
        stack = np.array([random_sym(rng, 7) for _ in range(50)])
        np.testing.assert_allclose(eigvalsh(stack), np.linalg.eigvalsh(stack), atol=1e-12)

    def test_convergence_error_on_tiny_budget(self):
        a = random_sym(np.random.default_rng(7), 6)
        with pytest.raises(ConvergenceError):
            jacobi_eigh(a, max_sweeps=1)

    def test_zero_matrix(self):
        np.testing.assert_array_equal(eigvalsh(np.zeros((3, 3))), np.zeros(3))


class TestSpectralFunctions:
    def test_identity_function(self):
        a = SymMat.of(random_sym(np.random.default_rng(8), 4))
        assert np.linalg.norm(spectral_fn(a, lambda x: x).entries - a.entries) <= 1e-10

    def test_exp_of_zero(self):
        assert np.allclose(expm(SymMat.zeros(3)).entries, np.eye(3), atol=1e-15)

    def test_exp_log_roundtrip(self):
        rng = np.random.default_rng(9)
        for _ in range(200):
            # spectrum in [0.1, 5]: beyond that exp(P) is too ill-conditioned
            # for any double-precision eigensolver to return log exactly
            q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
            p = SymMat.of((q * rng.uniform(0.1, 5.0, size=4)) @ q.T)
            back = logm(expm(p))
            assert np.linalg.norm(back.entries - p.entries) <= 1e-8

    def test_log_of_non_pd(self):
        with pytest.raises(DomainError):
            logm(SymMat.of(np.diag([1.0, -1.0])))

    def test_non_finite_output(self):
        with pytest.raises(DomainError):
            spectral_fn(SymMat.of(np.diag([0.0, 1.0])), lambda x: 1.0 / x)

    def test_extremes(self):
        assert (lambda_max(np.eye(3)), lambda_min(np.eye(3)), spectral_norm(np.eye(3))) == (1.0, 1.0, 1.0)
        d = np.diag([-2.0, 1.0])
        assert lambda_max(d) == 1.0 and lambda_min(d) == -2.0 and spectral_norm(d) == 2.0

    def test_psd_norm_is_lambda_max(self):
        rng = np.random.default_rng(10)
        for _ in range(100):
            b = rng.standard_normal((5, 5))
            p = b @ b.T
            assert abs(spectral_norm(p) - lambda_max(p)) <= 1e-12

    def test_spectral_norms_batch(self):
        stack = np.array([np.diag([-3.0, 1.0]), np.diag([0.5, 2.0])])
        np.testing.assert_allclose(spectral_norms(stack), [3.0, 2.0])


class TestLoewner:
    def test_basic(self):
        assert loewner_leq(SymMat.zeros(3), SymMat.identity(3), tol=0)
        assert not loewner_leq(SymMat.identity(3), SymMat.zeros(3), tol=0)

    def test_dim_mismatch(self):
        with pytest.raises(DimMismatchError):
            loewner_leq(SymMat.zeros(2), SymMat.zeros(3))


class TestTraceExp:
    def test_zero(self):
        assert trace_exp(np.zeros((3, 3))) == pytest.approx(3.0, abs=1e-15)

    def test_diag_logs(self):
        assert trace_exp(np.diag([math.log(2), math.log(3)])) == pytest.approx(5.0, rel=1e-14)

    def test_vs_charpoly_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            a = random_sym(rng, 4)
            ref = sum(math.exp(w) for w in charpoly_eigenvalues(a))
            assert trace_exp(a) == pytest.approx(ref, rel=1e-8)

    def test_overflow_flag(self):
        assert trace_exp(np.diag([1e4, 0.0])) == math.inf
        assert log_trace_exp(np.diag([1e4, 0.0])) == pytest.approx(1e4)

    def test_log_trace_exp_batched(self):
        stack = np.zeros((4, 2, 2))
        np.testing.assert_allclose(log_trace_exp(stack), np.full(4, math.log(2)))


sym3 = arrays(np.float64, (3, 3), elements=st.floats(-5, 5, allow_nan=False, allow_infinity=False))


@settings(max_examples=200, deadline=None)
@given(sym3, sym3)
def test_lambda_max_subadditive(a, b):
    a, b = (a + a.T) / 2, (b + b.T) / 2
    assert lambda_max(a + b) <= lambda_max(a) + lambda_max(b) + 1e-10


@settings(max_examples=200, deadline=None)
@given(sym3, sym3)
def test_difference_of_squares(a, b):
    a, b = (a + a.T) / 2, (b + b.T) / 2
    lhs = spectral_norm(a @ a - b @ b)
    diff = spectral_norm(a - b)
    assert lhs <= 2 * spectral_norm(b) * diff + diff * diff + 1e-10 * (1 + lhs)


@settings(max_examples=200, deadline=None)
@given(sym3, arrays(np.float64, (3, 3), elements=st.floats(-2, 2, allow_nan=False)))
def test_monotone_trace_transfer(a, c):
    a = (a + a.T) / 2
    b = a + c @ c.T
    for f in (np.exp, np.tanh, lambda x: x ** 3):
        ta = float(np.sum(f(eigvalsh(a))))
        tb = float(np.sum(f(eigvalsh(b))))
        assert ta <= tb + 1e-10 * (1 + abs(tb))

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from opdilate.errors import DimensionMismatch, NotHermitian, NotPSD
from opdilate.numkernel import (
    DEFAULT_TOL,
    TolerancePolicy,
    hermitian_eig,
    lstsq_solve,
    null_space,
    numerical_rank,
    psd_check,
    psd_factor,
)

from oracles import eigvalsh, exact_rank

seeds = st.integers(0, 2**32 - 1)


def rand_herm(rng, n, scale=1.0):
    x = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * (x + x.conj().T) / 2


def test_tolerance_policy_validates():
    with pytest.raises(ValueError):
        TolerancePolicy(psd_tol=-1.0)
    tol = DEFAULT_TOL.replace(residual_tol=1e-6)
    assert tol.residual_tol == 1e-6 and tol.psd_tol == DEFAULT_TOL.psd_tol


def test_eig_identity():
    res = hermitian_eig(np.eye(2))
    assert np.allclose(res.eigenvalues, [1, 1])
    assert np.allclose(res.vectors.conj().T @ res.vectors, np.eye(2))


def test_eig_2x2():
    res = hermitian_eig(np.array([[2, 1], [1, 2]]))
    assert np.allclose(res.eigenvalues, [3, 1], atol=1e-12)
    assert np.allclose(res.reconstruct(), [[2, 1], [1, 2]], atol=1e-12)


def test_eig_zero():
    res = hermitian_eig(np.zeros((3, 3)))
    assert np.array_equal(res.eigenvalues, np.zeros(3))


def test_eig_rejects_non_hermitian():
    with pytest.raises(NotHermitian):
        hermitian_eig(np.array([[0, 1], [0, 0]]))
    with pytest.raises(NotHermitian):
        hermitian_eig(np.zeros((2, 3)))


def test_eig_empty():
    res = hermitian_eig(np.zeros((0, 0)))
    assert res.eigenvalues.shape == (0,) and res.vectors.shape == (0, 0)


def test_eig_descending_and_ties_deterministic():
    m = np.diag([1.0, 3.0, 1.0, 2.0])
    a = hermitian_eig(m)
    b = hermitian_eig(m)
    assert np.array_equal(a.eigenvalues, [3, 2, 1, 1])
    assert np.array_equal(a.vectors, b.vectors)
    # equal eigenvalues keep the order of their original diagonal positions
    assert np.argmax(np.abs(a.vectors[:, 2])) == 0 and np.argmax(np.abs(a.vectors[:, 3])) == 2


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(1, 12))
def test_eig_reconstruction_and_oracle(seed, n):
    rng = np.random.default_rng(seed)
    m = rand_herm(rng, n, 10.0 ** rng.uniform(-3, 3))
    res = hermitian_eig(m)
    norm = np.linalg.norm(m)
    assert np.linalg.norm(m - res.reconstruct()) <= 1e-8 * norm
    assert np.linalg.norm(res.vectors.conj().T @ res.vectors - np.eye(n)) <= 1e-10
    assert np.allclose(res.eigenvalues, eigvalsh(m), atol=1e-10 * max(1.0, norm))


def test_eig_graded_spectrum():
    rng = np.random.default_rng(5)
    q, _ = np.linalg.qr(rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8)))
    lam = 10.0 ** np.arange(0, -16, -2)
    m = (q * lam) @ q.conj().T
    res = hermitian_eig(m)
    assert np.linalg.norm(m - res.reconstruct()) <= 1e-12
    assert np.allclose(res.eigenvalues[:3], lam[:3], rtol=1e-10)


def test_psd_check_examples():
    assert psd_check(np.eye(3))
    assert not psd_check(np.array([[1, 2], [2, 1]]))
    assert psd_check(np.zeros((2, 2)))
    assert psd_check(np.diag([1.0, -1e-12]))
    assert not psd_check(np.diag([1.0, -1e-6]))


def test_psd_factor_examples():
    f, r = psd_factor(np.array([[1.0]]))
    assert r == 1 and np.allclose(f, [[1.0]])
    f, r = psd_factor(np.zeros((2, 2)))
    assert r == 0 and f.shape == (0, 2)
    g = np.array([[2, 1], [1, 2]], dtype=complex)
    f, r = psd_factor(g)
    assert r == 2 and np.max(np.abs(f.conj().T @ f - g)) <= 1e-12


def test_psd_factor_rejects():
    with pytest.raises(NotPSD):
        psd_factor(np.array([[1, 2], [2, 1]]))
    with pytest.raises(NotHermitian):
        psd_factor(np.array([[1, 1j], [1j, 1]]))


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(1, 8), st.integers(1, 8))
def test_psd_factor_roundtrip(seed, r, n):
    rng = np.random.default_rng(seed)
    b = rng.standard_normal((r, n)) + 1j * rng.standard_normal((r, n))
    g = b.conj().T @ b
    assert psd_check(g)
    f, rank = psd_factor(g)
    assert f.shape == (rank, n)
    assert np.linalg.norm(g - f.conj().T @ f) <= 1e-8 * np.linalg.norm(g)
    assert rank == min(r, n)


@settings(max_examples=80, deadline=None)
@given(seeds, st.integers(1, 6), st.integers(1, 6), st.integers(1, 4))
def test_rank_matches_exact_elimination(seed, r, n, spread):
    rng = np.random.default_rng(seed)
    b = rng.integers(-spread, spread + 1, (r, n)) + 1j * rng.integers(-spread, spread + 1, (r, n))
    if rng.random() < 0.5 and r > 1:
        b[-1] = b[0] * (1 + 1j)  # force a dependent row
    expected = exact_rank(b)
    _, rank = psd_factor(b.conj().T @ b)
    assert rank == expected
    assert numerical_rank(b) == expected
    assert null_space(b).shape[1] == n - expected


def test_lstsq_examples():
    rng = np.random.default_rng(0)
    b = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
    x, res = lstsq_solve(np.eye(4), b)
    assert np.allclose(x, b) and res <= 1e-14

    a = rng.standard_normal((3, 6)) + 1j * rng.standard_normal((3, 6))
    c = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
    x, res = lstsq_solve(a, c @ a)
    assert np.max(np.abs(x - c)) <= 1e-10 and res <= 1e-10

    x, res = lstsq_solve(np.zeros((2, 3)), np.ones((1, 3)))
    assert np.array_equal(x, np.zeros((1, 2))) and res == pytest.approx(np.sqrt(3))


def test_lstsq_shapes():
    with pytest.raises(DimensionMismatch):
        lstsq_solve(np.zeros((2, 3)), np.zeros((2, 4)))
    x, res = lstsq_solve(np.zeros((0, 3)), np.ones((2, 3)))
    assert x.shape == (2, 0) and res == pytest.approx(np.sqrt(6))


def test_eig_subnormal_off_diagonal():
    a = np.array([[1.0, 1e-310], [1e-310, 2.0]], dtype=complex)
    a[0, 1] = 3e-310 + 4e-310j
    a[1, 0] = np.conj(a[0, 1])
    with np.errstate(all="raise"):
        res = hermitian_eig(a)
    assert np.allclose(res.eigenvalues, [2.0, 1.0], atol=0)
    assert np.all(np.isfinite(res.vectors))

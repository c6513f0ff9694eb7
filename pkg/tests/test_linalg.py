import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from conftest import crandn
from relaysim.linalg import (
    ContractViolation,
    NumericFailure,
    as_matrix,
    logdet_hermitian_psd,
    min_gram_eigenvalue,
    pseudo_inverse,
    svd_thin,
    water_fill,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@st.composite
def complex_matrices(draw, max_dim=5):
    r = draw(st.integers(1, max_dim))
    c = draw(st.integers(1, max_dim))
    re = draw(arrays(float, (r, c), elements=finite))
    im = draw(arrays(float, (r, c), elements=finite))
    return re + 1j * im


# -- svd_thin ---------------------------------------------------------------


def test_svd_identity():
    f = svd_thin(np.eye(3))
    np.testing.assert_allclose(f.sigma, [1, 1, 1])
    np.testing.assert_allclose(f.reconstruct(), np.eye(3), atol=1e-14)


def test_svd_diagonal_with_zero():
    f = svd_thin(np.diag([3.0, 0.0]))
    np.testing.assert_allclose(f.sigma, [3.0, 0.0], atol=1e-15)
    assert f.rank == 2


@given(complex_matrices())
def test_svd_invariants(a):
    f = svd_thin(a)
    r = min(a.shape)
    assert f.u.shape == (a.shape[0], r) and f.v.shape == (a.shape[1], r)
    np.testing.assert_allclose(f.u.conj().T @ f.u, np.eye(r), atol=1e-10)
    np.testing.assert_allclose(f.v.conj().T @ f.v, np.eye(r), atol=1e-10)
    assert np.all(np.diff(f.sigma) <= 1e-12) and np.all(f.sigma >= 0)
    scale = max(np.linalg.norm(a), 1.0)
    assert np.linalg.norm(f.reconstruct() - a) <= 1e-10 * scale


def test_svd_rank_truncation_tall(rng):
    a = crandn(rng, 8, 2)
    f = svd_thin(a, rank=2)
    assert f.u.shape == (8, 2)
    np.testing.assert_allclose(f.reconstruct(), a, atol=1e-12)


def test_svd_batched_matches_loop(rng):
    a = crandn(rng, 5, 6, 3)
    f = svd_thin(a)
    for i in range(5):
        np.testing.assert_allclose(f.sigma[i], np.linalg.svd(a[i], compute_uv=False))


def test_svd_rejects_nan():
    with pytest.raises(ContractViolation):
        svd_thin(np.array([[1.0, np.nan]]))


def test_svd_nonconvergence_is_loud(monkeypatch):
    def boom(*args, **kwargs):
        raise np.linalg.LinAlgError("SVD did not converge")

    monkeypatch.setattr(np.linalg, "svd", boom)
    with pytest.raises(NumericFailure):
        svd_thin(np.eye(2))


# -- pseudo_inverse -----------------------------------------------------------


@given(complex_matrices())
def test_moore_penrose_conditions(a):
    x = pseudo_inverse(a)
    scale = max(np.linalg.norm(a), 1.0)
    tol = 1e-8 * scale * max(np.linalg.norm(x), 1.0) ** 2
    np.testing.assert_allclose(a @ x @ a, a, atol=tol)
    np.testing.assert_allclose(x @ a @ x, x, atol=tol)
    np.testing.assert_allclose((a @ x).conj().T, a @ x, atol=tol)
    np.testing.assert_allclose((x @ a).conj().T, x @ a, atol=tol)


def test_pinv_right_inverse_wide(rng):
    g = crandn(rng, 2, 4)
    np.testing.assert_allclose(g @ pseudo_inverse(g), np.eye(2), atol=1e-12)


def test_pinv_zero_and_rank():
    x, rank = pseudo_inverse(np.zeros((2, 3)), return_rank=True)
    assert x.shape == (3, 2) and np.all(x == 0) and rank == 0


def test_pinv_rank_deficient_reports_rank():
    a = np.array([[1.0, 2.0], [2.0, 4.0]])
    x, rank = pseudo_inverse(a, return_rank=True)
    assert rank == 1
    np.testing.assert_allclose(x, np.linalg.pinv(a), atol=1e-12)


# -- min_gram_eigenvalue ------------------------------------------------------


def test_min_gram_eigenvalue_oracle(rng):
    a = crandn(rng, 3, 7)
    expected = np.linalg.eigvalsh(a @ a.conj().T).min()
    assert min_gram_eigenvalue(a) == pytest.approx(expected, rel=1e-10)


def test_min_gram_eigenvalue_tall_is_zero(rng):
    assert min_gram_eigenvalue(crandn(rng, 4, 2)) == 0.0


# -- logdet -------------------------------------------------------------------


def test_logdet_matches_slogdet(rng):
    b = crandn(rng, 4, 4)
    a = b @ b.conj().T + np.eye(4)
    assert logdet_hermitian_psd(a) == pytest.approx(np.linalg.slogdet(a)[1], rel=1e-12)


def test_logdet_rejects_non_hermitian():
    with pytest.raises(ContractViolation):
        logdet_hermitian_psd(np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_logdet_rejects_indefinite():
    with pytest.raises(NumericFailure):
        logdet_hermitian_psd(np.diag([1.0, -1.0]))


def test_as_matrix_shape_checks():
    with pytest.raises(ContractViolation):
        as_matrix(np.zeros(3))
    with pytest.raises(ContractViolation):
        as_matrix(np.zeros((0, 2)))


# -- water_fill ---------------------------------------------------------------


def test_water_fill_equal_gains():
    np.testing.assert_allclose(water_fill([1.0, 1.0], 2.0), [1.0, 1.0])


def test_water_fill_drops_weak_channel():
    np.testing.assert_allclose(water_fill([10.0, 0.1], 1.0), [1.0, 0.0])


gains_st = arrays(float, st.integers(1, 6), elements=st.floats(1e-3, 1e3))


@given(gains_st, st.floats(1e-3, 1e3))
def test_water_fill_kkt(gains, budget):
    p = water_fill(gains, budget)
    assert np.all(p >= 0)
    assert np.sum(p) == pytest.approx(budget, rel=1e-10)
    level = p + 1.0 / gains
    on = p > 1e-12 * budget
    mu = level[on].max()
    np.testing.assert_allclose(level[on], mu, rtol=1e-9)
    # channels left dry sit above the water level
    assert np.all(1.0 / gains[~on] >= mu * (1 - 1e-9))


@given(gains_st, st.floats(1e-2, 1e2))
def test_water_fill_beats_uniform(gains, budget):
    def obj(p):
        return np.sum(np.log2(1 + gains * p))

    assert obj(water_fill(gains, budget)) >= obj(np.full(gains.size, budget / gains.size)) - 1e-9


def test_water_fill_matches_grid_search(rng):
    for _ in range(10):
        g = rng.exponential(size=2)
        budget = rng.uniform(0.1, 5.0)
        grid = np.arange(0.0, budget + 1e-12, 1e-4)
        best = np.max(np.log2(1 + g[0] * grid) + np.log2(1 + g[1] * (budget - grid)))
        p = water_fill(g, budget)
        assert abs(np.sum(np.log2(1 + g * p)) - best) < 1e-3


def test_water_fill_rejects_bad_input():
    with pytest.raises(ContractViolation):
        water_fill([1.0, -1.0], 1.0)
    with pytest.raises(ContractViolation):
        water_fill([1.0], -1.0)

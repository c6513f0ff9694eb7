import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from relaysim.capacity import (
    BoundKind,
    BoundValue,
    closed_form_cu_star,
    cut_set_rate,
    ergodic_average,
    estimate,
    r_s,
)
from relaysim.channel import ChannelRealization, NetworkDims, PowerConfig, sample_realization, stack_uplink
from relaysim.linalg import ContractViolation
from relaysim.schemes import optimal_threshold, rate_cbs


def test_cu_star_anchor():
    assert closed_form_cu_star(NetworkDims(K=10, M=2, N=2), 10.0) == pytest.approx(np.log2(101), abs=1e-9)


def test_r_s_anchor_and_warning():
    assert r_s(NetworkDims(K=10, M=2, N=2), 10.0) == pytest.approx(np.log2(100))
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        val = r_s(NetworkDims(K=1, M=2, N=2), 0.1)
    assert val < 0 and w
    assert BoundValue(val, BoundKind.R_S).flagged


def test_cut_set_single_antenna():
    real = ChannelRealization.from_matrices(np.full((1, 1, 1), 2.0), np.ones((1, 1, 1)))
    assert cut_set_rate(real, 3.0) == pytest.approx(0.5 * np.log2(1 + 4 * 3.0))


def test_cut_set_matches_logdet_at_high_snr(make_real):
    # every eigenmode is on, so water-filling equals the closed-form optimum
    real = make_real(K=8, seed=2)
    h = stack_uplink(real)
    lam = np.linalg.eigvalsh(h.conj().T @ h)
    P = 1e4
    mu = (P + np.sum(1 / lam)) / 2
    expected = 0.5 * np.sum(np.log2(lam * mu))
    assert cut_set_rate(real, P) == pytest.approx(expected, rel=1e-10)


@given(st.integers(0, 2**31 - 1), st.integers(1, 10))
def test_schemes_below_cut_set(seed, K):
    real = sample_realization(NetworkDims(K=K, M=2, N=2), seed)
    p = PowerConfig.equal(10.0)
    c = cut_set_rate(real, p.p_source)
    assert rate_cbs(real, p) <= c + 1e-12
    assert optimal_threshold(real, p)[1] <= c + 1e-12


def test_ergodic_cut_set_below_cu_star():
    dims = NetworkDims(K=4, M=2, N=2)
    est = ergodic_average(lambda r: cut_set_rate(r, 10.0), dims, 400, 0)
    assert est.mean < closed_form_cu_star(dims, 10.0)
    assert est.mean > r_s(dims, 10.0) - 1.0


def test_estimate_statistics():
    est = estimate([1.0, 2.0, 3.0, 4.0])
    assert est.mean == 2.5
    assert est.stderr == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)
    with pytest.raises(ContractViolation):
        estimate([1.0])


def test_ergodic_average_is_deterministic():
    dims = NetworkDims(K=3, M=2, N=2)
    f = lambda r: cut_set_rate(r, 10.0)
    assert ergodic_average(f, dims, 50, 4) == ergodic_average(f, dims, 50, 4)

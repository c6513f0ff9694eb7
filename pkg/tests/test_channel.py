import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import crandn
from relaysim.channel import (
    ChannelRealization,
    NetworkDims,
    PowerConfig,
    end_to_end,
    relay_output_power,
    sample_realization,
    stack_uplink,
    trial_seed,
)
from relaysim.linalg import ContractViolation


def test_dims_validation():
    with pytest.raises(ContractViolation):
        NetworkDims(K=2, M=3, N=2)
    with pytest.raises(ContractViolation):
        NetworkDims(K=0, M=1, N=1)


def test_power_from_db():
    p = PowerConfig.from_db(10.0)
    assert p.p_source == pytest.approx(10.0) and p.p_relay == pytest.approx(10.0)
    assert PowerConfig.from_db(10.0, relay_db=0.0).p_relay == pytest.approx(1.0)
    with pytest.raises(ContractViolation):
        PowerConfig(0.0, 1.0)


def test_sample_shapes_and_determinism():
    dims = NetworkDims(K=3, M=2, N=4)
    a = sample_realization(dims, 11)
    b = sample_realization(dims, 11)
    assert a.uplinks.shape == (3, 4, 2) and a.downlinks.shape == (3, 2, 4)
    np.testing.assert_array_equal(a.uplinks, b.uplinks)
    np.testing.assert_array_equal(a.downlinks, b.downlinks)
    assert np.all(np.isfinite(a.uplinks))


def test_realizations_nest_across_k():
    big = sample_realization(NetworkDims(K=8, M=2, N=2), 5)
    small = sample_realization(NetworkDims(K=3, M=2, N=2), 5)
    np.testing.assert_array_equal(big.first(3).uplinks, small.uplinks)
    np.testing.assert_array_equal(big.first(3).downlinks, small.downlinks)


def test_entries_are_unit_variance_circular():
    real = sample_realization(NetworkDims(K=2000, M=2, N=2), 1)
    z = np.concatenate([real.uplinks.ravel(), real.downlinks.ravel()])
    assert np.mean(np.abs(z) ** 2) == pytest.approx(1.0, abs=0.02)
    assert np.var(z.real) == pytest.approx(0.5, abs=0.02)
    assert abs(np.mean(z**2)) < 0.02  # circular symmetry


def test_trial_seed_is_stable():
    assert trial_seed(0, 0) == trial_seed(0, 0)
    assert len({trial_seed(7, i) for i in range(100)}) == 100
    assert trial_seed(1, 0) != trial_seed(2, 0)


def test_stack_uplink_order():
    real = sample_realization(NetworkDims(K=3, M=2, N=2), 0)
    h = stack_uplink(real)
    np.testing.assert_array_equal(h[2:4], real.uplinks[1])


def test_end_to_end_identity_relay():
    # one relay, identity everywhere: y = x + n + z
    real = ChannelRealization.from_matrices(np.eye(2)[None], np.eye(2)[None])
    eff = end_to_end(real, np.eye(2)[None], 4.0)
    np.testing.assert_allclose(eff.h_eff, np.eye(2))
    np.testing.assert_allclose(eff.noise_cov, 2 * np.eye(2))
    assert eff.input_cov_scale == 2.0
    assert eff.mutual_information() == pytest.approx(np.log2(2.0))
    assert eff.per_stream_rate() == pytest.approx(np.log2(2.0))


def test_end_to_end_zero_relays_give_zero_rate(make_real):
    real = make_real(K=3)
    eff = end_to_end(real, np.zeros((3, 2, 2)), 10.0)
    assert eff.mutual_information() == pytest.approx(0.0, abs=1e-12)


def test_end_to_end_shape_check(make_real):
    with pytest.raises(ContractViolation):
        end_to_end(make_real(K=3), np.zeros((2, 2, 2)), 1.0)


@given(st.integers(0, 2**32 - 1))
def test_relay_power_closed_form_matches_loop(seed):
    rng = np.random.default_rng(seed)
    h = crandn(rng, 3, 2)
    f = crandn(rng, 3, 3)
    cov = 5.0 / 2 * h @ h.conj().T + np.eye(3)
    expected = np.trace(f @ cov @ f.conj().T).real
    assert relay_output_power(h, f, 5.0) == pytest.approx(expected, rel=1e-12)
    assert expected >= 0


def test_relay_power_monte_carlo(rng):
    h = crandn(rng, 2, 2)
    f = crandn(rng, 2, 2)
    n = 200_000
    x = crandn(rng, 2, n) * np.sqrt(3.0 / 2)
    r = h @ x + crandn(rng, 2, n)
    mc = np.mean(np.sum(np.abs(f @ r) ** 2, axis=0))
    assert mc == pytest.approx(relay_output_power(h, f, 3.0), rel=0.02)

"""Rayleigh-fading channel draws for the two-hop parallel relay network.

The transmitter and receiver carry ``M`` antennas, each of the ``K`` relays
carries ``N >= M``. Relay ``k`` sees ``r_k = H_k x + n_k`` (``H_k`` is
N x M) and the receiver sees ``y = sum_k G_k t_k + z`` (``G_k`` is M x N).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import ContractViolation, logdet_hermitian_psd

__all__ = [
    "NetworkDims",
    "PowerConfig",
    "ChannelRealization",
    "EffectiveChannel",
    "trial_seed",
    "sample_realization",
    "stack_uplink",
    "end_to_end",
    "relay_output_power",
]


@dataclass(frozen=True)
class NetworkDims:
    K: int
    M: int
    N: int

    def __post_init__(self):
        for name in ("K", "M", "N"):
            val = getattr(self, name)
            if int(val) != val or val < 1:
                raise ContractViolation(f"{name} must be a positive integer, got {val!r}")
        if self.N < self.M:
            raise ContractViolation(f"relay antennas N={self.N} must be >= M={self.M}")


@dataclass(frozen=True)
class PowerConfig:
    """Linear (not dB) power budgets of the source and of each relay."""

    p_source: float
    p_relay: float

    def __post_init__(self):
        if not (self.p_source > 0 and self.p_relay > 0):
            raise ContractViolation("powers must be positive")
        if not (np.isfinite(self.p_source) and np.isfinite(self.p_relay)):
            raise ContractViolation("powers must be finite")

    @classmethod
    def equal(cls, p: float) -> "PowerConfig":
        return cls(p_source=p, p_relay=p)

    @classmethod
    def from_db(cls, snr_db: float, relay_db: float | None = None) -> "PowerConfig":
        ps = 10.0 ** (snr_db / 10.0)
        pr = ps if relay_db is None else 10.0 ** (relay_db / 10.0)
        return cls(p_source=ps, p_relay=pr)


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """One draw of every uplink ``H_k`` (stacked ``(K, N, M)``) and
    downlink ``G_k`` (stacked ``(K, M, N)``)."""

    dims: NetworkDims
    uplinks: np.ndarray
    downlinks: np.ndarray

    def __post_init__(self):
        d = self.dims
        if self.uplinks.shape != (d.K, d.N, d.M):
            raise ContractViolation(f"uplinks shape {self.uplinks.shape} != {(d.K, d.N, d.M)}")
        if self.downlinks.shape != (d.K, d.M, d.N):
            raise ContractViolation(f"downlinks shape {self.downlinks.shape} != {(d.K, d.M, d.N)}")

    @classmethod
    def from_matrices(cls, uplinks, downlinks) -> "ChannelRealization":
        h = np.asarray(uplinks, dtype=complex)
        g = np.asarray(downlinks, dtype=complex)
        if h.ndim != 3 or g.ndim != 3:
            raise ContractViolation("expected stacks of shape (K, N, M) and (K, M, N)")
        dims = NetworkDims(K=h.shape[0], M=h.shape[2], N=h.shape[1])
        return cls(dims=dims, uplinks=h, downlinks=g)

    def first(self, k: int) -> "ChannelRealization":
        """The sub-network made of relays ``0 .. k-1``."""
        dims = NetworkDims(K=k, M=self.dims.M, N=self.dims.N)
        return ChannelRealization(dims, self.uplinks[:k], self.downlinks[:k])


@dataclass(frozen=True, eq=False)
class EffectiveChannel:
    """Equivalent point-to-point channel ``y = h_eff x + w``, ``w ~ CN(0, noise_cov)``,
    driven by white input of power ``input_cov_scale`` per stream."""

    h_eff: np.ndarray
    noise_cov: np.ndarray
    input_cov_scale: float

    def mutual_information(self) -> float:
        """Half-duplex mutual information in bits per channel use."""
        s = self.input_cov_scale
        signal = s * self.h_eff @ self.h_eff.conj().T
        nats = logdet_hermitian_psd(self.noise_cov + signal) - logdet_hermitian_psd(self.noise_cov)
        return 0.5 * nats / np.log(2.0)

    def per_stream_rate(self) -> float:
        """Half-duplex rate when each receive antenna decodes its own stream
        and treats the other streams as noise."""
        s = self.input_cov_scale
        power = s * np.abs(self.h_eff) ** 2
        signal = np.diag(power)
        interference = power.sum(axis=1) - signal
        noise = np.real(np.diag(self.noise_cov))
        sinr = signal / (interference + noise)
        return 0.5 * float(np.sum(np.log2(1.0 + sinr)))


def trial_seed(master_seed: int, index: int) -> int:
    """Derive the 64-bit seed of trial `index` from an experiment seed.

    Uses numpy's ``SeedSequence`` hashing with ``spawn_key=(index,)``, so the
    mapping is fixed and independent of evaluation order.
    """
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def sample_realization(dims: NetworkDims, seed: int) -> ChannelRealization:
    """Draw i.i.d. CN(0, 1) entries for all ``H_k`` and ``G_k``.

    Relays are drawn one after another from a single stream, so the
    realization for ``K`` relays is a prefix of the one for ``K + 1``
    under the same seed.
    """
    rng = np.random.default_rng(int(seed))
    raw = rng.standard_normal((dims.K, 2, dims.N, dims.M, 2)) * np.sqrt(0.5)
    z = raw[..., 0] + 1j * raw[..., 1]
    uplinks = z[:, 0]
    downlinks = np.swapaxes(z[:, 1], -1, -2).copy()
    return ChannelRealization(dims=dims, uplinks=uplinks, downlinks=downlinks)


def stack_uplink(real: ChannelRealization) -> np.ndarray:
    """The ``NK x M`` matrix ``[H_1; H_2; ...; H_K]``."""
    d = real.dims
    return real.uplinks.reshape(d.K * d.N, d.M)


def _hermitian(a):
    return np.conj(np.swapaxes(a, -1, -2))


def end_to_end(real: ChannelRealization, relay_mats, p_source: float) -> EffectiveChannel:
    """Assemble ``y = (sum G_k F_k H_k) x + sum G_k F_k n_k + z``.

    `relay_mats` is a ``(K, N, N)`` stack of relay matrices ``F_k``.
    """
    d = real.dims
    f = np.asarray(relay_mats, dtype=complex)
    if f.shape != (d.K, d.N, d.N):
        raise ContractViolation(f"relay matrices shape {f.shape} != {(d.K, d.N, d.N)}")
    gf = real.downlinks @ f
    h_eff = np.sum(gf @ real.uplinks, axis=0)
    noise_cov = np.eye(d.M, dtype=complex) + np.sum(gf @ _hermitian(gf), axis=0)
    return EffectiveChannel(h_eff=h_eff, noise_cov=noise_cov, input_cov_scale=p_source / d.M)


def relay_output_power(uplinks, relay_mats, p_source: float):
    """Expected relay transmit power ``E ||F_k (H_k x + n_k)||^2``.

    Closed form ``tr(F_k ((P_s/M) H_k H_k^H + I_N) F_k^H)`` for white input
    of power ``P_s / M`` per stream. Accepts a single ``H_k``/``F_k`` pair
    or ``(K, ...)`` stacks.
    """
    h = np.asarray(uplinks, dtype=complex)
    f = np.asarray(relay_mats, dtype=complex)
    n, m = h.shape[-2:]
    if f.shape[-2:] != (n, n):
        raise ContractViolation(f"relay matrix must be {n}x{n}, got {f.shape[-2:]}")
    cov = (p_source / m) * h @ _hermitian(h) + np.eye(n)
    out = np.real(np.einsum("...ij,...jl,...il->...", f, cov, np.conj(f)))
    return float(out) if np.ndim(out) == 0 else out

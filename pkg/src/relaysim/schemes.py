"""Amplify-and-forward relaying schemes and their per-realization rates.

CBS
    Relay ``k`` applies ``F_k = alpha * pinv(G_k) @ U_k^H`` where ``U_k`` is
    its ``N x M`` block of the left singular vectors of the stacked uplink.
    The end-to-end channel becomes ``alpha * (Lambda^{1/2} x' + n_u) + z``.
ICBS
    Same matrices, but relays whose load ``beta_k`` exceeds a threshold are
    switched off so the common gain ``alpha`` can grow.
BNOP
    Matched-filter baseline ``F_k ~ G_k^H H_k^H`` with per-stream decoding.

All rates are in bits per channel use and include the half-duplex 1/2.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .channel import (
    ChannelRealization,
    PowerConfig,
    end_to_end,
    relay_output_power,
    stack_uplink,
)
from .linalg import ContractViolation, logdet_hermitian_psd, pseudo_inverse, svd_thin

__all__ = [
    "Scheme",
    "SchemeParams",
    "BeamformPlan",
    "compute_plan",
    "relay_loads",
    "relay_load",
    "cbs_gain",
    "icbs_activate",
    "cbs_plan",
    "default_threshold",
    "relay_matrices",
    "icbs_channel",
    "rate_cbs",
    "rate_icbs",
    "optimal_threshold",
    "interference_norm",
    "bnop_matched_filter",
]

_LOG2 = np.log(2.0)


class Scheme(str, enum.Enum):
    CBS = "CBS"
    ICBS = "ICBS"
    BNOP = "BNOP"


@dataclass(frozen=True)
class SchemeParams:
    scheme: Scheme
    powers: PowerConfig
    beta_threshold: float | None = None

    def __post_init__(self):
        scheme = Scheme(self.scheme)
        object.__setattr__(self, "scheme", scheme)
        if scheme is Scheme.ICBS:
            if self.beta_threshold is None or not self.beta_threshold > 0:
                raise ContractViolation("ICBS needs a positive beta_threshold (inf allowed)")
        elif self.beta_threshold is not None:
            raise ContractViolation(f"{scheme.value} takes no beta_threshold")


@dataclass(frozen=True, eq=False)
class BeamformPlan:
    """Stacked-uplink SVD split per relay, with relay loads and activation.

    ``active`` is a boolean mask over relays (the relays left on) and
    ``alpha`` the common gain; both are ``None`` until a gain rule is applied.
    """

    u_blocks: np.ndarray
    v: np.ndarray
    lambdas: np.ndarray
    beta_loads: np.ndarray
    active: np.ndarray | None = None
    alpha: float | None = None

    @property
    def sigma(self) -> np.ndarray:
        return np.sqrt(self.lambdas)

    @property
    def active_set(self) -> tuple[int, ...]:
        if self.active is None:
            return tuple(range(len(self.beta_loads)))
        return tuple(int(k) for k in np.flatnonzero(self.active))

    @property
    def n_active(self) -> int:
        return len(self.active_set)

    @property
    def empty(self) -> bool:
        return self.n_active == 0


def default_threshold(K: int) -> float:
    """Activation threshold ``1 / ln K``; infinite (plain CBS) for a single relay."""
    if K < 1:
        raise ContractViolation("K must be >= 1")
    if K == 1:
        return float("inf")
    return 1.0 / np.log(K)


def _h(a):
    return np.conj(np.swapaxes(a, -1, -2))


def relay_loads(real: ChannelRealization, u_blocks, powers: PowerConfig) -> np.ndarray:
    """``beta_k = E ||pinv(G_k) U_k^H r_k||^2`` for every relay.

    Relays whose downlink is numerically rank deficient get ``+inf``.
    """
    g_pinv, rank = pseudo_inverse(real.downlinks, return_rank=True)
    f = g_pinv @ _h(u_blocks)
    loads = np.asarray(relay_output_power(real.uplinks, f, powers.p_source), dtype=float)
    loads = np.atleast_1d(loads)
    loads[rank < real.dims.M] = np.inf
    return loads


def compute_plan(real: ChannelRealization, powers: PowerConfig) -> BeamformPlan:
    """SVD of the stacked uplink truncated to M columns, split into relay blocks."""
    d = real.dims
    f = svd_thin(stack_uplink(real), rank=d.M)
    u_blocks = f.u.reshape(d.K, d.N, d.M)
    loads = relay_loads(real, u_blocks, powers)
    return BeamformPlan(u_blocks=u_blocks, v=f.v, lambdas=f.sigma**2, beta_loads=loads)


def relay_load(real: ChannelRealization, plan: BeamformPlan, k: int, powers: PowerConfig) -> float:
    return float(relay_loads(real, plan.u_blocks, powers)[k])


def _gain(loads, p_relay):
    peak = np.max(loads)
    if peak <= 0:
        raise ContractViolation("all relay loads are zero; gain is unbounded")
    return float(np.sqrt(p_relay / peak))


def cbs_gain(plan: BeamformPlan, powers: PowerConfig) -> float:
    """``alpha = sqrt(P_r / max_k beta_k)``; 0 if any relay load is infinite."""
    return _gain(plan.beta_loads, powers.p_relay)


def icbs_activate(plan: BeamformPlan, beta_threshold: float, powers: PowerConfig) -> BeamformPlan:
    """Keep relays with ``beta_k <= beta_threshold`` and size alpha on them.

    Returns a copy of `plan` with ``active`` and ``alpha`` set. An empty
    active set is legal and gets ``alpha = 0``.
    """
    if not beta_threshold > 0:
        raise ContractViolation("beta_threshold must be positive")
    loads = plan.beta_loads
    active = np.isfinite(loads) & (loads <= beta_threshold)
    alpha = _gain(loads[active], powers.p_relay) if active.any() else 0.0
    return replace(plan, active=active, alpha=alpha)


def _cbs_plan(plan: BeamformPlan, powers: PowerConfig) -> BeamformPlan:
    active = np.ones(len(plan.beta_loads), dtype=bool)
    return replace(plan, active=active, alpha=cbs_gain(plan, powers))


def relay_matrices(real: ChannelRealization, plan: BeamformPlan) -> np.ndarray:
    """``F_k = alpha pinv(G_k) U_k^H`` for active relays, zero otherwise."""
    if plan.alpha is None:
        raise ContractViolation("plan has no gain; apply cbs_gain or icbs_activate first")
    f = plan.alpha * pseudo_inverse(real.downlinks) @ _h(plan.u_blocks)
    if plan.active is not None:
        f = f * plan.active[:, None, None]
    return f


def icbs_channel(real: ChannelRealization, plan: BeamformPlan):
    """Equivalent channel after switching relays off.

    Returns ``(h_star, p_noise)`` with
    ``h_star = Lambda^{1/2} - sum_{k off} U_k^H H_k V`` and
    ``p_noise = alpha^2 sum_{k on} U_k^H U_k + I``.
    """
    m = real.dims.M
    active = plan.active if plan.active is not None else np.ones(real.dims.K, dtype=bool)
    off = ~active
    h_star = np.diag(plan.sigma).astype(complex)
    if off.any():
        leak = _h(plan.u_blocks[off]) @ real.uplinks[off]
        h_star = h_star - np.sum(leak, axis=0) @ plan.v
    on_blocks = plan.u_blocks[active]
    gram = np.sum(_h(on_blocks) @ on_blocks, axis=0) if active.any() else np.zeros((m, m))
    p_noise = plan.alpha**2 * gram + np.eye(m)
    return h_star, p_noise


def _rate_from_alpha(lambdas, alpha2, p_source, m):
    frac = alpha2 / (1.0 + alpha2)
    return 0.5 * float(np.sum(np.log1p(frac * p_source / m * lambdas))) / _LOG2


def rate_cbs(real: ChannelRealization, powers: PowerConfig, plan: BeamformPlan | None = None) -> float:
    """``1/2 log2 |I + alpha^2/(1+alpha^2) (P_s/M) Lambda|``."""
    if plan is None:
        plan = compute_plan(real, powers)
    alpha = cbs_gain(plan, powers)
    return _rate_from_alpha(plan.lambdas, alpha**2, powers.p_source, real.dims.M)


def _icbs_rate_from_parts(h_star, p_noise, alpha2, p_source, m):
    signal = alpha2 * (p_source / m) * h_star @ _h(h_star)
    nats = logdet_hermitian_psd(p_noise + signal) - logdet_hermitian_psd(p_noise)
    return 0.5 * nats / _LOG2


def rate_icbs(
    real: ChannelRealization,
    powers: PowerConfig,
    beta_threshold: float | None = None,
    plan: BeamformPlan | None = None,
) -> float:
    """``1/2 log2 |I + alpha^2 (P_s/M) H* H*^H P_n*^{-1}|``; 0 if no relay is on.

    `beta_threshold` defaults to ``1 / ln K``.
    """
    if beta_threshold is None:
        beta_threshold = default_threshold(real.dims.K)
    if plan is None:
        plan = compute_plan(real, powers)
    if plan.active is None or plan.alpha is None:
        plan = icbs_activate(plan, beta_threshold, powers)
    if plan.empty:
        return 0.0
    if plan.active.all():
        # nothing switched off: H* = Lambda^{1/2} and P_n* = (1 + alpha^2) I
        return _rate_from_alpha(plan.lambdas, plan.alpha**2, powers.p_source, real.dims.M)
    h_star, p_noise = icbs_channel(real, plan)
    return _icbs_rate_from_parts(h_star, p_noise, plan.alpha**2, powers.p_source, real.dims.M)


def optimal_threshold(
    real: ChannelRealization, powers: PowerConfig, plan: BeamformPlan | None = None
) -> tuple[float, float]:
    """Per-realization threshold that maximizes the ICBS rate.

    Every threshold activates a prefix of the relays sorted by load, so it
    suffices to scan the distinct loads. Returns ``(threshold, rate)``.
    """
    if plan is None:
        plan = compute_plan(real, powers)
    m = real.dims.M
    loads = plan.beta_loads
    order = np.argsort(loads, kind="stable")
    order = order[np.isfinite(loads[order]) & (loads[order] > 0)]
    if order.size == 0:
        return float("inf"), 0.0
    sorted_loads = loads[order]
    # only the last index of each tie group is a realizable threshold
    last = np.append(sorted_loads[1:] != sorted_loads[:-1], True)

    # With relays `on` active: h_star = sum_{on} U_k^H H_k V since the full sum is Lambda^{1/2}.
    leak = (_h(plan.u_blocks[order]) @ real.uplinks[order]) @ plan.v
    gram = _h(plan.u_blocks[order]) @ plan.u_blocks[order]
    h_star = np.cumsum(leak, axis=0)[last]
    gram = np.cumsum(gram, axis=0)[last]
    alpha = np.sqrt(powers.p_relay / sorted_loads[last])
    alpha2 = (alpha**2)[:, None, None]
    p_noise = alpha2 * gram + np.eye(m)
    rates = np.atleast_1d(_icbs_rate_from_parts(h_star, p_noise, alpha2, powers.p_source, m))
    if order.size == real.dims.K:
        rates[-1] = _rate_from_alpha(plan.lambdas, alpha[-1] ** 2, powers.p_source, m)
    best = int(np.argmax(rates))
    return float(sorted_loads[last][best]), float(rates[best])


def interference_norm(real: ChannelRealization, plan: BeamformPlan) -> float:
    """``v = || sum_{k off} U_k^H H_k ||_F^2`` for an activated plan."""
    if plan.active is None:
        return 0.0
    off = ~plan.active
    if not off.any():
        return 0.0
    total = np.sum(_h(plan.u_blocks[off]) @ real.uplinks[off], axis=0)
    return float(np.linalg.norm(total) ** 2)


def bnop_matched_filter(
    real: ChannelRealization, powers: PowerConfig, decoding: str = "per-stream"
) -> tuple[np.ndarray, float]:
    """Matched-filter relaying ``F_k = c_k G_k^H H_k^H``.

    Each ``c_k`` saturates the relay power budget. The source sends white
    input without precoding. With ``decoding="per-stream"`` (default) every
    receive antenna decodes one stream, treating the others as
    interference; ``"joint"`` gives the mutual information of the
    equivalent channel instead.

    Returns
    -------
    (relay_mats, rate)
    """
    raw = _h(real.downlinks) @ _h(real.uplinks)
    load = np.atleast_1d(relay_output_power(real.uplinks, raw, powers.p_source))
    scale = np.where(load > 0, np.sqrt(powers.p_relay / np.where(load > 0, load, 1.0)), 0.0)
    mats = scale[:, None, None] * raw
    eff = end_to_end(real, mats, powers.p_source)
    if decoding == "per-stream":
        rate = eff.per_stream_rate()
    elif decoding == "joint":
        rate = eff.mutual_information()
    else:
        raise ContractViolation(f"unknown decoding {decoding!r}")
    return mats, rate


def cbs_plan(real: ChannelRealization, powers: PowerConfig, plan: BeamformPlan | None = None) -> BeamformPlan:
    """Plan with every relay active and the CBS gain applied."""
    if plan is None:
        plan = compute_plan(real, powers)
    return _cbs_plan(plan, powers)

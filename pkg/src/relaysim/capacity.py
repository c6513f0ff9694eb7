"""Cut-set upper bound and the closed-form benchmark rates.

All values are bits per channel use, half-duplex factor included.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .channel import ChannelRealization, NetworkDims, sample_realization, stack_uplink, trial_seed
from .linalg import ContractViolation, svd_thin, water_fill

__all__ = [
    "BoundKind",
    "BoundValue",
    "RateEstimate",
    "cut_set_rate",
    "closed_form_cu_star",
    "r_s",
    "ergodic_average",
    "estimate",
]


class BoundKind(str, enum.Enum):
    CUT_SET_REALIZATION = "CUT_SET_REALIZATION"
    CUT_SET_ERGODIC = "CUT_SET_ERGODIC"
    CLOSED_FORM_CU_STAR = "CLOSED_FORM_CU_STAR"
    R_S = "R_S"


@dataclass(frozen=True)
class BoundValue:
    value: float
    kind: BoundKind

    @property
    def flagged(self) -> bool:
        """True for a negative ``R_S`` anchor (an asymptotic reference, not a rate)."""
        return self.value < 0


@dataclass(frozen=True)
class RateEstimate:
    """Monte Carlo mean with its standard error."""

    mean: float
    stderr: float
    trials: int
    aux: dict = field(default_factory=dict)


def estimate(samples, aux: dict | None = None) -> RateEstimate:
    """Sample mean and ``std / sqrt(n)`` of per-trial values (given in trial order)."""
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n < 2:
        raise ContractViolation("need at least two trials for a standard error")
    mean = float(np.mean(x))
    stderr = float(np.std(x, ddof=1) / np.sqrt(n))
    return RateEstimate(mean=mean, stderr=stderr, trials=n, aux=dict(aux or {}))


def cut_set_rate(real: ChannelRealization, p_source: float) -> float:
    """Half of the water-filled capacity of the stacked uplink ``H``."""
    lambdas = svd_thin(stack_uplink(real), rank=real.dims.M).sigma ** 2
    gains = lambdas[lambdas > 0]
    if gains.size == 0 or p_source == 0:
        return 0.0
    p = water_fill(gains, p_source)
    return 0.5 * float(np.sum(np.log2(1.0 + gains * p)))


def closed_form_cu_star(dims: NetworkDims, p_source: float) -> float:
    """``(M/2) log2(1 + K N P / M)``, an upper bound on the ergodic cut-set rate."""
    return 0.5 * dims.M * float(np.log2(1.0 + dims.K * dims.N * p_source / dims.M))


def r_s(dims: NetworkDims, p_source: float) -> float:
    """``(M/2) log2(K N P / M)``, the common asymptote of all the rates.

    Negative for tiny powers; returned unchanged with a warning.
    """
    snr = dims.K * dims.N * p_source / dims.M
    if snr <= 0:
        raise ContractViolation("K N P / M must be positive")
    value = 0.5 * dims.M * float(np.log2(snr))
    if value < 0:
        warnings.warn(f"R_S anchor is negative ({value:.4g}); it is not an achievable rate", stacklevel=2)
    return value


def ergodic_average(
    evaluator: Callable[[ChannelRealization], float],
    dims: NetworkDims,
    trials: int,
    seed: int,
) -> RateEstimate:
    """Average `evaluator` over `trials` channel draws.

    Trial ``i`` uses the realization seeded by ``trial_seed(seed, i)``; the
    result is therefore a pure function of ``(evaluator, dims, trials, seed)``.
    """
    if trials < 2:
        raise ContractViolation("trials must be >= 2")
    values = np.array(
        [evaluator(sample_realization(dims, trial_seed(seed, i))) for i in range(trials)],
        dtype=float,
    )
    return estimate(values)

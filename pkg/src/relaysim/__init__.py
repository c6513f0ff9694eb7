"""Monte Carlo simulation of cooperative beamforming in parallel MIMO relay networks."""

from importlib.metadata import PackageNotFoundError, version as _version

try:
    __version__ = _version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0+local"

from .capacity import closed_form_cu_star, cut_set_rate, r_s
from .channel import ChannelRealization, NetworkDims, PowerConfig, sample_realization
from .linalg import ContractViolation, NumericFailure, SingularMatrixError
from .schemes import bnop_matched_filter, compute_plan, optimal_threshold, rate_cbs, rate_icbs

__all__ = [
    "__version__",
    "ChannelRealization",
    "ContractViolation",
    "NetworkDims",
    "NumericFailure",
    "PowerConfig",
    "SingularMatrixError",
    "bnop_matched_filter",
    "closed_form_cu_star",
    "compute_plan",
    "cut_set_rate",
    "optimal_threshold",
    "r_s",
    "rate_cbs",
    "rate_icbs",
    "sample_realization",
]

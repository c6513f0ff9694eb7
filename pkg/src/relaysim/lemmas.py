"""Empirical checks of the random-matrix facts behind the ICBS analysis.

Distribution checks report a Kolmogorov-Smirnov distance and pass when it
is below the asymptotic 1% critical value ``1.63 / sqrt(n)``. Tail probes
report Wilson intervals; their constants are unknown, so only trends are
judged.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from .channel import NetworkDims, PowerConfig, sample_realization, trial_seed
from .linalg import ContractViolation, min_gram_eigenvalue, svd_thin
from .montecarlo import wilson_interval
from .schemes import compute_plan, icbs_activate, interference_norm

__all__ = [
    "KS_COEFF",
    "MIN_SAMPLES",
    "ProbeConfig",
    "DistCheckReport",
    "ConcentrationRow",
    "TailReport",
    "DeactivationReport",
    "ks_critical",
    "ks_statistic",
    "check_unitary_block_norm_dist",
    "check_min_eig_exponential",
    "check_lemma5_concentration",
    "lemma4_schedule",
    "probe_interference_tail",
    "tail_trend_ok",
    "probe_deactivation_prob",
    "lemma1_bound",
]

KS_COEFF = 1.63
MIN_SAMPLES = 100
_CHUNK = 2000


def ks_critical(n: int) -> float:
    return KS_COEFF / np.sqrt(n)


def ks_statistic(samples, cdf) -> float:
    """Two-sided sup distance between the empirical CDF and `cdf`."""
    return float(stats.kstest(np.asarray(samples, dtype=float), cdf).statistic)


def _complex_gaussian(rng, shape):
    raw = rng.standard_normal(shape + (2,)) * np.sqrt(0.5)
    return raw[..., 0] + 1j * raw[..., 1]


def _check_samples(samples):
    if samples < MIN_SAMPLES:
        raise ContractViolation(f"samples must be >= {MIN_SAMPLES}, got {samples}")


@dataclass(frozen=True)
class ProbeConfig:
    """Thresholds of the interference and deactivation probes.

    ``beta`` is the activation threshold, ``gamma`` the block-norm
    threshold, ``xi`` the interference threshold; ``delta = gamma / beta``.
    """

    dims: NetworkDims
    samples: int
    gamma: float
    xi: float
    beta: float
    seed: int = 0
    p_source: float = 10.0

    def __post_init__(self):
        _check_samples(self.samples)
        if not (self.gamma > 0 and self.xi > 0 and self.beta > 0):
            raise ContractViolation("thresholds must be positive")

    @property
    def delta(self) -> float:
        return self.gamma / self.beta


@dataclass(frozen=True)
class DistCheckReport:
    name: str
    statistic: float
    critical: float
    samples: int
    passed: bool
    empirical_mean: float
    empirical_var: float
    target_mean: float
    mean_zscore: float

    def to_dict(self) -> dict:
        return asdict(self)


def _dist_report(name, x, cdf, target_mean, target_std) -> DistCheckReport:
    n = x.size
    stat = ks_statistic(x, cdf)
    crit = ks_critical(n)
    z = (float(np.mean(x)) - target_mean) / (target_std / np.sqrt(n))
    return DistCheckReport(
        name=name,
        statistic=stat,
        critical=crit,
        samples=n,
        passed=bool(stat < crit),
        empirical_mean=float(np.mean(x)),
        empirical_var=float(np.var(x, ddof=1)),
        target_mean=target_mean,
        mean_zscore=float(z),
    )


def block_column_norms(dims: NetworkDims, samples: int, seed: int) -> np.ndarray:
    """``||W_i||^2`` for one column of one relay block of ``U``, one per draw.

    The block and column cycle with the sample index; by symmetry all of
    them share the same law.
    """
    rng = np.random.default_rng(seed)
    out = np.empty(samples)
    nk = dims.N * dims.K
    for start in range(0, samples, _CHUNK):
        count = min(_CHUNK, samples - start)
        h = _complex_gaussian(rng, (count, nk, dims.M))
        u = svd_thin(h, rank=dims.M).u
        idx = np.arange(start, start + count)
        k = idx % dims.K
        i = (idx // dims.K) % dims.M
        rows = k[:, None] * dims.N + np.arange(dims.N)
        w = u[np.arange(count)[:, None], rows, i[:, None]]
        out[start : start + count] = np.sum(np.abs(w) ** 2, axis=1)
    return out


def check_unitary_block_norm_dist(
    dims: NetworkDims, samples: int = 10_000, seed: int = 0, swap_parameters: bool = False
) -> DistCheckReport:
    """KS test of block column norms against ``Beta(N, NK - N)``.

    ``swap_parameters=True`` tests against the wrong law ``Beta(NK - N, N)``
    and is there to show the harness can fail.
    """
    _check_samples(samples)
    if dims.K < 2:
        raise ContractViolation("need K >= 2 relays")
    a, b = dims.N, dims.N * dims.K - dims.N
    if swap_parameters:
        a, b = b, a
    law = stats.beta(a, b)
    x = block_column_norms(dims, samples, seed)
    name = f"beta-dist(N={dims.N},K={dims.K},M={dims.M})" + (" swapped" if swap_parameters else "")
    return _dist_report(name, x, law.cdf, float(law.mean()), float(law.std()))


def min_eigenvalues_square(m: int, samples: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    out = np.empty(samples)
    for start in range(0, samples, _CHUNK):
        count = min(_CHUNK, samples - start)
        out[start : start + count] = min_gram_eigenvalue(_complex_gaussian(rng, (count, m, m)))
    return out


def check_min_eig_exponential(m: int, samples: int = 10_000, seed: int = 0, rate: float | None = None) -> DistCheckReport:
    """KS test of ``lambda_min(W W^H)`` for square ``m x m`` CN(0, 1) ``W``
    against the exponential law with rate ``m`` (or `rate` if given)."""
    _check_samples(samples)
    if m < 1:
        raise ContractViolation("m must be >= 1")
    rate = float(m if rate is None else rate)
    law = stats.expon(scale=1.0 / rate)
    x = min_eigenvalues_square(m, samples, seed)
    return _dist_report(f"min-eig(m={m},rate={rate:g})", x, law.cdf, 1.0 / rate, 1.0 / rate)


@dataclass(frozen=True)
class ConcentrationRow:
    s: int
    mean: float
    std: float
    trials: int


def check_lemma5_concentration(r: int, s_list, trials: int = 500, seed: int = 0) -> list[ConcentrationRow]:
    """Spread of ``lambda_min(A A^H) / s`` for ``r x s`` CN(0, 1) matrices."""
    if r < 1:
        raise ContractViolation("r must be >= 1")
    if trials < 2:
        raise ContractViolation("trials must be >= 2")
    rows = []
    for j, s in enumerate(s_list):
        if s < r:
            raise ContractViolation("need s >= r")
        rng = np.random.default_rng(trial_seed(seed, j))
        ratios = np.empty(trials)
        chunk = max(1, 2_000_000 // (r * s))
        for start in range(0, trials, chunk):
            count = min(chunk, trials - start)
            a = _complex_gaussian(rng, (count, r, s))
            ratios[start : start + count] = min_gram_eigenvalue(a) / s
        rows.append(ConcentrationRow(s=int(s), mean=float(np.mean(ratios)), std=float(np.std(ratios, ddof=1)), trials=trials))
    return rows


def lemma4_schedule(K: int) -> dict:
    """``beta = 1/ln K``, ``gamma = 2 ln K / K``, ``xi = K / ln^2 K``."""
    if K < 2:
        raise ContractViolation("the schedule needs K >= 2")
    lk = np.log(K)
    return {"beta": 1.0 / lk, "gamma": 2.0 * lk / K, "xi": K / lk**2}


def default_probe(dims: NetworkDims, samples: int = 2000, seed: int = 0, p_source: float = 10.0) -> ProbeConfig:
    return ProbeConfig(dims=dims, samples=samples, seed=seed, p_source=p_source, **lemma4_schedule(dims.K))


@dataclass(frozen=True)
class TailReport:
    K: int
    xi: float
    beta: float
    probability: float
    ci_low: float
    ci_high: float
    trials: int
    nonempty_off_frac: float
    mean_off_frac: float

    def to_dict(self) -> dict:
        return asdict(self)


def probe_interference_tail(cfg: ProbeConfig) -> TailReport:
    """Empirical ``P[v > xi]`` where ``v`` is the leakage norm of switched-off relays."""
    dims = cfg.dims
    powers = PowerConfig.equal(cfg.p_source)
    hits = 0
    nonempty = 0
    off_frac = 0.0
    for t in range(cfg.samples):
        real = sample_realization(dims, trial_seed(cfg.seed, t))
        plan = icbs_activate(compute_plan(real, powers), cfg.beta, powers)
        n_off = dims.K - plan.n_active
        nonempty += n_off > 0
        off_frac += n_off / dims.K
        hits += interference_norm(real, plan) > cfg.xi
    lo, hi = wilson_interval(hits, cfg.samples)
    return TailReport(
        K=dims.K,
        xi=cfg.xi,
        beta=cfg.beta,
        probability=hits / cfg.samples,
        ci_low=lo,
        ci_high=hi,
        trials=cfg.samples,
        nonempty_off_frac=nonempty / cfg.samples,
        mean_off_frac=off_frac / cfg.samples,
    )


def tail_trend_ok(reports: list[TailReport]) -> bool:
    """Tail probabilities fall along the K grid.

    Adjacent points must go down or have overlapping Wilson intervals;
    every non-adjacent pair must go down strictly.
    """
    rs = sorted(reports, key=lambda r: r.K)
    for i, a in enumerate(rs):
        for j in range(i + 1, len(rs)):
            b = rs[j]
            if b.probability < a.probability:
                continue
            overlap = b.ci_low <= a.ci_high and a.ci_low <= b.ci_high
            if j == i + 1 and overlap:
                continue
            return False
    return True


@dataclass(frozen=True)
class DeactivationReport:
    K: int
    beta: float
    gamma: float
    p_off: float
    p_off_ci: tuple[float, float]
    p_big_block: float
    p_big_block_ci: tuple[float, float]
    observations: int

    def to_dict(self) -> dict:
        return asdict(self)


def probe_deactivation_prob(
    dims: NetworkDims, beta: float, gamma: float, samples: int = 2000, seed: int = 0, p_source: float = 10.0
) -> DeactivationReport:
    """Frequencies of ``beta_k > beta`` (relay off) and ``||U_k||^2 > gamma``.

    Pooled over relays and realizations; the intervals treat the
    ``samples * K`` indicators as independent, which understates their width.
    """
    _check_samples(samples)
    powers = PowerConfig.equal(p_source)
    off = 0
    big = 0
    for t in range(samples):
        real = sample_realization(dims, trial_seed(seed, t))
        plan = compute_plan(real, powers)
        loads = plan.beta_loads
        off += int(np.sum(~(np.isfinite(loads) & (loads <= beta))))
        norms = np.sum(np.abs(plan.u_blocks) ** 2, axis=(1, 2))
        big += int(np.sum(norms > gamma))
    n = samples * dims.K
    return DeactivationReport(
        K=dims.K,
        beta=beta,
        gamma=gamma,
        p_off=off / n,
        p_off_ci=wilson_interval(off, n),
        p_big_block=big / n,
        p_big_block_ci=wilson_interval(big, n),
        observations=n,
    )


def lemma1_bound(dims: NetworkDims, xi: float, gamma: float, p_off: float, p_big_block: float) -> float:
    """Right-hand side ``M N K^2 / xi * (P[B_k] + gamma P[A_k])``."""
    return dims.M * dims.N * dims.K**2 / xi * (p_big_block + gamma * p_off)

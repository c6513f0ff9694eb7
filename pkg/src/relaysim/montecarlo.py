"""Paired Monte Carlo sweeps over relay count, SNR and relay-power rules.

Every grid point reuses the same per-trial channel seeds, so all schemes
(and all K, since realizations are nested) are compared on identical draws.
Per-trial values are gathered in trial order before averaging, which keeps
the output independent of the worker count.
"""

from __future__ import annotations

import logging
import math
import multiprocessing
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Sequence

import numpy as np
from scipy.stats import binomtest

from .capacity import RateEstimate, closed_form_cu_star, cut_set_rate, estimate, r_s
from .channel import NetworkDims, PowerConfig, sample_realization, trial_seed
from .linalg import ContractViolation
from .schemes import (
    bnop_matched_filter,
    cbs_gain,
    compute_plan,
    default_threshold,
    icbs_activate,
    optimal_threshold,
    rate_cbs,
    rate_icbs,
)

__all__ = [
    "RANDOM_SCHEMES",
    "CLOSED_FORM_SCHEMES",
    "ALL_SCHEMES",
    "ExperimentConfig",
    "Table",
    "relay_power",
    "wilson_interval",
    "evaluate_realization",
    "run_rate_vs_k",
    "run_rate_vs_snr",
    "run_relay_power_sweep",
    "run_outage_probe",
    "fit_slope",
]

log = logging.getLogger(__name__)

RANDOM_SCHEMES = ("CUT_SET", "ICBS", "CBS", "BNOP")
CLOSED_FORM_SCHEMES = ("CU_STAR", "R_S")
ALL_SCHEMES = RANDOM_SCHEMES + CLOSED_FORM_SCHEMES
MIN_REPORTED_TRIALS = 100

_RULE_ALIASES = {"equal": 0.0, "inv-sqrt-k": 0.5, "inv-k": 1.0, "inv-k2": 2.0}
_POWER_RULE = re.compile(r"^k\^-?(?P<exp>[0-9]*\.?[0-9]+)$")


def relay_power(rule: str, K: int, p: float) -> float:
    """Relay power ``P_r = P * K**(-e)`` for a named rule.

    Accepted names: ``equal``, ``inv-sqrt-k``, ``inv-k``, ``inv-k2`` and the
    generic form ``k^-<e>`` (for instance ``k^-0.75``).
    """
    return p * float(K) ** (-_rule_exponent(rule))


def _rule_exponent(rule: str) -> float:
    if rule in _RULE_ALIASES:
        return _RULE_ALIASES[rule]
    m = _POWER_RULE.match(rule)
    if m is None:
        raise ContractViolation(f"unknown relay power rule {rule!r}")
    return float(m.group("exp"))


def wilson_interval(successes: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    ci = binomtest(int(successes), int(n)).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass(frozen=True)
class ExperimentConfig:
    """Grid and sampling settings shared by every sweep.

    ``threshold`` selects the ICBS activation threshold: ``"log"`` uses
    ``1 / ln K``, ``"opt"`` picks the rate-maximizing threshold for each
    realization, and a number fixes it.
    """

    k_values: tuple[int, ...] = (4, 8, 16, 32, 64)
    M: int = 2
    N: int = 2
    snr_db: tuple[float, ...] = (10.0,)
    trials: int = 2000
    seed: int = 0
    schemes: tuple[str, ...] = ("CUT_SET", "ICBS", "BNOP")
    threshold: str | float = "opt"
    relay_power_rules: tuple[str, ...] = ("equal", "inv-sqrt-k", "inv-k2")
    workers: int = 1
    min_trials: int = MIN_REPORTED_TRIALS

    def __post_init__(self):
        if not self.k_values or not self.snr_db or not self.schemes:
            raise ContractViolation("grids must be nonempty")
        if self.trials < max(2, self.min_trials):
            raise ContractViolation(f"trials must be >= {max(2, self.min_trials)}, got {self.trials}")
        for k in self.k_values:
            NetworkDims(K=k, M=self.M, N=self.N)
        for s in self.schemes:
            if s not in ALL_SCHEMES:
                raise ContractViolation(f"unknown scheme {s!r}; choose from {ALL_SCHEMES}")
        if isinstance(self.threshold, str):
            if self.threshold not in ("log", "opt"):
                raise ContractViolation(f"threshold must be 'log', 'opt' or a number, got {self.threshold!r}")
        elif not self.threshold > 0:
            raise ContractViolation("numeric threshold must be positive")
        for rule in self.relay_power_rules:
            _rule_exponent(rule)
        if self.workers < 1:
            raise ContractViolation("workers must be >= 1")

    def dims(self, K: int) -> NetworkDims:
        return NetworkDims(K=K, M=self.M, N=self.N)


@dataclass
class Table:
    """Rows of a sweep plus free-form metadata (fitted slopes and the like)."""

    name: str
    columns: tuple[str, ...]
    rows: list[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def column(self, name: str, **where) -> list:
        return [r[name] for r in self.rows if all(r.get(k) == v for k, v in where.items())]

    def lookup(self, **where) -> dict:
        hits = [r for r in self.rows if all(r.get(k) == v for k, v in where.items())]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} rows match {where}")
        return hits[0]


# ---------------------------------------------------------------------------
# per-trial evaluation


def _icbs_threshold(real, powers, plan, threshold):
    if threshold == "opt":
        return optimal_threshold(real, powers, plan)[0]
    if threshold == "log":
        return default_threshold(real.dims.K)
    return float(threshold)


def evaluate_realization(real, powers: PowerConfig, schemes: Sequence[str], threshold="opt") -> dict:
    """Rates of the requested random schemes on one realization, plus gains.

    Keys: scheme names, ``CBS.alpha``, ``ICBS.alpha``, ``ICBS.active``,
    ``ICBS.empty``.
    """
    out: dict[str, float] = {}
    plan = None
    if {"ICBS", "CBS"} & set(schemes):
        plan = compute_plan(real, powers)
    if "CUT_SET" in schemes:
        out["CUT_SET"] = cut_set_rate(real, powers.p_source)
    if "CBS" in schemes:
        out["CBS"] = rate_cbs(real, powers, plan)
        out["CBS.alpha"] = cbs_gain(plan, powers)
    if "ICBS" in schemes:
        thr = _icbs_threshold(real, powers, plan, threshold)
        act = icbs_activate(plan, thr, powers)
        out["ICBS"] = rate_icbs(real, powers, plan=act)
        out["ICBS.alpha"] = act.alpha
        out["ICBS.active"] = float(act.n_active)
        out["ICBS.empty"] = float(act.empty)
    if "BNOP" in schemes:
        out["BNOP"] = bnop_matched_filter(real, powers)[1]
    return out


def _trial(index, *, dims, seed, power_points, schemes, threshold):
    real = sample_realization(dims, trial_seed(seed, index))
    return [evaluate_realization(real, pw, schemes, threshold) for pw in power_points]


def _chunk(func, indices):
    return [func(i) for i in indices]


def _map_trials(func: Callable[[int], object], trials: int, workers: int) -> list:
    """Evaluate ``func(i)`` for ``i < trials``; results come back in trial order."""
    if workers <= 1 or trials < 2 * workers:
        return [func(i) for i in range(trials)]
    n_chunks = min(trials, workers * 4)
    bounds = np.linspace(0, trials, n_chunks + 1).astype(int)
    chunks = [range(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    ctx = multiprocessing.get_context("spawn")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        parts = pool.map(partial(_chunk, func), chunks)
        return [item for part in parts for item in part]


def _collect(cfg: ExperimentConfig, K: int, power_points, schemes) -> list[dict[str, np.ndarray]]:
    """Per-trial values for every power point, as arrays in trial order."""
    func = partial(
        _trial,
        dims=cfg.dims(K),
        seed=cfg.seed,
        power_points=tuple(power_points),
        schemes=tuple(schemes),
        threshold=cfg.threshold,
    )
    results = _map_trials(func, cfg.trials, cfg.workers)
    out = []
    for j in range(len(power_points)):
        keys = results[0][j].keys()
        out.append({key: np.array([r[j][key] for r in results]) for key in keys})
    return out


_RATE_COLUMNS = ("mean_bits", "stderr", "trials", "mean_alpha", "mean_active", "empty_active_frac")


def _rate_row(scheme: str, values: dict, trials: int, K: int, closed: float | None = None) -> dict:
    if closed is not None:
        est = RateEstimate(mean=closed, stderr=0.0, trials=trials)
    else:
        est = estimate(values[scheme])
    row = {
        "K": K,
        "scheme": scheme,
        "mean_bits": est.mean,
        "stderr": est.stderr,
        "trials": est.trials,
        "mean_alpha": None,
        "mean_active": None,
        "empty_active_frac": None,
    }
    if scheme == "CBS":
        row["mean_alpha"] = float(np.mean(values["CBS.alpha"]))
        row["mean_active"] = float(K)
        row["empty_active_frac"] = 0.0
    elif scheme == "ICBS":
        row["mean_alpha"] = float(np.mean(values["ICBS.alpha"]))
        row["mean_active"] = float(np.mean(values["ICBS.active"]))
        row["empty_active_frac"] = float(np.mean(values["ICBS.empty"]))
    return row


def _closed_form(scheme: str, dims: NetworkDims, p: float) -> float:
    if scheme == "CU_STAR":
        return closed_form_cu_star(dims, p)
    return r_s(dims, p)


def _rows_for_point(cfg, K, values, p) -> list[dict]:
    rows = []
    for scheme in cfg.schemes:
        if scheme in CLOSED_FORM_SCHEMES:
            rows.append(_rate_row(scheme, values, cfg.trials, K, _closed_form(scheme, cfg.dims(K), p)))
        else:
            rows.append(_rate_row(scheme, values, cfg.trials, K))
    return rows


# ---------------------------------------------------------------------------
# sweeps


def run_rate_vs_k(cfg: ExperimentConfig) -> Table:
    """Rates against relay count at the first SNR of the grid."""
    p = 10.0 ** (cfg.snr_db[0] / 10.0)
    powers = PowerConfig.equal(p)
    random = [s for s in cfg.schemes if s in RANDOM_SCHEMES]
    table = Table("rate_vs_k", ("K", "scheme") + _RATE_COLUMNS, meta={"snr_db": cfg.snr_db[0]})
    for K in cfg.k_values:
        log.info("rate-vs-k: K=%d", K)
        values = _collect(cfg, K, [powers], random)[0] if random else {}
        table.rows.extend(_rows_for_point(cfg, K, values, p))
    return table


def fit_slope(snr_db: Sequence[float], means: Sequence[float]) -> float:
    """Least-squares slope of rate against ``log2 P`` over the top half of the grid.

    Units: bits per doubling of the power.
    """
    order = np.argsort(snr_db)
    x = np.asarray(snr_db, dtype=float)[order] / (10.0 * np.log10(2.0))
    y = np.asarray(means, dtype=float)[order]
    if x.size < 2:
        raise ContractViolation("slope needs at least two SNR points")
    top = max(2, math.ceil(x.size / 2))
    return float(np.polyfit(x[-top:], y[-top:], 1)[0])


def run_rate_vs_snr(cfg: ExperimentConfig) -> Table:
    """Rates against SNR at the first relay count, with high-SNR slopes in ``meta``."""
    if len(cfg.snr_db) < 2:
        raise ContractViolation("the SNR grid needs at least two points")
    K = cfg.k_values[0]
    points = [PowerConfig.from_db(db) for db in cfg.snr_db]
    random = [s for s in cfg.schemes if s in RANDOM_SCHEMES]
    per_point = _collect(cfg, K, points, random) if random else [{} for _ in points]
    table = Table("multiplexing", ("snr_db", "K", "scheme") + _RATE_COLUMNS, meta={"K": K})
    for db, pw, values in zip(cfg.snr_db, points, per_point):
        for row in _rows_for_point(cfg, K, values, pw.p_source):
            table.rows.append({"snr_db": db, **row})
    table.meta["slopes"] = {
        s: fit_slope(cfg.snr_db, table.column("mean_bits", scheme=s)) for s in cfg.schemes
    }
    table.meta["max_slope"] = cfg.M / 2
    return table


def run_relay_power_sweep(cfg: ExperimentConfig) -> Table:
    """ICBS rate under each relay-power rule, paired against ``P_r = P``.

    ``gap_bits`` is the mean per-trial difference ``R(P_r = P) - R(rule)``.
    """
    p = 10.0 ** (cfg.snr_db[0] / 10.0)
    rules = list(dict.fromkeys(("equal",) + tuple(cfg.relay_power_rules)))
    cols = ("K", "rule", "p_relay") + _RATE_COLUMNS + ("gap_bits", "gap_stderr")
    table = Table("relay_power", cols, meta={"snr_db": cfg.snr_db[0]})
    for K in cfg.k_values:
        log.info("relay-power: K=%d", K)
        points = [PowerConfig(p_source=p, p_relay=relay_power(r, K, p)) for r in rules]
        per_rule = dict(zip(rules, _collect(cfg, K, points, ["ICBS"])))
        base = per_rule["equal"]["ICBS"]
        for rule, pw in zip(rules, points):
            if rule not in cfg.relay_power_rules:
                continue
            values = per_rule[rule]
            row = _rate_row("ICBS", values, cfg.trials, K)
            gap = estimate(base - values["ICBS"])
            row.pop("scheme")
            table.rows.append(
                {"rule": rule, "p_relay": pw.p_relay, **row, "gap_bits": gap.mean, "gap_stderr": gap.stderr}
            )
    return table


def run_outage_probe(cfg: ExperimentConfig, margin_c: float = 2.0, margin_mode: str = "ergodic") -> Table:
    """Fraction of realizations whose ICBS rate falls below ``C_u - c / ln K``.

    ``margin_mode="ergodic"`` uses the sample mean of the cut-set rate as
    ``C_u``; ``"realization"`` uses each realization's own cut-set rate.
    """
    if margin_mode not in ("ergodic", "realization"):
        raise ContractViolation(f"unknown margin mode {margin_mode!r}")
    p = 10.0 ** (cfg.snr_db[0] / 10.0)
    cols = ("K", "target_bits", "outage", "ci_low", "ci_high", "trials", "mean_icbs_bits", "mean_cut_set_bits")
    table = Table("outage", cols, meta={"margin_c": margin_c, "margin_mode": margin_mode})
    for K in cfg.k_values:
        if K < 2:
            raise ContractViolation("outage margin c / ln K needs K >= 2")
        values = _collect(cfg, K, [PowerConfig.equal(p)], ["CUT_SET", "ICBS"])[0]
        icbs, cut = values["ICBS"], values["CUT_SET"]
        margin = margin_c / np.log(K)
        if margin_mode == "ergodic":
            target = np.full_like(cut, np.mean(cut) - margin)
        else:
            target = cut - margin
        hits = int(np.sum(icbs < target))
        lo, hi = wilson_interval(hits, cfg.trials)
        table.rows.append(
            {
                "K": K,
                "target_bits": float(np.mean(target)),
                "outage": hits / cfg.trials,
                "ci_low": lo,
                "ci_high": hi,
                "trials": cfg.trials,
                "mean_icbs_bits": float(np.mean(icbs)),
                "mean_cut_set_bits": float(np.mean(cut)),
            }
        )
    return table

"""Command-line front end.

Subcommands write a CSV table plus a JSON manifest into ``--out-dir``::

    relaysim rate-vs-k --M 2 --N 2 --snr-db 10 --k 4,8,16,32,64 --trials 2000 --seed 7
    relaysim multiplexing --K 4 --snr-db 10,20,30,40 --trials 2000
    relaysim relay-power --k 16,32,64,128 --rule equal,inv-sqrt-k,inv-k2
    relaysim outage --k 16,64 --margin-c 2
    relaysim validate-lemmas

Exit codes: 0 success, 1 a lemma check failed, 2 usage or config error,
3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from . import lemmas
from .channel import NetworkDims
from .linalg import ContractViolation, NumericFailure
from .montecarlo import (
    ALL_SCHEMES,
    ExperimentConfig,
    Table,
    run_outage_probe,
    run_rate_vs_k,
    run_rate_vs_snr,
    run_relay_power_sweep,
)

log = logging.getLogger("relaysim")

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
SEED_ENV = "RELAYSIM_SEED"
RATE_UNITS = "bits/channel-use (half-duplex factor included)"


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    config: dict
    version: str
    seed: int
    started: str
    finished: str = ""
    outputs: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        return cls(**json.loads(text))


# ---------------------------------------------------------------------------
# argument parsing


def _int_list(text: str) -> tuple[int, ...]:
    try:
        vals = tuple(int(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _float_list(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _str_list(text: str) -> tuple[str, ...]:
    vals = tuple(v.strip() for v in str(text).split(",") if v.strip())
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _threshold(text: str):
    if text in ("log", "opt"):
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("threshold must be 'log', 'opt' or a positive number")


def _common(p: argparse.ArgumentParser, snr_default: str, m_default=2):
    p.add_argument("--M", type=int, default=m_default, help="transmit/receive antennas")
    p.add_argument("--N", type=int, default=2, help="antennas per relay (N >= M)")
    p.add_argument("--snr-db", dest="snr_db", type=_float_list, default=_float_list(snr_default))
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--seed", type=int, default=None, help=f"master seed (falls back to ${SEED_ENV}, then 0)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir", dest="out_dir", default="results")
    p.add_argument("--config", default=None, help="flat JSON file of flag values; flags override it")


def _sweep_flags(p: argparse.ArgumentParser):
    p.add_argument(
        "--threshold",
        type=_threshold,
        default="opt",
        help="ICBS threshold: 'opt' (best per realization), 'log' (1/ln K) or a number",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relaysim", description=__doc__.split("\n\n")[0])
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rate-vs-k", help="rates against the number of relays")
    _common(p, "10")
    p.add_argument("--k", type=_int_list, default=_int_list("4,8,16,32,64"))
    p.add_argument("--schemes", type=_str_list, default=_str_list("CUT_SET,ICBS,BNOP"))
    _sweep_flags(p)

    p = sub.add_parser("multiplexing", help="rates against SNR with high-SNR slopes")
    _common(p, "10,20,30,40")
    p.add_argument("--K", type=int, default=4)
    p.add_argument("--schemes", type=_str_list, default=_str_list("CBS,ICBS,BNOP,CUT_SET,CU_STAR"))
    _sweep_flags(p)

    p = sub.add_parser("relay-power", help="ICBS under reduced relay power")
    _common(p, "10")
    p.add_argument("--k", type=_int_list, default=_int_list("16,32,64,128"))
    p.add_argument("--rule", type=_str_list, default=_str_list("equal,inv-sqrt-k,inv-k2"))
    _sweep_flags(p)

    p = sub.add_parser("outage", help="empirical ICBS outage below the cut-set rate")
    _common(p, "10")
    p.add_argument("--k", type=_int_list, default=_int_list("16,64"))
    p.add_argument("--margin-c", dest="margin_c", type=float, default=2.0)
    p.add_argument("--margin-mode", dest="margin_mode", choices=("ergodic", "realization"), default="ergodic")
    _sweep_flags(p)

    p = sub.add_parser("validate-lemmas", help="distribution and tail checks")
    _common(p, "10", m_default=None)
    p.add_argument(
        "--probe",
        choices=("all", "beta-dist", "min-eig", "lemma5", "interference-tail", "deactivation"),
        default="all",
    )
    p.add_argument("--samples", type=int, default=10_000, help="draws per distribution check")
    p.add_argument("--K", type=int, default=16)
    p.add_argument("--tail-k", dest="tail_k", type=_int_list, default=_int_list("16,32,64,128"))
    p.add_argument("--tail-trials", dest="tail_trials", type=int, default=2000)
    p.add_argument("--lemma5-s", dest="lemma5_s", type=_int_list, default=_int_list("500,2000,5000"))
    p.add_argument("--lemma5-trials", dest="lemma5_trials", type=int, default=500)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        cfg = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}")
    if not isinstance(cfg, dict):
        raise UsageError("config must be a flat JSON object")
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, value in cfg.items():
        key = key.replace("-", "_")
        if key not in actions or key in ("config", "help"):
            raise UsageError(f"unknown config key {key!r} for {args.command}")
        action = actions[key]
        if isinstance(value, list):
            value = ",".join(str(v) for v in value)
        try:
            defaults[key] = action.type(str(value)) if action.type else value
        except (argparse.ArgumentTypeError, ValueError) as exc:
            raise UsageError(f"bad config value for {key!r}: {exc}")
    subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"${SEED_ENV} must be an integer, got {env!r}")
    return 0


# ---------------------------------------------------------------------------
# output


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def table_to_csv(table: Table, header: str) -> str:
    buf = io.StringIO()
    buf.write(f"# {header} | rates in {RATE_UNITS} | columns: {','.join(table.columns)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([_fmt(row.get(c)) for c in table.columns])
    return buf.getvalue()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _write(out_dir: Path, name: str, text: str) -> str:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def _config_echo(args) -> dict:
    echo = {}
    for key, value in sorted(vars(args).items()):
        if key.startswith("_"):
            continue
        echo[key] = list(value) if isinstance(value, tuple) else value
    return echo


def _experiment(args, seed: int, k_values) -> ExperimentConfig:
    return ExperimentConfig(
        k_values=tuple(k_values),
        M=args.M,
        N=args.N,
        snr_db=tuple(args.snr_db),
        trials=args.trials,
        seed=seed,
        schemes=tuple(getattr(args, "schemes", ("ICBS",))),
        threshold=args.threshold,
        relay_power_rules=tuple(getattr(args, "rule", ("equal",))),
        workers=args.workers,
    )


def _single_snr(args):
    if len(args.snr_db) != 1:
        raise UsageError(f"{args.command} takes a single --snr-db value")


def _threshold_note(threshold) -> str:
    if threshold == "opt":
        return "ICBS threshold: best per realization"
    if threshold == "log":
        return "ICBS threshold: 1/ln K (natural log)"
    return f"ICBS threshold: {threshold}"


def _finish_table(args, seed, table: Table, header: str, summary: dict | None = None) -> int:
    manifest = RunManifest(command=args.command, config=_config_echo(args), version=__version__, seed=seed, started=args._started)
    out = Path(args.out_dir)
    manifest.outputs["table"] = _write(out, f"{table.name}.csv", table_to_csv(table, header))
    manifest.summary = summary or {}
    manifest.finished = _now()
    _write(out, f"{table.name}.manifest.json", manifest.to_json() + "\n")
    return EXIT_OK


def cmd_rate_vs_k(args, seed) -> int:
    _single_snr(args)
    cfg = _experiment(args, seed, args.k)
    table = run_rate_vs_k(cfg)
    header = f"relaysim rate-vs-k M={args.M} N={args.N} snr_db={args.snr_db[0]:g} seed={seed} | {_threshold_note(args.threshold)}"
    return _finish_table(args, seed, table, header)


def cmd_multiplexing(args, seed) -> int:
    if len(args.snr_db) < 2:
        raise UsageError("multiplexing needs at least two --snr-db points to fit a slope")
    cfg = _experiment(args, seed, (args.K,))
    table = run_rate_vs_snr(cfg)
    header = f"relaysim multiplexing M={args.M} N={args.N} K={args.K} seed={seed} | {_threshold_note(args.threshold)}"
    summary = {
        "slopes_bits_per_doubling": table.meta["slopes"],
        "max_multiplexing_gain": table.meta["max_slope"],
        "fit": "least squares of rate against log2 P over the top half of the SNR grid",
    }
    return _finish_table(args, seed, table, header, summary)


def cmd_relay_power(args, seed) -> int:
    _single_snr(args)
    cfg = _experiment(args, seed, args.k)
    table = run_relay_power_sweep(cfg)
    header = (
        f"relaysim relay-power M={args.M} N={args.N} snr_db={args.snr_db[0]:g} seed={seed} | "
        f"{_threshold_note(args.threshold)} | P_r = P * K^-e per rule; gap_bits = R(P_r=P) - R(rule), paired"
    )
    return _finish_table(args, seed, table, header)


def cmd_outage(args, seed) -> int:
    _single_snr(args)
    cfg = _experiment(args, seed, args.k)
    table = run_outage_probe(cfg, args.margin_c, args.margin_mode)
    header = (
        f"relaysim outage M={args.M} N={args.N} snr_db={args.snr_db[0]:g} seed={seed} | "
        f"{_threshold_note(args.threshold)} | target = C_u - {args.margin_c:g}/ln K ({args.margin_mode})"
    )
    return _finish_table(args, seed, table, header)


def run_lemma_checks(args, seed) -> dict:
    """Run the selected probes; returns ``{"checks": [...], "passed": bool}``."""
    if args.samples < lemmas.MIN_SAMPLES or args.tail_trials < lemmas.MIN_SAMPLES:
        raise UsageError(f"--samples and --tail-trials must be >= {lemmas.MIN_SAMPLES}")
    probe = args.probe
    p_source = 10.0 ** (args.snr_db[0] / 10.0)
    checks = []

    def add(name, passed, detail):
        checks.append({"probe": name, "passed": bool(passed), "detail": detail})

    if probe in ("all", "beta-dist"):
        m = args.M if args.M is not None else min(2, args.N)
        cases = [NetworkDims(K=args.K, M=m, N=args.N)]
        if probe == "all":
            cases.append(NetworkDims(K=2, M=1, N=1))
        for i, dims in enumerate(cases):
            rep = lemmas.check_unitary_block_norm_dist(dims, args.samples, seed + i)
            add("beta-dist", rep.passed, rep.to_dict())
    if probe in ("all", "min-eig"):
        m = args.M if args.M is not None else 2
        rep = lemmas.check_min_eig_exponential(m, args.samples, seed)
        mean_ok = abs(rep.mean_zscore) <= 3.0
        add("min-eig", rep.passed and mean_ok, rep.to_dict())
    if probe in ("all", "lemma5"):
        rows = lemmas.check_lemma5_concentration(2, args.lemma5_s, args.lemma5_trials, seed)
        in_band = all(0.7 <= r.mean <= 1.0 for r in rows if r.s >= 2000)
        tighter = abs(rows[-1].mean - 1) < abs(rows[0].mean - 1)
        add("lemma5", in_band and tighter, [asdict(r) for r in rows])
    tails = {}
    if probe in ("all", "interference-tail", "deactivation"):
        m = args.M if args.M is not None else 2
        k_grid = args.tail_k if probe != "deactivation" else (32,)
        for K in k_grid:
            cfg = lemmas.default_probe(NetworkDims(K=K, M=m, N=args.N), args.tail_trials, seed, p_source)
            tails[K] = lemmas.probe_interference_tail(cfg)
        if probe != "deactivation":
            reps = list(tails.values())
            add("interference-tail", lemmas.tail_trend_ok(reps), [r.to_dict() for r in reps])
    if probe in ("all", "deactivation"):
        m = args.M if args.M is not None else 2
        K = 32 if 32 in tails else min(tails)
        dims = NetworkDims(K=K, M=m, N=args.N)
        sched = lemmas.lemma4_schedule(K)
        rep = lemmas.probe_deactivation_prob(dims, sched["beta"], sched["gamma"], args.tail_trials, seed, p_source)
        bound = lemmas.lemma1_bound(dims, sched["xi"], sched["gamma"], rep.p_off, rep.p_big_block)
        detail = {**rep.to_dict(), "lemma1_bound": bound, "tail_probability": tails[K].probability}
        add("deactivation", bound >= tails[K].ci_low, detail)
    return {"checks": checks, "passed": all(c["passed"] for c in checks)}


def cmd_validate_lemmas(args, seed) -> int:
    result = run_lemma_checks(args, seed)
    manifest = RunManifest(command=args.command, config=_config_echo(args), version=__version__, seed=seed, started=args._started)
    out = Path(args.out_dir)
    buf = io.StringIO()
    buf.write(f"# relaysim validate-lemmas seed={seed} | KS critical value 1.63/sqrt(n) | columns: probe,passed\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("probe", "passed"))
    for c in result["checks"]:
        writer.writerow((c["probe"], c["passed"]))
    manifest.outputs["table"] = _write(out, "lemmas.csv", buf.getvalue())
    manifest.outputs["report"] = _write(out, "lemmas.json", json.dumps(result, indent=2, default=float) + "\n")
    manifest.summary = {"passed": result["passed"]}
    manifest.finished = _now()
    _write(out, "lemmas.manifest.json", manifest.to_json() + "\n")
    for c in result["checks"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['probe']}")
    return EXIT_OK if result["passed"] else EXIT_CHECK_FAILED


COMMANDS = {
    "rate-vs-k": cmd_rate_vs_k,
    "multiplexing": cmd_multiplexing,
    "relay-power": cmd_relay_power,
    "outage": cmd_outage,
    "validate-lemmas": cmd_validate_lemmas,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"relaysim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    args._started = _now()
    try:
        seed = _resolve_seed(args)
        return COMMANDS[args.command](args, seed)
    except (UsageError, ContractViolation) as exc:
        print(f"relaysim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericFailure as exc:
        print(f"relaysim: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

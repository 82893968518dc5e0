"""Command-line front end.

Subcommands: ``rates`` (closed-form or Monte-Carlo rate curves as CSV),
``switch`` (mode switching points as JSON), ``region`` (SU/MU operating
region as a CSV matrix) and ``validate`` (self-check suites).

Every output file starts with '#'-prefixed manifest lines (command, config
digest, seed, tool version) so it is self-describing and byte-reproducible.
Exit codes: 0 ok, 2 configuration error, 3 numeric error, 4 validation
failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import dataclass, replace

import numpy as np

from . import __version__
from .channel import ScenarioConfig
from .closed_form import (
    r_bf_delay,
    r_bf_perfect,
    r_bf_qd_approx,
    r_bf_quantized,
    r_zf_delay,
    r_zf_perfect_per_user,
    r_zf_qd_approx_per_user,
)
from .errors import ConfigurationError, NumericsError
from .mode_switch import find_switching_points, operating_region, table2_report
from .simulate import MonteCarloSpec, simulate_bf, simulate_mmse, simulate_zf
from . import validate as validate_suites

_CONFIG_FIELDS = {
    "n_tx": int,
    "n_users": int,
    "snr_db": (int, float),
    "feedback_bits": int,
    "doppler_ts": (int, float),
    "symbol_period_s": (int, float),
    "carrier_hz": (int, float),
    "velocity_kmh": (int, float),
    "csit_variant": str,
    "variant_params": dict,
}
_REQUIRED_FIELDS = ("n_tx", "n_users", "snr_db")


@dataclass
class RunManifest:
    command: str
    config_digest: str
    master_seed: int
    tool_version: str
    wall_time_s: float

    def header_lines(self):
        # wall time is intentionally not written: output files must be
        # byte-identical across reruns
        return [
            f"# command: {self.command}",
            f"# config_digest: {self.config_digest}",
            f"# master_seed: {self.master_seed}",
            f"# tool_version: {self.tool_version}",
        ]


def config_digest(data: dict) -> str:
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return "sha256:" + hashlib.sha256(canonical.encode()).hexdigest()


def load_config(path: str):
    """Parse and validate a scenario config file; returns (config, digest)."""
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ConfigurationError("config: top level must be a JSON object")
    for key, value in data.items():
        if key not in _CONFIG_FIELDS:
            raise ConfigurationError(f"config.{key}: unknown field")
        expected = _CONFIG_FIELDS[key]
        if value is not None and not isinstance(value, expected):
            raise ConfigurationError(
                f"config.{key}: expected {getattr(expected, '__name__', expected)}, "
                f"got {type(value).__name__}"
            )
    for key in _REQUIRED_FIELDS:
        if key not in data:
            raise ConfigurationError(f"config.{key}: required field missing")
    return ScenarioConfig(**data), config_digest(data)


def parse_grid(spec: str):
    parts = spec.split(":")
    if len(parts) == 1:
        return [float(parts[0])]
    if len(parts) == 3:
        lo, step, hi = (float(p) for p in parts)
        if step <= 0 or hi < lo:
            raise ConfigurationError(f"bad grid {spec!r}: need lo <= hi and step > 0")
        return [float(v) for v in np.round(np.arange(lo, hi + step / 2, step), 9)]
    raise ConfigurationError(f"bad grid {spec!r}: expected 'value' or 'lo:step:hi'")


def parse_range(spec: str):
    parts = spec.split(":")
    if len(parts) != 2:
        raise ConfigurationError(f"bad range {spec!r}: expected 'lo:hi'")
    lo, hi = float(parts[0]), float(parts[1])
    if not lo < hi:
        raise ConfigurationError(f"bad range {spec!r}: need lo < hi")
    return lo, hi


def _threads(args) -> int:
    env = os.environ.get("MODESIM_THREADS")
    if env is not None:
        return max(1, int(env))
    if args.threads is not None:
        return max(1, args.threads)
    return os.cpu_count() or 1


def _fmt(x) -> str:
    # shortest round-trip decimal
    return repr(float(x))


def _emit(path: str | None, lines) -> None:
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _default_csit(cfg: ScenarioConfig) -> str:
    return "delayed" if cfg.feedback_bits is None else "quantized_delayed"


def _quantized_only(cfg: ScenarioConfig) -> ScenarioConfig:
    # static channel: quantization is the only imperfection
    return replace(cfg, doppler_ts=0.0, csit_variant="delay", variant_params={})


def _closed_point(cfg: ScenarioConfig, mode: str, csit: str):
    """(sum_rate, per_user list) from the closed forms at one SNR."""
    p, nt, u = cfg.snr_linear, cfg.n_tx, cfg.n_users
    if mode == "bf":
        if csit == "perfect":
            value = r_bf_perfect(p, nt)
        elif csit == "delayed":
            value = r_bf_delay(cfg)
        elif csit == "quantized":
            value = r_bf_quantized(p, nt, cfg.feedback_bits)
        else:
            value = r_bf_qd_approx(cfg)
        return value, [value]
    if mode == "zf":
        if csit == "perfect":
            per = r_zf_perfect_per_user(p, u)
        elif csit == "delayed":
            per = r_zf_delay(cfg)
        elif csit == "quantized":
            per = r_zf_qd_approx_per_user(_quantized_only(cfg))
        else:
            per = r_zf_qd_approx_per_user(cfg)
        return u * per, [per] * u
    raise ConfigurationError("no closed form for MMSE precoding; use --method mc")


def cmd_rates(args) -> int:
    cfg, digest = load_config(args.config)
    csit = args.csit or _default_csit(cfg)
    if csit.startswith("quantized") and cfg.feedback_bits is None:
        raise ConfigurationError(f"csit {csit!r} requires feedback_bits in the config")
    snr_grid = parse_grid(args.snr_db) if args.snr_db else [cfg.snr_db]
    threads = _threads(args)
    mc = MonteCarloSpec(n_trials=args.trials, master_seed=args.seed)
    start = time.perf_counter()

    n_user_cols = 1 if args.mode == "bf" else cfg.n_users
    rows = []
    try:
        for snr_db in snr_grid:
            point = cfg.at_snr_db(snr_db)
            if args.method == "closed":
                value, per_user = _closed_point(point, args.mode, csit)
                std_err = ""
            else:
                sim = {"bf": simulate_bf, "zf": simulate_zf, "mmse": simulate_mmse}[args.mode]
                est = sim(point, csit, mc, n_threads=threads)
                value, per_user, std_err = est.mean_bps_hz, est.per_user, _fmt(est.std_error)
            cells = [_fmt(snr_db), _fmt(value), std_err] + [_fmt(v) for v in per_user]
            rows.append(",".join(cells))
    except NumericsError:
        print(f"scenario: {json.dumps(vars(cfg) | {'csit': csit}, default=str)}", file=sys.stderr)
        raise

    manifest = RunManifest(
        command=f"rates --mode {args.mode} --method {args.method} "
                f"--snr-db {args.snr_db or cfg.snr_db} --trials {args.trials} --seed {args.seed}",
        config_digest=digest, master_seed=args.seed,
        tool_version=__version__, wall_time_s=time.perf_counter() - start,
    )
    header = ",".join(["snr_db", "rate_bps_hz", "std_error"]
                      + [f"per_user_{i + 1}" for i in range(n_user_cols)])
    _emit(args.out, manifest.header_lines() + [header] + rows)
    return 0


def cmd_switch(args) -> int:
    cfg, digest = load_config(args.config)
    lo, hi = parse_range(args.snr_range)
    start = time.perf_counter()
    report = find_switching_points(cfg, (lo, hi), tol_db=args.tol_db)
    manifest = RunManifest(
        command=f"switch --snr-range {args.snr_range}",
        config_digest=digest, master_seed=0,
        tool_version=__version__, wall_time_s=time.perf_counter() - start,
    )
    payload = {
        "manifest": {
            "command": manifest.command,
            "config_digest": manifest.config_digest,
            "master_seed": manifest.master_seed,
            "tool_version": manifest.tool_version,
        },
        "crossings_db": report.crossings_db,
        "active_mode": [
            {"snr_db": [a, b], "mode": mode} for (a, b), mode in report.active_mode
        ],
        "method": report.method,
    }
    _emit(args.out, [json.dumps(payload, indent=2)])
    return 0


def cmd_region(args) -> int:
    cfg, digest = load_config(args.config)
    snr_grid = parse_grid(args.snr_db)
    axis_grid = parse_grid(args.grid)
    if args.axis in ("bits", "ntx"):
        axis_grid = [int(v) for v in axis_grid]
    start = time.perf_counter()
    region = operating_region(cfg, args.axis, axis_grid, snr_grid)
    manifest = RunManifest(
        command=f"region --axis {args.axis} --grid {args.grid} --snr-db {args.snr_db}",
        config_digest=digest, master_seed=0,
        tool_version=__version__, wall_time_s=time.perf_counter() - start,
    )
    header = ",".join([region.axis2_name] + [_fmt(p) for p in region.axis1_grid])
    rows = [
        ",".join([str(value)] + row)
        for value, row in zip(region.axis2_grid, region.cell_mode)
    ]
    _emit(args.out, manifest.header_lines() + [header] + rows)
    return 0


def cmd_validate(args) -> int:
    threads = _threads(args)
    checks = validate_suites.run_suite(args.suite, trials=args.trials, seed=args.seed,
                                       n_threads=threads)
    failures = 0
    for check in checks:
        status = "PASS" if check.passed else "FAIL"
        print(f"{status} {check.name}: {check.detail}")
        failures += 0 if check.passed else 1
    if failures:
        print(f"{failures} of {len(checks)} checks failed")
        return 4
    print(f"all {len(checks)} checks passed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modesim",
        description="SU/MU MIMO rates under CSI delay and limited feedback",
    )
    parser.add_argument("--version", action="version", version=f"modesim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_rates = sub.add_parser("rates", help="rate-vs-SNR curves (CSV)")
    p_rates.add_argument("config")
    p_rates.add_argument("--mode", choices=("bf", "zf", "mmse"), required=True)
    p_rates.add_argument("--method", choices=("closed", "mc"), required=True)
    p_rates.add_argument("--snr-db", help="grid 'lo:step:hi' or single value (dB)")
    p_rates.add_argument("--csit",
                         choices=("perfect", "delayed", "quantized", "quantized_delayed"),
                         help="CSIT assumption (default: most impaired the config supports)")
    p_rates.add_argument("--trials", type=int, default=100_000)
    p_rates.add_argument("--seed", type=int, default=0)
    p_rates.add_argument("--threads", type=int)
    p_rates.add_argument("--out")
    p_rates.set_defaults(func=cmd_rates)

    p_switch = sub.add_parser("switch", help="SU/MU switching points (JSON)")
    p_switch.add_argument("config")
    p_switch.add_argument("--snr-range", required=True, help="'lo:hi' in dB")
    p_switch.add_argument("--tol-db", type=float, default=0.01)
    p_switch.add_argument("--out")
    p_switch.set_defaults(func=cmd_switch)

    p_region = sub.add_parser("region", help="SU/MU operating region (CSV matrix)")
    p_region.add_argument("config")
    p_region.add_argument("--axis", choices=("doppler", "bits", "ntx"), required=True)
    p_region.add_argument("--grid", required=True, help="axis grid 'lo:step:hi'")
    p_region.add_argument("--snr-db", default="-10:0.5:60", help="SNR grid 'lo:step:hi'")
    p_region.add_argument("--out")
    p_region.set_defaults(func=cmd_region)

    p_val = sub.add_parser("validate", help="run a self-check suite")
    p_val.add_argument("--suite", choices=("numerics", "distributions", "bounds", "paper"),
                       required=True)
    p_val.add_argument("--trials", type=int, default=100_000)
    p_val.add_argument("--seed", type=int, default=0)
    p_val.add_argument("--threads", type=int)
    p_val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericsError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except (ConfigurationError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

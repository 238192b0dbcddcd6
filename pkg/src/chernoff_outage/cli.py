"""Command-line interface: ``chernoff-outage {threshold,sweep,simulate,verify}``.

Exit codes: 0 success, 1 invariant violation found by ``verify``, 2 usage
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import Method
from .mimo import SIM_METHODS, MarkovChannelConfig, SimConfig, run_outage_experiment
from .ncx2 import NCX2Params, NumericalError, exact_threshold
from .verify import bound_validity, estimate, rows_as_dicts, sampling_check

SCHEMA_VERSION = 1
EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

THRESHOLD_METHODS = [m.value for m in Method]
SWEEP_COLUMNS = ["parameter", "value", "method", "threshold", "achieved_cdf", "exact", "gap_to_exact", "flags"]
SIM_SWEEP_COLUMNS = ["parameter", "value", "method", "mean_threshold", "median_threshold",
                     "mean_inv_threshold", "mean_inv_gain", "failures", "trials", "infeasible"]
TRIAL_COLUMNS = ["trial", "method", "threshold", "gain", "m2", "sigma2"]
HIST_COLUMNS = ["method", "bin_left", "bin_right", "density"]

SIM_DEFAULTS = {
    "n_tx": 16, "n_rx": 4, "carrier_hz": 3.5e9, "velocity_mps": 20.0, "lag_s": 5e-4,
    "epsilon": 1e-6, "trials": 10_000, "seed": 0, "methods": ["cher"],
    "delta_beta": "abs:1e-10", "ratio_switch": 120.0, "normalization": "effective",
    "workers": 1, "bins": 50,
}


class UsageError(Exception):
    pass


def fmt(x) -> str:
    """Round-trip exact text for floats."""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def parse_delta_beta(text: str | None):
    """``abs:<v>``, ``rel:<v>`` or a bare absolute value -> ``(mode, value)``."""
    if text is None:
        return None
    mode, _, raw = text.partition(":") if ":" in text else ("abs", "", text)
    try:
        value = float(raw)
    except ValueError:
        raise UsageError(f"invalid --delta-beta {text!r}") from None
    if mode not in ("abs", "rel") or not value > 0:
        raise UsageError(f"invalid --delta-beta {text!r}; expected abs:<v> or rel:<v> with v > 0")
    return mode, value


def resolve_delta_beta(spec, params: NCX2Params):
    if spec is None:
        return None
    mode, value = spec
    return value * params.mean() if mode == "rel" else value


def check_epsilon(eps: float) -> float:
    if not 0.0 < eps < 1.0:
        raise UsageError("epsilon must lie in (0,1)")
    return eps


def make_params(k, sigma2, m2) -> NCX2Params:
    try:
        return NCX2Params(k, sigma2, m2)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def write_csv(path, columns, rows, config: dict, kind: str) -> None:
    out = sys.stdout if path in (None, "-") else open(path, "w", newline="", encoding="utf-8")
    try:
        out.write(f"# schema: chernoff-outage/{kind} v{SCHEMA_VERSION}\n")
        out.write(f"# version: {__version__}\n")
        out.write(f"# config: {json.dumps(config, sort_keys=True)}\n")
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([fmt(row[c]) for c in columns])
    finally:
        if out is not sys.stdout:
            out.close()


def read_csv(path):
    """Parse a CSV written by :func:`write_csv` into ``(comments, rows)``."""
    comments, lines = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            (comments if line.startswith("#") else lines).append(line)
    return comments, list(csv.DictReader(lines))


def emit_json(obj, path=None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path in (None, "-"):
        print(text)
    else:
        Path(path).write_text(text + "\n", encoding="utf-8")


def cmd_threshold(args) -> int:
    params = make_params(args.k, args.sigma2, args.m2)
    eps = check_epsilon(args.epsilon)
    delta = resolve_delta_beta(parse_delta_beta(args.delta_beta), params)
    start = time.perf_counter()
    res = estimate(params, eps, args.method, delta, args.ratio_switch)
    elapsed = time.perf_counter() - start
    res = res.with_cdf(params)
    emit_json({
        "method": str(res.method),
        "value": res.value,
        "achieved_cdf": res.achieved_cdf,
        "iterations": res.iterations,
        "wall_time_us": elapsed * 1e6,
        "flags": sorted(res.flags),
    })
    return EXIT_OK


def grid_from_args(args) -> list[float]:
    if args.values:
        grid = [float(v) for v in args.values.split(",")]
    else:
        if args.start is None or args.stop is None or args.step is None:
            raise UsageError("give --values or all of --start/--stop/--step")
        if not args.step > 0:
            raise UsageError("--step must be positive")
        count = int(math.floor((args.stop - args.start) / args.step + 1e-9)) + 1
        grid = [args.start + i * args.step for i in range(count)]
    if not grid:
        raise UsageError("sweep range is empty")
    return grid


def split_methods(text: str, allowed) -> list[str]:
    methods = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in methods if m not in allowed]
    if not methods or bad:
        raise UsageError(f"invalid methods {bad or text!r}; choose from {', '.join(allowed)}")
    return methods


def cmd_sweep(args) -> int:
    grid = grid_from_args(args)
    db_spec = parse_delta_beta(args.delta_beta)
    config = {k: v for k, v in vars(args).items() if k != "func"}
    if args.param == "tx_antennas":
        methods = split_methods(args.methods, SIM_METHODS)
        sim, _ = sim_config_from(args, {})
        rows = []
        for value in grid:
            for method in methods:
                cfg = replace(sim, n_tx=int(value), method=method)
                res = run_outage_experiment(cfg)
                rows.append({"parameter": "tx_antennas", "value": int(value), "method": method,
                             "mean_threshold": res.mean_threshold,
                             "median_threshold": res.median_threshold,
                             "mean_inv_threshold": res.mean_inv_threshold,
                             "mean_inv_gain": res.mean_inv_gain,
                             "failures": res.outage.failures, "trials": res.outage.trials,
                             "infeasible": res.infeasible})
        write_csv(args.out, SIM_SWEEP_COLUMNS, rows, config, "sim-sweep")
        return EXIT_OK

    methods = split_methods(args.methods, THRESHOLD_METHODS)
    rows = []
    for value in grid:
        m2 = value if args.param == "m2" else args.m2
        eps = check_epsilon(value if args.param == "epsilon" else args.epsilon)
        params = make_params(args.k, args.sigma2, m2)
        exact = exact_threshold(params, eps)
        delta = resolve_delta_beta(db_spec, params)
        for method in methods:
            res = estimate(params, eps, method, delta, args.ratio_switch).with_cdf(params)
            rows.append({"parameter": args.param, "value": value, "method": method,
                         "threshold": res.value, "achieved_cdf": res.achieved_cdf,
                         "exact": exact, "gap_to_exact": exact - res.value,
                         "flags": "|".join(sorted(res.flags))})
    if args.format == "json":
        emit_json({"schema": f"chernoff-outage/sweep v{SCHEMA_VERSION}", "config": config,
                   "rows": rows}, args.out)
    else:
        write_csv(args.out, SWEEP_COLUMNS, rows, config, "sweep")
    return EXIT_OK


def sim_config_from(args, file_cfg: dict) -> tuple[SimConfig, dict]:
    """Defaults < config file < command-line flags."""
    merged = dict(SIM_DEFAULTS)
    merged.update(file_cfg)
    for key in SIM_DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    if isinstance(merged["methods"], str):
        merged["methods"] = [m.strip() for m in merged["methods"].split(",") if m.strip()]
    mode, db = parse_delta_beta(str(merged["delta_beta"]))
    if mode != "abs":
        raise UsageError("simulate/sweep over antennas accept only absolute --delta-beta")
    check_epsilon(float(merged["epsilon"]))
    try:
        channel = MarkovChannelConfig(float(merged["carrier_hz"]), float(merged["velocity_mps"]),
                                      float(merged["lag_s"]))
        return SimConfig(n_tx=int(merged["n_tx"]), n_rx=int(merged["n_rx"]), channel=channel,
                         epsilon=float(merged["epsilon"]), method=merged["methods"][0],
                         trials=int(merged["trials"]), seed=int(merged["seed"]), delta_beta=db,
                         ratio_switch=float(merged["ratio_switch"]),
                         normalization=merged["normalization"], workers=int(merged["workers"]),
                         keep_trials=True), merged
    except (ValueError, IndexError) as exc:
        raise UsageError(str(exc)) from None


def histogram_rows(method: str, values: np.ndarray, bins: int):
    density, edges = np.histogram(values, bins=bins, density=True)
    return [{"method": method, "bin_left": edges[i], "bin_right": edges[i + 1], "density": density[i]}
            for i in range(bins)], 0.5 * (edges[np.argmax(density)] + edges[np.argmax(density) + 1])


def cmd_simulate(args) -> int:
    file_cfg = {}
    if args.config:
        try:
            file_cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        unknown = set(file_cfg) - set(SIM_DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    base, merged = sim_config_from(args, file_cfg)
    methods = split_methods(",".join(merged["methods"]), SIM_METHODS)
    summaries, trial_rows, hist_rows = [], [], []
    for method in methods:
        res = run_outage_experiment(replace(base, method=method))
        summary = res.summary()
        hist, mode = histogram_rows(method, res.thresholds, int(merged["bins"]))
        summary["mode_threshold"] = float(mode)
        summaries.append(summary)
        hist_rows.extend(hist)
        if args.trials_out:
            trial_rows.extend({"trial": i, "method": method, "threshold": t, "gain": g, "m2": m, "sigma2": s}
                              for i, (t, g, m, s) in enumerate(zip(res.thresholds, res.gains, res.m2, res.sigma2)))
    echo = {k: v for k, v in merged.items()}
    if args.trials_out:
        write_csv(args.trials_out, TRIAL_COLUMNS, trial_rows, echo, "trials")
    if args.hist_out:
        write_csv(args.hist_out, HIST_COLUMNS, hist_rows, echo, "histogram")
    emit_json({"schema": f"chernoff-outage/simulate v{SCHEMA_VERSION}", "config": echo,
               "summaries": summaries}, args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    params = make_params(args.k, args.sigma2, args.m2)
    epsilons = [check_epsilon(float(e)) for e in args.epsilons.split(",")]
    methods = split_methods(args.methods, THRESHOLD_METHODS)
    delta = resolve_delta_beta(parse_delta_beta(args.delta_beta), params)
    report = {"params": asdict(params)}
    ok = True
    if args.samples > 0:
        dkw = sampling_check(params, args.samples, args.seed, args.alpha)
        report["dkw"] = asdict(dkw)
        ok &= dkw.passed
    rows = bound_validity(params, epsilons, methods, delta)
    report["bounds"] = rows_as_dicts(rows)
    report["violations"] = sum(r.violation for r in rows)
    ok &= report["violations"] == 0
    report["passed"] = bool(ok)
    emit_json(report, args.out)
    return EXIT_OK if ok else EXIT_VIOLATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chernoff-outage", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def dist_flags(p, m2_default=0.0):
        p.add_argument("--k", type=int, default=4, help="degrees of freedom K")
        p.add_argument("--sigma2", type=float, default=1.0)
        p.add_argument("--m2", type=float, default=m2_default)
        p.add_argument("--epsilon", type=float, default=1e-6)
        p.add_argument("--delta-beta", default=None, help="abs:<v> | rel:<v> | <v> (absolute)")
        p.add_argument("--ratio-switch", type=float, default=None, help="hybrid z2 switch on m2/sigma2")

    p = sub.add_parser("threshold", help="single threshold query")
    dist_flags(p)
    p.add_argument("--method", choices=THRESHOLD_METHODS, default="cher")
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("sweep", help="parameter sweep to CSV/JSON")
    dist_flags(p)
    p.add_argument("--param", choices=["m2", "epsilon", "tx_antennas"], default="m2")
    p.add_argument("--values", default=None, help="comma-separated grid")
    p.add_argument("--start", type=float)
    p.add_argument("--stop", type=float)
    p.add_argument("--step", type=float)
    p.add_argument("--methods", default="cher,poly,aty_first,aty_closer,sankaran_z1,sankaran_z2")
    p.add_argument("--out", default="-")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    sim_flags(p, with_methods=False)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="MIMO beamforming-gain Monte Carlo")
    p.add_argument("--config", default=None, help="JSON file with simulation settings")
    sim_flags(p, with_methods=True)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--delta-beta", dest="delta_beta", default=None)
    p.add_argument("--ratio-switch", dest="ratio_switch", type=float, default=None)
    p.add_argument("--bins", type=int, default=None)
    p.add_argument("--out", default="-", help="summary JSON path")
    p.add_argument("--trials-out", default=None, help="per-trial CSV path")
    p.add_argument("--hist-out", default=None, help="threshold histogram CSV path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="empirical CDF and bound-validity audit")
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--m2", type=float, default=10.0)
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--epsilons", default="1e-9,1e-8,1e-7,1e-6,1e-5,1e-4,1e-3,1e-2")
    p.add_argument("--methods", default="cher")
    p.add_argument("--delta-beta", default=None)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_verify)
    return parser


def sim_flags(p, with_methods: bool) -> None:
    p.add_argument("--n-tx", dest="n_tx", type=int, default=None, help="transmit antennas M")
    p.add_argument("--n-rx", dest="n_rx", type=int, default=None, help="receive antennas N")
    p.add_argument("--carrier-hz", dest="carrier_hz", type=float, default=None)
    p.add_argument("--velocity", dest="velocity_mps", type=float, default=None)
    p.add_argument("--lag", dest="lag_s", type=float, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--normalization", choices=["effective", "unit"], default=None)
    if with_methods:
        p.add_argument("--methods", default=None, help="comma-separated simulation methods")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"chernoff-outage: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"chernoff-outage: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"chernoff-outage: I/O error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``flhdc {scenario-gen,convergence,optimize,sweep}``.

Exit codes: 0 success, 2 bad input, 3 infeasible, 4 dataset error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from datetime import datetime, timezone

from . import reporting
from .energy import dbm_to_watts
from .fedsim import ConvergenceTable, FedConfig, measure_convergence
from .mnist import IDXError
from .optimizer import (
    baseline_fixed_frequency,
    baseline_fixed_power,
    optimize_dimension,
    sweep_time,
)
from .privacy import PrivacyParams
from .scenario import (
    ScenarioConfig,
    generate_scenario,
    load_mnist,
    scenario_from_dict,
    scenario_to_dict,
    synth_dataset,
)

EXIT_OK = 0
EXIT_BAD_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_DATASET = 4

log = logging.getLogger("flhdc")


class BadInput(Exception):
    pass


class DatasetError(Exception):
    pass


def parse_int_list(text: str) -> list[int]:
    """``"3000,4000"`` or ``"3000:10000:1000"`` (inclusive stop)."""
    text = text.strip()
    if ":" in text:
        parts = [int(p) for p in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise argparse.ArgumentTypeError(f"expected start:stop:step, got {text!r}")
        return list(range(parts[0], parts[1] + 1, parts[2]))
    return [int(p) for p in text.split(",") if p]


def parse_float_list(text: str) -> list[float]:
    return [float(p) for p in text.split(",") if p]


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--config", help="JSON file of option defaults (keys are option names)")
    parser.add_argument("--out-dir", default=".")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flhdc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scenario-gen", help="write a scenario JSON file")
    _common(p)
    p.add_argument("--users", type=int, default=50)
    p.add_argument("--radius", type=float, default=500.0, help="cell radius, m")
    p.add_argument("--T", type=float, default=30.0, help="completion-time limit, s")
    p.add_argument("--dims", type=parse_int_list, default=list(range(3000, 10001, 1000)))
    p.add_argument("--samples", type=int, default=1200, help="local samples per user")
    p.add_argument("--fmax", type=float, default=2.3e9, help="max CPU frequency, Hz")
    p.add_argument("--pmax", type=float, help="max transmit power, W (default 0.5)")
    p.add_argument("--pmax-dbm", type=float, help="max transmit power, dBm")
    p.add_argument("--bandwidth", type=float, default=1e6, help="total bandwidth, Hz")
    p.add_argument("--n0-dbm-hz", type=float, default=-174.0, help="noise PSD, dBm/Hz")
    p.add_argument("--gamma", type=float, default=1e-28)
    p.add_argument("--kappa", type=float, default=10.0, help="uplink bits per dimension")
    p.add_argument("--error-ratio", type=float, default=0.4)
    p.add_argument("--rayleigh", action="store_true", help="add Rayleigh fading to gains")
    p.add_argument("--table-in", help="convergence table to embed instead of the defaults")
    p.set_defaults(func=cmd_scenario_gen)

    p = sub.add_parser("convergence", help="Monte Carlo rounds-to-accuracy table")
    _common(p)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--mnist-dir", help="directory with the four MNIST IDX files")
    src.add_argument("--synthetic", type=float, metavar="SEPARATION",
                     help="use Gaussian synthetic data with this class separation")
    src.add_argument("--table-in", help="skip simulation and re-emit this table")
    p.add_argument("--dims", type=parse_int_list, default=[3000, 6000, 10000])
    p.add_argument("--target", type=float, default=0.88)
    p.add_argument("--epsilon", type=float, default=25.0)
    p.add_argument("--delta", type=float, default=1e-5)
    p.add_argument("--no-dp", action="store_true", help="disable clipping and noise")
    p.add_argument("--clip-scale", type=float, default=1.0, help="clip bound = scale * sqrt(d)")
    p.add_argument("--users", type=int, default=50)
    p.add_argument("--shard-size", type=int, default=1200)
    p.add_argument("--classes", type=int, default=10, help="classes for --synthetic")
    p.add_argument("--features", type=int, default=64, help="features for --synthetic")
    p.add_argument("--rounds-max", type=int, default=100)
    p.add_argument("--replications", type=int, default=5)
    p.add_argument("--levels", type=int, default=16)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--test-limit", type=int)
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("optimize", help="choose dimension, frequency and power")
    _common(p)
    p.add_argument("--scenario", required=True)
    p.add_argument("--table-in", help="convergence table overriding the scenario's")
    p.add_argument("--T", type=float, help="override the scenario's completion-time limit, s")
    p.add_argument("--baselines", default="", help="comma list of fixed-freq, fixed-power")
    p.add_argument("--p-fixed", type=float, help="fixed-power baseline power, W (default P_max/2)")
    p.add_argument("--f-fixed", type=float, help="fixed-frequency baseline, Hz (default f_max)")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sweep", help="energy of every scheme versus the time limit")
    _common(p)
    p.add_argument("--scenario", required=True)
    p.add_argument("--table-in")
    p.add_argument("--T-list", type=parse_float_list, default=[15, 20, 25, 30, 35, 40])
    p.add_argument("--fixed-dims", type=parse_int_list, default=[3000, 5000])
    p.set_defaults(func=cmd_sweep)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    try:
        with open(known.config) as fh:
            overrides = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise BadInput(f"cannot read config {known.config}: {exc}") from exc
    subparser = parser._subparsers._group_actions[0].choices.get(known.command)
    if subparser is None:
        return
    dests = {a.dest for a in subparser._actions}
    unknown = set(overrides) - dests
    if unknown:
        raise BadInput(f"unknown config keys: {sorted(unknown)}")
    subparser.set_defaults(**overrides)


def _config_of(args) -> dict:
    return {k: v for k, v in vars(args).items()
            if k not in ("func", "out_dir", "verbose", "config")}


def _out(args, name: str) -> str:
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


def _load_scenario(args):
    try:
        with open(args.scenario) as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise BadInput(f"cannot read scenario: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise BadInput(f"scenario is not valid JSON: {exc}") from exc
    try:
        scenario, _ = scenario_from_dict(obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise BadInput(f"invalid scenario: {exc}") from exc
    if getattr(args, "table_in", None):
        table = _read_table(args.table_in)
        scenario.convergence = dict(table.entries)
        scenario.dims = sorted(table.entries)
    if getattr(args, "T", None) is not None:
        scenario = scenario.with_T(args.T)
    inputs = [args.scenario] + ([args.table_in] if getattr(args, "table_in", None) else [])
    return scenario, inputs


def _read_table(path) -> ConvergenceTable:
    try:
        return reporting.read_convergence(path)
    except (OSError, KeyError, ValueError) as exc:
        raise BadInput(f"cannot read convergence table {path}: {exc}") from exc


def cmd_scenario_gen(args) -> tuple[int, list[str], dict]:
    if args.pmax is not None and args.pmax_dbm is not None:
        raise BadInput("give --pmax or --pmax-dbm, not both")
    p_max = dbm_to_watts(args.pmax_dbm) if args.pmax_dbm is not None else (
        0.5 if args.pmax is None else args.pmax)
    if args.users < 1 or args.radius <= 0 or args.T <= 0 or not args.dims:
        raise BadInput("need --users >= 1, --radius > 0, --T > 0 and a non-empty --dims")
    cfg = ScenarioConfig(users=args.users, radius=args.radius, seed=args.seed, T=args.T,
                         dims=args.dims, samples_per_user=args.samples, f_max=args.fmax,
                         P_max=p_max, error_ratio=args.error_ratio, bandwidth=args.bandwidth,
                         n0_dbm_hz=args.n0_dbm_hz, gamma=args.gamma, kappa=args.kappa,
                         rayleigh=args.rayleigh)
    convergence = _read_table(args.table_in).entries if args.table_in else None
    try:
        scenario, placement = generate_scenario(cfg, convergence)
    except ValueError as exc:
        raise BadInput(str(exc)) from exc
    manifest = reporting.make_manifest("scenario-gen", _config_of(args), args.seed,
                                       [args.table_in] if args.table_in else [])
    path = _out(args, "scenario.json")
    reporting.write_json(path, scenario_to_dict(scenario, placement), manifest)
    return EXIT_OK, [path], manifest


def _dataset(args):
    if args.synthetic is not None:
        per_class = math.ceil(args.users * args.shard_size / args.classes)
        return synth_dataset(args.features, args.classes, per_class, args.synthetic,
                             seed=args.seed, test_per_class=200), []
    if not args.mnist_dir:
        raise DatasetError("no dataset: pass --mnist-dir, --synthetic or --table-in")
    try:
        return load_mnist(args.mnist_dir), [os.path.join(args.mnist_dir, f)
                                            for f in sorted(os.listdir(args.mnist_dir))]
    except (OSError, IDXError) as exc:
        raise DatasetError(str(exc)) from exc


def cmd_convergence(args) -> tuple[int, list[str], dict]:
    ext = args.format
    path = _out(args, f"convergence.{ext}")
    if args.table_in:
        table = _read_table(args.table_in)
        manifest = reporting.make_manifest("convergence", _config_of(args), args.seed,
                                           [args.table_in])
        reporting.write_convergence(path, table, manifest, ext)
        return EXIT_OK, [path], manifest
    data, inputs = _dataset(args)
    try:
        privacy = (PrivacyParams.disabled() if args.no_dp else
                   PrivacyParams(epsilon_target=args.epsilon, delta=args.delta,
                                 clip_scale=args.clip_scale))
        cfg = FedConfig(U=args.users, N=data.n_classes, J_max=args.rounds_max, eta=args.eta,
                        target_accuracy=args.target, privacy=privacy, seed=args.seed,
                        shard_size=args.shard_size, levels=args.levels,
                        test_limit=args.test_limit)
    except ValueError as exc:
        raise BadInput(str(exc)) from exc
    try:
        table = measure_convergence(cfg, args.dims, data, args.replications)
    except ValueError as exc:
        raise DatasetError(str(exc)) from exc
    manifest = reporting.make_manifest("convergence", _config_of(args), args.seed, inputs)
    reporting.write_convergence(path, table, manifest, ext)
    return EXIT_OK, [path], manifest


def cmd_optimize(args) -> tuple[int, list[str], dict]:
    scenario, inputs = _load_scenario(args)
    wanted = [b.strip() for b in args.baselines.split(",") if b.strip()]
    unknown = set(wanted) - {"fixed-freq", "fixed-power"}
    if unknown:
        raise BadInput(f"unknown baselines {sorted(unknown)}")
    results = [optimize_dimension(scenario)]
    if "fixed-freq" in wanted:
        results.append(baseline_fixed_frequency(scenario, args.f_fixed))
    if "fixed-power" in wanted:
        results.append(baseline_fixed_power(scenario, args.p_fixed))
    manifest = reporting.make_manifest("optimize", _config_of(args), args.seed, inputs)
    outputs = []

    path = _out(args, "optimize.json")
    reporting.write_json(path, {"T": scenario.T,
                                "results": [r.to_dict() for r in results]}, manifest)
    outputs.append(path)

    columns = ["d", "J_d"] + [r.scheme for r in results]
    rows = [dict({"d": d, "J_d": scenario.convergence[d]},
                 **{r.scheme: r.energy_by_dim.get(d) for r in results})
            for d in sorted(set(scenario.dims))]
    opt = results[0]
    alloc_cols = ["user", "f", "p", "E_comp", "E_tx", "completion_time"]
    alloc = [{"user": i, "f": u.f, "p": u.p, "E_comp": u.E_comp, "E_tx": u.E_tx,
              "completion_time": u.completion_time} for i, u in enumerate(opt.per_user)]
    if args.format == "csv":
        for name, schema, cols, body in (
                ("energy_by_dim.csv", reporting.ENERGY_BY_DIM_SCHEMA, columns, rows),
                ("allocation.csv", reporting.ALLOCATION_SCHEMA, alloc_cols, alloc)):
            p = _out(args, name)
            reporting.write_csv(p, schema, cols, body, manifest)
            outputs.append(p)
    else:
        p = _out(args, "energy_by_dim.json")
        reporting.write_json(p, {"columns": columns, "rows": rows}, manifest)
        outputs.append(p)

    if not opt.feasible:
        print(json.dumps({"error": "infeasible",
                          "reasons": {str(d): r for d, r in opt.infeasible_reasons.items()}}),
              file=sys.stderr)
        return EXIT_INFEASIBLE, outputs, manifest
    print(f"d* = {opt.d_star}  E = {opt.E_total:.6g} J")
    return EXIT_OK, outputs, manifest


def cmd_sweep(args) -> tuple[int, list[str], dict]:
    scenario, inputs = _load_scenario(args)
    try:
        rows = sweep_time(scenario, args.T_list, args.fixed_dims)
    except ValueError as exc:
        raise BadInput(str(exc)) from exc
    manifest = reporting.make_manifest("sweep", _config_of(args), args.seed, inputs)
    columns = list(rows[0]) if rows else ["T"]
    path = _out(args, f"sweep.{args.format}")
    if args.format == "csv":
        reporting.write_csv(path, reporting.SWEEP_SCHEMA, columns, rows, manifest)
    else:
        reporting.write_json(path, {"columns": columns, "rows": rows}, manifest)
    return EXIT_OK, [path], manifest


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
    except BadInput as exc:
        print(f"flhdc: error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_BAD_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    started = datetime.now(timezone.utc)
    try:
        code, outputs, manifest = args.func(args)
    except BadInput as exc:
        print(f"flhdc: error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except DatasetError as exc:
        print(f"flhdc: dataset error: {exc}", file=sys.stderr)
        return EXIT_DATASET
    reporting.write_sidecar(args.out_dir, manifest, started, outputs)
    return code


if __name__ == "__main__":
    sys.exit(main())

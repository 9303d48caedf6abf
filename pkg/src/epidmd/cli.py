"""``epidmd`` command-line interface.

Exit codes: 0 success, 1 runtime failure, 2 configuration or usage error.
Every command writes ``<output>.manifest.json`` next to its primary output.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time

from . import __version__, dmd, evaluation, plotting
from .epinet import ScenarioConfig, simulate
from .errors import ConfigError, EpidmdError
from .snapshot import read_series_csv, write_series_csv

logger = logging.getLogger("epidmd")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


class UsageError(Exception):
    pass


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _require_file(path: str) -> str:
    if not os.path.isfile(path):
        raise UsageError(f"input file not found: {path}")
    return path


def _policy(args) -> dmd.RankPolicy:
    if args.rank is not None:
        return dmd.FixedRank(args.rank)
    return dmd.EnergyThreshold(args.energy if args.energy is not None else 0.99)


def _policy_echo(policy) -> dict:
    if isinstance(policy, dmd.FixedRank):
        return {"rank": policy.r}
    return {"energy": policy.fraction}


def cmd_simulate(args) -> dict:
    path = _require_file(args.config)
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        data = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError("config", f"invalid JSON ({exc})") from None
    config = ScenarioConfig.from_dict(data, seed=args.seed)
    series = simulate(config, threads=args.threads)
    write_series_csv(series, args.out)
    logger.info("simulated %d days x %d farms -> %s", series.T, series.D, args.out)
    return {"config_digest": hashlib.sha256(raw).hexdigest(), "seed": config.seed, "outputs": [args.out]}


def cmd_fit(args) -> dict:
    series = read_series_csv(_require_file(args.series))
    model = dmd.fit_series(series, _policy(args))
    spectrum_out = args.spectrum_out or os.path.splitext(args.out)[0] + ".spectrum.csv"
    dmd.save_model(model, args.out)
    dmd.write_spectrum_csv(model, spectrum_out)
    logger.info("fit rank-%d model -> %s", model.rank, args.out)
    return {"outputs": [args.out, spectrum_out], "options": _policy_echo(_policy(args))}


def cmd_predict(args) -> dict:
    model = dmd.load_model(_require_file(args.model))
    t0 = 0
    if args.anchor:
        anchor = read_series_csv(_require_file(args.anchor))
        if anchor.node_ids != model.node_ids:
            raise ConfigError("--anchor", "node ids differ from the model's")
        model = model.with_amplitudes(anchor.values[-1])
        t0 = anchor.t0 + anchor.T - 1
    write_series_csv(dmd.predict_series(model, args.steps, t0=t0), args.out)
    return {"outputs": [args.out], "options": {"steps": args.steps}}


def cmd_eval(args) -> dict:
    series = read_series_csv(_require_file(args.series))
    policy = _policy(args)
    report = evaluation.rolling_forecast(
        series,
        policy,
        test_fraction=args.test_frac,
        refit_policy=args.refit,
        horizon=args.horizon,
        normalizer=args.normalizer,
    )
    echo = {
        "series": os.path.basename(args.series),
        "test_fraction": args.test_frac,
        "refit": args.refit,
        "horizon": args.horizon,
        "normalizer": args.normalizer,
        **_policy_echo(policy),
    }
    evaluation.save_report(report, args.out, echo)
    outputs = [args.out]
    if args.predictions_out:
        write_series_csv(report.prediction_series(), args.predictions_out)
        outputs.append(args.predictions_out)
    logger.info("mean NRMSE %.4f%% over %d nodes", report.mean_nrmse, series.D - report.n_degenerate)
    return {"outputs": outputs, "options": echo}


def cmd_plot(args) -> dict:
    inputs = [_require_file(p) for p in args.inputs]
    if args.kind == "series":
        if len(inputs) > 2:
            raise UsageError("series plots take an actual CSV and an optional prediction CSV")
        actual = read_series_csv(inputs[0], nonnegative=False)
        predicted = read_series_csv(inputs[1], nonnegative=False) if len(inputs) > 1 else None
        svg = plotting.plot_series(actual, predicted)
    else:
        if len(inputs) != 1:
            raise UsageError(f"{args.kind} plots take exactly one model JSON")
        model = dmd.load_model(inputs[0])
        svg = plotting.plot_spectrum(model) if args.kind == "spectrum" else plotting.plot_modes(model)
    plotting.save_svg(svg, args.out)
    return {"outputs": [args.out], "options": {"kind": args.kind}}


def cmd_replay(args) -> dict:
    with open(_require_file(args.manifest), encoding="utf-8") as fh:
        manifest = json.load(fh)
    cwd = os.getcwd()
    os.chdir(manifest.get("cwd", cwd))
    try:
        code = main(manifest["argv"])
        if code != EXIT_OK:
            raise EpidmdError(f"replayed command exited with {code}")
        mismatched = [p for p, digest in manifest.get("output_digests", {}).items() if _sha256(p) != digest]
    finally:
        os.chdir(cwd)
    if mismatched:
        raise EpidmdError(f"replay produced different bytes for: {', '.join(mismatched)}")
    logger.info("replay reproduced %d outputs", len(manifest.get("output_digests", {})))
    return {}


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def _fraction(text: str) -> float:
    v = float(text)
    if not 0.0 < v <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1], got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="override the RNG seed")
    common.add_argument("--threads", type=_positive_int, default=argparse.SUPPRESS, help="worker threads")
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS, help="only log warnings")

    parser = argparse.ArgumentParser(prog="epidmd", parents=[common], description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"epidmd {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="run a scenario and write the snapshot CSV")
    p.add_argument("config")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_simulate)

    def rank_flags(p):
        g = p.add_mutually_exclusive_group()
        g.add_argument("--rank", type=_positive_int, help="fixed truncation rank")
        g.add_argument("--energy", type=_fraction, help="energy fraction to retain (default 0.99)")

    p = sub.add_parser("fit", parents=[common], help="fit an exact DMD model")
    p.add_argument("series")
    rank_flags(p)
    p.add_argument("-o", "--out", required=True, help="model JSON path")
    p.add_argument("--spectrum-out", help="spectrum CSV path (default <out>.spectrum.csv)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", parents=[common], help="forecast from a fitted model")
    p.add_argument("model")
    p.add_argument("--steps", type=_nonneg_int, required=True)
    p.add_argument("--anchor", help="series CSV whose last row anchors the forecast")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", parents=[common], help="rolling one-step forecast evaluation")
    p.add_argument("series")
    rank_flags(p)
    p.add_argument("--test-frac", type=float, default=0.2)
    p.add_argument("--refit", choices=["once", "each"], default="once")
    p.add_argument("--horizon", type=_positive_int, default=1)
    p.add_argument("--normalizer", choices=["range", "mean"], default="range")
    p.add_argument("--predictions-out")
    p.add_argument("-o", "--out", required=True, help="report JSON path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("plot", parents=[common], help="write a static SVG figure")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--kind", choices=["series", "spectrum", "modes"], required=True)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("replay", parents=[common], help="rerun a manifest and verify its outputs")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_replay)
    return parser


def _write_manifest(args, argv, info: dict, started: float) -> None:
    outputs = info.get("outputs", [])
    if not outputs:
        return
    options = info.get("options", {})
    digest = info.get("config_digest") or hashlib.sha256(
        json.dumps({"command": args.command, **options}, sort_keys=True).encode()
    ).hexdigest()
    inputs = [p for p in (getattr(args, "config", None), getattr(args, "series", None),
                          getattr(args, "model", None), getattr(args, "anchor", None)) if p]
    inputs += list(getattr(args, "inputs", []) or [])
    manifest = {
        "command": args.command,
        "argv": list(argv),
        "cwd": os.getcwd(),
        "config_digest": digest,
        "seed": info.get("seed", getattr(args, "seed", None)),
        "threads": args.threads,
        "tool_version": __version__,
        "inputs": {p: _sha256(p) for p in inputs},
        "outputs": outputs,
        "output_digests": {p: _sha256(p) for p in outputs},
        "duration_s": round(time.perf_counter() - started, 6),
    }
    with open(outputs[0] + ".manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.seed = getattr(args, "seed", None)
    args.threads = getattr(args, "threads", 1)
    args.quiet = getattr(args, "quiet", False)
    if not logging.getLogger().handlers:
        logging.basicConfig(format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    logger.setLevel(logging.WARNING if args.quiet else logging.INFO)

    started = time.perf_counter()
    try:
        info = args.func(args)
        if args.command != "replay":
            _write_manifest(args, argv, info, started)
    except (ConfigError, UsageError) as exc:
        print(f"epidmd {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EpidmdError, ValueError, OSError, KeyError, ArithmeticError) as exc:
        print(f"epidmd {args.command}: failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

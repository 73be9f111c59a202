"""Command-line front end.

Payloads go to stdout (JSON, or CSV for curves and fringes); diagnostics go
to stderr. Exit codes: 0 success, 1 usage error, 2 data/validation error.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import sys
from dataclasses import asdict

import numpy as np

from .analyzer import DEFAULT_ETA_A, DEFAULT_ETA_B, DetectionModel, joint_probabilities
from .bell import (
    SETTING_LABELS,
    BellSettings,
    chsh_signed,
    correlation,
    expectation,
    lhv_max,
    pairs_model_probabilities,
)
from .experiment import (
    CountTable,
    DataError,
    ExperimentConfig,
    correct_counts,
    estimate_bell,
    probability_table,
    simulate_counts,
)
from .noisevis import fringe_scan, p_from_visibility, visibility
from .optimizer import optimize_free, optimize_symmetric, scan_dphi, settings_center, write_curve_csv
from .qstate import OUTCOMES, InvalidStateError, make_noisy_state

log = logging.getLogger("spin1bell")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    def __init__(self, message: str, usage: str):
        super().__init__(message)
        self.usage = usage


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}", self.format_usage())


def _sig(obj):
    """Round every float to 10 significant digits for stable output."""
    if isinstance(obj, dict):
        return {k: _sig(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sig(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(f"{float(obj):.10g}")
    if isinstance(obj, np.ndarray):
        return _sig(obj.tolist())
    return obj


def _emit_json(payload, out) -> None:
    out.write(json.dumps(_sig(payload), indent=2) + "\n")


def _floats(text: str, n: int | None = None) -> list[float]:
    try:
        values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if n is not None and len(values) != n:
        raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers, got {text!r}")
    return values


def _angles(text: str) -> BellSettings:
    return BellSettings(*_floats(text, 4))


def _range(text: str) -> tuple[float, float, float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected start:stop:step, got {text!r}")
    try:
        start, stop, step = (float(x) for x in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected numbers in {text!r}") from None
    if step <= 0 or stop < start:
        raise argparse.ArgumentTypeError(f"empty or invalid range {text!r}")
    return start, stop, step


def _add_noise_args(parser, default_p: float = 1.0) -> None:
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--p", type=float, default=None, help=f"pure-state weight (default {default_p})")
    group.add_argument("--visibility", type=float, default=None, help="entanglement visibility")
    parser.set_defaults(default_p=default_p)


def _resolve_p(args) -> float:
    if args.visibility is not None:
        return p_from_visibility(args.visibility)
    return args.default_p if args.p is None else args.p


def _grid_payload(grid: np.ndarray) -> dict:
    return {
        "outcomes": list(OUTCOMES),
        "grid": grid,
    }


def cmd_predict(args, out):
    p = _resolve_p(args)
    grid = joint_probabilities(make_noisy_state(p), args.alpha, args.beta)
    _emit_json({"alpha": args.alpha, "beta": args.beta, "p": p, **_grid_payload(grid), "E": expectation(grid)}, out)


def cmd_chsh(args, out):
    p = _resolve_p(args)
    state = make_noisy_state(p)
    s = chsh_signed(state, args.angles)
    e = {label: correlation(state, a, b) for label, (a, b) in args.angles.pairs().items()}
    _emit_json({"settings": asdict(args.angles), "p": p, "S": abs(s), "S_signed": s, "E": e}, out)


def cmd_scan(args, out):
    start, stop, step = args.dphi
    if args.p is not None:
        ps = args.p
    else:
        ps = [p_from_visibility(v) for v in args.visibility]
    points = [pt for p in ps for pt in scan_dphi(p, start, stop, step)]
    if args.format == "json":
        _emit_json([asdict(pt) for pt in points], out)
    else:
        write_curve_csv(points, out)


def cmd_optimize(args, out):
    p = _resolve_p(args)
    dphi, s = optimize_symmetric(p)
    payload = {"p": p, "visibility": visibility(p), "dphi": dphi, "S": s}
    if args.free:
        settings, s_free = optimize_free(make_noisy_state(p))
        payload["free"] = {"settings": asdict(settings), "S": s_free, "center": settings_center(settings)}
    _emit_json(payload, out)


def cmd_lhv_bound(args, out):
    out.write(f"{lhv_max()}\n")


def cmd_fringe(args, out):
    scan = fringe_scan(args.p, args.fixed_angle, args.step)
    if args.format == "json":
        _emit_json(
            {
                "fixed_angle": scan.fixed_angle,
                "visibility": scan.visibility(),
                "theta_deg": scan.theta,
                "probability": scan.probability,
            },
            out,
        )
    else:
        scan.to_csv(out)


def _read_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def cmd_simulate(args, out):
    data = _read_json(args.config) if args.config else {}
    if args.seed is not None:
        data["seed"] = args.seed
    cfg = ExperimentConfig.from_dict(data)
    table = simulate_counts(cfg)
    if args.out and args.out != "-":
        with open(args.out, "w", newline="") as fh:
            table.to_csv(fh)
        _emit_json({"written": args.out, "rows": len(table.rows), "config": cfg.to_dict()}, out)
    else:
        table.to_csv(out)


def cmd_analyze(args, out):
    try:
        with open(args.counts, newline="") as fh:
            table = CountTable.from_csv(fh)
    except OSError as exc:
        raise DataError(f"cannot read {args.counts}: {exc.strerror}") from exc
    det = DetectionModel(args.eta_a, args.eta_b)
    corrected = correct_counts(table, det)
    probs = probability_table(corrected)
    per_setting = {}
    for label in table.labels():
        alpha, beta = table.angles(label)
        per_setting[label] = {
            "alpha_deg": alpha,
            "beta_deg": beta,
            "corrected": corrected.mean_grid(label),
            "corrected_total": corrected.mean_grid(label).sum(),
            "probabilities": probs[label],
            "E": expectation(probs[label]),
        }
    estimate = None
    if set(table.labels()) == set(SETTING_LABELS):
        estimate = estimate_bell(table, det, method=args.method, n_boot=args.n_boot, seed=args.seed).to_dict()
    else:
        log.info("table does not hold all four settings %s; skipping S", list(SETTING_LABELS))
    _emit_json({"outcomes": list(OUTCOMES), "settings": per_setting, "estimate": estimate}, out)


def cmd_pairs_model(args, out):
    e = {
        label: expectation(pairs_model_probabilities(a, b)) for label, (a, b) in args.angles.pairs().items()
    }
    s = e["ab"] - e["ab'"] + e["a'b"] + e["a'b'"]
    _emit_json({"model": "distinguishable-pairs", "settings": asdict(args.angles), "S": abs(s), "E": e}, out)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spin1bell", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log diagnostics to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("predict", help="joint outcome grid and E for one pair of angles")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    _add_noise_args(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("chsh", help="S for four analyzer angles a,a',b,b'")
    p.add_argument("--angles", type=_angles, required=True, metavar="A,A',B,B'")
    _add_noise_args(p)
    p.set_defaults(func=cmd_chsh)

    p = sub.add_parser("scan", help="S versus dphi for one or more noise levels (CSV)")
    p.add_argument("--dphi", type=_range, default=(0.0, 45.0, 0.25), metavar="START:STOP:STEP")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--visibility", type=_floats, default=[1.0], metavar="V1,V2,...")
    group.add_argument("--p", type=_floats, default=None, metavar="P1,P2,...")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("optimize", help="best equally spaced settings (and optionally free settings)")
    _add_noise_args(p)
    p.add_argument("--free", action="store_true", help="also search all four angles independently")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("lhv-bound", help="local hidden variable bound by enumeration")
    p.set_defaults(func=cmd_lhv_bound)

    p = sub.add_parser("fringe", help="coincidence fringe for a fixed analyzer (CSV)")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--fixed-angle", type=float, required=True)
    p.add_argument("--step", type=float, default=1.0)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_fringe)

    p = sub.add_parser("simulate", help="Monte Carlo count table from an experiment config")
    p.add_argument("--config", help="JSON config with ExperimentConfig field names")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="output CSV path (stdout when omitted)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="correct, normalize, and combine a count table")
    p.add_argument("--counts", required=True)
    p.add_argument("--eta-a", type=float, default=DEFAULT_ETA_A)
    p.add_argument("--eta-b", type=float, default=DEFAULT_ETA_B)
    p.add_argument(
        "--method", choices=("bootstrap", "interval-scatter", "poisson-propagation"), default="bootstrap"
    )
    p.add_argument("--n-boot", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("pairs-model", help="S when the photons form two distinguishable singlet pairs")
    p.add_argument("--angles", type=_angles, required=True, metavar="A,A',B,B'")
    p.set_defaults(func=cmd_pairs_model)

    return parser


def run(argv=None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        err.write(exc.usage)
        err.write(f"{exc}\n")
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    handler = logging.StreamHandler(err)
    handler.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))
    root = logging.getLogger("spin1bell")
    root.addHandler(handler)
    root.setLevel(logging.INFO if args.verbose else logging.WARNING)
    buffer = io.StringIO()
    try:
        args.func(args, buffer)
    except (DataError, InvalidStateError, ValueError) as exc:
        err.write(f"error: {exc}\n")
        return EXIT_DATA
    finally:
        root.removeHandler(handler)
    out.write(buffer.getvalue())
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

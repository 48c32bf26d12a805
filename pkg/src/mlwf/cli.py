"""Command-line interface.

Subcommands: ``transform``, ``op-apply``, ``char``, ``wf``, ``mod-wf``,
``stft``, ``verify <kind>``, ``generate``.  Global flags ``--config``,
``--jobs``, ``--seed``, ``--out-dir``; the environment variable
``MLWF_OUT_DIR`` supplies the default output root.  Report paths emit JSON
and CSV plus rendered PNG figures (suppress with ``--no-figures``).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import experiments
from .errors import MlwfError
from .experiments import EXIT_ASSERT, EXIT_MISSING, EXIT_OK, EXIT_SCHEMA, SchemaError

# desk-scale defaults for `verify <kind>` when no config is given
_VERIFY_PRESETS: dict[str, dict] = {
    "calculus-regression": {
        "kind": "calculus-regression",
        "grid": {"dimension": 1, "n": 64},
        "probes": 20,
        "thresholds": {"rel_err": 1e-10},
    },
    "char": {
        "kind": "char",
        "grid": {"dimension": 2, "n": 64},
        "symbol": {
            "kind": "polynomial",
            "terms": [
                {"beta": [0, 0], "coeff": 1.0},
                {"beta": [2, 0], "coeff": 1.0},
                {"beta": [0, 2], "coeff": 1.0},
            ],
        },
        "expect": {"none_characteristic": True},
    },
    "inclusion": {
        "kind": "inclusion",
        "grid": {"dimension": 2, "n": 128},
        "fields": [
            {
                "kind": "delta-surrogate",
                "center": [np.pi / 2, 3 * np.pi / 2],
                "probe_points": [[np.pi / 2, 3 * np.pi / 2], [3.97, 0.83], [3 * np.pi / 2, np.pi / 2]],
            },
            {
                "kind": "line-jump-2d",
                "a": np.pi / 2,
                "b": 3 * np.pi / 2,
                "probe_points": [[np.pi / 2, 3 * np.pi / 2], [3 * np.pi / 2, np.pi / 2]],
            },
        ],
        "symbol": {
            "kind": "polynomial",
            "terms": [
                {"beta": [0, 0], "coeff": 1.0},
                {"beta": [2, 0], "coeff": 1.0},
                {"beta": [0, 2], "coeff": 1.0},
            ],
        },
        "weight": {"family": "constant", "c": 1.0},
        "space": {"kind": "lp", "p": 2},
        "query": {"two_scale": False},
    },
    "elliptic": {
        "kind": "elliptic",
        "grid": {"dimension": 2, "n": 128},
        "fields": [
            {
                "kind": "delta-surrogate",
                "center": [np.pi / 2, 3 * np.pi / 2],
                "probe_points": [[np.pi / 2, 3 * np.pi / 2], [3.97, 0.83], [3 * np.pi / 2, np.pi / 2]],
            }
        ],
        "symbol": {
            "kind": "polynomial",
            "terms": [
                {"beta": [0, 0], "coeff": 1.0},
                {"beta": [2, 0], "coeff": 1.0},
                {"beta": [0, 2], "coeff": 1.0},
            ],
        },
        "weight": {"family": "constant", "c": 1.0},
        "space": {"kind": "lp", "p": 2},
        "query": {"two_scale": False},
    },
    "wf-identity": {
        "kind": "wf-identity",
        "grid": {"dimension": 1, "n": 64},
        "field": {"kind": "delta-surrogate", "center": [np.pi]},
        "weight": {"family": "constant", "c": 1.0},
        "space": {"kind": "lp", "p": 2},
        "query": {"base_points": [[np.pi]]},
        "probes": 10,
    },
    "window-independence": {
        "kind": "window-independence",
        "grid": {"dimension": 1, "n": 64},
        "field": {"kind": "delta-surrogate", "center": [np.pi]},
        "weight": {"family": "constant", "c": 1.0},
        "space": {"kind": "lp", "p": 2},
        "query": {"base_points": [[np.pi]]},
    },
}


def _out_dir(args) -> Path:
    if args.out_dir:
        return Path(args.out_dir)
    env = os.environ.get("MLWF_OUT_DIR")
    return Path(env) if env else Path("mlwf-out")


def _load_json(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"config file {p} not found")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed JSON config: {exc}") from exc


def _cmd_transform(args) -> int:
    from .fieldio import load_field, save_field
    from .grids import SampledField, SpectralField, forward_transform, inverse_transform

    f = load_field(args.infile)
    if args.inverse:
        if not isinstance(f, SpectralField):
            raise MlwfError("--inverse expects a spectral-side input")
        out = inverse_transform(f)
    else:
        if not isinstance(f, SampledField):
            raise MlwfError("forward transform expects a sampled-side input")
        out = forward_transform(f)
    save_field(out, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_op_apply(args) -> int:
    from .fieldio import load_field, save_field
    from .grids import SampledField
    from .operators import apply_kn, apply_t
    from .symbols import symbol_from_config

    f = load_field(args.infile)
    if not isinstance(f, SampledField):
        raise MlwfError("op-apply expects a sampled-side input")
    sym_cfg = _load_json(args.symbol)
    sym = symbol_from_config(f.grid, sym_cfg)
    if args.t == 0.0 and args.method == "spectral":
        g = apply_kn(sym, f)
    else:
        g = apply_t(sym, args.t, f, method=args.method)
    save_field(g, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_stft(args) -> int:
    from .fieldio import load_field, save_field
    from .grids import SampledField
    from .modulation import stft, window_from_config

    f = load_field(args.infile)
    if not isinstance(f, SampledField):
        raise MlwfError("stft expects a sampled-side input")
    window = window_from_config(f.grid, args.window)
    V = stft(f, window)
    save_field(V, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_generate(args) -> int:
    from .fieldio import save_field
    from .generators import generate
    from .grids import Grid

    cfg = _load_json(args.config)
    grid = Grid(int(cfg.get("grid", {}).get("dimension", 1)), int(cfg.get("grid", {}).get("n", 64)))
    f = generate(cfg["field"], grid, seed=args.seed)
    save_field(f, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def _run_experiment(cfg: dict, args) -> int:
    result = experiments.run(
        cfg,
        out_dir=_out_dir(args),
        jobs=args.jobs,
        seed=args.seed,
        figures=not args.no_figures,
    )
    for item in result.assertions:
        status = "PASS" if item["passed"] else "FAIL"
        print(f"[{status}] {item['name']}: {item['detail']}")
    print(f"report: {result.report_path}")
    return result.exit_code


def _cmd_wf(args) -> int:
    cfg = _load_json(args.config) if args.config else {}
    cfg.setdefault("kind", "wf")
    if args.infile:
        cfg["field"] = {"kind": "file", "path": args.infile}
    if args.modulation:
        cfg["side"] = "modulation"
    code = _run_experiment(cfg, args)
    if args.out:
        src = _out_dir(args) / "wf_report.json"
        if src.exists():
            Path(args.out).parent.mkdir(parents=True, exist_ok=True)
            Path(args.out).write_text(src.read_text())
            print(f"wrote {args.out}")
    return code


def _cmd_char(args) -> int:
    cfg = _load_json(args.config) if args.config else dict(_VERIFY_PRESETS["char"])
    cfg.setdefault("kind", "char")
    return _run_experiment(cfg, args)


def _cmd_verify(args) -> int:
    if args.config:
        cfg = _load_json(args.config)
        cfg.setdefault("kind", args.what)
    else:
        preset = _VERIFY_PRESETS.get(args.what)
        if preset is None:
            raise SchemaError(
                f"no built-in preset for {args.what!r}; pass --config"
            )
        cfg = json.loads(json.dumps(preset))  # deep copy, numbers normalised
    return _run_experiment(cfg, args)


def _add_global_options(parser, suppress=False):
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", help="JSON experiment config", default=d)
    parser.add_argument("--jobs", type=int, default=argparse.SUPPRESS if suppress else 1, help="worker threads")
    parser.add_argument("--seed", type=int, default=d, help="rng seed")
    parser.add_argument("--out-dir", default=d, help="output directory (or $MLWF_OUT_DIR)")
    parser.add_argument(
        "--no-figures",
        action="store_true",
        default=argparse.SUPPRESS if suppress else False,
        help="skip PNG rendering",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mlwf",
        description="wave-front set estimation and operator calculus on the torus",
    )
    _add_global_options(parser)
    common = argparse.ArgumentParser(add_help=False)
    _add_global_options(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=lambda **kw: argparse.ArgumentParser(parents=[common], **kw))

    p = sub.add_parser("transform", help="forward/inverse transform of a stored field")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--inverse", action="store_true")
    p.set_defaults(func=_cmd_transform)

    p = sub.add_parser("op-apply", help="apply a pseudo-differential operator")
    p.add_argument("--symbol", required=True, help="symbol config JSON")
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--method", choices=["spectral", "direct"], default="spectral")
    p.set_defaults(func=_cmd_op_apply)

    p = sub.add_parser("char", help="characteristic-set scan of a symbol")
    p.set_defaults(func=_cmd_char)

    p = sub.add_parser("wf", help="wave-front report of a field")
    p.add_argument("--in", dest="infile", default=None)
    p.add_argument("--out", default=None, help="(report is written to the out dir)")
    p.set_defaults(func=_cmd_wf, modulation=False)

    p = sub.add_parser("mod-wf", help="wave-front report on the modulation side")
    p.add_argument("--in", dest="infile", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_wf, modulation=True)

    p = sub.add_parser("stft", help="short-time Fourier transform to a phase-space blob")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--window", default="gauss:1.0", help="gauss:WIDTH or bump:R1,R2")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_stft)

    p = sub.add_parser("verify", help="run a theorem-verification experiment")
    p.add_argument(
        "what",
        choices=sorted(set(_VERIFY_PRESETS) | {"inclusion", "elliptic", "wf-identity", "window-independence", "calculus-regression", "char"}),
    )
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("generate", help="synthesise a test field from a config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_generate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SchemaError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except MlwfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ASSERT


if __name__ == "__main__":
    sys.exit(main())

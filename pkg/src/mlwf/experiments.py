"""Config-driven experiment runner with JSON/CSV reports and rendered figures.

Each experiment kind builds its inputs from a JSON config (schema-validated),
runs the corresponding pipeline, evaluates its configured assertions and
writes ``report.json``, ``summary.csv``, plot-data CSVs and PNG figures into
the output directory.  Exit codes: 0 all assertions pass, 2 schema error,
3 missing input file, 4 assertion failure.
"""

from __future__ import annotations

import csv
import datetime
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from jsonschema import Draft7Validator

from .errors import InputError, MlwfError, ParameterError
from .generators import generate
from .grids import Grid, SampledField, relative_l2
from .modulation import (
    fb_mod_equivalence,
    wf_modulation,
    window_from_config,
    window_independence_check,
)
from .operators import apply_kn, apply_t
from .plots import render_shell_fan, render_singular_map
from .spaces import BFSpaceSpec, space_from_config
from .symbols import CharParams, char_set, compose, symbol_from_config
from .wavefront import (
    WavefrontQuery,
    compare_reports,
    direction_fan,
    report_union,
    wf_estimate,
)
from .weights import BracketPower, ConstantWeight, QuotientWeight, weight_from_config

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_MISSING = 3
EXIT_ASSERT = 4

EXPERIMENT_KINDS = (
    "wf",
    "op-apply",
    "char",
    "inclusion",
    "elliptic",
    "wf-identity",
    "window-independence",
    "calculus-regression",
)

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": list(EXPERIMENT_KINDS)},
        "grid": {
            "type": "object",
            "required": ["dimension", "n"],
            "properties": {
                "dimension": {"enum": [1, 2]},
                "n": {"type": "integer", "minimum": 8},
            },
        },
        "seed": {"type": "integer"},
        "thresholds": {
            "type": "object",
            "additionalProperties": {"type": "number", "exclusiveMinimum": 0},
        },
    },
}

_VALIDATOR = Draft7Validator(CONFIG_SCHEMA)


class SchemaError(MlwfError):
    """The experiment config violates the schema."""


@dataclass
class RunResult:
    exit_code: int
    report_path: Path | None
    assertions: list[dict]
    results: dict


def validate_config(cfg: dict):
    errors = sorted(_VALIDATOR.iter_errors(cfg), key=lambda e: e.path)
    if errors:
        raise SchemaError("; ".join(e.message for e in errors))


def _grid_from(cfg: dict) -> Grid:
    g = cfg.get("grid", {"dimension": 1, "n": 64})
    return Grid(int(g["dimension"]), int(g["n"]))


def _field_from(cfg, grid: Grid, seed) -> SampledField:
    if isinstance(cfg, dict) and cfg.get("kind") == "file":
        from .fieldio import load_field

        f = load_field(cfg["path"])
        if not isinstance(f, SampledField):
            raise InputError("experiment fields must be sampled-side")
        return f
    return generate(cfg, grid, seed=seed)


def _query_from(cfg: dict, grid: Grid, weight, space) -> WavefrontQuery:
    qc = cfg.get("query", {})
    default_points = [(np.pi,) * grid.dimension]
    return WavefrontQuery(
        base_points=tuple(tuple(p) for p in qc.get("base_points", default_points)),
        weight=weight,
        space=space,
        n_directions=qc.get("directions"),
        cutoff_r1=qc.get("cutoff", {}).get("r1", 0.35),
        cutoff_r2=qc.get("cutoff", {}).get("r2", 0.7),
        aperture=np.deg2rad(qc["aperture_deg"]) if "aperture_deg" in qc else None,
        inner_radius=qc.get("inner_radius"),
        eta=qc.get("eta", 1.0),
        two_scale=qc.get("two_scale", True),
    )


def _weight_from(cfg, default_s=0.0):
    if cfg is None:
        return BracketPower(default_s) if default_s else ConstantWeight(1.0)
    return weight_from_config(cfg)


def _space_from(cfg):
    if cfg is None:
        return BFSpaceSpec("lp", 1)
    return space_from_config(cfg)


# ---------------------------------------------------------------------------
# kind handlers: each returns (results dict, assertions list, reports to plot)
# ---------------------------------------------------------------------------


def _assert_item(name: str, passed: bool, detail: str) -> dict:
    return {"name": name, "passed": bool(passed), "detail": detail}


def _handle_wf(cfg, grid, seed, jobs, out_dir, figures):
    weight = _weight_from(cfg.get("weight"))
    space = _space_from(cfg.get("space"))
    f = _field_from(cfg.get("field", {"kind": "gaussian-bump"}), grid, seed)
    q = _query_from(cfg, grid, weight, space)
    side = cfg.get("side", "spectral")
    if side == "modulation":
        window = window_from_config(grid, cfg.get("window", {"kind": "gaussian", "width": 1.0}))
        report = wf_modulation(f, q, window, jobs=jobs)
    else:
        report = wf_estimate(f, q, jobs=jobs)
    assertions = []
    expect = cfg.get("expect", {})
    if "empty_singular" in expect:
        empty = not report.singular.any()
        assertions.append(
            _assert_item(
                "empty-singular-set",
                empty == expect["empty_singular"],
                f"singular entries: {int(report.singular.sum())}",
            )
        )
    _write_wf_artifacts(report, out_dir, "wf", figures)
    results = {
        "singular_count": int(report.singular.sum()),
        "entries": json.loads(report.to_json())["entries"],
    }
    return results, assertions


def _write_wf_artifacts(report, out_dir: Path, stem: str, figures: bool):
    (out_dir / f"{stem}_report.json").write_text(report.to_json())
    with open(out_dir / f"{stem}_entries.csv", "w", newline="") as fh:
        csv.writer(fh).writerows(report.to_csv_rows())
    with open(out_dir / f"{stem}_shells.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["point_index", "bin", "shell_index", "log2_norm"])
        P, D, M = report.shell_norms.shape
        for i in range(P):
            for j in range(D):
                for m in range(M):
                    v = report.shell_norms[i, j, m]
                    writer.writerow([i, j, m, repr(float(np.log2(v))) if v > 0 else ""])
    if figures:
        render_shell_fan(report, out_dir / f"{stem}_shell_fan.png")
        render_singular_map(report, out_dir / f"{stem}_singular_map.png", title=stem)


def _handle_op_apply(cfg, grid, seed, jobs, out_dir, figures):
    from .fieldio import save_field

    sym = symbol_from_config(grid, cfg["symbol"])
    f = _field_from(cfg.get("field", {"kind": "random-bandlimited"}), grid, seed)
    t = float(cfg.get("t", 0.0))
    method = cfg.get("method", "spectral")
    if t == 0.0 and method == "spectral":
        g = apply_kn(sym, f)
    else:
        g = apply_t(sym, t, f, method=method, override_guard=cfg.get("override_guard", False))
    out = save_field(g, out_dir / cfg.get("out", "op_output.bin"))
    return {"output": str(out), "t": t, "method": method}, []


def _char_report_csv(report, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        d = report.base_points.shape[1]
        writer.writerow(
            [f"point_x{ax + 1}" for ax in range(d)] + ["bin", "tail_lower_bound", "characteristic"]
        )
        P, D = report.tail_bounds.shape
        for i in range(P):
            for j in range(D):
                writer.writerow(
                    [*(float(v) for v in report.base_points[i]), j,
                     repr(float(report.tail_bounds[i, j])), int(report.characteristic[i, j])]
                )


def _handle_char(cfg, grid, seed, jobs, out_dir, figures):
    sym = symbol_from_config(grid, cfg["symbol"])
    omega0 = _weight_from(cfg.get("weight0")) if cfg.get("weight0") else sym.omega0
    qc = cfg.get("query", {})
    points = qc.get("base_points", [(np.pi,) * grid.dimension])
    D = qc.get("directions", 16 if grid.dimension == 2 else 2)
    params = CharParams(
        c_min=cfg.get("thresholds", {}).get("c_min", 0.1),
        x_radius=qc.get("x_radius", 0.5),
        aperture=np.deg2rad(qc.get("aperture_deg", 22.5)),
        inner_radius=qc.get("inner_radius"),
    )
    report = char_set(sym, omega0, points, direction_fan(grid.dimension, D), params)
    _char_report_csv(report, out_dir / "char_entries.csv")
    if figures:
        render_singular_map(report, out_dir / "char_map.png", title="characteristic set")
    n_char = int(report.characteristic.sum())
    assertions = []
    expect = cfg.get("expect", {})
    if "all_characteristic" in expect:
        assertions.append(
            _assert_item(
                "all-characteristic",
                (n_char == report.characteristic.size) == expect["all_characteristic"],
                f"{n_char}/{report.characteristic.size} characteristic",
            )
        )
    if "none_characteristic" in expect:
        assertions.append(
            _assert_item(
                "none-characteristic",
                (n_char == 0) == expect["none_characteristic"],
                f"{n_char}/{report.characteristic.size} characteristic",
            )
        )
    results = {
        "characteristic_count": n_char,
        "tail_bounds": report.tail_bounds.tolist(),
    }
    return results, assertions


def _inclusion_core(cfg, grid, seed, jobs, out_dir, figures):
    """Shared machinery of the inclusion and elliptic experiments."""
    sym = symbol_from_config(grid, cfg["symbol"])
    omega = _weight_from(cfg.get("weight"))
    omega0 = _weight_from(cfg.get("weight0")) if cfg.get("weight0") else sym.omega0
    space = _space_from(cfg.get("space"))
    fields_cfg = cfg.get("fields") or [cfg.get("field", {"kind": "delta-surrogate"})]
    slack = int(cfg.get("thresholds", {}).get("angular_slack", 1))

    per_field = []
    for fi, fcfg in enumerate(fields_cfg):
        fcfg = dict(fcfg)
        probe_points = fcfg.pop("probe_points", None)
        f = _field_from(fcfg, grid, seed)
        q = _query_from(cfg, grid, omega, space)
        if probe_points is not None:
            q = replace(q, base_points=tuple(tuple(p) for p in probe_points))
        rep_f = wf_estimate(f, q, jobs=jobs)
        g = apply_kn(sym, f)
        q_op = replace(q, weight=QuotientWeight(omega, omega0))
        rep_g = wf_estimate(g, q_op, jobs=jobs)
        params = CharParams(
            c_min=cfg.get("thresholds", {}).get("c_min", 0.1),
            aperture=q.resolved_aperture(grid),
            inner_radius=cfg.get("query", {}).get("char_inner_radius"),
        )
        chars = char_set(sym, omega0, rep_f.base_points, rep_f.directions, params)
        fwd = compare_reports(rep_g, rep_f, angular_slack=slack)
        back = compare_reports(rep_f, report_union(rep_g, chars), angular_slack=slack)
        equal = compare_reports(rep_f, rep_g, angular_slack=slack)
        per_field.append(
            {
                "field": fcfg.get("kind", "file"),
                "rep_f": rep_f,
                "rep_g": rep_g,
                "chars": chars,
                "forward": fwd,
                "backward": back,
                "jaccard": equal.jaccard,
            }
        )
        _write_wf_artifacts(rep_f, out_dir, f"field{fi}_input", figures)
        _write_wf_artifacts(rep_g, out_dir, f"field{fi}_output", figures)
    return per_field


def _handle_inclusion(cfg, grid, seed, jobs, out_dir, figures):
    per_field = _inclusion_core(cfg, grid, seed, jobs, out_dir, figures)
    assertions = []
    for item in per_field:
        assertions.append(
            _assert_item(
                f"shrinking-inclusion[{item['field']}]",
                item["forward"].subset,
                f"violations: {list(item['forward'].violations)}",
            )
        )
        assertions.append(
            _assert_item(
                f"char-completed-inclusion[{item['field']}]",
                item["backward"].subset,
                f"violations: {list(item['backward'].violations)}",
            )
        )
    results = {
        item["field"]: {
            "forward_subset": item["forward"].subset,
            "backward_subset": item["backward"].subset,
            "jaccard": item["jaccard"],
        }
        for item in per_field
    }
    return results, assertions


def _handle_elliptic(cfg, grid, seed, jobs, out_dir, figures):
    per_field = _inclusion_core(cfg, grid, seed, jobs, out_dir, figures)
    jmin = float(cfg.get("thresholds", {}).get("jaccard", 0.9))
    assertions = []
    for item in per_field:
        assertions.append(
            _assert_item(
                f"elliptic-equality[{item['field']}]",
                item["jaccard"] >= jmin,
                f"jaccard {item['jaccard']:.3f} (need >= {jmin})",
            )
        )
    results = {item["field"]: {"jaccard": item["jaccard"]} for item in per_field}
    return results, assertions


def _handle_wf_identity(cfg, grid, seed, jobs, out_dir, figures):
    omega = _weight_from(cfg.get("weight"))
    spec2d = _space_from(cfg.get("space"))
    window = window_from_config(grid, cfg.get("window", {"kind": "gaussian", "width": 1.0}))
    f = _field_from(cfg.get("field", {"kind": "delta-surrogate"}), grid, seed)
    q = _query_from(cfg, grid, omega, spec2d)
    th = cfg.get("thresholds", {})
    rep = fb_mod_equivalence(
        f, omega, spec2d, window, q=q,
        n_probes=int(cfg.get("probes", 20)), seed=seed or 5, jobs=jobs,
    )
    assertions = [
        _assert_item(
            "norm-equivalence-stability",
            rep.ratio_spread <= th.get("ratio_spread", 2.0),
            f"ratio spread {rep.ratio_spread:.3f}",
        ),
        _assert_item("wf-subset-fb-in-mod", rep.fb_in_mod.subset, f"violations: {list(rep.fb_in_mod.violations)}"),
        _assert_item("wf-subset-mod-in-fb", rep.mod_in_fb.subset, f"violations: {list(rep.mod_in_fb.violations)}"),
        _assert_item(
            "wf-jaccard",
            rep.fb_in_mod.jaccard >= th.get("jaccard", 0.9),
            f"jaccard {rep.fb_in_mod.jaccard:.3f}",
        ),
    ]
    if figures:
        from .plots import render_ratio_scatter

        render_ratio_scatter(
            rep.ratios, out_dir / "equivalence_ratios.png",
            "phase-space vs projected spectral norm", "ratio",
        )
        _write_wf_artifacts(rep.fb_report, out_dir, "spectral_side", figures)
        _write_wf_artifacts(rep.mod_report, out_dir, "modulation_side", figures)
    results = {
        "ratios": list(rep.ratios),
        "c_empirical": rep.c_empirical,
        "ratio_spread": rep.ratio_spread,
        "jaccard": rep.fb_in_mod.jaccard,
    }
    return results, assertions


def _handle_window_independence(cfg, grid, seed, jobs, out_dir, figures):
    omega = _weight_from(cfg.get("weight"))
    space = _space_from(cfg.get("space"))
    f = _field_from(cfg.get("field", {"kind": "delta-surrogate"}), grid, seed)
    q = _query_from(cfg, grid, omega, space)
    wa = window_from_config(grid, cfg.get("window_a", {"kind": "gaussian", "width": 1.0}))
    wb = window_from_config(grid, cfg.get("window_b", {"kind": "bump", "r1": 0.5, "r2": 1.0}))
    rep = window_independence_check(f, q, wa, wb, jobs=jobs)
    jmin = float(cfg.get("thresholds", {}).get("jaccard", 0.9))
    assertions = [
        _assert_item(
            "window-independence-jaccard",
            rep.jaccard >= jmin,
            f"jaccard {rep.jaccard:.3f} (need >= {jmin})",
        )
    ]
    _write_wf_artifacts(rep.report_a, out_dir, "window_a", figures)
    _write_wf_artifacts(rep.report_b, out_dir, "window_b", figures)
    results = {"jaccard": rep.jaccard, "differing_entries": [list(e) for e in rep.differing_entries]}
    return results, assertions


def _handle_calculus_regression(cfg, grid, seed, jobs, out_dir, figures):
    from .generators import random_bandlimited

    pairs = cfg.get("symbol_pairs") or [
        {
            "a1": {"kind": "polynomial", "terms": [{"beta": [1] + [0] * (grid.dimension - 1), "coeff": 1.0}]},
            "a2": {"kind": "polynomial", "terms": [{"beta": [0] * grid.dimension, "coeff": "e^{ix1}"}]},
        }
    ]
    tol = float(cfg.get("thresholds", {}).get("rel_err", 1e-10))
    n_fields = int(cfg.get("probes", 20))
    band = grid.nyquist / 4.0
    rng = np.random.default_rng(seed or 0)
    assertions = []
    worst = 0.0
    for idx, pair in enumerate(pairs):
        a1 = symbol_from_config(grid, pair["a1"])
        a2 = symbol_from_config(grid, pair["a2"])
        deg = a1.xi_degree
        if deg is None:
            raise ParameterError("calculus regression needs xi-polynomial a1")
        c = compose(a1, a2, deg + 1)
        err = 0.0
        for _ in range(n_fields):
            f = random_bandlimited(grid, band, rng=rng)
            lhs = apply_kn(a1, apply_kn(a2, f))
            rhs = apply_kn(c, f)
            err = max(err, relative_l2(rhs.values, lhs.values))
        worst = max(worst, err)
        assertions.append(
            _assert_item(f"composition-exactness[{idx}]", err <= tol, f"rel err {err:.3e}")
        )
    results = {"worst_rel_err": worst, "pairs": len(pairs)}
    return results, assertions


_HANDLERS = {
    "wf": _handle_wf,
    "op-apply": _handle_op_apply,
    "char": _handle_char,
    "inclusion": _handle_inclusion,
    "elliptic": _handle_elliptic,
    "wf-identity": _handle_wf_identity,
    "window-independence": _handle_window_independence,
    "calculus-regression": _handle_calculus_regression,
}


def run(
    config: dict | str | Path,
    out_dir: str | Path | None = None,
    jobs: int = 1,
    seed: int | None = None,
    figures: bool = True,
) -> RunResult:
    """Execute one experiment; writes reports and returns the run outcome."""
    if not isinstance(config, dict):
        path = Path(config)
        if not path.exists():
            raise FileNotFoundError(f"config file {path} not found")
        try:
            config = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise SchemaError(f"malformed JSON config: {exc}") from exc
    validate_config(config)
    kind = config["kind"]
    grid = _grid_from(config)
    seed = seed if seed is not None else config.get("seed", 0)

    out_dir = Path(out_dir) if out_dir is not None else Path(config.get("out_dir", "mlwf-out"))
    out_dir.mkdir(parents=True, exist_ok=True)

    results, assertions = _HANDLERS[kind](config, grid, seed, jobs, out_dir, figures)

    report = {
        "kind": kind,
        "config": config,
        "seed": seed,
        "generated_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "results": results,
        "assertions": assertions,
    }
    report_path = out_dir / "report.json"
    report_path.write_text(json.dumps(report, sort_keys=True, indent=1, default=_json_default))

    with open(out_dir / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["assertion", "passed", "detail"])
        for item in assertions:
            writer.writerow([item["name"], int(item["passed"]), item["detail"]])

    ok = all(a["passed"] for a in assertions)
    return RunResult(
        exit_code=EXIT_OK if ok else EXIT_ASSERT,
        report_path=report_path,
        assertions=assertions,
        results=results,
    )


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj)}")

"""Command-line front end: seeded scenario runs, pointwise evaluation, calibration.

Configs are strict JSON: unknown keys are rejected by name and the seed is
mandatory, so a rerun of the same config is byte-identical.  ``run`` writes
a human-readable report followed by a machine-readable JSON block (the part
regression tooling should diff) and exits 0 when every audit passes, 2 on
audit failure (report still written), 1 on configuration or build errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import evaluate, scenarios
from .diagnostics import SamplingPlan, run_diagnostics
from .geometry import DegenerateConfigurationError
from .measures import BaseMeasure1D, BaseMeasureND

JSON_MARKER = "=== JSON REPORT ==="


class ConfigError(ValueError):
    pass


_TOP_KEYS = {"seed": True, "scenario": True, "plan": True,
             "expect": False, "outputs": False, "backend": False}
_PLAN_KEYS = {"region": True, "pair_count": False, "cycle_count": False,
              "cube_count": False, "triple_count": False, "scale_range": False}
_BACKEND_KEYS = {"name": False, "budget": False}
_OUTPUT_KEYS = {"report": False, "grid": False}
_GRID_KEYS = {"path": True, "resolution": True, "window": True}
_EXPECT_KEYS = {"kappa_min", "kappa_max", "delta_min", "c_low_min", "c_high_max", "tau_min"}

_SCENARIO_KEYS = {
    "crofton": ({"name", "dimension"}, {"half_extent"}),
    "doubling_box": ({"name"}, {"window_half", "inner_half", "levels", "cell", "gauss_order"}),
    "doubling_atoms": ({"name", "atoms", "window"}, {"basepoint"}),
    "beurling_ahlfors": ({"name"}, {"density", "support_half", "pieces",
                                    "cap_half_angle", "window_half", "height"}),
    "degenerate_caps": ({"name", "theta0"}, {"window_half", "levels"}),
}


def _check_keys(obj: dict, spec: dict, path: str) -> None:
    if not isinstance(obj, dict):
        raise ConfigError(f"{path or 'config'} must be an object")
    for key in obj:
        if key not in spec:
            raise ConfigError(f"unknown key '{path}{key}'")
    for key, required in spec.items():
        if required and key not in obj:
            raise ConfigError(f"missing required key '{path}{key}'")


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    _check_keys(cfg, _TOP_KEYS, "")
    if not isinstance(cfg["seed"], int):
        raise ConfigError("'seed' must be an integer (no wall-clock default)")
    sc = cfg["scenario"]
    if not isinstance(sc, dict) or "name" not in sc:
        raise ConfigError("'scenario' must be an object with a 'name'")
    if sc["name"] not in _SCENARIO_KEYS:
        raise ConfigError(f"unknown scenario '{sc['name']}'; "
                          f"choose from {sorted(_SCENARIO_KEYS)}")
    required, optional = _SCENARIO_KEYS[sc["name"]]
    _check_keys(sc, {**{k: True for k in required}, **{k: False for k in optional}},
                "scenario.")
    _check_keys(cfg["plan"], _PLAN_KEYS, "plan.")
    if "backend" in cfg:
        _check_keys(cfg["backend"], _BACKEND_KEYS, "backend.")
    if "outputs" in cfg:
        _check_keys(cfg["outputs"], _OUTPUT_KEYS, "outputs.")
        if "grid" in cfg["outputs"]:
            _check_keys(cfg["outputs"]["grid"], _GRID_KEYS, "outputs.grid.")
    for key in cfg.get("expect", {}):
        if key not in _EXPECT_KEYS:
            raise ConfigError(f"unknown key 'expect.{key}'")
    return cfg


def build_scenario(spec: dict, seed: int) -> scenarios.Scenario:
    name = spec["name"]
    if name == "crofton":
        return scenarios.crofton(int(spec["dimension"]),
                                 half_extent=float(spec.get("half_extent", 5.0)))
    if name == "doubling_box":
        mu = scenarios.lebesgue_box_measure(
            2,
            inner_half=float(spec.get("inner_half", 0.8)),
            levels=int(spec.get("levels", 6)),
            cell=spec.get("cell"),
            gauss_order=int(spec.get("gauss_order", 4)),
        )
        w = float(spec.get("window_half", 0.4))
        return scenarios.doubling_pushforward(mu, window_lo=(-w, -w), window_hi=(w, w),
                                              name="doubling_box", seed=seed)
    if name == "doubling_atoms":
        atoms = [(row[:-1], row[-1]) for row in spec["atoms"]]
        dim = len(spec["atoms"][0]) - 1
        mu = BaseMeasureND(dim, atoms=atoms)
        lo, hi = spec["window"]
        return scenarios.doubling_pushforward(mu, window_lo=lo, window_hi=hi,
                                              name="doubling_atoms", seed=seed,
                                              basepoint=spec.get("basepoint"))
    if name == "beurling_ahlfors":
        density = spec.get("density", "lebesgue")
        support = float(spec.get("support_half", 30.0))
        if density == "lebesgue":
            mu1 = BaseMeasure1D.lebesgue(-support, support, 1.0)
        elif density == "inv_sqrt":
            mu1 = scenarios.inv_sqrt_density(pieces=int(spec.get("pieces", 1024)),
                                             support=support)
        else:
            raise ConfigError("scenario.density must be 'lebesgue' or 'inv_sqrt'")
        return scenarios.beurling_ahlfors(
            mu1,
            cap_half_angle=float(spec.get("cap_half_angle", math.pi / 6.0)),
            window_half=float(spec.get("window_half", 0.1 * support)),
            height=float(spec.get("height", 2.0)),
        )
    if name == "degenerate_caps":
        return scenarios.degenerate_caps(float(spec["theta0"]),
                                         window_half=float(spec.get("window_half", 0.4)),
                                         levels=int(spec.get("levels", 6)))
    raise ConfigError(f"unknown scenario '{name}'")


def _pick_backend(nu, cfg: dict):
    spec = cfg.get("backend", {})
    name = spec.get("name", "auto")
    budget = int(spec.get("budget", 100_000))
    if name == "auto":
        return evaluate.default_backend(nu, budget=budget, seed=cfg["seed"])
    if name == "closed_form":
        backend = evaluate.ClosedForm()
    elif name == "exact2d":
        backend = evaluate.Exact2D()
    elif name == "monte_carlo":
        backend = evaluate.MonteCarlo(budget=budget, seed=cfg["seed"])
    else:
        raise ConfigError(f"unknown backend '{name}'")
    if not backend.supports(nu):
        raise ConfigError(f"backend '{name}' does not support this scenario's measure")
    return backend


def _plan_from_config(cfg: dict) -> SamplingPlan:
    plan = cfg["plan"]
    region = plan["region"]
    kwargs = {}
    for key in ("pair_count", "cycle_count", "cube_count", "triple_count"):
        if key in plan:
            kwargs[key] = int(plan[key])
    if "scale_range" in plan:
        kwargs["scale_range"] = tuple(float(v) for v in plan["scale_range"])
    return SamplingPlan(region_lo=tuple(region[0]), region_hi=tuple(region[1]),
                        seed=cfg["seed"], **kwargs)


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp_report_")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_error_report(cfg: dict, args, message: str) -> None:
    payload = {"scenario": cfg["scenario"], "seed": cfg["seed"], "error": message}
    text = "\n".join([f"error: {message}", JSON_MARKER,
                      json.dumps(payload, sort_keys=True, separators=(",", ":")), ""])
    path = cfg.get("outputs", {}).get("report", "report.txt")
    if args.out:
        path = os.path.join(args.out, path)
    _atomic_write(path, text)


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
        scenario = build_scenario(cfg["scenario"], cfg["seed"])
        plan = _plan_from_config(cfg)
        if np.any(np.asarray(plan.region_lo) < scenario.domain_lo) or \
                np.any(np.asarray(plan.region_hi) > scenario.domain_hi):
            raise ConfigError("plan.region must lie inside the scenario domain "
                              f"[{scenario.domain_lo.tolist()}, {scenario.domain_hi.tolist()}]")
        backend = _pick_backend(scenario.measure, cfg)
    except (ConfigError, ValueError, DegenerateConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    try:
        vreport = scenario.validate(seed=cfg["seed"])
        report = run_diagnostics(scenario.measure, scenario.basepoint, plan,
                                 backend=backend, name=scenario.name,
                                 expectations=cfg.get("expect"))
    except (ValueError, DegenerateConfigurationError) as exc:
        # the scenario did build, so a report is still owed to the caller
        _write_error_report(cfg, args, str(exc))
        print(f"error: {exc}", file=sys.stderr)
        return 1

    violations = vreport.violations()
    payload = {
        "scenario": cfg["scenario"],
        "seed": cfg["seed"],
        "validation": {
            "ok": vreport.ok,
            "violations": violations,
            "min_segment_mass": vreport.min_segment_mass,
            "region_mass": vreport.region_mass,
        },
        "report": report.to_dict(),
    }
    json_block = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    text = "\n".join([
        report.render_text(),
        f"validation: {'no violation found' if vreport.ok else 'VIOLATIONS: ' + '; '.join(violations)}",
        JSON_MARKER,
        json_block,
        "",
    ])

    outputs = cfg.get("outputs", {})
    report_path = outputs.get("report", "report.txt")
    if args.out:
        report_path = os.path.join(args.out, report_path)
    _atomic_write(report_path, text)
    if args.format == "json":
        _atomic_write(os.path.splitext(report_path)[0] + ".json", json_block + "\n")

    if "grid" in outputs:
        gspec = outputs["grid"]
        try:
            window = gspec["window"]
            image = scenarios.grid_export(scenario, int(gspec["resolution"]),
                                          window[0], window[1], backend=backend)
        except (ValueError, DegenerateConfigurationError) as exc:
            print(f"error: grid export failed: {exc}", file=sys.stderr)
            return 1
        grid_path = gspec["path"]
        if args.out:
            grid_path = os.path.join(args.out, grid_path)
        os.makedirs(os.path.dirname(os.path.abspath(grid_path)) or ".", exist_ok=True)
        image.to_csv(grid_path)

    ok = report.passed() and vreport.ok
    print(f"report written to {report_path}; audits {'passed' if ok else 'FAILED'}")
    return 0 if ok else 2


def _parse_point(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"cannot parse point '{text}'") from exc


def cmd_eval(args) -> int:
    try:
        cfg = load_config(args.config)
        scenario = build_scenario(cfg["scenario"], cfg["seed"])
        backend = _pick_backend(scenario.measure, cfg)
        lines = []
        if args.pair:
            x = _parse_point(args.pair[0])
            y = _parse_point(args.pair[1])
            res = evaluate.pair_integrals(scenario.measure, x, y, backend=backend)
            lines.append({
                "query": "pair", "x": x.tolist(), "y": y.tolist(),
                "d": res.mass, "transversal": res.transversal,
                "embed_gap": np.linalg.norm(res.embed).tolist(),
                "backend": res.backend,
                "d_stderr": res.mass_se,
            })
        if args.point is not None:
            x = _parse_point(args.point)
            f = scenario.embedding(backend=backend)
            val = f.eval(x)
            lines.append({
                "query": "point", "x": x.tolist(), "f": val.tolist(),
                "basepoint": scenario.basepoint.tolist(),
                "backend": getattr(backend, "name", "unknown"),
            })
        if not lines:
            raise ConfigError("eval needs --pair or --point")
    except (ConfigError, ValueError, DegenerateConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for line in lines:
        print(json.dumps(line, sort_keys=True))
    return 0


def cmd_calibrate(args) -> int:
    try:
        result = evaluate.calibrate_embedding_constant(args.dim, args.budget, args.seed)
    except evaluate.CalibrationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    payload = {
        "dim": result.dim,
        "value": result.value,
        "half_width": result.half_width,
        "provenance": result.provenance,
        "budget": result.budget,
        "seed": result.seed,
        "per_distance": [list(row) for row in result.per_distance],
        "warning": result.warning,
    }
    path = os.path.join(args.out or ".", f"kernel_constant_dim{args.dim}.json")
    _atomic_write(path, json.dumps(payload, sort_keys=True, indent=2) + "\n")
    print(f"calibration written to {path}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="busemetric",
        description="projective metrics from hyperplane measures: run audits, "
                    "evaluate metrics/embeddings, calibrate the kernel constant")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="build a scenario, validate, run all audits")
    p_run.add_argument("config", help="strict JSON config path")
    p_run.add_argument("--out", help="directory prefix for output files")
    p_run.add_argument("--format", choices=("json", "csv"), default="csv",
                       help="also write a bare-JSON report copy when 'json'")
    p_run.set_defaults(func=cmd_run)

    p_eval = sub.add_parser("eval", help="evaluate the metric or embedding pointwise")
    p_eval.add_argument("config")
    p_eval.add_argument("--pair", nargs=2, metavar=("X", "Y"),
                        help="two comma-separated points, e.g. --pair 0,0 1,0")
    p_eval.add_argument("--point", metavar="X", help="one comma-separated point")
    p_eval.set_defaults(func=cmd_eval)

    p_cal = sub.add_parser("calibrate", help="estimate the embedding kernel constant")
    p_cal.add_argument("--dim", type=int, required=True)
    p_cal.add_argument("--budget", type=int, required=True)
    p_cal.add_argument("--seed", type=int, required=True)
    p_cal.add_argument("--out", help="output directory")
    p_cal.set_defaults(func=cmd_calibrate)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())

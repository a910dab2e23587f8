"""Command-line front end: ``eigenpath run | dist-info | validate``.

Configs are JSON documents validated against ``CONFIG_SCHEMA``. A run writes
``report.json``, ``steps.csv`` and (unless ``--no-plots``) SVG figures into
the output directory. CSV content depends only on the config and seed.

Exit codes: 0 success, 2 invalid config, 3 plan rejected, 4 numerical
failure (tracking lost or degenerate level).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .paths import DegeneracyError, EigenpathTracker, TrackingLostError, linear_path, track
from .qcore import random_hermitian
from .timedist import (
    KINDS,
    cost_lower_bound_check,
    from_spec,
    positive_lower_bound_check,
)
from .traversal import FAMILIES, PlanRejected, cost_statistics, execute, plan_randomization

EXIT_OK, EXIT_VALIDATION, EXIT_PLAN, EXIT_NUMERIC = 0, 2, 3, 4
OUT_ENV = "EIGENPATH_OUT"
SCHEMA_ID = "eigenpath.config/1"
REPORT_SCHEMA_ID = "eigenpath.report/1"

_DIST_SPEC = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": list(KINDS)},
        "params": {"type": "object"},
    },
}

_PLAN = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "p": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "gap_floor": {"type": "number", "exclusiveMinimum": 0},
        "family": {"enum": list(FAMILIES)},
        "negative_ok": {"type": "boolean"},
        "mode": {"enum": ["exact", "sampled"]},
        "trajectories": {"type": "integer", "minimum": 1, "maximum": 1000000},
        "length_bound": {"type": "number", "exclusiveMinimum": 0},
        "tail_factor": {"type": "number", "exclusiveMinimum": 1},
    },
}

_MATRIX = {"type": "array", "minItems": 2, "items": {"type": "array", "items": {"type": "number"}}}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema", "experiment"],
    "properties": {
        "schema": {"const": SCHEMA_ID},
        "experiment": {"enum": ["grover", "qsa", "generic-path", "dist-info"]},
        "seed": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string"},
        "instance": {"type": "object"},
        "plan": _PLAN,
        "distribution": _DIST_SPEC,
        "omega": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "min": {"type": "number"},
                "max": {"type": "number"},
                "points": {"type": "integer", "minimum": 2, "maximum": 100000},
                "gap": {"type": "number", "exclusiveMinimum": 0},
            },
        },
    },
    "allOf": [
        {
            "if": {"properties": {"experiment": {"const": "grover"}}},
            "then": {
                "required": ["instance"],
                "properties": {"instance": {
                    "type": "object",
                    "required": ["qubits"],
                    "additionalProperties": False,
                    "properties": {
                        "qubits": {"type": "integer", "minimum": 2, "maximum": 40},
                        "marked": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 0}},
                        "representation": {"enum": ["subspace", "full"]},
                    },
                }},
            },
        },
        {
            "if": {"properties": {"experiment": {"const": "qsa"}}},
            "then": {
                "required": ["instance"],
                "properties": {"instance": {
                    "type": "object",
                    "required": ["energies"],
                    "additionalProperties": False,
                    "properties": {
                        "energies": {"type": "array", "minItems": 2, "maxItems": 16, "items": {"type": "number"}},
                        "beta_final": {"type": "number", "exclusiveMinimum": 0},
                        "laziness": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.5},
                        "proposal": {"enum": ["complete", "ring"]},
                    },
                }},
            },
        },
        {
            "if": {"properties": {"experiment": {"const": "generic-path"}}},
            "then": {
                "required": ["instance"],
                "properties": {"instance": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "h0": _MATRIX,
                        "h1": _MATRIX,
                        "random_dim": {"type": "integer", "minimum": 2, "maximum": 64},
                        "tracker": {"enum": ["smallest", "largest"]},
                    },
                    "oneOf": [{"required": ["h0", "h1"]}, {"required": ["random_dim"]}],
                }},
            },
        },
        {
            "if": {"properties": {"experiment": {"const": "dist-info"}}},
            "then": {"required": ["distribution"]},
        },
    ],
}


class ConfigError(ValueError):
    pass


def validate_config(config: dict) -> dict:
    try:
        jsonschema.validate(config, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from exc
    inst = config.get("instance", {})
    if config["experiment"] == "grover":
        n = inst["qubits"]
        if inst.get("representation") == "full" and n > 10:
            raise ConfigError("instance/qubits: full representation supports at most 10 qubits")
        if any(m >= 2**n for m in inst.get("marked", [0])):
            raise ConfigError("instance/marked: index out of range")
    if config["experiment"] == "generic-path" and "h0" in inst:
        a, b = np.asarray(inst["h0"], dtype=float), np.asarray(inst["h1"], dtype=float)
        for name, m in (("h0", a), ("h1", b)):
            if m.ndim != 2 or m.shape[0] != m.shape[1] or not np.allclose(m, m.T, atol=1e-12):
                raise ConfigError(f"instance/{name}: expected a real symmetric square matrix")
        if a.shape != b.shape:
            raise ConfigError("instance: h0 and h1 differ in shape")
    om = config.get("omega", {})
    if "min" in om and "max" in om and om["min"] >= om["max"]:
        raise ConfigError("omega: min must be below max")
    if config["experiment"] == "dist-info":
        try:
            from_spec(config["distribution"])
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"distribution: {exc}") from exc
    return config


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


# ---------------------------------------------------------------------------
# Output helpers


def atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    return str(x)


def csv_bytes(header: list[str], rows) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue().encode()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _svg_plot(path: Path, draw) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "eigenpath"
    fig, ax = plt.subplots(figsize=(6, 4))
    draw(ax)
    fig.tight_layout()
    buf = io.BytesIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    atomic_write(path, buf.getvalue())


# ---------------------------------------------------------------------------
# Experiments


def dist_info(spec: dict, omega_min: float = 0.0, omega_max: float = 4.0,
              points: int = 100, gap: float | None = None) -> dict:
    """|Phi| table, cost and inequality checks for one distribution spec."""
    dist = from_spec(spec)
    omega = np.linspace(omega_min, omega_max, points)
    phi = dist.char_fn(omega)
    checks = [cost_lower_bound_check(dist, w) for w in omega if w != 0]
    out = {
        "distribution": dist.to_spec(),
        "support": dist.support,
        "mean_abs_cost": dist.mean_abs(),
        "omega": omega,
        "phi": phi,
        "cost_bound_pass": all(c.passed for c in checks),
        "cost_bound_min_slack": min((c.value - c.bound for c in checks), default=float("inf")),
    }
    if dist.nonnegative:
        g = gap if gap is not None else (dist.bandlimit or 1.0)
        pos = positive_lower_bound_check(dist, g)
        out["positive_bound"] = {"gap": g, "sup": pos.value, "bound": pos.bound, "pass": pos.passed}
    return out


def _plan_args(config: dict, mode_override: str | None):
    plan = dict(config.get("plan", {}))
    mode = mode_override or plan.get("mode", "exact")
    return plan, ("trajectories" if mode == "sampled" else "exact")


def _run_grover(config, seed, mode_override):
    from .apps.grover import GroverInstance, run_grover

    inst_cfg = config["instance"]
    plan_cfg, mode = _plan_args(config, mode_override)
    inst = GroverInstance(inst_cfg["qubits"], tuple(inst_cfg.get("marked", [0])),
                          inst_cfg.get("representation", "subspace"))
    plan, report = run_grover(inst, plan_cfg.get("p", 0.8), plan_cfg.get("family", "compact_optimal"),
                              plan_cfg.get("negative_ok", True), mode,
                              plan_cfg.get("trajectories", 2000), seed,
                              plan_cfg.get("length_bound", np.pi / 2))
    return plan, report


def _run_qsa(config, seed, mode_override):
    from .apps.annealing import AnnealingInstance, run_qsa

    inst_cfg = config["instance"]
    plan_cfg, mode = _plan_args(config, mode_override)
    inst = AnnealingInstance(np.asarray(inst_cfg["energies"], dtype=float), inst_cfg.get("beta_final"),
                             inst_cfg.get("proposal", "complete"), inst_cfg.get("laziness", 0.5))
    return run_qsa(inst, plan_cfg.get("p", 0.8), plan_cfg.get("negative_ok", True), mode,
                   plan_cfg.get("trajectories", 2000), seed, plan_cfg.get("gap_floor"))


def _run_generic(config, seed, mode_override):
    inst_cfg = config["instance"]
    plan_cfg, mode = _plan_args(config, mode_override)
    if "random_dim" in inst_cfg:
        rng = np.random.default_rng([seed, 0x5EED])
        n = inst_cfg["random_dim"]
        h0, h1 = random_hermitian(n, rng), random_hermitian(n, rng)
    else:
        h0, h1 = np.asarray(inst_cfg["h0"], dtype=float), np.asarray(inst_cfg["h1"], dtype=float)
    path = linear_path(h0, h1, "generic")
    tracker = EigenpathTracker(rule=inst_cfg.get("tracker", "smallest"))
    gap_floor = plan_cfg.get("gap_floor")
    if gap_floor is None:
        gaps = [st.gap for st in track(path, tracker.copy(), np.linspace(0, 1, 401))]
        gap_floor = 0.999 * min(gaps)
    plan = plan_randomization(path, tracker, plan_cfg.get("p", 0.8), gap_floor,
                              plan_cfg.get("family", "compact_optimal"),
                              plan_cfg.get("negative_ok", True),
                              length_bound=plan_cfg.get("length_bound"), mode=mode,
                              trajectories=plan_cfg.get("trajectories", 2000), seed=seed)
    return plan, execute(plan, path, tracker)


RUNNERS = {"grover": _run_grover, "qsa": _run_qsa, "generic-path": _run_generic}


def run_experiment(config: dict, out_dir: Path, plots: bool = True) -> dict:
    """Execute a validated config; returns the report record written to disk."""
    seed = int(config.get("seed", 0))
    base = {
        "schema": REPORT_SCHEMA_ID,
        "version": __version__,
        "experiment": config["experiment"],
        "config_hash": config_hash(config),
        "seed": seed,
    }
    if config["experiment"] == "dist-info":
        om = config.get("omega", {})
        info = dist_info(config["distribution"], om.get("min", 0.0), om.get("max", 4.0),
                         om.get("points", 100), om.get("gap"))
        rows = [(w, abs(f), f.real, f.imag) for w, f in zip(info["omega"], info["phi"])]
        atomic_write(out_dir / "steps.csv", csv_bytes(["omega", "abs_phi", "re_phi", "im_phi"], rows))
        if plots:
            _svg_plot(out_dir / "char_fn.svg", lambda ax: (
                ax.plot(info["omega"], np.abs(info["phi"])), ax.set_xlabel("omega"), ax.set_ylabel("|Phi|")))
        result = {k: v for k, v in info.items() if k not in ("omega", "phi")}
    else:
        plan, report = RUNNERS[config["experiment"]](config, seed, None)
        rows = [(j + 1, s, f) for j, (s, f) in enumerate(zip(report.schedule, report.step_fidelities))]
        atomic_write(out_dir / "steps.csv", csv_bytes(["step", "s", "fidelity"], rows))
        result = report.to_record()
        result.pop("elapsed_seconds", None)
        if report.cost_samples is not None:
            a = config.get("plan", {}).get("tail_factor", 2.0)
            stats = cost_statistics(report, a)
            result["cost_tail"] = {"a": a, "tail_bound": stats.tail_bound,
                                   "empirical_tail": stats.empirical_tail,
                                   "standard_error": stats.standard_error, "pass": stats.passed}
        if plots:
            _svg_plot(out_dir / "fidelity.svg", lambda ax: (
                ax.plot(np.arange(1, len(report.step_fidelities) + 1), report.step_fidelities, "."),
                ax.set_xlabel("step"), ax.set_ylabel("fidelity")))
            dist = plan.distribution
            w = np.linspace(0, 4 * plan.gap_floor, 400)
            _svg_plot(out_dir / "char_fn.svg", lambda ax: (
                ax.plot(w, np.abs(dist.char_fn(w))), ax.axvline(plan.gap_floor, ls="--"),
                ax.set_xlabel("omega"), ax.set_ylabel("|Phi|")))
            if report.cost_samples is not None:
                _svg_plot(out_dir / "cost_hist.svg", lambda ax: (
                    ax.hist(report.cost_samples, bins=50), ax.set_xlabel("cost"), ax.set_ylabel("count")))
    record = {**base, "result": _jsonable(result)}
    atomic_write(out_dir / "report.json", (json.dumps(record, indent=2, sort_keys=True) + "\n").encode())
    return record


# ---------------------------------------------------------------------------
# Entry point


def _error(code: int, kind: str, message: str, **extra) -> int:
    print(json.dumps({"error": kind, "message": message, "exit_code": code, **_jsonable(extra)}),
          file=sys.stderr)
    return code


def _load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _output_dir(args, config) -> Path:
    if args.out:
        return Path(args.out)
    if os.environ.get(OUT_ENV):
        return Path(os.environ[OUT_ENV])
    return Path(config.get("output_dir", "eigenpath-out"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eigenpath", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute an experiment config")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int)
    run.add_argument("--out")
    run.add_argument("--mode", choices=["exact", "sampled"])
    run.add_argument("--no-plots", action="store_true")

    info = sub.add_parser("dist-info", help="tabulate a time distribution")
    src = info.add_mutually_exclusive_group(required=True)
    src.add_argument("--config")
    src.add_argument("--spec", help='JSON record, e.g. \'{"kind": "gaussian", "params": {"sigma": 1}}\'')
    info.add_argument("--omega-min", type=float, default=0.0)
    info.add_argument("--omega-max", type=float, default=4.0)
    info.add_argument("--points", type=int, default=100)
    info.add_argument("--gap", type=float)
    info.add_argument("--out")
    info.add_argument("--no-plots", action="store_true")

    val = sub.add_parser("validate", help="check a config against the schema")
    val.add_argument("--config", required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "dist-info":
            if args.config:
                config = _load_config(args.config)
            else:
                try:
                    spec = json.loads(args.spec)
                except json.JSONDecodeError as exc:
                    raise ConfigError(f"--spec is not valid JSON: {exc}") from exc
                omega = {"min": args.omega_min, "max": args.omega_max, "points": args.points}
                if args.gap is not None:
                    omega["gap"] = args.gap
                config = {"schema": SCHEMA_ID, "experiment": "dist-info",
                          "distribution": spec, "omega": omega}
            validate_config(config)
            if args.out or os.environ.get(OUT_ENV):
                record = run_experiment(config, _output_dir(args, config), not args.no_plots)
                print(json.dumps(record["result"], sort_keys=True))
            else:
                om = config.get("omega", {})
                info = dist_info(config["distribution"], om.get("min", 0.0), om.get("max", 4.0),
                                 om.get("points", 100), om.get("gap"))
                rows = [(w, abs(f), f.real, f.imag) for w, f in zip(info["omega"], info["phi"])]
                sys.stdout.write(csv_bytes(["omega", "abs_phi", "re_phi", "im_phi"], rows).decode())
            return EXIT_OK

        config = _load_config(args.config)
        if args.command == "validate":
            validate_config(config)
            print(json.dumps({"valid": True, "config_hash": config_hash(config)}))
            return EXIT_OK

        if args.seed is not None:
            config["seed"] = args.seed
        if args.mode is not None:
            config.setdefault("plan", {})["mode"] = args.mode
        validate_config(config)
        out_dir = _output_dir(args, config)
        record = run_experiment(config, out_dir, not args.no_plots)
        print(json.dumps({"output_dir": str(out_dir), "config_hash": record["config_hash"],
                          "seed": record["seed"]}))
        return EXIT_OK
    except ConfigError as exc:
        return _error(EXIT_VALIDATION, "validation", str(exc))
    except PlanRejected as exc:
        return _error(EXIT_PLAN, "plan-rejected", str(exc), s=exc.s)
    except (TrackingLostError, DegeneracyError) as exc:
        return _error(EXIT_NUMERIC, "numerical", str(exc))


if __name__ == "__main__":
    sys.exit(main())

"""Command-line runner: ``nlgrad <command> [flags]`` or ``nlgrad <command> --config run.json``.

Exit status 0 when the report's criterion passes, 1 when it fails and 2 on
a configuration error (no report is written then).  Reports go to
``--output-dir``, else ``$NLGRAD_OUTPUT_DIR``, else the config's
``output_dir``.
"""
from __future__ import annotations

import argparse
import copy
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import experiments as ex
from .fields import gaussian_bump
from .grid import GridError, PeriodicGrid, build_masks, save_grid_function
from .kernel import KernelDomainError
from . import variational as var

SCHEMA_VERSION = 1
OUTPUT_ENV = "NLGRAD_OUTPUT_DIR"

# default parameters per command; their types define the config schema
DEFAULTS = {
    "kernel": {"dim": 1, "s_list": [0.0, 0.5, 0.9], "radii": [0.05, 0.1, 0.25, 0.5, 0.75, 1.0, 1.5],
               "delta": 1.0, "b0": 0.5},
    "identities": {"n": [1, 2], "s": [0.0, 0.25, 0.5, 0.75, 0.95], "delta": [0.5, 1.0], "N": [128, 256],
                   "gap": True},
    "localize": {"s_list": [0.9, 0.95, 0.99, 0.999], "delta": 1.0, "N": 256, "dim": 1, "width": 0.4,
                 "tail_start": 0.9, "final_tol": 0.01},
    "poincare": {"s_list": [0.0, 0.25, 0.5, 0.75, 0.95, 1.0], "samples": 64, "kmax": 1.0, "band": 10.0,
                 "N": 256, "delta": 0.5, "bounds": [-2.0, 2.0]},
    "l1limit": {"s_list": [0.0, 0.5, 0.9, 0.95, 0.99, 0.999], "delta": 1.0, "b0": 0.5, "eps": 0.25, "dim": 1,
                "tail_start": 0.9, "norm_tol": 0.05, "tail_tol": 0.05},
    "decay": {"s_list": [0.0, 0.25, 0.5, 0.75, 0.95, 0.999], "freq_list": [1.0, 2.0, 4.0, 8.0, 16.0],
              "delta": 1.0, "dim": 1, "b0": 0.5, "bound": 1.0},
    "minimize": {"integrand": "quadratic", "integrand_params": {}, "s": 0.5, "N": 512, "dim": 1,
                 "delta": 0.5, "source_radius": 1.0, "slope": 0.0, "tol": 1e-8, "max_iter": 20000,
                 "oracle": True, "dump_fields": False},
    "gamma-s": {"s_list": [0.5, 0.75, 0.9, 0.99, 1.0], "N": 512, "delta": 0.5, "source_radius": 1.0,
                "tol": 1e-8, "max_iter": 20000, "tail_start": 0.5},
    "homogenize": {"a": [1.0, 4.0], "eps_list": [0.25, 0.125, 0.0625], "N": 2048, "s": 0.5, "delta": 0.5,
                   "points_per_cell": 64, "cell_rtol": 0.02},
    "relax": {"points_list": [512, 1024, 2048], "slope": 0.3, "s": 0.5, "delta": 0.5, "cells": 4,
              "rtol": 0.05, "tol": 1e-8, "max_iter": 20000},
}

INTEGRANDS = ("quadratic", "power", "double_well", "two_phase")


class ConfigError(ValueError):
    """Invalid configuration; reported with the offending field path."""


def _kind(value):
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, int):
        return "int"
    if isinstance(value, float):
        return "float"
    if isinstance(value, str):
        return "str"
    if isinstance(value, dict):
        return "dict"
    if isinstance(value, list):
        return "list[int]" if value and all(isinstance(v, int) for v in value) else "list[float]"
    raise TypeError(value)


def _coerce(path: str, kind: str, value):
    """Check ``value`` against ``kind``; ints are accepted where floats are expected."""
    def num(v, p, integral):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{p}: expected a number, got {v!r}")
        if integral:
            if isinstance(v, float) and not v.is_integer():
                raise ConfigError(f"{p}: expected an integer, got {v!r}")
            return int(v)
        if not math.isfinite(v):
            raise ConfigError(f"{p}: must be finite")
        return float(v)

    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false, got {value!r}")
        return value
    if kind in ("int", "float"):
        return num(value, path, kind == "int")
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    if kind == "dict":
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected an object, got {value!r}")
        return value
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{path}: expected a non-empty list, got {value!r}")
    integral = kind == "list[int]"
    return [num(v, f"{path}[{i}]", integral) for i, v in enumerate(value)]


@dataclass
class RunConfig:
    command: str
    parameters: dict = field(default_factory=dict)
    seed: int = 0
    jobs: int = 1
    output_dir: str = "reports"
    schema_version: int = SCHEMA_VERSION

    @classmethod
    def default(cls, command: str) -> "RunConfig":
        if command not in DEFAULTS:
            raise ConfigError(f"command: unknown command {command!r}")
        return cls(command, copy.deepcopy(DEFAULTS[command]))

    def to_dict(self) -> dict:
        return {"schema_version": self.schema_version, "command": self.command, "parameters": self.parameters,
                "seed": self.seed, "jobs": self.jobs, "output_dir": self.output_dir}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("config: expected a JSON object")
        known = {"schema_version", "command", "parameters", "seed", "jobs", "output_dir"}
        extra = sorted(set(d) - known)
        if extra:
            raise ConfigError(f"{extra[0]}: unknown field")
        for key in ("schema_version", "command", "parameters"):
            if key not in d:
                raise ConfigError(f"{key}: missing")
        if d["schema_version"] != SCHEMA_VERSION:
            raise ConfigError(f"schema_version: expected {SCHEMA_VERSION}, got {d['schema_version']!r}")
        cfg = cls(d["command"], d["parameters"], d.get("seed", 0), d.get("jobs", 1),
                  d.get("output_dir", "reports"))
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config: invalid JSON ({e})") from None
        return cls.from_dict(d)

    def validate(self) -> "RunConfig":
        if self.command not in DEFAULTS:
            raise ConfigError(f"command: unknown command {self.command!r}")
        self.seed = _coerce("seed", "int", self.seed)
        self.jobs = _coerce("jobs", "int", self.jobs)
        if self.jobs < 1:
            raise ConfigError("jobs: must be at least 1")
        if not isinstance(self.output_dir, str):
            raise ConfigError("output_dir: expected a string")
        if not isinstance(self.parameters, dict):
            raise ConfigError("parameters: expected an object")
        schema = DEFAULTS[self.command]
        extra = sorted(set(self.parameters) - set(schema))
        if extra:
            raise ConfigError(f"parameters.{extra[0]}: unknown parameter for {self.command}")
        missing = sorted(set(schema) - set(self.parameters))
        if missing:
            raise ConfigError(f"parameters.{missing[0]}: missing")
        self.parameters = {k: _coerce(f"parameters.{k}", _kind(schema[k]), self.parameters[k])
                           for k in sorted(schema)}
        if self.command == "minimize" and self.parameters["integrand"] not in INTEGRANDS:
            raise ConfigError(f"parameters.integrand: expected one of {', '.join(INTEGRANDS)}")
        return self

    def stamp(self) -> str:
        """Hash of the result-determining fields; jobs and output_dir do not enter."""
        d = {k: v for k, v in self.to_dict().items() if k not in ("jobs", "output_dir")}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:12]


# ---------------------------------------------------------------------------
# commands: parameters -> (report, extra fields to dump)


def _mask(P, dim=1):
    grid = PeriodicGrid(dim, 8.0, P["N"])
    spec = {"shape": "interval", "bounds": [-2.0, 2.0]} if dim == 1 else {"shape": "disk", "radius": 2.0}
    return build_masks(spec, grid, P["delta"])


def _run_kernel(P, cfg):
    return ex.kernel_table(P["s_list"], P["radii"], P["delta"], dim=P["dim"], b0=P["b0"]), {}


def _run_identities(P, cfg):
    return ex.identity_suite(P["n"], P["s"], P["delta"], P["N"], seed=cfg.seed, gap=P["gap"],
                             jobs=cfg.jobs), {}


def _run_localize(P, cfg):
    phi = gaussian_bump(PeriodicGrid(P["dim"], 8.0, P["N"]), P["width"])
    return ex.localization_sweep(phi, P["s_list"], P["delta"], tail_start=P["tail_start"],
                                 final_tol=P["final_tol"], jobs=cfg.jobs), {}


def _run_poincare(P, cfg):
    mask = build_masks({"shape": "interval", "bounds": P["bounds"]}, PeriodicGrid(1, 8.0, P["N"]), P["delta"])
    return ex.poincare_sweep(mask, P["s_list"], P["samples"], cfg.seed, kmax=P["kmax"], band=P["band"],
                             jobs=cfg.jobs), {}


def _run_l1limit(P, cfg):
    return ex.l1_limit_sweep(P["s_list"], P["delta"], P["b0"], P["eps"], dim=P["dim"], tail_start=P["tail_start"],
                             norm_tol=P["norm_tol"], tail_tol=P["tail_tol"]), {}


def _run_decay(P, cfg):
    return ex.decay_check_R(P["s_list"], P["freq_list"], P["delta"], dim=P["dim"], b0=P["b0"],
                            bound=P["bound"]), {}


def _integrand(P):
    kind, prm = P["integrand"], dict(P["integrand_params"])
    src = var.bump_source(P["source_radius"]) if P["source_radius"] > 0 else None
    try:
        if kind == "quadratic":
            return var.quadratic(float(prm.pop("coef", 1.0)), src), prm
        if kind == "power":
            return var.power(float(prm.pop("p", 4.0)), src), prm
        if kind == "two_phase":
            return var.two_phase(prm.pop("a", (1.0, 4.0)), float(prm.pop("period", 0.25)), src), prm
        return var.double_well(), prm
    except (TypeError, ValueError) as e:
        raise ConfigError(f"parameters.integrand_params: {e}") from None


def _run_minimize(P, cfg):
    f, leftover = _integrand(P)
    if leftover:
        raise ConfigError(f"parameters.integrand_params.{sorted(leftover)[0]}: not used by {P['integrand']}")
    mask = _mask(P, P["dim"])
    g = var.affine_datum(mask, [P["slope"]] * P["dim"]) if P["slope"] else None
    prob = var.VariationalProblem(f, mask, P["s"], g)
    report, res = var.minimize_report(prob, tol=P["tol"], max_iter=P["max_iter"], oracle=P["oracle"])
    return report, ({"minimizer": res.u} if P["dump_fields"] else {})


def _run_gamma(P, cfg):
    prob = var.VariationalProblem(var.quadratic(1.0, var.bump_source(P["source_radius"])), _mask(P), 1.0)
    return var.gamma_sweep_s(prob, P["s_list"], tol=P["tol"], max_iter=P["max_iter"],
                             tail_start=P["tail_start"], jobs=cfg.jobs), {}


def _run_homogenize(P, cfg):
    a = P["a"]
    if len(a) != 2 or min(a) <= 0:
        raise ConfigError("parameters.a: expected two positive phase coefficients")
    harmonic = 2.0 / (1.0 / a[0] + 1.0 / a[1])
    return var.homogenization_sweep(tuple(a), P["eps_list"], _mask(P), s=P["s"],
                                    points_per_cell=P["points_per_cell"], expected_f_hom=harmonic,
                                    cell_rtol=P["cell_rtol"], jobs=cfg.jobs), {}


def _run_relax(P, cfg):
    return var.relaxation_sweep(P["points_list"], slope=P["slope"], s=P["s"], delta=P["delta"], cells=P["cells"],
                                rtol=P["rtol"], tol=P["tol"], max_iter=P["max_iter"], jobs=cfg.jobs), {}


RUNNERS = {
    "kernel": _run_kernel,
    "identities": _run_identities,
    "localize": _run_localize,
    "poincare": _run_poincare,
    "l1limit": _run_l1limit,
    "decay": _run_decay,
    "minimize": _run_minimize,
    "gamma-s": _run_gamma,
    "homogenize": _run_homogenize,
    "relax": _run_relax,
}


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def run(cfg: RunConfig, out=None) -> int:
    """Execute a validated config; returns the exit status."""
    out = sys.stdout if out is None else out
    try:
        cfg.validate()
        report, fields = RUNNERS[cfg.command](cfg.parameters, cfg)
    except (ConfigError, GridError, KernelDomainError, ValueError) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    report.parameters["config"] = cfg.to_dict()
    for i, row in enumerate(report.rows):
        print(f"{report.experiment_id}[{i}] " + " ".join(f"{c}={_fmt(v)}" for c, v in zip(report.columns, row)),
              file=out)
    stamp = cfg.stamp()
    jp, cp = report.write(cfg.output_dir, stamp)
    for name, f in fields.items():
        save_grid_function(Path(cfg.output_dir) / f"{report.experiment_id}_{stamp}_{name}", f)
    print(f"{report.experiment_id}: {'pass' if report.verdict else 'fail'} ({jp}, {cp})", file=out)
    return 0 if report.verdict else 1


# ---------------------------------------------------------------------------
# argument parsing


def _parse_value(kind: str, text: str):
    try:
        if kind == "bool":
            low = text.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return low in ("true", "1", "yes")
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "str":
            return text
        if kind == "dict":
            return json.loads(text)
        conv = int if kind == "list[int]" else float
        return [conv(t) for t in text.split(",") if t.strip()]
    except (ValueError, json.JSONDecodeError):
        raise argparse.ArgumentTypeError(f"cannot parse {text!r} as {kind}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nlgrad", description="Nonlocal gradient experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for command, defaults in DEFAULTS.items():
        sp = sub.add_parser(command, help=f"run the {command} experiment")
        sp.add_argument("--config", help="JSON run configuration (complete parameter set)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--jobs", type=int)
        sp.add_argument("--output-dir")
        sp.add_argument("--dump-config", action="store_true", help="print the resolved config and exit")
        for key, value in defaults.items():
            kind = _kind(value)
            sp.add_argument(f"--{key.replace('_', '-')}", dest=f"p_{key}", metavar=kind.upper(),
                            type=lambda t, k=kind: _parse_value(k, t), help=f"default: {json.dumps(value)}")
    return parser


def config_from_args(args) -> RunConfig:
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as e:
            raise ConfigError(f"config: cannot read {args.config} ({e.strerror})") from None
        cfg = RunConfig.from_json(text)
        if cfg.command != args.command:
            raise ConfigError(f"command: config is for {cfg.command!r}, not {args.command!r}")
    else:
        cfg = RunConfig.default(args.command)
    for key in DEFAULTS[args.command]:
        v = getattr(args, f"p_{key}")
        if v is not None:
            cfg.parameters[key] = v
    if args.seed is not None:
        cfg.seed = args.seed
    if args.jobs is not None:
        cfg.jobs = args.jobs
    if os.environ.get(OUTPUT_ENV):
        cfg.output_dir = os.environ[OUTPUT_ENV]
    if args.output_dir:
        cfg.output_dir = args.output_dir
    return cfg.validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    if args.dump_config:
        sys.stdout.write(cfg.to_json())
        return 0
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: ``hvrfif {validate,eval,perturb,dim} --config run.json``.

Exit codes: 0 ok, 1 validation, 2 no convergence, 3 dimension regime not
covered by the bound theorems.
"""

import argparse
import csv
import hashlib
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .dimension import INCONCLUSIVE, box_count, dimension_bounds, fit_slope, ladder_counts, validate_hypotheses
from .errors import HvrfifError, NoConvergence, ValidationError
from .evaluator import check_interpolation, chaos_game, orbit_distance, rb_iterate
from .factor_expr import DEFAULT_SAMPLES
from .model import build_partition, validate_dataset
from .perturbation import perturbation_from_exprs, verify_bound
from .rifs_core import FACTOR_NAMES, assemble_rifs, quads_from_exprs
from .surface import (
    box_count_surface,
    build_surface_partition,
    build_surface_rifs,
    grid_dataset,
    rb_iterate_surface,
    surface_dimension_bounds,
    surface_quads,
    validate_surface_hypotheses,
)

EXIT_OK, EXIT_VALIDATION, EXIT_CONVERGENCE, EXIT_INCONCLUSIVE = 0, 1, 2, 3
CURVE_DIM_SAMPLES = 2**18
SURFACE_DIM_SAMPLES = 512
CURVE_DELTAS = (2**-10, 2**-5, 6)
SURFACE_DELTAS = (2**-7, 2**-2, 6)
CHAOS_POINTS = 2000
CHAOS_DEPTH = 40
CHAOS_TOL = 1e-5


class ConfigError(ValidationError):
    pass


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def dump_json(obj):
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


# --- configuration -----------------------------------------------------------

def load_config(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    base = os.path.dirname(os.path.abspath(path))
    return cfg, hashlib.sha256(raw).hexdigest(), base


def parse_deltas(text):
    parts = str(text).split(":")
    if len(parts) != 3:
        raise ConfigError(f"deltas must be MIN:MAX:LEVELS, got {text!r}")
    try:
        lo, hi, levels = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(f"deltas must be MIN:MAX:LEVELS, got {text!r}") from None
    return lo, hi, levels


def _section(cfg, name):
    sec = cfg.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"{name!r} must be an object")
    return sec


def _load_dataset_doc(spec, base):
    if isinstance(spec, str):
        path = spec if os.path.isabs(spec) else os.path.join(base, spec)
        if path.endswith(".json"):
            with open(path) as fh:
                return json.load(fh)
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
        try:
            pts = [[float(v) for v in r] for r in rows]
        except ValueError:
            pts = [[float(v) for v in r] for r in rows[1:]]  # header row
        return {"points": pts}
    if not isinstance(spec, dict):
        raise ConfigError("dataset must be an object or a file path")
    return spec


class Run:
    """Resolved configuration plus the assembled system."""

    def __init__(self, cfg, digest, base, args):
        self.cfg, self.digest = cfg, digest
        self.mode = cfg.get("mode", "curve")
        if self.mode not in ("curve", "surface"):
            raise ConfigError(f"mode must be 'curve' or 'surface', got {self.mode!r}")
        ev = _section(cfg, "evaluation")
        dim = _section(cfg, "dimension")
        part = _section(cfg, "partition")
        self.grid = args.grid if args.grid is not None else ev.get("grid")
        self.tol = float(args.tol if args.tol is not None else ev.get("tol", 1e-10))
        self.max_iter = int(ev.get("max_iter", 200))
        self.samples = int(ev.get("profile_samples", DEFAULT_SAMPLES))
        self.seed = int(args.seed if args.seed is not None else cfg.get("seed", 0))
        self.allow_classical = bool(args.allow_classical or part.get("allow_classical", False))
        self.rescale = bool(args.rescale or cfg.get("rescale", False))
        deltas = args.deltas if args.deltas is not None else dim.get("deltas")
        self.deltas = parse_deltas(deltas) if deltas is not None else None
        self.dim_grid = dim.get("grid")
        factors = cfg.get("factors")
        if not isinstance(factors, dict):
            raise ConfigError("'factors' must map factor names to expressions")
        unknown = set(factors) - set(FACTOR_NAMES)
        if unknown:
            raise ConfigError(f"unknown factor names: {sorted(unknown)}")
        doc = _load_dataset_doc(cfg.get("dataset"), base)
        if self.mode == "curve":
            ds = validate_dataset(doc.get("points", []))
            if self.rescale:
                ds = ds.rescaled_unit()
            self.dataset = ds
            self.partition = build_partition(ds, part.get("domains", []), part.get("gamma", []), self.allow_classical)
            self.system = assemble_rifs(ds, self.partition, quads_from_exprs(ds, factors, self.samples),
                                        part.get("orientations"))
        else:
            g = grid_dataset(doc.get("x"), doc.get("y"), doc.get("z"), doc.get("t"))
            self.dataset = g
            self.partition = build_surface_partition(g, part.get("domains", []), part.get("gamma", []),
                                                     self.allow_classical)
            self.system = build_surface_rifs(g, self.partition, surface_quads(g, factors, self.samples))

    @property
    def regions(self):
        return self.dataset.n if self.mode == "curve" else self.dataset.N

    def eval_grid(self):
        n = self.dataset.n
        if self.grid is not None:
            return int(self.grid)
        return 64 * n if self.mode == "curve" else 16 * n

    def header(self, command):
        return {"command": command, "config_sha256": self.digest, "mode": self.mode, "seed": self.seed,
                "version": __version__}


# --- commands ----------------------------------------------------------------

def _profiles(run):
    out = []
    for k, q in enumerate(run.system.quads, 1):
        out.append({name: {"expr": str(e), "sup_abs": p.sup_abs, "inf_abs": p.inf_abs,
                           "lipschitz_estimate": p.lipschitz, "estimated": p.estimated}
                    for name, e, p in zip(FACTOR_NAMES, q.exprs(), q.profiles)} | {"region": k})
    return out


def cmd_validate(run):
    sysm = run.system
    rep = validate_hypotheses(sysm) if run.mode == "curve" else validate_surface_hypotheses(sysm)
    report = run.header("validate") | {
        "regions": run.regions,
        "domains": [list(d) for d in run.partition.domains],
        "gamma": list(run.partition.gamma),
        "s_bar": sysm.s_bar,
        "M": sysm.M,
        "C": sysm.C,
        "factor_profiles": _profiles(run),
        "dimension_hypotheses": rep.checks,
        "status": "ok",
    }
    return EXIT_OK, report, {}


def cmd_eval(run):
    grid = run.eval_grid()
    try:
        if run.mode == "curve":
            sampled = rb_iterate(run.system, grid, run.tol, run.max_iter)
        else:
            sampled = rb_iterate_surface(run.system, grid, run.tol, run.max_iter)
    except NoConvergence as exc:
        sampled = exc.partial
        report = run.header("eval") | {"status": exc.code, "message": str(exc),
                                       "iterations": sampled.iterations, "residual": sampled.residual}
        return EXIT_CONVERGENCE, report, {"samples.csv": sampled}
    report = run.header("eval") | {
        "grid_points": grid,
        "iterations": sampled.iterations,
        "residual": sampled.residual,
        "tol": run.tol,
        "s_bar": run.system.s_bar,
        "residual_ratios": sampled.residual_ratios(),
        "status": "ok",
    }
    if run.mode == "curve":
        chk = check_interpolation(sampled, run.dataset, 10 * run.tol)
        report["node_error_max"] = chk.max_error
        orbit = chaos_game(run.system, CHAOS_POINTS, seed=run.seed)
        dist = orbit_distance(orbit, sampled, run.system, CHAOS_DEPTH)
        report["chaos_game"] = {"points": CHAOS_POINTS, "read_depth": CHAOS_DEPTH,
                                "max_distance": float(dist.max()), "tolerance": CHAOS_TOL,
                                "passed": bool(dist.max() <= CHAOS_TOL)}
    else:
        e1, e2 = sampled.node_errors(run.dataset)
        report["node_error_max"] = float(max(e1.max(), e2.max()))
    return EXIT_OK, report, {"samples.csv": sampled}


def cmd_perturb(run):
    if run.mode != "curve":
        raise ConfigError("perturb supports curve mode only")
    spec = run.cfg.get("perturbation")
    if not isinstance(spec, dict):
        raise ConfigError("'perturbation' must map delta names to expressions")
    pert = perturbation_from_exprs(run.dataset, spec, run.samples)
    rep = verify_bound(run.system, pert, run.eval_grid(), run.tol, max(run.max_iter, 500))
    report = run.header("perturb") | rep.as_dict() | {"status": "pass" if rep.passed else "fail"}
    return (EXIT_OK if rep.passed else EXIT_VALIDATION), report, {}


def _curve_dim_grid(run):
    if run.dim_grid is not None:
        return int(run.dim_grid)
    n = run.dataset.n
    return n * math.ceil(CURVE_DIM_SAMPLES / n)


def cmd_dim(run):
    if run.mode == "curve":
        hyp = validate_hypotheses(run.system)
        bounds = dimension_bounds(run.system)
        sampled = rb_iterate(run.system, _curve_dim_grid(run), run.tol, run.max_iter)
        counter = box_count
        lo, hi, levels = run.deltas or CURVE_DELTAS
    else:
        hyp = validate_surface_hypotheses(run.system)
        bounds = surface_dimension_bounds(run.system)
        n = run.dataset.n
        g = int(run.dim_grid) if run.dim_grid is not None else n * math.ceil(SURFACE_DIM_SAMPLES / n)
        sampled = rb_iterate_surface(run.system, g, run.tol, run.max_iter)
        counter = box_count_surface
        lo, hi, levels = run.deltas or SURFACE_DELTAS
    deltas, counts = ladder_counts(sampled, lo, hi, levels, counter)
    slope, r2 = fit_slope(deltas, counts)
    report = run.header("dim") | bounds.as_dict() | {
        "hypotheses": hyp.checks,
        "deltas": deltas,
        "counts": counts,
        "slope": slope,
        "r2": r2,
        "status": bounds.case,
    }
    code = EXIT_INCONCLUSIVE if bounds.case == INCONCLUSIVE else EXIT_OK
    return code, report, {}


COMMANDS = {"validate": cmd_validate, "eval": cmd_eval, "perturb": cmd_perturb, "dim": cmd_dim}


def build_parser():
    p = argparse.ArgumentParser(prog="hvrfif", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="JSON run configuration")
        s.add_argument("--out", default=None, help="directory for report and CSV files")
        s.add_argument("--grid", type=int, default=None, help="sampling intervals (along x for surfaces)")
        s.add_argument("--tol", type=float, default=None)
        s.add_argument("--seed", type=int, default=None)
        s.add_argument("--deltas", default=None, help="mesh ladder MIN:MAX:LEVELS")
        s.add_argument("--allow-classical", action="store_true", help="admit a single domain")
        s.add_argument("--rescale", action="store_true", help="map abscissas onto [0, 1] first")
    return p


def _write_outputs(out_dir, command, report, files):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, f"{command}_report.json"), "w", newline="\n") as fh:
        fh.write(dump_json(report))
    for name, obj in files.items():
        obj.to_csv(os.path.join(out_dir, name))


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg, digest, base = load_config(args.config)
        run = Run(cfg, digest, base, args)
        code, report, files = COMMANDS[args.command](run)
    except OSError as exc:
        print(f"error: ConfigError: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NoConvergence as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (HvrfifError, ValueError) as exc:
        name = exc.code if isinstance(exc, HvrfifError) else "ValueError"
        print(f"error: {name}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    sys.stdout.write(dump_json(report))
    if args.out:
        _write_outputs(args.out, args.command, report, files)
    if code == EXIT_CONVERGENCE:
        print(f"error: NoConvergence: {report['message']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())

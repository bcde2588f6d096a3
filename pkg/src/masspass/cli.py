"""Command-line orchestration: configuration, pipelines, persistence.

Subcommands
-----------
geometry-check   invariant residuals for a configured or random pair (JSON)
morse            approximate Morse report for a stored iterate (JSON)
mp-curve         level sweep over the rho grid (CSV)
solve            full pipeline: sweep, extraction, refinement (JSON lines + JSON)
verify-lemmas    randomized verification suites (JSON)

Reports are deterministic for a fixed seed: JSON is emitted with sorted keys
and no timestamps, so repeated runs are byte-identical.  Wall-clock timings
and content hashes of every emitted file live in the run manifest, which is
the only non-reproducible artifact.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (ConfigError, GeometryFailure, MasspassError, NoConvergence,
                     SelectionFailure, BudgetExceeded)
from .functional import approx_morse_index, constrained_dual_norm
from .hilbert import HilbertPair, random_pair
from .minmax import (extract_palais_smale, find_differentiability_point,
                     refine_and_certify, rho_sweep)
from .problems import NLSProblem, assemble, endpoints, initial_pool
from .verify import geometry_suite, run_verification

EXIT_CONFIG = 2
EXIT_GEOMETRY = 3
EXIT_CERTIFICATION = 4
EXIT_NO_CONVERGENCE = 5

SOLVE_DEFAULTS = {
    "nodes": 33,
    "rounds": 120,
    "records": 5,
    "grid_points": 11,
    "positivize": True,
    "refine_tol": 1e-11,
}


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _strip_timings(obj):
    """Drop wall-clock fields from report payloads; they live in the manifest."""
    if isinstance(obj, dict):
        return {k: _strip_timings(v) for k, v in obj.items() if k != "runtime_s"}
    if isinstance(obj, list):
        return [_strip_timings(v) for v in obj]
    return obj


def _round_floats(obj, digits=14):
    if isinstance(obj, float):
        return float(f"{obj:.{digits}e}")
    if isinstance(obj, dict):
        return {k: _round_floats(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v, digits) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_round_floats(float(v), digits) for v in obj.ravel()]
    if isinstance(obj, (np.floating,)):
        return _round_floats(float(obj), digits)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


class RunManifest:
    """Config snapshot, seed, versions, per-stage timing, artifact hashes."""

    def __init__(self, command: str, config: dict | None, seed: int):
        import scipy
        self.data = {
            "command": command,
            "config": config,
            "seed": seed,
            "versions": {
                "masspass": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": sys.version.split()[0],
            },
            "timing_s": {},
            "artifacts": {},
        }
        self._stage_start = None
        self._stage_name = None

    def stage(self, name: str):
        self._flush()
        self._stage_name = name
        self._stage_start = time.time()

    def _flush(self):
        if self._stage_name is not None:
            self.data["timing_s"][self._stage_name] = round(
                time.time() - self._stage_start, 3)
            self._stage_name = None

    def add_artifact(self, path: Path):
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        self.data["artifacts"][path.name] = digest

    def write(self, out_dir: Path):
        self._flush()
        path = out_dir / "manifest.json"
        path.write_text(_dump_json(self.data), encoding="utf-8")
        return path


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _problem_from_config(config: dict, seed: int) -> NLSProblem:
    section = dict(config.get("problem", {}))
    section.setdefault("seed", seed)
    return NLSProblem.from_dict(section)


def _solve_params(config: dict) -> dict:
    params = dict(SOLVE_DEFAULTS)
    params.update(config.get("solve", {}))
    return params


def _write(out_dir: Path, name: str, text: str, manifest: RunManifest) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    path.write_text(text, encoding="utf-8")
    manifest.add_artifact(path)
    return path


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_geometry_check(args) -> int:
    config = _load_config(args.config)
    manifest = RunManifest("geometry-check", config, args.seed)
    manifest.stage("suite")
    if config:
        problem = _problem_from_config(config, args.seed)
        assembled = assemble(problem)
        dims = (assembled.pair.dim,)
        report = geometry_suite(args.samples, dims, base_seed=1000 + args.seed,
                                threads=args.threads)
        report["pair"] = {"source": "config", "dim": assembled.pair.dim}
    else:
        report = geometry_suite(args.samples, (3, 50, 400),
                                base_seed=1000 + args.seed, threads=args.threads)
        report["pair"] = {"source": "random", "dims": [3, 50, 400]}
    report = _round_floats(_strip_timings(report))
    text = _dump_json(report)
    out_dir = Path(args.out)
    manifest.stage("write")
    _write(out_dir, "geometry.json", text, manifest)
    manifest.write(out_dir)
    print(text, end="")
    return 0 if report["passed"] else EXIT_GEOMETRY


def cmd_morse(args) -> int:
    config = _load_config(args.config)
    manifest = RunManifest("morse", config, args.seed)
    manifest.stage("assemble")
    problem = _problem_from_config(config, args.seed)
    assembled = assemble(problem)
    with open(args.iterate, "r", encoding="utf-8") as fh:
        iterate = json.load(fh)
    u = np.asarray(iterate["u"], dtype=float)
    if u.shape[0] != assembled.pair.dim:
        raise ConfigError(
            f"iterate length {u.shape[0]} does not match dimension {assembled.pair.dim}")
    rho = float(iterate.get("rho", problem.rho_min))
    theta = float(iterate.get("theta", args.theta))
    manifest.stage("morse")
    f = assembled.family.functional(rho)
    point = assembled.pair.sphere_point(
        assembled.pair.renormalize(u, problem.mu), problem.mu)
    report = approx_morse_index(f, point, theta)
    free = approx_morse_index(f, point, theta, free=True)
    payload = _round_floats({
        "rho": rho,
        "theta": theta,
        "count": report.count,
        "free_count": free.count,
        "eigenvalues": report.eigenvalues[: min(12, report.eigenvalues.size)],
        "dual_norm": constrained_dual_norm(f, point),
        "value": f.value(point.u),
    })
    text = _dump_json(payload)
    out_dir = Path(args.out)
    manifest.stage("write")
    _write(out_dir, "morse.json", text, manifest)
    manifest.write(out_dir)
    print(text, end="")
    return 0


def cmd_mp_curve(args) -> int:
    config = _load_config(args.config)
    manifest = RunManifest("mp-curve", config, args.seed)
    manifest.stage("assemble")
    problem = _problem_from_config(config, args.seed)
    params = _solve_params(config)
    assembled = assemble(problem)
    w1, w2 = endpoints(assembled)
    pool = initial_pool(assembled, w1, w2, n_nodes=params["nodes"])
    manifest.stage("sweep")
    grid = np.linspace(problem.rho_min, problem.rho_max, problem.rho_steps)
    sweep = rho_sweep(assembled.family, grid, pool, rounds=params["rounds"])
    lines = ["rho,c_rho,slope_left,slope_right,geometry_ok"]
    for k in range(grid.size):
        sl = "" if np.isnan(sweep.slope_left[k]) else repr(float(sweep.slope_left[k]))
        sr = "" if np.isnan(sweep.slope_right[k]) else repr(float(sweep.slope_right[k]))
        lines.append(f"{float(grid[k])!r},{float(sweep.levels[k])!r},{sl},{sr},"
                     f"{int(sweep.geometry_ok[k])}")
    text = "\n".join(lines) + "\n"
    out_dir = Path(args.out)
    manifest.stage("write")
    _write(out_dir, "curve.csv", text, manifest)
    manifest.write(out_dir)
    print(text, end="")
    if not bool(np.all(np.diff(sweep.levels) <= 1e-9)):
        return EXIT_GEOMETRY
    return 0


def cmd_solve(args) -> int:
    config = _load_config(args.config)
    manifest = RunManifest("solve", config, args.seed)
    manifest.stage("assemble")
    problem = _problem_from_config(config, args.seed)
    params = _solve_params(config)
    assembled = assemble(problem)
    rng = np.random.default_rng(args.seed)
    w1, w2 = endpoints(assembled)
    pool = initial_pool(assembled, w1, w2, n_nodes=params["nodes"])

    manifest.stage("sweep")
    grid = np.linspace(problem.rho_min, problem.rho_max, problem.rho_steps)
    sweep = rho_sweep(assembled.family, grid, pool, rounds=params["rounds"])
    rho, c_rho, slope, pool = find_differentiability_point(
        assembled.family, sweep, rounds=params["rounds"])

    manifest.stage("extract")
    records, info = extract_palais_smale(
        assembled.family, rho, pool, slope=slope, c_rho=c_rho,
        count=params["records"], rng=rng, rounds=max(40, params["rounds"] // 2),
        positivization=params["positivize"] and assembled.family.modulus_invariant)
    if not records:
        raise BudgetExceeded(f"no record certified; diagnostics: {info}")

    manifest.stage("refine")
    report = refine_and_certify(assembled.family, assembled.pair, rho,
                                records[-1].u, problem.mu,
                                tol=params["refine_tol"])

    manifest.stage("write")
    out_dir = Path(args.out)
    record_lines = "".join(
        json.dumps(_round_floats(r.to_dict()), sort_keys=True) + "\n"
        for r in records)
    _write(out_dir, "records.jsonl", record_lines, manifest)
    payload = _round_floats({
        "rho": rho,
        "c_rho": c_rho,
        "slope": slope,
        "alpha1": info["alpha1"],
        "bound": info["bound"],
        "skipped": info["skipped"],
        "records_accepted": int(sum(r.accepted for r in records)),
        "records_total": len(records),
        "limit": report.to_dict(),
        "min_nodal_value": float(np.min(records[-1].u)),
        "solution": list(report.u),
    })
    text = _dump_json(payload)
    _write(out_dir, "report.json", text, manifest)
    manifest.write(out_dir)
    print(text, end="")

    if args.check:
        ok = (all(r.accepted for r in records)
              and report.el_residual <= 1e-8
              and report.constrained_index <= 1
              and report.free_index <= 2)
        return 0 if ok else EXIT_CERTIFICATION
    return 0


def cmd_verify_lemmas(args) -> int:
    manifest = RunManifest("verify-lemmas", _load_config(args.config), args.seed)
    manifest.stage("suites")
    sizes = {}
    if args.quick:
        sizes = dict(geometry_seeds=60, descent_instances=60, probes=60,
                     boxes=30, holder_pairs=30, dims=(3, 20, 50))
    report = run_verification(args.seed, threads=args.threads, **sizes)
    report = _round_floats(_strip_timings(report))
    text = _dump_json(report)
    out_dir = Path(args.out)
    manifest.stage("write")
    _write(out_dir, "verify.json", text, manifest)
    manifest.write(out_dir)
    print(text, end="")
    return 0 if report["passed"] else EXIT_CERTIFICATION


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="masspass",
        description="Constrained mountain-pass critical points on mass spheres.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="JSON configuration file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--out", default="out", help="output directory")

    p = sub.add_parser("geometry-check", help="geometry invariant residuals")
    common(p)
    p.add_argument("--samples", type=int, default=120)
    p.set_defaults(func=cmd_geometry_check)

    p = sub.add_parser("morse", help="Morse report for a stored iterate")
    common(p)
    p.add_argument("--iterate", required=True, help="JSON file with u, rho, theta")
    p.add_argument("--theta", type=float, default=0.0)
    p.set_defaults(func=cmd_morse)

    p = sub.add_parser("mp-curve", help="level sweep over the rho grid")
    common(p)
    p.set_defaults(func=cmd_mp_curve)

    p = sub.add_parser("solve", help="full min-max pipeline")
    common(p)
    p.add_argument("--check", action="store_true",
                   help="exit nonzero unless every certificate validates")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify-lemmas", help="randomized verification suites")
    common(p)
    p.add_argument("--quick", action="store_true", help="reduced suite sizes")
    p.set_defaults(func=cmd_verify_lemmas)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GeometryFailure as exc:
        print(f"geometry failure: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except (SelectionFailure, BudgetExceeded) as exc:
        print(f"certification failure: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATION
    except NoConvergence as exc:
        print(f"no convergence: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except MasspassError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

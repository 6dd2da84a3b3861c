"""Command-line front end: ``msfeec solve`` and ``msfeec verify``.

Exit codes: 0 success, 1 an asserted verdict failed, 2 configuration
error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import mesh as meshmod
from .hybrid import (ConfigurationError, ConvergenceError, FluxConfig, NumericError, afw_spaces, assemble,
                     equal_order_spaces)
from .mesh import MeshError, SimplicialMesh
from .problems import problem_from_json
from .suites import DEFAULT_TOL, SUITES, run_suite
from .verify import (MSReport, conservativity, jump_identity, local_ms, make_variations, random_regions,
                     CSV_HEADER, reciprocity, strong_ms, symplectic_1d, to_json_text, xg_equivalence)

EXIT_OK, EXIT_VERDICT, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

CHECKS = ("local_ms", "strong_ms", "jump_identity", "conservativity", "reciprocity", "xg_equivalence",
          "symplectic_1d")

BUILTIN_MESHES = {
    "interval": lambda d: meshmod.interval_mesh(int(d.get("cells", 2))),
    "square": lambda d: meshmod.square_mesh(int(d.get("m", 1))),
    "cube": lambda d: meshmod.cube_mesh(int(d.get("m", 1))),
    "two_cell": lambda d: meshmod.two_cell_mesh(int(d["n"])),
    "eight_cell": lambda d: meshmod.eight_cell_mesh(int(d["n"])),
    "equilateral_pair": lambda d: meshmod.equilateral_pair(int(d["n"]), float(d.get("edge", 1.0))),
}


# ----------------------------------------------------------------------
# configuration

def _resolve(path, base: Path) -> Path:
    p = Path(path)
    return p if p.is_absolute() else base / p


def load_mesh_spec(spec, base: Path = Path(".")) -> SimplicialMesh:
    """A mesh from a file path, a builtin name ({"builtin": ..}) or inline JSON."""
    if isinstance(spec, str):
        path = _resolve(spec, base)
        if not path.is_file():
            raise FileNotFoundError(f"mesh file not found: {path}")
        try:
            return meshmod.load_mesh(path)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"mesh file {path} is not valid JSON: {exc}") from exc
    if isinstance(spec, dict) and "builtin" in spec:
        name = spec["builtin"]
        if name not in BUILTIN_MESHES:
            raise ConfigurationError(f"unknown builtin mesh {name!r}; available: {sorted(BUILTIN_MESHES)}")
        return BUILTIN_MESHES[name](spec)
    if isinstance(spec, dict):
        return meshmod.mesh_from_json(spec)
    raise ConfigurationError("mesh must be a path, a builtin spec or inline mesh JSON")


def boundary_callable(n: int, poly: dict):
    """x -> (q, 2^n) from {"constant": [..]} or {"monomials": [{"exp", "coeffs"}]} in the flat layout."""
    N = 2 ** n
    terms = poly.get("monomials")
    if terms is None:
        const = np.asarray(poly.get("constant", np.zeros(N)), dtype=float)
        if const.shape != (N,):
            raise ConfigurationError(f"constant boundary data needs {N} coefficients")
        return lambda x: np.broadcast_to(const, (len(x), N)).copy()
    exps, coeffs = [], []
    for t in terms:
        e, c = np.asarray(t["exp"], dtype=int), np.asarray(t["coeffs"], dtype=float)
        if e.shape != (n,) or c.shape != (N,):
            raise ConfigurationError(f"monomial terms need {n} exponents and {N} coefficients")
        exps.append(e)
        coeffs.append(c)

    def func(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros((len(x), N))
        for e, c in zip(exps, coeffs):
            out += np.prod(x ** e, axis=1)[:, None] * c
        return out
    return func


@dataclass
class RunConfig:
    """Everything a ``solve`` or ``verify`` run needs, validated up front."""
    mesh: SimplicialMesh
    problem: object
    flux: FluxConfig
    spaces: dict
    boundary: dict = field(default_factory=lambda: {"seed": 0})
    checks: tuple = ()
    regions: object = None
    region_count: int = 10
    reciprocity_sources: tuple = ((1.0,), (-0.5,))
    seed: int = 0
    tol: float = DEFAULT_TOL
    newton_tol: float = 1e-10
    max_iter: int = 20
    out_dir: Path = Path(".")
    fmt: str | None = None
    label: str = "run"

    @classmethod
    def from_json(cls, data: dict, base: Path = Path("."), mesh_override=None) -> "RunConfig":
        known = {"mesh", "problem", "method", "boundary", "verify", "regions", "seed", "tol", "newton",
                 "output", "label", "reciprocity"}
        extra = set(data) - known
        if extra:
            raise ConfigurationError(f"unknown config keys: {sorted(extra)}")
        if mesh_override is None and "mesh" not in data:
            raise ConfigurationError("config lacks a mesh")
        mesh = mesh_override if mesh_override is not None else load_mesh_spec(data["mesh"], base)
        if "problem" not in data:
            raise ConfigurationError("config lacks a problem")
        problem = problem_from_json(data["problem"])
        if problem.n != mesh.n:
            raise ConfigurationError(f"problem dimension {problem.n} does not match mesh dimension {mesh.n}")
        method = dict(data.get("method", {}))
        flux = FluxConfig.from_json(method)
        spaces = cls._spaces(method, problem, flux)
        boundary = data.get("boundary", {"seed": int(data.get("seed", 0))})
        if not isinstance(boundary, dict) or not ({"seed", "polynomial", "zero"} & set(boundary)):
            raise ConfigurationError("boundary must give 'seed', 'polynomial' or 'zero'")
        checks = tuple(data.get("verify", ()))
        bad = [c for c in checks if c not in CHECKS]
        if bad:
            raise ConfigurationError(f"unknown checks {bad}; available: {list(CHECKS)}")
        regions = data.get("regions")
        count = 10
        if isinstance(regions, dict):
            count, regions = int(regions.get("count", 10)), None
        elif regions is not None:
            regions = [tuple(int(c) for c in r) for r in regions]
            for r in regions:
                if any(c < 0 or c >= mesh.num_cells for c in r):
                    raise ConfigurationError(f"region {list(r)} names a cell outside the mesh")
        newton = data.get("newton", {})
        output = data.get("output", {})
        fmt = output.get("format")
        if fmt not in (None, "json", "csv"):
            raise ConfigurationError(f"unknown output format {fmt!r}")
        rec = data.get("reciprocity", {})
        sources = (tuple(rec.get("g1", (1.0,))), tuple(rec.get("g2", (-0.5,))))
        cfg = cls(mesh, problem, flux, spaces, boundary, checks, regions, count, sources,
                  int(data.get("seed", 0)), float(data.get("tol", DEFAULT_TOL)),
                  float(newton.get("tol", 1e-10)), int(newton.get("max_iter", 20)),
                  _resolve(output.get("dir", "."), base), fmt, str(data.get("label", "run")))
        cfg.build()  # method/problem compatibility is checked before any solve
        return cfg

    @staticmethod
    def _spaces(method, problem, flux):
        spec = method.get("spaces")
        r, family = int(method.get("r", 1)), method.get("family", "P")
        if spec is None:
            return afw_spaces(problem, r, family) if flux.variant == "AFW_H" else equal_order_spaces(problem, r,
                                                                                                    family)
        if not isinstance(spec, dict):
            raise ConfigurationError("method.spaces must map degree -> [family, order]")
        out = {}
        for j, v in spec.items():
            if not isinstance(v, (list, tuple)) or len(v) != 2:
                raise ConfigurationError(f"space for degree {j} must be [family, order]")
            out[int(j)] = (str(v[0]), int(v[1]))
        return out

    def build(self):
        return assemble(self.problem, self.mesh, self.spaces, self.flux)

    def boundary_data(self, system):
        b = self.boundary
        if b.get("zero"):
            return None
        if "polynomial" in b:
            return boundary_callable(self.mesh.n, b["polynomial"])
        g = system.random_boundary(np.random.default_rng(int(b["seed"])))
        norm = system.boundary_field(g).norm()
        return g / norm if norm > 0 else g


def load_config(path, mesh_override=None) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"config file not found: {p}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config file {p} is not valid JSON: {exc}") from exc
    return RunConfig.from_json(data, p.parent, mesh_override)


# ----------------------------------------------------------------------
# commands

def cmd_solve(cfg: RunConfig) -> tuple:
    """Solve once; returns (exit code, solution JSON)."""
    system = cfg.build()
    sol = system.newton_solve(cfg.boundary_data(system), tol=cfg.newton_tol, max_iter=cfg.max_iter)
    data = sol.to_json()
    data["mesh"] = cfg.mesh.to_json()
    data["method"] = cfg.flux.to_json()
    data["spaces"] = {str(j): list(v) for j, v in sorted(cfg.spaces.items())}
    return EXIT_OK, data


def config_checks(cfg: RunConfig) -> dict:
    """Run the checks selected in a config; returns {check name: MSReport}."""
    out = {}
    system = cfg.build()
    needs_pair = {"local_ms", "strong_ms", "jump_identity", "conservativity"} & set(cfg.checks)
    base = None
    if not cfg.problem.linear and needs_pair:
        base = system.newton_solve(cfg.boundary_data(system), tol=cfg.newton_tol, max_iter=cfg.max_iter)
    pair = make_variations(system, cfg.seed, base=base) if needs_pair else None
    if "local_ms" in cfg.checks:
        out["local_ms"] = local_ms(pair, cfg.tol)
    if "strong_ms" in cfg.checks:
        regions = cfg.regions or random_regions(cfg.mesh, cfg.region_count, cfg.seed)
        out["strong_ms"] = strong_ms(pair, regions, cfg.tol, cfg.seed)
    if "jump_identity" in cfg.checks:
        out["jump_identity"] = jump_identity(pair, cfg.tol)
    if "conservativity" in cfg.checks:
        out["conservativity"] = conservativity(pair, cfg.tol)
    if "reciprocity" in cfg.checks:
        N = 2 ** cfg.mesh.n
        g1, g2 = (np.resize(np.asarray(g, dtype=float), N) for g in cfg.reciprocity_sources)
        out["reciprocity"] = reciprocity(cfg.problem, cfg.mesh, cfg.spaces, cfg.flux, g1, g2, seed=cfg.seed,
                                         tol=cfg.tol)
    if "xg_equivalence" in cfg.checks:
        alpha = cfg.flux.default_alpha
        res = xg_equivalence(cfg.problem, cfg.mesh, cfg.spaces, alpha=alpha, seed=cfg.seed)
        rep = MSReport("XG", f"n{cfg.mesh.n}_cells{cfg.mesh.num_cells}", cfg.problem.k)
        rep.add("xg_equivalence", f"alpha{alpha:g}", res["discrepancy"], 1.0, 1e-8)
        out["xg_equivalence"] = rep
    if "symplectic_1d" in cfg.checks:
        if cfg.mesh.n != 1:
            raise ConfigurationError("symplectic_1d needs a 1D mesh")
        out["symplectic_1d"] = symplectic_1d(system, cfg.seed, cfg.tol, base=base)
    return out


def _write_reports(reports: dict, out_dir: Path, stem: str, fmt) -> list:
    """Write JSON and CSV reports; ``fmt`` restricts the output to one of them."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt in (None, "json"):
        json_path = out_dir / f"{stem}.json"
        json_path.write_text(to_json_text(reports))
        written.append(json_path)
    if fmt in (None, "csv"):
        csv_path = out_dir / f"{stem}.csv"
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_HEADER)
            for key in sorted(reports):
                for row in reports[key].csv_rows():
                    w.writerow(row)
        written.append(csv_path)
    return written


def cmd_verify(reports: dict) -> int:
    return EXIT_OK if all(r.passed for r in reports.values()) else EXIT_VERDICT


def _summary(reports: dict, stream):
    for key, rep in sorted(reports.items()):
        fails = rep.failures()
        status = "pass" if not fails else "FAIL"
        stream.write(f"{status} {key} (max ratio {rep.max_ratio():.2e})\n")
        for e in fails:
            stream.write(f"    failing: {e.check} at {e.location}: |{e.value:.3e}| > {e.tol:.1e} x {e.scale:.3e}\n")


# ----------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="msfeec", description="Hybrid FEM solves and multisymplecticity checks.")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration (JSON)")
    common.add_argument("--mesh", help="mesh file (JSON); overrides the config mesh")
    common.add_argument("--seed", type=int, default=None, help="random seed for boundary data and regions")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--format", choices=("json", "csv"), default=None,
                        help="write only this report format (default: both)")
    common.add_argument("--tol", type=float, default=None, help="relative tolerance for verdicts")
    sub.add_parser("solve", parents=[common], help="solve one configured problem")
    v = sub.add_parser("verify", parents=[common], help="run a named suite or the checks in a config")
    v.add_argument("--suite", help=f"suite name: {', '.join(sorted(SUITES))} or all")
    v.add_argument("--alpha", type=float, default=None, help="penalty for the xg-equivalence suite")
    sub.add_parser("suites", help="list the named suites")
    return parser


def _run(args, stdout, stderr) -> int:
    if args.command == "suites":
        for name in sorted(SUITES):
            stdout.write(name + "\n")
        return EXIT_OK
    mesh_override = load_mesh_spec(args.mesh) if args.mesh else None
    cfg = load_config(args.config, mesh_override) if args.config else None
    if cfg is not None:
        if args.seed is not None:
            cfg.seed = args.seed
            cfg.boundary = {"seed": args.seed} if "seed" in cfg.boundary else cfg.boundary
        if args.tol is not None:
            cfg.tol = args.tol
        if args.out is not None:
            cfg.out_dir = Path(args.out)
        if args.format is not None:
            cfg.fmt = args.format
    out_dir = Path(args.out) if args.out else (cfg.out_dir if cfg else Path("."))
    seed = args.seed if args.seed is not None else (cfg.seed if cfg else 0)
    tol = args.tol if args.tol is not None else (cfg.tol if cfg else DEFAULT_TOL)

    if args.command == "solve":
        if cfg is None:
            raise ConfigurationError("solve needs --config")
        code, data = cmd_solve(cfg)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"{cfg.label}_solution.json"
        path.write_text(json.dumps(data, sort_keys=True, indent=1, default=float))
        meta = data["metadata"]
        stdout.write(f"wrote {path}\n")
        stdout.write(f"residual {meta.get('residual', 0.0):.3e}, rank deficiency {meta.get('deficiency', 0)}, "
                     f"iterations {meta.get('iterations', 0)}\n")
        return code

    if args.suite:
        reports = run_suite(args.suite, seed=seed, tol=tol, alpha=args.alpha, mesh=mesh_override)
        stem = args.suite
    elif cfg is not None:
        if not cfg.checks:
            raise ConfigurationError("config selects no checks (set 'verify')")
        reports = config_checks(cfg)
        stem = f"{cfg.label}_report"
    else:
        raise ConfigurationError("verify needs --suite or --config")
    fmt = args.format or (cfg.fmt if cfg else None)
    written = _write_reports(reports, out_dir, stem, fmt)
    _summary(reports, stdout)
    stdout.write("wrote " + ", ".join(map(str, written)) + "\n")
    return cmd_verify(reports)


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        return _run(args, stdout, stderr)
    except (FileNotFoundError, ConfigurationError, MeshError, KeyError, ValueError) as exc:
        stderr.write(f"configuration error: {exc}\n")
        return EXIT_CONFIG
    except (NumericError, ConvergenceError, np.linalg.LinAlgError, FloatingPointError) as exc:
        stderr.write(f"numeric failure: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

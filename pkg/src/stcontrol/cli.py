"""Command-line front end: ``solve``, ``study``, ``compare-reg`` and ``export``.

Options can come from an INI-style config file (``--config``) with sections
``[run]``, ``[solver]`` and ``[output]``; command-line flags take precedence.
Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""
from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

from . import io as stio
from .assembly import REGULARIZATIONS, build_block_system
from .linsolve import METHODS, PRECONDITIONERS, SolverError
from .mesh import kuhn_grid
from .postprocess import support_fraction
from .problems import PROBLEMS, get_problem
from .study import convergence_study, level_record, solve_problem

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3
THREADS_ENV = "STCONTROL_NUM_THREADS"

log = logging.getLogger("stcontrol")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    problem: str = "example1"
    dim: int | None = None
    n0: int = 4
    levels: int = 1
    varrho: float | None = None
    reg: str | None = None
    method: str = "gmres"
    tol: float = 1e-8
    restart: int = 200
    maxiter: int = 5000
    precond: str = "block_diag_ilu0"
    out: str = "out"
    csv: bool = True
    vtk: bool = False
    matrix: bool = False
    xh_error: bool = True

    def validate(self, command: str) -> None:
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}; choose from {sorted(PROBLEMS)}")
        if self.levels < 1:
            raise ConfigError("levels must be >= 1")
        if command == "study" and self.levels < 2:
            raise ConfigError("need >= 2 levels for a convergence study")
        if self.n0 < 1:
            raise ConfigError("n0 must be >= 1")
        if self.varrho is not None and not self.varrho > 0:
            raise ConfigError(f"varrho must be > 0, got {self.varrho}")
        if self.reg is not None and self.reg not in REGULARIZATIONS:
            raise ConfigError(f"reg must be one of {REGULARIZATIONS}")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}")
        if self.precond not in PRECONDITIONERS:
            raise ConfigError(f"precond must be one of {PRECONDITIONERS}")
        if not self.tol > 0:
            raise ConfigError("tol must be > 0")
        dim = get_problem(self.problem).dim
        if self.dim is not None and self.dim != dim:
            raise ConfigError(f"problem {self.problem} is defined for dim={dim}, not {self.dim}")
        out = Path(self.out)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"output directory {out} is not writable: {exc}") from None
        if not os.access(out, os.W_OK):
            raise ConfigError(f"output directory {out} is not writable")

    def solver_options(self) -> dict:
        if self.method != "gmres":
            return {}
        return dict(tol=self.tol, restart=self.restart, maxiter=self.maxiter, precond=self.precond)

    def problem_spec(self):
        return get_problem(self.problem)


_TYPES = {
    "problem": str, "dim": int, "n0": int, "levels": int, "varrho": float, "reg": str,
    "method": str, "tol": float, "restart": int, "maxiter": int, "precond": str,
    "out": str, "csv": "bool", "vtk": "bool", "matrix": "bool", "xh_error": "bool",
}


def load_config(path) -> dict:
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise ConfigError(f"cannot read config file {path}")
    values = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            key = key.replace("-", "_")
            if key not in _TYPES:
                raise ConfigError(f"unknown config key {key!r} in [{section}]")
            kind = _TYPES[key]
            try:
                if kind == "bool":
                    values[key] = parser.getboolean(section, key)
                else:
                    values[key] = kind(raw)
            except ValueError:
                raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return values


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with [run], [solver], [output] sections")
    common.add_argument("--problem", choices=sorted(PROBLEMS))
    common.add_argument("--dim", type=int)
    common.add_argument("--n0", type=int, help="subdivisions per axis of the coarsest mesh")
    common.add_argument("--levels", type=int, help="number of meshes (n0, 2 n0, ...)")
    common.add_argument("--varrho", type=float)
    common.add_argument("--reg", choices=REGULARIZATIONS)
    common.add_argument("--method", choices=METHODS)
    common.add_argument("--tol", type=float)
    common.add_argument("--restart", type=int)
    common.add_argument("--maxiter", type=int)
    common.add_argument("--precond", choices=PRECONDITIONERS)
    common.add_argument("--out")
    common.add_argument("--vtk", action=argparse.BooleanOptionalAction, default=None)
    common.add_argument("--csv", action=argparse.BooleanOptionalAction, default=None)
    common.add_argument("--matrix", action=argparse.BooleanOptionalAction, default=None)
    common.add_argument("--xh-error", dest="xh_error", action=argparse.BooleanOptionalAction, default=None)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="stcontrol",
        description="Space-time FEM for parabolic optimal control with energy regularization")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="solve on one mesh")
    sub.add_parser("study", parents=[common], help="uniform-refinement convergence study")
    sub.add_parser("compare-reg", parents=[common], help="energy vs L2 regularization")
    sub.add_parser("export", parents=[common], help="export mesh (VTK) and matrices (Matrix Market)")
    return parser


def make_config(args: argparse.Namespace) -> RunConfig:
    values = load_config(args.config) if args.config else {}
    for key in _TYPES:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    return RunConfig(**values)


def _limit_threads():
    n = os.environ.get(THREADS_ENV)
    if not n:
        return None
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        return None
    return threadpool_limits(int(n))


def _print_level(rec: dict, stream) -> None:
    keys = ("n", "n_free_X", "n_free_Y", "err_u_Y", "err_p_Y", "err_u_L2", "err_p_L2", "J_h", "J_err",
            "iterations", "residual")
    parts = []
    for k in keys:
        v = rec.get(k)
        if v is None:
            continue
        parts.append(f"{k}={v:.5e}" if isinstance(v, float) else f"{k}={v}")
    print(" ".join(parts), file=stream)


def cmd_solve(cfg: RunConfig, stream=None) -> int:
    stream = stream or sys.stdout
    problem = cfg.problem_spec()
    sol = solve_problem(problem, cfg.n0, cfg.reg, cfg.varrho, method=cfg.method, **cfg.solver_options())
    out = Path(cfg.out)
    rec = level_record(problem, sol, xh_error=cfg.xh_error)
    _print_level(rec, stream)
    reg = cfg.reg or problem.regularization
    stem = f"{problem.name}_{reg}_n{cfg.n0}"
    if cfg.csv:
        from .study import StudyReport
        rep = StudyReport(problem.name, reg, sol.system.varrho)
        rep.add(rec)
        (out / f"{stem}.csv").write_text(rep.to_csv())
    (out / f"{stem}_solver.json").write_text(json.dumps(asdict(sol.report), indent=2, sort_keys=True))
    if cfg.vtk:
        _write_solution_vtk(out, stem, sol)
    if cfg.matrix:
        stio.write_matrices(out / f"{stem}_matrices", sol.system)
    return EXIT_OK


def _write_solution_vtk(out: Path, stem: str, sol) -> None:
    fields = {"u": sol.state, "p": sol.adjoint, "z": sol.control}
    if sol.mesh.dim <= 3:
        stio.write_mesh_vtk(out / f"{stem}.vtk", sol.mesh, fields)
    for t in (0.0, 0.5, 1.0):
        for name in ("u", "p"):
            stio.write_slice_vtk(out / f"{stem}_{name}_t{t:.2f}.vtk", fields[name], -1, t * sol.mesh.T, name=name)


def cmd_study(cfg: RunConfig, stream=None) -> int:
    stream = stream or sys.stdout
    problem = cfg.problem_spec()
    report = convergence_study(problem, cfg.n0, cfg.levels, cfg.reg, cfg.varrho, xh_error=cfg.xh_error,
                               method=cfg.method, **cfg.solver_options())
    print(report.table(), file=stream)
    if cfg.csv:
        path = Path(cfg.out) / f"{problem.name}_{report.regularization}_study.csv"
        path.write_text(report.to_csv())
        print(f"wrote {path}", file=stream)
    if report.failed:
        print(f"study aborted: {report.failed}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_compare_reg(cfg: RunConfig, stream=None) -> int:
    stream = stream or sys.stdout
    problem = cfg.problem_spec()
    out = Path(cfg.out)
    rows = []
    for reg in REGULARIZATIONS:
        sol = solve_problem(problem, cfg.n0, reg, cfg.varrho, method=cfg.method, **cfg.solver_options())
        frac = support_fraction(sol.control, 0.01)
        rows.append((reg, frac, sol.objective))
        path = out / f"{problem.name}_{reg}_n{cfg.n0}_control.vtk"
        if sol.mesh.dim <= 3:
            stio.write_mesh_vtk(path, sol.mesh, {"z": sol.control, "u": sol.state})
        else:
            stio.write_slice_vtk(path, sol.control, -1, 0.5 * sol.mesh.T, name="z")
    print("regularization  support_fraction(1%)  J_h", file=stream)
    for reg, frac, J in rows:
        print(f"{reg:>14}  {frac:20.5e}  {J:.5e}", file=stream)
    if cfg.csv:
        lines = ["regularization,support_fraction,J_h"] + [f"{r},{f:.5e},{J:.5e}" for r, f, J in rows]
        (out / f"{problem.name}_compare_reg.csv").write_text("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_export(cfg: RunConfig, stream=None) -> int:
    stream = stream or sys.stdout
    problem = cfg.problem_spec()
    dim = cfg.dim or problem.dim
    mesh = kuhn_grid(dim, cfg.n0, problem.T)
    out = Path(cfg.out)
    if dim <= 3:
        stio.write_mesh_vtk(out / f"mesh_d{dim}_n{cfg.n0}.vtk", mesh)
        stio.write_boundary_vtk(out / f"boundary_d{dim}_n{cfg.n0}.vtk", mesh)
    varrho = cfg.varrho or problem.varrho
    system = build_block_system(mesh, varrho, problem.target, cfg.reg or problem.regularization)
    stio.write_matrices(out / f"matrices_d{dim}_n{cfg.n0}", system)
    print(f"exported mesh ({mesh.n_vertices} vertices, {mesh.n_cells} cells) and matrices to {out}",
          file=stream)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "study": cmd_study, "compare-reg": cmd_compare_reg, "export": cmd_export}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = make_config(args)
        cfg.validate(args.command)
    except (ConfigError, TypeError) as exc:
        print(f"stcontrol: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    limiter = _limit_threads()
    try:
        return COMMANDS[args.command](cfg)
    except SolverError as exc:
        print(f"stcontrol: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    finally:
        if limiter is not None:
            limiter.restore_original_limits()


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

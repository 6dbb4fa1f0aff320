"""Single solves and uniform-refinement convergence studies."""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import postprocess as pp
from .assembly import BlockSystem, assemble_forward, build_block_system
from .linsolve import SolveReport, SolverError, direct, gmres, solve
from .mesh import SimplicialMesh, kuhn_grid
from .problems import HeatProblem, ProblemSpec
from .spaces import FEFunction, Role

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "level", "n", "h", "n_dofs_total", "n_vertices", "n_free_X", "n_free_Y",
    "err_u_Y", "eoc_u_Y", "err_p_Y", "eoc_p_Y",
    "err_u_L2", "eoc_u_L2", "err_p_L2", "eoc_p_L2",
    "err_u_Xh", "eoc_u_Xh",
    "J_h", "J_err", "eoc_J_err",
    "solver", "precond", "iterations", "residual",
)
ERROR_COLUMNS = ("err_u_Y", "err_p_Y", "err_u_L2", "err_p_L2", "err_u_Xh", "J_err")


@dataclass
class Solution:
    mesh: SimplicialMesh
    system: BlockSystem
    state: FEFunction
    adjoint: FEFunction
    control: FEFunction
    report: SolveReport
    objective: float


def solve_problem(problem: ProblemSpec, n: int, regularization: str | None = None,
                  varrho: float | None = None, method: str = "gmres", **solver_options) -> Solution:
    """Assemble and solve the optimality system of ``problem`` on the n-grid."""
    reg = regularization or problem.regularization
    varrho = problem.varrho if varrho is None else varrho
    mesh = kuhn_grid(problem.dim, n, problem.T)
    system = build_block_system(mesh, varrho, problem.target, reg)
    x, report = solve(system, method=method, **solver_options)
    p, u = system.split(x)
    state = FEFunction(system.Xh, u, Role.STATE)
    adjoint = FEFunction(system.Yh, p, Role.ADJOINT)
    control = pp.recover_control(state, adjoint, problem.target, varrho, reg)
    J = pp.objective(state, adjoint, problem.target, varrho, reg)
    return Solution(mesh, system, state, adjoint, control, report, J)


def solve_forward(mesh: SimplicialMesh, z, method: str = "direct", **solver_options) -> tuple[FEFunction, SolveReport]:
    """Space-time Galerkin solve of the heat equation with source ``z``."""
    mat, rhs, Xh = assemble_forward(mesh, z)
    if method == "gmres":
        solver_options.setdefault("precond", "jacobi")
        x, report = gmres(mat, rhs=rhs, **solver_options)
    elif method == "direct":
        x, report = direct(mat, rhs)
    else:
        raise ValueError(f"unknown method {method!r}")
    return FEFunction(Xh, x, Role.STATE), report


def level_record(problem: ProblemSpec, sol: Solution, xh_error: bool = True) -> dict:
    mesh, system = sol.mesh, sol.system
    rec = {
        "level": mesh.level, "n": mesh.n, "h": mesh.h_label,
        "n_dofs_total": 2 * mesh.n_vertices, "n_vertices": mesh.n_vertices,
        "n_free_X": system.n_u, "n_free_Y": system.n_p,
        "J_h": sol.objective,
        "solver": sol.report.method, "precond": sol.report.preconditioner,
        "iterations": sol.report.iterations, "residual": sol.report.residual,
    }
    if problem.exact is not None:
        ex = problem.exact
        rec["err_u_Y"] = pp.error_norm(sol.state, ex.u, "Y")
        rec["err_p_Y"] = pp.error_norm(sol.adjoint, ex.p, "Y")
        rec["err_u_L2"] = pp.error_norm(sol.state, ex.u, "L2")
        rec["err_p_L2"] = pp.error_norm(sol.adjoint, ex.p, "L2")
        if xh_error:
            rec["err_u_Xh"] = pp.discrete_xh_norm(sol.state, system.Yh, exact=ex.u)
    if problem.J_exact is not None:
        rec["J_err"] = abs(sol.objective - problem.J_exact)
    return rec


@dataclass
class StudyReport:
    problem: str
    regularization: str
    varrho: float
    records: list[dict] = field(default_factory=list)
    failed: str | None = None

    def column(self, name: str) -> list:
        return [r.get(name) for r in self.records]

    def eoc(self, name: str) -> list:
        return self.column("eoc_" + name.removeprefix("err_"))

    def add(self, record: dict) -> None:
        self.records.append(record)
        if len(self.records) < 2:
            return
        prev = self.records[-2]
        for col in ERROR_COLUMNS:
            a, b = prev.get(col), record.get(col)
            if a and b and a > 0 and b > 0:
                ratio = record["n"] / prev["n"]
                record["eoc_" + col.removeprefix("err_")] = math.log(a / b) / math.log(ratio)

    def to_csv(self, fh=None) -> str:
        buf = io.StringIO() if fh is None else fh
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rec in self.records:
            writer.writerow([_fmt(rec.get(c)) for c in CSV_COLUMNS])
        return buf.getvalue() if fh is None else ""

    def table(self) -> str:
        cols = ["n_dofs_total", "h"] + [c for c in CSV_COLUMNS[7:20] if any(r.get(c) is not None for r in self.records)]
        width = 12
        lines = ["".join(f"{c:>{width}}" for c in cols)]
        for rec in self.records:
            cells = []
            for c in cols:
                v = rec.get(c)
                if c == "h":
                    cells.append(f"{'1/' + str(rec['n']):>{width}}")
                elif c.startswith("eoc") and v is not None:
                    cells.append(f"{v:>{width}.3f}")
                else:
                    cells.append(f"{_fmt(v) or '-':>{width}}")
            lines.append("".join(cells))
        return "\n".join(lines)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, str)):
        return str(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.5e}"


def convergence_study(problem: ProblemSpec, n0: int, levels: int, regularization: str | None = None,
                      varrho: float | None = None, xh_error: bool = True, method: str = "gmres",
                      **solver_options) -> StudyReport:
    """Solve on n0, 2 n0, ... (``levels`` meshes) and tabulate errors and eoc.

    A failing solve stops the study; completed levels are kept and the
    failure message is stored in ``report.failed``.
    """
    if levels < 2:
        raise ValueError("need >= 2 levels for a convergence study")
    reg = regularization or problem.regularization
    rho = problem.varrho if varrho is None else varrho
    report = StudyReport(problem.name, reg, rho)
    for k in range(levels):
        n = n0 * 2**k
        try:
            sol = solve_problem(problem, n, reg, rho, method=method, **solver_options)
        except SolverError as exc:
            report.failed = f"level {k} (n={n}): {exc}"
            log.error(report.failed)
            break
        rec = level_record(problem, sol, xh_error=xh_error)
        rec["level"] = k
        report.add(rec)
        log.info("level %d n=%d done (%s, %d its)", k, n, sol.report.method, sol.report.iterations)
    return report


def forward_study(heat: HeatProblem, n0: int, levels: int) -> StudyReport:
    """Convergence of the plain space-time heat solve against a known solution."""
    report = StudyReport(heat.name, "none", 0.0)
    for k in range(levels):
        mesh = kuhn_grid(heat.dim, n0 * 2**k)
        u_h, rep = solve_forward(mesh, heat.source)
        report.add({
            "level": k, "n": mesh.n, "h": mesh.h_label, "n_vertices": mesh.n_vertices,
            "n_free_X": u_h.space.n_free,
            "err_u_Y": pp.error_norm(u_h, heat.solution, "Y"),
            "err_u_L2": pp.error_norm(u_h, heat.solution, "L2"),
            "solver": rep.method, "iterations": rep.iterations, "residual": rep.residual,
        })
    return report

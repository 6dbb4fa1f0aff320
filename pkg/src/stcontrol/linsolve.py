"""Iterative and direct solvers for the block optimality system."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

PRECONDITIONERS = ("none", "jacobi", "block_diag_ilu0")
METHODS = ("gmres", "direct", "dense")
DENSE_LIMIT = 2000


class SolverError(RuntimeError):
    def __init__(self, message: str, report: "SolveReport | None" = None):
        super().__init__(message)
        self.report = report


@dataclass
class SolveReport:
    method: str
    preconditioner: str
    iterations: int
    residual: float
    converged: bool
    wall_time: float = field(default=0.0, compare=False)


def _matrix_of(system):
    return system.matrix if hasattr(system, "matrix") else sp.csr_matrix(system)


def _ilu(mat: sp.spmatrix) -> spla.SuperLU:
    return spla.spilu(sp.csc_matrix(mat), drop_tol=0.0, fill_factor=1.0)


def make_preconditioner(system, kind: str) -> spla.LinearOperator | None:
    """Preconditioner for the block operator.

    ``block_diag_ilu0`` uses incomplete factors of A/varrho and of the
    Schur-complement surrogate C + varrho * B^T diag(A)^{-1} B.
    """
    if kind not in PRECONDITIONERS:
        raise ValueError(f"unknown preconditioner {kind!r}; choose from {PRECONDITIONERS}")
    mat = _matrix_of(system)
    n = mat.shape[0]
    if kind == "none":
        return None
    if kind == "jacobi":
        d = mat.diagonal().copy()
        d[d == 0] = 1.0
        inv = 1.0 / d
        return spla.LinearOperator((n, n), matvec=lambda x: inv * x, dtype=float)
    if not hasattr(system, "split"):
        raise ValueError("block_diag_ilu0 needs a BlockSystem")
    n_p = system.n_p
    a_fac = _ilu(system.upper_left)
    surrogate = system.C + system.varrho * (system.B.T @ sp.diags(1.0 / system.A.diagonal()) @ system.B)
    s_fac = _ilu(surrogate)

    def apply(x):
        return np.concatenate([a_fac.solve(x[:n_p]), s_fac.solve(x[n_p:])])

    return spla.LinearOperator((n, n), matvec=apply, dtype=float)


def _relres(mat, x, b) -> float:
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(b - mat @ x) / nb)


def gmres(system, rhs=None, tol: float = 1e-8, restart: int = 200, maxiter: int = 2000,
          precond: str = "block_diag_ilu0", raise_on_failure: bool = True):
    """Restarted, right-preconditioned GMRES.

    Convergence is judged on the true relative residual ``||b - K x|| / ||b||``.
    Returns ``(x, SolveReport)``.
    """
    start = time.perf_counter()
    mat = _matrix_of(system)
    b = system.rhs if rhs is None else np.asarray(rhs, dtype=float)
    n = mat.shape[0]
    if np.linalg.norm(b) == 0.0:
        return np.zeros(n), SolveReport("gmres", precond, 0, 0.0, True, time.perf_counter() - start)
    M = make_preconditioner(system, precond)

    # right preconditioning keeps the GMRES residual equal to the true residual
    if M is None:
        op = mat
    else:
        op = spla.LinearOperator((n, n), matvec=lambda y: mat @ M.matvec(y), dtype=float)
    counter = {"it": 0}

    def count(_):
        counter["it"] += 1

    x = np.zeros(n)
    nb = np.linalg.norm(b)
    best = np.inf
    cycles = max(1, -(-maxiter // restart))
    # a second pass absorbs rounding drift between the Arnoldi and true residuals
    for _ in range(3):
        r0 = b - mat @ x
        rtol_pass = min(0.5, tol * nb / np.linalg.norm(r0) * 0.9)
        y, info = spla.gmres(op, r0, rtol=rtol_pass, atol=0.0, restart=min(restart, n),
                             maxiter=cycles, callback=count, callback_type="pr_norm")
        x = x + (y if M is None else M.matvec(y))
        res = _relres(mat, x, b)
        best = min(best, res)
        if res <= tol or info != 0 or counter["it"] >= maxiter:
            break
    res = _relres(mat, x, b)
    report = SolveReport("gmres", precond, counter["it"], res, res <= tol, time.perf_counter() - start)
    if not report.converged and raise_on_failure:
        raise SolverError(f"GMRES did not reach rtol={tol:g} (best residual {best:.3e})", report)
    return x, report


def direct(system, rhs=None):
    """Sparse LU solve; returns ``(x, SolveReport)``."""
    start = time.perf_counter()
    mat = _matrix_of(system)
    b = system.rhs if rhs is None else np.asarray(rhs, dtype=float)
    x = spla.splu(sp.csc_matrix(mat)).solve(b)
    res = _relres(mat, x, b) if np.linalg.norm(b) > 0 else 0.0
    return x, SolveReport("direct", "none", 1, res, True, time.perf_counter() - start)


def dense(system, rhs=None):
    """Dense LU oracle for small systems."""
    start = time.perf_counter()
    mat = _matrix_of(system)
    if mat.shape[0] > DENSE_LIMIT:
        raise ValueError(f"dense solve limited to {DENSE_LIMIT} unknowns")
    b = system.rhs if rhs is None else np.asarray(rhs, dtype=float)
    x = la.solve(mat.toarray(), b)
    res = _relres(mat, x, b) if np.linalg.norm(b) > 0 else 0.0
    return x, SolveReport("dense", "none", 1, res, True, time.perf_counter() - start)


def solve(system, method: str = "direct", **options):
    """Dispatch to :func:`gmres`, :func:`direct` or :func:`dense`."""
    if method == "gmres":
        return gmres(system, **options)
    if method == "direct":
        return direct(system)
    if method == "dense":
        return dense(system)
    raise ValueError(f"unknown method {method!r}; choose from {METHODS}")


def solve_spd(K, rhs, tol: float = 1e-10, method: str = "cg", maxiter: int | None = None) -> np.ndarray:
    """Solve an SPD system by Jacobi-preconditioned CG or sparse Cholesky-free LU."""
    rhs = np.asarray(rhs, dtype=float)
    if np.linalg.norm(rhs) == 0.0:
        return np.zeros_like(rhs)
    K = sp.csr_matrix(K)
    if method == "direct":
        return spla.splu(sp.csc_matrix(K)).solve(rhs)
    if method != "cg":
        raise ValueError(f"unknown SPD method {method!r}")
    inv_d = 1.0 / K.diagonal()
    M = spla.LinearOperator(K.shape, matvec=lambda x: inv_d * x, dtype=float)
    x, info = spla.cg(K, rhs, rtol=tol, atol=0.0, M=M, maxiter=maxiter or 10 * K.shape[0])
    if info != 0 or _relres(K, x, rhs) > 10 * tol:
        raise SolverError(f"CG failed to converge (info={info})")
    return x

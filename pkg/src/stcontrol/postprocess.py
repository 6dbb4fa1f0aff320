"""Error norms, objective values, control recovery and convergence rates."""
from __future__ import annotations

import math

import numpy as np

from .assembly import RHS_QUAD_DEGREE, assemble_a, assemble_mass, assemble_rhs, load_vector
from .linsolve import solve_spd
from .refelem import iter_cell_quadrature
from .spaces import FEFunction, FunctionSpace, Role, make_space

NORMS = ("Y", "L2")


def _p1_at_points(u_h: FEFunction, sl, bary) -> np.ndarray:
    return u_h.values[u_h.space.mesh.cells[sl]] @ bary.T


def error_norm(u_h: FEFunction, exact=None, which: str = "Y", quad_degree: int = RHS_QUAD_DEGREE) -> float:
    """||exact - u_h|| in the Y-norm (spatial gradient) or in L2(Q).

    ``exact`` is a callable (with ``grad_x`` for the Y-norm) or ``None`` for
    the norm of ``u_h`` itself.
    """
    if which not in NORMS:
        raise ValueError(f"which must be one of {NORMS}")
    mesh = u_h.space.mesh
    total = 0.0
    grads = u_h.cell_gradients()[:, :-1] if which == "Y" else None
    for sl, pts, w, bary in iter_cell_quadrature(mesh, quad_degree):
        flat = pts.reshape(-1, mesh.dim)
        if which == "Y":
            diff = -np.broadcast_to(grads[sl, None, :], pts.shape[:2] + (mesh.dim - 1,))
            if exact is not None:
                diff = diff + exact.grad_x(flat).reshape(diff.shape)
            sq = np.sum(diff**2, axis=2)
        else:
            diff = -_p1_at_points(u_h, sl, bary)
            if exact is not None:
                diff = diff + np.asarray(exact(flat)).reshape(diff.shape)
            sq = diff**2
        total += float(np.sum(sq * w))
    return math.sqrt(total)


def l2_distance(u_h: FEFunction, f, quad_degree: int = RHS_QUAD_DEGREE) -> float:
    """||u_h - f||_{L2(Q)} for an arbitrary (possibly discontinuous) callable ``f``."""
    mesh = u_h.space.mesh
    total = 0.0
    for sl, pts, w, bary in iter_cell_quadrature(mesh, quad_degree):
        vals = np.asarray(f(pts.reshape(-1, mesh.dim))).reshape(w.shape)
        total += float(np.sum((_p1_at_points(u_h, sl, bary) - vals) ** 2 * w))
    return math.sqrt(total)


def discrete_xh_norm(u: FEFunction | None, Yh: FunctionSpace, exact=None,
                     quad_degree: int = RHS_QUAD_DEGREE, return_parts: bool = False):
    """Discrete X-norm [||w_h||_Y^2 + ||v||_Y^2]^(1/2) of ``v = exact - u``.

    ``w_h`` in Y_h solves int grad_x w_h . grad_x v_h = int dv/dt v_h.
    Either argument may be omitted (treated as zero).
    """
    mesh = Yh.mesh
    if u is None and exact is None:
        raise ValueError("need a discrete function, an exact function, or both")
    if u is not None:
        dt_h = u.cell_gradients()[:, -1]
        vol = mesh.volumes()
        # int du_h/dt phi_i = dt_h * |tau| / (dim+1) per local vertex
        local = np.repeat(dt_h * vol / (mesh.dim + 1), mesh.dim + 1)
        rhs_full = np.zeros(mesh.n_vertices)
        np.add.at(rhs_full, mesh.cells.ravel(), local)
        rhs = -Yh.restrict(rhs_full)
    else:
        rhs = np.zeros(Yh.n_free)
    if exact is not None:
        rhs = rhs + Yh.restrict(load_vector(mesh, exact.dt, quad_degree))
    A = assemble_a(Yh)
    w = solve_spd(A, rhs, method="direct" if Yh.n_free < 200_000 else "cg")
    w_sq = float(w @ (A @ w))
    if u is None:
        y_sq = 0.0 if exact is None else error_norm(FEFunction(Yh, np.zeros(Yh.n_free)), exact, "Y", quad_degree) ** 2
    else:
        y_sq = error_norm(u, exact, "Y", quad_degree) ** 2
    norm = math.sqrt(w_sq + y_sq)
    if return_parts:
        return norm, math.sqrt(w_sq), math.sqrt(y_sq)
    return norm


def objective(u_h: FEFunction, p_h: FEFunction, u_d, varrho: float, regularization: str = "energy",
              quad_degree: int = RHS_QUAD_DEGREE) -> float:
    """Discrete cost: tracking term plus the control norm written through p_h.

    energy: ||z||^2_{H^-1} = ||p_h||_Y^2 / varrho^2; l2: ||z||^2 = ||p_h||_{L2}^2 / varrho^2.
    """
    tracking = l2_distance(u_h, u_d, quad_degree) ** 2
    p = p_h.coefficients
    if regularization == "energy":
        reg = float(p @ (assemble_a(p_h.space) @ p))
    elif regularization == "l2":
        reg = float(p @ (assemble_mass(p_h.space) @ p))
    else:
        raise ValueError(f"unknown regularization {regularization!r}")
    return 0.5 * tracking + reg / (2.0 * varrho)


def recover_control(u_h: FEFunction, p_h: FEFunction, u_d, varrho: float,
                    regularization: str = "energy", quad_degree: int = RHS_QUAD_DEGREE) -> FEFunction:
    """Element-wise constant L2 projection of the control.

    energy: z_h = -(1/varrho) P0(dp_h/dt + u_h - u_d); l2: z_h = -P0(p_h)/varrho.
    """
    mesh = u_h.space.mesh
    P0 = make_space(mesh, "P0", "none")
    vol = mesh.volumes()
    if regularization == "l2":
        z = -p_h.values[mesh.cells].mean(axis=1) / varrho
        return FEFunction(P0, z, role=Role.CONTROL)
    if regularization != "energy":
        raise ValueError(f"unknown regularization {regularization!r}")
    integral = p_h.cell_gradients()[:, -1] * vol + u_h.values[mesh.cells].mean(axis=1) * vol
    for sl, pts, w, _ in iter_cell_quadrature(mesh, quad_degree):
        vals = np.asarray(u_d(pts.reshape(-1, mesh.dim))).reshape(w.shape)
        integral[sl] -= np.sum(vals * w, axis=1)
    return FEFunction(P0, -integral / (varrho * vol), role=Role.CONTROL)


def control_h1_dual_norm(z_h: FEFunction, Yh: FunctionSpace) -> float:
    """Discrete ||z_h||_{L2(0,T;H^-1)} via the Riesz solve A w = <z_h, phi>."""
    rhs = assemble_rhs(Yh, z_h)
    A = assemble_a(Yh)
    w = solve_spd(A, rhs, method="direct")
    return math.sqrt(max(float(w @ (A @ w)), 0.0))


def support_fraction(z_h: FEFunction, rel: float = 0.01) -> float:
    """Fraction of cells where |z_h| exceeds ``rel * max|z_h|``."""
    a = np.abs(z_h.values)
    m = a.max()
    if m == 0:
        return 0.0
    return float(np.mean(a > rel * m))


def eoc(errors) -> list[float | None]:
    """log2 ratios of successive errors under mesh halving; first entry is None."""
    errors = [float(e) for e in errors]
    if len(errors) < 2:
        raise ValueError("need errors from at least two levels")
    if any(not e > 0 for e in errors):
        raise ValueError("errors must be positive")
    return [None] + [math.log(errors[i - 1] / errors[i]) / math.log(2.0) for i in range(1, len(errors))]

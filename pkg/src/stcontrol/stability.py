"""Dense verification of discrete inf-sup constants on small meshes."""
from __future__ import annotations

import numpy as np
import scipy.linalg as la

from .assembly import assemble_a, assemble_b, assemble_timederiv, build_block_system, vertex_matrices
from .mesh import SimplicialMesh
from .spaces import make_space

DENSE_MAX_DOFS = 2000


def xh_norm_matrix(mesh: SimplicialMesh) -> tuple[np.ndarray, np.ndarray]:
    """Dense Gram matrices ``(N_X, N_Y)`` of the discrete X_{0,h}- and Y-norms.

    N_X = K_X + T^T A^{-1} T where T is the time-derivative coupling (rows
    Y_h, columns X_{0,h}) and K_X the spatial stiffness on X_{0,h}.
    """
    Xh = make_space(mesh, "P1", "sigma_and_initial")
    Yh = make_space(mesh, "P1", "sigma_only")
    if Xh.n_free + Yh.n_free > DENSE_MAX_DOFS:
        raise ValueError("mesh too large for dense inf-sup evaluation")
    A = assemble_a(Yh).toarray()
    Tm = assemble_timederiv(Xh, Yh).toarray()
    KX = vertex_matrices(mesh)["stiffness"][Xh.free_dofs][:, Xh.free_dofs].toarray()
    NX = KX + Tm.T @ la.solve(A, Tm, assume_a="pos")
    return 0.5 * (NX + NX.T), A


def _min_singular(op: np.ndarray, test_gram: np.ndarray, trial_gram: np.ndarray) -> float:
    Lt = la.cholesky(test_gram, lower=True)
    Lr = la.cholesky(trial_gram, lower=True)
    scaled = la.solve_triangular(Lt, op, lower=True)
    scaled = la.solve_triangular(Lr, scaled.T, lower=True).T
    return float(la.svdvals(scaled).min())


def block_inf_sup(mesh: SimplicialMesh, varrho: float) -> float:
    """Generalised minimum singular value of the block operator.

    Trial pair (p, u) is measured in (Y, X_{0,h}) and test pair (v, q) in the
    same norms, matching the row/column layout of the block system.
    """
    zero = np.zeros
    system = build_block_system(mesh, varrho, lambda pts: zero(len(pts)))
    NX, NY = xh_norm_matrix(mesh)
    gram = la.block_diag(NY, NX)
    return _min_singular(system.matrix.toarray(), gram, gram)


def forward_inf_sup(mesh: SimplicialMesh) -> float:
    """min over u_h of sup over v_h of b(u_h, v_h) / (||u_h||_{X_{0,h}} ||v_h||_Y)."""
    Xh = make_space(mesh, "P1", "sigma_and_initial")
    Yh = make_space(mesh, "P1", "sigma_only")
    NX, NY = xh_norm_matrix(mesh)
    B = assemble_b(Xh, Yh).toarray()
    return _min_singular(B, NY, NX)

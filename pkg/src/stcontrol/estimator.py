"""Estimator-style front end for the space-time optimal control solver.

``fit`` takes the target (a :class:`ProblemSpec`, a problem name, or a
vectorised callable ``u_d(points)``) and stores the discrete state, adjoint
and control; ``predict`` evaluates the state at space-time points.
Hyper-parameters follow the scikit-learn conventions so the solver works
with ``get_params``/``set_params``/``clone``.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_is_fitted

from .assembly import REGULARIZATIONS
from .linsolve import METHODS, PRECONDITIONERS
from .problems import ProblemSpec, get_problem
from .study import level_record, solve_problem


class SpaceTimeControl(BaseEstimator):
    """Energy- or L2-regularized distributed control of the heat equation.

    Parameters
    ----------
    varrho : float or None
        Regularization parameter; ``None`` keeps the problem's own value.
    regularization : {"energy", "l2"} or None
    n : int
        Grid subdivisions per axis of the Kuhn mesh.
    dim : int or None
        Space-time dimension, required when fitting a bare callable.
    method, precond, tol, restart, maxiter
        Linear solver options.
    """

    def __init__(self, varrho=None, regularization=None, n=4, dim=None, method="gmres",
                 precond="block_diag_ilu0", tol=1e-8, restart=200, maxiter=5000):
        self.varrho = varrho
        self.regularization = regularization
        self.n = n
        self.dim = dim
        self.method = method
        self.precond = precond
        self.tol = tol
        self.restart = restart
        self.maxiter = maxiter

    def _validate_params(self):
        if self.varrho is not None and not self.varrho > 0:
            raise ValueError(f"varrho must be positive, got {self.varrho}")
        if self.regularization is not None and self.regularization not in REGULARIZATIONS:
            raise ValueError(f"regularization must be one of {REGULARIZATIONS}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.precond not in PRECONDITIONERS:
            raise ValueError(f"precond must be one of {PRECONDITIONERS}")

    def _as_problem(self, X) -> ProblemSpec:
        if isinstance(X, ProblemSpec):
            problem = X
        elif isinstance(X, str):
            problem = get_problem(X)
        elif callable(X):
            if self.dim is None:
                raise ValueError("dim must be set when fitting a bare target callable")
            problem = ProblemSpec(name="custom", dim=self.dim,
                                  varrho=self.varrho if self.varrho is not None else 0.01, target=X)
        else:
            raise TypeError("X must be a ProblemSpec, a problem name or a callable target")
        if self.dim is not None and problem.dim != self.dim:
            raise ValueError(f"dim={self.dim} does not match problem dim={problem.dim}")
        return problem

    def fit(self, X, y=None):
        self._validate_params()
        problem = self._as_problem(X)
        opts = {}
        if self.method == "gmres":
            opts = dict(tol=self.tol, restart=self.restart, maxiter=self.maxiter, precond=self.precond)
        sol = solve_problem(problem, int(self.n), self.regularization, self.varrho,
                            method=self.method, **opts)
        self.problem_ = problem
        self.solution_ = sol
        self.mesh_ = sol.mesh
        self.state_ = sol.state
        self.adjoint_ = sol.adjoint
        self.control_ = sol.control
        self.solve_report_ = sol.report
        self.objective_ = sol.objective
        return self

    def predict(self, X):
        """State u_h at points of shape (N, dim)."""
        check_is_fitted(self, "state_")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.mesh_.dim:
            raise ValueError(f"expected points with {self.mesh_.dim} coordinates, got {X.shape[1]}")
        return self.state_(X)

    def transform(self, X):
        """Columns (u_h, p_h, z_h) at points of shape (N, dim)."""
        check_is_fitted(self, "state_")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.column_stack([self.state_(X), self.adjoint_(X), self.control_(X)])

    def score(self, X=None, y=None):
        """Negative discrete objective, so that larger is better."""
        check_is_fitted(self, "objective_")
        return -self.objective_

    def errors(self) -> dict:
        """Error norms and objective error against the problem's exact solution."""
        if not hasattr(self, "solution_"):
            raise NotFittedError("call fit first")
        return level_record(self.problem_, self.solution_)

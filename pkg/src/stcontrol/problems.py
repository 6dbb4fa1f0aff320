"""Built-in model problems on the unit space-time cylinder.

All callables are vectorised: they take points of shape (N, dim) with time
in the last column and return arrays of shape (N,) (or (N, dim-1) for
spatial gradients).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

PI = np.pi


@dataclass(frozen=True)
class SeparableField:
    """``amplitude * prod_i sin(pi x_i) * poly(t)``, poly coefficients highest power first."""

    amplitude: float
    poly: tuple[float, ...]

    def _parts(self, pts):
        pts = np.asarray(pts, dtype=float)
        x, t = pts[:, :-1], pts[:, -1]
        return x, t, np.sin(PI * x)

    def __call__(self, pts):
        x, t, s = self._parts(pts)
        return self.amplitude * np.prod(s, axis=1) * np.polyval(self.poly, t)

    def grad_x(self, pts):
        x, t, s = self._parts(pts)
        d = x.shape[1]
        out = np.empty_like(x)
        for i in range(d):
            others = np.prod(np.delete(s, i, axis=1), axis=1)
            out[:, i] = PI * np.cos(PI * x[:, i]) * others
        return out * (self.amplitude * np.polyval(self.poly, t))[:, None]

    def dt(self, pts):
        x, t, s = self._parts(pts)
        return self.amplitude * np.prod(s, axis=1) * np.polyval(np.polyder(self.poly), t)

    def laplace_x(self, pts):
        d = np.asarray(pts).shape[1] - 1
        return -d * PI**2 * self(pts)


@dataclass(frozen=True)
class ExactTriple:
    u: SeparableField
    p: SeparableField
    z: SeparableField


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    dim: int
    varrho: float
    target: Callable[[np.ndarray], np.ndarray]
    regularization: str = "energy"
    exact: ExactTriple | None = None
    J_exact: float | None = None
    T: float = 1.0
    description: str = ""

    def consistency_residuals(self, pts) -> dict[str, np.ndarray]:
        """Pointwise residuals of the primal, adjoint and gradient equations.

        The gradient equation uses w_z with -Laplace_x w_z = z, which for a
        product of sines is z / (d pi^2).
        """
        if self.exact is None:
            raise ValueError(f"problem {self.name!r} has no exact solution")
        u, p, z = self.exact.u, self.exact.p, self.exact.z
        d = self.dim - 1
        w_z = z(pts) / (d * PI**2)
        return {
            "primal": u.dt(pts) - u.laplace_x(pts) - z(pts),
            "adjoint": -p.dt(pts) - p.laplace_x(pts) - (u(pts) - self.target(pts)),
            "gradient": p(pts) + self.varrho * w_z,
        }


def _manufactured(d: int, varrho: float) -> ExactTriple:
    k = d * PI**2
    a = -(d**2 * PI**4 + d * PI**2) / (d * PI**2 + 2)
    b = (d**2 * PI**4 - 2) / (d * PI**2 + 2)
    c = -(d * PI**2 + 1) / (d * PI**2 + 2)
    return ExactTriple(
        u=SeparableField(k, (c, 1.0, 0.0)),
        p=SeparableField(-varrho, (a, b, 1.0)),
        z=SeparableField(k, (a, b, 1.0)),
    )


def _target_from_triple(tr: ExactTriple):
    def u_d(pts):
        return tr.u(pts) + tr.p.dt(pts) + tr.p.laplace_x(pts)
    return u_d


def example1(varrho: float = 0.01) -> ProblemSpec:
    """Two space dimensions, smooth manufactured optimal triple."""
    tr = _manufactured(2, varrho)
    return ProblemSpec(name="example1", dim=3, varrho=varrho, target=_target_from_triple(tr),
                       exact=tr, J_exact=4.53541e-1 if varrho == 0.01 else None,
                       description="2D manufactured optimality triple")


def ball_target(pts):
    pts = np.asarray(pts, dtype=float)
    r = np.sqrt(np.sum((pts - 0.5) ** 2, axis=1))
    return (r <= 0.25).astype(float)


def example2(varrho: float = 1e-4, regularization: str = "energy") -> ProblemSpec:
    """Discontinuous target: indicator of a space-time ball of radius 1/4."""
    return ProblemSpec(name="example2", dim=3, varrho=varrho, target=ball_target,
                       regularization=regularization,
                       description="2D discontinuous ball target")


def example3(varrho: float = 0.01) -> ProblemSpec:
    """Three space dimensions, smooth manufactured optimal triple."""
    tr = _manufactured(3, varrho)
    return ProblemSpec(name="example3", dim=4, varrho=varrho, target=_target_from_triple(tr),
                       exact=tr, J_exact=7.818e-1 if varrho == 0.01 else None,
                       description="3D manufactured optimality triple")


@dataclass(frozen=True)
class HeatProblem:
    """Forward heat equation with known solution; ``source = du/dt - Laplace_x u``."""

    name: str
    dim: int
    solution: SeparableField
    source: Callable = field(repr=False, default=None)


def forward_heat(dim: int = 3) -> HeatProblem:
    """Manufactured u = prod sin(pi x_i) * (t^2 + t) for the plain heat equation."""
    u = SeparableField(1.0, (1.0, 1.0, 0.0))

    def source(pts):
        return u.dt(pts) - u.laplace_x(pts)

    return HeatProblem(name="forward_heat", dim=dim, solution=u, source=source)


PROBLEMS = {"example1": example1, "example2": example2, "example3": example3}


def get_problem(name: str, **overrides) -> ProblemSpec:
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None
    return factory(**{k: v for k, v in overrides.items() if v is not None})

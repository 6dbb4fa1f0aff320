"""Space-time finite elements for parabolic optimal control with energy regularization."""
from .assembly import BlockSystem, build_block_system
from .estimator import SpaceTimeControl
from .mesh import BoundaryTag, SimplicialMesh, kuhn_grid, refine_uniform
from .problems import example1, example2, example3, get_problem
from .spaces import FEFunction, FunctionSpace, interpolate, make_space
from .study import StudyReport, convergence_study, solve_problem

__all__ = [
    "BlockSystem", "BoundaryTag", "FEFunction", "FunctionSpace", "SimplicialMesh",
    "SpaceTimeControl", "StudyReport", "build_block_system", "convergence_study",
    "example1", "example2", "example3", "get_problem", "interpolate", "kuhn_grid",
    "make_space", "refine_uniform", "solve_problem",
]
__version__ = "0.1.0"

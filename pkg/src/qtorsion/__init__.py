"""q-torsional rigidity of planar convex polygons, its boundary measures,
and the discrete Lp Minkowski problem for those measures."""

from importlib.metadata import PackageNotFoundError, version
import os

# thread caps must be in place before numpy loads its BLAS
if os.environ.get("TMK_THREADS"):
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[_var] = os.environ["TMK_THREADS"]

from .errors import (DomainError, InconsistentMeshError, InvalidBodyError, LoadError,
                     MeshingError, SolverError, TorsionError)
from .geometry import ConvexBodyH, DiscreteMeasure, Polygon, UnitDirection
from .kernels import BACKEND
from .minkowski import SolveConfig, solve_discrete
from .torsion import TorsionConfig, compute_torsion

try:
    __version__ = version("qtorsion")
except PackageNotFoundError:  # pragma: no cover - source tree without metadata
    __version__ = "0.0.0"

__all__ = [
    "BACKEND", "ConvexBodyH", "DiscreteMeasure", "DomainError", "InconsistentMeshError",
    "InvalidBodyError", "LoadError", "MeshingError", "Polygon", "SolveConfig", "SolverError",
    "TorsionConfig", "TorsionError", "UnitDirection", "compute_torsion", "solve_discrete",
]

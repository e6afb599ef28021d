"""Census of hyperbolic 3-manifolds with totally geodesic boundary.

Pipeline: enumerate candidate minimal ideal triangulations, solve the
hyperbolicity equations on each, promote solutions to the canonical
decomposition via tilts, and deduplicate into a census.
"""

from .triangulation import Triangulation, TriangulationError

__all__ = ["Triangulation", "TriangulationError"]
__version__ = "0.1.0"

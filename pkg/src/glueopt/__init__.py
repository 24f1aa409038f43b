"""Compliance plus length minimization over curve networks glued into a membrane."""

__version__ = "0.1.0"

from .geometry import CurveNetwork, Disc, Polygon  # noqa: E402
from .problem import Problem  # noqa: E402
from .solver import ConstantSource, GaussianSource, GridFileSource  # noqa: E402

__all__ = ["CurveNetwork", "Disc", "Polygon", "Problem", "ConstantSource", "GaussianSource",
           "GridFileSource", "__version__"]

"""Heat-flow and Brownian-motion tools for nodal-set concentration estimates."""

from .geometry import Circle, Disk, Domain, Dumbbell, GeometryError, Interval, Rectangle, Sphere2, Torus2
from .theta import Theta, ThetaQuery, theta
from .stochastic import DEFAULT_SEED, PathEnsembleConfig

__all__ = [
    "Circle", "Disk", "Domain", "Dumbbell", "GeometryError", "Interval", "Rectangle", "Sphere2", "Torus2",
    "Theta", "ThetaQuery", "theta", "DEFAULT_SEED", "PathEnsembleConfig",
]

__version__ = "0.1.0"

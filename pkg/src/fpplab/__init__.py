"""fpplab: simulation and verification lab for planar directed FPP.

The model: up-right paths on Z^2 collect weights on the edges they cross;
passage times are path minima.  The package implements the lattice side
(fields, geodesics, interfaces), the queueing side (tandem-store update maps
and their multi-line invariant distributions), the particle side
(discrete-time TASEP variants), and the renewal asymptotics that tie the
critical-angle structure to heavy-tailed random-walk hitting times —
together with the statistical harness that checks every identity and
quantitative claim at desk scale (see fpplab.acceptance).
"""

from .environment import Environment, ModelKind, generate_environment
from .laws import (BerExp, BerGeomPlus, Bernoulli, ConstZero, Exponential,
                   Geom0, WeightLaw, cdf, parse_law, rho_to_direction, sample,
                   solve_compatible)
from .rng import RngStream
from .windows import BoundaryPolicy, MaskedWindow, Window

__version__ = "0.1.0"

__all__ = [
    "BerExp", "BerGeomPlus", "Bernoulli", "BoundaryPolicy", "ConstZero",
    "Environment", "Exponential", "Geom0", "MaskedWindow", "ModelKind",
    "RngStream", "WeightLaw", "Window", "cdf", "generate_environment",
    "parse_law", "rho_to_direction", "sample", "solve_compatible",
]

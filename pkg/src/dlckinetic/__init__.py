"""Kinetic models of duplication, loss and copy interactions between agents.

Submodules:

* ``laws``       offspring laws and the grazing scaling
* ``density``    truncated densities and the gain operator
* ``boltzmann``  Wild series, RK4 and fixed-point solvers
* ``ensemble``   particle Monte Carlo and the Lea-Coulson sampler
* ``analytics``  moment formulas, Fourier metrics, drift region
* ``steady``     closed-form and quadrature steady states
* ``grazing``    limit equation by characteristics
* ``scaling``    smoothing-transformation fixed point
"""
from .density import (
    DiscreteDensity,
    ModelSpec,
    Regime,
    TruncationWarning,
    compound,
    from_pointmass,
    from_poisson,
    qplus,
    total_variation,
)
from .errors import DLCError, DomainError
from .laws import GrazingSpec, OffspringLaw, graze, hgt_case1, make_law, mutation_case2

__version__ = "0.1.0"

__all__ = [
    "DiscreteDensity",
    "ModelSpec",
    "Regime",
    "TruncationWarning",
    "compound",
    "from_pointmass",
    "from_poisson",
    "qplus",
    "total_variation",
    "DLCError",
    "DomainError",
    "GrazingSpec",
    "OffspringLaw",
    "graze",
    "hgt_case1",
    "make_law",
    "mutation_case2",
]

"""coop2: certification and simulation of 3-D strongly 2-cooperative systems.

Certifies that a three-dimensional monotone-cyclic feedback system
converges to periodic orbits from an explicit region of state space
(sign-pattern, spectral, and invariant-set checks), and simulates and
detects those orbits.  Ships the Goodwin and Field-Noyes oscillators as
built-in case studies.
"""

from . import certify, expr, mat3, models, signpat, signvar, sim
from .sim import HAVE_KERNELS

__version__ = "0.1.0"

__all__ = [
    "certify",
    "expr",
    "mat3",
    "models",
    "signpat",
    "signvar",
    "sim",
    "HAVE_KERNELS",
    "__version__",
]

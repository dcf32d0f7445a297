"""Numerical laboratory for skew-shift long-range lattice operators."""
from .dynamics import (DEFAULT_BITS, Frequency, TorusPoint, best_approximant, check_diophantine,
                       direction_vector, orbit_array, orbit_closed_form, skew_step, torus_distance,
                       vandermonde_independent)
from .errors import (InvalidArgument, NotFound, NumericalError, ResourceLimit, SingularWindow,
                     SkewlocError, SpecFormatError)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_BITS", "Frequency", "TorusPoint", "best_approximant", "check_diophantine",
    "direction_vector", "orbit_array", "orbit_closed_form", "skew_step", "torus_distance",
    "vandermonde_independent", "InvalidArgument", "NotFound", "NumericalError", "ResourceLimit",
    "SingularWindow", "SkewlocError", "SpecFormatError", "__version__",
]

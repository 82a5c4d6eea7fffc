"""Third-order PCP finite-volume WENO solver for 2D special relativistic hydrodynamics."""
from .physics import AdmissibilityError, EosParams

__all__ = ["AdmissibilityError", "EosParams"]
__version__ = "0.1.0"

"""Numerical verification workbench for OT-FKM isoparametric foliations."""
from .clifford import CliffordSystem, Variant, build_system

__version__ = "0.1.0"

__all__ = ["CliffordSystem", "Variant", "build_system", "__version__"]

"""J-holomorphic lines and discs for almost complex structures close to J_st."""

__version__ = "0.1.0"

from .grid import NormParams, PlaneGrid
from .structures import StructureField, make_structure

__all__ = ["NormParams", "PlaneGrid", "StructureField", "make_structure", "__version__"]

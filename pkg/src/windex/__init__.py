"""Centre-valued winding numbers and Toeplitz indices for twisted Laurent algebras."""

from .centre import CentreElement, Model, Strategy
from .errors import SpecError, WindexError
from .twisted import AlgebraContext, Cocycle, TwistedElement
from .winding import Morphism, WindingResult, check_index_fibering, index, wind

__version__ = "0.1.0"

__all__ = ["CentreElement", "Model", "Strategy", "SpecError", "WindexError", "AlgebraContext",
           "Cocycle", "TwistedElement", "Morphism", "WindingResult", "check_index_fibering",
           "index", "wind", "__version__"]

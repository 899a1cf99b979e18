"""Exception hierarchy shared by all windex modules."""


class WindexError(Exception):
    """Base class for computation errors (CLI exit status 1)."""


class ModelMismatch(WindexError):
    """Centre elements from different models (or different point counts) were combined."""


class ContextMismatch(WindexError):
    """Twisted elements from different algebra contexts were combined."""


class NotInvertible(WindexError):
    """The preconditions of the requested inversion strategy do not hold."""


class TruncationFailure(WindexError):
    """A grid-based inverse could not be truncated to within tolerance."""


class NeumannDiverged(WindexError):
    """Neumann partial sums stopped contracting before reaching tolerance."""


class SelfAdjointnessViolation(WindexError):
    """A winding value carried a non-negligible anti-self-adjoint part."""


class ResolutionTooSmall(WindexError):
    """Grid exponential failed its aliasing check."""


class DecompositionMismatch(WindexError):
    """Two decompositions of one operator produced different canonical traces."""


class InverseResidualTooLarge(WindexError):
    """A supplied symbol inverse is not an inverse to within tolerance."""


class SymbolVanishes(WindexError):
    """A symbol comes too close to zero on the sampling grid."""


class MorphismMismatch(WindexError):
    """A morphism was applied to an element outside its source context."""


class SpecError(ValueError):
    """Malformed input specification (CLI exit status 2).

    ``path`` names the offending field, e.g. ``terms[2].coeff``.
    """

    def __init__(self, path, message):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)

"""Centre-valued winding operator, Toeplitz index and morphisms between contexts.

For an invertible a with finite support

    wind(a)  = (1 / 2 pi i) tau(delta(a) a^-1)   in Z_sa,
    index(a) = -wind(a).

The inverse is always certified (strategy and residual are recorded) and the
result is never symmetrised: an anti-self-adjoint part above 1e-6 means the
inversion went wrong and raises ``SelfAdjointnessViolation``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

from .centre import CentreElement, Model, Strategy
from .errors import MorphismMismatch, SelfAdjointnessViolation
from .twisted import (AlgebraContext, Cocycle, TwistedElement, derivation, flow, invert_certified,
                      trace_of_product)

SA_THRESHOLD = 1e-6


@dataclass(frozen=True)
class WindingResult:
    value: CentreElement
    inversion_residual: float
    strategy_used: Strategy

    def to_json(self):
        return {"value": self.value.to_json(), "residual": self.inversion_residual,
                "strategy": self.strategy_used.value}


def wind(a, strategy=Strategy.AUTO, tol=1e-10, factors=None):
    """(1/2 pi i) tau(delta(a) a^-1) with a certified inverse."""
    inv = invert_certified(a, strategy, tol, factors)
    value = trace_of_product(derivation(a), inv.value) * (1 / (2j * math.pi))
    skew = value.imag_part().upper()
    if skew > SA_THRESHOLD:
        raise SelfAdjointnessViolation(
            f"winding value has anti-self-adjoint part {skew:.3g} (inverse via {inv.strategy.value})")
    return WindingResult(value, inv.residual, inv.strategy)


def index(a, strategy=Strategy.AUTO, tol=1e-10, factors=None):
    """tau-index of the Toeplitz operator T_a, i.e. -wind(a)."""
    return -wind(a, strategy, tol, factors).value


def _threads():
    try:
        return max(1, int(os.environ.get("WINDEX_THREADS", "1")))
    except ValueError:
        return 1


def wind_batch(elements, strategy=Strategy.AUTO, tol=1e-10):
    """Wind several independent elements; output order matches input order."""
    work = lambda a: wind(a, strategy, tol)
    n = _threads()
    if n == 1:
        return [work(a) for a in elements]
    with ThreadPoolExecutor(n) as pool:
        return list(pool.map(work, elements))


# ---- morphisms ----

class MorphismKind(str, Enum):
    EVALUATION = "evaluation"
    QUOTIENT = "quotient"
    IDENTITY = "identity"


@dataclass(frozen=True)
class Morphism:
    """A flow- and trace-preserving *-homomorphism between two contexts."""

    source: AlgebraContext
    target: AlgebraContext
    kind: MorphismKind
    point: int | None = None

    @classmethod
    def identity(cls, source):
        return cls(source, source, MorphismKind.IDENTITY)

    @classmethod
    def evaluation(cls, source, x0):
        """Evaluate C(X)-valued coefficients at the point with index ``x0``."""
        if source.model is not Model.FINITE:
            raise MorphismMismatch("evaluation needs a finite-point centre")
        if not 0 <= x0 < source.k:
            raise MorphismMismatch(f"point index {x0} outside 0..{source.k - 1}")
        eta = CentreElement.scalar(source.eta.values[x0])
        target = AlgebraContext(source.cocycle, eta, source.theta)
        return cls(source, target, MorphismKind.EVALUATION, x0)

    @classmethod
    def heisenberg_quotient(cls, source):
        """W -> 1: the integer Heisenberg algebra onto C(T^2) with slope eta(1)."""
        if source.cocycle is not Cocycle.HEISENBERG:
            raise MorphismMismatch("the quotient W -> 1 needs a heisenberg source")
        eta = CentreElement.scalar(source.eta.at_one().real)
        return cls(source, AlgebraContext(Cocycle.TRIVIAL, eta), MorphismKind.QUOTIENT)

    @classmethod
    def parse(cls, source, text):
        """``quotient``, ``identity`` or ``eval:<index>``."""
        if text == "quotient":
            return cls.heisenberg_quotient(source)
        if text == "identity":
            return cls.identity(source)
        if text.startswith("eval:"):
            try:
                x0 = int(text[5:])
            except ValueError:
                raise ValueError(f"bad point index in {text!r}") from None
            return cls.evaluation(source, x0)
        raise ValueError(f"unknown morphism {text!r}")

    def apply_centre(self, c):
        if self.kind is MorphismKind.IDENTITY:
            return c
        if self.kind is MorphismKind.EVALUATION:
            return CentreElement.scalar(c.values[self.point])
        return CentreElement.scalar(c.at_one())

    def apply(self, a):
        if a.context != self.source:
            raise MorphismMismatch("element does not live in the morphism's source")
        if self.kind is MorphismKind.IDENTITY:
            return a
        n0, m0, _ = a.origin
        if self.kind is MorphismKind.EVALUATION:
            data = a.data[:, :, self.point:self.point + 1]
        else:
            data = a.data.sum(axis=2, keepdims=True)
        return TwistedElement(self.target, data, (n0, m0, 0))

    def describe(self):
        if self.kind is MorphismKind.EVALUATION:
            return f"eval:{self.point}"
        return self.kind.value


def apply_morphism(m, a):
    return m.apply(a)


def apply_centre(m, c):
    return m.apply_centre(c)


@dataclass(frozen=True)
class FiberReport:
    """phi(index(a)) against index(phi(a))."""

    morphism: str
    mapped_source: CentreElement
    target: CentreElement
    deviation: float
    tol: float

    @property
    def passed(self):
        return self.deviation <= self.tol

    def to_json(self):
        return {"morphism": self.morphism, "mapped_source_index": self.mapped_source.to_json(),
                "target_index": self.target.to_json(), "deviation": self.deviation,
                "pass": self.passed}


def check_index_fibering(m, a, tol=1e-9, strategy=Strategy.AUTO, inv_tol=1e-10, factors=None):
    """Both sides of phi(index(a)) = index(phi(a)); ``factors`` of ``a`` are
    pushed through the morphism for the target-side inversion."""
    mapped = None if factors is None else [m.apply(f) for f in factors]
    left = m.apply_centre(index(a, strategy, inv_tol, factors))
    right = index(m.apply(a), strategy, inv_tol, mapped)
    return FiberReport(m.describe(), left, right, left.max_coeff_diff(right), tol)


def monomial_index(ctx, n, m):
    """Closed form n eta + m for c V^n U^m."""
    return ctx.eta * n + ctx.centre(float(m))


def check_morphism(m, a, t=0.3):
    """Deviations in the two commuting squares: (trace, flow)."""
    tr = m.apply_centre(a.trace()).max_coeff_diff(m.apply(a).trace())
    fl = m.apply(flow(a, t)).max_coeff_diff(flow(m.apply(a), t))
    return tr, fl


__all__ = ["WindingResult", "wind", "index", "wind_batch", "Morphism", "MorphismKind",
           "apply_morphism", "apply_centre", "FiberReport", "check_index_fibering",
           "monomial_index", "check_morphism", "SA_THRESHOLD"]

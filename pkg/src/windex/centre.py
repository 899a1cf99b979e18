"""Elements of the abelian coefficient algebra Z.

Three concrete models are supported:

* ``scalar``  -- Z = C, a single complex number;
* ``finite``  -- Z = C(X) for a finite point set X of size k, stored as the
  k values of the function;
* ``laurent`` -- Z = C*(W), the Laurent polynomials sum_p c_p W^p, stored as a
  dense coefficient array together with the lowest exponent.

Laurent coefficients with modulus at or below ``PRUNE`` are dropped after every
operation, so supports stay finite and leading/trailing zeros never appear.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ModelMismatch, NeumannDiverged, NotInvertible, SpecError, TruncationFailure

PRUNE = 1e-14
NORM_GRID = 1024
MAX_GRID = 1 << 16


class Model(str, Enum):
    SCALAR = "scalar"
    FINITE = "finite"
    LAURENT = "laurent"


class Strategy(str, Enum):
    """Inversion strategies for centre and twisted elements."""

    EXACT = "exact"
    NEUMANN = "neumann"
    GRIDFFT = "gridfft"
    MONOMIAL = "monomial"
    PRODUCT = "product"
    AUTO = "auto"


def _trim(values, offset):
    values = np.where(np.abs(values) <= PRUNE, 0, values)
    nz = np.flatnonzero(values)
    if nz.size == 0:
        return np.zeros(0, dtype=complex), 0
    return values[nz[0]:nz[-1] + 1].copy(), offset + int(nz[0])


@dataclass(frozen=True, eq=False)
class CentreElement:
    """An element of Z in one of the three models.

    ``values`` has shape (1,) for scalars, (k,) for functions on k points and
    (span,) for Laurent polynomials, whose lowest exponent is ``offset``.
    """

    model: Model
    values: np.ndarray
    offset: int = 0

    def __post_init__(self):
        vals = np.array(self.values, dtype=complex).reshape(-1)
        offset = int(self.offset)
        if self.model is Model.LAURENT:
            vals, offset = _trim(vals, offset)
        elif self.model is Model.SCALAR:
            if vals.shape != (1,):
                raise ValueError("scalar centre element needs exactly one value")
            offset = 0
        elif vals.size == 0:
            raise ValueError("finite centre element needs at least one point")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "offset", offset)

    # ---- constructors ----
    @classmethod
    def scalar(cls, z):
        return cls(Model.SCALAR, np.array([z], dtype=complex))

    @classmethod
    def finite(cls, values):
        return cls(Model.FINITE, np.asarray(values, dtype=complex))

    @classmethod
    def laurent(cls, coeffs):
        """Build sum_p coeffs[p] W^p from a ``{exponent: coefficient}`` mapping."""
        coeffs = {int(p): complex(c) for p, c in dict(coeffs).items()}
        if not coeffs:
            return cls(Model.LAURENT, np.zeros(0, dtype=complex))
        lo, hi = min(coeffs), max(coeffs)
        arr = np.zeros(hi - lo + 1, dtype=complex)
        for p, c in coeffs.items():
            arr[p - lo] += c
        return cls(Model.LAURENT, arr, lo)

    @classmethod
    def constant(cls, model, value, k=None):
        """The constant ``value`` in the given model (k points for ``finite``)."""
        model = Model(model)
        if model is Model.SCALAR:
            return cls.scalar(value)
        if model is Model.FINITE:
            if k is None:
                raise ValueError("finite model needs the number of points k")
            return cls.finite(np.full(k, value, dtype=complex))
        return cls.laurent({0: value})

    def like(self, value):
        """The constant ``value`` in this element's model."""
        return CentreElement.constant(self.model, value, self.k)

    # ---- structure ----
    @property
    def k(self):
        return self.values.size if self.model is Model.FINITE else None

    @property
    def coeffs(self):
        """Laurent coefficients as ``{exponent: complex}`` with zeros omitted."""
        if self.model is not Model.LAURENT:
            raise ModelMismatch("coeffs is only defined for laurent elements")
        return {self.offset + i: complex(c) for i, c in enumerate(self.values) if c != 0}

    @property
    def support(self):
        if self.model is not Model.LAURENT or self.values.size == 0:
            return (0, 0)
        return (self.offset, self.offset + self.values.size - 1)

    def is_zero(self):
        return not np.any(self.values)

    def same_ring(self, other):
        return self.model is other.model and (self.model is not Model.FINITE or self.k == other.k)

    def _check(self, other):
        if not isinstance(other, CentreElement):
            raise TypeError(f"expected CentreElement, got {type(other).__name__}")
        if not self.same_ring(other):
            raise ModelMismatch(f"cannot combine {self.model.value}{self._ktag()} "
                                f"with {other.model.value}{other._ktag()}")

    def _ktag(self):
        return f"[k={self.k}]" if self.model is Model.FINITE else ""

    # ---- arithmetic ----
    def __add__(self, other):
        if not isinstance(other, CentreElement):
            other = self.like(other)
        self._check(other)
        if self.model is not Model.LAURENT:
            return CentreElement(self.model, self.values + other.values)
        if self.values.size == 0:
            return other
        if other.values.size == 0:
            return self
        lo = min(self.offset, other.offset)
        hi = max(self.support[1], other.support[1])
        out = np.zeros(hi - lo + 1, dtype=complex)
        out[self.offset - lo:self.offset - lo + self.values.size] += self.values
        out[other.offset - lo:other.offset - lo + other.values.size] += other.values
        return CentreElement(Model.LAURENT, out, lo)

    __radd__ = __add__

    def __neg__(self):
        return CentreElement(self.model, -self.values, self.offset)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, CentreElement):
            return CentreElement(self.model, self.values * complex(other), self.offset)
        self._check(other)
        if self.model is not Model.LAURENT:
            return CentreElement(self.model, self.values * other.values)
        if self.values.size == 0 or other.values.size == 0:
            return CentreElement(Model.LAURENT, np.zeros(0))
        a, b = self.values, other.values
        # canonical operand order keeps the product bitwise commutative
        if (a.size, a.tobytes()) > (b.size, b.tobytes()):
            a, b = b, a
        return CentreElement(Model.LAURENT, np.convolve(a, b), self.offset + other.offset)

    def __rmul__(self, other):
        return self * other

    def __truediv__(self, other):
        return self * (1.0 / complex(other))

    def __pow__(self, n):
        if n < 0:
            return invert(self, Strategy.EXACT) ** (-n)
        out = self.like(1.0)
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other):
        if not isinstance(other, CentreElement):
            return NotImplemented
        return (self.same_ring(other) and self.offset == other.offset
                and np.array_equal(self.values, other.values))

    def __hash__(self):
        return hash((self.model, self.offset, self.values.tobytes()))

    def __repr__(self):
        if self.model is Model.SCALAR:
            return f"CentreElement.scalar({complex(self.values[0])!r})"
        if self.model is Model.FINITE:
            return f"CentreElement.finite({self.values.tolist()!r})"
        return f"CentreElement.laurent({self.coeffs!r})"

    # ---- star structure and norms ----
    def adjoint(self):
        if self.model is Model.LAURENT:
            return CentreElement(Model.LAURENT, np.conj(self.values[::-1]), -self.support[1])
        return CentreElement(self.model, np.conj(self.values))

    def max_coeff_diff(self, other):
        """Largest coefficientwise modulus of ``self - other``."""
        d = (self - other).values
        return float(np.max(np.abs(d))) if d.size else 0.0

    def is_self_adjoint(self, tol=1e-12):
        return self.max_coeff_diff(self.adjoint()) <= tol

    def upper(self):
        """The l1 bound on the sup norm (exact sup for scalar and finite models)."""
        if self.model is Model.LAURENT:
            return float(np.sum(np.abs(self.values)))
        return float(np.max(np.abs(self.values)))

    # ---- function-space views ----
    def evaluate(self, angles):
        """Values at W = exp(2 pi i * angle) (Laurent model only)."""
        if self.model is not Model.LAURENT:
            raise ModelMismatch("evaluate is only defined for laurent elements")
        angles = np.asarray(angles, dtype=float)
        if self.values.size == 0:
            return np.zeros(angles.shape, dtype=complex)
        p = np.arange(self.offset, self.offset + self.values.size)
        return np.exp(2j * np.pi * np.multiply.outer(angles, p)) @ self.values

    def at_one(self):
        """Value at W = 1, i.e. the sum of the Laurent coefficients."""
        if self.model is not Model.LAURENT:
            raise ModelMismatch("at_one is only defined for laurent elements")
        return complex(np.sum(self.values))

    def real_part(self):
        return (self + self.adjoint()) * 0.5

    def imag_part(self):
        return (self - self.adjoint()) * (-0.5j)

    # ---- JSON ----
    def to_json(self):
        if self.model is Model.SCALAR:
            z = complex(self.values[0])
            return {"model": "scalar", "re": z.real, "im": z.imag}
        if self.model is Model.FINITE:
            return {"model": "finite", "values": [[v.real, v.imag] for v in self.values.tolist()]}
        return {"model": "laurent",
                "coeffs": {str(p): [c.real, c.imag] for p, c in sorted(self.coeffs.items())}}

    @classmethod
    def from_json(cls, obj, path=""):
        if not isinstance(obj, dict):
            raise SpecError(path, "centre element must be an object")
        model = obj.get("model")
        if model == "scalar":
            return cls.scalar(complex(_num(obj, "re", path), _num(obj, "im", path, 0.0)))
        if model == "finite":
            vals = obj.get("values")
            if not isinstance(vals, list) or not vals:
                raise SpecError(f"{path}.values", "expected a non-empty list of [re, im] pairs")
            return cls.finite([_pair(v, f"{path}.values[{i}]") for i, v in enumerate(vals)])
        if model == "laurent":
            coeffs = obj.get("coeffs")
            if not isinstance(coeffs, dict):
                raise SpecError(f"{path}.coeffs", "expected an object of exponent -> [re, im]")
            out = {}
            for key, v in coeffs.items():
                try:
                    p = int(key)
                except ValueError:
                    raise SpecError(f"{path}.coeffs", f"exponent key {key!r} is not an integer") from None
                out[p] = _pair(v, f"{path}.coeffs[{key}]")
            return cls.laurent(out)
        raise SpecError(f"{path}.model", f"unknown centre model {model!r}")


def _num(obj, key, path, default=None):
    v = obj.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SpecError(f"{path}.{key}", "expected a number")
    return float(v)


def _pair(v, path):
    if (not isinstance(v, list) or len(v) != 2
            or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v)):
        raise SpecError(path, "expected [re, im]")
    return complex(v[0], v[1])


# ---- module-level operations ----

def mul(c1, c2):
    return c1 * c2


def adjoint(c):
    return c.adjoint()


def is_self_adjoint(c, tol=1e-12):
    return c.is_self_adjoint(tol)


def sup_norm_bounds(c):
    """Return ``(lower, upper)`` with lower <= sup-norm(c) <= upper."""
    if c.model is not Model.LAURENT:
        s = float(np.max(np.abs(c.values)))
        return s, s
    if c.values.size == 0:
        return 0.0, 0.0
    grid = to_grid(c, NORM_GRID)
    return float(np.max(np.abs(grid))), c.upper()


def to_grid(c, n):
    """Values of a Laurent element at the n points W = exp(2 pi i j / n)."""
    buf = np.zeros(n, dtype=complex)
    if c.values.size:
        p = np.arange(c.offset, c.offset + c.values.size)
        np.add.at(buf, p % n, c.values)
    return np.fft.ifft(buf) * n


def from_grid(samples, drop=0.0):
    """Laurent element whose n-point samples are ``samples`` (exponents in [-n/2, n/2))."""
    n = len(samples)
    coef = np.fft.fft(samples) / n
    p = np.arange(n)
    p = np.where(p < (n + 1) // 2, p, p - n)
    coef = np.where(np.abs(coef) <= drop, 0, coef)
    order = np.argsort(p)
    return CentreElement(Model.LAURENT, coef[order], int(p[order][0]))


def grid_size(c, factor=8):
    """Next power of two >= factor * (support radius + 1)."""
    lo, hi = c.support
    radius = max(abs(lo), abs(hi))
    return 1 << math.ceil(math.log2(factor * (radius + 1)))


def invert(c, strategy=Strategy.EXACT, tol=1e-12, grid=None):
    """Inverse of ``c`` under ``strategy`` with residual sup-norm bound <= tol."""
    strategy = Strategy(strategy)
    if strategy is Strategy.AUTO:
        for s in (Strategy.EXACT, Strategy.NEUMANN, Strategy.GRIDFFT):
            try:
                return invert(c, s, tol, grid)
            except NotInvertible:
                continue
        raise NotInvertible("no strategy applies")
    if strategy is Strategy.EXACT:
        return _invert_exact(c)
    if strategy is Strategy.NEUMANN:
        return _invert_neumann(c, tol)
    if strategy is Strategy.GRIDFFT:
        if c.model is not Model.LAURENT:
            return _invert_exact(c)
        return _invert_grid(c, tol, grid)
    raise NotInvertible(f"strategy {strategy.value} does not apply to centre elements")


def _invert_exact(c):
    if c.model is not Model.LAURENT:
        if np.any(c.values == 0):
            raise NotInvertible("vanishes at some point")
        return CentreElement(c.model, 1.0 / c.values)
    if c.values.size != 1:
        raise NotInvertible("only monomials a W^p are exactly invertible")
    return CentreElement(Model.LAURENT, 1.0 / c.values, -c.offset)


def _invert_neumann(c, tol, max_terms=100_000):
    one = c.like(1.0)
    x = one - c
    q = x.upper()
    if q >= 1:
        raise NotInvertible(f"Neumann bound |1 - c| <= {q:.6g} is not below 1")
    total, power = one, one
    for _ in range(max_terms):
        power = power * x
        if power.upper() <= tol:
            break
        total = total + power
    else:
        raise NeumannDiverged("Neumann series did not reach tolerance")
    residual = (c * total - one).upper()
    if residual > tol:
        raise NeumannDiverged(f"residual {residual:.3g} exceeds {tol:.3g}")
    return total


def _invert_grid(c, tol, grid):
    n = grid or grid_size(c)
    one = c.like(1.0)
    norm = max(c.upper(), 1.0)
    while n <= MAX_GRID:
        samples = to_grid(c, n)
        peak = np.max(np.abs(samples)) if samples.size else 0.0
        if peak == 0 or np.min(np.abs(samples)) <= 1e-12 * peak:
            raise NotInvertible("vanishes on the sampling grid")
        inv = from_grid(1.0 / samples, drop=tol / (4 * n * norm))
        if (c * inv - one).upper() <= tol:
            return inv
        n *= 2
    raise TruncationFailure(f"grid inverse residual above {tol:.3g} up to grid {MAX_GRID}")


def exp_i(c, t, resolution=None, check=1e-8):
    """exp(-2 pi i t c) for self-adjoint ``c``.

    Exact (pointwise) for scalar and finite models.  Laurent elements are sampled
    on ``resolution`` points, exponentiated and transformed back; the result is
    cross-checked at the midpoints of that grid and ``ResolutionTooSmall`` is
    raised when it deviates by more than ``check``.
    """
    from .errors import ResolutionTooSmall

    if c.model is not Model.LAURENT:
        return CentreElement(c.model, np.exp(-2j * np.pi * t * c.values))
    if t == 0 or c.values.size == 0:
        return c.like(1.0)
    n = resolution or grid_size(c, 16)
    out = from_grid(np.exp(-2j * np.pi * t * to_grid(c, n)), drop=PRUNE)
    mid = (np.arange(n) + 0.5) / n
    err = np.max(np.abs(out.evaluate(mid) - np.exp(-2j * np.pi * t * c.evaluate(mid))))
    if err > check:
        raise ResolutionTooSmall(f"grid exponential off by {err:.3g} at resolution {n}")
    return out

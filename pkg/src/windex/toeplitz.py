"""Classical corroboration on the circle and the commutative 2-torus.

Two independent oracles live here:

* exact traces of commutators of banded semi-infinite Toeplitz operators
  T_a = (a_hat(j - k))_{j,k >= 0}.  Square truncations of T_a all have index
  zero, so the products T_a T_b are formed semi-infinitely (the inner sum runs
  over every l >= 0 that can contribute) and only then cut to a window;
* a finite-difference quadrature of (1/2 pi i) tau(delta(f) f^-1) for
  functions f(z, w) on T^2, flowed along (e^{-2 pi i s} z, e^{-2 pi i mu s} w).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InverseResidualTooLarge, SpecError, SymbolVanishes
from .twisted import AlgebraContext, TwistedElement, derivation, trace_of_product

INVERSE_TOL = 1e-8


@dataclass(frozen=True)
class BandedToeplitz:
    """Toeplitz operator of a Laurent polynomial symbol sum_j a_hat(j) z^j."""

    symbol: dict = field(default_factory=dict)

    def __post_init__(self):
        clean = {int(j): complex(c) for j, c in dict(self.symbol).items() if c != 0}
        object.__setattr__(self, "symbol", dict(sorted(clean.items())))

    @classmethod
    def monomial(cls, n, c=1.0):
        return cls({n: c})

    @property
    def band(self):
        return max((abs(j) for j in self.symbol), default=0)

    def coeff(self, j):
        return self.symbol.get(j, 0j)

    def entries(self, rows, cols):
        """The block (a_hat(j - k)) for j in ``rows``, k in ``cols``."""
        rows = np.asarray(rows)[:, None]
        cols = np.asarray(cols)[None, :]
        out = np.zeros((rows.shape[0], cols.shape[1]), dtype=complex)
        for j, c in self.symbol.items():
            out[rows - cols == j] = c
        return out

    def window(self, n):
        return self.entries(range(n), range(n))

    def times(self, other):
        """Symbol product (Laurent convolution)."""
        out = {}
        for i, a in self.symbol.items():
            for j, b in other.symbol.items():
                out[i + j] = out.get(i + j, 0j) + a * b
        return BandedToeplitz(out)

    def l1(self):
        return float(sum(abs(c) for c in self.symbol.values()))

    # ---- JSON ----
    def to_json(self):
        return {"coeffs": {str(j): [c.real, c.imag] for j, c in self.symbol.items()}}

    @classmethod
    def from_json(cls, obj, path=""):
        coeffs = obj.get("coeffs") if isinstance(obj, dict) else None
        if not isinstance(coeffs, dict):
            raise SpecError(f"{path}.coeffs" if path else "coeffs",
                            "expected an object of exponent -> [re, im]")
        out = {}
        for key, v in coeffs.items():
            p = f"{path}.coeffs[{key}]" if path else f"coeffs[{key}]"
            try:
                j = int(key)
            except ValueError:
                raise SpecError(p, f"exponent key {key!r} is not an integer") from None
            if (not isinstance(v, list) or len(v) != 2
                    or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v)):
                raise SpecError(p, "expected [re, im]")
            out[j] = complex(v[0], v[1])
        return cls(out)


def product_window(a, b, n):
    """The n x n top-left block of the semi-infinite product T_a T_b.

    Row j < n of T_a is supported on columns l < n + band(a), so summing over
    those l is the full semi-infinite sum.
    """
    inner = range(n + a.band)
    return a.entries(range(n), inner) @ b.entries(inner, range(n))


def commutator_window(a, b, n=None):
    n = n if n is not None else a.band + b.band + 1
    return product_window(a, b, n) - product_window(b, a, n)


def commutator_trace(a, b, n=None):
    """tr [T_a, T_b], exact for any window n >= band(a) + band(b) + 1.

    Below the corner both products agree with the bi-infinite Laurent
    (commuting) convolution, so the commutator has finite rank.
    """
    smallest = a.band + b.band + 1
    if n is not None and n < smallest:
        raise ValueError(f"window {n} smaller than band sum + 1 = {smallest}")
    return complex(np.trace(commutator_window(a, b, n)))


def classical_commutator_trace(a, b):
    """Closed form -sum_r r a_hat(r) b_hat(-r) from the unilateral shift relations."""
    return -sum(r * c * b.coeff(-r) for r, c in a.symbol.items())


def circle_element(a, ctx=None):
    """The symbol as an element sum a_hat(r) U^r of the commutative torus."""
    ctx = ctx or AlgebraContext.kronecker(0.0)
    return TwistedElement.from_terms(ctx, {(0, r): c for r, c in a.symbol.items()})


def trace_formula(a, b):
    """(-1/2 pi i) tau(delta(a) b) computed in the circle algebra."""
    A, B = circle_element(a), circle_element(b)
    val = trace_of_product(derivation(A), B) * (-1 / (2j * math.pi))
    return complex(val.values[0])


def _calibrate():
    """Measured sign between tr[T_a, T_b] and the trace formula, on the shift a = z."""
    z, zbar = BandedToeplitz.monomial(1), BandedToeplitz.monomial(-1)
    ratio = commutator_trace(z, zbar) / trace_formula(z, zbar)
    return int(round(ratio.real))


# The corner of [S, S*] is -P_0 while delta(U) U* carries -2 pi i, so the
# two sides differ by a global sign under the flow and Hardy conventions used.
ORIENTATION = _calibrate()


def symbol_residual(a, a_inv):
    """|a a_inv - 1|_1 on the symbol level."""
    prod = a.times(a_inv).symbol
    prod[0] = prod.get(0, 0j) - 1
    return float(sum(abs(c) for c in prod.values()))


def numeric_index(a, a_inv, tol=INVERSE_TOL):
    """tr [T_a, T_{a^-1}] for a certified symbol inverse."""
    res = symbol_residual(a, a_inv)
    if res > tol:
        raise InverseResidualTooLarge(f"|a a_inv - 1|_1 = {res:.3g} exceeds {tol:.3g}")
    return commutator_trace(a, a_inv)


def geometric_inverse(root, terms):
    """Truncated inverse of (z - root) for |root| > 1: -sum_k z^k / root^(k+1)."""
    return BandedToeplitz({k: -1 / root ** (k + 1) for k in range(terms)})


# ---- Hardy projection ----

@dataclass(frozen=True)
class HardyProjection:
    """P = indicator of nonnegative Fourier modes on a finite mode window."""

    modes: tuple

    @classmethod
    def on(cls, modes):
        return cls(tuple(int(k) for k in modes))

    @property
    def P(self):
        return np.diag((np.asarray(self.modes) >= 0).astype(float))

    @property
    def H(self):
        return 2 * self.P - np.eye(len(self.modes))

    def multiplication(self, a):
        """Multiplication by a on the window: entry (j, k) = a_hat(j - k)."""
        return a.entries(self.modes, self.modes)

    def compress(self, a):
        """P M_a P restricted to the nonnegative modes."""
        keep = np.asarray(self.modes) >= 0
        full = self.P @ self.multiplication(a) @ self.P
        return full[np.ix_(keep, keep)]


def hardy_projection(modes):
    return HardyProjection.on(modes)


# ---- grid winding on T^2 ----

@dataclass(frozen=True)
class GridSymbol:
    """A function f(z, w) on the 2-torus, either a sympy expression or a finite
    sum of terms c z^n w^m."""

    source: str
    func: object = field(repr=False, compare=False)

    @classmethod
    def parse(cls, text):
        import sympy
        from sympy.parsing.sympy_parser import convert_xor, parse_expr, standard_transformations

        z, w = sympy.symbols("z w")
        try:
            expr = parse_expr(text, local_dict={"z": z, "w": w, "I": sympy.I},
                              transformations=standard_transformations + (convert_xor,))
        except Exception as exc:
            raise SpecError("symbol", f"cannot parse {text!r}: {exc}") from None
        extra = expr.free_symbols - {z, w}
        if extra:
            raise SpecError("symbol", f"unknown symbols {sorted(map(str, extra))}")
        f = sympy.lambdify((z, w), expr, "numpy")
        return cls(text, lambda zz, ww: np.broadcast_to(f(zz, ww), np.broadcast(zz, ww).shape))

    @classmethod
    def from_terms(cls, terms):
        """``{(n, m): c}`` meaning sum c z^n w^m."""
        terms = {(int(n), int(m)): complex(c) for (n, m), c in terms.items()}

        def f(zz, ww):
            out = np.zeros(np.broadcast(zz, ww).shape, dtype=complex)
            for (n, m), c in terms.items():
                out = out + c * zz ** n * ww ** m
            return out

        label = " + ".join(f"({c})*z^{n}*w^{m}" for (n, m), c in sorted(terms.items())) or "0"
        return cls(label, f)

    @classmethod
    def from_json(cls, obj, path="symbol"):
        if isinstance(obj, str):
            return cls.parse(obj)
        terms = obj.get("terms") if isinstance(obj, dict) else None
        if not isinstance(terms, list):
            raise SpecError(f"{path}.terms", "expected a list of {n, m, re, im}")
        out = {}
        for i, t in enumerate(terms):
            p = f"{path}.terms[{i}]"
            if not isinstance(t, dict):
                raise SpecError(p, "term must be an object")
            for key in ("n", "m"):
                if isinstance(t.get(key), bool) or not isinstance(t.get(key), int):
                    raise SpecError(f"{p}.{key}", "expected an integer")
            nm = (t["n"], t["m"])
            if nm in out:
                raise SpecError(p, f"duplicate term (n,m)={nm}")
            for key in ("re", "im"):
                v = t.get(key, 0.0)
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    raise SpecError(f"{p}.{key}", "expected a number")
            out[nm] = complex(t.get("re", 0.0), t.get("im", 0.0))
        return cls.from_terms(out)

    def __call__(self, z, w):
        return np.asarray(self.func(z, w), dtype=complex)


def torus_grid(n):
    t = np.exp(2j * np.pi * np.arange(n) / n)
    return t[:, None], t[None, :]


def numeric_wind(f, mu, h=1e-3, n=256):
    """(1/2 pi i) * grid mean of [f(flowed by h) - f] / (h f).

    The forward difference has error C h + O(h^2).  ``np.mean`` reduces by
    pairwise summation, so the result does not depend on thread count.
    """
    z, w = torus_grid(n)
    base = f(z, w)
    floor = float(np.min(np.abs(base)))
    if floor <= 10 * h:
        raise SymbolVanishes(f"min |f| = {floor:.3g} on the {n}x{n} grid is not above 10h = {10 * h:.3g}")
    moved = f(np.exp(-2j * np.pi * h) * z, np.exp(-2j * np.pi * mu * h) * w)
    return complex(np.mean((moved - base) / (h * base)) / (2j * math.pi))


def numeric_wind_report(f, mu, h=1e-3, n=256):
    """numeric_wind at h and h/2 together with the first-order error model."""
    v_h = numeric_wind(f, mu, h, n)
    v_half = numeric_wind(f, mu, h / 2, n)
    z, w = torus_grid(n)
    slope = 2 * (v_h - v_half) / h
    return {"value": v_h, "value_half_step": v_half, "extrapolated": 2 * v_half - v_h,
            "error_slope": slope, "error_estimate": abs(slope) * h,
            "min_modulus": float(np.min(np.abs(f(z, w)))), "grid": n, "step": h, "mu": mu}


__all__ = ["BandedToeplitz", "product_window", "commutator_window", "commutator_trace",
           "classical_commutator_trace", "circle_element", "trace_formula", "ORIENTATION",
           "symbol_residual", "numeric_index", "geometric_inverse", "HardyProjection",
           "hardy_projection", "GridSymbol", "torus_grid", "numeric_wind", "numeric_wind_report",
           "INVERSE_TOL"]

"""Finitely supported twisted Laurent elements sum c_{n,m} V^n U^m over a centre Z.

Every element is stored in normal order: centre coefficient first, then the
V-power, then the U-power.  Multiplying V^n1 U^m1 by V^n2 U^m2 requires moving
U^m1 past V^n2, which costs the central factor

    U^m V^n = chi(m, n) V^n U^m,

    chi(m, n) = 1                          trivial cocycle (commutative torus),
    chi(m, n) = exp(-2 pi i theta m n)     noncommutative torus, VU = e^{2 pi i theta} UV,
    chi(m, n) = W^(m n)                    integer Heisenberg algebra, UV = WVU.

The torus orientation is pinned by the clock/shift matrix oracle and the
Heisenberg one by the 3x3 integer matrix group law (see tests/test_twisted.py).
Because chi is bimultiplicative, chi(-m, -n) = chi(m, n); this single factor
appears in both the adjoint and the monomial inverse:

    (c V^n U^m)*      = c* chi(m, n) V^-n U^-m
    (c V^n U^m)^{-1}  = c^{-1} chi(m, n) V^-n U^-m

Coefficients are held in a dense box ``data[n - n0, m - m0, :]`` whose last
axis is the centre: one slot (scalar), k point values (finite) or Laurent
exponents starting at ``p0`` (laurent).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np
import scipy.fft as sfft

from . import centre as zc
from .centre import CentreElement, Model, Strategy
from .errors import ContextMismatch, NeumannDiverged, NotInvertible, SpecError, WindexError

# Neumann partial sums hold 1e5+ coefficients; a 1e-14 cut would discard
# more mass than a 1e-10 residual budget allows.
PRUNE = 1e-17

# Cost ratio at which products switch from the per-atom loop to FFT convolution.
FFT_BIAS = 0.6


class Cocycle(str, Enum):
    TRIVIAL = "trivial"
    TORUS = "torus"
    HEISENBERG = "heisenberg"


def _parse_theta(theta):
    if theta is None:
        return None
    if isinstance(theta, Fraction):
        return theta
    if isinstance(theta, str):
        return Fraction(theta)
    if isinstance(theta, int):
        return Fraction(theta)
    return float(theta)


@dataclass(frozen=True, eq=False)
class AlgebraContext:
    """Ambient algebra: cocycle, torus angle and flow weight eta in Z_sa.

    The centre model is that of ``eta``.  ``theta`` may be a ``Fraction`` (or a
    string such as ``"1/3"``), in which case torus phases are computed from the
    exponent reduced modulo the denominator and repeat bit for bit.
    """

    cocycle: Cocycle
    eta: CentreElement
    theta: Fraction | float | None = None

    def __post_init__(self):
        cocycle = Cocycle(self.cocycle)
        object.__setattr__(self, "cocycle", cocycle)
        object.__setattr__(self, "theta", _parse_theta(self.theta))
        if not self.eta.is_self_adjoint(1e-12):
            raise ValueError("flow weight eta must be self-adjoint")
        if cocycle is Cocycle.HEISENBERG and self.eta.model is not Model.LAURENT:
            raise ValueError("heisenberg cocycle requires laurent centre")
        if cocycle is Cocycle.TORUS:
            if self.eta.model is Model.LAURENT:
                raise ValueError("torus cocycle requires scalar or finite centre")
            if self.theta is None:
                raise ValueError("torus cocycle requires theta")

    # ---- named families ----
    @classmethod
    def kronecker(cls, mu):
        """C(T^2) with the scalar Kronecker flow of slope ``mu``."""
        return cls(Cocycle.TRIVIAL, CentreElement.scalar(mu))

    @classmethod
    def torus(cls, theta, mu):
        """Noncommutative torus A_theta with scalar flow weight ``mu``."""
        return cls(Cocycle.TORUS, CentreElement.scalar(mu), theta)

    @classmethod
    def bundle(cls, eta_values, theta=None):
        """C(X) tensor C(T^2) (or A_theta) with pointwise flow weights ``eta_values``."""
        eta = CentreElement.finite(eta_values)
        if theta is None:
            return cls(Cocycle.TRIVIAL, eta)
        return cls(Cocycle.TORUS, eta, theta)

    @classmethod
    def heisenberg(cls, mu, eta=None):
        """C*(H) over C*(W); default flow weight (mu/3)(W + 1 + W*)."""
        if eta is None:
            eta = CentreElement.laurent({-1: mu / 3, 0: mu / 3, 1: mu / 3})
        return cls(Cocycle.HEISENBERG, eta)

    # ---- structure ----
    @property
    def model(self):
        return self.eta.model

    @property
    def k(self):
        return self.eta.k

    @property
    def width(self):
        """Length of the centre axis for non-laurent models."""
        return 1 if self.model is Model.SCALAR else self.k

    def _key(self):
        return (self.cocycle, self.theta, self.eta)

    def __eq__(self, other):
        if not isinstance(other, AlgebraContext):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        extra = f", theta={self.theta}" if self.theta is not None else ""
        return f"AlgebraContext({self.cocycle.value}, eta={self.eta!r}{extra})"

    def phase(self, m1, n2):
        """Scalar crossing factor chi(m1, n2) for trivial and torus cocycles (vectorised)."""
        m1 = np.asarray(m1, dtype=np.int64)
        n2 = np.asarray(n2, dtype=np.int64)
        if self.cocycle is Cocycle.TRIVIAL:
            return np.ones(np.broadcast(m1, n2).shape, dtype=complex)
        if self.cocycle is Cocycle.HEISENBERG:
            raise ValueError("heisenberg crossing factor is the central element W^(m n)")
        theta = self.theta
        if isinstance(theta, Fraction):
            q = theta.denominator
            r = np.mod(-theta.numerator * m1 * n2, q)
            return np.exp(2j * np.pi * r / q)
        return np.exp(-2j * np.pi * theta * (m1 * n2))

    def crossing(self, m, n):
        """chi(m, n) as a centre element."""
        if self.cocycle is Cocycle.HEISENBERG:
            return CentreElement.laurent({m * n: 1.0})
        return self.centre(complex(self.phase(m, n)))

    # ---- elements ----
    def centre(self, value):
        """A constant centre element of this context's model."""
        return CentreElement.constant(self.model, value, self.k)

    def zero(self):
        return TwistedElement.from_terms(self, {})

    def one(self):
        return self.monomial(0, 0)

    def monomial(self, n, m, coeff=1.0):
        return TwistedElement.from_terms(self, {(n, m): coeff})

    def central(self, c):
        return self.monomial(0, 0, c)

    @property
    def U(self):
        return self.monomial(0, 1)

    @property
    def V(self):
        return self.monomial(1, 0)

    @property
    def W(self):
        if self.cocycle is not Cocycle.HEISENBERG:
            raise ValueError("W only exists in the heisenberg context")
        return self.central(CentreElement.laurent({1: 1.0}))

    # ---- JSON ----
    def to_json(self):
        out = {"cocycle": self.cocycle.value, "eta": self.eta.to_json()}
        if self.theta is not None:
            out["theta"] = str(self.theta) if isinstance(self.theta, Fraction) else self.theta
        return out

    @classmethod
    def from_json(cls, obj, path="context"):
        if not isinstance(obj, dict):
            raise SpecError(path, "context must be an object")
        cocycle = obj.get("cocycle")
        if cocycle not in {c.value for c in Cocycle}:
            raise SpecError(f"{path}.cocycle", f"unknown cocycle {cocycle!r}")
        if "eta" not in obj:
            raise SpecError(f"{path}.eta", "missing flow weight")
        eta = CentreElement.from_json(obj["eta"], f"{path}.eta")
        theta = obj.get("theta")
        if theta is not None:
            try:
                theta = _parse_theta(theta)
            except (ValueError, ZeroDivisionError, TypeError):
                raise SpecError(f"{path}.theta", f"cannot parse theta {theta!r}") from None
        try:
            return cls(cocycle, eta, theta)
        except ValueError as exc:
            raise SpecError(path, str(exc)) from None


def _normalise(data, origin, laurent):
    """Zero out sub-threshold entries and shrink the box to the support."""
    data = np.where(np.abs(data) <= PRUNE, 0, data)
    nz = data != 0
    rows = np.flatnonzero(nz.any(axis=(1, 2)))
    if rows.size == 0:
        return np.zeros((0, 0, 0 if laurent else data.shape[2]), dtype=complex), (0, 0, 0)
    cols = np.flatnonzero(nz.any(axis=(0, 2)))
    n0, m0, p0 = origin
    if laurent:
        ps = np.flatnonzero(nz.any(axis=(0, 1)))
        data = data[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1, ps[0]:ps[-1] + 1]
        return data, (n0 + int(rows[0]), m0 + int(cols[0]), p0 + int(ps[0]))
    data = data[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1, :]
    return data, (n0 + int(rows[0]), m0 + int(cols[0]), 0)


@dataclass(frozen=True, eq=False)
class TwistedElement:
    """sum c_{n,m} V^n U^m with centre-valued coefficients, in normal order."""

    context: AlgebraContext
    data: np.ndarray
    origin: tuple = (0, 0, 0)

    def __post_init__(self):
        laurent = self.context.model is Model.LAURENT
        data = np.asarray(self.data, dtype=complex)
        if data.ndim != 3 or (not laurent and data.shape[2] != self.context.width):
            raise ValueError(f"data of shape {data.shape} does not fit the context")
        data, origin = _normalise(data, tuple(int(v) for v in self.origin), laurent)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "origin", origin)

    @classmethod
    def from_terms(cls, context, terms):
        """Build from ``{(n, m): CentreElement or number}``."""
        laurent = context.model is Model.LAURENT
        coeffs = {}
        for (n, m), c in dict(terms).items():
            if not isinstance(c, CentreElement):
                c = context.centre(c)
            elif not c.same_ring(context.eta):
                raise ContextMismatch(f"coefficient at {(n, m)} is not in the context centre")
            coeffs[(int(n), int(m))] = c
        if not coeffs:
            return cls(context, np.zeros((0, 0, 0 if laurent else context.width)))
        ns = [n for n, _ in coeffs]
        ms = [m for _, m in coeffs]
        n0, m0 = min(ns), min(ms)
        if laurent:
            sup = [c.support for c in coeffs.values() if c.values.size]
            p0 = min((s[0] for s in sup), default=0)
            p1 = max((s[1] for s in sup), default=0)
            data = np.zeros((max(ns) - n0 + 1, max(ms) - m0 + 1, p1 - p0 + 1), dtype=complex)
            for (n, m), c in coeffs.items():
                if c.values.size:
                    data[n - n0, m - m0, c.offset - p0:c.offset - p0 + c.values.size] += c.values
            return cls(context, data, (n0, m0, p0))
        data = np.zeros((max(ns) - n0 + 1, max(ms) - m0 + 1, context.width), dtype=complex)
        for (n, m), c in coeffs.items():
            data[n - n0, m - m0, :] += c.values
        return cls(context, data, (n0, m0, 0))

    # ---- structure ----
    @property
    def laurent(self):
        return self.context.model is Model.LAURENT

    def _centre_at(self, i, j):
        if self.laurent:
            return CentreElement(Model.LAURENT, self.data[i, j, :], self.origin[2])
        return CentreElement(self.context.model, self.data[i, j, :])

    @property
    def terms(self):
        """Nonzero coefficients as ``{(n, m): CentreElement}``."""
        n0, m0, _ = self.origin
        out = {}
        for i, j in zip(*np.nonzero(np.any(self.data != 0, axis=2))):
            out[(n0 + int(i), m0 + int(j))] = self._centre_at(i, j)
        return out

    def coeff(self, n, m):
        n0, m0, _ = self.origin
        i, j = n - n0, m - m0
        if 0 <= i < self.data.shape[0] and 0 <= j < self.data.shape[1]:
            return self._centre_at(i, j)
        return self.context.centre(0.0)

    def is_zero(self):
        return self.data.size == 0

    def _check(self, other):
        if not isinstance(other, TwistedElement):
            raise TypeError(f"expected TwistedElement, got {type(other).__name__}")
        if self.context != other.context:
            raise ContextMismatch(f"{self.context!r} vs {other.context!r}")

    # ---- linear structure ----
    def __add__(self, other):
        if not isinstance(other, TwistedElement):
            other = self.context.central(other)
        self._check(other)
        if self.is_zero():
            return other
        if other.is_zero():
            return self
        lo = [min(a, b) for a, b in zip(self.origin, other.origin)]
        hi = [max(a + s, b + t) for a, s, b, t in zip(self.origin, self.data.shape,
                                                       other.origin, other.data.shape)]
        if not self.laurent:
            lo[2], hi[2] = 0, self.data.shape[2]
        out = np.zeros([h - l for l, h in zip(lo, hi)], dtype=complex)
        for x in (self, other):
            s = tuple(slice(o - l, o - l + d) for o, l, d in zip(x.origin, lo, x.data.shape))
            out[s] += x.data
        return TwistedElement(self.context, out, tuple(lo))

    __radd__ = __add__

    def __neg__(self):
        return TwistedElement(self.context, -self.data, self.origin)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, TwistedElement):
            self._check(other)
            return _product(self, other)
        if isinstance(other, CentreElement):
            return _product(self, self.context.central(other))
        return TwistedElement(self.context, self.data * complex(other), self.origin)

    def __rmul__(self, other):
        if isinstance(other, CentreElement):
            return _product(self.context.central(other), self)
        return TwistedElement(self.context, self.data * complex(other), self.origin)

    def __truediv__(self, other):
        return self * (1.0 / complex(other))

    def __pow__(self, n):
        if n < 0:
            return invert(self, Strategy.AUTO) ** (-n)
        out = self.context.one()
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other):
        if not isinstance(other, TwistedElement):
            return NotImplemented
        return (self.context == other.context and self.origin == other.origin
                and np.array_equal(self.data, other.data))

    def __hash__(self):
        return hash((self.context, self.origin, self.data.tobytes()))

    def __repr__(self):
        parts = [f"{(n, m)}: {c!r}" for (n, m), c in sorted(self.terms.items())]
        return f"TwistedElement({self.context.cocycle.value}, {{{', '.join(parts)}}})"

    def adjoint(self):
        return adjoint(self)

    def trace(self):
        return trace(self)

    # ---- norms ----
    def norm1(self):
        """Sum over (n, m) of the centre upper bounds; dominates the C*-norm."""
        if self.data.size == 0:
            return 0.0
        if self.laurent or self.context.model is Model.SCALAR:
            return float(np.sum(np.abs(self.data)))
        return float(np.sum(np.max(np.abs(self.data), axis=2)))

    def distance(self, other):
        return (self - other).norm1()

    def max_coeff_diff(self, other):
        d = (self - other).data
        return float(np.max(np.abs(d))) if d.size else 0.0

    # ---- JSON ----
    def to_json(self):
        terms = [{"n": n, "m": m, "coeff": c.to_json()} for (n, m), c in sorted(self.terms.items())]
        return {"context": self.context.to_json(), "terms": terms}

    @classmethod
    def from_json(cls, obj, path=""):
        if not isinstance(obj, dict):
            raise SpecError(path, "element must be an object")
        ctx = AlgebraContext.from_json(obj.get("context"), _join(path, "context"))
        return cls.terms_from_json(ctx, obj.get("terms"), _join(path, "terms"))

    @classmethod
    def terms_from_json(cls, ctx, terms, path="terms"):
        if not isinstance(terms, list):
            raise SpecError(path, "expected a list of terms")
        seen = {}
        for i, t in enumerate(terms):
            p = f"{path}[{i}]"
            if not isinstance(t, dict):
                raise SpecError(p, "term must be an object")
            for key in ("n", "m"):
                if isinstance(t.get(key), bool) or not isinstance(t.get(key), int):
                    raise SpecError(f"{p}.{key}", "expected an integer")
            nm = (t["n"], t["m"])
            if nm in seen:
                raise SpecError(p, f"duplicate term (n,m)={nm} (also at {path}[{seen[nm][0]}])")
            if "coeff" not in t:
                raise SpecError(f"{p}.coeff", "missing coefficient")
            c = CentreElement.from_json(t["coeff"], f"{p}.coeff")
            if not c.same_ring(ctx.eta):
                raise SpecError(f"{p}.coeff", f"coefficient model {c.model.value} does not match "
                                              f"the context centre {ctx.model.value}")
            seen[nm] = (i, c)
        return cls.from_terms(ctx, {nm: c for nm, (_, c) in seen.items()})


def _join(path, key):
    return f"{path}.{key}" if path else key


# ---- multiplication kernel ----

def _product(a, b):
    ctx = a.context
    if a.is_zero() or b.is_zero():
        return ctx.zero()
    (na, ma, pa), (nb, mb, pb) = a.origin, b.origin
    A, B = a.data, b.data
    shape_nm = (A.shape[0] + B.shape[0] - 1, A.shape[1] + B.shape[1] - 1)
    rows_b = nb + np.arange(B.shape[0])      # n2 values
    cols_a = ma + np.arange(A.shape[1])      # m1 values
    left_small = np.count_nonzero(A) <= np.count_nonzero(B)

    if not a.laurent:
        out = np.zeros(shape_nm + (A.shape[2],), dtype=complex)
        atoms = min(np.count_nonzero(A.any(axis=2)), np.count_nonzero(B.any(axis=2)))
        fft_units = A.shape[1] * out.shape[0] * out.shape[2] * B.shape[1] * math.log2(out.shape[0] + 2)
        if atoms * max(A.size, B.size) > FFT_BIAS * fft_units:
            _product_fft_pointwise(ctx, A, B, ma, rows_b, out)
            return TwistedElement(ctx, out, (na + nb, ma + mb, 0))
        if left_small:
            for i, j in zip(*np.nonzero(np.any(A != 0, axis=2))):
                ph = ctx.phase(ma + j, rows_b)[:, None, None]
                out[i:i + B.shape[0], j:j + B.shape[1], :] += A[i, j, :] * ph * B
        else:
            for i, j in zip(*np.nonzero(np.any(B != 0, axis=2))):
                ph = ctx.phase(cols_a, nb + i)[None, :, None]
                out[i:i + A.shape[0], j:j + A.shape[1], :] += A * ph * B[i, j, :]
        return TwistedElement(ctx, out, (na + nb, ma + mb, 0))

    heis = ctx.cocycle is Cocycle.HEISENBERG
    if heis:
        corners = [m * n for m in (ma, ma + A.shape[1] - 1) for n in (nb, nb + B.shape[0] - 1)]
        smin, smax = min(corners), max(corners)
    else:
        smin = smax = 0
    out = np.zeros(shape_nm + (A.shape[2] + B.shape[2] - 1 + smax - smin,), dtype=complex)
    # measured cost units: ~5.7 ns per atom-path update, ~3.5 ns per FFT unit
    atoms = min(np.count_nonzero(A), np.count_nonzero(B))
    fft_units = A.shape[1] * out.shape[0] * B.shape[1] * out.shape[2] * math.log2(out.shape[0] * out.shape[2] + 2)
    if atoms * max(A.size, B.size) > FFT_BIAS * fft_units:
        _product_fft(A, B, ma, nb, smin, smax if heis else 0, heis, out)
        return TwistedElement(ctx, out, (na + nb, ma + mb, pa + pb + smin))
    cols_out, depth = out.shape[1], out.shape[2]
    flat = out.reshape(-1)
    item = out.itemsize
    if left_small:
        # atom c W^p1 V^n1 U^m1 of A times row n2 of B lands at p-shift m1*n2,
        # which is linear in the row index: fold it into the row stride.
        for i, j, l in zip(*np.nonzero(A)):
            m1 = ma + j
            start = (i * cols_out + j) * depth + l + m1 * nb - smin if heis else \
                (i * cols_out + j) * depth + l
            row_step = cols_out * depth + (m1 if heis else 0)
            view = np.lib.stride_tricks.as_strided(
                flat[start:], shape=B.shape, strides=(row_step * item, depth * item, item))
            view += A[i, j, l] * B
    else:
        # column m1 of A times atom of B in row n2: p-shift linear in the column index
        for i, j, t in zip(*np.nonzero(B)):
            n2 = nb + i
            start = (i * cols_out + j) * depth + t + (ma * n2 - smin if heis else 0)
            col_step = depth + (n2 if heis else 0)
            view = np.lib.stride_tricks.as_strided(
                flat[start:], shape=A.shape, strides=(cols_out * depth * item, col_step * item, item))
            view += A * B[i, j, t]
    return TwistedElement(ctx, out, (na + nb, ma + mb, pa + pb + smin))


def _product_fft(A, B, ma, nb, smin, smax, heis, out):
    """Large-by-large Laurent products: for each column m1 of A the twist
    W^(m1 n2) shifts row n2 of B by m1 n2 in p, which leaves a plain 2-D
    convolution over (n, p) done with FFTs."""
    Nb, Mb, Pb = B.shape
    No, _, Po = out.shape
    fn, fp = sfft.next_fast_len(No), sfft.next_fast_len(Po)
    n2 = nb + np.arange(Nb)
    width = Pb + smax - smin
    plain = None
    for j in range(A.shape[1]):
        col = A[:, j, :]
        if not col.any():
            continue
        if heis:
            shifts = (ma + j) * n2 - smin
            Bj = np.zeros((Nb, Mb, width), dtype=complex)
            for i in range(Nb):
                Bj[i, :, shifts[i]:shifts[i] + Pb] = B[i]
            FB = sfft.fftn(Bj, s=(fn, fp), axes=(0, 2))
        else:
            if plain is None:
                plain = sfft.fftn(B, s=(fn, fp), axes=(0, 2))
            FB = plain
        FA = sfft.fft2(col, s=(fn, fp))
        conv = sfft.ifftn(FA[:, None, :] * FB, axes=(0, 2))
        out[:, j:j + Mb, :] += conv[:No, :, :Po]


def _product_fft_pointwise(ctx, A, B, ma, rows_b, out):
    """Scalar or finite centre: for each column m1 of A the phase chi(m1, n2)
    depends on the row of B only, leaving a convolution along n."""
    Mb = B.shape[1]
    No = out.shape[0]
    fn = sfft.next_fast_len(No)
    for j in range(A.shape[1]):
        col = A[:, j, :]
        if not col.any():
            continue
        Bj = B * ctx.phase(ma + j, rows_b)[:, None, None]
        conv = sfft.ifft(sfft.fft(col, n=fn, axis=0)[:, None, :] * sfft.fft(Bj, n=fn, axis=0), axis=0)
        out[:, j:j + Mb, :] += conv[:No]


def mul(a, b):
    return a * b


# ---- star structure, trace, derivation, flow ----

def adjoint(a):
    ctx = a.context
    if a.is_zero():
        return a
    n0, m0, p0 = a.origin
    N, M, P = a.data.shape
    ns = n0 + np.arange(N)
    ms = m0 + np.arange(M)
    if not a.laurent:
        ph = ctx.phase(ms[None, :], ns[:, None])[:, :, None]
        out = (np.conj(a.data) * ph)[::-1, ::-1, :]
        return TwistedElement(ctx, out, (-(n0 + N - 1), -(m0 + M - 1), 0))
    # flip every axis (conjugating W^p to W^-p), then shift row/col (n, m) by W^(m n)
    flipped = np.conj(a.data)[::-1, ::-1, ::-1]
    new_ns = -ns[::-1]
    new_ms = -ms[::-1]
    if ctx.cocycle is Cocycle.HEISENBERG:
        shifts = np.multiply.outer(new_ns, new_ms)
        smin, smax = int(shifts.min()), int(shifts.max())
    else:
        shifts = np.zeros((N, M), dtype=np.int64)
        smin = smax = 0
    out = np.zeros((N, M, P + smax - smin), dtype=complex)
    for i in range(N):
        for j in range(M):
            s = shifts[i, j] - smin
            out[i, j, s:s + P] = flipped[i, j]
    return TwistedElement(ctx, out, (int(new_ns[0]), int(new_ms[0]), -(p0 + P - 1) + smin))


def trace(a):
    """Centre-valued trace: the coefficient of V^0 U^0."""
    return a.coeff(0, 0)


def trace_of_product(a, b):
    """tau(a b) without forming a b: sum over (n, m) of a_{n,m} chi(m, -n) b_{-n,-m}."""
    a._check(b)
    ctx = a.context
    total = ctx.centre(0.0)
    if a.is_zero() or b.is_zero():
        return total
    if not a.laurent:
        acc = np.zeros(ctx.width, dtype=complex)
        for (n, m), c in a.terms.items():
            cb = b.coeff(-n, -m)
            acc += c.values * cb.values * complex(ctx.phase(m, -n))
        return CentreElement(ctx.model, acc)
    heis = ctx.cocycle is Cocycle.HEISENBERG
    for (n, m), c in a.terms.items():
        cb = b.coeff(-n, -m)
        if cb.is_zero():
            continue
        prod = np.convolve(c.values, cb.values)
        shift = -m * n if heis else 0
        total = total + CentreElement(Model.LAURENT, prod, c.offset + cb.offset + shift)
    return total


def _scale_rows(a, c_by_row, col_weight=None):
    """Multiply the (n, m) coefficient by ``c_by_row[n]`` (a centre element), times
    ``col_weight(m)`` if given.  Used for both the derivation and the flow."""
    ctx = a.context
    n0, m0, p0 = a.origin
    out = ctx.zero()
    for i in range(a.data.shape[0]):
        n = n0 + i
        row = TwistedElement(ctx, a.data[i:i + 1], (n, m0, p0))
        if row.is_zero():
            continue
        c = c_by_row(n)
        if a.laurent:
            prod = _product(row, ctx.central(c))
        else:
            prod = TwistedElement(ctx, row.data * c.values[None, None, :], row.origin)
        if col_weight is not None:
            ms = prod.origin[1] + np.arange(prod.data.shape[1])
            prod = TwistedElement(ctx, prod.data * col_weight(ms)[None, :, None], prod.origin)
        out = out + prod
    return out


def derivation(a):
    """delta(c V^n U^m) = -2 pi i (n eta + m) c V^n U^m, computed exactly."""
    ctx = a.context
    if a.is_zero():
        return a
    eta_part = _scale_rows(a, lambda n: ctx.eta * n)
    n0, m0, p0 = a.origin
    ms = m0 + np.arange(a.data.shape[1])
    m_part = TwistedElement(ctx, a.data * ms[None, :, None], a.origin)
    return (eta_part + m_part) * (-2j * math.pi)


def flow(a, t, resolution=None):
    """alpha_t: multiply the (n, m) coefficient by exp(-2 pi i t (n eta + m)).

    Exact for scalar and finite centres; for Laurent eta the central unitary
    exp(-2 pi i t n eta) is computed on a ``resolution``-point grid.
    """
    ctx = a.context
    if t == 0 or a.is_zero():
        return a
    eta = ctx.eta
    cache = {}

    def row_factor(n):
        if n not in cache:
            if eta.model is Model.LAURENT:
                res = resolution
                if res is None:
                    lo, hi = eta.support
                    radius = max(abs(lo), abs(hi)) + 1
                    band = radius * (8 + math.ceil(2 * math.e * math.pi * abs(n * t) * eta.upper()))
                    res = 1 << math.ceil(math.log2(2 * band + 64))
                cache[n] = zc.exp_i(eta, n * t, res)
            else:
                cache[n] = zc.exp_i(eta, n * t)
        return cache[n]

    return _scale_rows(a, row_factor, lambda ms: np.exp(-2j * np.pi * t * ms))


# ---- inversion ----

@dataclass(frozen=True)
class Inverse:
    """An inverse together with its certificate."""

    value: TwistedElement
    residual: float
    strategy: Strategy


def invert(a, strategy=Strategy.AUTO, tol=1e-10, factors=None):
    return invert_certified(a, strategy, tol, factors).value


def invert_certified(a, strategy=Strategy.AUTO, tol=1e-10, factors=None):
    """Invert ``a`` and return an ``Inverse`` with residual |a a^-1 - 1|_1 <= tol.

    ``factors`` (a sequence of twisted elements whose product is ``a``) is
    required by the product strategy and used by ``auto`` when given.
    """
    strategy = Strategy(strategy)
    if strategy is Strategy.AUTO:
        tried = []
        order = [Strategy.MONOMIAL, Strategy.NEUMANN]
        if factors is not None:
            order.append(Strategy.PRODUCT)
        for s in order:
            try:
                return invert_certified(a, s, tol, factors)
            except NotInvertible as exc:
                tried.append(f"{s.value}: {exc}")
        raise NotInvertible("; ".join(tried))
    if strategy is Strategy.MONOMIAL:
        inv = _invert_monomial(a, tol)
    elif strategy is Strategy.NEUMANN:
        inv = _invert_neumann(a, tol)
    elif strategy is Strategy.PRODUCT:
        inv = _invert_product(a, tol, factors)
    else:
        raise NotInvertible(f"strategy {strategy.value} does not apply to twisted elements")
    residual = (a * inv - a.context.one()).norm1()
    if residual > tol:
        raise NeumannDiverged(f"{strategy.value} inverse residual {residual:.3g} exceeds {tol:.3g}")
    return Inverse(inv, residual, strategy)


def _invert_monomial(a, tol):
    terms = a.terms
    if len(terms) != 1:
        raise NotInvertible("not a monomial")
    (n, m), c = next(iter(terms.items()))
    try:
        cinv = zc.invert(c, Strategy.AUTO, tol / 4)
    except WindexError as exc:
        raise NotInvertible(f"monomial coefficient: {exc}") from None
    return a.context.monomial(-n, -m, cinv * a.context.crossing(m, n))


def _invert_neumann(a, tol, max_terms=20_000):
    one = a.context.one()
    y = one - a
    q = y.norm1()
    if q >= 1:
        raise NotInvertible(f"Neumann bound |1 - a|_1 = {q:.6g} is not below 1")
    total, power = one, one
    last = 1.0
    stalled = 0
    for _ in range(max_terms):
        power = power * y
        size = power.norm1()
        if size <= tol / 2:
            return total
        total = total + power
        stalled = stalled + 1 if size >= last else 0
        if stalled > 20:
            break
        last = size
    raise NeumannDiverged("Neumann partial sums stopped contracting")


def _invert_product(a, tol, factors):
    if not factors:
        raise NotInvertible("product strategy needs explicit factors")
    prod = a.context.one()
    for f in factors:
        prod = prod * f
    scale = max(1.0, a.norm1())
    if prod.distance(a) > 1e-12 * scale:
        raise NotInvertible("factors do not multiply to the element")
    inv = a.context.one()
    sub_tol = tol / (10 * len(factors) * math.prod(max(1.0, f.norm1()) for f in factors))
    for f in factors:
        inv = invert(f, Strategy.AUTO, sub_tol) * inv
    return inv


# ---- random elements for property tests ----

def _random_coeff(ctx, rng, p_radius, zero_prob=0.0):
    if ctx.model is Model.LAURENT:
        ps = range(-p_radius, p_radius + 1)
        return CentreElement.laurent({p: _unit_disc(rng) for p in ps if rng.random() >= zero_prob})
    vals = [_unit_disc(rng) for _ in range(ctx.width)]
    return CentreElement(ctx.model, vals)


def _unit_disc(rng):
    return rng.uniform(0, 1) * np.exp(2j * np.pi * rng.uniform())


def random_element(ctx, rng, radius=3, p_radius=1, density=0.5):
    """Random element with support in [-radius, radius]^2 and coefficients of modulus <= 1."""
    terms = {}
    for n in range(-radius, radius + 1):
        for m in range(-radius, radius + 1):
            if rng.random() < density:
                terms[(n, m)] = _random_coeff(ctx, rng, p_radius, zero_prob=0.3)
    return TwistedElement.from_terms(ctx, terms)


def random_small(ctx, rng, norm, radius=3, p_radius=1, density=0.5):
    """Random element rescaled to l1 norm ``norm`` (a zero draw is replaced by U)."""
    x = random_element(ctx, rng, radius, p_radius, density)
    if x.is_zero():
        x = ctx.U
    return x * (norm / x.norm1())


def random_monomial(ctx, rng, radius=3, p_radius=3):
    """c V^n U^m with c exactly invertible (modulus in [0.5, 2])."""
    n, m = (int(v) for v in rng.integers(-radius, radius + 1, size=2))
    r = lambda: np.exp(rng.uniform(np.log(0.5), np.log(2.0))) * np.exp(2j * np.pi * rng.uniform())
    if ctx.model is Model.LAURENT:
        c = CentreElement.laurent({int(rng.integers(-p_radius, p_radius + 1)): r()})
    else:
        c = CentreElement(ctx.model, [r() for _ in range(ctx.width)])
    return ctx.monomial(n, m, c)

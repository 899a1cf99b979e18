import numpy as np
import pytest
from hypothesis import given, strategies as st

from windex import toeplitz as tp
from windex.centre import Strategy
from windex.errors import InverseResidualTooLarge, SpecError, SymbolVanishes
from windex.toeplitz import BandedToeplitz, GridSymbol
from windex.twisted import AlgebraContext
from windex.winding import wind

coef = st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False)
symbols = st.dictionaries(st.integers(-3, 3), coef, max_size=5).map(BandedToeplitz)


def dense_product_block(a, b, n, big=80):
    """Top-left block of T_a T_b from a large square truncation (exact away from the far corner)."""
    return (a.window(big) @ b.window(big))[:n, :n]


@given(symbols, symbols)
def test_product_window_matches_large_truncation(a, b):
    n = a.band + b.band + 2
    assert np.allclose(tp.product_window(a, b, n), dense_product_block(a, b, n), atol=1e-12)


@pytest.mark.parametrize("n", [1, 2, 5])
def test_shift_commutator_traces(n):
    zn, zbar = BandedToeplitz.monomial(n), BandedToeplitz.monomial(-n)
    assert tp.commutator_trace(zn, zbar) == pytest.approx(-n)
    assert tp.commutator_trace(zbar, zn) == pytest.approx(n)


@given(symbols, symbols)
def test_matches_closed_form_and_trace_formula(a, b):
    exact = tp.commutator_trace(a, b)
    assert exact == pytest.approx(tp.classical_commutator_trace(a, b), abs=1e-10)
    assert exact == pytest.approx(tp.ORIENTATION * tp.trace_formula(a, b), abs=1e-10)


def test_orientation_is_calibrated_to_minus_one():
    assert tp.ORIENTATION == -1


@given(symbols, symbols, st.integers(0, 6))
def test_window_independence(a, b, extra):
    n0 = a.band + b.band + 1
    assert tp.commutator_trace(a, b, n0 + extra) == pytest.approx(tp.commutator_trace(a, b, n0), abs=1e-10)


@given(symbols, symbols, symbols, coef)
def test_bilinear_and_antisymmetric(a, b, c, s):
    ab = tp.commutator_trace(a, b)
    assert tp.commutator_trace(b, a) == pytest.approx(-ab, abs=1e-10)
    scaled = BandedToeplitz({j: s * v for j, v in a.symbol.items()})
    summed = BandedToeplitz({j: a.coeff(j) + c.coeff(j) for j in set(a.symbol) | set(c.symbol)})
    assert tp.commutator_trace(scaled, b) == pytest.approx(s * ab, abs=1e-9)
    assert tp.commutator_trace(summed, b) == pytest.approx(ab + tp.commutator_trace(c, b), abs=1e-9)


def test_window_below_band_sum_rejected():
    with pytest.raises(ValueError):
        tp.commutator_trace(BandedToeplitz.monomial(2), BandedToeplitz.monomial(-1), 3)


@pytest.mark.parametrize("root, expected", [(2.0, 0), (-3j, 0), (0.5, -1)])
def test_numeric_index_of_linear_symbol(root, expected):
    a = BandedToeplitz({1: 1, 0: -root})
    if abs(root) > 1:
        inv = tp.geometric_inverse(root, 80)
    else:
        # 1 / (z - r) = z^-1 sum (r / z)^k
        inv = BandedToeplitz({-(k + 1): root ** k for k in range(80)})
    assert tp.symbol_residual(a, inv) < 1e-15
    assert tp.numeric_index(a, inv) == pytest.approx(expected, abs=1e-12)


def test_numeric_index_rejects_poor_inverse():
    with pytest.raises(InverseResidualTooLarge):
        tp.numeric_index(BandedToeplitz({1: 1, 0: -2}), tp.geometric_inverse(2, 10))


def test_hardy_projection():
    h = tp.hardy_projection(range(-6, 7))
    assert np.allclose(h.H @ h.H, np.eye(13))
    assert np.allclose(h.P @ h.P, h.P)
    a = BandedToeplitz({-2: 1, 0: 0.5, 1: 2j})
    assert np.allclose(h.compress(a), a.window(7))


def test_banded_json():
    a = BandedToeplitz({-1: 1 - 1j, 2: 3})
    assert BandedToeplitz.from_json(a.to_json()) == a
    with pytest.raises(SpecError) as err:
        BandedToeplitz.from_json({"coeffs": {"1.5": [1, 0]}}, "a")
    assert err.value.path == "a.coeffs[1.5]"
    with pytest.raises(SpecError):
        BandedToeplitz.from_json({"coeffs": {"1": [1]}})


# ---- grid winding ----

def test_numeric_wind_of_monomials():
    mu = 0.37
    assert tp.numeric_wind(GridSymbol.parse("z^2*w"), mu, 1e-4, 64).real == pytest.approx(-(2 + mu), abs=1e-3)
    assert tp.numeric_wind(GridSymbol.parse("w**-1"), mu, 1e-4, 64).real == pytest.approx(mu, abs=1e-3)


def test_numeric_wind_error_is_first_order():
    f = GridSymbol.from_terms({(1, 0): 1, (0, 0): 0.2, (0, 1): 0.1})
    exact = -1.0
    e1 = abs(tp.numeric_wind(f, 0.6, 1e-3, 128) - exact)
    e2 = abs(tp.numeric_wind(f, 0.6, 5e-4, 128) - exact)
    assert e1 / e2 == pytest.approx(2.0, rel=0.05)
    rep = tp.numeric_wind_report(f, 0.6, 1e-3, 128)
    assert abs(rep["extrapolated"] - exact) < e2 / 10


def test_numeric_wind_refuses_vanishing_symbol():
    with pytest.raises(SymbolVanishes):
        tp.numeric_wind(GridSymbol.parse("z - 1"), 0.3)


def test_consistency_triangle():
    """Grid quadrature, algebraic winding and Toeplitz index for z - 0.3."""
    mu = 0.25
    grid = tp.numeric_wind(GridSymbol.parse("z - 0.3"), mu, 1e-5, 128).real
    ctx = AlgebraContext.kronecker(mu)
    u, near = ctx.U, ctx.one() - ctx.U.adjoint() * 0.3
    algebraic = wind(u * near, Strategy.PRODUCT, 1e-12, [u, near]).value.values[0].real
    a = BandedToeplitz({1: 1, 0: -0.3})
    inv = BandedToeplitz({-(k + 1): 0.3 ** k for k in range(60)})
    toeplitz = tp.numeric_index(a, inv).real
    assert grid == pytest.approx(algebraic, abs=1e-3)
    assert toeplitz == pytest.approx(tp.ORIENTATION * -algebraic, abs=1e-12)


def test_grid_symbol_parsing():
    f = GridSymbol.parse("2*z^2*w - I")
    g = GridSymbol.from_terms({(2, 1): 2, (0, 0): -1j})
    z, w = tp.torus_grid(8)
    assert np.allclose(f(z, w), g(z, w))
    with pytest.raises(SpecError):
        GridSymbol.parse("z + q")
    with pytest.raises(SpecError):
        GridSymbol.parse("z +* w")


def test_grid_symbol_json_duplicates():
    doc = {"terms": [{"n": 1, "m": 0, "re": 1}, {"n": 1, "m": 0, "re": 2}]}
    with pytest.raises(SpecError, match=r"duplicate term \(n,m\)=\(1, 0\)"):
        GridSymbol.from_json(doc)
    ok = GridSymbol.from_json({"terms": [{"n": 0, "m": 1, "re": 1, "im": 0}]})
    assert ok(np.array(1.0), np.array(1j)) == pytest.approx(1j)

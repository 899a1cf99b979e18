import numpy as np
import pytest
from hypothesis import given, strategies as st

from windex.centre import (CentreElement, Model, Strategy, exp_i, from_grid, invert,
                           sup_norm_bounds, to_grid)
from windex.errors import ModelMismatch, NotInvertible, SpecError

coef = st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False)
laurent = st.dictionaries(st.integers(-4, 4), coef, max_size=6).map(CentreElement.laurent)
ANGLES = np.linspace(0, 1, 37, endpoint=False)


@given(laurent, laurent)
def test_laurent_product_is_pointwise(a, b):
    assert np.allclose((a * b).evaluate(ANGLES), a.evaluate(ANGLES) * b.evaluate(ANGLES), atol=1e-11)


@given(laurent)
def test_adjoint_is_pointwise_conjugate(a):
    assert np.allclose(a.adjoint().evaluate(ANGLES), np.conj(a.evaluate(ANGLES)), atol=1e-12)


@given(laurent)
def test_real_part_is_self_adjoint(a):
    assert a.real_part().is_self_adjoint(1e-12)
    assert (a.real_part() + a.imag_part() * 1j).max_coeff_diff(a) < 1e-12


def test_trimming_keeps_support_tight():
    c = CentreElement.laurent({-3: 1e-16, 0: 2, 2: 1, 5: 0})
    assert c.support == (0, 2)
    assert CentreElement.laurent({1: 1}) * CentreElement.laurent({-1: 1}) == CentreElement.laurent({0: 1})


def test_models_do_not_mix():
    with pytest.raises(ModelMismatch):
        CentreElement.scalar(1) + CentreElement.finite([1, 2])
    with pytest.raises(ModelMismatch):
        CentreElement.finite([1, 2]) * CentreElement.finite([1, 2, 3])


def test_exact_inverse_of_monomial_and_function():
    w = CentreElement.laurent({3: 2j})
    assert invert(w, Strategy.EXACT) == CentreElement.laurent({-3: -0.5j})
    f = CentreElement.finite([1, 2j, -4])
    assert np.allclose(invert(f).values, [1, -0.5j, -0.25])
    with pytest.raises(NotInvertible):
        invert(CentreElement.finite([1, 0]))
    with pytest.raises(NotInvertible):
        invert(CentreElement.laurent({0: 1, 1: 0.2}), Strategy.EXACT)


@pytest.mark.parametrize("strategy", [Strategy.NEUMANN, Strategy.GRIDFFT, Strategy.AUTO])
def test_inverse_residual(strategy):
    c = CentreElement.laurent({-1: 0.2, 0: 1, 2: -0.3j})
    inv = invert(c, strategy, 1e-12)
    assert (c * inv - c.like(1)).upper() <= 1e-12


def test_gridfft_beyond_neumann():
    # |1 - c| >= 1 but c has no zeros on the circle
    c = CentreElement.laurent({0: 3, 1: 1.4})
    with pytest.raises(NotInvertible):
        invert(c, Strategy.NEUMANN)
    inv = invert(c, Strategy.GRIDFFT, 1e-10)
    assert (c * inv - c.like(1)).upper() <= 1e-10


def test_geometric_series_oracle():
    # 1 / (1 - x W) = sum x^k W^k
    x = 0.5
    inv = invert(CentreElement.laurent({0: 1, 1: -x}), Strategy.NEUMANN, 1e-14)
    for k in range(10):
        assert inv.coeffs[k] == pytest.approx(x ** k, abs=1e-13)


def test_sup_norm_bounds_bracket_the_grid_maximum():
    c = CentreElement.laurent({0: 1, 1: 1})
    lo, hi = sup_norm_bounds(c)
    assert lo <= 2 <= hi + 1e-12 and lo == pytest.approx(2)


@given(laurent)
def test_grid_round_trip(a):
    b = from_grid(to_grid(a, 32))
    assert a.max_coeff_diff(b) < 1e-12


def test_exp_i_is_pointwise():
    c = CentreElement.laurent({-1: 0.3, 0: 0.5, 1: 0.3})
    e = exp_i(c, 0.7)
    assert np.allclose(e.evaluate(ANGLES), np.exp(-2j * np.pi * 0.7 * c.evaluate(ANGLES)), atol=1e-10)
    f = CentreElement.finite([0.25, 1.0])
    assert np.allclose(exp_i(f, 1).values, [-1j, 1])


def test_json_round_trip_and_errors():
    for c in (CentreElement.scalar(1 - 2j), CentreElement.finite([1, 2j]),
              CentreElement.laurent({-2: 1, 3: 0.5j})):
        assert CentreElement.from_json(c.to_json()) == c
    with pytest.raises(SpecError) as err:
        CentreElement.from_json({"model": "laurent", "coeffs": {"x": [1, 0]}}, "eta")
    assert err.value.path == "eta.coeffs"
    with pytest.raises(SpecError):
        CentreElement.from_json({"model": "banana"})


def test_model_enum_values():
    assert {m.value for m in Model} == {"scalar", "finite", "laurent"}

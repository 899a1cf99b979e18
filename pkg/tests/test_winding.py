from fractions import Fraction
from unittest import mock

import numpy as np
import pytest
from hypothesis import given, strategies as st

from windex import winding as wd
from windex.centre import CentreElement, Strategy
from windex.errors import MorphismMismatch, NotInvertible, SelfAdjointnessViolation
from windex.twisted import AlgebraContext, Inverse, random_element, random_monomial, random_small
from windex.winding import (Morphism, check_index_fibering, check_morphism, index, monomial_index,
                            wind, wind_batch)

MU = 0.37
KRONECKER = AlgebraContext.kronecker(MU)
TORUS = AlgebraContext.torus(Fraction(1, 3), MU)
BUNDLE = AlgebraContext.bundle([0.2, -0.7, 1.3, 0.05], Fraction(2, 5))
HEIS = AlgebraContext.heisenberg(MU)
ALL = [KRONECKER, TORUS, BUNDLE, HEIS]
seeds = st.integers(0, 2 ** 32 - 1)


def test_golden_windings():
    assert wind(KRONECKER.U).value.max_coeff_diff(CentreElement.scalar(-1)) < 1e-15
    assert wind(KRONECKER.V).value.max_coeff_diff(CentreElement.scalar(-MU)) < 1e-15
    assert wind(TORUS.V * TORUS.U).value.max_coeff_diff(CentreElement.scalar(-MU - 1)) < 1e-15
    assert wind(KRONECKER.one()).value.max_coeff_diff(CentreElement.scalar(0)) == 0


def test_golden_heisenberg_index():
    third = MU / 3
    expected = CentreElement.laurent({-1: third, 0: third, 1: third})
    assert index(HEIS.V).max_coeff_diff(expected) < 1e-15
    assert index(HEIS.U).max_coeff_diff(CentreElement.laurent({0: 1})) < 1e-15
    assert index(HEIS.W).max_coeff_diff(CentreElement.laurent({})) < 1e-15


def test_bundle_index_is_pointwise():
    values = BUNDLE.eta.values
    got = index(BUNDLE.V ** 2 * BUNDLE.U.adjoint())
    assert np.allclose(got.values, 2 * values - 1, atol=1e-14)


@pytest.mark.parametrize("ctx", ALL, ids=lambda c: c.cocycle.value)
def test_monomial_closed_form(ctx):
    rng = np.random.default_rng(1)
    for _ in range(10):
        a = random_monomial(ctx, rng)
        (n, m), = a.terms
        assert index(a).max_coeff_diff(monomial_index(ctx, n, m)) < 1e-12


@pytest.mark.parametrize("ctx", ALL, ids=lambda c: c.cocycle.value)
def test_near_identity_has_zero_winding(ctx):
    rng = np.random.default_rng(2)
    a = ctx.one() + random_small(ctx, rng, 0.3, radius=2)
    res = wind(a)
    assert res.strategy_used is Strategy.NEUMANN
    assert res.value.upper() < 1e-10


@given(seeds)
def test_homomorphism_and_antisymmetry(seed):
    rng = np.random.default_rng(seed)
    ctx = TORUS
    b = random_monomial(ctx, rng)
    monomial = random_monomial(ctx, rng)
    near = ctx.one() + random_small(ctx, rng, 0.3, radius=2)
    x = monomial * near
    wx = wind(x, Strategy.PRODUCT, 1e-10, [monomial, near]).value
    assert wx.max_coeff_diff(wind(monomial).value + wind(near).value) < 1e-10
    star = wind(x.adjoint(), Strategy.PRODUCT, 1e-10, [near.adjoint(), monomial.adjoint()]).value
    assert star.max_coeff_diff(-wx.adjoint()) < 1e-10
    assert wind(b * b).value.max_coeff_diff(wind(b).value * 2) < 1e-12


def test_winding_value_is_self_adjoint_in_heisenberg():
    rng = np.random.default_rng(3)
    m = random_monomial(HEIS, rng)
    near = HEIS.one() + random_small(HEIS, rng, 0.3, radius=2)
    value = wind(m * near, Strategy.PRODUCT, 1e-10, [m, near]).value
    assert value.is_self_adjoint(1e-10)


def test_wrong_inverse_is_not_symmetrised():
    bogus = Inverse(KRONECKER.U.adjoint() * 1j, 0.0, Strategy.MONOMIAL)
    with mock.patch.object(wd, "invert_certified", return_value=bogus):
        with pytest.raises(SelfAdjointnessViolation):
            wind(KRONECKER.U)


def test_not_invertible_surfaces():
    with pytest.raises(NotInvertible):
        wind(KRONECKER.one() + KRONECKER.U * 3)


def test_batch_is_order_stable(monkeypatch):
    rng = np.random.default_rng(4)
    elements = [random_monomial(TORUS, rng) for _ in range(6)]
    serial = wind_batch(elements)
    monkeypatch.setenv("WINDEX_THREADS", "3")
    threaded = wind_batch(elements)
    assert [r.value for r in serial] == [r.value for r in threaded]


# ---- morphisms ----

def test_morphism_parse():
    assert Morphism.parse(HEIS, "quotient").target == AlgebraContext(
        "trivial", CentreElement.scalar(MU))
    assert Morphism.parse(BUNDLE, "eval:2").target.eta == CentreElement.scalar(1.3)
    assert Morphism.parse(TORUS, "identity").target == TORUS
    with pytest.raises(ValueError):
        Morphism.parse(TORUS, "eval:x")
    with pytest.raises(ValueError):
        Morphism.parse(TORUS, "project")
    with pytest.raises(MorphismMismatch):
        Morphism.parse(HEIS, "eval:0")
    with pytest.raises(MorphismMismatch):
        Morphism.parse(BUNDLE, "eval:4")
    with pytest.raises(MorphismMismatch):
        Morphism.parse(TORUS, "quotient")


def morphisms():
    return [Morphism.heisenberg_quotient(HEIS), Morphism.evaluation(BUNDLE, 1),
            Morphism.evaluation(BUNDLE, 3), Morphism.identity(TORUS)]


@pytest.mark.parametrize("m", morphisms(), ids=lambda m: m.describe())
def test_morphism_is_multiplicative_and_commutes_with_trace_and_flow(m):
    rng = np.random.default_rng(8)
    a, b = random_element(m.source, rng, radius=2), random_element(m.source, rng, radius=2)
    assert m.apply(a * b).distance(m.apply(a) * m.apply(b)) < 1e-10
    assert m.apply(a.adjoint()).distance(m.apply(a).adjoint()) < 1e-12
    tr, fl = check_morphism(m, a, 0.3)
    assert tr < 1e-12 and fl < 1e-8


@pytest.mark.parametrize("m", morphisms(), ids=lambda m: m.describe())
def test_index_fibering(m):
    rng = np.random.default_rng(9)
    ctx = m.source
    mono = random_monomial(ctx, rng)
    near = ctx.one() + random_small(ctx, rng, 0.3, radius=2)
    rep = check_index_fibering(m, mono * near, factors=[mono, near])
    assert rep.passed, rep.deviation
    assert rep.to_json()["pass"] is True


def test_fibering_with_a_quotient_golden():
    rep = check_index_fibering(Morphism.heisenberg_quotient(HEIS), HEIS.V * HEIS.U)
    assert rep.target.max_coeff_diff(CentreElement.scalar(MU + 1)) < 1e-14
    assert rep.deviation < 1e-14

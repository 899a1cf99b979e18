from fractions import Fraction
from unittest import mock

import numpy as np
import pytest
from hypothesis import given, strategies as st

from windex import twisted as tw
from windex.centre import CentreElement, Strategy
from windex.errors import ContextMismatch, NotInvertible, SpecError
from windex.twisted import (AlgebraContext, Cocycle, TwistedElement, adjoint, derivation, flow,
                            invert_certified, random_element, random_monomial, random_small,
                            trace_of_product)

CONTEXTS = {
    "kronecker": AlgebraContext.kronecker(0.41),
    "torus": AlgebraContext.torus(Fraction(2, 5), 0.3),
    "irrational": AlgebraContext.torus((5 ** 0.5 - 1) / 2, -1.2),
    "bundle": AlgebraContext.bundle([0.2, -0.7, 1.3], Fraction(1, 3)),
    "heisenberg": AlgebraContext.heisenberg(0.37),
}
contexts = st.sampled_from(sorted(CONTEXTS))
seeds = st.integers(0, 2 ** 32 - 1)


def draw(name, seed, radius=2):
    rng = np.random.default_rng(seed)
    return random_element(CONTEXTS[name], rng, radius=radius)


def brute_product(a, b):
    """Sum of monomial-by-monomial products, straight from the crossing rule."""
    ctx = a.context
    out = ctx.zero()
    for (n1, m1), c1 in a.terms.items():
        for (n2, m2), c2 in b.terms.items():
            out = out + ctx.monomial(n1 + n2, m1 + m2, c1 * c2 * ctx.crossing(m1, n2))
    return out


# ---- independent representations ----

def clock_shift(theta_frac):
    q = theta_frac.denominator
    omega = np.exp(2j * np.pi * float(theta_frac))
    clock = np.diag(omega ** np.arange(q))
    shift = np.roll(np.eye(q), 1, axis=0)
    return clock, shift


def matrix_rep(a, clock, shift):
    mp = np.linalg.matrix_power
    inv = np.linalg.inv
    out = np.zeros_like(clock)
    for (n, m), c in a.terms.items():
        Vn = mp(clock, n) if n >= 0 else mp(inv(clock), -n)
        Um = mp(shift, m) if m >= 0 else mp(inv(shift), -m)
        out = out + complex(c.values[0]) * Vn @ Um
    return out


def test_clock_shift_relation_pins_torus_orientation():
    ctx = CONTEXTS["torus"]
    clock, shift = clock_shift(ctx.theta)
    V, U = matrix_rep(ctx.V, clock, shift), matrix_rep(ctx.U, clock, shift)
    assert np.allclose(V @ U, np.exp(2j * np.pi * 0.4) * U @ V)
    assert np.allclose(matrix_rep(ctx.V * ctx.U, clock, shift), V @ U)
    assert np.allclose(matrix_rep(ctx.U * ctx.V, clock, shift), U @ V)


@given(seeds, seeds)
def test_torus_product_matches_clock_shift_matrices(s1, s2):
    ctx = CONTEXTS["torus"]
    a, b = draw("torus", s1), draw("torus", s2)
    clock, shift = clock_shift(ctx.theta)
    lhs = matrix_rep(a * b, clock, shift)
    assert np.allclose(lhs, matrix_rep(a, clock, shift) @ matrix_rep(b, clock, shift), atol=1e-10)
    assert np.allclose(matrix_rep(a.adjoint(), clock, shift), matrix_rep(a, clock, shift).conj().T,
                       atol=1e-10)


def heis_matrix(n, m, p):
    """V^n U^m W^p in the integer Heisenberg group: U = E12, V = E23, W = E13 steps."""
    x = lambda k: np.array([[1, k, 0], [0, 1, 0], [0, 0, 1]], dtype=np.int64)
    y = lambda k: np.array([[1, 0, 0], [0, 1, k], [0, 0, 1]], dtype=np.int64)
    z = lambda k: np.array([[1, 0, k], [0, 1, 0], [0, 0, 1]], dtype=np.int64)
    return y(n) @ x(m) @ z(p)


def group_algebra(a):
    out = {}
    for (n, m), c in a.terms.items():
        for p, v in c.coeffs.items():
            key = heis_matrix(n, m, p).tobytes()
            out[key] = out.get(key, 0) + v
    return out


def test_heisenberg_relation_pins_cocycle():
    ctx = CONTEXTS["heisenberg"]
    assert ctx.U * ctx.V == ctx.W * ctx.V * ctx.U
    x, y, z = heis_matrix(0, 1, 0), heis_matrix(1, 0, 0), heis_matrix(0, 0, 1)
    assert np.array_equal(x @ y, z @ y @ x)


@given(seeds, seeds)
def test_heisenberg_product_matches_group_law(s1, s2):
    a, b = draw("heisenberg", s1), draw("heisenberg", s2)
    conv = {}
    for (n1, m1), c1 in a.terms.items():
        for p1, v1 in c1.coeffs.items():
            g = heis_matrix(n1, m1, p1)
            for (n2, m2), c2 in b.terms.items():
                for p2, v2 in c2.coeffs.items():
                    key = (g @ heis_matrix(n2, m2, p2)).tobytes()
                    conv[key] = conv.get(key, 0) + v1 * v2
    got = group_algebra(a * b)
    for key in set(conv) | set(got):
        assert abs(conv.get(key, 0) - got.get(key, 0)) < 1e-12


# ---- algebraic properties ----

@given(contexts, seeds)
def test_associativity(name, seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_element(CONTEXTS[name], rng, radius=2) for _ in range(3))
    assert ((a * b) * c).distance(a * (b * c)) < 1e-10


@given(contexts, seeds)
def test_adjoint_is_anti_multiplicative_involution(name, seed):
    rng = np.random.default_rng(seed)
    a, b = (random_element(CONTEXTS[name], rng, radius=2) for _ in range(2))
    assert (a * b).adjoint().distance(b.adjoint() * a.adjoint()) < 1e-10
    assert a.adjoint().adjoint().distance(a) < 1e-13
    assert adjoint(a).distance(a.adjoint()) == 0


@given(contexts, seeds)
def test_trace_is_tracial_and_shortcut_agrees(name, seed):
    rng = np.random.default_rng(seed)
    a, b = (random_element(CONTEXTS[name], rng, radius=2) for _ in range(2))
    assert (a * b).trace().max_coeff_diff((b * a).trace()) < 1e-11
    assert trace_of_product(a, b).max_coeff_diff((a * b).trace()) < 1e-11


@given(contexts, seeds)
def test_derivation_is_leibniz(name, seed):
    rng = np.random.default_rng(seed)
    a, b = (random_element(CONTEXTS[name], rng, radius=2) for _ in range(2))
    lhs = derivation(a * b)
    rhs = derivation(a) * b + a * derivation(b)
    assert lhs.distance(rhs) < 1e-9
    assert derivation(a).adjoint().distance(derivation(a.adjoint())) < 1e-9


@given(contexts, seeds, st.floats(-1, 1))
def test_flow_is_an_automorphism(name, seed, t):
    rng = np.random.default_rng(seed)
    a, b = (random_element(CONTEXTS[name], rng, radius=2) for _ in range(2))
    assert flow(a * b, t).distance(flow(a, t) * flow(b, t)) < 1e-8
    assert flow(a, t).trace().max_coeff_diff(a.trace()) < 1e-9


@pytest.mark.parametrize("name", sorted(CONTEXTS))
def test_derivation_is_generator_of_flow(name):
    a = draw(name, 3)
    h = 1e-6
    fd = (flow(a, h) - flow(a, -h)) * (1 / (2 * h))
    assert fd.distance(derivation(a)) < 1e-4 * max(1.0, derivation(a).norm1())


@pytest.mark.parametrize("name", sorted(CONTEXTS))
@pytest.mark.parametrize("bias", [0.0, float("inf")], ids=["fft", "atoms"])
def test_both_product_kernels_agree_with_brute_force(name, bias):
    a, b = draw(name, 11, radius=5), draw(name, 12, radius=4)
    kernel = "_product_fft" if CONTEXTS[name].model.value == "laurent" else "_product_fft_pointwise"
    with mock.patch.object(tw, "FFT_BIAS", bias), \
            mock.patch.object(tw, kernel, wraps=getattr(tw, kernel)) as spy:
        fast = a * b
        slow = b * a
    assert spy.called == (bias == 0.0)
    assert fast.distance(brute_product(a, b)) < 1e-9
    assert slow.distance(brute_product(b, a)) < 1e-9


@given(contexts, seeds)
def test_small_products_agree_with_brute_force(name, seed):
    a, b = draw(name, seed), draw(name, seed + 1)
    assert (a * b).distance(brute_product(a, b)) < 1e-11


# ---- inversion ----

@pytest.mark.parametrize("name", sorted(CONTEXTS))
def test_monomial_inverse_is_two_sided(name):
    rng = np.random.default_rng(5)
    ctx = CONTEXTS[name]
    for _ in range(10):
        a = random_monomial(ctx, rng)
        inv = invert_certified(a, Strategy.MONOMIAL)
        assert inv.strategy is Strategy.MONOMIAL
        assert (inv.value * a).distance(ctx.one()) < 1e-12


@pytest.mark.parametrize("name", sorted(CONTEXTS))
def test_neumann_inverse_residual(name):
    rng = np.random.default_rng(6)
    ctx = CONTEXTS[name]
    a = ctx.one() - random_small(ctx, rng, 0.3, radius=2)
    inv = invert_certified(a, Strategy.AUTO, 1e-10)
    assert inv.strategy is Strategy.NEUMANN
    assert inv.residual <= 1e-10
    assert (inv.value * a - ctx.one()).norm1() < 1e-9


def test_product_strategy_needs_matching_factors():
    ctx = CONTEXTS["torus"]
    f1, f2 = ctx.U * 2, ctx.one() + ctx.V * 0.2
    a = f1 * f2
    inv = invert_certified(a, Strategy.PRODUCT, 1e-10, [f1, f2])
    assert inv.residual <= 1e-10
    with pytest.raises(NotInvertible):
        invert_certified(a, Strategy.PRODUCT, 1e-10, [f2, f1 * 3])
    with pytest.raises(NotInvertible):
        invert_certified(ctx.one() + ctx.U * 2, Strategy.AUTO)


def test_central_monomial_with_non_monomial_coefficient():
    ctx = CONTEXTS["heisenberg"]
    a = ctx.central(CentreElement.laurent({0: 2, 1: 1})) * ctx.V
    inv = invert_certified(a, Strategy.MONOMIAL)
    assert inv.residual < 1e-12


# ---- structure and I/O ----

def test_contexts_must_match():
    with pytest.raises(ContextMismatch):
        CONTEXTS["torus"].U * CONTEXTS["kronecker"].U


def test_heisenberg_requires_laurent_centre():
    with pytest.raises(ValueError, match="heisenberg cocycle requires laurent centre"):
        AlgebraContext(Cocycle.HEISENBERG, CentreElement.scalar(0.3))


@pytest.mark.parametrize("name", sorted(CONTEXTS))
def test_json_round_trip(name):
    a = draw(name, 9)
    b = TwistedElement.from_json(a.to_json())
    assert b.context == a.context and b.distance(a) == 0


def test_json_errors_name_the_field():
    ctx = CONTEXTS["kronecker"].to_json()
    with pytest.raises(SpecError) as err:
        TwistedElement.from_json({"context": ctx, "terms": [{"n": 1, "m": "x", "coeff": {}}]})
    assert err.value.path == "terms[0].m"
    with pytest.raises(SpecError) as err:
        TwistedElement.from_json({"context": {"cocycle": "torus", "eta": ctx["eta"], "theta": "1/0"}, "terms": []})
    assert err.value.path == "context.theta"

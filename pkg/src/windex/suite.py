"""Executable acceptance battery.

Every criterion is a group of named checks, each holding the worst residual
seen and its own tolerance.  Everything is seeded, so two runs with one seed
report identical residuals; wall-clock times are kept apart from the report
unless asked for.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import toeplitz as tp
from . import twisted as tw
from . import winding as wd
from . import zlab
from .centre import CentreElement, Strategy
from .twisted import AlgebraContext, Cocycle

MUS = (0.37, 2.0, -1.5)
GOLDEN_THETAS = (Fraction(1, 3), (math.sqrt(5) - 1) / 2)


class Checks:
    """Worst residual per named check."""

    def __init__(self):
        self.items = {}

    def see(self, name, residual, tol, where=None):
        residual = float(residual)
        cur = self.items.get(name)
        if cur is None or residual > cur["residual"] or math.isnan(residual):
            self.items[name] = {"residual": residual, "tol": tol, "where": where}

    def flag(self, name, ok, value=None):
        self.see(name, 0.0 if ok else 1.0, 0.0, value)

    def worst(self):
        """(name, entry) with the largest residual-to-tolerance ratio."""
        def ratio(e):
            if math.isnan(e["residual"]):
                return math.inf
            if e["tol"] == 0:
                return 0.0 if e["residual"] == 0 else math.inf
            return e["residual"] / e["tol"]
        return max(self.items.items(), key=lambda kv: ratio(kv[1]))

    @property
    def passed(self):
        return all(e["residual"] <= e["tol"] for e in self.items.values())

    def to_json(self):
        out = {}
        for name, e in sorted(self.items.items()):
            out[name] = {"residual": e["residual"], "tol": e["tol"], "pass": e["residual"] <= e["tol"]}
            if e["where"] is not None and not out[name]["pass"]:
                out[name]["worst_at"] = str(e["where"])
        return out


@dataclass
class CriterionResult:
    id: int
    name: str
    passed: bool
    residual: float
    tol: float
    checks: dict = field(default_factory=dict)
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.id}. {self.name}: worst residual {self.residual:.3g} (tol {self.tol:g})"

    def to_json(self, timing=False):
        out = {"id": self.id, "name": self.name, "pass": self.passed, "residual": self.residual,
               "tol": self.tol, "checks": self.checks, "detail": self.detail}
        if timing:
            out["seconds"] = self.seconds
        return out


# ---- random contexts and invertible elements ----

def random_contexts(rng):
    """One context of each family, with seeded flow weights."""
    mu = lambda: float(rng.uniform(-2, 2))
    return [
        AlgebraContext.kronecker(mu()),
        AlgebraContext.torus(Fraction(1, 3), mu()),
        AlgebraContext.torus((math.sqrt(5) - 1) / 2, mu()),
        AlgebraContext.bundle([mu() for _ in range(4)], Fraction(2, 5)),
        AlgebraContext.heisenberg(mu()),
    ]


def _heis(ctx):
    return ctx.cocycle is Cocycle.HEISENBERG


def near_one(ctx, rng, lo, hi):
    """1 + x with |x|_1 drawn uniformly from [lo, hi].

    Heisenberg perturbations are kept to support radius 1: their inverses
    spread in the W-direction like m n and dominate both time and memory.
    """
    radius = 1 if _heis(ctx) else 3
    x = tw.random_small(ctx, rng, float(rng.uniform(lo, hi)), radius=radius, p_radius=1)
    return ctx.one() + x


def _prod(factors):
    out = factors[0]
    for f in factors[1:]:
        out = out * f
    return out


def invertible_factors(ctx, strategy, rng):
    """Factors of a random element invertible under ``strategy``."""
    if strategy is Strategy.MONOMIAL:
        return [tw.random_monomial(ctx, rng)]
    if strategy is Strategy.NEUMANN:
        return [near_one(ctx, rng, 0.05, 0.3 if _heis(ctx) else 0.45)]
    # monomial times a Neumann-ball element; Heisenberg pairs get one ball
    # factor in total, so that no product of two large inverses is formed
    return [tw.random_monomial(ctx, rng), near_one(ctx, rng, 0.05, 0.6 if _heis(ctx) else 0.89)]


def _wind(factors, strategy):
    """Wind a product of factors: one factor under ``strategy`` (``auto`` when
    that is ``product``), several through the product strategy."""
    a = _prod(factors)
    if len(factors) > 1:
        return wd.wind(a, Strategy.PRODUCT, factors=factors)
    return wd.wind(a, Strategy.AUTO if strategy is Strategy.PRODUCT else strategy)


# ---- criteria ----

def criterion_golden_windings(seed, checks):
    for mu in MUS:
        for ctx in [AlgebraContext.kronecker(mu)] + [AlgebraContext.torus(t, mu) for t in GOLDEN_THETAS]:
            checks.see("wind(U) = -1", abs(complex(wd.wind(ctx.U).value.values[0]) + 1), 1e-12, ctx)
            checks.see("wind(V) = -mu", abs(complex(wd.wind(ctx.V).value.values[0]) + mu), 1e-12, ctx)
        expected = CentreElement.laurent({-1: -mu / 3, 0: -mu / 3, 1: -mu / 3})
        h = AlgebraContext.heisenberg(mu)
        checks.see("heisenberg wind(V)", wd.wind(h.V).value.max_coeff_diff(expected), 1e-12, mu)


def criterion_golden_index(seed, checks):
    for mu in MUS:
        h = AlgebraContext.heisenberg(mu)
        eta = CentreElement.laurent({-1: mu / 3, 0: mu / 3, 1: mu / 3})
        for n in range(-3, 4):
            for m in range(-3, 4):
                expected = eta * n + CentreElement.laurent({0: m})
                values = [wd.index(h.monomial(n, m, CentreElement.laurent({p: 1.0}))) for p in range(-3, 4)]
                for p, val in zip(range(-3, 4), values):
                    checks.see("index = n eta + m", val.max_coeff_diff(expected), 1e-12, (mu, n, m, p))
                checks.see("independent of p", max(v.max_coeff_diff(values[0]) for v in values), 1e-12,
                           (mu, n, m))


def criterion_homomorphism(seed, checks, pairs=100):
    rng = np.random.default_rng(seed)
    contexts = random_contexts(rng)
    for strategy in (Strategy.MONOMIAL, Strategy.NEUMANN, Strategy.PRODUCT):
        for i in range(pairs):
            ctx = contexts[i % len(contexts)]
            fa = invertible_factors(ctx, strategy, rng)
            if _heis(ctx) and strategy is Strategy.PRODUCT:
                fb = [tw.random_monomial(ctx, rng)]
            else:
                fb = invertible_factors(ctx, strategy, rng)
            wa, wb = _wind(fa, strategy), _wind(fb, strategy)
            ab = _prod(fa + fb)
            if strategy is Strategy.MONOMIAL:
                wab = wd.wind(ab, Strategy.MONOMIAL)
            elif strategy is Strategy.NEUMANN and (ctx.one() - ab).norm1() < 1:
                wab = wd.wind(ab, Strategy.NEUMANN)
            else:
                wab = _wind(fa + fb, Strategy.PRODUCT)
            checks.see(f"{strategy.value}: wind(ab) = wind(a) + wind(b)",
                       wab.value.max_coeff_diff(wa.value + wb.value), 1e-9, (ctx, i))
            # local constancy: a (1 + x) with |x|_1 < 0.9
            base = [tw.random_monomial(ctx, rng)] if _heis(ctx) else fa
            one_x = near_one(ctx, rng, 0.05, 0.6 if _heis(ctx) else 0.89)
            w_base = wa if base is fa else _wind(base, Strategy.MONOMIAL)
            w_moved = _wind(base + [one_x], Strategy.PRODUCT)
            checks.see(f"{strategy.value}: wind(a(1+x)) = wind(a)",
                       w_moved.value.max_coeff_diff(w_base.value), 1e-9, (ctx, i))


def criterion_derivation_traces(seed, checks, elements=200):
    rng = np.random.default_rng(seed)
    for ctx in random_contexts(rng):
        for i in range(elements):
            a = tw.random_element(ctx, rng, radius=2 if _heis(ctx) else 3, p_radius=1)
            if a.is_zero():
                continue
            da = tw.derivation(a)
            power = ctx.one()
            for k in range(4):
                # normalised by |delta(a)|_1 |a^k|_1, which bounds the trace
                t = tw.trace_of_product(da, power)
                checks.see(f"tau(delta(a) a^{k}) = 0", t.upper() / (da.norm1() * power.norm1()), 1e-12,
                           (ctx.cocycle.value, i))
                power = power * a


def criterion_fibering(seed, checks, elements=20):
    rng = np.random.default_rng(seed)
    eta = [float(v) for v in rng.uniform(-2, 2, size=4)]
    for theta in (None, Fraction(2, 5)):
        ctx = AlgebraContext.bundle(eta, theta)
        for i in range(elements):
            factors = [tw.random_monomial(ctx, rng), near_one(ctx, rng, 0.05, 0.89)]
            a = _prod(factors)
            for x0 in range(4):
                rep = wd.check_index_fibering(wd.Morphism.evaluation(ctx, x0), a,
                                              strategy=Strategy.PRODUCT, factors=factors)
                checks.see("evaluation at points", rep.deviation, 1e-9, (theta, i, x0))
    for mu in MUS:
        h = AlgebraContext.heisenberg(mu)
        quotient = wd.Morphism.heisenberg_quotient(h)
        kron = AlgebraContext.kronecker(mu)
        checks.flag("quotient target is C(T^2) with slope mu", quotient.target == kron, mu)
        for n in range(-3, 4):
            for m in range(-3, 4):
                p = int(rng.integers(-3, 4))
                a = h.monomial(n, m, CentreElement.laurent({p: 1.0}))
                left = quotient.apply_centre(wd.index(a))
                right = wd.index(kron.monomial(n, m))      # built directly in C(T^2)
                checks.see("heisenberg quotient vs Kronecker", left.max_coeff_diff(right), 1e-9, (mu, n, m))
                checks.see("heisenberg quotient via morphism",
                           wd.check_index_fibering(quotient, a).deviation, 1e-9, (mu, n, m))


def criterion_zlab(seed, checks, trials=200):
    for k, d in ((1, 1), (2, 2), (3, 2), (4, 3)):
        rep = zlab.run_battery(k, d, trials, seed)
        for name, v in rep.checks.items():
            checks.see(name, v["max_residual"], v["tol"], (k, d))


def criterion_toeplitz(seed, checks, pairs=50):
    rng = np.random.default_rng(seed)
    for n in range(1, 9):
        t = tp.commutator_trace(tp.BandedToeplitz.monomial(n), tp.BandedToeplitz.monomial(-n))
        checks.see("|tr[T_z^n, T_z^-n]| = n", abs(abs(t) - n), 0.0, n)
    signs = set()
    for i in range(pairs):
        a = tp.BandedToeplitz({j: complex(*rng.normal(size=2)) for j in range(-3, 4)})
        b = tp.BandedToeplitz({j: complex(*rng.normal(size=2)) for j in range(-3, 4)})
        ct = tp.commutator_trace(a, b)
        formula = tp.trace_formula(a, b)
        checks.see("helton-howe modulus", abs(abs(ct) - abs(formula)), 1e-8, i)
        checks.see("helton-howe with ORIENTATION", abs(ct - tp.ORIENTATION * formula), 1e-8, i)
        if abs(formula) > 1e-6:
            signs.add(int(np.sign((ct / formula).real)))
        base = a.band + b.band + 1
        for n in range(base, base + 12):
            checks.see("window independence", abs(tp.commutator_trace(a, b, n) - ct), 1e-12, (i, n))
    checks.flag("single consistent sign", signs == {tp.ORIENTATION}, sorted(signs))
    z2 = tp.BandedToeplitz({1: 1.0, 0: -2.0})
    checks.see("numeric_index(z - 2) = 0", abs(tp.numeric_index(z2, tp.geometric_inverse(2.0, 40))), 1e-6)


def criterion_numeric_winding(seed, checks):
    mu = 0.37
    w = tp.GridSymbol.parse("w")
    checks.see("numeric_wind(w) = -mu", abs(tp.numeric_wind(w, mu, 1e-3, 256) + mu), 0.02 * mu)
    for n in range(-2, 3):
        for m in range(-2, 3):
            expected = -(n + m * mu)
            got = tp.numeric_wind(tp.GridSymbol.from_terms({(n, m): 1.0}), mu, 1e-3, 256)
            if expected == 0:
                checks.see("monomial table", abs(got), 1e-12, (n, m))
            else:
                # relative error against the 2% band
                checks.see("monomial table (relative)", abs(got - expected) / abs(expected), 0.02, (n, m))
    e1 = abs(tp.numeric_wind(w, mu, 1e-3, 256) + mu)
    e2 = abs(tp.numeric_wind(w, mu, 5e-4, 256) + mu)
    ratio = e1 / e2
    checks.see("halving h halves the error", abs(ratio - 2.0), 0.4, ratio)


CRITERIA = [
    (1, "golden windings", criterion_golden_windings, 1.0),
    (2, "golden Heisenberg index", criterion_golden_index, None),
    (3, "homomorphism and local constancy", criterion_homomorphism, None),
    (4, "derivation trace identities", criterion_derivation_traces, None),
    (5, "morphism fibering", criterion_fibering, None),
    (6, "Z-Hilbert algebra lab battery", criterion_zlab, 30.0),
    (7, "Toeplitz trace oracle", criterion_toeplitz, None),
    (8, "numeric winding oracle", criterion_numeric_winding, None),
]


def run_criterion(cid, seed=7):
    _, name, fn, budget = next(c for c in CRITERIA if c[0] == cid)
    checks = Checks()
    start = time.perf_counter()
    try:
        fn(seed, checks)
        error = None
    except Exception as exc:     # a crash is a failed criterion, not a crashed suite
        error = f"{type(exc).__name__}: {exc}"
    elapsed = time.perf_counter() - start
    detail = {}
    if budget is not None:
        checks.flag(f"runtime under {budget:g} s", elapsed < budget)
        detail["time_budget_s"] = budget
    if error is not None:
        checks.flag("completed without error", False)
        detail["error"] = error
    worst_name, worst = checks.worst()
    detail["worst_check"] = worst_name
    return CriterionResult(cid, name, checks.passed, worst["residual"], worst["tol"],
                           checks.to_json(), detail, elapsed)


def run_suite(seed=7, only=None):
    """Criteria 1-8, then criterion 9: all of them passed within two minutes."""
    results = []
    start = time.perf_counter()
    for cid, *_ in CRITERIA:
        if only is None or cid in only:
            results.append(run_criterion(cid, seed))
    total = time.perf_counter() - start
    if only is None or 9 in only:
        failed = [r.id for r in results if not r.passed]
        ok = not failed and total < 120
        results.append(CriterionResult(9, "full suite under two minutes", ok, float(len(failed)), 0.0,
                                       {"no failures": {"residual": float(len(failed)), "tol": 0.0,
                                                        "pass": not failed},
                                        "runtime under 120 s": {"residual": 0.0 if total < 120 else 1.0,
                                                                "tol": 0.0, "pass": total < 120}},
                                       {"failed": failed, "time_budget_s": 120}, total))
    return results


__all__ = ["Checks", "CriterionResult", "CRITERIA", "run_criterion", "run_suite",
           "random_contexts", "invertible_factors", "near_one"]

"""A finite-dimensional Z-Hilbert algebra laboratory.

The algebra is A = C(X, M_d) for a k-point set X, with centre Z = C(X) acting
as scalar matrices and Z-trace tau(a)(x) = tr(a(x)) / d.  With the inner product
<a, b> = tau(a* b), A is its own Hilbert module, every density and completion
statement collapses to a span or rank statement, and the regular
representations, commutants, canonical trace and Dixmier-type Z-trace become
plain linear algebra.  Nothing here says anything about infinite dimension.

Module vectors xi in A are flattened row-major per point, so

    pi(a)  xi = a xi   ->  kron(a, I),
    pi'(a) xi = xi a   ->  kron(I, a^T).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .centre import CentreElement
from .errors import DecompositionMismatch

RANK_RTOL = 1e-9
POS_EPS = 1e-6


@dataclass(frozen=True)
class FiniteZAlgebra:
    k: int
    d: int

    def __post_init__(self):
        if self.k < 1 or self.d < 1:
            raise ValueError("k and d must be positive")

    @property
    def dim(self):
        return self.k * self.d * self.d

    def one(self):
        return np.broadcast_to(np.eye(self.d, dtype=complex), (self.k, self.d, self.d)).copy()

    def zero(self):
        return np.zeros((self.k, self.d, self.d), dtype=complex)

    def random(self, rng):
        shape = (self.k, self.d, self.d)
        return rng.normal(size=shape) + 1j * rng.normal(size=shape)

    def random_positive(self, rng, eps=POS_EPS):
        a = self.random(rng)
        return star(a) @ a + eps * self.one()

    def random_unitary(self, rng):
        """exp(i H) for a random Hermitian H at every point."""
        a = self.random(rng)
        h = (a + star(a)) / 2
        vals, vecs = np.linalg.eigh(h)
        return vecs @ (np.exp(1j * vals)[..., None] * star(vecs))

    def central(self, z):
        """The centre element z in C(X) embedded as z(x) * identity."""
        z = np.asarray(z.values if isinstance(z, CentreElement) else z, dtype=complex)
        return z[:, None, None] * np.eye(self.d)

    def indicator(self, x):
        e = self.zero()
        e[x] = np.eye(self.d)
        return e

    def tau(self, a):
        return CentreElement.finite(np.trace(a, axis1=1, axis2=2) / self.d)

    def inner(self, a, b):
        return self.tau(star(a) @ b)

    def norm(self, a):
        """Module norm ||<a, a>||^(1/2)."""
        return float(np.sqrt(np.max(np.abs(self.inner(a, a).values))))

    def basis(self):
        """Matrix units E_ij at every point: a linear basis of A."""
        out = []
        for x in range(self.k):
            for i in range(self.d):
                for j in range(self.d):
                    e = self.zero()
                    e[x, i, j] = 1
                    out.append(e)
        return out


def star(a):
    return np.conj(np.swapaxes(a, -1, -2))


def J(xi):
    return star(xi)


def vec(xi):
    return xi.reshape(xi.shape[0], -1)


def unvec(v, d):
    return v.reshape(v.shape[0], d, d)


@dataclass(frozen=True, eq=False)
class ModuleOperator:
    """A Z-linear map of A: one d^2 x d^2 block per point, with its adjoint."""

    blocks: np.ndarray
    adjoint_blocks: np.ndarray = field(default=None)

    def __post_init__(self):
        b = np.asarray(self.blocks, dtype=complex)
        object.__setattr__(self, "blocks", b)
        if self.adjoint_blocks is None:
            object.__setattr__(self, "adjoint_blocks", star(b))

    @property
    def d(self):
        return int(round(np.sqrt(self.blocks.shape[1])))

    def __call__(self, xi):
        return unvec(np.einsum("xij,xj->xi", self.blocks, vec(xi)), self.d)

    def __matmul__(self, other):
        return ModuleOperator(self.blocks @ other.blocks, other.adjoint_blocks @ self.adjoint_blocks)

    def __add__(self, other):
        return ModuleOperator(self.blocks + other.blocks, self.adjoint_blocks + other.adjoint_blocks)

    def __sub__(self, other):
        return ModuleOperator(self.blocks - other.blocks, self.adjoint_blocks - other.adjoint_blocks)

    def scale(self, c):
        return ModuleOperator(c * self.blocks, np.conj(c) * self.adjoint_blocks)

    def adjoint(self):
        return ModuleOperator(self.adjoint_blocks, self.blocks)

    def flat(self):
        return self.blocks.reshape(-1)

    def distance(self, other):
        return float(np.max(np.abs(self.blocks - other.blocks)))


def left_op(a):
    """pi(a): xi -> a xi."""
    d = a.shape[-1]
    return ModuleOperator(np.einsum("xij,kl->xikjl", a, np.eye(d)).reshape(a.shape[0], d * d, d * d))


def right_op(a):
    """pi'(a): xi -> xi a."""
    d = a.shape[-1]
    at = np.swapaxes(a, -1, -2)
    return ModuleOperator(np.einsum("ij,xkl->xikjl", np.eye(d), at).reshape(a.shape[0], d * d, d * d))


def commutator(S, T):
    return S @ T - T @ S


# ---- commutants ----

def _null_space(m):
    if m.shape[0] == 0:
        return np.eye(m.shape[1], dtype=complex)
    _, s, vh = np.linalg.svd(m, full_matrices=m.shape[0] < m.shape[1])
    if s.size == 0 or s[0] == 0:
        return np.eye(m.shape[1], dtype=complex)
    rank = int(np.sum(s > RANK_RTOL * s[0]))
    return np.conj(vh[rank:]).T


def commutant(ops):
    """Orthonormal basis (Frobenius) of {T blockwise : [T, S] = 0 for S in ops}."""
    ops = list(ops)
    k, D, _ = ops[0].blocks.shape
    eye = np.eye(D)
    out = []
    for x in range(k):
        # row-major vec: vec(T S) = kron(I, S^T) vec T, vec(S T) = kron(S, I) vec T
        rows = [np.kron(eye, S.blocks[x].T) - np.kron(S.blocks[x], eye) for S in ops]
        ns = _null_space(np.vstack(rows))
        for col in ns.T:
            blocks = np.zeros((k, D, D), dtype=complex)
            blocks[x] = col.reshape(D, D)
            out.append(ModuleOperator(blocks))
    return out


def span_matrix(ops):
    return np.array([op.flat() for op in ops]).T


def membership_residual(ops, spanning):
    """Largest distance from an element of ``ops`` to span(``spanning``), relative."""
    basis = span_matrix(spanning)
    q, r = np.linalg.qr(basis)
    keep = np.abs(np.diag(r)) > RANK_RTOL * np.max(np.abs(np.diag(r)))
    q = q[:, keep]
    worst = 0.0
    for op in ops:
        v = op.flat()
        worst = max(worst, float(np.linalg.norm(v - q @ (np.conj(q).T @ v)) / max(np.linalg.norm(v), 1e-300)))
    return worst


def rank(ops):
    s = np.linalg.svd(span_matrix(ops), compute_uv=False)
    return int(np.sum(s > RANK_RTOL * s[0])) if s.size and s[0] > 0 else 0


def L_generators(alg):
    """Units E_{i,i+1}, E_{i+1,i} at each point (plus the point projections):
    they generate the blockwise endomorphism algebra L(H_A)."""
    D = alg.d * alg.d
    out = []
    for x in range(alg.k):
        b = np.zeros((alg.k, D, D), dtype=complex)
        b[x] = np.eye(D)
        out.append(ModuleOperator(b))
        for i in range(D - 1):
            for (r, c) in ((i, i + 1), (i + 1, i)):
                b = np.zeros((alg.k, D, D), dtype=complex)
                b[x, r, c] = 1
                out.append(ModuleOperator(b))
    return out


def centre_of_L(alg):
    return commutant(L_generators(alg))


# ---- canonical trace ----

def canonical_trace(alg, decomposition, rng=None, tol=1e-10):
    """sigma(sum pi(xi_i) pi(eta_i)) = sum <xi_i*, eta_i>.

    The value is recomputed from a second, random decomposition of the same
    operator; disagreement beyond ``tol`` raises ``DecompositionMismatch``.
    """
    value = alg.zero()[:, 0, 0]
    t = alg.zero()
    for xi, eta in decomposition:
        value = value + alg.inner(star(xi), eta).values
        t = t + xi @ eta
    if rng is not None:
        # t = u1 v1 + u2 v2 with u1, v1 random and u2 random invertible
        u1, v1, u2 = alg.random(rng), alg.random(rng), alg.random(rng)
        v2 = np.linalg.solve(u2, t - u1 @ v1)
        again = alg.inner(star(u1), v1).values + alg.inner(star(u2), v2).values
        scale = max(1.0, float(np.max(np.abs(value))))
        if np.max(np.abs(again - value)) > tol * scale:
            raise DecompositionMismatch(f"decompositions disagree by {np.max(np.abs(again - value)):.3g}")
    return CentreElement.finite(value)


def trace_of_operator(alg, T, rng=None):
    """sigma(T) for T in pi(A): T = pi(T(1)) pi(1)."""
    t = T(alg.one())
    if left_op(t).distance(T) > 1e-9 * max(1.0, float(np.max(np.abs(T.blocks)))):
        raise ValueError("operator is not in the span of pi(A) pi(A)")
    return canonical_trace(alg, [(t, alg.one())], rng)


def psd_sqrt(a):
    vals, vecs = np.linalg.eigh((a + star(a)) / 2)
    return vecs @ (np.sqrt(np.clip(vals, 0, None))[..., None] * star(vecs))


def phi(alg, s, rng=None):
    """The Z-trace of a positive s, through the decomposition pi(s^1/2) pi(s^1/2)."""
    r = psd_sqrt(s)
    return canonical_trace(alg, [(r, r)], rng)


# ---- report plumbing ----

class Report:
    """Named checks, each with a pass flag and the worst residual seen."""

    def __init__(self):
        self.checks = {}

    def record(self, name, residual, tol):
        residual = float(residual)
        entry = self.checks.setdefault(name, {"pass": True, "max_residual": 0.0, "tol": tol})
        entry["max_residual"] = max(entry["max_residual"], residual)
        entry["pass"] = entry["pass"] and residual <= tol

    def flag(self, name, ok):
        entry = self.checks.setdefault(name, {"pass": True, "max_residual": 0.0, "tol": 0.0})
        entry["pass"] = entry["pass"] and bool(ok)
        if not ok:
            entry["max_residual"] = max(entry["max_residual"], 1.0)

    @property
    def passed(self):
        return all(v["pass"] for v in self.checks.values())

    def failures(self):
        return sorted(name for name, v in self.checks.items() if not v["pass"])

    def to_json(self):
        return {name: dict(v) for name, v in sorted(self.checks.items())}


def _diff(z1, z2):
    return float(np.max(np.abs(np.asarray(z1) - np.asarray(z2))))


# ---- axioms ----

def check_axioms(alg, trials=200, seed=0, report=None):
    """Randomised verification of the module axioms (i)-(iv) and the
    Hilbert-algebra axioms (v)-(viii)."""
    rng = np.random.default_rng(seed)
    rep = report or Report()
    for _ in range(trials):
        a, b, c = alg.random(rng), alg.random(rng), alg.random(rng)
        z = rng.normal(size=alg.k) + 1j * rng.normal(size=alg.k)
        aa = alg.inner(a, a).values
        rep.record("axiom_i_positive", max(0.0, -float(np.min(aa.real))) + float(np.max(np.abs(aa.imag))), 1e-12)
        rep.record("axiom_ii_hermitian", _diff(np.conj(alg.inner(a, b).values), alg.inner(b, a).values), 1e-12)
        rep.record("axiom_iii_module", _diff(alg.inner(a, b @ alg.central(z)).values,
                                             alg.inner(a, b).values * z), 1e-12)
        rep.record("axiom_v_star", _diff(alg.inner(star(a), star(b)).values, alg.inner(b, a).values), 1e-12)
        rep.record("axiom_vi_left_adjoint", _diff(alg.inner(a @ b, c).values,
                                                  alg.inner(b, star(a) @ c).values), 1e-12)
        op_norm = float(np.max(np.linalg.norm(a, ord=2, axis=(1, 2))))
        excess = alg.norm(a @ b) - op_norm * alg.norm(b)
        rep.record("axiom_vii_bounded", max(0.0, excess) / max(1.0, op_norm * alg.norm(b)), 1e-12)
    # (i) zero iff zero: a vector vanishing at one point has <a,a> vanishing exactly there
    for x in range(alg.k):
        a = alg.random(rng)
        a[x] = 0
        vals = alg.inner(a, a).values
        others = np.delete(vals.real, x)
        rep.flag("axiom_i_faithful", vals[x] == 0 and (others.size == 0 or np.all(others > 0)))
    # (iv) inner products of the point indicators span Z
    ips = np.array([alg.inner(alg.indicator(x), alg.indicator(x)).values for x in range(alg.k)])
    rep.flag("axiom_iv_span", np.linalg.matrix_rank(ips) == alg.k)
    # (viii) A^2 spans A (unital: already the products 1 * e span)
    prods = np.array([(alg.one() @ e).reshape(-1) for e in alg.basis()]
                     + [(alg.random(rng) @ alg.random(rng)).reshape(-1) for _ in range(4)])
    rep.flag("axiom_viii_density", np.linalg.matrix_rank(prods) == alg.dim)
    return rep


# ---- representations and commutants ----

def check_representations(alg, trials=200, seed=0, report=None):
    rng = np.random.default_rng(seed)
    rep = report or Report()
    rep.record("pi_unital", left_op(alg.one()).distance(ModuleOperator(
        np.broadcast_to(np.eye(alg.d ** 2), (alg.k, alg.d ** 2, alg.d ** 2)))), 0.0)
    for _ in range(trials):
        a, b, xi, eta = (alg.random(rng) for _ in range(4))
        pa, pb, qa, qb = left_op(a), left_op(b), right_op(a), right_op(b)
        scale = 1 + float(np.max(np.abs(a))) * float(np.max(np.abs(b)))
        rep.record("pi_pi_prime_commute", commutator(pa, qb).distance(left_op(0 * a)) / scale, 1e-12)
        rep.record("pi_homomorphism", (pa @ pb).distance(left_op(a @ b)) / scale, 1e-12)
        rep.record("pi_prime_antihomomorphism", (qa @ qb).distance(right_op(b @ a)) / scale, 1e-12)
        rep.record("pi_star", pa.adjoint().distance(left_op(star(a))), 1e-12)
        rep.record("pi_prime_star", qa.adjoint().distance(right_op(star(a))), 1e-12)
        rep.record("adjoint_pairing", _diff(alg.inner(pa(xi), eta).values,
                                            alg.inner(xi, pa.adjoint()(eta)).values) / scale, 1e-10)
        rep.record("J_intertwines", _diff(J(pa(J(xi))), right_op(J(a))(xi)) / scale, 1e-12)
        rep.record("J_isometry", _diff(alg.inner(J(xi), J(eta)).values,
                                       np.conj(alg.inner(xi, eta).values)), 1e-10)
    return rep


def check_commutants(alg, trials=200, seed=0, report=None):
    """Commutation theorem and double commutant; each trial generates pi(A)
    from two random elements."""
    rng = np.random.default_rng(seed)
    rep = report or Report()
    target = alg.k * alg.d ** 2
    pi_span = [left_op(e) for e in alg.basis()]
    pi_prime_span = [right_op(e) for e in alg.basis()]
    for _ in range(trials):
        a, b = alg.random(rng), alg.random(rng)
        comm = commutant([left_op(a), left_op(b)])
        rep.flag("commutant_pi_dimension", len(comm) == target)
        rep.record("commutant_pi_in_pi_prime", membership_residual(comm, pi_prime_span), 1e-9)
        comm2 = commutant([right_op(a), right_op(b)])
        rep.flag("commutant_pi_prime_dimension", len(comm2) == target)
        rep.record("commutant_pi_prime_in_pi", membership_residual(comm2, pi_span), 1e-9)
    double = commutant(commutant(pi_span))
    rep.flag("double_commutant_dimension", len(double) == target)
    rep.record("double_commutant_in_pi", membership_residual(double, pi_span), 1e-9)
    centre = centre_of_L(alg)
    rep.flag("centre_dimension", len(centre) == alg.k)
    # every centre element acts as xi -> xi z
    worst = 0.0
    for c in centre:
        z = np.array([c.blocks[x, 0, 0] for x in range(alg.k)])
        xi = alg.random(rng)
        worst = max(worst, _diff(c(xi), xi @ alg.central(z)))
    rep.record("centre_acts_as_module", worst, 1e-12)
    return rep


def check_trace(alg, trials=200, seed=0, report=None):
    rng = np.random.default_rng(seed)
    rep = report or Report()
    one = alg.one()
    rep.record("sigma_unital", _diff(canonical_trace(alg, [(one, one)], rng).values, 1.0), 1e-12)
    for _ in range(trials):
        a, b, c, e = (alg.random(rng) for _ in range(4))
        sigma = canonical_trace(alg, [(a, b)], rng)
        rep.record("sigma_matches_tau", _diff(sigma.values, alg.tau(a @ b).values), 1e-10)
        T = left_op(c)
        S = left_op(a) @ left_op(b) + left_op(e)
        ts = trace_of_operator(alg, T @ S, rng)
        st = trace_of_operator(alg, S @ T, rng)
        rep.record("sigma_tracial", _diff(ts.values, st.values) / (1 + float(np.max(np.abs(ts.values)))), 1e-10)
    return rep


def dixmier_checks(alg, trials=200, seed=0, report=None):
    """Additivity, Z_+ homogeneity, unitary invariance, faithfulness and
    normality on increasing sequences, for phi = sigma on positives."""
    rng = np.random.default_rng(seed)
    rep = report or Report()
    for _ in range(trials):
        s, t = alg.random_positive(rng), alg.random_positive(rng)
        ps = phi(alg, s, rng).values
        scale = 1 + float(np.max(np.abs(ps)))
        rep.record("dixmier_additive", _diff(phi(alg, s + t).values, ps + phi(alg, t).values) / scale, 1e-10)
        z = rng.uniform(0, 2, size=alg.k)
        rep.record("dixmier_homogeneous", _diff(phi(alg, alg.central(z) @ s).values, z * ps) / scale, 1e-10)
        u = alg.random_unitary(rng)
        rep.record("dixmier_unitary_invariant", _diff(phi(alg, u @ s @ star(u)).values, ps) / scale, 1e-9)
        rep.flag("dixmier_faithful_positive", np.all(ps.real > 0))
        # a positive that vanishes at one point has phi vanishing exactly there
        x = int(rng.integers(alg.k))
        s0 = s.copy()
        s0[x] = 0
        p0 = phi(alg, s0).values
        rep.flag("dixmier_faithful_pointwise", abs(p0[x]) == 0 and np.all(np.delete(p0.real, x) > 0))
        # increasing spectral partial sums s_1 <= s_2 <= ... <= s
        vals, vecs = np.linalg.eigh(s)
        prev = np.zeros(alg.k)
        for j in range(1, alg.d + 1):
            part = (vecs[:, :, :j] * vals[:, None, :j]) @ star(vecs[:, :, :j])
            cur = phi(alg, part).values.real
            rep.record("dixmier_normal_monotone", max(0.0, float(np.max(prev - cur))), 1e-12)
            prev = cur
        rep.record("dixmier_normal_limit", _diff(prev, ps.real) / scale, 1e-10)
    rep.record("dixmier_zero", float(np.max(np.abs(phi(alg, alg.zero()).values))), 0.0)
    return rep


def converse_domain(alg, trials=20, seed=0, report=None):
    """Finite dimension: {x : phi(x* x) finite} is all of A and recovers <.,.>."""
    rng = np.random.default_rng(seed)
    rep = report or Report()
    for _ in range(trials):
        x, y = alg.random(rng), alg.random(rng)
        v = phi(alg, star(x) @ x).values
        rep.flag("converse_domain_finite", np.all(np.isfinite(v)))
        # polarisation recovers <x, y> from phi on positives
        pol = sum((1j ** -r) * phi(alg, star(x + 1j ** r * y) @ (x + 1j ** r * y)).values
                  for r in range(4)) / 4
        rep.record("converse_inner_product", _diff(pol, alg.inner(x, y).values)
                   / (1 + float(np.max(np.abs(pol)))), 1e-10)
    return rep


# ---- Paschke dual of a tensor module ----

def paschke_tensor_demo(N, k, seed=0, vectors=100, report=None):
    """X = C^N tensor B with B = C^k (diagonal), and the functional theta with
    theta(xi_n tensor 1) = b_n* for an orthonormal basis xi_n of C^N.

    Elements of X are arrays (N, k).  theta is compared on random vectors
    sum_j eta_j tensor a_j against sum_j sum_n <xi_n, eta_j> b_n* a_j, and
    ||theta||^2 against ||sum_n b_n* b_n||.
    """
    rng = np.random.default_rng(seed)
    rep = report or Report()
    cplx = lambda *shape: rng.normal(size=shape) + 1j * rng.normal(size=shape)
    xi, _ = np.linalg.qr(cplx(N, N))           # columns: orthonormal basis
    b = cplx(N, k)                              # b_n in B
    beta = xi @ b                               # representing vector sum_n xi_n tensor b_n

    def theta(x):
        return np.sum(np.conj(beta) * x, axis=0)

    # basis vectors: theta(xi_n tensor 1) = b_n*
    worst = max(_diff(theta(xi[:, [n]] * np.ones((1, k))), np.conj(b[n])) for n in range(N))
    rep.record("paschke_basis", worst, 1e-10)
    for _ in range(vectors):
        J_ = int(rng.integers(1, 4))
        eta = cplx(N, J_)
        a = cplx(J_, k)
        x = eta @ a                              # sum_j eta_j tensor a_j
        ip = np.conj(xi).T @ eta                 # <xi_n, eta_j>
        formula = np.einsum("nj,nk,jk->k", ip, np.conj(b), a)
        rep.record("paschke_formula", _diff(theta(x), formula) / (1 + float(np.max(np.abs(formula)))), 1e-10)
    # theta is B-linear, so it splits over points; per point it is a row vector on C^N
    op_norm = max(np.linalg.svd(np.conj(beta[:, [p]]).T, compute_uv=False)[0] for p in range(k))
    bound = float(np.max(np.sum(np.abs(b) ** 2, axis=0)))
    rep.record("paschke_norm", abs(op_norm ** 2 - bound) / max(1.0, bound), 1e-10)
    return rep


def run_battery(k, d, trials=200, seed=0):
    """Every lab check for C(X, M_d) with |X| = k, merged into one report."""
    alg = FiniteZAlgebra(k, d)
    rep = Report()
    check_axioms(alg, trials, seed, rep)
    check_representations(alg, trials, seed + 1, rep)
    check_commutants(alg, trials, seed + 2, rep)
    check_trace(alg, trials, seed + 3, rep)
    dixmier_checks(alg, trials, seed + 4, rep)
    converse_domain(alg, 20, seed + 5, rep)
    paschke_tensor_demo(max(2, d * d), k, seed + 6, 100, rep)
    return rep


__all__ = ["FiniteZAlgebra", "ModuleOperator", "star", "J", "left_op", "right_op", "commutator",
           "commutant", "centre_of_L", "membership_residual", "rank", "canonical_trace",
           "trace_of_operator", "phi", "Report", "check_axioms", "check_representations",
           "check_commutants", "check_trace", "dixmier_checks", "converse_domain",
           "paschke_tensor_demo", "run_battery"]

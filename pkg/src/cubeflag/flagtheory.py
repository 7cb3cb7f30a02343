"""Chow ring and Grothendieck ring of a flag variety G/B, and the invariants
built from their characteristic maps.

Both rings are free abelian groups with a basis indexed by the Weyl group
(Schubert classes for CH, Steinberg line bundles for K0).  Elements are
integer vectors in that basis, ordered like ``weyl_enumerate``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import intlin
from .intlin import AbelianPresentation
from .rootdata import (DEFAULT_WEYL_BOUND, LatticeError, RootDatum, WeylElement, poincare_polynomial,
                       weyl_table)

K0_TABLE_LIMIT = 48


class BasisVerificationError(RuntimeError):
    pass


class ShapeFailure(Exception):
    """The mod-p quotient is not a truncated polynomial algebra in p-power exponents."""

    def __init__(self, report: dict):
        self.report = report
        super().__init__(report.get("reason", "shape failure"))


class NonDiagonalImage(Exception):
    def __init__(self, hermite: np.ndarray, words: list[str]):
        self.hermite = hermite
        self.words = words
        super().__init__("image lattice is not diagonal in the Steinberg basis")


# ---------------------------------------------------------------------------
# shared Weyl data


class _WeylData:
    def __init__(self, rd: RootDatum, bound: int):
        table = weyl_table(rd, bound)
        self.rd = rd
        self.table = table
        self.elements: list[WeylElement] = table.elements
        self.mats = [np.array(w.matrix, dtype=np.int64) for w in self.elements]
        self.lengths = [w.length for w in self.elements]
        self.words = [w.word_str() for w in self.elements]
        self.rho = np.ones(rd.rank, dtype=np.int64)

    def index_of(self, M: np.ndarray) -> int:
        return self.table.index[tuple(int(x) for x in M @ self.rho)]


def _check_in_lattice(rd: RootDatum, chi) -> tuple[int, ...]:
    chi = tuple(int(x) for x in chi)
    if len(chi) != rd.rank:
        raise LatticeError(f"character {chi} has the wrong length")
    if not rd.in_char_lattice(chi):
        raise LatticeError(f"character {chi} is not in T*")
    return chi


# ---------------------------------------------------------------------------
# rational linear algebra helpers


def _rref(rows: list[list[Fraction]], ncols: int):
    rows = [list(r) for r in rows]
    pivots, r = [], 0
    for c in range(ncols):
        k = next((i for i in range(r, len(rows)) if rows[i][c] != 0), None)
        if k is None:
            continue
        rows[r], rows[k] = rows[k], rows[r]
        inv = 1 / rows[r][c]
        rows[r] = [x * inv for x in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
    return rows[:r], pivots


def _rational_inverse(A: np.ndarray) -> list[list[Fraction]]:
    n = A.shape[0]
    aug = [[Fraction(int(A[i, j])) for j in range(n)] + [Fraction(int(i == j)) for j in range(n)]
           for i in range(n)]
    rows, piv = _rref(aug, n)
    if piv != list(range(n)):
        raise ValueError("matrix is singular")
    return [r[n:] for r in rows]


# ---------------------------------------------------------------------------
# Chow ring


class ChowFlagRing:
    """CH*(G/B) in the Schubert basis.

    Multiplication by a degree-one class uses the Chevalley formula.  General
    products go through a rational expression of each Schubert class as a
    polynomial in the classes c1(omega_i), which exists because the
    characteristic map is rationally surjective.
    """

    theory = "chow"

    def __init__(self, rd: RootDatum, bound: int = DEFAULT_WEYL_BOUND):
        self.rd = rd
        self._w = _WeylData(rd, bound)
        self.basis = self._w.elements
        self.size = len(self.basis)
        self.degree_of = list(self._w.lengths)
        self.top = max(self.degree_of)
        self.by_degree = [[i for i in range(self.size) if self.degree_of[i] == d]
                          for d in range(self.top + 1)]
        self.ranks = [len(b) for b in self.by_degree]
        self.chevalley_table = self._chevalley()
        self._poly_cache: dict[int, dict[tuple[int, ...], Fraction]] = {}
        self._mono = None

    def _chevalley(self) -> list[list[tuple[int, tuple[int, ...]]]]:
        """For each w, the pairs (index of w s_beta, coroot of beta) with l(w s_beta) = l(w) + 1."""
        W = self._w
        refl = [np.array(self.rd.reflection(root, cor), dtype=np.int64)
                for root, cor in self.rd.positive_roots]
        out = []
        for i, M in enumerate(W.mats):
            row = []
            for (root, cor), S in zip(self.rd.positive_roots, refl):
                j = W.index_of(M @ S)
                if W.lengths[j] == W.lengths[i] + 1:
                    row.append((j, cor))
            out.append(row)
        return out

    # -- elements ------------------------------------------------------------
    def zero(self) -> np.ndarray:
        return intlin.zeros(self.size, 1)[:, 0]

    def unit(self) -> np.ndarray:
        v = self.zero()
        v[0] = 1
        return v

    def schubert(self, i: int) -> np.ndarray:
        v = self.zero()
        v[i] = 1
        return v

    def augmentation(self, x) -> int:
        return int(x[0])

    def words(self) -> list[str]:
        return list(self._w.words)

    def degree_index(self, d: int) -> list[int]:
        return self.by_degree[d] if 0 <= d <= self.top else []

    # -- multiplication ------------------------------------------------------
    def c1_times(self, chi, x) -> np.ndarray:
        """c1(L(chi)) . x by the Chevalley formula."""
        out = self.zero()
        for i in range(self.size):
            c = x[i]
            if c == 0:
                continue
            for j, cor in self.chevalley_table[i]:
                pair = sum(a * b for a, b in zip(chi, cor))
                if pair:
                    out[j] += c * pair
        return out

    def _monomial_images(self):
        """Vectors c1(omega)^a . sigma_e for all exponent tuples a, per degree."""
        if self._mono is None:
            n = self.rd.rank
            fund = self.rd.fundamental_weights
            levels = [{(0,) * n: self.unit()}]
            for d in range(1, self.top + 1):
                cur = {}
                for a, v in levels[-1].items():
                    last = max((k for k in range(n) if a[k]), default=0)
                    for k in range(last, n):
                        b = tuple(a[t] + (t == k) for t in range(n))
                        cur[b] = self.c1_times(fund[k], v)
                levels.append(cur)
            self._mono = levels
        return self._mono

    def _poly(self, u: int) -> dict[tuple[int, ...], Fraction]:
        """Rational coefficients expressing sigma_u in the monomials c1(omega)^a."""
        hit = self._poly_cache.get(u)
        if hit is not None:
            return hit
        d = self.degree_of[u]
        mono = self._monomial_images()[d]
        keys = sorted(mono)
        idx = self.by_degree[d]
        cols = [[Fraction(int(mono[a][i])) for i in idx] for a in keys]
        # choose a rational basis among the monomials
        rows, piv = _rref([list(r) for r in zip(*cols)] if cols else [], len(keys))
        if len(piv) != len(idx):
            raise ArithmeticError("monomials in c1(omega_i) do not span CH^d rationally")
        sub = np.array([[int(mono[keys[k]][i]) for k in piv] for i in idx], dtype=object)
        inv = _rational_inverse(sub)
        for u2 in idx:
            pos = idx.index(u2)
            coeff = {keys[k]: inv[t][pos] for t, k in enumerate(piv) if inv[t][pos] != 0}
            self._poly_cache[u2] = coeff
        return self._poly_cache[u]

    def multiply(self, x, y) -> np.ndarray:
        x, y = list(x), list(y)
        n = self.rd.rank
        fund = self.rd.fundamental_weights
        cache: dict[tuple[int, ...], np.ndarray] = {(0,) * n: np.array(y, dtype=object)}

        def apply(a):
            v = cache.get(a)
            if v is None:
                k = max(t for t in range(n) if a[t])
                prev = tuple(a[t] - (t == k) for t in range(n))
                v = self.c1_times(fund[k], apply(prev))
                cache[a] = v
            return v

        acc = [Fraction(0)] * self.size
        for u, c in enumerate(x):
            if c == 0:
                continue
            for a, q in self._poly(u).items():
                v = apply(a)
                for i in range(self.size):
                    if v[i]:
                        acc[i] += c * q * v[i]
        out = self.zero()
        for i, f in enumerate(acc):
            if f.denominator != 1:
                raise ArithmeticError("Schubert product is not integral")
            out[i] = f.numerator
        return out

    # -- characteristic map --------------------------------------------------
    def char_basis(self) -> list[tuple[int, ...]]:
        return self.rd.char_basis()

    def image_in_degree(self, d: int) -> np.ndarray:
        """Columns spanning the image of S^d(T*) in CH^d, in the degree-d basis."""
        gens = self.char_basis()
        vecs = [self.unit()]
        for _ in range(d):
            vecs = [self.c1_times(chi, v) for v in vecs for chi in gens]
            vecs = _dedupe(vecs)
        idx = self.degree_index(d)
        M = intlin.zeros(len(idx), len(vecs))
        for j, v in enumerate(vecs):
            M[:, j] = [v[i] for i in idx]
        return M

    def __repr__(self) -> str:
        return f"ChowFlagRing({self.rd.name}, {self.rd.lattice_name}, ranks={self.ranks})"


def _dedupe(vecs: list[np.ndarray]) -> list[np.ndarray]:
    if not vecs:
        return vecs
    M = np.stack(vecs, axis=1)
    H = intlin.hermite_basis(M)
    return [H[:, j] for j in range(H.shape[1])]


def chow_flag_ring(rd: RootDatum, bound: int = DEFAULT_WEYL_BOUND) -> ChowFlagRing:
    R = ChowFlagRing(rd, bound)
    if R.ranks != poincare_polynomial(rd, bound):
        raise BasisVerificationError("Schubert basis ranks differ from the Poincare polynomial")
    return R


def char_map_chow(R: ChowFlagRing, chi) -> np.ndarray:
    """c1(L(chi)) = sum_i <chi, alpha_i^vee> sigma_{s_i}."""
    chi = _check_in_lattice(R.rd, chi)
    return R.c1_times(chi, R.unit())


# ---------------------------------------------------------------------------
# K0 ring


def weyl_dimension(rd: RootDatum, lam) -> int:
    """prod_{beta > 0} <lam + rho, beta^vee> / <rho, beta^vee>."""
    num = den = 1
    for _, cor in rd.positive_roots:
        num *= sum((int(a) + 1) * b for a, b in zip(lam, cor))
        den *= sum(cor)
    q, r = divmod(num, den)
    if r:
        raise ArithmeticError("Weyl dimension is not integral")
    return q


def steinberg_weights(rd: RootDatum, bound: int = DEFAULT_WEYL_BOUND) -> list[tuple[int, ...]]:
    """lambda_w = w^{-1}( sum of omega_i over i with w^{-1}(alpha_i) < 0 )."""
    W = _WeylData(rd, bound)
    roots = rd.simple_roots
    A = np.array(rd.cartan, dtype=object)
    Ainv = _rational_inverse(A)
    out = []
    for M in W.mats:
        Mi = np.array(np.round(np.linalg.inv(M.astype(float))), dtype=np.int64)
        if not np.array_equal(Mi @ M, np.eye(rd.rank, dtype=np.int64)):
            raise ArithmeticError("Weyl matrix inversion failed")
        total = np.zeros(rd.rank, dtype=np.int64)
        for i, a in enumerate(roots):
            img = Mi @ np.array(a, dtype=np.int64)
            # positivity: coordinates in the simple-root basis
            coords = [sum(Ainv[r][c] * int(img[c]) for c in range(rd.rank)) for r in range(rd.rank)]
            if all(x <= 0 for x in coords):
                total[i] += 1
        out.append(tuple(int(x) for x in Mi @ total))
    return out


class K0FlagRing:
    """K0(G/B) with the Steinberg basis g_w = [L(lambda_w)].

    A Laurent polynomial sum c_mu e^mu is expanded through the Euler
    characteristic pairing <x, y> = chi(x y): with chi(e^mu) the Weyl dimension
    polynomial, the Gram matrix of the basis is unimodular and the coordinates
    of f are G^{-1} (chi(f g_v))_v.
    """

    theory = "k0"

    def __init__(self, rd: RootDatum, bound: int = DEFAULT_WEYL_BOUND, table: bool | None = None):
        self.rd = rd
        self._w = _WeylData(rd, bound)
        self.basis = self._w.elements
        self.size = len(self.basis)
        self.weights = steinberg_weights(rd, bound)
        n = self.size
        G = intlin.zeros(n, n)
        for u in range(n):
            for v in range(u, n):
                G[u, v] = G[v, u] = weyl_dimension(rd, _add(self.weights[u], self.weights[v]))
        self.gram = G
        self.gram_det = intlin.determinant(G)
        if abs(self.gram_det) != 1:
            raise BasisVerificationError(
                f"Steinberg classes are not a Z-basis (Gram determinant {self.gram_det})")
        inv = _rational_inverse(G)
        self.gram_inverse = intlin.mat([[int(x) for x in row] for row in inv])
        self.mult_table = None
        if table is None:
            table = n <= K0_TABLE_LIMIT
        if table:
            self.mult_table = self._table()
            self._check_table()

    def words(self) -> list[str]:
        return list(self._w.words)

    def zero(self) -> np.ndarray:
        return intlin.zeros(self.size, 1)[:, 0]

    def unit(self) -> np.ndarray:
        return self.expand({(0,) * self.rd.rank: 1})

    def augmentation(self, x) -> int:
        return int(sum(int(c) for c in x))

    def expand(self, laurent: Mapping) -> np.ndarray:
        """Coordinates of sum c_mu [L(mu)] in the Steinberg basis (mu in weight coords)."""
        rhs = intlin.zeros(self.size, 1)
        for mu, c in laurent.items():
            if c == 0:
                continue
            for v in range(self.size):
                rhs[v, 0] += c * weyl_dimension(self.rd, _add(mu, self.weights[v]))
        return intlin.matmul(self.gram_inverse, rhs)[:, 0]

    def _table(self) -> np.ndarray:
        n = self.size
        T = intlin.zeros(n, n * n).reshape(n, n, n)
        for u in range(n):
            for v in range(u, n):
                col = self.expand({_add(self.weights[u], self.weights[v]): 1})
                T[u, v, :] = col
                T[v, u, :] = col
        return T

    def _check_table(self) -> None:
        T = self.mult_table
        n = self.size
        e = self.unit()
        if not (e == 0).sum() == n - 1 or e[0] != 1:
            raise BasisVerificationError("g_e is not the unit")
        big = max(int(abs(x)) for x in T.flat) if T.size else 0
        if big ** 2 * n * 4 < 2 ** 62:
            Ti = T.astype(np.int64)
            left = np.tensordot(Ti, Ti, axes=([2], [0]))           # (g_u g_v) g_w
            right = np.tensordot(Ti, Ti, axes=([2], [1]))          # g_u (g_v g_w)
            right = np.transpose(right, (2, 0, 1, 3))              # u, v, w, out
            ok = np.array_equal(left, right)
        else:
            ok = all(np.array_equal(self.multiply(self.multiply(self._e(u), self._e(v)), self._e(w)),
                                    self.multiply(self._e(u), self.multiply(self._e(v), self._e(w))))
                     for u in range(n) for v in range(n) for w in range(n))
        if not ok:
            raise BasisVerificationError("multiplication table is not associative")

    def _e(self, i):
        v = self.zero()
        v[i] = 1
        return v

    def multiply(self, x, y) -> np.ndarray:
        if self.mult_table is not None:
            out = self.zero()
            for u in range(self.size):
                if x[u] == 0:
                    continue
                for v in range(self.size):
                    if y[v]:
                        out = out + x[u] * y[v] * self.mult_table[u, v, :]
            return out
        laurent: dict = {}
        for u in range(self.size):
            for v in range(self.size):
                c = x[u] * y[v]
                if c:
                    key = _add(self.weights[u], self.weights[v])
                    laurent[key] = laurent.get(key, 0) + c
        return self.expand(laurent)

    def line(self, chi) -> np.ndarray:
        return self.expand({tuple(chi): 1})

    def c1(self, chi) -> np.ndarray:
        """c1(L(chi)) = 1 - [L(-chi)]."""
        return self.unit() - self.line(tuple(-int(a) for a in chi))

    def char_basis(self) -> list[tuple[int, ...]]:
        return self.rd.char_basis()

    def __repr__(self) -> str:
        return f"K0FlagRing({self.rd.name}, {self.rd.lattice_name}, rank={self.size})"


def _add(a, b) -> tuple[int, ...]:
    return tuple(int(x) + int(y) for x, y in zip(a, b))


def k0_flag_ring(rd: RootDatum, bound: int = DEFAULT_WEYL_BOUND) -> K0FlagRing:
    return K0FlagRing(rd, bound)


def char_map_k0(R: K0FlagRing, laurent: Mapping) -> np.ndarray:
    """e^chi -> [L(chi)], extended linearly; every chi must lie in T*."""
    checked = {}
    for chi, c in laurent.items():
        chi = _check_in_lattice(R.rd, chi)
        checked[chi] = checked.get(chi, 0) + int(c)
    return R.expand(checked)


def k0_image_lattice(R: K0FlagRing) -> np.ndarray:
    """Hermite basis of the image of Z[T*]: the span of 1 closed under e^{+-chi_i}."""
    gens = []
    for chi in R.char_basis():
        gens.append(R.line(chi))
        gens.append(R.line(tuple(-a for a in chi)))
    L = intlin.hermite_basis(R.unit().reshape(-1, 1))
    while True:
        cols = [L]
        for g in gens:
            cols.append(np.stack([R.multiply(L[:, j], g) for j in range(L.shape[1])], axis=1))
        L2 = intlin.hermite_basis(np.concatenate(cols, axis=1))
        if intlin.lattices_equal(L, L2):
            return L2
        L = L2


def maximal_tits_indexes(R: K0FlagRing) -> dict[str, int]:
    """Diagonal entries m_w with image lattice = (+) m_w Z g_w, keyed by reduced word."""
    H = k0_image_lattice(R)
    words = R.words()
    if H.shape[1] != R.size:
        raise NonDiagonalImage(H, words)
    off = H.copy()
    for i in range(R.size):
        off[i, i] = 0
    if not intlin.is_zero(off):
        raise NonDiagonalImage(H, words)
    return {words[i]: int(H[i, i]) for i in range(R.size)}


# ---------------------------------------------------------------------------
# brute-force model of K0(G/B) inside a window of Laurent monomials


def _orbit(rd: RootDatum, chi, bound: int = DEFAULT_WEYL_BOUND) -> list[tuple[int, ...]]:
    W = _WeylData(rd, bound)
    return sorted({tuple(int(x) for x in M @ np.array(chi, dtype=np.int64)) for M in W.mats})


@dataclass
class WindowModel:
    """Z[Lambda] / J seen through a finite window of Laurent monomials.

    J is generated by e^mu (m(omega_i) - |W omega_i|) with m the orbit sum.
    Relations whose support fits in the outer box [-outer, outer]^n are
    saturated; the monomials of the inner box then span a lattice ``span``
    (columns, in quotient coordinates).  Since J is saturated, the relations
    found are all true relations, and once the span has rank |W| it is the
    image of the inner monomials in K0(G/B).
    """

    inner: int
    outer: int
    monomials: list[tuple[int, ...]]
    projection: np.ndarray      # outer-box coordinates -> quotient coordinates
    span: np.ndarray            # Hermite basis of the image of the inner box
    rank: int

    def coords(self, mu) -> np.ndarray:
        return self.projection[:, self.monomials.index(tuple(mu))]


def _window(rd: RootDatum, inner: int, outer: int) -> WindowModel:
    n = rd.rank
    box = list(itertools.product(range(-outer, outer + 1), repeat=n))
    pos = {mu: i for i, mu in enumerate(box)}
    orbits = [_orbit(rd, om) for om in rd.fundamental_weights]
    rels = []
    for mu in box:
        for orb in orbits:
            support = [_add(mu, nu) for nu in orb]
            if all(s in pos for s in support):
                col = [0] * len(box)
                for s in support:
                    col[pos[s]] += 1
                col[pos[mu]] -= len(orb)
                rels.append(col)
    R = intlin.mat(rels).T if rels else intlin.zeros(len(box), 0)
    s = intlin.smith(R)
    proj = s.U[s.rank:, :]
    inside = [pos[mu] for mu in itertools.product(range(-inner, inner + 1), repeat=n)]
    span = intlin.hermite_basis(proj[:, inside])
    return WindowModel(inner, outer, box, proj, span, span.shape[1])


def window_model(rd: RootDatum, inner: int, max_outer: int | None = None) -> WindowModel:
    """Grow the outer box until the inner monomials span a lattice of rank |W|."""
    target = len(_WeylData(rd, DEFAULT_WEYL_BOUND).elements)
    outer = inner + 1
    max_outer = max_outer or inner + 8
    while True:
        model = _window(rd, inner, outer)
        if model.rank == target or outer >= max_outer:
            return model
        outer += 1


def steinberg_window_determinant(R: K0FlagRing, model: WindowModel) -> int:
    """det of the Steinberg classes in a Z-basis of the window image lattice."""
    if model.rank != R.size:
        raise BasisVerificationError(f"window model has rank {model.rank}, expected {R.size}")
    cols = np.stack([model.coords(lam) for lam in R.weights], axis=1)
    X = intlin.solve_in_lattice(model.span, cols)
    if X is None:
        raise BasisVerificationError("a Steinberg class lies outside the window image lattice")
    return intlin.determinant(X)


# ---------------------------------------------------------------------------
# image sublattices and quotients


@dataclass(frozen=True, eq=False)
class ImageSublattice:
    """Classes spanning the image of a restriction map, as columns in the ring basis.

    The unit is always adjoined, since such images are unital subrings.
    """

    carrier: str
    generators: np.ndarray

    @staticmethod
    def of(R, columns: Iterable) -> "ImageSublattice":
        cols = [np.array([int(x) for x in c], dtype=object) for c in columns]
        for c in cols:
            if c.shape != (R.size,):
                raise intlin.DimensionMismatchError(f"image generator has {c.shape[0]} coordinates, "
                                                    f"the ring has rank {R.size}")
        cols.append(R.unit())
        return ImageSublattice(R.theory, intlin.hermite_basis(np.stack(cols, axis=1)))

    def augmentation_kernel(self, R) -> list[np.ndarray]:
        e = R.unit()
        return [self.generators[:, j] - R.augmentation(self.generators[:, j]) * e
                for j in range(self.generators.shape[1])]


def char_image(R) -> ImageSublattice:
    """Image of the characteristic map of the whole symmetric / group algebra of T*."""
    if R.theory == "chow":
        cols = []
        for d in range(R.top + 1):
            M = R.image_in_degree(d)
            idx = R.degree_index(d)
            for j in range(M.shape[1]):
                v = R.zero()
                for k, i in enumerate(idx):
                    v[i] = M[k, j]
                cols.append(v)
        return ImageSublattice.of(R, cols)
    L = k0_image_lattice(R)
    return ImageSublattice.of(R, [L[:, j] for j in range(L.shape[1])])


def full_image(R) -> ImageSublattice:
    return ImageSublattice.of(R, [intlin.identity(R.size)[:, j] for j in range(R.size)])


def scalar_image(R) -> ImageSublattice:
    return ImageSublattice.of(R, [])


def tits_image(R: K0FlagRing, m: Mapping[str, int]) -> ImageSublattice:
    """The lattice (+) m_w Z g_w; words not listed get m_w = 1."""
    words = R.words()
    unknown = set(m) - set(words)
    if unknown:
        raise ValueError(f"unknown Weyl words {sorted(unknown)}")
    cols = []
    for i, w in enumerate(words):
        v = R.zero()
        v[i] = int(m.get(w, 1))
        cols.append(v)
    return ImageSublattice.of(R, cols)


@dataclass(frozen=True, eq=False)
class QuotientPresentation:
    """A quotient ring R / J with its graded (Chow) or filtered (K0) pieces."""

    theory: str
    degrees: tuple[tuple[int, AbelianPresentation], ...]
    total: AbelianPresentation
    generators: tuple[dict, ...] = field(default=())

    def same_groups(self, other: "QuotientPresentation") -> bool:
        return self.theory == other.theory and self.degrees == other.degrees and self.total == other.total

    def to_json(self) -> dict:
        return {"theory": self.theory,
                "degrees": [{"d": d, **g.to_json()} for d, g in self.degrees],
                "total": self.total.to_json(),
                "generators": list(self.generators)}


def _span_columns(vecs: list[np.ndarray], n: int) -> np.ndarray:
    if not vecs:
        return intlin.zeros(n, 0)
    return intlin.hermite_basis(np.stack(vecs, axis=1))


def _ideal(R, gens: list[np.ndarray]) -> np.ndarray:
    """Z-span of g * b over generators g and basis classes b."""
    basis = [intlin.identity(R.size)[:, j] for j in range(R.size)]
    prods = [R.multiply(g, b) for g in gens if any(g) for b in basis]
    return _span_columns(prods, R.size)


def _quotient_generators(R, J: np.ndarray) -> tuple[dict, ...]:
    s = intlin.smith(J)
    diag = s.diagonal
    words = R.words()
    out = []
    for i in range(R.size):
        d = diag[i] if i < len(diag) else 0
        if d == 1:
            continue
        rep = s.Uinv[:, i]
        cls = {words[k]: int(rep[k]) for k in range(R.size) if rep[k]}
        out.append({"order": int(d), "class": cls})
    return tuple(out)


def _chow_pieces(R: ChowFlagRing, J: np.ndarray) -> list[tuple[int, AbelianPresentation]]:
    pieces = []
    for d in range(R.top + 1):
        idx = R.degree_index(d)
        other = [i for i in range(R.size) if R.degree_of[i] != d]
        # elements of J supported in degree d
        if J.shape[1] and other:
            comb = intlin.kernel(J[other, :])
            Jd = intlin.matmul(J, comb)[idx, :]
        else:
            Jd = J[idx, :]
        pieces.append((d, intlin.cokernel(Jd if Jd.shape[1] else intlin.zeros(len(idx), 0))))
    return pieces


def _k0_pieces(R: K0FlagRing, J: np.ndarray) -> list[tuple[int, AbelianPresentation]]:
    """Graded pieces (A^d + J) / (A^{d+1} + J) for A the augmentation ideal."""
    n = R.size
    ones = intlin.mat([[1] * n])
    A = intlin.kernel(ones)
    powers = [intlin.identity(n), A]
    while powers[-1].shape[1]:
        P = powers[-1]
        prods = [R.multiply(P[:, a], A[:, b]) for a in range(P.shape[1]) for b in range(A.shape[1])]
        nxt = _span_columns(prods, n)
        if len(powers) > n + 2:
            raise ArithmeticError("augmentation ideal is not nilpotent")
        powers.append(nxt)
    pieces = []
    for d in range(len(powers) - 1):
        top = _span_columns([c for M in (powers[d], J) for c in M.T], n)
        low = _span_columns([c for M in (powers[d + 1], J) for c in M.T], n)
        if top.shape[1] == 0:
            g = intlin.ZERO
        else:
            g, _ = intlin.subquotient(top, low) if low.shape[1] else (
                AbelianPresentation(top.shape[1], ()), None)
        pieces.append((d, g))
    return pieces


def quotient_by(R, gens: list[np.ndarray]) -> QuotientPresentation:
    J = _ideal(R, gens)
    total = intlin.cokernel(J if J.shape[1] else intlin.zeros(R.size, 0))
    pieces = _chow_pieces(R, J) if R.theory == "chow" else _k0_pieces(R, J)
    return QuotientPresentation(R.theory, tuple(pieces), total, _quotient_generators(R, J))


def group_ring_quotient(R) -> QuotientPresentation:
    """R / (c1(L(chi_1)), ..., c1(L(chi_n))) for a basis chi_i of T*."""
    if R.theory == "chow":
        gens = [char_map_chow(R, chi) for chi in R.char_basis()]
    else:
        gens = [R.c1(chi) for chi in R.char_basis()]
    return quotient_by(R, gens)


def hat_ring(R, image: ImageSublattice) -> QuotientPresentation:
    """R modulo the ideal generated by the augmentation-kernel part of ``image``."""
    if image.carrier != R.theory:
        raise ValueError(f"image lives in {image.carrier}, ring is {R.theory}")
    return quotient_by(R, image.augmentation_kernel(R))


def torsion_index(R: ChowFlagRing) -> tuple[list, int]:
    per = []
    for d in range(R.top + 1):
        _, index = intlin.sublattice_divisors(R.image_in_degree(d), R.ranks[d])
        per.append(index)
    return per, per[-1]


# ---------------------------------------------------------------------------
# J-invariant


ENUMERATION_LIMIT = 4096


class _ModPAlgebra:
    """Graded Z/p algebra (R / J) (x) Z/p with standard-monomial normal forms."""

    def __init__(self, R: ChowFlagRing, J: np.ndarray, p: int):
        self.R, self.p = R, p
        self.deg_data = []
        for d in range(R.top + 1):
            idx = R.degree_index(d)
            other = [i for i in range(R.size) if R.degree_of[i] != d]
            if J.shape[1] and other:
                comb = intlin.kernel(J[other, :])
                Jd = intlin.matmul(J, comb)[idx, :]
            else:
                Jd = J[idx, :]
            rref, piv = intlin.rref_mod_p(Jd.T, p) if Jd.size else ([], [])
            free = [k for k in range(len(idx)) if k not in piv]
            self.deg_data.append((idx, rref, piv, free))
        self.dims = [len(f) for _, _, _, f in self.deg_data]
        self._prod: dict[tuple[int, int], np.ndarray] = {}

    @property
    def dim(self) -> int:
        return sum(self.dims)

    def reduce(self, d: int, v: Sequence[int]) -> tuple[int, ...]:
        """Normal form of a degree-d vector (coordinates in R's degree-d basis)."""
        idx, rref, piv, free = self.deg_data[d]
        red = intlin.reduce_mod_p(v, rref, piv, self.p)
        return tuple(red[k] for k in free)

    def lift(self, d: int, a: Sequence[int]) -> list[int]:
        idx, _, _, free = self.deg_data[d]
        v = [0] * len(idx)
        for k, c in zip(free, a):
            v[k] = c
        return v

    def _basis_product(self, u: int, v: int) -> np.ndarray:
        key = (min(u, v), max(u, v))
        hit = self._prod.get(key)
        if hit is None:
            hit = self.R.multiply(self.R.schubert(key[0]), self.R.schubert(key[1]))
            self._prod[key] = hit
        return hit

    def mul(self, d1: int, a, d2: int, b) -> tuple[int, ...]:
        d = d1 + d2
        if d > self.R.top:
            return ()
        idx1, idx2, idx = self.R.degree_index(d1), self.R.degree_index(d2), self.R.degree_index(d)
        la, lb = self.lift(d1, a), self.lift(d2, b)
        acc = [0] * len(idx)
        pos = {g: k for k, g in enumerate(idx)}
        for i, x in zip(idx1, la):
            if not x:
                continue
            for j, y in zip(idx2, lb):
                if not y:
                    continue
                prod = self._basis_product(i, j)
                for g in idx:
                    if prod[g]:
                        acc[pos[g]] += x * y * int(prod[g])
        return self.reduce(d, [c % self.p for c in acc])

    def power_order(self, d: int, a) -> int:
        """Least N with a^N = 0 (a homogeneous of degree d > 0)."""
        cur, cd, N = tuple(a), d, 1
        while True:
            if cd + d > self.R.top:
                return N + 1
            cur = self.mul(cd, cur, d, a)
            cd += d
            N += 1
            if not any(cur):
                return N


def _is_power_of(N: int, p: int) -> int | None:
    j = 0
    while N % p == 0 and N > 1:
        N //= p
        j += 1
    return j if N == 1 else None


def _prime(p: int) -> bool:
    return p >= 2 and all(p % q for q in range(2, int(math.isqrt(p)) + 1))


def j_invariant(R: ChowFlagRing, p: int, image: ImageSublattice | None = None) -> dict:
    """(r, degrees, j) with (CH / image+) (x) Z/p = Z/p[x_1..x_r]/(x_i^{p^{j_i}})."""
    if not _prime(p):
        raise ValueError(f"{p} is not prime")
    if image is None:
        gens = [char_map_chow(R, chi) for chi in R.char_basis()]
    else:
        gens = image.augmentation_kernel(R)
    J = _ideal(R, gens)
    A = _ModPAlgebra(R, J, p)
    chosen: list[tuple[int, tuple[int, ...], int]] = []   # (degree, element, nilpotency)
    for d in range(1, R.top + 1):
        if A.dims[d] == 0:
            continue
        # decomposables: products of lower positive degrees, plus chosen generators of degree d
        dec = []
        for a in range(1, d):
            b = d - a
            for x in _unit_vectors(A.dims[a]):
                for y in _unit_vectors(A.dims[b]):
                    dec.append(A.mul(a, x, b, y))
        need = _rank_mod_p(dec + [g for g in _unit_vectors(A.dims[d])], p) - _rank_mod_p(dec, p)
        span = list(dec)
        for _ in range(need):
            cands = _candidates(A.dims[d], p)
            best = None
            for c in cands:
                if _rank_mod_p(span + [c], p) == _rank_mod_p(span, p):
                    continue
                N = A.power_order(d, c)
                if best is None or N < best[0]:
                    best = (N, c)
            N, c = best
            chosen.append((d, c, N))
            span.append(c)
    exps, failures = [], []
    for d, c, N in chosen:
        j = _is_power_of(N, p)
        if j is None:
            failures.append({"degree": d, "nilpotency": N})
        exps.append((d, j, N))
    product = math.prod(N for _, _, N in chosen)
    table = [{"d": d, "dim": A.dims[d]} for d in range(R.top + 1)]
    if failures or product != A.dim or not _monomials_span(A, chosen):
        raise ShapeFailure({"reason": "not a truncated polynomial algebra in p-power exponents",
                            "prime": p, "dimensions": table, "total_dim": A.dim,
                            "generators": [{"degree": d, "nilpotency": N} for d, _, N in chosen],
                            "non_p_power": failures})
    exps.sort(key=lambda t: (t[0], t[1]))
    return {"r": len(exps), "degrees": [d for d, _, _ in exps], "j": [j for _, j, _ in exps]}


def _unit_vectors(n: int) -> list[tuple[int, ...]]:
    return [tuple(int(i == k) for i in range(n)) for k in range(n)]


def _candidates(n: int, p: int) -> list[tuple[int, ...]]:
    if p ** n <= ENUMERATION_LIMIT:
        return [c for c in itertools.product(range(p), repeat=n) if any(c)]
    return _unit_vectors(n)


def _rank_mod_p(vecs: list[tuple[int, ...]], p: int) -> int:
    vecs = [v for v in vecs if v and any(v)]
    if not vecs:
        return 0
    rows, _ = intlin.rref_mod_p(intlin.mat([list(v) for v in vecs]), p)
    return len(rows)


def _monomials_span(A: _ModPAlgebra, chosen) -> bool:
    """The monomials prod x_i^{a_i}, a_i < N_i, are a basis of A."""
    per_degree: dict[int, list[tuple[int, ...]]] = {d: [] for d in range(A.R.top + 1)}
    for exps in itertools.product(*[range(N) for _, _, N in chosen]):
        d, cur = 0, (1,)
        for (gd, g, _), a in zip(chosen, exps):
            for _ in range(a):
                cur = A.mul(d, cur, gd, g)
                d += gd
                if d > A.R.top:
                    break
        if d <= A.R.top and any(cur):
            per_degree[d].append(cur)
        elif d <= A.R.top:
            return False
    return all(_rank_mod_p(per_degree[d], A.p) == A.dims[d] for d in per_degree)

"""Bounded homological chain complexes of free abelian groups of finite rank."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import intlin
from .intlin import AbelianPresentation


class NotAComplexError(ValueError):
    def __init__(self, degree: int, message: str | None = None):
        self.degree = degree
        super().__init__(message or f"d_{degree - 1} . d_{degree} != 0")


class NotAChainMapError(ValueError):
    def __init__(self, degree: int, message: str | None = None):
        self.degree = degree
        super().__init__(message or f"chain map does not commute with d in degree {degree}")


@dataclass(frozen=True, eq=False)
class BoundedComplex:
    """C_lo, ..., C_hi with d_i : C_i -> C_{i-1}; zero outside the window.

    ``diffs[i - lo]`` is d_i, a ``dim(i-1) x dim(i)`` matrix.  The lowest
    entry d_lo has zero rows.
    """

    lo: int
    hi: int
    dims: tuple[int, ...]
    diffs: tuple[np.ndarray, ...]

    def dim(self, i: int) -> int:
        if self.lo <= i <= self.hi:
            return self.dims[i - self.lo]
        return 0

    def d(self, i: int) -> np.ndarray:
        if self.lo <= i <= self.hi:
            return self.diffs[i - self.lo]
        return intlin.zeros(self.dim(i - 1), self.dim(i))

    @property
    def degrees(self) -> range:
        return range(self.lo, self.hi + 1)

    def is_zero(self) -> bool:
        return not any(self.dims)

    def to_json(self) -> dict:
        return {
            "lo": self.lo,
            "hi": self.hi,
            "dims": list(self.dims),
            "differentials": [_rows(self.d(i)) for i in range(self.lo + 1, self.hi + 1)],
        }

    def __repr__(self) -> str:
        return f"BoundedComplex(lo={self.lo}, hi={self.hi}, dims={list(self.dims)})"


def _rows(A: np.ndarray) -> list[list[int]]:
    return [[int(x) for x in row] for row in A]


def make_complex(dims: Sequence[int], differentials: Mapping[int, object] | Sequence = (),
                 lo: int = 0) -> BoundedComplex:
    """Validated complex with ``dims[k]`` the rank in degree ``lo + k``.

    ``differentials`` maps a degree i to d_i, or is a sequence whose k-th
    entry is d_{lo+k+1}; missing differentials are zero.
    """
    dims = tuple(int(x) for x in dims)
    if not dims:
        dims = (0,)
    if any(x < 0 for x in dims):
        raise ValueError("negative rank in complex")
    hi = lo + len(dims) - 1
    if not isinstance(differentials, Mapping):
        differentials = {lo + k + 1: D for k, D in enumerate(differentials)}

    def dim(i):
        return dims[i - lo] if lo <= i <= hi else 0

    for i in differentials:
        if not lo <= i <= hi:
            raise ValueError(f"differential d_{i} lies outside the window [{lo}, {hi}]")
    diffs = []
    for i in range(lo, hi + 1):
        shape = (dim(i - 1), dim(i))
        if i in differentials:
            D = intlin.mat(differentials[i], shape if _is_empty(differentials[i]) else None)
            if D.shape != shape:
                raise intlin.DimensionMismatchError(
                    f"d_{i} has shape {D.shape}, expected {shape}")
        else:
            D = intlin.zeros(*shape)
        diffs.append(D)
    C = BoundedComplex(lo, hi, dims, tuple(diffs))
    for i in range(lo + 1, hi + 1):
        if not intlin.is_zero(intlin.matmul(C.d(i - 1), C.d(i))):
            raise NotAComplexError(i)
    return C


def _is_empty(x) -> bool:
    return np.asarray(x, dtype=object).size == 0


def zero_complex(lo: int = 0, hi: int = 0) -> BoundedComplex:
    return make_complex([0] * (hi - lo + 1), lo=lo)


def complex_from_json(obj: Mapping) -> BoundedComplex:
    lo, hi, dims = int(obj["lo"]), int(obj["hi"]), obj["dims"]
    if len(dims) != hi - lo + 1:
        raise ValueError("dims must list one rank per degree in [lo, hi]")
    diffs = obj.get("differentials", [])
    if len(diffs) not in (0, hi - lo):
        raise ValueError("differentials must list d_{lo+1}, ..., d_{hi}")
    return make_complex(dims, {lo + k + 1: D for k, D in enumerate(diffs)}, lo=lo)


def shift(C: BoundedComplex, n: int) -> BoundedComplex:
    """C[n] with (C[n])_i = C_{i-n} and differential (-1)^n d."""
    sign = -1 if n % 2 else 1
    return BoundedComplex(C.lo + n, C.hi + n, C.dims, tuple(sign * D for D in C.diffs))


def naive_shift(C: BoundedComplex, n: int) -> BoundedComplex:
    """Regrade by n without touching the sign of the differential."""
    return BoundedComplex(C.lo + n, C.hi + n, C.dims, C.diffs)


def regrade(C: BoundedComplex, lo: int, hi: int) -> BoundedComplex:
    """The same complex presented over a (possibly larger) window."""
    lo, hi = min(lo, C.lo), max(hi, C.hi)
    return BoundedComplex(lo, hi, tuple(C.dim(i) for i in range(lo, hi + 1)),
                          tuple(C.d(i) for i in range(lo, hi + 1)))


def direct_sum(summands: Sequence[BoundedComplex]) -> BoundedComplex:
    if not summands:
        return zero_complex()
    lo = min(C.lo for C in summands)
    hi = max(C.hi for C in summands)
    dims, diffs = [], []
    for i in range(lo, hi + 1):
        dims.append(sum(C.dim(i) for C in summands))
        diffs.append(_block_diag([C.d(i) for C in summands]))
    return BoundedComplex(lo, hi, tuple(dims), tuple(diffs))


def _block_diag(blocks: Sequence[np.ndarray]) -> np.ndarray:
    out = intlin.zeros(sum(b.shape[0] for b in blocks), sum(b.shape[1] for b in blocks))
    r = c = 0
    for b in blocks:
        out[r:r + b.shape[0], c:c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out


def homology(C: BoundedComplex, i: int) -> AbelianPresentation:
    return intlin.homology_of_pair(C.d(i + 1), C.d(i))


def homology_all(C: BoundedComplex) -> dict[int, AbelianPresentation]:
    return {i: homology(C, i) for i in C.degrees}


# ---------------------------------------------------------------------------
# chain maps


@dataclass(frozen=True, eq=False)
class ChainMap:
    source: BoundedComplex
    target: BoundedComplex
    components: Mapping[int, np.ndarray]

    def f(self, i: int) -> np.ndarray:
        D = self.components.get(i)
        if D is None:
            return intlin.zeros(self.target.dim(i), self.source.dim(i))
        return D

    @property
    def degrees(self) -> range:
        return range(min(self.source.lo, self.target.lo), max(self.source.hi, self.target.hi) + 1)

    def compose(self, other: "ChainMap") -> "ChainMap":
        """self . other"""
        comps = {i: intlin.matmul(self.f(i), other.f(i)) for i in other.degrees}
        return ChainMap(other.source, self.target, comps)

    def equals(self, other: "ChainMap") -> bool:
        degs = set(self.degrees) | set(other.degrees)
        return all(np.array_equal(self.f(i), other.f(i)) for i in degs)

    def scaled(self, c: int) -> "ChainMap":
        return ChainMap(self.source, self.target, {i: c * D for i, D in self.components.items()})


def make_chain_map(source: BoundedComplex, target: BoundedComplex,
                   components: Mapping[int, object]) -> ChainMap:
    comps = {}
    for i, D in components.items():
        shape = (target.dim(i), source.dim(i))
        D = intlin.mat(D, shape if _is_empty(D) else None)
        if D.shape != shape:
            raise intlin.DimensionMismatchError(f"f_{i} has shape {D.shape}, expected {shape}")
        comps[int(i)] = D
    f = ChainMap(source, target, comps)
    for i in f.degrees:
        lhs = intlin.matmul(f.f(i - 1), source.d(i))
        rhs = intlin.matmul(target.d(i), f.f(i))
        if not np.array_equal(lhs, rhs):
            raise NotAChainMapError(i)
    return f


def identity_map(C: BoundedComplex) -> ChainMap:
    return ChainMap(C, C, {i: intlin.identity(C.dim(i)) for i in C.degrees})


def zero_map(K: BoundedComplex, L: BoundedComplex) -> ChainMap:
    return ChainMap(K, L, {})


def cone(f: ChainMap) -> BoundedComplex:
    """Mapping cone with (cone f)_i = K_{i-1} + L_i.

    In column-vector convention the differential sends (k, l) to
    (d^K k, f k - d^L l); this is the block matrix [[d^K, f], [0, -d^L]]
    acting on row vectors.
    """
    K, L = f.source, f.target
    lo, hi = min(K.lo + 1, L.lo), max(K.hi + 1, L.hi)
    dims, diffs = [], []
    for i in range(lo, hi + 1):
        dims.append(K.dim(i - 1) + L.dim(i))
        top = [K.d(i - 1), intlin.zeros(K.dim(i - 2), L.dim(i))]
        bottom = [f.f(i - 1), -L.d(i)]
        diffs.append(intlin.block([top, bottom]))
    return BoundedComplex(lo, hi, tuple(dims), tuple(diffs))


def cone_triangle(f: ChainMap) -> tuple[ChainMap, ChainMap, ChainMap]:
    """The maps K -> L -> cone f -> K[1] of the exact triangle.

    The inclusion of L and the projection onto K[1] carry the sign (-1)^i in
    degree i, which is what makes them chain maps for this cone and for the
    signed shift.
    """
    K, L = f.source, f.target
    C = cone(f)
    K1 = shift(K, 1)
    inc, proj = {}, {}
    for i in C.degrees:
        s = -1 if i % 2 else 1
        inc[i] = intlin.block([[intlin.zeros(K.dim(i - 1), L.dim(i))], [s * intlin.identity(L.dim(i))]])
        proj[i] = intlin.block([[s * intlin.identity(K.dim(i - 1)), intlin.zeros(K.dim(i - 1), L.dim(i))]])
    return f, make_chain_map(L, C, inc), make_chain_map(C, K1, proj)


# ---------------------------------------------------------------------------
# homology with explicit generators, for induced maps


@dataclass(frozen=True, eq=False)
class HomologyGroup:
    """H_i presented as (free generators = a cycle basis) / relations.

    ``cycles`` holds a basis of ker d_i as columns; ``relations`` holds the
    boundaries in the coordinates of that basis.
    """

    cycles: np.ndarray
    relations: np.ndarray
    _inverse_rows: np.ndarray

    @property
    def presentation(self) -> AbelianPresentation:
        return intlin.cokernel(self.relations)

    @property
    def ngens(self) -> int:
        return self.cycles.shape[1]

    def coords(self, z: np.ndarray) -> np.ndarray:
        """Coordinates of cycles (columns of z) in the cycle basis."""
        return intlin.matmul(self._inverse_rows, z)


def homology_group(C: BoundedComplex, i: int) -> HomologyGroup:
    s = intlin.smith(C.d(i))
    cycles = s.V[:, s.rank:]
    inv_rows = s.Vinv[s.rank:, :]
    rel = intlin.matmul(inv_rows, C.d(i + 1))
    return HomologyGroup(cycles, rel, inv_rows)


def induced_map(f: ChainMap, i: int, source: HomologyGroup | None = None,
                target: HomologyGroup | None = None) -> np.ndarray:
    """Matrix of H_i(f) on cycle-basis generators."""
    source = source or homology_group(f.source, i)
    target = target or homology_group(f.target, i)
    return target.coords(intlin.matmul(f.f(i), source.cycles))


def exact_at(alpha: np.ndarray, mid_rel: np.ndarray, beta: np.ndarray,
             right_rel: np.ndarray) -> bool:
    """Exactness of A --alpha--> M --beta--> N at M for presented groups.

    Maps are given on generators; ``mid_rel`` and ``right_rel`` are the
    relation matrices of M and N.
    """
    g = mid_rel.shape[0]
    if not intlin.contains(right_rel, intlin.matmul(beta, alpha)) and alpha.shape[1] > 0:
        return False
    # {x : beta x in span(right_rel)} must lie in span(alpha, mid_rel)
    K = intlin.kernel(intlin.block([[beta, -right_rel]]) if beta.shape[0] else intlin.zeros(0, g + right_rel.shape[1]))
    xs = K[:g, :]
    span = np.concatenate([alpha, mid_rel], axis=1) if alpha.size or mid_rel.size else intlin.zeros(g, 0)
    if span.shape[1] == 0:
        return intlin.is_zero(xs)
    return intlin.contains(span, xs)


def long_exact_sequence_failures(f: ChainMap) -> list[str]:
    """Nodes where H(K) -> H(L) -> H(cone f) -> H(K[1]) -> H_{i-1}(L) fails to be exact."""
    _, g, h = cone_triangle(f)
    K, L, C, K1 = f.source, f.target, g.target, h.target
    bad = []
    lo = min(K.lo, L.lo, C.lo) - 1
    hi = max(K.hi, L.hi, C.hi) + 1
    for i in range(lo, hi + 1):
        HK, HL, HC, HK1 = (homology_group(X, i) for X in (K, L, C, K1))
        HL_prev = homology_group(L, i - 1)
        a = induced_map(f, i, HK, HL)
        b = induced_map(g, i, HL, HC)
        c = induced_map(h, i, HC, HK1)
        # H_i(K[1]) = H_{i-1}(K) maps on to H_{i-1}(L) by f_{i-1}
        dmap = HL_prev.coords(matmul_safe(f.f(i - 1), HK1.cycles))
        if not exact_at(a, HL.relations, b, HC.relations):
            bad.append(f"H_{i}(L)")
        if not exact_at(b, HC.relations, c, HK1.relations):
            bad.append(f"H_{i}(cone)")
        if not exact_at(c, HK1.relations, dmap, HL_prev.relations):
            bad.append(f"H_{i}(K[1])")
    return bad


def matmul_safe(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    if A.shape[1] != B.shape[0]:
        raise intlin.DimensionMismatchError(f"cannot compose {A.shape} with {B.shape}")
    return intlin.matmul(A, B)

"""m-cubes of complexes, their cofiber and the spectral sequence of its filtration.

Subsets of {1..m} are sorted tuples.  Whenever summands are indexed by the
subsets of a fixed size they appear in lexicographic order, which is what
``itertools.combinations`` produces.
"""
from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Mapping, Sequence

import numpy as np

from . import intlin
from .complexes import (BoundedComplex, ChainMap, NotAChainMapError, cone, complex_from_json,
                        direct_sum, homology, identity_map, make_chain_map, make_complex,
                        naive_shift, regrade)
from .intlin import AbelianPresentation

Subset = tuple[int, ...]


class InvalidCubeError(ValueError):
    pass


class ChainMapViolation(InvalidCubeError):
    """A supplied structure map does not commute with the differentials."""


class FunctorialityError(ValueError):
    def __init__(self, I: Subset, J: Subset, L: Subset):
        self.chain = (I, J, L)
        super().__init__(f"r_JL . r_IJ != r_IL for I={list(I)}, J={list(J)}, L={list(L)}")


class InvariantViolation(RuntimeError):
    """An identity that must hold by construction failed."""


class ArityError(ValueError):
    pass


class NonCommutingError(ValueError):
    def __init__(self, i: int, j: int):
        self.pair = (i, j)
        super().__init__(f"operators e_{i} and e_{j} do not commute")


def subsets(m: int, size: int | None = None) -> list[Subset]:
    sizes = range(m + 1) if size is None else [size]
    return [c for p in sizes if 0 <= p <= m for c in itertools.combinations(range(1, m + 1), p)]


def _key(I: Subset) -> str:
    return json.dumps(list(I))


@dataclass(frozen=True, eq=False)
class CubeOfComplexes:
    m: int
    entries: Mapping[Subset, BoundedComplex]
    maps: Mapping[tuple[Subset, Subset], ChainMap] = field(repr=False)

    def entry(self, I) -> BoundedComplex:
        return self.entries[tuple(sorted(I))]

    def r(self, I, J) -> ChainMap:
        return self.maps[(tuple(sorted(I)), tuple(sorted(J)))]

    @property
    def window(self) -> tuple[int, int]:
        los = [C.lo for C in self.entries.values()]
        his = [C.hi for C in self.entries.values()]
        return min(los), max(his)

    def to_json(self) -> dict:
        entries = {_key(I): self.entries[I].to_json() for I in subsets(self.m)}
        maps = {}
        for I in subsets(self.m):
            for j in range(1, self.m + 1):
                if j in I:
                    continue
                J = tuple(sorted(I + (j,)))
                f, src = self.r(I, J), self.entries[I]
                maps[f"{_key(I)}->{_key(J)}"] = [
                    [[int(x) for x in row] for row in f.f(i)] for i in src.degrees]
        return {"m": self.m, "entries": entries, "maps": maps}


def make_cube(m: int, entries: Mapping, structure_maps: Mapping) -> CubeOfComplexes:
    """Validate and complete a cube.

    ``structure_maps`` must contain r_IJ for every edge J = I + {j}, either as
    a ChainMap or as a degree -> matrix mapping.  Longer maps may be supplied
    too; all composites are then checked against them.
    """
    if m < 0:
        raise InvalidCubeError("m must be nonnegative")
    ents = {}
    for I, C in entries.items():
        I = tuple(sorted(I))
        if any(not 1 <= i <= m for i in I) or len(set(I)) != len(I):
            raise InvalidCubeError(f"{list(I)} is not a subset of {{1..{m}}}")
        if not isinstance(C, BoundedComplex):
            raise InvalidCubeError(f"entry {list(I)} is not a complex")
        ents[I] = C
    missing = [I for I in subsets(m) if I not in ents]
    if missing:
        raise InvalidCubeError(f"missing entry for subset {list(missing[0])}")

    given: dict[tuple[Subset, Subset], ChainMap] = {}
    for (I, J), f in structure_maps.items():
        I, J = tuple(sorted(I)), tuple(sorted(J))
        if I not in ents or J not in ents or not set(I) < set(J):
            raise InvalidCubeError(f"structure map {list(I)}->{list(J)} is not indexed by I < J")
        if isinstance(f, ChainMap):
            if f.source is not ents[I] or f.target is not ents[J]:
                f = _as_chain_map(ents[I], ents[J], f.components, I, J)
        else:
            f = _as_chain_map(ents[I], ents[J], f, I, J)
        given[(I, J)] = f

    maps: dict[tuple[Subset, Subset], ChainMap] = {}
    for I in subsets(m):
        maps[(I, I)] = identity_map(ents[I])
    for I in subsets(m):
        for j in range(1, m + 1):
            if j not in I:
                J = tuple(sorted(I + (j,)))
                if (I, J) not in given:
                    raise InvalidCubeError(f"missing structure map {list(I)}->{list(J)}")
                maps[(I, J)] = given[(I, J)]
    # longer maps: walk through the smallest missing element first
    pairs = [(I, J) for I in subsets(m) for J in subsets(m)
             if set(I) < set(J) and len(J) - len(I) >= 2]
    for I, J in sorted(pairs, key=lambda ij: len(ij[1]) - len(ij[0])):
        j = min(set(J) - set(I))
        mid = tuple(sorted(I + (j,)))
        maps[(I, J)] = maps[(mid, J)].compose(maps[(I, mid)])
    for (I, L), f in given.items():
        if not f.equals(maps[(I, L)]):
            J = tuple(sorted(I + (min(set(L) - set(I)),)))
            raise FunctorialityError(I, J, L)
    # squares: every chain I < J < L factors through edges, so it is enough to
    # compare both ways around each square of edges
    for I in subsets(m):
        free = [j for j in range(1, m + 1) if j not in I]
        for a, b in itertools.combinations(free, 2):
            Ja, Jb = tuple(sorted(I + (a,))), tuple(sorted(I + (b,)))
            L = tuple(sorted(I + (a, b)))
            via_a = maps[(Ja, L)].compose(maps[(I, Ja)])
            via_b = maps[(Jb, L)].compose(maps[(I, Jb)])
            if not via_a.equals(via_b):
                raise FunctorialityError(I, Ja, L)
    return CubeOfComplexes(m, ents, maps)


def _as_chain_map(src, tgt, comps, I, J) -> ChainMap:
    try:
        return make_chain_map(src, tgt, comps)
    except NotAChainMapError as exc:
        raise ChainMapViolation(f"r_{list(I)}{list(J)} is not a chain map in degree {exc.degree}") from None
    except intlin.DimensionMismatchError as exc:
        raise InvalidCubeError(f"r_{list(I)}{list(J)}: {exc}") from None


def check_functoriality(K: CubeOfComplexes) -> None:
    """Check r_JL r_IJ = r_IL on every chain I < J < L."""
    S = subsets(K.m)
    for I in S:
        for J in S:
            if not set(I) < set(J):
                continue
            for L in S:
                if set(J) < set(L) and not K.r(J, L).compose(K.r(I, J)).equals(K.r(I, L)):
                    raise FunctorialityError(I, J, L)


# ---------------------------------------------------------------------------
# JSON


def cube_from_json(obj: Mapping) -> CubeOfComplexes:
    m = int(obj["m"])
    entries = {}
    for k, v in obj["entries"].items():
        entries[tuple(json.loads(k))] = complex_from_json(v)
    maps = {}
    for k, comps in obj.get("maps", {}).items():
        a, b = k.split("->")
        I, J = tuple(sorted(json.loads(a))), tuple(sorted(json.loads(b)))
        if I not in entries:
            raise InvalidCubeError(f"map {k} refers to a missing entry")
        src = entries[I]
        if len(comps) != src.hi - src.lo + 1:
            raise InvalidCubeError(f"map {k} must list one matrix per degree of its source")
        maps[(I, J)] = {src.lo + t: M for t, M in enumerate(comps)}
    return make_cube(m, entries, maps)


# ---------------------------------------------------------------------------
# signs


@dataclass(frozen=True)
class Epsilon:
    """The signed map eps_IJ = sign * r_IJ."""

    sign: int
    I: Subset
    J: Subset


def epsilon(I, J) -> Epsilon:
    I, J = tuple(sorted(I)), tuple(sorted(J))
    if len(J) != len(I) + 1:
        raise ArityError(f"|J| must be |I| + 1, got |I|={len(I)}, |J|={len(J)}")
    if not set(I) < set(J):
        return Epsilon(0, I, J)
    (extra,) = set(J) - set(I)
    d = J.index(extra) + 1
    return Epsilon(-1 if d % 2 == 0 else 1, I, J)


def _layer(K: CubeOfComplexes, p: int) -> list[Subset]:
    return subsets(K.m, p)


def _offsets(K: CubeOfComplexes, p: int, t: int) -> dict[Subset, int]:
    out, pos = {}, 0
    for I in _layer(K, p):
        out[I] = pos
        pos += K.entries[I].dim(t)
    return out


def layer_dim(K: CubeOfComplexes, p: int, t: int) -> int:
    return sum(K.entries[I].dim(t) for I in _layer(K, p))


def epsilon_matrix(K: CubeOfComplexes, p: int, t: int) -> np.ndarray:
    """Degree-t block matrix of eps : (+)_{|I|=p} K_I -> (+)_{|J|=p+1} K_J."""
    out = intlin.zeros(layer_dim(K, p + 1, t), layer_dim(K, p, t))
    if p < 0 or p >= K.m:
        return out
    src, tgt = _offsets(K, p, t), _offsets(K, p + 1, t)
    for I in _layer(K, p):
        for J in _layer(K, p + 1):
            e = epsilon(I, J)
            if e.sign == 0:
                continue
            blk = K.r(I, J).f(t)
            r, c = tgt[J], src[I]
            out[r:r + blk.shape[0], c:c + blk.shape[1]] = e.sign * blk
    return out


def epsilon_composite(K: CubeOfComplexes, p: int, t: int) -> np.ndarray:
    return intlin.matmul(epsilon_matrix(K, p + 1, t), epsilon_matrix(K, p, t))


def layer_complex(K: CubeOfComplexes, p: int) -> BoundedComplex:
    """(+)_{|I|=p} K_I, summands in lexicographic order."""
    lo, hi = K.window
    return regrade(direct_sum([K.entries[I] for I in _layer(K, p)]), lo, hi)


def epsilon_map(K: CubeOfComplexes, p: int) -> ChainMap:
    lo, hi = K.window
    src, tgt = layer_complex(K, p), layer_complex(K, p + 1)
    return ChainMap(src, tgt, {t: epsilon_matrix(K, p, t) for t in range(lo, hi + 1)})


# ---------------------------------------------------------------------------
# cofiber


@dataclass(frozen=True, eq=False)
class FilteredComplex:
    """A complex with the filtration by coordinate suffixes.

    ``starts[n][p]`` is the first coordinate of the F^p part of degree n,
    for p = base..m+1.
    """

    complex: BoundedComplex
    base: int
    m: int
    starts: Mapping[int, tuple[int, ...]]

    def fstart(self, n: int, p: int) -> int:
        if n not in self.starts:
            return 0
        s = self.starts[n]
        p = min(max(p, self.base), self.m + 1)
        return s[p - self.base]


def theta_map(K: CubeOfComplexes, p: int, target: FilteredComplex) -> ChainMap:
    """Theta_{p+1} : S_p[m-p-1] -> cfb_{>=p+1} K with block column (eps_p ; 0).

    S_p is regraded without a sign change; see ``naive_shift``.
    """
    m = K.m
    src = naive_shift(layer_complex(K, p), m - p - 1)
    C = target.complex
    comps = {}
    for n in range(min(src.lo, C.lo), max(src.hi, C.hi) + 1):
        t = n - (m - p - 1)
        eps = epsilon_matrix(K, p, t)
        blk = intlin.zeros(C.dim(n), src.dim(n))
        blk[:eps.shape[0], :] = eps
        comps[n] = blk
    return ChainMap(src, C, comps)


def _top(K: CubeOfComplexes) -> FilteredComplex:
    lo, hi = K.window
    top = regrade(K.entries[tuple(range(1, K.m + 1))], lo, hi)
    starts = {n: (0, top.dim(n)) for n in top.degrees}
    return FilteredComplex(top, K.m, K.m, starts)


def filtered_cofiber(K: CubeOfComplexes, p: int = 0) -> FilteredComplex:
    """cfb_{>=p} K with its filtration, built by the descending cone recursion."""
    m = K.m
    p = max(p, 0)
    if p > m:
        raise ValueError("filtered_cofiber needs p <= m")
    F = _top(K)
    for q in range(m - 1, p - 1, -1):
        theta = theta_map(K, q, F)
        _check_chain_map(theta, f"Theta_{q + 1}")
        if q >= 1:
            # Theta_{q+1} composed with the shifted eps_{q-1} must vanish
            for n in theta.degrees:
                t = n - (m - q - 1)
                prod = intlin.matmul(theta.f(n), epsilon_matrix(K, q - 1, t))
                if not intlin.is_zero(prod):
                    raise InvariantViolation(f"Theta_{q + 1} . eps_{q - 1} != 0 in degree {n}")
        C = cone(theta)
        d2 = [intlin.matmul(C.d(i - 1), C.d(i)) for i in C.degrees]
        if not all(intlin.is_zero(x) for x in d2):
            raise InvariantViolation(f"cfb_>={q} is not a complex")
        starts = {}
        for n in C.degrees:
            head = theta.source.dim(n - 1)
            old = F.starts.get(n, (0,) * (m - q + 1))
            starts[n] = (0,) + tuple(head + s for s in old)
        F = FilteredComplex(C, q, m, starts)
    return F


def _check_chain_map(f: ChainMap, name: str) -> None:
    for i in f.degrees:
        if not np.array_equal(intlin.matmul(f.f(i - 1), f.source.d(i)),
                              intlin.matmul(f.target.d(i), f.f(i))):
            raise InvariantViolation(f"{name} is not a chain map in degree {i}")


def cfb_geq(K: CubeOfComplexes, p: int) -> BoundedComplex:
    if p >= K.m + 1:
        lo, hi = K.window
        return make_complex([0] * (hi - lo + 1), lo=lo)
    return filtered_cofiber(K, max(p, 0)).complex


def cofiber(K: CubeOfComplexes) -> BoundedComplex:
    return cfb_geq(K, 0)


def cofiber_closed_form(K: CubeOfComplexes, p: int = 0) -> BoundedComplex:
    """(+)_{q>=p} S_q[m-q] with diagonal blocks (-1)^(q-p) d and
    off-diagonal blocks (-1)^(q-p) eps_q; used to cross-check the recursion."""
    m = K.m
    shifted = {q: naive_shift(layer_complex(K, q), m - q) for q in range(p, m + 1)}
    lo = min(C.lo for C in shifted.values())
    hi = max(C.hi for C in shifted.values())
    dims, diffs = [], []
    for n in range(lo, hi + 1):
        rows = [shifted[q].dim(n - 1) for q in range(p, m + 1)]
        cols = [shifted[q].dim(n) for q in range(p, m + 1)]
        D = intlin.zeros(sum(rows), sum(cols))
        r0 = [sum(rows[:k]) for k in range(len(rows))]
        c0 = [sum(cols[:k]) for k in range(len(cols))]
        for k, q in enumerate(range(p, m + 1)):
            s = -1 if (q - p) % 2 else 1
            blk = shifted[q].d(n)
            D[r0[k]:r0[k] + rows[k], c0[k]:c0[k] + cols[k]] = s * blk
            if q < m:
                eps = epsilon_matrix(K, q, n - (m - q))
                D[r0[k + 1]:r0[k + 1] + rows[k + 1], c0[k]:c0[k] + cols[k]] = s * eps
        dims.append(sum(cols))
        diffs.append(D)
    return BoundedComplex(lo, hi, tuple(dims), tuple(diffs))


def sub_cubes(K: CubeOfComplexes) -> tuple[CubeOfComplexes, CubeOfComplexes]:
    """(K~, K') with K~_J = K_J and K'_J = K_{J + {m}} for J inside {1..m-1}."""
    m = K.m
    if m < 2:
        raise ValueError("sub_cubes needs m >= 2")
    S = subsets(m - 1)
    tilde_e = {J: K.entries[J] for J in S}
    prime_e = {J: K.entries[J + (m,)] for J in S}
    tilde_m, prime_m = {}, {}
    for I in S:
        for J in S:
            if set(I) < set(J):
                tilde_m[(I, J)] = K.r(I, J)
                prime_m[(I, J)] = K.r(I + (m,), J + (m,))
    return make_cube(m - 1, tilde_e, tilde_m), make_cube(m - 1, prime_e, prime_m)


# ---------------------------------------------------------------------------
# the spectral sequence of the filtration F^p cfb = (+)_{|I|>=p}


@dataclass(frozen=True, eq=False)
class PageEntry:
    """E_r^{p,q} = Z / B with a reduced presentation.

    ``gens`` are representatives in the cofiber (columns), ``Z`` the lattice
    Z_r^p, ``to_gens`` sends coordinates in Z's basis to generator
    coordinates, and ``relations`` is the relation matrix on ``gens``.
    """

    group: AbelianPresentation
    gens: np.ndarray
    relations: np.ndarray
    Z: np.ndarray
    to_gens: np.ndarray


@dataclass(frozen=True, eq=False)
class SpectralSequencePage:
    r: int
    groups: Mapping[tuple[int, int], AbelianPresentation]
    differentials: Mapping[tuple[int, int], np.ndarray]
    filtered: FilteredComplex = field(repr=False)
    entries: Mapping[tuple[int, int], PageEntry] = field(repr=False)

    def nonzero(self) -> dict[tuple[int, int], AbelianPresentation]:
        return {k: g for k, g in self.groups.items() if not g.is_zero()}

    def to_json(self) -> dict:
        groups = [{"p": p, "q": q, **g.to_json()} for (p, q), g in sorted(self.groups.items())
                  if not g.is_zero()]
        diffs = []
        for (p, q), M in sorted(self.differentials.items()):
            if M.size and not intlin.is_zero(M):
                diffs.append({"p": p, "q": q, "matrix": [[int(x) for x in row] for row in M]})
        return {"r": self.r, "groups": groups, "differentials": diffs}


class _Lattices:
    """Memoised Z_r^p(n) lattices of a filtered complex."""

    def __init__(self, F: FilteredComplex):
        self.F = F
        self._z: dict[tuple[int, int, int], np.ndarray] = {}

    def Z(self, r: int, p: int, n: int) -> np.ndarray:
        """{x in F^p C_n : dx in F^(p+r)}; depends on p and r only through the cut points."""
        F, C = self.F, self.F.complex
        s, t = F.fstart(n, p), F.fstart(n - 1, p + r)
        key = (s, t, n)
        hit = self._z.get(key)
        if hit is not None:
            return hit
        N = C.dim(n)
        if s >= N:
            Z = intlin.zeros(N, 0)
        else:
            ker = intlin.kernel(C.d(n)[:t, s:]) if t else intlin.identity(N - s)
            Z = intlin.zeros(N, ker.shape[1])
            Z[s:, :] = ker
        self._z[key] = Z
        return Z

    def B(self, r: int, p: int, n: int) -> np.ndarray:
        a = self.Z(r - 1, p + 1, n)
        b = intlin.matmul(self.F.complex.d(n + 1), self.Z(r - 1, p - r + 1, n + 1))
        return np.concatenate([a, b], axis=1)

    def entry(self, r: int, p: int, n: int) -> PageEntry:
        Z = self.Z(r, p, n)
        coords = intlin.solve_in_lattice(Z, self.B(r, p, n)) if Z.shape[1] else intlin.zeros(0, 0)
        if coords is None:
            raise InvariantViolation(f"boundary lattice escapes Z_{r}^{p} in degree {n}")
        return _reduce_presentation(Z, coords)


def _reduce_presentation(Z: np.ndarray, rel: np.ndarray) -> PageEntry:
    g = Z.shape[1]
    if g == 0:
        return PageEntry(intlin.ZERO, Z, intlin.zeros(0, 0), Z, intlin.zeros(0, 0))
    if rel.shape[1] == 0:
        rel = intlin.zeros(g, 0)
    s = intlin.smith(rel)
    diag = s.diagonal
    k = sum(1 for d in diag if d == 1)
    keep = g - k
    gens = intlin.matmul(Z, s.Uinv[:, k:])
    to_gens = s.U[k:, :]
    relations = intlin.zeros(keep, keep)
    for i in range(keep):
        if k + i < len(diag):
            relations[i, i] = diag[k + i]
    group = AbelianPresentation(sum(1 for i in range(keep) if relations[i, i] == 0),
                                tuple(int(relations[i, i]) for i in range(keep) if relations[i, i] > 1))
    return PageEntry(group, gens, relations, Z, to_gens)


def _build_page(r: int, lat: _Lattices) -> SpectralSequencePage:
    F = lat.F
    C = F.complex
    entries, groups, diffs = {}, {}, {}
    for n in C.degrees:
        for p in range(F.base, F.m + 1):
            entries[(p, -n - p)] = lat.entry(r, p, n)
    for (p, q), e in entries.items():
        groups[(p, q)] = e.group
        n = -p - q
        tgt = entries.get((p + r, q - r + 1))
        if tgt is None:
            diffs[(p, q)] = intlin.zeros(0, e.gens.shape[1])
            continue
        image = intlin.matmul(C.d(n), e.gens)
        coords = intlin.solve_in_lattice(tgt.Z, image) if tgt.Z.shape[1] else (
            intlin.zeros(0, image.shape[1]) if intlin.is_zero(image) else None)
        if coords is None:
            raise InvariantViolation(f"d_{r} leaves Z_{r}^{p + r} at ({p},{q})")
        diffs[(p, q)] = intlin.matmul(tgt.to_gens, coords) if tgt.Z.shape[1] else coords
    page = SpectralSequencePage(r, groups, diffs, F, entries)
    check_page(page)
    return page


def check_page(P: SpectralSequencePage) -> None:
    """d_r is well defined on the presentations and d_r . d_r = 0."""
    r = P.r
    for (p, q), M in P.differentials.items():
        tgt = P.entries.get((p + r, q - r + 1))
        if tgt is None:
            continue
        src = P.entries[(p, q)]
        if src.relations.size and not intlin.contains(tgt.relations, intlin.matmul(M, src.relations)) \
                and tgt.relations.size:
            raise InvariantViolation(f"d_{r} does not respect relations at ({p},{q})")
        nxt = P.differentials.get((p + r, q - r + 1))
        if nxt is None or not nxt.size or not M.size:
            continue
        comp = intlin.matmul(nxt, M)
        far = P.entries.get((p + 2 * r, q - 2 * r + 2))
        ok = intlin.is_zero(comp) or (far is not None and far.relations.size
                                      and intlin.contains(far.relations, comp))
        if not ok:
            raise InvariantViolation(f"d_{r} . d_{r} != 0 at ({p},{q})")


def e1_page(K: CubeOfComplexes) -> SpectralSequencePage:
    F = filtered_cofiber(K, 0)
    return _build_page(1, _Lattices(F))


def _lattices_for(P: SpectralSequencePage) -> _Lattices:
    lat = getattr(P.filtered, "_lat", None)
    if lat is None:
        lat = _Lattices(P.filtered)
        object.__setattr__(P.filtered, "_lat", lat)
    return lat


def page_homology(P: SpectralSequencePage, p: int, q: int) -> AbelianPresentation:
    """ker d_r / im d_r at (p, q), computed on the presentations of P."""
    r = P.r
    e = P.entries[(p, q)]
    g = e.gens.shape[1]
    if g == 0:
        return intlin.ZERO
    out = P.differentials[(p, q)]
    tgt = P.entries.get((p + r, q - r + 1))
    rel_t = tgt.relations if tgt is not None else intlin.zeros(0, 0)
    if out.shape[0]:
        K = intlin.kernel(np.concatenate([out, rel_t], axis=1) if rel_t.size else out)
        X = K[:g, :]
    else:
        X = intlin.identity(g)
    src = P.entries.get((p - r, q + r - 1))
    inc = P.differentials.get((p - r, q + r - 1)) if src is not None else None
    cols = [e.relations]
    if inc is not None and inc.size:
        cols.append(inc)
    D = np.concatenate(cols, axis=1) if any(c.size for c in cols) else intlin.zeros(g, 0)
    if D.shape[1] == 0:
        D = intlin.zeros(g, 0)
    Zb = intlin.hermite_basis(np.concatenate([X, D], axis=1) if D.shape[1] else X)
    if Zb.shape[1] == 0:
        return intlin.ZERO
    group, _ = intlin.subquotient(Zb, D) if D.shape[1] else (intlin.cokernel(intlin.zeros(Zb.shape[1], 0)), None)
    return group


def turn_page(P: SpectralSequencePage) -> SpectralSequencePage:
    check_page(P)
    nxt = _build_page(P.r + 1, _lattices_for(P))
    for key in P.entries:
        h = page_homology(P, *key)
        if h != nxt.groups[key]:
            raise InvariantViolation(
                f"E_{P.r + 1}^{key} = {nxt.groups[key]} but H(E_{P.r}, d_{P.r}) = {h}")
    return nxt


def pages(K: CubeOfComplexes, last: int | None = None) -> list[SpectralSequencePage]:
    """E_1, ..., E_last; by default up to E_{m+1} = E_infinity."""
    last = K.m + 1 if last is None else last
    P = e1_page(K)
    out = [P]
    while P.r < last:
        P = turn_page(P)
        out.append(P)
    return out


@dataclass
class ConvergenceReport:
    rows: list[dict]
    passed: bool
    graded_match: bool

    def to_json(self) -> dict:
        return {"status": "PASS" if self.passed else "FAIL", "graded_match": self.graded_match,
                "degrees": self.rows}


def e_infinity_compare(K: CubeOfComplexes, einf: SpectralSequencePage | None = None) -> ConvergenceReport:
    """Compare E_infinity with H(cfb K) in each total degree t = p + q.

    Each row carries (sum of ranks, product of torsion orders) for the E_inf
    entries with p + q = t and the same two numbers for H_{-t}(cfb K).
    ``graded_match`` separately records whether every E_inf^{p,q} is
    isomorphic to the graded piece F^p H / F^{p+1} H computed from the
    filtration of homology.
    """
    if einf is None:
        einf = pages(K)[-1]
    F = einf.filtered
    C = F.complex
    rows, ok, graded = [], True, True
    for n in C.degrees:
        t = -n
        parts = [g for (p, q), g in einf.groups.items() if p + q == t]
        e_rank = sum(g.rank for g in parts)
        e_tors = 1
        for g in parts:
            e_tors *= g.torsion_order
        H = homology(C, n)
        match = e_rank == H.rank and e_tors == H.torsion_order
        ok &= match
        for p in range(F.base, F.m + 1):
            if homology_graded_piece(F, p, n) != einf.groups[(p, t - p)]:
                graded = False
        rows.append({"t": t, "homological_degree": n,
                     "e_infinity": {"rank": e_rank, "torsion_order": e_tors},
                     "homology": {"rank": H.rank, "torsion_order": H.torsion_order},
                     "match": match})
    return ConvergenceReport(rows, ok, graded)


def homology_graded_piece(F: FilteredComplex, p: int, n: int) -> AbelianPresentation:
    """F^p H_n / F^{p+1} H_n with F^p H_n the image of cycles lying in F^p."""
    C = F.complex
    N = C.dim(n)

    def cycles_in(pp):
        s = F.fstart(n, pp)
        if s >= N:
            return intlin.zeros(N, 0)
        ker = intlin.kernel(C.d(n)[:, s:])
        Z = intlin.zeros(N, ker.shape[1])
        Z[s:, :] = ker
        return Z

    Zp = cycles_in(p)
    if Zp.shape[1] == 0:
        return intlin.ZERO
    B = intlin.matmul(C.d(n + 1), intlin.identity(C.dim(n + 1)))
    # boundaries lying in F^p: B meets the coordinate suffix
    s = F.fstart(n, p)
    if s and B.shape[1]:
        comb = intlin.kernel(B[:s, :])
        Bp = intlin.matmul(B, comb)
    else:
        Bp = B
    D = np.concatenate([cycles_in(p + 1), Bp], axis=1)
    if D.shape[1] == 0:
        return intlin.cokernel(intlin.zeros(Zp.shape[1], 0))
    group, _ = intlin.subquotient(Zp, D)
    return group


# ---------------------------------------------------------------------------
# Koszul-type cubes


def koszul_cube(M_dims: Sequence[int], ops: Sequence) -> CubeOfComplexes:
    """Cube of a graded free module M = M_0 + M_1 + ... with commuting degree-one operators.

    The entry K_I carries M_d in homological degree |I| - d with zero
    differential, and r_{I, I+{j}} = e_j.  So every entry is M regraded and
    each structure map raises the M-grading by one.
    """
    dims = [int(x) for x in M_dims]
    total = sum(dims)
    m = len(ops)
    ops = [intlin.mat(e, (total, total) if not total else None) for e in ops]
    starts = [sum(dims[:d]) for d in range(len(dims) + 1)]
    for k, e in enumerate(ops):
        if e.shape != (total, total):
            raise intlin.DimensionMismatchError(f"operator {k + 1} is not {total}x{total}")
        for d in range(len(dims)):
            for d2 in range(len(dims)):
                blk = e[starts[d2]:starts[d2 + 1], starts[d]:starts[d + 1]]
                if d2 != d + 1 and not intlin.is_zero(blk):
                    raise ValueError(f"operator {k + 1} does not raise the grading by one")
    for a, b in itertools.combinations(range(m), 2):
        if not np.array_equal(intlin.matmul(ops[a], ops[b]), intlin.matmul(ops[b], ops[a])):
            raise NonCommutingError(a + 1, b + 1)
    top = len(dims) - 1

    def entry(size):
        # degrees size - top .. size, index k <-> M_{size - (lo + k)}
        lo = size - top
        return make_complex([dims[size - (lo + k)] for k in range(top + 1)], lo=lo)

    entries = {I: entry(len(I)) for I in subsets(m)}
    maps = {}
    for I in subsets(m):
        src = entries[I]
        for j in range(1, m + 1):
            if j in I:
                continue
            J = tuple(sorted(I + (j,)))
            tgt = entries[J]
            comps = {}
            for t in src.degrees:
                d = len(I) - t
                if d + 1 > top:
                    continue
                comps[t] = ops[j - 1][starts[d + 1]:starts[d + 2], starts[d]:starts[d + 1]]
            maps[(I, J)] = make_chain_map(src, tgt, comps)
    return make_cube(m, entries, maps)


# ---------------------------------------------------------------------------
# random data


def _rational_kernel(A: list[list[int]], ncols: int) -> list[list[int]]:
    """Integer vectors spanning the rational kernel of A (not saturated)."""
    rows = [[Fraction(x) for x in r] for r in A if any(r)]
    pivots = []
    r = 0
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
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fcol in free:
        v = [Fraction(0)] * ncols
        v[fcol] = Fraction(1)
        for i, pc in enumerate(pivots):
            v[pc] = -rows[i][fcol]
        den = lcm(*(x.denominator for x in v))
        basis.append([int(x * den) for x in v])
    return basis


def random_complex(rng: random.Random, lo: int = 0, length: int = 3, max_dim: int = 3,
                   bound: int = 3) -> BoundedComplex:
    dims = [rng.randint(0, max_dim) for _ in range(length)]
    diffs = {}
    for k in range(1, length):
        i = lo + k
        rows, cols = dims[k - 1], dims[k]
        prev = diffs.get(i - 1)
        if prev is None:
            D = [[rng.randint(-bound, bound) for _ in range(cols)] for _ in range(rows)]
        else:
            basis = _rational_kernel([[int(x) for x in r] for r in prev], rows)
            D = [[0] * cols for _ in range(rows)]
            for c in range(cols):
                for _ in range(8):
                    coeffs = [rng.randint(-1, 1) for _ in basis]
                    v = [sum(a * b[j] for a, b in zip(coeffs, basis)) for j in range(rows)]
                    if all(-bound <= x <= bound for x in v):
                        for j in range(rows):
                            D[j][c] = v[j]
                        break
        diffs[i] = intlin.mat(D, (rows, cols))
    return make_complex(dims, diffs, lo=lo)


def _random_transformation(rng, src: CubeOfComplexes, tgt: CubeOfComplexes) -> dict[Subset, dict]:
    """A random morphism of cubes src -> tgt (one chain map per subset)."""
    S = subsets(src.m)
    lo, hi = src.window
    lo, hi = min(lo, tgt.window[0]), max(hi, tgt.window[1])
    var = {}
    nvar = 0
    for J in S:
        for i in range(lo, hi + 1):
            a, b = tgt.entries[J].dim(i), src.entries[J].dim(i)
            var[(J, i)] = (nvar, a, b)
            nvar += a * b
    eqs: list[list[int]] = []

    def emit(J, i, Lm, Rm, J2, i2, Lm2, Rm2):
        # Lm . X_(J,i) . Rm  ==  Lm2 . X_(J2,i2) . Rm2 entrywise
        out_r, out_c = Lm.shape[0], Rm.shape[1]
        for a in range(out_r):
            for c in range(out_c):
                row = [0] * nvar
                for (KJ, Ki, L, R, s) in ((J, i, Lm, Rm, 1), (J2, i2, Lm2, Rm2, -1)):
                    off, ra, cb = var[(KJ, Ki)]
                    for x in range(ra):
                        if L[a, x] == 0:
                            continue
                        for y in range(cb):
                            if R[y, c]:
                                row[off + x * cb + y] += s * int(L[a, x]) * int(R[y, c])
                if any(row):
                    eqs.append(row)

    for J in S:
        Ks, Kt = src.entries[J], tgt.entries[J]
        for i in range(lo + 1, hi + 1):
            # X_{i-1} d^s_i = d^t_i X_i
            emit(J, i - 1, intlin.identity(Kt.dim(i - 1)), Ks.d(i),
                 J, i, Kt.d(i), intlin.identity(Ks.dim(i)))
        for j in range(1, src.m + 1):
            if j in J:
                continue
            J2 = tuple(sorted(J + (j,)))
            for i in range(lo, hi + 1):
                # tgt.r X_J = X_J2 src.r
                emit(J, i, tgt.r(J, J2).f(i), intlin.identity(Ks.dim(i)),
                     J2, i, intlin.identity(tgt.entries[J2].dim(i)), src.r(J, J2).f(i))
    basis = _rational_kernel(eqs, nvar)
    best = None
    for _ in range(6):
        coeffs = [rng.choice((-1, 0, 0, 1)) for _ in basis]
        v = [sum(c * b[k] for c, b in zip(coeffs, basis)) for k in range(nvar)]
        if all(abs(x) <= 6 for x in v):
            best = v
            break
    if best is None:
        best = [0] * nvar
        if basis:
            best = min(basis, key=lambda b: max(map(abs, b), default=0))
    out = {}
    for J in S:
        comps = {}
        for i in range(lo, hi + 1):
            off, a, b = var[(J, i)]
            comps[i] = intlin.mat([best[off + x * b:off + (x + 1) * b] for x in range(a)], (a, b))
        out[J] = comps
    return out


def random_cube(rng: random.Random, m: int, length: int = 3, max_dim: int = 3,
                bound: int = 3, lo: int = 0) -> CubeOfComplexes:
    """Random valid m-cube, built from two random (m-1)-cubes and a random
    morphism between them, so functoriality holds by construction."""
    if m == 0:
        C = random_complex(rng, lo, length, max_dim, bound)
        return make_cube(0, {(): C}, {})
    tilde = random_cube(rng, m - 1, length, max_dim, bound, lo)
    if rng.random() < 0.4:
        prime = tilde
    else:
        prime = random_cube(rng, m - 1, length, max_dim, bound, lo)
    eta = _random_transformation(rng, tilde, prime)
    entries, maps = {}, {}
    for J in subsets(m - 1):
        entries[J] = tilde.entries[J]
        entries[J + (m,)] = prime.entries[J]
        maps[(J, J + (m,))] = eta[J]
        for j in range(1, m):
            if j not in J:
                J2 = tuple(sorted(J + (j,)))
                maps[(J, J2)] = tilde.r(J, J2)
                maps[(J + (m,), J2 + (m,))] = prime.r(J, J2)
    return make_cube(m, entries, maps)


def cofiber_layout(K: CubeOfComplexes, n: int) -> list[tuple[Subset, int, int]]:
    """(I, start, size) for the K_I summands of cfb K in degree n, in coordinate order."""
    out, pos = [], 0
    for q in range(K.m + 1):
        t = n - (K.m - q)
        for I in _layer(K, q):
            size = K.entries[I].dim(t)
            out.append((I, pos, size))
            pos += size
    return out


def subcube_connecting_map(K: CubeOfComplexes) -> tuple[ChainMap, BoundedComplex]:
    """Split cfb K along the subsets containing m.

    The summands with m in I form a subcomplex S (a signed copy of cfb K')
    and the others a quotient Q (a copy of cfb K~ regraded by one).  After
    reordering coordinates, cfb K is exactly the cone of the returned chain
    map phi : Q[-1] -> S; the reordered complex is returned alongside.
    """
    m = K.m
    C = cofiber(K)
    perms = {}
    for n in range(C.lo - 1, C.hi + 2):
        lay = cofiber_layout(K, n)
        q_idx = [s + k for I, s, z in lay if m not in I for k in range(z)]
        s_idx = [s + k for I, s, z in lay if m in I for k in range(z)]
        perms[n] = (q_idx, s_idx)
    qd = {n: len(perms[n][0]) for n in perms}
    sd = {n: len(perms[n][1]) for n in perms}
    lo, hi = C.lo, C.hi
    Qdiffs, Sdiffs, phis, Bdiffs = {}, {}, {}, {}
    for n in range(lo, hi + 1):
        D = C.d(n)
        qi, si = perms[n]
        qo, so = perms[n - 1]
        order_in, order_out = qi + si, qo + so
        P = D[np.ix_(order_out, order_in)] if D.size else intlin.zeros(len(order_out), len(order_in))
        Bdiffs[n] = P
        if not intlin.is_zero(P[:len(qo), len(qi):]):
            raise InvariantViolation("summands containing m do not form a subcomplex")
        Qdiffs[n] = P[:len(qo), :len(qi)]
        Sdiffs[n] = -P[len(qo):, len(qi):]
        phis[n] = P[len(qo):, :len(qi)]
    # X = Q regraded down by one, Y = S with the negated differential
    X = BoundedComplex(lo - 1, hi - 1, tuple(qd[n] for n in range(lo, hi + 1)),
                       tuple(Qdiffs[n] for n in range(lo, hi + 1)))
    Y = BoundedComplex(lo, hi, tuple(sd[n] for n in range(lo, hi + 1)),
                       tuple(Sdiffs[n] for n in range(lo, hi + 1)))
    phi = ChainMap(X, Y, {n - 1: phis[n] for n in range(lo, hi + 1)})
    _check_chain_map(phi, "phi")
    B = BoundedComplex(lo, hi, C.dims, tuple(Bdiffs[n] for n in range(lo, hi + 1)))
    return phi, B

"""Root data and Weyl groups of split semisimple groups of small rank.

Characters are integer vectors in the basis of fundamental weights, so the
pairing with a simple coroot is just a coordinate: <chi, alpha_i^vee> = chi[i].
The character lattice T* is recorded as a basis matrix whose columns are
characters; it always sits between the root lattice Q and the weight lattice.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import intlin

DEFAULT_WEYL_BOUND = 51840

_MIN_RANK = {"A": 1, "B": 2, "C": 3, "D": 4}
_EXCEPTIONAL = {"E": (6, 7, 8), "F": (4,), "G": (2,)}


class RootDatumError(ValueError):
    pass


class WeylBoundError(RuntimeError):
    pass


class LatticeError(ValueError):
    """A character is not in T*, or a proposed T* is not between Q and the weights."""


def cartan_matrix(dynkin_type: str, rank: int) -> np.ndarray:
    """Cartan matrix ``A[i, j] = <alpha_i^vee, alpha_j>`` in Bourbaki numbering."""
    t, n = dynkin_type.upper(), rank
    if t in _MIN_RANK:
        if n < _MIN_RANK[t]:
            raise RootDatumError(f"{t}{n} is not a legal type (need rank >= {_MIN_RANK[t]})")
    elif t in _EXCEPTIONAL:
        if n not in _EXCEPTIONAL[t]:
            raise RootDatumError(f"{t}{n} is not a legal type")
    else:
        raise RootDatumError(f"unknown Dynkin type {dynkin_type!r}")
    if n > 8:
        raise RootDatumError(f"rank {n} exceeds the supported maximum of 8")

    A = intlin.identity(n) * 2

    def link(i, j, a_ij=-1, a_ji=-1):
        A[i, j], A[j, i] = a_ij, a_ji

    if t in "ABC":
        for i in range(n - 1):
            link(i, i + 1)
        if t == "B":
            link(n - 2, n - 1, -1, -2)
        elif t == "C":
            link(n - 2, n - 1, -2, -1)
    elif t == "D":
        for i in range(n - 2):
            link(i, i + 1)
        link(n - 3, n - 1)
    elif t == "E":
        link(0, 2)
        link(1, 3)
        for i in range(2, n - 1):
            link(i, i + 1)
    elif t == "F":
        link(0, 1)
        link(1, 2, -1, -2)
        link(2, 3)
    elif t == "G":
        link(0, 1, -3, -1)
    return A


@dataclass(frozen=True)
class WeylElement:
    word: tuple[int, ...]
    matrix: tuple[tuple[int, ...], ...]

    @property
    def length(self) -> int:
        return len(self.word)

    def act(self, chi) -> tuple[int, ...]:
        return tuple(int(sum(a * b for a, b in zip(row, chi))) for row in self.matrix)

    def word_str(self) -> str:
        return "".join(f"s{i + 1}" for i in self.word) or "e"


@dataclass(frozen=True, eq=False)
class RootDatum:
    dynkin_type: str
    rank: int
    cartan: np.ndarray
    char_lattice: np.ndarray = field(repr=False)
    lattice_name: str = "custom"

    @property
    def name(self) -> str:
        return f"{self.dynkin_type}{self.rank}"

    @cached_property
    def simple_roots(self) -> list[tuple[int, ...]]:
        """Simple roots in the fundamental weight basis (columns of the Cartan matrix)."""
        return [tuple(int(x) for x in self.cartan[:, j]) for j in range(self.rank)]

    @cached_property
    def fundamental_weights(self) -> list[tuple[int, ...]]:
        return [tuple(int(i == j) for i in range(self.rank)) for j in range(self.rank)]

    @cached_property
    def rho(self) -> tuple[int, ...]:
        return (1,) * self.rank

    @cached_property
    def positive_roots(self) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
        """Pairs (root in weight coordinates, coroot in simple-coroot coordinates)."""
        n, A = self.rank, self.cartan
        At = A.T
        start = [(tuple(int(i == k) for i in range(n)), tuple(int(i == k) for i in range(n)))
                 for k in range(n)]
        seen = set(start)
        frontier = list(start)
        while frontier:
            nxt = []
            for r, c in frontier:
                for j in range(n):
                    # s_j on the root (simple root coords) and on the coroot
                    pr = sum(int(A[j, k]) * r[k] for k in range(n))
                    pc = sum(int(At[j, k]) * c[k] for k in range(n))
                    r2 = tuple(r[k] - (pr if k == j else 0) for k in range(n))
                    c2 = tuple(c[k] - (pc if k == j else 0) for k in range(n))
                    if all(x >= 0 for x in r2) and (r2, c2) not in seen:
                        seen.add((r2, c2))
                        nxt.append((r2, c2))
            frontier = nxt
        out = []
        for r, c in sorted(seen, key=lambda rc: (sum(rc[0]), rc[0])):
            omega = tuple(int(sum(A[i, k] * r[k] for k in range(n))) for i in range(n))
            out.append((omega, c))
        return out

    def pairing(self, chi, coroot) -> int:
        return int(sum(a * b for a, b in zip(chi, coroot)))

    def in_char_lattice(self, chi) -> bool:
        v = intlin.mat([list(chi)]).T
        return intlin.contains(self.char_lattice, v)

    def char_basis(self) -> list[tuple[int, ...]]:
        return [tuple(int(x) for x in self.char_lattice[:, j]) for j in range(self.rank)]

    def simple_reflection(self, i: int) -> np.ndarray:
        S = intlin.identity(self.rank)
        for k in range(self.rank):
            S[k, i] -= self.cartan[k, i]
        return S

    def reflection(self, root, coroot) -> np.ndarray:
        """chi -> chi - <chi, coroot> root, as a matrix on weight coordinates."""
        S = intlin.identity(self.rank)
        for a in range(self.rank):
            for b in range(self.rank):
                S[a, b] -= root[a] * coroot[b]
        return S

    def to_json(self) -> dict:
        return {
            "type": self.dynkin_type,
            "rank": self.rank,
            "lattice": self.lattice_name,
            "lattice_basis": [[int(x) for x in row] for row in self.char_lattice],
        }


def build_root_datum(dynkin_type: str, rank: int, lattice="simply_connected") -> RootDatum:
    """Build a root datum; ``lattice`` is a name or a basis matrix (columns in weight coords)."""
    A = cartan_matrix(dynkin_type, rank)
    if isinstance(lattice, str):
        if lattice == "simply_connected":
            basis, name = intlin.identity(rank), lattice
        elif lattice == "adjoint":
            basis, name = A.copy(), lattice
        else:
            raise RootDatumError(f"unknown lattice {lattice!r}")
    else:
        basis, name = intlin.mat(lattice), "custom"
        if basis.shape != (rank, rank) or intlin.determinant(basis) == 0:
            raise LatticeError("lattice basis must be a nonsingular rank x rank matrix")
        if not intlin.contains(basis, A):
            raise LatticeError("lattice does not contain the root lattice")
    return RootDatum(dynkin_type.upper(), rank, A, basis, name)


def weyl_enumerate(rd: RootDatum, bound: int = DEFAULT_WEYL_BOUND) -> list[WeylElement]:
    """All Weyl group elements with reduced words, sorted by length then word."""
    key = _weyl_table(rd, bound)
    return key.elements


@dataclass
class WeylTable:
    elements: list[WeylElement]
    index: dict[tuple[int, ...], int]  # w(rho) -> position

    def lookup(self, matrix: np.ndarray, rho) -> int:
        v = tuple(int(sum(matrix[i, k] * rho[k] for k in range(len(rho)))) for i in range(len(rho)))
        return self.index[v]


_TABLES: dict[tuple, WeylTable] = {}


def _weyl_table(rd: RootDatum, bound: int = DEFAULT_WEYL_BOUND) -> WeylTable:
    cache_key = (rd.dynkin_type, rd.rank)
    table = _TABLES.get(cache_key)
    if table is not None:
        if len(table.elements) > bound:
            raise WeylBoundError(f"|W({rd.name})| = {len(table.elements)} exceeds bound {bound}")
        return table
    n = rd.rank
    gens = [np.array(rd.simple_reflection(i), dtype=np.int64) for i in range(n)]
    rho = np.ones(n, dtype=np.int64)
    ident = np.eye(n, dtype=np.int64)
    seen = {tuple(rho): ((), ident)}
    level = [((), ident)]
    while level:
        nxt = []
        for word, M in level:
            for i, S in enumerate(gens):
                M2 = M @ S
                k = tuple(M2 @ rho)
                if k not in seen:
                    seen[k] = (word + (i,), M2)
                    nxt.append((word + (i,), M2))
                    if len(seen) > bound:
                        raise WeylBoundError(f"|W({rd.name})| exceeds bound {bound}")
        level = nxt
    items = sorted(seen.items(), key=lambda kv: (len(kv[1][0]), kv[1][0]))
    elements = [WeylElement(word, tuple(tuple(int(x) for x in row) for row in M))
                for _, (word, M) in items]
    index = {k: i for i, (k, _) in enumerate(items)}
    table = WeylTable(elements, index)
    _TABLES[cache_key] = table
    return table


def weyl_table(rd: RootDatum, bound: int = DEFAULT_WEYL_BOUND) -> WeylTable:
    return _weyl_table(rd, bound)


def poincare_polynomial(rd: RootDatum, bound: int = DEFAULT_WEYL_BOUND) -> list[int]:
    elems = weyl_enumerate(rd, bound)
    top = max(w.length for w in elems)
    coeffs = [0] * (top + 1)
    for w in elems:
        coeffs[w.length] += 1
    return coeffs


def weyl_action(rd: RootDatum, w: WeylElement, chi) -> tuple[int, ...]:
    if not rd.in_char_lattice(chi):
        raise LatticeError(f"character {tuple(chi)} is not in T*")
    return w.act(chi)

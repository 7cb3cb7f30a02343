"""Exact linear algebra over the integers.

Matrices are 2-d numpy arrays of dtype ``object`` holding Python ints, so no
entry can overflow.  Empty shapes such as ``(0, 3)`` are legal and stand for
zero maps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class DimensionMismatchError(ValueError):
    pass


class CompositeNonzeroError(ValueError):
    pass


def mat(rows, shape: tuple[int, int] | None = None) -> np.ndarray:
    """Coerce ``rows`` into an integer matrix.

    ``shape`` is needed to disambiguate empty input (``[]`` has no column
    count).
    """
    if isinstance(rows, np.ndarray) and rows.dtype == object and rows.ndim == 2:
        out = rows
    else:
        out = np.array(rows, dtype=object)
        if out.size == 0:
            out = np.zeros(shape if shape is not None else (0, 0), dtype=object)
        elif out.ndim == 1:
            out = out.reshape(1, -1)
        out = np.vectorize(int, otypes=[object])(out)
    if shape is not None and out.shape != tuple(shape):
        raise DimensionMismatchError(f"expected shape {shape}, got {out.shape}")
    return out


def zeros(rows: int, cols: int) -> np.ndarray:
    return np.zeros((rows, cols), dtype=object) + 0


def identity(n: int) -> np.ndarray:
    out = zeros(n, n)
    for i in range(n):
        out[i, i] = 1
    return out


def is_zero(A: np.ndarray) -> bool:
    return all(x == 0 for x in A.flat)


def matmul(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    if A.shape[1] != B.shape[0]:
        raise DimensionMismatchError(f"cannot compose {A.shape} with {B.shape}")
    if A.shape[1] == 0:
        return zeros(A.shape[0], B.shape[1])
    return A.dot(B)


def block(blocks: Sequence[Sequence[np.ndarray]]) -> np.ndarray:
    """Assemble a block matrix; works when some blocks are empty."""
    row_heights = [b[0].shape[0] for b in blocks]
    col_widths = [b.shape[1] for b in blocks[0]]
    out = zeros(sum(row_heights), sum(col_widths))
    r0 = 0
    for row, h in zip(blocks, row_heights):
        c0 = 0
        for b, w in zip(row, col_widths):
            if b.shape != (h, w):
                raise DimensionMismatchError(f"block of shape {b.shape}, expected {(h, w)}")
            out[r0:r0 + h, c0:c0 + w] = b
            c0 += w
        r0 += h
    return out


def determinant(A: np.ndarray) -> int:
    """Exact determinant by fraction-free (Bareiss) elimination."""
    n = A.shape[0]
    if A.shape != (n, n):
        raise DimensionMismatchError("determinant of a non-square matrix")
    M = [[int(x) for x in row] for row in A]
    sign, prev = 1, 1
    for k in range(n - 1):
        if M[k][k] == 0:
            for i in range(k + 1, n):
                if M[i][k] != 0:
                    M[k], M[i] = M[i], M[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                M[i][j] = (M[i][j] * M[k][k] - M[i][k] * M[k][j]) // prev
        prev = M[k][k]
    return sign * M[n - 1][n - 1] if n else 1


# ---------------------------------------------------------------------------
# Smith normal form


@dataclass(frozen=True)
class SmithForm:
    """``U @ A @ V == D`` with ``Uinv``, ``Vinv`` the exact inverses."""

    U: np.ndarray
    D: np.ndarray
    V: np.ndarray
    Uinv: np.ndarray
    Vinv: np.ndarray

    @property
    def diagonal(self) -> list[int]:
        k = min(self.D.shape)
        return [self.D[i, i] for i in range(k)]

    @property
    def rank(self) -> int:
        return sum(1 for d in self.diagonal if d != 0)


def smith(A) -> SmithForm:
    A = mat(A)
    m, n = A.shape
    D = [[int(x) for x in row] for row in A]
    U = [[int(i == j) for j in range(m)] for i in range(m)]
    Uinv = [[int(i == j) for j in range(m)] for i in range(m)]
    V = [[int(i == j) for j in range(n)] for i in range(n)]
    Vinv = [[int(i == j) for j in range(n)] for i in range(n)]

    # Row operation R_i <- R_i + q R_t is tracked as U <- E U, Uinv <- Uinv E^-1.
    def row_add(i, t, q):
        if q == 0:
            return
        Di, Dt = D[i], D[t]
        for j in range(n):
            Di[j] += q * Dt[j]
        Ui, Ut = U[i], U[t]
        for j in range(m):
            Ui[j] += q * Ut[j]
        for row in Uinv:
            row[t] -= q * row[i]

    def row_swap(i, t):
        if i == t:
            return
        D[i], D[t] = D[t], D[i]
        U[i], U[t] = U[t], U[i]
        for row in Uinv:
            row[i], row[t] = row[t], row[i]

    def row_neg(i):
        D[i] = [-x for x in D[i]]
        U[i] = [-x for x in U[i]]
        for row in Uinv:
            row[i] = -row[i]

    def col_add(j, t, q):
        # C_j <- C_j + q C_t
        if q == 0:
            return
        for row in D:
            row[j] += q * row[t]
        for row in V:
            row[j] += q * row[t]
        Vt, Vj = Vinv[t], Vinv[j]
        for k in range(n):
            Vt[k] -= q * Vj[k]

    def col_swap(j, t):
        if j == t:
            return
        for row in D:
            row[j], row[t] = row[t], row[j]
        for row in V:
            row[j], row[t] = row[t], row[j]
        Vinv[j], Vinv[t] = Vinv[t], Vinv[j]

    for t in range(min(m, n)):
        best = None
        for i in range(t, m):
            for j in range(t, n):
                x = D[i][j]
                if x != 0 and (best is None or abs(x) < best[0]):
                    best = (abs(x), i, j)
        if best is None:
            break
        row_swap(t, best[1])
        col_swap(t, best[2])
        while True:
            done = True
            for i in range(t + 1, m):
                if D[i][t] != 0:
                    row_add(i, t, -(D[i][t] // D[t][t]))
                    if D[i][t] != 0:
                        done = False
            for j in range(t + 1, n):
                if D[t][j] != 0:
                    col_add(j, t, -(D[t][j] // D[t][t]))
                    if D[t][j] != 0:
                        done = False
            if not done:
                best = None
                for i in range(t, m):
                    x = D[i][t]
                    if x != 0 and (best is None or abs(x) < best[0]):
                        best = (abs(x), i, "r")
                for j in range(t, n):
                    x = D[t][j]
                    if x != 0 and (best is None or abs(x) < best[0]):
                        best = (abs(x), j, "c")
                if best[2] == "r":
                    row_swap(t, best[1])
                else:
                    col_swap(t, best[1])
                continue
            # divisibility of the remaining block
            piv = D[t][t]
            bad = next(
                (i for i in range(t + 1, m) for j in range(t + 1, n) if D[i][j] % piv),
                None,
            )
            if bad is None:
                break
            row_add(t, bad, 1)
        if D[t][t] < 0:
            row_neg(t)

    return SmithForm(
        U=mat(U, (m, m)), D=mat(D, (m, n)), V=mat(V, (n, n)),
        Uinv=mat(Uinv, (m, m)), Vinv=mat(Vinv, (n, n)),
    )


def smith_normal_form(A) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(U, D, V)`` with ``U A V = D`` in Smith normal form."""
    s = smith(A)
    return s.U, s.D, s.V


# ---------------------------------------------------------------------------
# Abelian groups


@dataclass(frozen=True, order=True)
class AbelianPresentation:
    """The group Z^rank + Z/t1 + ... + Z/tk with t1 | t2 | ... and each ti >= 2."""

    rank: int = 0
    torsion: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "torsion", tuple(int(t) for t in self.torsion))
        if self.rank < 0:
            raise ValueError("negative rank")
        for a, b in zip(self.torsion, self.torsion[1:]):
            if b % a:
                raise ValueError(f"torsion {self.torsion} is not a divisibility chain")
        if any(t < 2 for t in self.torsion):
            raise ValueError("torsion coefficients must be >= 2")

    @classmethod
    def from_divisors(cls, rank: int, divisors: Iterable[int]) -> "AbelianPresentation":
        """Normalize an arbitrary list of cyclic orders (not necessarily a chain)."""
        ds = [abs(int(d)) for d in divisors]
        free = sum(1 for d in ds if d == 0)
        finite = [d for d in ds if d > 1]
        return cls(rank + free, _invariant_factors(finite))

    @property
    def torsion_order(self) -> int:
        return math.prod(self.torsion)

    def is_zero(self) -> bool:
        return self.rank == 0 and not self.torsion

    def __add__(self, other: "AbelianPresentation") -> "AbelianPresentation":
        return AbelianPresentation(
            self.rank + other.rank, _invariant_factors(self.torsion + other.torsion)
        )

    def to_json(self) -> dict:
        return {"rank": self.rank, "torsion": list(self.torsion)}

    def __str__(self) -> str:
        parts = []
        if self.rank:
            parts.append("Z" if self.rank == 1 else f"Z^{self.rank}")
        parts += [f"Z/{t}" for t in self.torsion]
        return " + ".join(parts) or "0"


ZERO = AbelianPresentation()


def _invariant_factors(orders: Sequence[int]) -> tuple[int, ...]:
    """Invariant factors of a direct sum of cyclic groups of the given orders."""
    # split into prime powers, then recombine largest powers per prime
    by_prime: dict[int, list[int]] = {}
    for n in orders:
        for p, e in _factor(n).items():
            by_prime.setdefault(p, []).append(p ** e)
    if not by_prime:
        return ()
    k = max(len(v) for v in by_prime.values())
    facs = [1] * k
    for p, pows in by_prime.items():
        pows.sort(reverse=True)
        for i, q in enumerate(pows):
            facs[k - 1 - i] *= q
    return tuple(f for f in facs if f > 1)


def _factor(n: int) -> dict[int, int]:
    out: dict[int, int] = {}
    d = 2
    while d * d <= n:
        while n % d == 0:
            out[d] = out.get(d, 0) + 1
            n //= d
        d += 1
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def cokernel(A) -> AbelianPresentation:
    """Presentation of Z^rows / A(Z^cols)."""
    A = mat(A)
    s = smith(A)
    diag = [d for d in s.diagonal if d != 0]
    return AbelianPresentation(A.shape[0] - len(diag), tuple(d for d in diag if d > 1))


def kernel(A) -> np.ndarray:
    """Saturated basis (as columns) of the integer kernel of ``A``."""
    A = mat(A)
    s = smith(A)
    return s.V[:, s.rank:]


def homology_of_pair(d_in, d_out) -> AbelianPresentation:
    """ker(d_out) / im(d_in) for ``Z^a --d_in--> Z^b --d_out--> Z^c``."""
    d_in, d_out = mat(d_in), mat(d_out)
    if d_out.shape[1] != d_in.shape[0]:
        raise DimensionMismatchError(
            f"d_in has target rank {d_in.shape[0]}, d_out has source rank {d_out.shape[1]}"
        )
    if not is_zero(matmul(d_out, d_in)):
        raise CompositeNonzeroError("d_out . d_in != 0")
    s = smith(d_out)
    coords = matmul(s.Vinv, d_in)[s.rank:, :]
    return cokernel(coords)


def sublattice_divisors(B, ambient_rank: int) -> tuple[tuple[int, ...], int | float]:
    """Elementary divisors of the column span of ``B`` inside Z^ambient_rank.

    The index is ``math.inf`` when the sublattice does not have full rank.
    """
    B = mat(B, None)
    if B.size == 0:
        B = zeros(ambient_rank, 0)
    if B.shape[0] != ambient_rank:
        raise DimensionMismatchError(f"B has {B.shape[0]} rows, ambient rank is {ambient_rank}")
    divs = tuple(d for d in smith(B).diagonal if d != 0)
    index = math.prod(divs) if len(divs) == ambient_rank else math.inf
    return divs, index


# ---------------------------------------------------------------------------
# Lattices given by generating columns


def hermite_basis(G) -> np.ndarray:
    """Canonical basis (as columns) of the lattice spanned by the columns of G.

    The columns are the rows of the reduced row-style Hermite form of ``G.T``:
    echelon, positive pivots, entries above each pivot reduced into
    ``[0, pivot)``.
    """
    G = mat(G)
    n = G.shape[0]
    rows = [[int(x) for x in G[:, j]] for j in range(G.shape[1])]
    rows = [r for r in rows if any(r)]
    basis: list[list[int]] = []
    col = 0
    while rows and col < n:
        live = [r for r in rows if r[col] != 0]
        if not live:
            col += 1
            continue
        rest = [r for r in rows if r[col] == 0]
        while len(live) > 1:
            live.sort(key=lambda r: abs(r[col]))
            piv = live[0]
            nxt = [piv]
            for r in live[1:]:
                q = r[col] // piv[col]
                r = [a - q * b for a, b in zip(r, piv)]
                if r[col] != 0:
                    nxt.append(r)
                elif any(r):
                    rest.append(r)
            live = nxt
        piv = live[0]
        if piv[col] < 0:
            piv = [-a for a in piv]
        basis.append(piv)
        rows = rest
        col += 1
    # reduce above pivots
    pivcols = [next(i for i, a in enumerate(b) if a) for b in basis]
    for k in range(len(basis)):
        c = pivcols[k]
        for i in range(k):
            q = basis[i][c] // basis[k][c]
            if q:
                basis[i] = [a - q * b for a, b in zip(basis[i], basis[k])]
    out = zeros(n, len(basis))
    for j, b in enumerate(basis):
        out[:, j] = b
    return out


def solve_in_lattice(B, y) -> np.ndarray | None:
    """Integer ``x`` with ``B x = y`` (columns of y solved independently), or None."""
    B, y = mat(B), mat(y)
    if y.shape[0] != B.shape[0]:
        raise DimensionMismatchError("right-hand side has the wrong number of rows")
    s = smith(B)
    z = matmul(s.U, y)
    r = s.rank
    if not is_zero(z[r:, :]):
        return None
    w = zeros(B.shape[1], y.shape[1])
    for i in range(r):
        d = s.D[i, i]
        for j in range(y.shape[1]):
            if z[i, j] % d:
                return None
            w[i, j] = z[i, j] // d
    x = matmul(s.V, w)
    return x


def contains(B, y) -> bool:
    return solve_in_lattice(B, y) is not None


def lattices_equal(A, B) -> bool:
    ha, hb = hermite_basis(A), hermite_basis(B)
    return ha.shape == hb.shape and bool(np.all(ha == hb))


def subquotient(Z, D) -> tuple[AbelianPresentation, np.ndarray]:
    """Presentation of span(Z)/span(D) for lattices with span(D) inside span(Z).

    ``Z`` must have independent columns.  Returns the group and the
    coordinates of D's columns in Z's basis (the relation matrix).
    """
    coords = solve_in_lattice(Z, D)
    if coords is None:
        raise ValueError("D is not contained in the lattice spanned by Z")
    return cokernel(coords), coords


# ---------------------------------------------------------------------------
# Linear algebra mod p


def rref_mod_p(A, p: int) -> tuple[list[list[int]], list[int]]:
    """Reduced row echelon form over Z/p; returns (nonzero rows, pivot columns)."""
    A = mat(A)
    rows = [[int(x) % p for x in r] for r in A]
    ncols = A.shape[1]
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        k = next((i for i in range(r, len(rows)) if rows[i][c]), None)
        if k is None:
            continue
        rows[r], rows[k] = rows[k], rows[r]
        inv = pow(rows[r][c], -1, p)
        rows[r] = [(x * inv) % p for x in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][c]:
                f = rows[i][c]
                rows[i] = [(a - f * b) % p for a, b in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
    return rows[:r], pivots


def reduce_mod_p(v: Sequence[int], rref: list[list[int]], pivots: list[int], p: int) -> list[int]:
    """Reduce a row vector modulo the row space of an RREF basis."""
    v = [int(x) % p for x in v]
    for row, c in zip(rref, pivots):
        if v[c]:
            f = v[c]
            v = [(a - f * b) % p for a, b in zip(v, row)]
    return v

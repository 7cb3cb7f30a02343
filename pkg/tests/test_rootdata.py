import itertools
import math

import numpy as np
import pytest

from cubeflag import intlin
from cubeflag import rootdata as rdm

SMALL = [("A", 1), ("A", 2), ("B", 2), ("G", 2), ("A", 3)]
INVARIANT_DEGREES = {("A", 1): [2], ("A", 2): [2, 3], ("B", 2): [2, 4], ("G", 2): [2, 6],
                     ("A", 3): [2, 3, 4]}


def simple_root_coords(rd, chi):
    """Coordinates of a weight in the simple-root basis (rational)."""
    import sympy
    return list(sympy.Matrix(rd.cartan.tolist()).LUsolve(sympy.Matrix(list(chi))))


def inversions(rd, w):
    """Number of positive roots made negative by w."""
    M = np.array(w.matrix, dtype=object)
    count = 0
    for root, _ in rd.positive_roots:
        image = M.dot(np.array(root, dtype=object))
        if all(c <= 0 for c in simple_root_coords(rd, image)):
            count += 1
    return count


def test_a1_adjoint_lattice_is_root_lattice():
    rd = rdm.build_root_datum("A", 1, "adjoint")
    assert rd.char_basis() == [(2,)]


def test_a1_simply_connected_lattice():
    rd = rdm.build_root_datum("A", 1)
    assert rd.char_basis() == [(1,)]


def test_a2_cartan():
    assert rdm.cartan_matrix("A", 2).tolist() == [[2, -1], [-1, 2]]


@pytest.mark.parametrize("t, n", [("B", 3), ("C", 3), ("D", 4), ("F", 4), ("E", 6), ("G", 2)])
def test_cartan_is_generalized_cartan(t, n):
    A = rdm.cartan_matrix(t, n)
    assert all(A[i, i] == 2 for i in range(n))
    for i, j in itertools.combinations(range(n), 2):
        assert (A[i, j] == 0) == (A[j, i] == 0)
        assert A[i, j] * A[j, i] in (0, 1, 2, 3)
    # connected Dynkin diagram: n - 1 edges
    assert sum(1 for i, j in itertools.combinations(range(n), 2) if A[i, j]) == n - 1


@pytest.mark.parametrize("t, n", [("A", 0), ("B", 1), ("C", 2), ("D", 3), ("E", 5), ("G", 3), ("Z", 2), ("A", 9)])
def test_illegal_types_rejected(t, n):
    with pytest.raises(rdm.RootDatumError):
        rdm.build_root_datum(t, n)


def test_custom_lattice_must_contain_roots():
    with pytest.raises(rdm.LatticeError):
        rdm.build_root_datum("A", 1, [[4]])
    # weights with a1 + a3 even: the lattice of SL4/mu2
    rd = rdm.build_root_datum("A", 3, [[1, 0, 0], [0, 1, 0], [1, 0, 2]])
    assert rd.lattice_name == "custom"


@pytest.mark.parametrize("t, n, order", [("A", 1, 2), ("A", 2, 6), ("G", 2, 12), ("B", 2, 8), ("A", 3, 24)])
def test_weyl_orders(t, n, order):
    rd = rdm.build_root_datum(t, n)
    W = rdm.weyl_enumerate(rd)
    assert len(W) == order == math.prod(INVARIANT_DEGREES[(t, n)])
    assert len({w.matrix for w in W}) == order


@pytest.mark.parametrize("t, n", SMALL)
def test_words_are_reduced_and_match_matrices(t, n):
    rd = rdm.build_root_datum(t, n)
    for w in rdm.weyl_enumerate(rd):
        M = intlin.identity(n)
        for i in w.word:
            M = intlin.matmul(M, rd.simple_reflection(i))
        assert M.tolist() == [list(r) for r in w.matrix]
        assert w.length == inversions(rd, w)


@pytest.mark.parametrize("t, n, poly", [("A", 1, [1, 1]), ("A", 2, [1, 2, 2, 1]), ("B", 2, [1, 2, 2, 2, 1]),
                                        ("G", 2, [1, 2, 2, 2, 2, 2, 1]), ("A", 3, [1, 3, 5, 6, 5, 3, 1])])
def test_poincare_polynomials(t, n, poly):
    P = rdm.poincare_polynomial(rdm.build_root_datum(t, n))
    assert P == poly and P == P[::-1]


@pytest.mark.parametrize("t, n", SMALL + [("C", 3), ("B", 3)])
def test_simple_reflections_and_braid_relations(t, n):
    rd = rdm.build_root_datum(t, n)
    S = [rd.simple_reflection(i) for i in range(n)]
    I = intlin.identity(n)
    for s in S:
        assert np.array_equal(intlin.matmul(s, s), I)
    for i, j in itertools.combinations(range(n), 2):
        m_ij = {0: 2, 1: 3, 2: 4, 3: 6}[int(rd.cartan[i, j] * rd.cartan[j, i])]
        P = intlin.matmul(S[i], S[j])
        Q = I
        for k in range(m_ij):
            Q = intlin.matmul(Q, P)
            assert np.array_equal(Q, I) == (k == m_ij - 1)


@pytest.mark.parametrize("lattice", ["simply_connected", "adjoint"])
@pytest.mark.parametrize("t, n", SMALL)
def test_weyl_group_preserves_char_lattice(t, n, lattice):
    rd = rdm.build_root_datum(t, n, lattice)
    for w in rdm.weyl_enumerate(rd):
        for chi in rd.char_basis():
            assert rd.in_char_lattice(rdm.weyl_action(rd, w, chi))


def test_weyl_action_examples():
    rd = rdm.build_root_datum("A", 1)
    e, s = rdm.weyl_enumerate(rd)
    assert rdm.weyl_action(rd, e, (1,)) == (1,)
    assert rdm.weyl_action(rd, s, (1,)) == (-1,)
    assert rdm.weyl_action(rd, s, (2,)) == (-2,)
    rd2 = rdm.build_root_datum("G", 2)
    for alpha, coroot in rd2.positive_roots:
        R = rd2.reflection(alpha, coroot)
        assert intlin.matmul(R, intlin.mat([list(alpha)]).T).flatten().tolist() == [-a for a in alpha]


def test_weyl_action_rejects_characters_outside_lattice():
    rd = rdm.build_root_datum("A", 1, "adjoint")
    with pytest.raises(rdm.LatticeError):
        rdm.weyl_action(rd, rdm.weyl_enumerate(rd)[1], (1,))


def test_positive_root_counts():
    counts = {("A", 2): 3, ("B", 2): 4, ("G", 2): 6, ("A", 3): 6, ("B", 3): 9, ("F", 4): 24}
    for (t, n), N in counts.items():
        assert len(rdm.build_root_datum(t, n).positive_roots) == N


def test_weyl_bound():
    with pytest.raises(rdm.WeylBoundError):
        rdm.weyl_enumerate(rdm.build_root_datum("B", 3), bound=10)
    with pytest.raises(rdm.WeylBoundError):
        rdm.weyl_enumerate(rdm.build_root_datum("E", 8))

import itertools
import math

import numpy as np
import pytest
import sympy

import oracles
from cubeflag import flagtheory as ft
from cubeflag import intlin
from cubeflag import rootdata as rdm
from cubeflag.intlin import AbelianPresentation as AP

Z = AP(1, ())
RANK2 = [("A", 1), ("A", 2), ("B", 2), ("G", 2)]
LATTICES = ["simply_connected", "adjoint"]


def rd(t, n, lattice="simply_connected"):
    return rdm.build_root_datum(t, n, lattice)


_CHOW, _K0 = {}, {}


def chow(t, n, lattice="simply_connected"):
    key = (t, n, lattice)
    if key not in _CHOW:
        _CHOW[key] = ft.chow_flag_ring(rd(t, n, lattice))
    return _CHOW[key]


def k0(t, n, lattice="simply_connected"):
    key = (t, n, lattice)
    if key not in _K0:
        _K0[key] = ft.k0_flag_ring(rd(t, n, lattice))
    return _K0[key]


def length_census(datum):
    """Poincare polynomial by counting inversions of each Weyl element."""
    A = sympy.Matrix(datum.cartan.tolist())
    counts = {}
    for w in rdm.weyl_enumerate(datum):
        M = sympy.Matrix(w.matrix)
        inv = sum(1 for root, _ in datum.positive_roots
                  if all(c <= 0 for c in A.LUsolve(M * sympy.Matrix(root))))
        counts[inv] = counts.get(inv, 0) + 1
    return [counts[k] for k in range(max(counts) + 1)]


def top_degree(R, chis):
    v = R.unit()
    for chi in chis:
        v = R.c1_times(chi, v)
    return int(v[-1])


# -- Chow ring --------------------------------------------------------------

@pytest.mark.parametrize("t, n", RANK2 + [("A", 3)])
def test_chow_ranks_match_length_census(t, n):
    assert chow(t, n).ranks == length_census(rd(t, n))


def test_a1_square_of_hyperplane_vanishes():
    R = chow("A", 1)
    h = R.schubert(1)
    assert R.ranks == [1, 1]
    assert not any(R.c1_times((1,), h))
    assert not any(R.multiply(h, h))


def test_char_map_chow_examples():
    assert list(ft.char_map_chow(chow("A", 1), (1,))) == [0, 1]
    assert list(ft.char_map_chow(chow("A", 1, "adjoint"), (2,))) == [0, 2]
    assert not any(ft.char_map_chow(chow("A", 2), (0, 0)))
    with pytest.raises(rdm.LatticeError):
        ft.char_map_chow(chow("A", 1, "adjoint"), (1,))


@pytest.mark.parametrize("t, n", RANK2)
def test_char_map_chow_is_additive(t, n):
    R = chow(t, n)
    for chi, mu in itertools.product([(1, 0), (0, 1), (2, -1), (-1, 3)][: 2 ** n], repeat=2):
        chi, mu = chi[:n], mu[:n]
        s = tuple(a + b for a, b in zip(chi, mu))
        assert list(ft.char_map_chow(R, s)) == list(ft.char_map_chow(R, chi) + ft.char_map_chow(R, mu))


@pytest.mark.parametrize("t, n", RANK2)
def test_chevalley_products_commute(t, n):
    R = chow(t, n)
    basis = R.char_basis()
    for chi, mu in itertools.product(basis, repeat=2):
        a = R.c1_times(chi, ft.char_map_chow(R, mu))
        b = R.c1_times(mu, ft.char_map_chow(R, chi))
        assert list(a) == list(b)


@pytest.mark.parametrize("t, n", RANK2)
def test_top_degree_matches_divided_differences(t, n):
    """deg c1(chi_1)...c1(chi_N) against the alternating sum over W divided by the root product."""
    R = chow(t, n)
    datum = R.rd
    N = R.top
    om = sympy.symbols(f"w0:{n}")
    roots = [sum(r[i] * om[i] for i in range(n)) for r, _ in datum.positive_roots]
    W = rdm.weyl_enumerate(datum)
    values = {}
    sign = None
    for mono in itertools.combinations_with_replacement(range(n), N):
        P = sympy.prod([om[i] for i in mono])
        alt = 0
        for w in W:
            sub = {om[j]: sum(w.matrix[i][j] * om[i] for i in range(n)) for j in range(n)}
            alt += (-1) ** w.length * P.subs(sub, simultaneous=True)
        oracle = sympy.cancel(sympy.expand(alt) / sympy.prod(roots))
        got = top_degree(R, [datum.fundamental_weights[i] for i in mono])
        if oracle != 0:
            sign = sign or (1 if got * oracle > 0 else -1)
        values[mono] = (got, oracle)
    assert all(got == sign * o for got, o in values.values())


@pytest.mark.parametrize("t, n", RANK2)
def test_full_products_are_associative_and_unital(t, n):
    R = chow(t, n)
    e = [R.schubert(i) for i in range(R.size)]
    for u in range(R.size):
        assert list(R.multiply(R.unit(), e[u])) == list(e[u])
    for u, v, w in itertools.product(range(R.size), repeat=3):
        left = R.multiply(R.multiply(e[u], e[v]), e[w])
        right = R.multiply(e[u], R.multiply(e[v], e[w]))
        assert list(left) == list(right)


@pytest.mark.parametrize("t, n", RANK2)
def test_multiply_extends_chevalley(t, n):
    R = chow(t, n)
    for chi in R.char_basis():
        c = ft.char_map_chow(R, chi)
        for u in range(R.size):
            assert list(R.multiply(c, R.schubert(u))) == list(R.c1_times(chi, R.schubert(u)))


# -- torsion index ----------------------------------------------------------

@pytest.mark.parametrize("t, n, lattice, per, tau", [
    ("A", 1, "simply_connected", [1, 1], 1),
    ("A", 1, "adjoint", [1, 2], 2),
    ("A", 2, "simply_connected", [1, 1, 1, 1], 1),
])
def test_torsion_index_examples(t, n, lattice, per, tau):
    assert ft.torsion_index(chow(t, n, lattice)) == (per, tau)


@pytest.mark.parametrize("lattice", LATTICES)
@pytest.mark.parametrize("t, n", RANK2)
def test_torsion_index_matches_divided_difference_oracle(t, n, lattice):
    R = chow(t, n, lattice)
    tau = oracles.divided_difference_tau(R.rd, rdm.weyl_enumerate(R.rd))
    assert ft.torsion_index(R)[1] == tau


def test_known_torsion_indexes():
    assert ft.torsion_index(chow("A", 2, "adjoint"))[1] == 3
    assert ft.torsion_index(chow("B", 2))[1] == 1
    assert ft.torsion_index(chow("B", 2, "adjoint"))[1] == 2 ** 2
    assert ft.torsion_index(chow("G", 2))[1] == 2


# -- quotients --------------------------------------------------------------

def degreewise_oracle(R):
    gens_chi = R.char_basis()
    pieces = []
    for d in range(R.top + 1):
        idx = R.degree_index(d)
        cols = []
        if d >= 1:
            for chi in gens_chi:
                for u in R.degree_index(d - 1):
                    v = R.c1_times(chi, R.schubert(u))
                    cols.append([int(v[i]) for i in idx])
        A = [list(r) for r in zip(*cols)] if cols else []
        rank, tors = oracles.cokernel(A, len(idx))
        pieces.append((d, AP(rank, tuple(tors))))
    return pieces


@pytest.mark.parametrize("t, n, lattice, expected", [
    ("A", 1, "simply_connected", [Z, AP(0, ())]),
    ("A", 1, "adjoint", [Z, AP(0, (2,))]),
    ("A", 2, "simply_connected", [Z, AP(0, ()), AP(0, ()), AP(0, ())]),
    ("A", 2, "adjoint", [Z, AP(0, (3,)), AP(0, (3,)), AP(0, ())]),
])
def test_group_ring_quotient_examples(t, n, lattice, expected):
    Q = ft.group_ring_quotient(chow(t, n, lattice))
    assert [g for _, g in Q.degrees] == expected


@pytest.mark.parametrize("lattice", LATTICES)
@pytest.mark.parametrize("t, n", RANK2)
def test_group_ring_quotient_matches_degreewise_oracle(t, n, lattice):
    R = chow(t, n, lattice)
    assert list(ft.group_ring_quotient(R).degrees) == degreewise_oracle(R)


@pytest.mark.parametrize("lattice", LATTICES)
@pytest.mark.parametrize("t, n", RANK2)
def test_quotients_are_rationally_one_dimensional(t, n, lattice):
    assert ft.group_ring_quotient(chow(t, n, lattice)).total.rank == 1
    assert ft.group_ring_quotient(k0(t, n, lattice)).total.rank == 1


def test_g2_has_two_torsion_in_degree_three():
    Q = ft.group_ring_quotient(chow("G", 2))
    assert dict(Q.degrees)[3] == AP(0, (2,))


# -- hat ring ---------------------------------------------------------------

@pytest.mark.parametrize("theory", [chow, k0])
def test_hat_ring_of_full_image_is_scalars(theory):
    R = theory("A", 2, "adjoint")
    assert ft.hat_ring(R, ft.full_image(R)).total == Z


@pytest.mark.parametrize("theory", [chow, k0])
def test_hat_ring_of_scalars_is_whole_ring(theory):
    R = theory("B", 2)
    assert ft.hat_ring(R, ft.scalar_image(R)).total == AP(R.size, ())


@pytest.mark.parametrize("lattice", LATTICES)
@pytest.mark.parametrize("t, n", RANK2)
@pytest.mark.parametrize("theory", [chow, k0])
def test_hat_ring_of_char_image_is_group_ring_quotient(theory, t, n, lattice):
    R = theory(t, n, lattice)
    assert ft.hat_ring(R, ft.char_image(R)).same_groups(ft.group_ring_quotient(R))


def test_image_carrier_must_match():
    with pytest.raises(ValueError):
        ft.hat_ring(chow("A", 1), ft.full_image(k0("A", 1)))


# -- J-invariant ------------------------------------------------------------

def test_j_pgl2():
    R = chow("A", 1, "adjoint")
    assert ft.j_invariant(R, 2) == {"r": 1, "degrees": [1], "j": [1]}
    assert ft.j_invariant(R, 3) == {"r": 0, "degrees": [], "j": []}


@pytest.mark.parametrize("p", [2, 3, 5, 7])
def test_j_sl2_is_trivial(p):
    assert ft.j_invariant(chow("A", 1), p)["r"] == 0


@pytest.mark.parametrize("t, n, lattice, p, expected", [
    ("A", 2, "adjoint", 3, {"r": 1, "degrees": [1], "j": [1]}),
    ("B", 2, "adjoint", 2, {"r": 1, "degrees": [1], "j": [2]}),
    ("G", 2, "simply_connected", 2, {"r": 1, "degrees": [3], "j": [1]}),
])
def test_j_rank_two_examples(t, n, lattice, p, expected):
    assert ft.j_invariant(chow(t, n, lattice), p) == expected


def test_j_rejects_non_prime():
    with pytest.raises(ValueError):
        ft.j_invariant(chow("A", 1), 4)


@pytest.mark.parametrize("t, n, lattice, p", [("B", 2, "adjoint", 2), ("A", 2, "adjoint", 3),
                                              ("G", 2, "simply_connected", 2)])
def test_j_dimension_reconstruction(t, n, lattice, p):
    R = chow(t, n, lattice)
    res = ft.j_invariant(R, p)
    quotient = ft.hat_ring(R, ft.char_image(R))
    # dim over Z/p of (quotient (x) Z/p) from the invariant factors
    dim = quotient.total.rank + sum(1 for t_ in quotient.total.torsion if t_ % p == 0)
    degree_dims = sum(g.rank + sum(1 for t_ in g.torsion if t_ % p == 0) for _, g in quotient.degrees)
    assert dim == degree_dims
    assert math.prod(p ** j for j in res["j"]) == dim
    assert all(j >= 0 for j in res["j"])


def test_j_generic_image_is_maximal():
    R = chow("B", 2, "adjoint")
    generic = ft.j_invariant(R, 2)
    char = ft.char_image(R).generators
    for extra in range(1, R.size):
        bigger = ft.ImageSublattice.of(R, [char[:, j] for j in range(char.shape[1])] + [R.schubert(extra)])
        try:
            res = ft.j_invariant(R, 2, bigger)
        except ft.ShapeFailure:
            continue
        exps = res["j"]
        assert sum(exps) <= sum(generic["j"])
        assert all(j <= max(generic["j"]) for j in exps)
    assert ft.j_invariant(R, 2, ft.full_image(R))["r"] == 0


def test_j_shape_failure_is_reported():
    R = chow("A", 2)
    image = ft.scalar_image(R)
    with pytest.raises(ft.ShapeFailure) as err:
        ft.j_invariant(R, 2, image)
    assert err.value.report["total_dim"] == R.size


# -- K0 ring ----------------------------------------------------------------

@pytest.mark.parametrize("t, n, size", [("A", 1, 2), ("A", 2, 6), ("B", 2, 8), ("G", 2, 12)])
def test_k0_rank_and_unit(t, n, size):
    R = k0(t, n)
    assert R.size == size
    e = [0] * size
    e[0] = 1
    assert list(R.line((0,) * n)) == e
    assert abs(R.gram_det) == 1


@pytest.mark.parametrize("t, n", RANK2)
def test_steinberg_basis_unimodular_against_window_model(t, n):
    R = k0(t, n)
    inner = max(abs(x) for lam in R.weights for x in lam)
    model = ft.window_model(R.rd, inner)
    assert model.rank == R.size
    assert abs(ft.steinberg_window_determinant(R, model)) == 1


def test_right_descent_weights_are_degenerate():
    """Summing omega_i over right descents before applying w^{-1} does not give a basis."""
    datum = rd("A", 2)
    W = rdm.weyl_enumerate(datum)
    index = {w.matrix: k for k, w in enumerate(W)}
    weights = []
    for w in W:
        M = sympy.Matrix(w.matrix)
        total = sympy.zeros(2, 1)
        for i in range(2):
            ws = tuple(tuple(int(x) for x in row) for row in (M * sympy.Matrix(datum.simple_reflection(i).tolist())).tolist())
            if W[index[ws]].length < w.length:
                total[i] += 1
        weights.append(tuple(int(x) for x in M.inv() * total))
    G = [[ft.weyl_dimension(datum, tuple(a + b for a, b in zip(u, v))) for v in weights] for u in weights]
    assert oracles.det(G) == 0


@pytest.mark.parametrize("t, n", RANK2)
def test_k0_table_is_commutative_with_unit(t, n):
    R = k0(t, n)
    T = R.mult_table
    assert np.array_equal(T, np.transpose(T, (1, 0, 2)))
    for v in range(R.size):
        assert list(T[0, v, :]) == [int(i == v) for i in range(R.size)]


@pytest.mark.parametrize("lattice", LATTICES)
@pytest.mark.parametrize("t, n", RANK2)
def test_k0_char_map_is_multiplicative(t, n, lattice):
    R = k0(t, n, lattice)
    basis = R.char_basis()
    for chi, mu in itertools.product(basis + [tuple(-a for a in basis[0])], repeat=2):
        s = tuple(a + b for a, b in zip(chi, mu))
        assert list(ft.char_map_k0(R, {s: 1})) == list(R.multiply(R.line(chi), R.line(mu)))
        both = ft.char_map_k0(R, {chi: 1, mu: 1}) if chi != mu else 2 * R.line(chi)
        assert list(both) == list(R.line(chi) + R.line(mu))


def test_k0_char_map_rejects_characters_outside_lattice():
    with pytest.raises(rdm.LatticeError):
        ft.char_map_k0(k0("A", 1, "adjoint"), {(1,): 1})


def test_sl2_c1_squares_to_zero():
    R = k0("A", 1)
    c = R.c1((1,))
    assert R.augmentation(c) == 0 and any(c)
    assert not any(R.multiply(c, c))


@pytest.mark.parametrize("lattice", LATTICES)
@pytest.mark.parametrize("t, n", RANK2)
def test_c1_convention_does_not_change_the_ideal(t, n, lattice):
    R = k0(t, n, lattice)
    ours = [R.c1(chi) for chi in R.char_basis()]
    other = [R.line(chi) - R.unit() for chi in R.char_basis()]
    assert intlin.lattices_equal(ft._ideal(R, ours), ft._ideal(R, other))


def test_pgl2_k0_quotient():
    Q = ft.group_ring_quotient(k0("A", 1, "adjoint"))
    assert Q.total == AP(1, (2,))
    assert [g for _, g in Q.degrees] == [Z, AP(0, (2,))]


@pytest.mark.parametrize("t, n, lattice, expected", [
    ("A", 1, "simply_connected", {"e": 1, "s1": 1}),
    ("A", 1, "adjoint", {"e": 1, "s1": 2}),
])
def test_tits_indexes_rank_one(t, n, lattice, expected):
    assert ft.maximal_tits_indexes(k0(t, n, lattice)) == expected


def test_tits_indexes_sl3_all_one():
    assert set(ft.maximal_tits_indexes(k0("A", 2)).values()) == {1}


def test_tits_indexes_pgl3():
    m = ft.maximal_tits_indexes(k0("A", 2, "adjoint"))
    assert sorted(m.values()) == [1, 1, 3, 3, 3, 3]


@pytest.mark.parametrize("t, n, lattice", [("A", 1, "adjoint"), ("A", 2, "adjoint"), ("A", 2, "simply_connected"),
                                           ("B", 2, "adjoint")])
def test_tits_indexes_match_window_oracle(t, n, lattice):
    """Image of Z[T*] computed from window monomials, expressed in the Steinberg basis."""
    R = k0(t, n, lattice)
    inner = max(abs(x) for lam in R.weights for x in lam) + 2
    model = ft.window_model(R.rd, inner)
    S = np.stack([model.coords(lam) for lam in R.weights], axis=1)
    mons = [mu for mu in itertools.product(range(-inner, inner + 1), repeat=n) if R.rd.in_char_lattice(mu)]
    cols = np.stack([model.coords(mu) for mu in mons], axis=1)
    steinberg_coords = intlin.solve_in_lattice(S, cols)
    assert steinberg_coords is not None
    divisors, index = intlin.sublattice_divisors(steinberg_coords, R.size)
    oracle = oracles.determinantal_divisors(intlin.hermite_basis(steinberg_coords).tolist())
    m = ft.maximal_tits_indexes(R)
    assert list(divisors) == oracle
    assert index == np.prod(list(m.values()))
    assert intlin.lattices_equal(intlin.hermite_basis(steinberg_coords), ft.k0_image_lattice(R))


def test_tits_image_roundtrip():
    R = k0("A", 1, "adjoint")
    img = ft.tits_image(R, {"s1": 2})
    assert intlin.lattices_equal(img.generators, ft.char_image(R).generators)
    with pytest.raises(ValueError):
        ft.tits_image(R, {"s7": 2})


def test_weyl_dimension_values():
    assert ft.weyl_dimension(rd("A", 1), (3,)) == 4
    assert ft.weyl_dimension(rd("A", 2), (1, 1)) == 8
    assert ft.weyl_dimension(rd("G", 2), (1, 0)) == 7  # short fundamental weight
    assert ft.weyl_dimension(rd("A", 1), (-1,)) == 0

import math

import numpy as np
import pytest
import sympy
from hypothesis import assume, given, settings

from conftest import BUILTINS, irreducible_from, numpy_spectral_radius, small_digraphs
from randsft.errors import NotIrreducibleError
from randsft.graph_core import build_graph, cycle_graph, enumerate_paths, full_graph, golden_mean_graph, n_block_graph
from randsft.spectral import (
    beta,
    char_poly,
    entropy,
    measure_of_path,
    nonzero_spectrum,
    parry_measure,
    perron_data,
    spectral_radius,
    traces_from_char_poly,
    zeta_eval,
    zeta_product_truncated,
)

PHI = (1 + math.sqrt(5)) / 2


def sympy_char_poly(g):
    t = sympy.Symbol("t")
    m = sympy.Matrix(g.adjacency().tolist())
    return tuple(int(c) for c in m.charpoly(t).all_coeffs())


def test_spectral_radius_examples(golden, full2):
    assert abs(spectral_radius(golden) - PHI) <= 1e-9
    assert spectral_radius(full2) == pytest.approx(2.0, abs=1e-12)
    assert spectral_radius(build_graph(3, [(0, 1), (1, 2)])) == 0.0


def test_golden_root_from_char_poly(golden):
    roots = sympy.Poly(sympy.Symbol("t") ** 2 - sympy.Symbol("t") - 1).nroots(n=30)
    assert abs(spectral_radius(golden) - float(max(roots))) <= 1e-9


@given(small_digraphs(max_vertices=6))
@settings(max_examples=80, deadline=None)
def test_spectral_radius_matches_numpy(g):
    assert spectral_radius(g) == pytest.approx(numpy_spectral_radius(g), rel=1e-8, abs=1e-9)


def test_periodic_component_converges():
    # period 4: the plain power method would oscillate
    assert spectral_radius(cycle_graph(4)) == 1.0
    g = build_graph(4, [(0, 1), (1, 2), (2, 3), (3, 0), (1, 0), (3, 2)])
    assert spectral_radius(g) == pytest.approx(numpy_spectral_radius(g), rel=1e-9)


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_char_poly_matches_sympy(name):
    g = BUILTINS[name]
    assert char_poly(g.adjacency()) == sympy_char_poly(g)


@given(small_digraphs(max_vertices=6))
@settings(max_examples=60, deadline=None)
def test_char_poly_random(g):
    assert char_poly(g.adjacency()) == sympy_char_poly(g)


def test_perron_data_examples(golden, full2, cycle3):
    sd = perron_data(golden)
    assert sd.char_poly == (1, -1, -1)
    assert sorted(z.real for z in sd.nonzero_spectrum) == pytest.approx([-1 / PHI, PHI], abs=1e-9)
    sd2 = perron_data(full2)
    assert sd2.char_poly == (1, -2, 0)
    assert len(sd2.nonzero_spectrum) == 1 and abs(sd2.nonzero_spectrum[0] - 2) <= 1e-9
    sd3 = perron_data(cycle3)
    assert sd3.char_poly == (1, 0, 0, -1)
    assert all(abs(abs(z) - 1) <= 1e-9 for z in sd3.nonzero_spectrum)
    assert all(abs(z**3 - 1) <= 1e-9 for z in sd3.nonzero_spectrum)


def test_perron_data_reducible():
    with pytest.raises(NotIrreducibleError):
        perron_data(build_graph(2, [(0, 0), (1, 1)]))


@given(small_digraphs(max_vertices=6))
@settings(max_examples=60, deadline=None)
def test_perron_vectors(g):
    h = irreducible_from(g)
    assume(h is not None)
    sd = perron_data(h)
    a = h.adjacency(dtype=float)
    assert (sd.left > 0).all() and (sd.right > 0).all()
    assert abs(sd.left @ sd.right - 1) <= 1e-12
    assert np.max(np.abs(a @ sd.right - sd.lam * sd.right)) <= 1e-9 * sd.lam
    assert np.max(np.abs(sd.left @ a - sd.lam * sd.left)) <= 1e-9 * sd.lam
    mods = [abs(z) for z in sd.nonzero_spectrum]
    assert max(mods) == pytest.approx(sd.lam, rel=1e-8)


@given(small_digraphs(max_vertices=6))
@settings(max_examples=40, deadline=None)
def test_nonzero_spectrum_multiset(g):
    cp = char_poly(g.adjacency())
    spec = nonzero_spectrum(cp)
    eig = [z for z in np.linalg.eigvals(g.adjacency(dtype=float)) if abs(z) > 1e-6]
    assert len(spec) == len(eig)
    # power sums pin down the multiset
    for p in range(1, 5):
        assert sum(z**p for z in spec) == pytest.approx(sum(z**p for z in eig), abs=1e-6)


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_traces_from_char_poly(name):
    g = BUILTINS[name]
    traces = traces_from_char_poly(char_poly(g.adjacency()), 12)
    a = sympy.Matrix(g.adjacency().tolist())
    assert traces == [int((a**p).trace()) for p in range(1, 13)]


@pytest.mark.parametrize("name", ["golden", "full:2", "full:3", "cycle:3"])
def test_parry_normalization(name):
    g = BUILTINS[name]
    pm = parry_measure(g)
    assert abs(pm.vertex_mass.sum() - 1) <= 1e-12
    assert abs(pm.edge_mass.sum() - 1) <= 1e-12
    assert (pm.vertex_mass > 0).all() and (pm.edge_mass > 0).all()


def test_parry_examples(full2):
    assert parry_measure(full2).edge_mass == pytest.approx([0.25] * 4, abs=1e-13)
    for L in (3, 5, 7):
        assert parry_measure(cycle_graph(L)).edge_mass == pytest.approx([1 / L] * L, abs=1e-13)


def test_parry_paths_sum_to_one(golden):
    pm = parry_measure(golden)
    for k in range(1, 5):
        total = sum(measure_of_path(pm, b) for b in enumerate_paths(golden, k).paths)
        assert abs(total - 1) <= 1e-12


def test_parry_shift_invariance(golden):
    # mass of b equals the summed mass of its one-edge extensions on the left
    pm = parry_measure(golden)
    for b in enumerate_paths(golden, 3).paths:
        left = sum(measure_of_path(pm, (e,) + b) for e in range(golden.edge_count) if golden.dst[e] == golden.src[b[0]])
        assert left == pytest.approx(measure_of_path(pm, b), rel=1e-12)


def test_measure_of_path_rejects_non_path(golden):
    with pytest.raises(ValueError):
        measure_of_path(parry_measure(golden), [1, 1])


def test_zeta_examples(full2, golden, cycle3):
    assert zeta_eval(full2, 0.3) == pytest.approx(2.5, rel=1e-15)
    assert zeta_eval(golden, 0.5) == 4.0
    assert zeta_eval(cycle3, 0.0) == 1.0
    assert zeta_eval(full2, 0.5) == math.inf
    assert zeta_eval(full2, 0.7) == math.inf


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_zeta_vs_spectrum_product(name):
    g = BUILTINS[name]
    sd = perron_data(g)
    for frac in (0.1, 0.5, 0.9):
        t = frac / sd.lam
        prod = np.prod([1 - z * t for z in sd.nonzero_spectrum])
        assert abs(1 / zeta_eval(g, t) - prod.real) <= 1e-8


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_zeta_product_interval(name):
    g = BUILTINS[name]
    lam = spectral_radius(g)
    for t in (0.1, 0.3, 0.5 / lam):
        if t * lam >= 1:
            continue
        value, tail = zeta_product_truncated(g, t, 20)
        exact = 1 / zeta_eval(g, t)
        assert value - tail - 1e-12 <= exact <= value + 1e-12


def test_zeta_product_examples(golden, cycle3):
    value, tail = zeta_product_truncated(golden, 0.5, 20)
    assert value - tail <= 0.25 <= value
    assert zeta_product_truncated(cycle3, 0.5, 3) == (0.875, 0.0)
    assert zeta_product_truncated(golden, 0.0, 5) == (1.0, 0.0)


def test_zeta_product_rejects_supercritical(full2):
    with pytest.raises(ValueError):
        zeta_product_truncated(full2, 0.6, 10)


def test_beta_entropy_examples(full2, cycle3):
    assert beta(full2) == pytest.approx(2.0) and entropy(full2) == pytest.approx(math.log(2))
    assert beta(cycle3) == 1.0 and entropy(cycle3) == 0.0
    acyclic = build_graph(3, [(0, 1), (1, 2)])
    assert beta(acyclic) == 0.0 and entropy(acyclic) is None


@pytest.mark.parametrize("g", [golden_mean_graph(), full_graph(2), cycle_graph(3)])
def test_beta_conjugacy_invariant(g):
    b = beta(g)
    for n in range(2, 7):
        assert beta(n_block_graph(g, n)) == pytest.approx(b, rel=1e-9)

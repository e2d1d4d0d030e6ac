import numpy as np
import pytest
import scipy.sparse as sp

from gaugepeps import exact as ex
from gaugepeps.lattice import LatticeGeometry

P = ex.HamiltonianParams(M=0.7, eps=1.1, g=1.3)


def _dev(A, B):
    D = sp.csr_matrix(A - B)
    return float(abs(D).max()) if D.nnz else 0.0


def test_link_space_algebra():
    L = ex.ZnLinkSpace(5)
    U, E = L.U().toarray(), L.E().toarray()
    assert np.allclose(U @ U.conj().T, np.eye(5))
    assert np.allclose(np.linalg.matrix_power(U, 5), np.eye(5))
    assert list(L.window) == [0, 1, 2, -2, -1]
    assert np.allclose(np.diag(E), L.window)


def test_fold_window_even_n():
    assert list(ex.fold(np.arange(4), 4)) == [0, 1, -2, -1]


@pytest.mark.parametrize("geom", [LatticeGeometry(3, 1), LatticeGeometry(2, 2), LatticeGeometry(2, 2, "torus")])
def test_gauss_law_commutes_with_full_hamiltonian(geom):
    s = ex.GaugedSystem(geom, 3)
    H = ex.build_hamiltonian(s, P, "full")
    assert _dev(H, H.getH()) <= 1e-12
    for x in geom.vertices():
        assert ex.commutator_norm(ex.gauss_operator(s, x), H) <= 1e-12


def test_ungauged_hopping_breaks_gauss_law():
    s = ex.GaugedSystem(LatticeGeometry(2, 1), 3)
    H = ex.build_hamiltonian(s, P, "H_f")
    assert ex.commutator_norm(ex.gauss_operator(s, (0, 0)), H) > 0.1


def test_pure_fermion_spectrum_embeds():
    geom = LatticeGeometry(3, 1)
    s = ex.GaugedSystem(geom, 2)
    Hf = ex.fermion_hamiltonian(geom, P)
    Hs = ex.build_hamiltonian(s, P, "H_f").toarray()
    e_small = np.linalg.eigvalsh(Hf)
    e_big = np.linalg.eigvalsh(Hs)
    # links are spectators: every level repeats 2^links times
    assert np.allclose(np.repeat(e_small, 2 ** geom.n_links), e_big, atol=1e-12)


def test_single_link_gauging_each_link():
    s = ex.GaugedSystem(LatticeGeometry(2, 2), 3)
    for link in s.geometry.links:
        ug = ex.gauging_unitary(s, link)
        h = ex.link_hopping(s, P, link, gauged=False)
        assert _dev(ug @ h @ ug.getH(), ex.link_hopping(s, P, link, gauged=True)) <= 1e-12


def test_chain_gauging_requires_chain():
    with pytest.raises(ValueError):
        ex.gauging_unitary_1d(ex.GaugedSystem(LatticeGeometry(2, 2), 2))


def test_sectors_partition_space():
    s = ex.GaugedSystem(LatticeGeometry(3, 1), 3)
    secs = ex.all_sectors(s)
    assert sum(int(m.sum()) for m in secs.values()) == s.dim
    assert ex.sector_mask(s).sum() == secs[(0, 0, 0)].sum()


def test_trotter_second_order_and_gauge_invariance():
    s = ex.GaugedSystem(LatticeGeometry(3, 1), 3)
    v = ex.sector_project(s, s.random_state(np.random.default_rng(2))).normalized()
    ref = ex.exact_evolve(s, v, P, 0.8, include_electric=True).amplitudes
    errs = [np.linalg.norm(ex.trotter_evolve(s, v, P, 0.8, n, include_electric=True).amplitudes - ref)
            for n in (4, 8, 16)]
    slope = -np.polyfit(np.log([4, 8, 16]), np.log(errs), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.15)
    step = ex.trotter_step(s, P, 0.2, include_electric=True)
    assert max(ex.commutator_norm(step, ex.gauss_operator(s, x)) for x in s.geometry.vertices()) <= 1e-12


def test_trotter_zero_time_is_identity():
    s = ex.GaugedSystem(LatticeGeometry(2, 1), 2)
    v = s.random_state(np.random.default_rng(0))
    assert np.array_equal(ex.trotter_evolve(s, v, P, 0.0, 3).amplitudes, v.amplitudes)
    with pytest.raises(ValueError):
        ex.trotter_evolve(s, v, P, 1.0, 0)


def test_schedule_validation():
    g = LatticeGeometry(3, 1)
    with pytest.raises(ValueError):
        ex.validate_schedule(g, [[((0, 0), 1), ((1, 0), 1)]])
    with pytest.raises(ValueError):
        ex.validate_schedule(g, [[((0, 0), 1)]])
    groups = ex.validate_schedule(g, ex.default_schedule(g))
    assert sum(len(x) for x in groups) == g.n_links


def test_dimension_cap(monkeypatch):
    monkeypatch.setenv("GAUGEPEPS_DIM_CAP", "100")
    with pytest.raises(ex.DimensionCapError):
        ex.GaugedSystem(LatticeGeometry(2, 2), 3)
    monkeypatch.setenv("GAUGEPEPS_DIM_CAP", "abc")
    with pytest.raises(ValueError):
        ex.dim_cap()


def test_params_validation():
    with pytest.raises(ValueError):
        ex.HamiltonianParams(M=float("nan"), eps=1.0, g=1.0)
    with pytest.raises(ValueError):
        ex.build_hamiltonian(ex.GaugedSystem(LatticeGeometry(2, 1), 2), P, "bogus")


def test_single_link_matrix_form():
    s = ex.GaugedSystem(LatticeGeometry(2, 1), 3)
    psi, chi = s.psi((0, 0)), s.psi((1, 0))
    expected = (P.M * (psi.getH() @ psi - chi.getH() @ chi)
                + P.eps * (psi.getH() @ chi + chi.getH() @ psi))
    assert _dev(ex.build_hamiltonian(s, P, "H_f"), expected) <= 1e-14


def test_single_link_gauss_operators():
    s = ex.GaugedSystem(LatticeGeometry(2, 1), 5)
    E = s.field_diag(((0, 0), 1))
    n_psi, n_chi = s.number_diag((0, 0)), s.number_diag((1, 0))
    window = (np.abs(E) <= 1)  # values stay inside the Z_5 window there
    assert np.array_equal(ex.gauss_diag(s, (0, 0))[window], (E - n_psi)[window])
    assert np.array_equal(ex.gauss_diag(s, (1, 0))[window], (-E - (n_chi - 1))[window])


def test_gauging_raises_field_under_occupied_origin():
    s = ex.GaugedSystem(LatticeGeometry(2, 1), 3)
    ug = ex.gauging_unitary(s, ((0, 0), 1))
    before = s.basis_state([(0, 0)], {((0, 0), 1): 0}).amplitudes
    after = s.basis_state([(0, 0)], {((0, 0), 1): 1}).amplitudes
    assert np.array_equal(ug @ before, after)
    empty = s.basis_state([], {((0, 0), 1): 0}).amplitudes
    assert np.array_equal(ug @ empty, empty)

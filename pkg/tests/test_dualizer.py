import itertools

import numpy as np
import pytest
import scipy.sparse as sp

from gaugepeps import dualizer as du
from gaugepeps import exact as ex
from gaugepeps.lattice import LatticeGeometry

P = ex.HamiltonianParams(M=0.7, eps=1.3, g=0.9)


def _dev(A, B):
    D = sp.csr_matrix(A - B)
    return float(abs(D).max()) if D.nnz else 0.0


# -- Higgs unitary gauge --------------------------------------------------------
def test_unitary_gauge_is_permutation_and_decouples():
    hs = du.HiggsSystem(LatticeGeometry(3, 1, "open"), 3)
    UH = du.unitary_gauge_transform(hs)
    assert _dev(UH @ UH.getH(), sp.identity(hs.dim)) == 0
    rep = du.unitary_gauge_report(hs, hs.random_gauge_invariant_state(np.random.default_rng(0)))
    assert rep.in_sector and rep.decoupled
    assert rep.purity == pytest.approx(1.0, abs=1e-12)
    assert rep.norm_out == pytest.approx(rep.norm_in)


def test_unitary_gauge_maps_hopping_to_pure_gauge():
    hs = du.HiggsSystem(LatticeGeometry(2, 2, "open"), 3)
    UH = du.unitary_gauge_transform(hs)
    H = UH @ du.higgs_hopping(hs, 0.8) @ UH.getH()
    target = sum(0.8 * (hs.U(l) + hs.U(l).getH()) for l in hs.geometry.links)
    assert _dev(H, target) <= 1e-12


def test_unitary_gauge_reports_charged_input():
    hs = du.HiggsSystem(LatticeGeometry(2, 1, "open"), 3)
    v = np.random.default_rng(1).normal(size=hs.dim) + 0j
    rep = du.unitary_gauge_report(hs, v / np.linalg.norm(v))
    assert not rep.in_sector and not rep.decoupled


def test_cnot_form():
    hs = du.HiggsSystem(LatticeGeometry(3, 1, "open"), 2)
    assert _dev(du.unitary_gauge_transform(hs), du.cnot_product(hs)) == 0
    with pytest.raises(ValueError):
        du.cnot_product(du.HiggsSystem(LatticeGeometry(2, 1, "open"), 3))


# -- fermion elimination -----------------------------------------------------------
@pytest.mark.parametrize("n_sites", [2, 3, 4])
def test_spectra_agree(n_sites):
    rep = du.compare_spectra_1d(n_sites, P, 4)
    assert rep.max_deviation <= 1e-10


def test_uf_factors_commute_and_are_even():
    chain = du.EnlargedChain(LatticeGeometry(3, 1, "open"), 4)
    F = du.build_UF_1d(chain)
    par = chain.fermion_parity()
    for A, B in itertools.combinations(F, 2):
        assert ex.commutator_norm(A, B) <= 1e-12
    for A in F:
        assert ex.commutator_norm(A, par) <= 1e-12
        assert _dev(A @ A.getH(), sp.identity(chain.dim)) <= 1e-12


def test_naive_single_majorana_factor_fails():
    # U'_F(x) = c(x)^{E(x)} without the auxiliary partner: odd, and neighbours anticommute
    chain = du.EnlargedChain(LatticeGeometry(3, 1, "open"), 4)
    naive = [du._parity_power(chain.c(x), chain.field_diag(x)) for x in chain.bonds]
    assert ex.commutator_norm(naive[0], naive[1]) > 0.5
    par = chain.fermion_parity()
    assert ex.commutator_norm(naive[0], par) > 0.5


def test_conjugated_hamiltonian_block_equals_spin_model():
    geom = LatticeGeometry(3, 1, "open")
    chain = du.EnlargedChain(geom, 4)
    U = du.uf_product(du.build_UF_1d(chain))
    Hp = sp.csr_matrix(U @ chain.hamiltonian(P) @ U.getH())
    m = chain.reference_mask()
    _, Hs = du.eliminate_fermions_1d(geom, P, 4)
    assert _dev(Hp[m][:, m], Hs) <= 1e-12
    leak = Hp[m][:, ~m]
    assert leak.nnz == 0 or abs(leak).max() <= 1e-12


def test_spin_terms_have_no_fermions():
    terms = du.spin_terms_1d(4, P)
    names = {s for t in terms for s, _ in t.ops}
    assert names <= {"sigma+", "sigma-", "U", "U+", "xi"}


def test_symbolic_guards():
    raw = du.fermionic_terms_1d(2, P)
    with pytest.raises(ValueError):
        du.hardcore_substitution(raw)
    with pytest.raises(ValueError):
        du.replace_aux_pairs([du.Term(1.0, (("alpha", 0),))])


def test_chain_requirements():
    with pytest.raises(ValueError):
        du.EnlargedChain(LatticeGeometry(4, 1, "open"), 3)
    with pytest.raises(ValueError):
        du.EnlargedChain(LatticeGeometry(2, 2, "open"), 4)


def test_uf_preserves_auxiliary_pairs():
    chain = du.EnlargedChain(LatticeGeometry(3, 1, "open"), 4)
    U = du.uf_product(du.build_UF_1d(chain))
    for b in chain.bonds:
        assert ex.commutator_norm(U, chain.alpha(b) @ chain.beta(b)) <= 1e-12


def test_mass_term_keeps_its_form():
    terms = du.spin_terms_1d(3, P)
    mass = [t for t in terms if [s for s, _ in t.ops] == ["sigma+", "sigma-"]]
    assert [complex(t.coeff) for t in mass] == [P.M, -P.M, P.M]

"""Acceptance suite: ten end-to-end criteria, each printing one PASS/FAIL line."""
import itertools
import time

import numpy as np
import pytest
import scipy.sparse as sp

from gaugepeps import dualizer as du
from gaugepeps import exact as ex
from gaugepeps import fock
from gaugepeps import fpeps as fp
from gaugepeps import gaussian as gs
from gaugepeps import sampler as sm
from gaugepeps import spectra as spc
from gaugepeps.lattice import LatticeGeometry

PARAMS = ex.HamiltonianParams(M=0.7, eps=1.1, g=1.3)
SITE = fp.SiteTensorParams(t=0.8, y=0.3 + 0.4j, z=-0.5 + 0.2j)


@pytest.fixture
def report(capsys):
    def _report(number: int, title: str, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\n[acceptance {number:2d}] {'PASS' if ok else 'FAIL'} {title}: {detail}")
    return _report


def _dev(A, B) -> float:
    D = sp.csr_matrix(A - B)
    return float(abs(D).max()) if D.nnz else 0.0


def test_01_single_link_gauging(report):
    s = ex.GaugedSystem(LatticeGeometry(2, 1), 3)
    H = ex.build_hamiltonian(s, PARAMS, "H_f")
    Ht = ex.build_hamiltonian(s, PARAMS, "H_f_gauged")
    ug = ex.gauging_unitary(s, ((0, 0), 1))
    dev = _dev(ug @ H @ ug.getH(), Ht)
    ok = dev <= 1e-12
    report(1, "single-link U_G H U_G^dag = gauged H (N=3)", ok, f"max dev {dev:.2e}")
    assert ok


def test_02_chain_gauging(report):
    s = ex.GaugedSystem(LatticeGeometry(4, 1), 3)
    H = ex.build_hamiltonian(s, PARAMS, "H_f")
    Ht = ex.build_hamiltonian(s, PARAMS, "H_f_gauged")
    u = ex.gauging_unitary_1d(s)
    dev = _dev(u @ H @ u.getH(), Ht)
    ok = dev <= 1e-12
    report(2, "1D gauging on a 4-site chain", ok, f"max dev {dev:.2e}")
    assert ok


def test_03_trotter(report):
    t0 = time.perf_counter()
    s = ex.GaugedSystem(LatticeGeometry(2, 2), 3)
    v = ex.sector_project(s, s.random_state(np.random.default_rng(1))).normalized()
    ref = ex.exact_evolve(s, v, PARAMS, 1.0).amplitudes
    steps = [8, 16, 32, 64]
    errs = [np.linalg.norm(ex.trotter_evolve(s, v, PARAMS, 1.0, n).amplitudes - ref) for n in steps]
    slope = -np.polyfit(np.log(steps), np.log(errs), 1)[0]
    step = ex.trotter_step(s, PARAMS, 1.0 / 8)
    comm = max(ex.commutator_norm(step, ex.gauss_operator(s, x)) for x in s.geometry.vertices())
    elapsed = time.perf_counter() - t0
    ok = comm <= 1e-12 and abs(slope - 2.0) <= 0.1 and elapsed < 60
    report(3, "Trotter step gauge invariance and order", ok,
           f"[step, G] {comm:.2e}, slope {slope:.4f}, {elapsed:.1f} s")
    assert ok


def test_04_toy_bosonic_peps(report):
    geom = LatticeGeometry(2, 2, "torus")
    toy = fp.toy_bosonic_peps(geom, j=1, J=2)
    Q = toy.total_charge_diag()
    lams = np.random.default_rng(4).uniform(-np.pi, np.pi, 20)
    w0 = max(np.linalg.norm(np.exp(1j * L * Q) * toy.psi0 - toy.psi0) for L in lams)
    w1 = max(np.linalg.norm(np.exp(1j * L * toy.gauss_diag(x)) * toy.psi - toy.psi)
             for L in lams for x in geom.vertices())
    nonzero = np.linalg.norm(toy.psi0) > 0 and np.linalg.norm(toy.psi) > 0
    ok = nonzero and w0 <= 1e-12 and w1 <= 1e-12
    report(4, "toy bosonic PEPS global and local symmetry (2x2 torus, j=1)", ok,
           f"global {w0:.2e}, local {w1:.2e}")
    assert ok


def _random_pipeline(rng, n_modes):
    """Pairing state, mode rotations and one Gaussian projection; Gaussian vs Fock."""
    n_proj = int(rng.integers(0, n_modes - 1))
    A = rng.normal(size=(n_modes, n_modes)) + 1j * rng.normal(size=(n_modes, n_modes))
    K = A - A.T
    angles = {m: rng.uniform(-np.pi, np.pi) for m in range(n_modes) if rng.random() < 0.5}
    state = gs.rotate_modes(gs.from_antisymmetric(K), angles)
    vec = fock.pairing_state(K)
    for m, a in angles.items():
        vec = fock.number_phase(vec, n_modes, m, a)
    modes = list(rng.permutation(n_modes)[:n_proj])
    if n_proj:
        B = rng.normal(size=(n_proj, n_proj)) + 1j * rng.normal(size=(n_proj, n_proj))
        Kb = B - B.T
        state = gs.project(state, modes, gs.from_antisymmetric(Kb))
        vec = fock.project_modes(vec, n_modes, modes, fock.pairing_state(Kb))
    n_left = n_modes - n_proj
    return state, vec, n_left


def test_05_gaussian_pipelines(report):
    rng = np.random.default_rng(5)
    worst = {"norm": 0.0, "2pt": 0.0, "4pt": 0.0}
    for _ in range(200):
        n_modes = int(rng.integers(2, 11))
        state, vec, n = _random_pipeline(rng, n_modes)
        worst["norm"] = max(worst["norm"], abs(state.log_norm - np.log(np.linalg.norm(vec))))
        for _ in range(3):
            i, j = rng.integers(0, n, 2)
            di, dj = bool(rng.integers(2)), bool(rng.integers(2))
            o2 = [(int(i), di), (int(j), dj)]
            worst["2pt"] = max(worst["2pt"], abs(gs.two_point(state, *o2) - fock.expectation(vec, n, o2)))
            o4 = [(int(m), bool(d)) for m, d in zip(rng.integers(0, n, 4), rng.integers(0, 2, 4))]
            worst["4pt"] = max(worst["4pt"], abs(gs.four_point(state, *o4) - fock.expectation(vec, n, o4)))
    ok = all(v <= 1e-10 for v in worst.values())
    report(5, "200 Gaussian pipelines vs Fock enumeration", ok,
           ", ".join(f"{k} {v:.2e}" for k, v in worst.items()))
    assert ok


def test_06_weight_gauge_invariance_and_field_support(report):
    geom = LatticeGeometry(2, 2, "torus")
    peps = fp.FPEPS(geom, SITE)
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(100):
        phi = rng.uniform(0, 2 * np.pi, geom.n_links)
        x = geom.vertex_at(int(rng.integers(geom.n_vertices)))
        a = peps.log_weight(phi)
        b = peps.log_weight(fp.gauge_shift(geom, phi, x, rng.uniform(-np.pi, np.pi)))
        worst = max(worst, abs(np.expm1(b - a)))
    support = fp.measured_field_support(geom, SITE, n=5, rng=rng)
    ok = worst <= 1e-10 and support <= {-1, 0, 1}
    report(6, "p(Phi) = p(Phi^lambda), field support", ok,
           f"max relative dev {worst:.2e}, support {sorted(support)}")
    assert ok


def test_07_monte_carlo(report):
    t0 = time.perf_counter()
    geom = LatticeGeometry(2, 2, "torus")
    obs = [sm.WilsonLoop(geom.rectangle_loop((0, 0), 1, 1), name="wilson"),
           sm.MesonString(geom, (0, 0), (1, 0), geom.walk((0, 0), [(1, 1)]), name="meson")]
    target = sm.TabulatedTarget.from_peps(fp.FPEPS(geom, SITE), 3, obs)
    cfg = sm.ChainConfig(n_chains=100, n_sweeps=10 ** 5, burn_in=1000, seed=7)
    res = sm.run_chains(target, obs, cfg)
    lines = []
    ok = True
    for o in obs:
        exact = target.exact(o.name)
        per = res.per_chain(o.name)
        within = sum(abs(e.mean - exact) <= 3 * e.std_error for e in per)
        worst_se = max(e.std_error for e in per)
        ok &= within >= 99 and worst_se < 1e-2
        lines.append(f"{o.name} {within}/100 within 3 sigma, max stderr {worst_se:.2e}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 300
    report(7, "MC Wilson loop and meson on 2x2 Z_3 torus", ok, "; ".join(lines) + f"; {elapsed:.0f} s")
    assert ok


def test_08_transfer_correlators(report):
    worst = 0.0
    for a, b in [(spc.Insertion("n", 0), spc.Insertion("n", 0)),
                 (spc.Insertion("n", 0), spc.Insertion("n", 1)),
                 (spc.Insertion("U", 0), spc.Insertion("U", 0))]:
        chk = spc.correlator_check(SITE, n_y=2, n=3, max_l=5, a=a, b=b)
        worst = max(worst, chk.max_deviation)
    ok = worst <= 1e-8
    report(8, "transfer-matrix correlators vs spectral prediction (L <= 5)", ok, f"max dev {worst:.2e}")
    assert ok


def test_09_higgs_unitary_gauge(report):
    hs = du.HiggsSystem(LatticeGeometry(2, 2, "torus"), 3)
    rng = np.random.default_rng(9)
    purities = [du.unitary_gauge_report(hs, hs.random_gauge_invariant_state(rng)).purity for _ in range(3)]
    h2 = du.HiggsSystem(LatticeGeometry(2, 2, "torus"), 2)
    cnot = _dev(du.unitary_gauge_transform(h2), du.cnot_product(h2))
    ok = min(purities) >= 1 - 1e-12 and cnot <= 1e-12
    report(9, "Higgs unitary gauge", ok, f"min purity 1-{1 - min(purities):.1e}, N=2 vs CNOTs {cnot:.1e}")
    assert ok


def test_10_fermion_elimination(report):
    rep = du.compare_spectra_1d(4, PARAMS, 4)
    chain = du.EnlargedChain(LatticeGeometry(4, 1, "open"), 4)
    factors = du.build_UF_1d(chain)
    comm = max(ex.commutator_norm(A, B) for A, B in itertools.combinations(factors, 2))
    ok = rep.max_deviation <= 1e-10 and comm <= 1e-12 and len(rep.fermion_spectrum) > 0
    report(10, "fermion elimination on a 4-site Z_4 chain", ok,
           f"{len(rep.fermion_spectrum)} levels, spectrum dev {rep.max_deviation:.2e}, [U_F, U_F] {comm:.1e}")
    assert ok

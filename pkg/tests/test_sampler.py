import json

import numpy as np
import pytest
from scipy import stats

from gaugepeps import fpeps as fp
from gaugepeps import sampler as sm
from gaugepeps.lattice import LatticeGeometry

P = fp.SiteTensorParams(t=0.8, y=0.3 + 0.4j, z=-0.5 + 0.2j)
SMALL = LatticeGeometry(2, 1, "periodic-x")  # two links


def _flat_target(geom, n):
    count = n ** geom.n_links
    return sm.TabulatedTarget(geom, n, np.zeros(count), {"index": np.arange(count), "one": np.ones(count)})


@pytest.fixture(scope="module")
def torus_target():
    geom = LatticeGeometry(2, 2, "torus")
    obs = [sm.WilsonLoop(geom.rectangle_loop((0, 0), 1, 1)), sm.LinkPhase(0)]
    return sm.TabulatedTarget.from_peps(fp.FPEPS(geom, P), 3, obs), obs


def test_chain_config_validation():
    with pytest.raises(ValueError):
        sm.ChainConfig(n_chains=0)
    with pytest.raises(ValueError):
        sm.ChainConfig(delta=0.0)
    with pytest.raises(ValueError):
        sm.ChainConfig(thinning=0)


def test_tabulated_determinism(torus_target):
    target, obs = torus_target
    cfg = sm.ChainConfig(n_chains=3, n_sweeps=500, burn_in=50, seed=11)
    a, b = sm.run_chains(target, obs, cfg), sm.run_chains(target, obs, cfg)
    for o in obs:
        for x, y in zip(a.samples[o.name], b.samples[o.name]):
            assert np.array_equal(x, y)
    c = sm.run_chains(target, obs, sm.ChainConfig(n_chains=3, n_sweeps=500, burn_in=50, seed=12))
    assert not np.array_equal(a.samples["wilson"][0], c.samples["wilson"][0])


def test_flat_weights_visit_uniformly():
    target = _flat_target(SMALL, 3)
    cfg = sm.ChainConfig(n_chains=4, n_sweeps=5000, burn_in=10, seed=3)
    res = sm.run_chains(target, [sm.Constant("index")], cfg)
    idx = np.concatenate([np.real(s) for s in res.samples["index"]]).astype(int)
    counts = np.bincount(idx, minlength=9)
    _, p = stats.chisquare(counts)
    assert p > 1e-4
    assert np.mean(res.acceptance) == pytest.approx(1.0)


def test_gauge_variant_link_averages_to_zero(torus_target):
    target, obs = torus_target
    assert abs(target.exact("link")) < 1e-12
    res = sm.run_chains(target, obs, sm.ChainConfig(n_chains=4, n_sweeps=5000, burn_in=100, seed=5))
    e = res.estimate("link")
    assert abs(e.mean) < 4 * e.std_error + 1e-3


def test_wilson_loop_matches_exact(torus_target):
    target, obs = torus_target
    res = sm.run_chains(target, obs, sm.ChainConfig(n_chains=4, n_sweeps=20000, burn_in=200, seed=6))
    e = sm.wilson_loop(res)
    assert abs(e.mean - target.exact("wilson")) < 4 * e.std_error
    assert target.exact("wilson") == pytest.approx(
        sm.exact_reference(target.geom, P, 3, obs[0]), abs=1e-12)


def test_error_scales_as_inverse_sqrt(torus_target):
    target, obs = torus_target
    ns = [2000, 8000, 32000]
    errs = [sm.run_chains(target, obs, sm.ChainConfig(n_chains=4, n_sweeps=n, burn_in=100, seed=8))
            .estimate("wilson").std_error for n in ns]
    slope = np.polyfit(np.log(ns), np.log(errs), 1)[0]
    assert slope == pytest.approx(-0.5, abs=0.1)


def test_small_delta_accepts_everything():
    peps = fp.FPEPS(SMALL, P)
    cfg = sm.ChainConfig(n_chains=1, n_sweeps=40, burn_in=0, delta=1e-6, tune=False, seed=1)
    res = sm.run_chains(sm.ContinuousTarget(peps), [sm.Constant()], cfg)
    assert np.mean(res.acceptance) > 0.99


def test_continuous_thread_independence():
    peps = fp.FPEPS(SMALL, P)
    obs = [sm.LinkPhase(0), sm.MesonString(SMALL, (0, 0), (0, 0), name="occ")]
    cfg = sm.ChainConfig(n_chains=3, n_sweeps=60, burn_in=40, seed=2)
    a = sm.run_chains(sm.ContinuousTarget(peps), obs, cfg, threads=1)
    b = sm.run_chains(sm.ContinuousTarget(peps), obs, cfg, threads=3)
    for o in obs:
        for x, y in zip(a.samples[o.name], b.samples[o.name]):
            assert np.array_equal(x, y)
    assert a.deltas == b.deltas


def test_tuning_widens_a_too_small_proposal():
    # acceptance near 1 at tiny delta: burn-in tuning must grow delta (capped at pi)
    peps = fp.FPEPS(LatticeGeometry(2, 2, "torus"), P)
    cfg = sm.ChainConfig(n_chains=1, n_sweeps=20, burn_in=200, delta=1e-3, seed=4)
    res = sm.run_chains(sm.ContinuousTarget(peps), [sm.Constant()], cfg)
    assert 0.05 < res.deltas[0] <= np.pi
    fixed = sm.run_chains(sm.ContinuousTarget(peps), [sm.Constant()], sm.ChainConfig(
        n_chains=1, n_sweeps=20, burn_in=200, delta=1e-3, seed=4, tune=False))
    assert fixed.deltas[0] == 1e-3


def test_iid_estimator():
    x = np.random.default_rng(0).normal(size=40000)
    e = sm.estimate([x])
    assert e.tau_int == pytest.approx(0.5, abs=0.1)
    assert e.std_error == pytest.approx(1 / np.sqrt(x.size), rel=0.15)


def test_correlated_estimator():
    rng = np.random.default_rng(1)
    rho, n = 0.9, 200000
    x = np.empty(n)
    x[0] = 0
    noise = rng.normal(size=n)
    for i in range(1, n):
        x[i] = rho * x[i - 1] + noise[i]
    e = sm.estimate([x])
    assert e.tau_int == pytest.approx((1 + rho) / (2 * (1 - rho)), rel=0.2)
    true_se = np.sqrt(2 * e.tau_int / n) * x.std()
    assert e.std_error == pytest.approx(true_se, rel=0.25)


def test_complex_error_combines_components():
    rng = np.random.default_rng(2)
    z = rng.normal(size=10000) + 1j * rng.normal(size=10000)
    e = sm.estimate([z])
    assert e.std_error == pytest.approx(np.hypot(e.std_error_re, e.std_error_im))


def test_observable_guards():
    geom = LatticeGeometry(3, 1)
    with pytest.raises(ValueError):
        sm.WilsonLoop(geom.walk((0, 0), [(1, 1)]))
    with pytest.raises(ValueError):
        sm.MesonString(geom, (0, 0), (2, 0))
    target = _flat_target(SMALL, 3)
    with pytest.raises(ValueError):
        sm.run_chains(target, [sm.Constant("missing")], sm.ChainConfig())
    with pytest.raises(ValueError):
        sm.run_chains(target, [sm.Constant("one"), sm.Constant("one")], sm.ChainConfig())


def test_outputs(tmp_path, torus_target):
    target, obs = torus_target
    res = sm.run_chains(target, obs, sm.ChainConfig(n_chains=2, n_sweeps=100, burn_in=10, seed=9))
    res.write_csv(tmp_path / "c.csv")
    res.write_json(tmp_path / "r.json")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "chain,sweep,log_weight,acceptance" and len(lines) == 201
    d = json.loads((tmp_path / "r.json").read_text())
    assert [e["observable"] for e in d["estimates"]] == ["wilson", "link"]

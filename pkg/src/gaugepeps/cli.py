"""Command line runner: one subcommand per experiment.

Every subcommand reads an optional TOML config, writes JSON (scalars) and CSV
(tables) into ``--out`` and renders PNG figures next to them. Exit codes: 0 ok,
1 failed verification, 2 config error, 3 dimension cap exceeded.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import dualizer as du
from . import exact as ex
from . import fpeps as fp
from . import plotting
from . import sampler as sm
from . import spectra as spc
from .config import EXPERIMENTS, ConfigError, ExperimentConfig, load_config, parse_config
from .lattice import LatticeError, LatticeGeometry

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_CAP = 0, 1, 2, 3


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.tolerance)

    def to_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "tolerance": self.tolerance, "passed": self.passed}


# -- output helpers -----------------------------------------------------------
def _clean(obj):
    """Round floats to 15 significant digits; complex and non-finite become JSON-safe."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _clean(obj.real), "im": _clean(obj.imag)}
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return str(v)
        return float(f"{v:.15g}")
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def write_json(path, payload) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n")
    return path


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.15g}"
    return v


def write_csv(path, fields, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(fields)
        for r in rows:
            w.writerow([_fmt(r[k]) for k in fields])
    return path


def emit_scan(points, observable, path, fields, threads: int = 1) -> list:
    """Evaluate ``observable(point) -> dict`` over ``points`` into a CSV.

    The header is written first and each row is flushed as soon as it is
    complete, in grid order, so an interrupted scan leaves a valid prefix.
    """
    points = list(points)
    rows = []
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(fields), extrasaction="ignore")
        w.writeheader()
        fh.flush()
        if threads > 1:
            pool = ThreadPoolExecutor(max_workers=threads)
            results = pool.map(observable, points)
        else:
            pool = None
            results = map(observable, points)
        try:
            for row in results:
                w.writerow({k: _fmt(v) for k, v in row.items()})
                fh.flush()
                rows.append(row)
        finally:
            if pool is not None:
                pool.shutdown(cancel_futures=True)
    return rows


def _config_dict(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    d["hamiltonian"] = {"M": cfg.hamiltonian.M, "eps": cfg.hamiltonian.eps, "g": cfg.hamiltonian.g}
    d["peps"] = cfg.peps.to_dict()
    return d


# -- invariant suites ------------------------------------------------------------
def _max_or_zero(values) -> float:
    values = list(values)
    return float(max(values)) if values else 0.0


def _op_dev(A, B) -> float:
    D = sp.csr_matrix(A - B)
    return float(abs(D).max()) if D.nnz else 0.0


def suite_exact(cfg: ExperimentConfig) -> list:
    geom = cfg.geometry.build()
    s = ex.GaugedSystem(geom, cfg.n)
    P = cfg.hamiltonian
    H = ex.build_hamiltonian(s, P, "full")
    checks = [Check("hermiticity", _op_dev(H, H.getH()), 1e-12),
              Check("gauss_commutes_with_H", _max_or_zero(
                  ex.commutator_norm(ex.gauss_operator(s, x), H) for x in geom.vertices()), 1e-12)]
    worst = 0.0
    for link in geom.links:
        ug = ex.gauging_unitary(s, link)
        h = ex.link_hopping(s, P, link, gauged=False)
        ht = ex.link_hopping(s, P, link, gauged=True)
        worst = max(worst, _op_dev(ug @ h @ ug.getH(), ht))
    checks.append(Check("single_link_gauging", worst, 1e-12))
    if geom.height == 1 and not geom.boundary.periodic_x:
        u = ex.gauging_unitary_1d(s)
        checks.append(Check("chain_gauging", _op_dev(u @ ex.build_hamiltonian(s, P, "H_f") @ u.getH(),
                                                    ex.build_hamiltonian(s, P, "H_f_gauged")), 1e-12))
    return checks


def suite_trotter(cfg: ExperimentConfig) -> list:
    geom = cfg.geometry.build()
    s = ex.GaugedSystem(geom, cfg.n)
    step = ex.trotter_step(s, cfg.hamiltonian, 0.37, include_electric=cfg.trotter.include_electric)
    U = sp.csr_matrix(step)
    unit = _op_dev(U @ U.getH(), sp.identity(s.dim, format="csr"))
    return [Check("step_unitary", unit, 1e-12),
            Check("step_commutes_with_gauss", _max_or_zero(
                ex.commutator_norm(step, ex.gauss_operator(s, x)) for x in geom.vertices()), 1e-12)]


def suite_dualize(cfg: ExperimentConfig) -> list:
    d = cfg.dualize
    chain = du.EnlargedChain(LatticeGeometry(d.chain_sites, 1, "open"), d.chain_n)
    factors = du.build_UF_1d(chain)
    comm = _max_or_zero(ex.commutator_norm(A, B) for A, B in itertools.combinations(factors, 2))
    par = chain.fermion_parity()
    even = _max_or_zero(ex.commutator_norm(F, par) for F in factors)
    return [Check("uf_factors_commute", comm, 1e-12), Check("uf_factors_even", even, 1e-12)]


def suite_fpeps(cfg: ExperimentConfig) -> list:
    checks = []
    for parity in (1, -1):
        rep = fp.verify_virtual_gauss(parity, cfg.peps)
        checks.append(Check(f"virtual_gauss_parity_{'even' if parity == 1 else 'odd'}", rep.max_deviation, 1e-10))
    geom = cfg.geometry.build()
    peps = fp.FPEPS(geom, cfg.peps)
    rng = np.random.default_rng(cfg.seed)
    worst = 0.0
    for _ in range(5):
        phi = rng.uniform(0, 2 * np.pi, geom.n_links)
        x = geom.vertex_at(int(rng.integers(geom.n_vertices)))
        a, b = peps.log_weight(phi), peps.log_weight(fp.gauge_shift(geom, phi, x, rng.uniform(-np.pi, np.pi)))
        if np.isfinite(a) or np.isfinite(b):
            worst = max(worst, abs(np.expm1(b - a)) if np.isfinite(a) and np.isfinite(b) else np.inf)
    checks.append(Check("weight_gauge_invariance", worst, 1e-10))
    return checks


def suite_mc(cfg: ExperimentConfig) -> list:
    checks = suite_fpeps(cfg)
    cc = sm.ChainConfig(n_chains=2, n_sweeps=200, burn_in=20, seed=cfg.seed)
    a = sm.estimate([np.arange(100.0) % 7])
    checks.append(Check("estimator_finite", 0.0 if np.isfinite(a.std_error) else np.inf, 0.0))
    s1 = [r.random(4) for r in cc.streams()]
    s2 = [r.random(4) for r in cc.streams()]
    checks.append(Check("streams_reproducible", float(max(np.max(np.abs(x - y)) for x, y in zip(s1, s2))), 0.0))
    return checks


def suite_spectra(cfg: ExperimentConfig) -> list:
    chk = spc.correlator_check(cfg.peps, cfg.scan.n_y, cfg.n, max_l=3)
    return [Check("spectral_vs_explicit_correlator", chk.max_deviation, 1e-8)]


SUITES = {"exact-check": suite_exact, "trotter": suite_trotter, "dualize": suite_dualize,
          "fpeps-verify": suite_fpeps, "mc": suite_mc, "transfer-scan": suite_spectra}


# -- experiments -------------------------------------------------------------------
def run_exact_check(cfg, out: Path, threads: int) -> tuple:
    checks = suite_exact(cfg)
    geom = cfg.geometry.build()
    s = ex.GaugedSystem(geom, cfg.n)
    H = ex.build_hamiltonian(s, cfg.hamiltonian, "full")
    mask = ex.sector_mask(s)
    Hs = sp.csr_matrix(H)[mask][:, mask]
    if Hs.shape[0] <= 2000:
        e0 = float(np.linalg.eigvalsh(Hs.toarray())[0])
    else:
        from scipy.sparse.linalg import eigsh
        e0 = float(eigsh(Hs, k=1, which="SA", return_eigenvectors=False)[0])
    payload = {"hilbert_dim": s.dim, "sector_dim": int(mask.sum()), "ground_energy_zero_sector": e0}
    return checks, payload, [plotting.plot_checks([c.to_dict() for c in checks], out / "exact_check.png")]


def run_trotter(cfg, out: Path, threads: int) -> tuple:
    checks = suite_trotter(cfg)
    geom = cfg.geometry.build()
    s = ex.GaugedSystem(geom, cfg.n)
    rng = np.random.default_rng(cfg.seed)
    v = ex.sector_project(s, s.random_state(rng)).normalized()
    T, inc = cfg.trotter.time, cfg.trotter.include_electric
    ref = ex.exact_evolve(s, v, cfg.hamiltonian, T, inc).amplitudes
    rows = []
    for n_steps in cfg.trotter.steps:
        amps = ex.trotter_evolve(s, v, cfg.hamiltonian, T, n_steps, include_electric=inc).amplitudes
        leak = float(np.linalg.norm(amps[~ex.sector_mask(s)]))
        rows.append({"n_steps": n_steps, "dt": T / n_steps, "error": float(np.linalg.norm(amps - ref)),
                     "sector_leak": leak})
    errs = np.array([r["error"] for r in rows])
    steps = np.array([r["n_steps"] for r in rows], float)
    slope = float(np.polyfit(np.log(steps), np.log(errs), 1)[0]) if len(rows) > 1 and np.all(errs > 0) else float("nan")
    checks.append(Check("sector_leak", _max_or_zero(r["sector_leak"] for r in rows), 1e-12))
    if len(rows) > 1:
        checks.append(Check("error_slope_deviation", abs(-slope - 2.0), 0.1))
    files = [write_csv(out / "trotter.csv", ["n_steps", "dt", "error", "sector_leak"], rows)]
    files.append(plotting.plot_trotter(steps, errs, slope, out / "trotter.png"))
    return checks, {"slope": slope, "errors": rows}, files


def run_dualize(cfg, out: Path, threads: int) -> tuple:
    checks = suite_dualize(cfg)
    d = cfg.dualize
    rep = du.compare_spectra_1d(d.chain_sites, cfg.hamiltonian, d.chain_n)
    checks.append(Check("elimination_spectra", rep.max_deviation, 1e-10))
    hs = du.HiggsSystem(LatticeGeometry(d.higgs_width, d.higgs_height, d.higgs_boundary), d.higgs_n)
    state = hs.random_gauge_invariant_state(np.random.default_rng(cfg.seed))
    hr = du.unitary_gauge_report(hs, state)
    checks.append(Check("unitary_gauge_impurity", 1.0 - hr.purity, 1e-12))
    checks.append(Check("unitary_gauge_matter_not_zero", 1.0 - hr.matter_weight_at_zero, 1e-12))
    if d.higgs_n == 2:
        checks.append(Check("cnot_product", _op_dev(du.unitary_gauge_transform(hs), du.cnot_product(hs)), 1e-12))
    rows = [{"level": i, "fermionic": a, "spin": b}
            for i, (a, b) in enumerate(zip(rep.fermion_spectrum, rep.spin_spectrum))]
    files = [write_csv(out / "spectra.csv", ["level", "fermionic", "spin"], rows),
             plotting.plot_spectra(rep.fermion_spectrum, rep.spin_spectrum, out / "spectra.png")]
    payload = {"elimination": {"levels": len(rows), "max_deviation": rep.max_deviation},
               "higgs": asdict(hr)}
    return checks, payload, files


def run_fpeps_verify(cfg, out: Path, threads: int) -> tuple:
    checks = suite_fpeps(cfg)
    geom = cfg.geometry.build()
    peps = fp.FPEPS(geom, cfg.peps)
    rng = np.random.default_rng(cfg.seed + 1)
    payload = {}
    try:
        phi = rng.uniform(0, 2 * np.pi, geom.n_links)
        vec = fp.fock_psi_phi(geom, peps.T, phi)
        st = peps.psi_phi(phi)
        dev = abs(0.5 * math.log(float(np.vdot(vec, vec).real)) - st.log_norm)
        checks.append(Check("gaussian_vs_fock_log_norm", dev, 1e-10))
        support = fp.measured_field_support(geom, cfg.peps, n=5, rng=rng)
        payload["field_support"] = sorted(support)
        checks.append(Check("field_support_outside_0_pm1", float(len(support - {-1, 0, 1})), 0.0))
    except MemoryError as exc:
        payload["fock_oracle"] = f"skipped: {exc}"
    try:
        toy = fp.toy_bosonic_peps(geom, 1, 2)
        Q = toy.total_charge_diag()
        w0 = w1 = 0.0
        for lam in rng.uniform(-np.pi, np.pi, 20):
            w0 = max(w0, float(np.linalg.norm(np.exp(1j * lam * Q) * toy.psi0 - toy.psi0)))
            for x in geom.vertices():
                w1 = max(w1, float(np.linalg.norm(np.exp(1j * lam * toy.gauss_diag(x)) * toy.psi - toy.psi)))
        checks += [Check("toy_global_symmetry", w0, 1e-12), Check("toy_local_gauss", w1, 1e-12)]
    except (MemoryError, ValueError) as exc:
        payload["toy_peps"] = f"skipped: {exc}"
    return checks, payload, [plotting.plot_checks([c.to_dict() for c in checks], out / "fpeps_verify.png")]


def build_observables(cfg: ExperimentConfig, geom: LatticeGeometry) -> list:
    obs = []
    for i, (cx, cy, w, h) in enumerate(cfg.observables.wilson):
        obs.append(sm.WilsonLoop(geom.rectangle_loop((cx, cy), w, h), name=f"wilson_{i}"))
    for i, (x, moves) in enumerate(cfg.observables.meson):
        path = geom.walk(x, moves) if moves else None
        y = path.end if path is not None else tuple(x)
        obs.append(sm.MesonString(geom, tuple(x), tuple(y), path, name=f"meson_{i}"))
    for li in cfg.observables.link_phase:
        if not 0 <= li < geom.n_links:
            raise ConfigError(f"[observables] link_phase: index {li} outside 0..{geom.n_links - 1}")
        obs.append(sm.LinkPhase(li, name=f"link_{li}"))
    return obs


def run_mc(cfg, out: Path, threads: int) -> tuple:
    geom = cfg.geometry.build()
    obs = build_observables(cfg, geom)
    peps = fp.FPEPS(geom, cfg.peps)
    if cfg.sampler_mode == "tabulated":
        target = sm.TabulatedTarget.from_peps(peps, cfg.n, obs)
    else:
        target = sm.ContinuousTarget(peps)
    res = sm.run_chains(target, obs, cfg.chain, threads=threads)
    estimates = res.estimates_dict()
    checks = []
    if target.discrete:
        for e, o in zip(estimates, obs):
            e["exact_re"], e["exact_im"] = target.exact(o.name).real, target.exact(o.name).imag
    rows = []
    for c in range(cfg.chain.n_chains):
        for k, (lw, acc) in enumerate(zip(res.log_weights[c], res.acceptance[c])):
            rows.append({"chain": c, "sweep": k, "log_weight": float(lw), "acceptance": float(acc)})
    files = [write_csv(out / "chains.csv", ["chain", "sweep", "log_weight", "acceptance"], rows),
             plotting.plot_mc(res, out / "mc.png")]
    payload = {"estimates": estimates, "acceptance_mean": float(np.mean([np.mean(a) for a in res.acceptance])),
               "deltas": res.deltas}
    return checks, payload, files


def _scan_point(cfg: ExperimentConfig, t: float) -> dict:
    params = replace(cfg.peps, t=float(t))
    return spc.emit_transfer_row(params, cfg.scan.n_y, cfg.n)


def run_transfer_scan(cfg, out: Path, threads: int) -> tuple:
    # the first point is built eagerly so cap errors surface before any file is written
    spc.TransferBuilder(cfg.peps, cfg.scan.n_y, cfg.n)
    rows = emit_scan(cfg.scan.t, lambda t: _scan_point(cfg, t), out / "transfer_scan.csv", spc.SCAN_FIELDS,
                     threads)
    files = [out / "transfer_scan.csv",
             plotting.plot_scan(rows, "t", ["gap_ratio", "correlation_length"], out / "transfer_scan.png")]
    return [], {"rows": rows}, files


RUNNERS = {"exact-check": run_exact_check, "trotter": run_trotter, "dualize": run_dualize,
           "fpeps-verify": run_fpeps_verify, "mc": run_mc, "transfer-scan": run_transfer_scan}


# -- entry point -------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML experiment config")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--threads", type=int, default=1, help="worker threads for chains and scan points")
    common.add_argument("--verify", action="store_true", help="run the module invariant suite first")
    p = argparse.ArgumentParser(prog="gaugepeps", description="Gauged fermionic PEPS experiments")
    sub = p.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        sub.add_parser(name, parents=[common])
    return p


def _print_checks(checks, stream) -> None:
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.value:.3e} (tol {c.tolerance:.1e})", file=stream)


def run(kind: str, cfg: ExperimentConfig, out: Path, threads: int = 1, verify: bool = False) -> int:
    """Run one experiment and write its artifacts; returns the exit status."""
    out.mkdir(parents=True, exist_ok=True)
    try:
        if verify:
            pre = SUITES[kind](cfg)
            _print_checks(pre, sys.stdout)
            write_json(out / "verify.json", {"experiment": kind, "checks": [c.to_dict() for c in pre]})
            if not all(c.passed for c in pre):
                print("verification failed; experiment not run", file=sys.stderr)
                return EXIT_VERIFY
        checks, payload, files = RUNNERS[kind](cfg, out, threads)
    except ex.DimensionCapError as exc:
        print(f"dimension cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    _print_checks(checks, sys.stdout)
    ok = all(c.passed for c in checks)
    result = {"experiment": kind, "config": _config_dict(cfg), "checks": [c.to_dict() for c in checks],
              "passed": ok, "results": payload,
              "artifacts": sorted(Path(f).name for f in files)}
    path = write_json(out / f"{kind.replace('-', '_')}.json", result)
    print(f"wrote {path}")
    return EXIT_OK if ok else EXIT_VERIFY


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("config error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config, args.command) if args.config else parse_config("", args.command)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed, chain=replace(cfg.chain, seed=args.seed))
        return run(args.command, cfg, args.out, args.threads, args.verify)
    except (ConfigError, LatticeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        # parameter validation inside modules (bad env cap, bad observable paths)
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

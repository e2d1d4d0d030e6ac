"""Metropolis sampling of gauge configurations with weight ``<psi(Phi)|psi(Phi)>``.

Two targets share one interface. :class:`ContinuousTarget` evaluates the
fPEPS at arbitrary angles; :class:`TabulatedTarget` discretises every link to
Z_N and precomputes weights and observables for all ``N^links`` configurations,
so many chains can run vectorised. Each chain owns a private RNG stream spawned
from one seed, so results do not depend on how chains are scheduled.
"""
from __future__ import annotations

import csv
import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import fpeps as fp
from . import gaussian as gs
from .lattice import LatticeGeometry, OrientedPath

TABLE_LIMIT = 10 ** 7
RNG_BLOCK = 512


# -- configuration ------------------------------------------------------------
@dataclass(frozen=True)
class ChainConfig:
    n_chains: int = 4
    n_sweeps: int = 1000
    burn_in: int = 200
    delta: float = 0.5
    seed: int = 0
    thinning: int = 1
    tune: bool = True

    def __post_init__(self):
        if self.n_chains < 1:
            raise ValueError("n_chains must be >= 1")
        if self.n_sweeps < 1 or self.burn_in < 0:
            raise ValueError("n_sweeps must be >= 1 and burn_in >= 0")
        if not 0 < self.delta <= math.pi:
            raise ValueError("proposal width delta must lie in (0, pi]")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")

    def streams(self) -> list:
        """One independent generator per chain."""
        return [np.random.default_rng(s) for s in np.random.SeedSequence(self.seed).spawn(self.n_chains)]


@dataclass(frozen=True)
class EstimateWithError:
    mean: complex
    std_error: float
    tau_int: float
    n_effective: float
    std_error_re: float = 0.0
    std_error_im: float = 0.0

    def to_dict(self, name: str = "") -> dict:
        return {"observable": name, "mean_re": float(np.real(self.mean)), "mean_im": float(np.imag(self.mean)),
                "stderr": self.std_error, "stderr_re": self.std_error_re, "stderr_im": self.std_error_im,
                "tau_int": self.tau_int, "n_eff": self.n_effective}


# -- observables ----------------------------------------------------------------
@dataclass(frozen=True)
class WilsonLoop:
    """``e^{i sum phi}`` along a closed oriented path."""
    path: OrientedPath
    name: str = "wilson"
    needs_state = False

    def __post_init__(self):
        if not self.path.closed:
            raise ValueError("a Wilson loop needs a closed path")

    def value(self, phi, state=None) -> complex:
        return complex(np.exp(1j * self.path.phase(phi)))


@dataclass(frozen=True)
class MesonString:
    """``e^{i sum phi} <psi^dag(x) psi(y)>_Phi`` along an open path from ``x`` to ``y``.

    ``path=None`` (or an empty path) with ``x == y`` gives the occupation.
    """
    geometry: LatticeGeometry
    x: tuple
    y: tuple
    path: OrientedPath | None = None
    name: str = "meson"
    needs_state = True

    def __post_init__(self):
        steps = self.path.steps if self.path is not None else ()
        if not steps:
            if tuple(self.x) != tuple(self.y):
                raise ValueError("distinct endpoints need a connecting path")
            return
        if self.path.closed:
            raise ValueError("a meson string needs an open path")
        if tuple(self.path.start) != tuple(self.x) or tuple(self.path.end) != tuple(self.y):
            raise ValueError("path endpoints must match x and y")

    def value(self, phi, state=None) -> complex:
        if state is None:
            return 0j  # zero-weight configuration
        phase = self.path.phase(phi) if self.path is not None else 0.0
        return fp.meson_value(state, self.geometry, self.x, self.y, phase)


@dataclass(frozen=True)
class LinkPhase:
    """Gauge-variant ``e^{i phi_l}`` on a single link (averages to zero)."""
    link_index: int
    name: str = "link"
    needs_state = False

    def value(self, phi, state=None) -> complex:
        return complex(np.exp(1j * phi[self.link_index]))


@dataclass(frozen=True)
class Constant:
    name: str = "one"
    needs_state = False

    def value(self, phi, state=None) -> complex:
        return 1.0 + 0j


def _evaluate(observables, phi, state) -> np.ndarray:
    return np.array([o.value(phi, state) for o in observables], dtype=complex)


# -- targets ------------------------------------------------------------------
class ContinuousTarget:
    """Angles in ``[0, 2 pi)`` with weights from a live fPEPS contraction."""

    discrete = False

    def __init__(self, peps: fp.FPEPS):
        self.peps = peps
        self.geom = peps.geom
        self.n_links = peps.geom.n_links

    def evaluate(self, phi):
        """``(log_weight, state or None)``."""
        try:
            st = self.peps.psi_phi(phi)
        except gs.ZeroNormError:
            return -np.inf, None
        return 2.0 * st.log_norm, st

    def log_weight(self, phi) -> float:
        return self.evaluate(phi)[0]


class TabulatedTarget:
    """Z_N angles ``2 pi k / N`` with every configuration precomputed.

    Configuration index = ``sum_l k_l N^(L-1-l)`` (first link most significant).
    """

    discrete = True

    def __init__(self, geom: LatticeGeometry, n: int, log_weights, tables: dict):
        self.geom = geom
        self.n = n
        self.n_links = geom.n_links
        self.log_weights = np.asarray(log_weights, dtype=float)
        self.tables = {k: np.asarray(v, dtype=complex) for k, v in tables.items()}
        self.strides = n ** np.arange(self.n_links - 1, -1, -1, dtype=np.int64)

    @classmethod
    def from_peps(cls, peps: fp.FPEPS, n: int, observables=()) -> "TabulatedTarget":
        geom = peps.geom
        count = n ** geom.n_links
        if count > TABLE_LIMIT:
            raise ValueError(f"{count} configurations exceed the table limit {TABLE_LIMIT}")
        lw = np.empty(count)
        tabs = {o.name: np.empty(count, dtype=complex) for o in observables}
        for i, digits in enumerate(itertools.product(range(n), repeat=geom.n_links)):
            phi = 2 * np.pi * np.array(digits) / n
            try:
                st = peps.psi_phi(phi)
                lw[i] = 2.0 * st.log_norm
            except gs.ZeroNormError:
                st = None
                lw[i] = -np.inf
            for o in observables:
                tabs[o.name][i] = o.value(phi, st)
        return cls(geom, n, lw, tabs)

    def angles(self, digits) -> np.ndarray:
        return 2 * np.pi * np.asarray(digits) / self.n

    def index(self, digits) -> np.ndarray:
        return np.asarray(digits, dtype=np.int64) @ self.strides

    def log_weight(self, digits) -> float:
        return float(self.log_weights[int(self.index(digits))])

    def probabilities(self) -> np.ndarray:
        lw = self.log_weights
        w = np.exp(lw - np.max(lw))
        return w / w.sum()

    def exact(self, name: str) -> complex:
        return complex(np.sum(self.probabilities() * self.tables[name]))


def exact_reference(geom: LatticeGeometry, params: fp.SiteTensorParams, n: int, observable) -> complex:
    """Weighted Z_N sum replacing the Haar integral (the Monte Carlo oracle)."""
    target = TabulatedTarget.from_peps(fp.FPEPS(geom, params), n, [observable])
    return target.exact(observable.name)


# -- error analysis -------------------------------------------------------------
def autocorrelation(x) -> np.ndarray:
    """Normalised autocorrelation function of a real series (FFT)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    x = x - x.mean()
    f = np.fft.rfft(x, 2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:n]
    if acf[0] <= 0:
        return np.r_[1.0, np.zeros(n - 1)]
    return acf / acf[0]


def integrated_autocorrelation_time(x, c: float = 5.0) -> float:
    """Sokal's self-consistent window: smallest ``W >= c tau(W)``."""
    x = np.asarray(x, dtype=float)
    if x.size < 4:
        return 0.5
    rho = autocorrelation(x)
    tau = 0.5
    for w in range(1, x.size):
        tau += rho[w]
        if w >= c * tau:
            break
    return max(float(tau), 0.5)


def blocking_error(series_list, tau_int: float, min_blocks: int = 32) -> tuple:
    """Standard error from block means, doubling the block size up to ``~10 tau``.

    ``series_list`` holds one real series per chain; blocks never straddle chains.
    Returns ``(std_error, block_size)``.
    """
    n_min = min(len(s) for s in series_list)
    target = max(1.0, 10.0 * tau_int)
    b = 1
    while b < target and (n_min // (2 * b)) * len(series_list) >= min_blocks:
        b *= 2
    means = []
    for s in series_list:
        s = np.asarray(s, dtype=float)
        nb = s.size // b
        if nb:
            means.append(s[: nb * b].reshape(nb, b).mean(axis=1))
    means = np.concatenate(means)
    if means.size < 2:
        return float("nan"), b
    return float(means.std(ddof=1) / np.sqrt(means.size)), b


def estimate(series_list) -> EstimateWithError:
    """Mean and error of a (complex) observable from one or more chains."""
    series_list = [np.asarray(s, dtype=complex) for s in series_list]
    total = sum(s.size for s in series_list)
    if total == 0:
        raise ValueError("no samples")
    mean = complex(np.mean(np.concatenate(series_list)))
    errs, taus = [], []
    for part in (np.real, np.imag):
        parts = [part(s) for s in series_list]
        if all(np.ptp(p) == 0 for p in parts):
            errs.append(0.0)
            taus.append(0.5)
            continue
        tau = float(np.mean([integrated_autocorrelation_time(p) for p in parts]))
        err, _ = blocking_error(parts, tau)
        errs.append(err)
        taus.append(tau)
    tau = max(taus)
    return EstimateWithError(mean, float(math.hypot(*errs)), tau, float(min(total, total / (2 * tau))),
                             errs[0], errs[1])


# -- Metropolis ---------------------------------------------------------------
@dataclass
class ChainState:
    config: np.ndarray
    log_weight: float
    state: object = None
    delta: float = 0.5


def metropolis_sweep(target: ContinuousTarget, chain: ChainState, rng) -> tuple:
    """One proposed ``U(-delta, delta)`` angle update per link. Returns (chain, accepted)."""
    accepted = 0
    for li in range(target.n_links):
        prop = chain.config.copy()
        prop[li] = (prop[li] + rng.uniform(-chain.delta, chain.delta)) % (2 * np.pi)
        lw, st = target.evaluate(prop)
        if lw > -np.inf and np.log(rng.random()) < lw - chain.log_weight:
            chain.config, chain.log_weight, chain.state = prop, lw, st
            accepted += 1
    return chain, accepted / target.n_links


@dataclass
class RunResult:
    """Post-burn-in samples per chain: ``samples[name][chain]`` arrays."""
    observables: tuple
    samples: dict
    log_weights: list
    acceptance: list
    deltas: list
    config: ChainConfig
    extra: dict = field(default_factory=dict)

    def estimate(self, name: str) -> EstimateWithError:
        return estimate(self.samples[name])

    def per_chain(self, name: str) -> list:
        return [estimate([s]) for s in self.samples[name]]

    def write_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["chain", "sweep", "log_weight", "acceptance"])
            for c, (lw, acc) in enumerate(zip(self.log_weights, self.acceptance)):
                for s, (a, b) in enumerate(zip(lw, acc)):
                    w.writerow([c, s, f"{a:.15g}", f"{b:.15g}"])

    def estimates_dict(self) -> list:
        return [self.estimate(o.name).to_dict(o.name) for o in self.observables]

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps({"config": asdict(self.config), "estimates": self.estimates_dict(),
                                          **self.extra}, indent=2))


def _tune(delta: float, rate: float) -> float:
    if 0.4 <= rate <= 0.6:
        return delta
    return float(min(math.pi, max(1e-3, delta * math.exp(rate - 0.5))))


def _run_continuous_chain(target: ContinuousTarget, observables, cfg: ChainConfig, rng):
    phi = np.zeros(target.n_links)
    lw, st = target.evaluate(phi)
    tries = 0
    while lw == -np.inf:
        tries += 1
        if tries > 1000:
            raise RuntimeError("no configuration with nonzero weight found")
        phi = rng.uniform(0, 2 * np.pi, target.n_links)
        lw, st = target.evaluate(phi)
    chain = ChainState(phi, lw, st, cfg.delta)
    window = []
    samples, lws, accs = [], [], []
    for sweep in range(cfg.burn_in + cfg.n_sweeps):
        chain, acc = metropolis_sweep(target, chain, rng)
        if sweep < cfg.burn_in:
            window.append(acc)
            if cfg.tune and len(window) == 20:
                chain.delta = _tune(chain.delta, float(np.mean(window)))
                window = []
            continue
        lws.append(chain.log_weight)
        accs.append(acc)
        if (sweep - cfg.burn_in) % cfg.thinning == 0:
            samples.append(_evaluate(observables, chain.config, chain.state))
    return np.array(samples).reshape(-1, len(observables)), np.array(lws), np.array(accs), chain.delta


def _run_tabulated(target: TabulatedTarget, observables, cfg: ChainConfig):
    """All chains advance together; each draws from its own generator."""
    n, L, C = target.n, target.n_links, cfg.n_chains
    rngs = cfg.streams()
    lwt = target.log_weights
    finite = np.flatnonzero(np.isfinite(lwt))
    if finite.size == 0:
        raise RuntimeError("every configuration has zero weight")
    start = int(finite[np.argmax(lwt[finite])])
    digits = np.tile(np.array([(start // s) % n for s in target.strides], dtype=np.int64), (C, 1))
    idx = np.full(C, start, dtype=np.int64)
    names = [o.name for o in observables]
    tables = np.stack([target.tables[nm] for nm in names]) if names else np.zeros((0, lwt.size))
    n_keep = (cfg.n_sweeps + cfg.thinning - 1) // cfg.thinning
    out = np.empty((C, n_keep, len(names)), dtype=complex)
    lws = np.empty((C, cfg.n_sweeps))
    accs = np.empty((C, cfg.n_sweeps))
    buf_shift = buf_u = None
    pos = RNG_BLOCK
    kept = 0
    rows = np.arange(C)
    for sweep in range(cfg.burn_in + cfg.n_sweeps):
        if pos == RNG_BLOCK:
            buf_shift = np.stack([r.integers(1, n, size=(RNG_BLOCK, L)) for r in rngs], axis=1)
            buf_u = np.log(np.stack([r.random(size=(RNG_BLOCK, L)) for r in rngs], axis=1))
            pos = 0
        shifts, logu = buf_shift[pos], buf_u[pos]
        pos += 1
        acc = np.zeros(C)
        for li in range(L):
            new = (digits[:, li] + shifts[:, li]) % n
            nidx = idx + (new - digits[:, li]) * target.strides[li]
            ok = logu[:, li] < lwt[nidx] - lwt[idx]
            digits[ok, li] = new[ok]
            idx = np.where(ok, nidx, idx)
            acc += ok
        s = sweep - cfg.burn_in
        if s < 0:
            continue
        lws[:, s] = lwt[idx]
        accs[:, s] = acc / L
        if s % cfg.thinning == 0:
            out[rows, kept] = tables[:, idx].T
            kept += 1
    return out, lws, accs


def run_chains(target, observables, cfg: ChainConfig, threads: int = 1) -> RunResult:
    """Run ``cfg.n_chains`` chains and collect post-burn-in samples."""
    observables = tuple(observables)
    if len({o.name for o in observables}) != len(observables):
        raise ValueError("observable names must be unique")
    if target.discrete:
        missing = [o.name for o in observables if o.name not in target.tables]
        if missing:
            raise ValueError(f"observables {missing} were not tabulated")
        out, lws, accs = _run_tabulated(target, observables, cfg)
        samples = {o.name: [out[c, :, k] for c in range(cfg.n_chains)] for k, o in enumerate(observables)}
        return RunResult(observables, samples, list(lws), list(accs), [float("nan")] * cfg.n_chains, cfg)
    rngs = cfg.streams()

    def one(c):
        return _run_continuous_chain(target, observables, cfg, rngs[c])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(one, range(cfg.n_chains)))
    else:
        results = [one(c) for c in range(cfg.n_chains)]
    samples = {o.name: [r[0][:, k] for r in results] for k, o in enumerate(observables)}
    return RunResult(observables, samples, [r[1] for r in results], [r[2] for r in results],
                     [r[3] for r in results], cfg)


def wilson_loop(result: RunResult, name: str = "wilson") -> EstimateWithError:
    return result.estimate(name)


def meson_string(result: RunResult, name: str = "meson") -> EstimateWithError:
    return result.estimate(name)

"""Experiment configuration: TOML text to validated dataclasses."""
from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields, replace

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .exact import HamiltonianParams
from .fpeps import SiteTensorParams
from .lattice import Boundary, LatticeGeometry
from .sampler import ChainConfig

EXPERIMENTS = ("exact-check", "trotter", "dualize", "fpeps-verify", "mc", "transfer-scan")


class ConfigError(ValueError):
    """Malformed or invalid configuration; the message names the offending field."""


@dataclass(frozen=True)
class GeometryConfig:
    width: int = 2
    height: int = 2
    boundary: str = "torus"

    def build(self) -> LatticeGeometry:
        return LatticeGeometry(self.width, self.height, self.boundary)


@dataclass(frozen=True)
class ObservableConfig:
    """Wilson loops as rectangles, meson strings as move lists from ``x``."""
    wilson: tuple = ((0, 0, 1, 1),)
    meson: tuple = (((0, 0), ((1, 1),)),)
    link_phase: tuple = ()


@dataclass(frozen=True)
class TrotterConfig:
    time: float = 1.0
    steps: tuple = (8, 16, 32, 64)
    include_electric: bool = False


@dataclass(frozen=True)
class ScanConfig:
    t: tuple = (0.0, 0.5, 1.0)
    n_y: int = 2


@dataclass(frozen=True)
class DualizeConfig:
    chain_sites: int = 4
    chain_n: int = 4
    higgs_width: int = 2
    higgs_height: int = 2
    higgs_boundary: str = "torus"
    higgs_n: int = 3


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "fpeps-verify"
    seed: int = 0
    n: int = 3
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    hamiltonian: HamiltonianParams = field(default_factory=lambda: HamiltonianParams(0.7, 1.1, 1.3))
    peps: SiteTensorParams = field(default_factory=lambda: SiteTensorParams(t=0.8, y=0.3 + 0.4j, z=-0.5 + 0.2j))
    chain: ChainConfig = field(default_factory=lambda: ChainConfig(n_chains=4, n_sweeps=2000, burn_in=200))
    sampler_mode: str = "tabulated"
    observables: ObservableConfig = field(default_factory=ObservableConfig)
    trotter: TrotterConfig = field(default_factory=TrotterConfig)
    scan: ScanConfig = field(default_factory=ScanConfig)
    dualize: DualizeConfig = field(default_factory=DualizeConfig)


def _take(section: dict, name: str, allowed: set) -> dict:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"[{name}] unknown field(s): {', '.join(sorted(unknown))}")
    return section


def _typed(section_name, key, value, kind):
    ok = {
        int: isinstance(value, int) and not isinstance(value, bool),
        float: isinstance(value, (int, float)) and not isinstance(value, bool),
        bool: isinstance(value, bool),
        str: isinstance(value, str),
        list: isinstance(value, list),
    }[kind]
    if not ok:
        raise ConfigError(f"[{section_name}] {key}: expected {kind.__name__}, got {type(value).__name__} {value!r}")
    return float(value) if kind is float else value


def _section(raw: dict, name: str, spec: dict) -> dict:
    sec = raw.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    _take(sec, name, set(spec))
    return {k: _typed(name, k, v, spec[k]) for k, v in sec.items()}


def parse_config(text: str, kind: str | None = None) -> ExperimentConfig:
    """Parse TOML ``text``; ``kind`` (the subcommand) overrides ``experiment``."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML parse error: {exc}") from None
    _take(raw, "top level", {"experiment", "seed", "n", "geometry", "hamiltonian", "peps", "chain",
                             "observables", "trotter", "scan", "dualize"})
    cfg = ExperimentConfig()
    exp = kind or raw.get("experiment", cfg.kind)
    if exp not in EXPERIMENTS:
        raise ConfigError(f"experiment: unknown kind {exp!r}; expected one of {', '.join(EXPERIMENTS)}")
    if kind and "experiment" in raw and raw["experiment"] != kind:
        raise ConfigError(f"experiment: config says {raw['experiment']!r} but subcommand is {kind!r}")
    top = {k: raw[k] for k in ("seed", "n") if k in raw}
    seed = _typed("top level", "seed", top.get("seed", cfg.seed), int)
    n = _typed("top level", "n", top.get("n", cfg.n), int)
    if n < 2:
        raise ConfigError("n: Z_N modulus must be >= 2")

    try:
        geo = _section(raw, "geometry", {"width": int, "height": int, "boundary": str})
        geometry = replace(cfg.geometry, **geo)
        if geometry.boundary not in [b.value for b in Boundary]:
            raise ConfigError(f"[geometry] boundary: unknown value {geometry.boundary!r}")
        geometry.build()

        ham = _section(raw, "hamiltonian", {"M": float, "eps": float, "g": float})
        hp = cfg.hamiltonian
        hamiltonian = HamiltonianParams(ham.get("M", hp.M), ham.get("eps", hp.eps), ham.get("g", hp.g))

        pe = _section(raw, "peps", {"t": float, "y_re": float, "y_im": float, "z_re": float, "z_im": float,
                                    "eta_p_index": int})
        peps = SiteTensorParams.from_dict({**cfg.peps.to_dict(), **pe})

        ch = _section(raw, "chain", {"n_chains": int, "n_sweeps": int, "burn_in": int, "delta": float,
                                     "thinning": int, "tune": bool, "mode": str})
        mode = ch.pop("mode", cfg.sampler_mode)
        if mode not in ("tabulated", "continuous"):
            raise ConfigError(f"[chain] mode: expected 'tabulated' or 'continuous', got {mode!r}")
        chain = replace(cfg.chain, seed=seed, **ch)

        ob = _section(raw, "observables", {"wilson": list, "meson": list, "link_phase": list})
        observables = _observables(ob, cfg.observables)

        tr = _section(raw, "trotter", {"time": float, "steps": list, "include_electric": bool})
        if "steps" in tr:
            tr["steps"] = tuple(_typed("trotter", "steps", s, int) for s in tr["steps"])
            if not tr["steps"] or min(tr["steps"]) < 1:
                raise ConfigError("[trotter] steps: need positive step counts")
        trotter = replace(cfg.trotter, **tr)

        sc = _section(raw, "scan", {"t": list, "n_y": int})
        if "t" in sc:
            sc["t"] = tuple(_typed("scan", "t", v, float) for v in sc["t"])
            if not sc["t"]:
                raise ConfigError("[scan] t: grid must not be empty")
        scan = replace(cfg.scan, **sc)

        du = _section(raw, "dualize", {f.name: f.type if not isinstance(f.type, str) else
                                       {"int": int, "str": str}[f.type] for f in fields(DualizeConfig)})
        dualize = replace(cfg.dualize, **du)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    return ExperimentConfig(exp, seed, n, geometry, hamiltonian, peps, chain, mode, observables, trotter, scan,
                            dualize)


def _observables(sec: dict, default: ObservableConfig) -> ObservableConfig:
    wilson, meson, links = default.wilson, default.meson, default.link_phase
    if "wilson" in sec:
        wilson = []
        for i, w in enumerate(sec["wilson"]):
            if not isinstance(w, dict) or set(w) - {"corner", "w", "h"}:
                raise ConfigError(f"[observables] wilson[{i}]: expected {{corner=[x,y], w=.., h=..}}")
            c = w.get("corner", [0, 0])
            wilson.append((int(c[0]), int(c[1]), int(w.get("w", 1)), int(w.get("h", 1))))
        wilson = tuple(wilson)
    if "meson" in sec:
        meson = []
        for i, m in enumerate(sec["meson"]):
            if not isinstance(m, dict) or "x" not in m or set(m) - {"x", "moves"}:
                raise ConfigError(f"[observables] meson[{i}]: expected {{x=[x,y], moves=[[dir, +-1], ...]}}")
            moves = tuple((int(d), int(o)) for d, o in m.get("moves", []))
            meson.append(((int(m["x"][0]), int(m["x"][1])), moves))
        meson = tuple(meson)
    if "link_phase" in sec:
        links = tuple(_typed("observables", "link_phase", v, int) for v in sec["link_phase"])
    return ObservableConfig(wilson, meson, links)


def load_config(path, kind: str | None = None) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, kind)

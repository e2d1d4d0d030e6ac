"""Gauged Gaussian fermionic PEPS and the bosonic Kronecker-delta toy PEPS.

Every vertex carries nine fermionic modes, ordered as ``SITE_MODES``: the
physical ``psi`` followed by the virtual pairs on the right, up, left and down
legs. The virtual field on leg ``z`` is ``E0(z, x) = (-1)^x (n_{z+} - n_{z-})``
and the virtual Gauss generator is

    G0 = E0(r) + E0(u) - E0(l) - E0(d) - n_psi.

Modes whose number enters ``G0`` with a minus sign are the "a" modes, the
others the "b" modes; the site operator is ``exp(T_ij a_i^dag b_j^dag)``.

Gauging rotates the right (up) leg pair of a link's origin by
``exp(i phi (n_{r+} - n_{r-}))``. Bonds are contracted with the normalised
pair states ``exp(l+^dag r+^dag + l-^dag r-^dag)|0>`` (horizontal) and
``exp(u+^dag d+^dag + u-^dag d-^dag)|0>`` (vertical), which make the unstaggered
leg number ``n_{z+} - n_{z-}`` continuous across a link. That continuity is
what the bond symmetry ``W_l W_r omega W_r W_l = omega`` requires, and
it turns ``G0 = 0`` into ``div F = (-1)^x n_psi`` for the link field ``F``, so
``|psi(Phi)>`` obeys the staggered Gauss law and the global charge is
``sum_x (-1)^x n_psi``. Legs on an
open edge are projected onto the vacuum.
"""
from __future__ import annotations

import cmath
import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import fock
from . import gaussian as gs
from .exact import Factor, TensorSpace, fold
from .lattice import LatticeGeometry, LinkId

SITE_MODES = ("psi", "r+", "r-", "u+", "u-", "l+", "l-", "d+", "d-")
_POS = {m: i for i, m in enumerate(SITE_MODES)}

A_EVEN = ("psi", "r-", "u-", "l+", "d+")
B_EVEN = ("r+", "u+", "l-", "d-")
A_ODD = ("psi", "r+", "u+", "l-", "d-")
B_ODD = ("r-", "u-", "l+", "d+")

ETA_ROOTS = tuple(cmath.exp(1j * np.pi * (2 * k + 1) / 4) for k in range(4))


@dataclass(frozen=True)
class SiteTensorParams:
    t: float = 1.0
    y: complex = 0.0
    z: complex = 0.0
    eta_index: int = 0

    def __post_init__(self):
        if not np.isfinite(self.t) or self.t < 0:
            raise ValueError(f"t must be a finite non-negative number, got {self.t!r}")
        for name in ("y", "z"):
            if not np.isfinite(complex(getattr(self, name))):
                raise ValueError(f"{name} must be finite")
        if self.eta_index not in range(4):
            raise ValueError("eta_index selects one of the four roots of eta^4 = -1 (0..3)")

    @property
    def eta_p(self) -> complex:
        return ETA_ROOTS[self.eta_index]

    def to_dict(self) -> dict:
        y, z = complex(self.y), complex(self.z)
        return {"t": float(self.t), "y_re": y.real, "y_im": y.imag,
                "z_re": z.real, "z_im": z.imag, "eta_p_index": int(self.eta_index)}

    @classmethod
    def from_dict(cls, d: dict) -> "SiteTensorParams":
        known = {"t", "y_re", "y_im", "z_re", "z_im", "eta_p_index"}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown site parameter(s): {sorted(extra)}")
        return cls(t=float(d.get("t", 1.0)),
                   y=complex(d.get("y_re", 0.0), d.get("y_im", 0.0)),
                   z=complex(d.get("z_re", 0.0), d.get("z_im", 0.0)),
                   eta_index=int(d.get("eta_p_index", 0)))


def build_T(params: SiteTensorParams) -> np.ndarray:
    """The 5x4 pairing matrix: physical row and antisymmetric virtual block."""
    t, y, z, eta = params.t, complex(params.y), complex(params.z), params.eta_p
    if abs(eta ** 4 + 1) > 1e-12:
        raise ValueError("eta_p must satisfy eta_p^4 = -1")
    s = z / np.sqrt(2.0)
    T = np.zeros((5, 4), dtype=complex)
    T[0] = [t, eta ** 2 * t, eta * t, eta ** 3 * t]
    # the (4, 2) sign follows from tau^T = -tau
    T[1:] = [[0, y, s, s],
             [-y, 0, -s, s],
             [-s, s, 0, y],
             [-s, -s, -y, 0]]
    return T


def mode_split(parity: int) -> tuple:
    return (A_EVEN, B_EVEN) if parity == 1 else (A_ODD, B_ODD)


def site_pairing_matrix(parity: int, T: np.ndarray) -> np.ndarray:
    """Antisymmetric ``K`` over ``SITE_MODES`` with ``1/2 f K f = sum T a b``."""
    a, b = mode_split(parity)
    K = np.zeros((9, 9), dtype=complex)
    for i, ma in enumerate(a):
        for j, mb in enumerate(b):
            K[_POS[ma], _POS[mb]] += T[i, j]
            K[_POS[mb], _POS[ma]] -= T[i, j]
    return K


def site_state(x, parity: int, params: SiteTensorParams | None = None, T=None) -> gs.CovarianceState:
    """Gaussian state ``A(x)|0>`` on the nine modes of vertex ``x``."""
    if T is None:
        T = build_T(params)
    labels = tuple((tuple(x), m) for m in SITE_MODES)
    return gs.from_antisymmetric(site_pairing_matrix(parity, T), labels)


def virtual_charges(parity: int) -> dict:
    """Charge of each mode under ``G0``: -1 for a modes, +1 for b modes."""
    a, b = mode_split(parity)
    return {**{m: -1 for m in a}, **{m: +1 for m in b}}


@dataclass(frozen=True)
class GaussReport:
    lambdas: tuple
    max_deviation: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tol


def verify_virtual_gauss(parity: int, params: SiteTensorParams | None = None, lambdas=None,
                         T=None, K=None, tol: float = 1e-10) -> GaussReport:
    """Check ``exp(i L G0) A exp(-i L G0) = A`` by rotating the site covariance.

    ``K`` overrides the pairing matrix (negative controls).
    """
    if lambdas is None:
        lambdas = np.linspace(0, 2 * np.pi, 13)
    if K is None:
        K = site_pairing_matrix(parity, build_T(params) if T is None else T)
    state = gs.from_antisymmetric(K)
    charges = virtual_charges(parity)
    worst = 0.0
    for lam in lambdas:
        # a mode of charge q picks up exp(i lam q) per particle
        rot = gs.rotate_modes(state, {_POS[m]: lam * q for m, q in charges.items()})
        worst = max(worst, float(np.max(np.abs(rot.gamma - state.gamma))))
    return GaussReport(tuple(float(l) for l in lambdas), worst, tol)


# -- lattice assembly -------------------------------------------------------
def link_modes(geom: LatticeGeometry, link) -> tuple:
    """``(origin leg +, origin leg -)`` labels rotated by the link's gauge angle."""
    x = tuple(link[0])
    leg = "r" if link[1] == 1 else "u"
    return (x, leg + "+"), (x, leg + "-")


def bond_modes(geom: LatticeGeometry, link) -> list:
    """Mode labels of the bond on ``link`` in creation order (pairs 0-1, 2-3)."""
    x = tuple(link[0])
    y = geom.link_end(link)
    if link[1] == 1:
        return [(y, "l+"), (x, "r+"), (y, "l-"), (x, "r-")]
    return [(x, "u+"), (y, "d+"), (x, "u-"), (y, "d-")]


@lru_cache(maxsize=None)
def _bond_K() -> np.ndarray:
    return fock.antisymmetric_from_pairs(4, [(0, 1, 1.0), (2, 3, 1.0)])


def bond_state() -> gs.CovarianceState:
    """Normalised bond pair state: projecting it onto itself gives 1."""
    s = gs.from_antisymmetric(_bond_K())
    return s.with_log_norm(0.0)


def dangling_modes(geom: LatticeGeometry) -> list:
    out = []
    for x in geom.vertices():
        if not geom.has_link(x, 1):
            out += [(x, "r+"), (x, "r-")]
        if not geom.has_link(x, 2):
            out += [(x, "u+"), (x, "u-")]
        if geom.shift(x, 1, -1) is None or not geom.has_link(geom.shift(x, 1, -1), 1):
            out += [(x, "l+"), (x, "l-")]
        if geom.shift(x, 2, -1) is None or not geom.has_link(geom.shift(x, 2, -1), 2):
            out += [(x, "d+"), (x, "d-")]
    return out


def check_configuration(geom: LatticeGeometry, phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (geom.n_links,):
        raise ValueError(f"gauge configuration needs {geom.n_links} link angles, got shape {phi.shape}")
    if not np.all(np.isfinite(phi)):
        raise ValueError("gauge configuration has non-finite angles")
    return phi


def rotation_angles(geom: LatticeGeometry, phi, corrupt_field: bool = False) -> dict:
    """Mode rotations implementing the gauging transformation for ``phi``.

    ``corrupt_field`` rotates both legs by ``+phi`` (a field with charge up to 2),
    used only as a negative control.
    """
    out = {}
    for i, link in enumerate(geom.links):
        plus, minus = link_modes(geom, link)
        a = phi[i]
        out[plus] = a
        out[minus] = a if corrupt_field else -a
    return out


class FPEPS:
    """Gauged fPEPS on a lattice; evaluates ``|psi(Phi)>`` for gauge configurations."""

    def __init__(self, geom: LatticeGeometry, params: SiteTensorParams | None = None, T=None,
                 corrupt_field: bool = False):
        self.geom = geom
        self.params = params
        self.T = build_T(params) if T is None else np.asarray(T, dtype=complex)
        self.corrupt_field = corrupt_field
        sites = [site_state(x, geom.parity(x), T=self.T) for x in geom.vertices()]
        self.base = gs.direct_sum(*sites)
        modes, bonds = [], []
        for link in geom.links:
            modes += bond_modes(geom, link)
            bonds.append(bond_state())
        dang = dangling_modes(geom)
        modes += dang
        if dang:
            bonds.append(gs.vacuum(len(dang)))
        self.projected = modes
        self.bond = gs.direct_sum(*bonds)
        self.physical = [(x, "psi") for x in geom.vertices()]

    def psi_phi(self, phi) -> gs.CovarianceState:
        """``|psi(Phi)>`` on the physical modes; raises ZeroNormError at p(Phi) = 0."""
        phi = check_configuration(self.geom, phi)
        state = gs.rotate_modes(self.base, rotation_angles(self.geom, phi, self.corrupt_field))
        return gs.project(state, self.projected, self.bond)

    def log_weight(self, phi) -> float:
        """``log <psi(Phi)|psi(Phi)>``, ``-inf`` for orthogonal contractions."""
        try:
            return 2.0 * self.psi_phi(phi).log_norm
        except gs.ZeroNormError:
            return -np.inf


def assemble_psi_phi(geom: LatticeGeometry, params: SiteTensorParams, phi) -> gs.CovarianceState:
    return FPEPS(geom, params).psi_phi(phi)


def physical_operator(geom: LatticeGeometry, x, dagger: bool) -> tuple:
    """Ladder operator of the physical fermion at ``x`` in terms of the ``psi`` mode.

    The PEPS obeys the staggered Gauss law ``div F = (-1)^x n_psi``, so on odd
    sites ``psi`` creates a hole: the physical creator there is ``psi``.
    """
    x = geom.check_vertex(x)
    return ((x, "psi"), dagger if geom.parity(x) == 1 else not dagger)


def meson_value(state: gs.CovarianceState, geom: LatticeGeometry, x, y, phase: float = 0.0) -> complex:
    """``e^{i phase} <psi^dag(x) psi(y)>`` in the normalised state ``|psi(Phi)>``."""
    return complex(np.exp(1j * phase) * gs.two_point(state, physical_operator(geom, x, True),
                                                     physical_operator(geom, y, False)))


def gauge_shift(geom: LatticeGeometry, phi, x, lam: float) -> np.ndarray:
    """Gauge transform at ``x``: outgoing star links gain ``+lam``, ingoing ``-lam``."""
    out = np.array(phi, dtype=float, copy=True)
    for link, sign in geom.star_links(x):
        out[geom.link_index(link)] += sign * lam
    return out


def translate_configuration(geom: LatticeGeometry, phi, direction: int, amount: int = 1,
                            flip: bool = False) -> np.ndarray:
    """``phi'(x, i) = (+-) phi(x + amount e_direction, i)`` on a periodic lattice."""
    out = np.empty(geom.n_links)
    for i, link in enumerate(geom.links):
        y = geom.shift(link.origin, direction, amount)
        if y is None:
            raise ValueError("translation leaves the lattice; use periodic boundaries")
        v = phi[geom.link_index((y, link.direction))]
        out[i] = -v if flip else v
    return out


# -- dense Fock oracle -------------------------------------------------------
def fock_psi_phi(geom: LatticeGeometry, T, phi, corrupt_field: bool = False,
                 max_modes: int = 20) -> np.ndarray:
    """Phase-exact ``|psi(Phi)>`` over the physical modes by dense enumeration.

    Sites are added in row-major order; every bond is projected as soon as both
    of its ends are present and open-edge legs as soon as their site appears.
    """
    phi = check_configuration(geom, phi)
    T = np.asarray(T, dtype=complex)
    rot = rotation_angles(geom, phi, corrupt_field)
    dang = set(dangling_modes(geom))
    bond_vec = fock.pairing_state(_bond_K())
    bond_vec = bond_vec / np.linalg.norm(bond_vec)
    vec = np.ones(1, dtype=complex)
    labels: list = []
    pending = list(geom.links)
    for x in geom.vertices():
        site = fock.pairing_state(site_pairing_matrix(geom.parity(x), T))
        for m in SITE_MODES:
            angle = rot.get((x, m), 0.0)
            if angle:
                site = fock.number_phase(site, 9, _POS[m], angle)
        vec = np.kron(vec, site)
        labels += [(x, m) for m in SITE_MODES]
        if len(labels) > max_modes:
            raise MemoryError(f"oracle would hold {len(labels)} modes (limit {max_modes})")
        vac = [l for l in labels if l in dang]
        if vac:
            vec = fock.project_modes(vec, len(labels), [labels.index(l) for l in vac], fock.vacuum(len(vac)))
            labels = [l for l in labels if l not in vac]
        done = [l for l in pending if all(m in labels for m in bond_modes(geom, l))]
        for link in done:
            modes = bond_modes(geom, link)
            vec = fock.project_modes(vec, len(labels), [labels.index(m) for m in modes], bond_vec)
            labels = [l for l in labels if l not in modes]
            pending.remove(link)
    if pending:
        raise RuntimeError("unprojected bonds remain")
    return vec


def measured_field_support(geom: LatticeGeometry, params: SiteTensorParams | None = None, n: int = 5,
                           links=None, backgrounds: int = 1, rng=None, T=None,
                           corrupt_field: bool = False, tol: float = 1e-9) -> set:
    """Electric-field values present on the gauged state, from Z_n Fourier analysis.

    For each link the phase-exact amplitude is sampled at ``phi_l = 2 pi k / n``
    (other angles fixed to a background); the Fourier weights over ``k`` give
    the amplitude of each field eigenvalue ``e`` in the window of Z_n.
    """
    T = build_T(params) if T is None else np.asarray(T, dtype=complex)
    rng = np.random.default_rng(0) if rng is None else rng
    links = range(geom.n_links) if links is None else links
    support = set()
    angles = 2 * np.pi * np.arange(n) / n
    for _ in range(backgrounds):
        bg = 2 * np.pi * rng.integers(0, n, size=geom.n_links) / n
        for li in links:
            amps = []
            for a in angles:
                phi = bg.copy()
                phi[li] = a
                amps.append(fock_psi_phi(geom, T, phi, corrupt_field))
            amps = np.array(amps)
            coeffs = np.exp(-1j * np.outer(np.arange(n), angles)) @ amps / n
            weights = np.linalg.norm(coeffs, axis=1)
            scale = max(weights.max(), 1e-300)
            for e in range(n):
                if weights[e] > tol * scale:
                    support.add(int(fold(e, n)))
    return support


# -- bosonic toy PEPS ---------------------------------------------------------
@dataclass
class ToyPeps:
    """Dense ``|psi_0>`` (charges only) and gauged ``|psi>`` (charges and links)."""
    geom: LatticeGeometry
    j: int
    J: int
    matter_space: TensorSpace
    space: TensorSpace
    psi0: np.ndarray
    psi: np.ndarray
    n: int = field(default=0)

    def charge_diag(self, x, gauged=True) -> np.ndarray:
        sp_ = self.space if gauged else self.matter_space
        return sp_.diag_of(("Q", tuple(x)), np.arange(-self.J, self.J + 1).astype(float))

    def field_diag(self, link) -> np.ndarray:
        return self.space.diag_of(("link", LinkId(*link)), fold(np.arange(self.n), self.n).astype(float))

    def gauss_diag(self, x) -> np.ndarray:
        """Integer ``G(x) - Q(x)`` (the field window holds ``-j..j`` exactly)."""
        g = -self.charge_diag(x)
        for link, sign in self.geom.star_links(x):
            g = g + sign * self.field_diag(link)
        return g

    def total_charge_diag(self) -> np.ndarray:
        return sum(self.charge_diag(x, gauged=False) for x in self.geom.vertices())


def toy_bosonic_peps(geom: LatticeGeometry, j: int = 1, J: int | None = None, rng=None,
                     weights: str = "uniform") -> ToyPeps:
    """Kronecker-delta PEPS ``A^p_{ruld} ~ delta(r + u, l + d + p)``.

    Virtual legs take values ``-j..j``; the physical charge ``p`` is kept when
    ``|p| <= J``. Gauging copies the right/up virtual value onto a Z_{2j+1}
    link clock; bonds identify ``r(x) = l(x + e1)`` and ``u(x) = d(x + e2)`` by
    summing over the bond basis. ``weights="random"`` multiplies the delta by
    random complex entries (same symmetry, less structure).
    """
    if j < 0:
        raise ValueError("virtual truncation j must be >= 0")
    J = 4 * j if J is None else J
    if J < 0:
        raise ValueError("physical cutoff J must be >= 0")
    n = 2 * j + 1
    vals = np.arange(-j, j + 1)
    nv = vals.size
    rng = np.random.default_rng(0) if rng is None else rng
    tensors = {}
    for x in geom.vertices():
        A = np.zeros((2 * J + 1, nv, nv, nv, nv), dtype=complex)
        for (ir, r), (iu, u), (il, l), (id_, d) in itertools.product(enumerate(vals), repeat=4):
            p = r + u - l - d
            if abs(p) <= J:
                w = 1.0 if weights == "uniform" else rng.normal() + 1j * rng.normal()
                A[p + J, ir, iu, il, id_] = w
        nrm = np.linalg.norm(A)
        tensors[x] = A / nrm if nrm > 0 else A
    verts = list(geom.vertices())
    matter = TensorSpace([Factor(("Q", v), 2 * J + 1) for v in verts])
    space = TensorSpace([Factor(("Q", v), 2 * J + 1) for v in verts]
                        + [Factor(("link", l), n) for l in geom.links])
    psi0 = np.zeros(matter.dim, dtype=complex)
    psi = np.zeros(space.dim, dtype=complex)
    n_links = geom.n_links
    # step 4: each bond state sums over one shared virtual value per link
    configs = np.array(list(itertools.product(range(nv), repeat=n_links)), dtype=np.int64).reshape(-1, n_links)
    amp = np.ones(len(configs), dtype=complex)
    pdig = np.zeros((len(configs), len(verts)), dtype=np.int64)

    def leg(x, d, incoming):
        if incoming:
            y = geom.shift(x, d, -1)
            if y is None or not geom.has_link(y, d):
                return None
            return geom.link_index((y, d))
        if not geom.has_link(x, d):
            return None
        return geom.link_index((x, d))

    zero = j  # index of virtual value 0; open-edge legs are fixed to it
    for k, x in enumerate(verts):
        idx = []
        for d, incoming in ((1, False), (2, False), (1, True), (2, True)):
            li = leg(x, d, incoming)
            idx.append(configs[:, li] if li is not None else np.full(len(configs), zero))
        ir, iu, il, id_ = idx
        p = vals[ir] + vals[iu] - vals[il] - vals[id_]
        ok = np.abs(p) <= J
        pidx = np.clip(p + J, 0, 2 * J)
        amp = amp * np.where(ok, tensors[x][pidx, ir, iu, il, id_], 0.0)
        pdig[:, k] = pidx
    mstrides = matter.strides
    np.add.at(psi0, pdig @ mstrides, amp)
    # steps 2-3: the link clock copies the origin's outgoing virtual value
    ldig = fold(vals[configs], n) % n
    full = np.concatenate([pdig, ldig], axis=1)
    np.add.at(psi, full @ space.strides, amp)
    return ToyPeps(geom, j, J, matter, space, psi0, psi, n)

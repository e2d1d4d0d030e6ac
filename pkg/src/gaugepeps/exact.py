"""Dense/sparse state-vector engine for tiny lattice gauge systems.

The Hilbert space is a tensor product of local factors. Fermionic factors
(dimension 2) get Jordan-Wigner strings in the order they are listed; all
other factors are bosonic. The basis index is row-major over factors, so
factor 0 is the most significant digit.

A :class:`GaugedSystem` lists one fermion per vertex (row-major) followed by
one Z_N clock per link (in ``LatticeGeometry.links`` order). On a link the
electric basis ``|j>``, ``j = 0..N-1``, carries the field value ``fold(j)``
in the window ``-floor(N/2) .. ceil(N/2) - 1`` and ``U|j> = |j+1 mod N>``.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from .lattice import LatticeGeometry, LinkId

DEFAULT_DIM_CAP = 2 ** 24


class DimensionCapError(MemoryError):
    """Requested Hilbert space exceeds the configured dimension cap."""


def dim_cap() -> int:
    raw = os.environ.get("GAUGEPEPS_DIM_CAP")
    if raw is None:
        return DEFAULT_DIM_CAP
    try:
        cap = int(raw)
    except ValueError:
        raise ValueError(f"GAUGEPEPS_DIM_CAP must be an integer, got {raw!r}") from None
    if cap < 1:
        raise ValueError("GAUGEPEPS_DIM_CAP must be positive")
    return cap


def fold(values, n: int):
    """Map integers to the symmetric Z_N window ``-floor(N/2) .. ceil(N/2)-1``."""
    h = n // 2
    return (np.asarray(values) + h) % n - h


@dataclass(frozen=True)
class ZnLinkSpace:
    n: int = 3

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"Z_N modulus must be an integer >= 2, got {self.n!r}")

    @property
    def window(self) -> np.ndarray:
        return fold(np.arange(self.n), self.n)

    def U(self) -> sp.csr_matrix:
        n = self.n
        return sp.csr_matrix((np.ones(n), ((np.arange(n) + 1) % n, np.arange(n))), shape=(n, n))

    def E(self) -> sp.csr_matrix:
        return sp.diags(self.window.astype(float)).tocsr()

    def shift(self, k: int) -> sp.csr_matrix:
        n = self.n
        return sp.csr_matrix((np.ones(n), ((np.arange(n) + k) % n, np.arange(n))), shape=(n, n))


@dataclass(frozen=True)
class HamiltonianParams:
    M: float = 1.0
    eps: float = 1.0
    g: float = 1.0

    def __post_init__(self):
        for name in ("M", "eps", "g"):
            v = getattr(self, name)
            if not np.isfinite(v) or np.iscomplexobj(v):
                raise ValueError(f"{name} must be a finite real number")


@dataclass(frozen=True)
class Factor:
    name: object
    dim: int
    fermionic: bool = False


class TensorSpace:
    """Ordered tensor product of local factors with Jordan-Wigner fermions."""

    def __init__(self, factors: Sequence[Factor], cap: int | None = None):
        self.factors = tuple(factors)
        for f in self.factors:
            if f.fermionic and f.dim != 2:
                raise ValueError("fermionic factors must have dimension 2")
        self.dims = tuple(f.dim for f in self.factors)
        self.dim = int(np.prod(self.dims, dtype=object)) if self.dims else 1
        cap = dim_cap() if cap is None else cap
        if self.dim > cap:
            raise DimensionCapError(f"Hilbert dimension {self.dim} exceeds cap {cap}")
        self._pos = {f.name: i for i, f in enumerate(self.factors)}
        if len(self._pos) != len(self.factors):
            raise ValueError("factor names must be unique")

    def index(self, name) -> int:
        try:
            return self._pos[name]
        except KeyError:
            raise KeyError(f"no factor named {name!r}") from None

    @cached_property
    def digits(self) -> np.ndarray:
        """``(dim, n_factors)`` array of local basis indices per global index."""
        idx = np.arange(self.dim)
        out = np.empty((self.dim, len(self.dims)), dtype=np.int64)
        for k in range(len(self.dims) - 1, -1, -1):
            out[:, k] = idx % self.dims[k]
            idx = idx // self.dims[k]
        return out

    @cached_property
    def strides(self) -> np.ndarray:
        s = np.ones(len(self.dims), dtype=np.int64)
        for k in range(len(self.dims) - 2, -1, -1):
            s[k] = s[k + 1] * self.dims[k + 1]
        return s

    def local(self, name, op) -> sp.csr_matrix:
        """Embed a local operator. Odd fermionic ops get their JW string."""
        k = self.index(name)
        op = sp.csr_matrix(op)
        mats = []
        for j, f in enumerate(self.factors):
            if j == k:
                mats.append(op)
            elif j < k and self.factors[k].fermionic and f.fermionic and _is_odd(op):
                mats.append(sp.diags([1.0, -1.0]))
            else:
                mats.append(sp.identity(f.dim))
        out = sp.csr_matrix(np.ones((1, 1)))
        for m in mats:
            out = sp.kron(out, m, format="csr")
        return out

    def diag_of(self, name, values) -> np.ndarray:
        """Diagonal vector of a local diagonal operator given its values."""
        return np.asarray(values)[self.digits[:, self.index(name)]]

    def permutation(self, new_digits: np.ndarray) -> sp.csr_matrix:
        """Operator mapping basis ``|digits>`` to ``|new_digits>`` rowwise."""
        cols = np.arange(self.dim)
        rows = new_digits @ self.strides
        return sp.csr_matrix((np.ones(self.dim), (rows, cols)), shape=(self.dim, self.dim))


FERMION_A = np.array([[0.0, 1.0], [0.0, 0.0]])  # |1> -> |0>
FERMION_ADAG = FERMION_A.T.copy()


def _is_odd(op) -> bool:
    op = sp.csr_matrix(op)
    if op.shape != (2, 2):
        return False
    d = op.toarray()
    return bool(np.allclose(np.diag(d), 0) and not np.allclose(d, 0))


@dataclass
class StateVector:
    system: "GaugedSystem"
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (self.system.dim,):
            raise ValueError("amplitude vector has the wrong dimension")

    @property
    def mode_order(self) -> tuple:
        return tuple(self.system.geometry.vertices())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        return StateVector(self.system, self.amplitudes / self.norm())


class GaugedSystem(TensorSpace):
    """Staggered fermions on vertices coupled to Z_N link clocks."""

    def __init__(self, geometry: LatticeGeometry, n: int = 3, cap: int | None = None):
        self.geometry = geometry
        self.link_space = ZnLinkSpace(n)
        self.n = n
        factors = [Factor(("psi", v), 2, True) for v in geometry.vertices()]
        factors += [Factor(("link", l), n) for l in geometry.links]
        super().__init__(factors, cap)

    # -- elementary operators -------------------------------------------
    def psi(self, x) -> sp.csr_matrix:
        return self.local(("psi", tuple(x)), FERMION_A)

    def psi_dag(self, x) -> sp.csr_matrix:
        return self.local(("psi", tuple(x)), FERMION_ADAG)

    def number_diag(self, x) -> np.ndarray:
        return self.diag_of(("psi", tuple(x)), [0.0, 1.0])

    def charge_diag(self, x) -> np.ndarray:
        """Staggered charge ``Q(x) = n(x) - (1 - (-1)^x) / 2``."""
        odd = 1 if self.geometry.parity(x) == -1 else 0
        return self.number_diag(x) - odd

    def field_diag(self, link) -> np.ndarray:
        return self.diag_of(("link", LinkId(*link)), self.link_space.window.astype(float))

    def U(self, link) -> sp.csr_matrix:
        return self.local(("link", LinkId(*link)), self.link_space.U())

    def basis_state(self, occupied=(), fields=None) -> StateVector:
        """Basis vector with the given occupied vertices and link field values."""
        digits = np.zeros(len(self.factors), dtype=np.int64)
        for x in occupied:
            digits[self.index(("psi", tuple(x)))] = 1
        for link, value in (fields or {}).items():
            digits[self.index(("link", LinkId(*link)))] = int(value) % self.n
        v = np.zeros(self.dim, dtype=complex)
        v[int(digits @ self.strides)] = 1.0
        return StateVector(self, v)

    def random_state(self, rng) -> StateVector:
        v = rng.normal(size=self.dim) + 1j * rng.normal(size=self.dim)
        return StateVector(self, v / np.linalg.norm(v))


# -- Hamiltonians ---------------------------------------------------------
HAMILTONIAN_KINDS = ("H_f", "H_f_gauged", "H_KS", "full")


def _hop(system, x, y, link=None):
    term = system.psi_dag(x) @ (system.U(link) if link is not None else sp.identity(system.dim)) @ system.psi(y)
    return term + term.getH()


def mass_diag(system: GaugedSystem, params: HamiltonianParams) -> np.ndarray:
    geom = system.geometry
    out = np.zeros(system.dim)
    for x in geom.vertices():
        out += params.M * geom.parity(x) * system.number_diag(x)
    return out


def electric_diag(system: GaugedSystem, params: HamiltonianParams) -> np.ndarray:
    out = np.zeros(system.dim)
    for l in system.geometry.links:
        out += 0.5 * params.g ** 2 * system.field_diag(l) ** 2
    return out


def link_hopping(system: GaugedSystem, params: HamiltonianParams, link, gauged: bool = True):
    x = link[0]
    y = system.geometry.link_end(link)
    return params.eps * _hop(system, x, y, link if gauged else None)


def plaquette_operator(system: GaugedSystem, corner) -> sp.csr_matrix:
    """``U_p`` = oriented product of link operators around a unit plaquette."""
    out = sp.identity(system.dim, format="csr")
    for link, orient in system.geometry.plaquette_links(corner):
        u = system.U(link)
        out = out @ (u if orient == +1 else u.getH())
    return out


def build_hamiltonian(system: GaugedSystem, params: HamiltonianParams, kind: str = "full") -> sp.csr_matrix:
    """Sparse Hamiltonian on ``system``.

    ``H_f`` ungauged hopping (gauge fields are spectators), ``H_f_gauged`` the
    minimally coupled version, ``H_KS = H_E + H_B`` and ``full`` their sum.
    ``H_B`` uses the Z_N plaquette real part ``-(1/g^2) (U_p + U_p^dag) / 2``.
    """
    if kind not in HAMILTONIAN_KINDS:
        raise ValueError(f"unknown Hamiltonian kind {kind!r}; expected one of {HAMILTONIAN_KINDS}")
    geom = system.geometry
    H = sp.csr_matrix((system.dim, system.dim), dtype=complex)
    if kind in ("H_f", "H_f_gauged", "full"):
        H = H + sp.diags(mass_diag(system, params))
        for l in geom.links:
            H = H + link_hopping(system, params, l, gauged=(kind != "H_f"))
    if kind in ("H_KS", "full"):
        if params.g <= 0:
            raise ValueError("g must be positive for the Kogut-Susskind terms")
        H = H + sp.diags(electric_diag(system, params))
        for corner in geom.plaquettes():
            up = plaquette_operator(system, corner)
            H = H - (0.5 / params.g ** 2) * (up + up.getH())
    return sp.csr_matrix(H)


def fermion_hamiltonian(geometry: LatticeGeometry, params: HamiltonianParams) -> np.ndarray:
    """Dense pure-fermion ``H_f`` on ``2^V`` states (no links)."""
    space = TensorSpace([Factor(("psi", v), 2, True) for v in geometry.vertices()])
    a = {v: space.local(("psi", v), FERMION_A) for v in geometry.vertices()}
    H = sp.csr_matrix((space.dim, space.dim), dtype=complex)
    for v in geometry.vertices():
        H = H + params.M * geometry.parity(v) * (a[v].T @ a[v])
    for l in geometry.links:
        x, y = l[0], geometry.link_end(l)
        t = a[x].T @ a[y]
        H = H + params.eps * (t + t.getH())
    return H.toarray()


# -- Gauss law and sectors -------------------------------------------------
def gauss_diag(system: GaugedSystem, x) -> np.ndarray:
    """Eigenvalues of ``G(x) - Q(x)`` per basis state, folded into the Z_N window."""
    x = system.geometry.check_vertex(x)
    g = -system.charge_diag(x)
    for link, sign in system.geometry.star_links(x):
        g = g + sign * system.field_diag(link)
    return fold(np.rint(g).astype(np.int64), system.n).astype(float)


def gauss_operator(system: GaugedSystem, x) -> sp.csr_matrix:
    return sp.diags(gauss_diag(system, x)).tocsr()


def sector_mask(system: GaugedSystem, charges=None) -> np.ndarray:
    """Boolean mask of basis states with ``G(x) = q(x) mod N`` everywhere."""
    mask = np.ones(system.dim, dtype=bool)
    for x in system.geometry.vertices():
        q = 0 if charges is None else charges.get(x, 0) if isinstance(charges, dict) else charges[system.geometry.vertex_index(x)]
        mask &= fold(gauss_diag(system, x) - q, system.n) == 0
    return mask


def sector_project(system: GaugedSystem, state, charges=None) -> StateVector:
    amps = state.amplitudes if isinstance(state, StateVector) else np.asarray(state, dtype=complex)
    return StateVector(system, np.where(sector_mask(system, charges), amps, 0.0))


def all_sectors(system: GaugedSystem) -> dict:
    """``{charge tuple: mask}`` for every sector with at least one basis state."""
    cols = np.stack([gauss_diag(system, x) for x in system.geometry.vertices()], axis=1).astype(np.int64)
    keys, inverse = np.unique(cols, axis=0, return_inverse=True)
    return {tuple(int(v) for v in k): inverse.ravel() == i for i, k in enumerate(keys)}


# -- gauging unitaries -----------------------------------------------------
def _controlled_shift(system: GaugedSystem, shifts: dict) -> sp.csr_matrix:
    """Permutation raising each link's index by a per-basis-state integer."""
    digits = system.digits.copy()
    for link, amount in shifts.items():
        k = system.index(("link", LinkId(*link)))
        digits[:, k] = (digits[:, k] + np.rint(amount).astype(np.int64)) % system.n
    return system.permutation(digits)


def gauging_unitary(system: GaugedSystem, link) -> sp.csr_matrix:
    """Controlled shift ``U_link^{n(origin)}``."""
    link = system.geometry.link(*link)
    return _controlled_shift(system, {link: system.number_diag(link.origin)})


def gauging_unitary_1d(system: GaugedSystem) -> sp.csr_matrix:
    """Nonlocal gauging of an open chain.

    The link entering vertex ``x`` is raised by the accumulated staggered
    charge ``sum_{y<x} Q(y)`` to its left.
    """
    geom = system.geometry
    if geom.height != 1 or geom.boundary.periodic_x:
        raise ValueError("1D gauging needs an open chain of height 1")
    shifts = {}
    acc = np.zeros(system.dim)
    for c in range(geom.width - 1):
        acc = acc + system.charge_diag((c, 0))
        shifts[LinkId((c, 0), 1)] = acc.copy()
    return _controlled_shift(system, shifts)


# -- Trotterized dynamics --------------------------------------------------
def default_schedule(geometry: LatticeGeometry) -> list:
    """Partition links into groups with no shared vertex (greedy edge colouring)."""
    keyed = sorted(geometry.links, key=lambda l: (l.direction, (l.origin[0] if l.direction == 1 else l.origin[1]) % 2))
    groups: list = []
    used: list = []
    for l in keyed:
        ends = {l.origin, geometry.link_end(l)}
        for g, verts in zip(groups, used):
            if g[0].direction == l.direction and not verts & ends:
                g.append(l)
                verts |= ends
                break
        else:
            groups.append([l])
            used.append(set(ends))
    return groups


def validate_schedule(geometry: LatticeGeometry, schedule) -> list:
    seen = set()
    groups = []
    for group in schedule:
        verts = set()
        g = []
        for l in group:
            l = geometry.link(*l)
            if l in seen:
                raise ValueError(f"link {l} appears twice in the schedule")
            seen.add(l)
            ends = {l.origin, geometry.link_end(l)}
            if verts & ends:
                raise ValueError(f"links in one schedule group share a vertex at {verts & ends}")
            verts |= ends
            g.append(l)
        groups.append(g)
    if seen != set(geometry.links):
        raise ValueError("schedule must cover every link exactly once")
    return groups


def link_step(system: GaugedSystem, params: HamiltonianParams, link, tau: float) -> sp.csr_matrix:
    """``U_G exp(-i tau H_l) U_G^dag`` for the ungauged hopping ``H_l`` on one link.

    ``H_l^2 = eps^2 (n_x - n_y)^2`` so the exponential is a closed form.
    """
    x, y = link[0], system.geometry.link_end(link)
    h = link_hopping(system, params, link, gauged=False)
    p = (system.number_diag(x) - system.number_diag(y)) ** 2
    e = params.eps
    c, s = np.cos(e * tau), np.sin(e * tau)
    step = sp.diags(1.0 - p + c * p) - 1j * (s / e if e != 0 else 0.0) * h
    ug = gauging_unitary(system, link)
    return sp.csr_matrix(ug @ step @ ug.getH())


def trotter_step(system, params, dt, schedule=None, include_electric=False) -> sp.csr_matrix:
    """One symmetric (Strang) step of the gauged fermion dynamics."""
    geom = system.geometry
    groups = validate_schedule(geom, schedule if schedule is not None else default_schedule(geom))
    diag = mass_diag(system, params)
    if include_electric:
        diag = diag + electric_diag(system, params)
    half_diag = sp.diags(np.exp(-0.5j * dt * diag))
    factors = []
    for k, g in enumerate(groups):
        tau = dt if k == len(groups) - 1 else 0.5 * dt
        m = sp.identity(system.dim, format="csr", dtype=complex)
        for l in g:
            m = link_step(system, params, l, tau) @ m
        factors.append(m)
    step = half_diag
    for m in factors:
        step = m @ step
    for m in reversed(factors[:-1]):
        step = m @ step
    return sp.csr_matrix(half_diag @ step)


def trotter_evolve(system, state, params, t: float, n_steps: int, schedule=None,
                   include_electric=False) -> StateVector:
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    amps = state.amplitudes if isinstance(state, StateVector) else np.asarray(state, dtype=complex)
    if t == 0:
        return StateVector(system, amps.copy())
    step = trotter_step(system, params, t / n_steps, schedule, include_electric)
    for _ in range(n_steps):
        amps = step @ amps
    return StateVector(system, amps)


def exact_evolve(system, state, params, t: float, include_electric=False) -> StateVector:
    H = build_hamiltonian(system, params, "H_f_gauged")
    if include_electric:
        H = H + sp.diags(electric_diag(system, params))
    amps = state.amplitudes if isinstance(state, StateVector) else np.asarray(state, dtype=complex)
    return StateVector(system, expm_multiply(-1j * t * H.tocsc(), amps))


def commutator_norm(A, B) -> float:
    """Max-abs entry of ``[A, B]`` for sparse or dense operands."""
    C = A @ B - B @ A
    if sp.issparse(C):
        return float(abs(C).max()) if C.nnz else 0.0
    return float(np.max(np.abs(C), initial=0.0))

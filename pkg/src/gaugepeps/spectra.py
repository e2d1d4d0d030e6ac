"""Column transfer operators of the gauged fPEPS on a cylinder.

The cylinder is periodic in ``y`` with circumference ``n_y`` and runs along
``x``. A column's ket state ``|C_phi>`` (its sites with the vertical bonds
contracted) lives on the left legs ``L``, right legs ``R`` and physical modes
``P``, ordered ``(L, R, P)`` with rows ascending and ``(l+, l-)``, ``(r+, r-)``
inside a row. Tracing ``P`` from ``|C_phi><C_phi|`` and summing the column's
link angles over Z_N gives an even operator ``E`` on ``L R``.

Contracting a column maps an even operator ``M`` on the previous ``R`` legs to

    M' = Tr_{R, L'} [ (Pi (x) 1) (M (x) E') ],

with ``Pi`` the projector onto the horizontal bond pairs. Even operators on
consecutive mode blocks multiply as Kronecker products in the Jordan-Wigner
basis, so the map is a plain ``(4^n_y)^2``-dimensional matrix. Sites on even
and odd columns differ (the sublattice alternates), so the translation unit is
a pair of columns and :class:`TransferOperator` multiplies both.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fock
from . import fpeps as fp
from .exact import DimensionCapError
from .lattice import LatticeGeometry

DEFAULT_TRANSFER_CAP = 10 ** 4
DEGENERACY_TOL = 1e-10
SCAN_FIELDS = ("t", "y_re", "y_im", "z_re", "z_im", "eta_p_index", "n_y", "n", "lambda_1", "gap_ratio",
               "correlation_length")


@dataclass(frozen=True)
class Insertion:
    """Column insertion: ``kind`` is ``none``, ``U`` (phase ``e^{i phi}`` on the
    horizontal link leaving ``row``) or ``n`` (physical occupation at ``row``)."""
    kind: str = "none"
    row: int = 0

    def __post_init__(self):
        if self.kind not in ("none", "U", "n"):
            raise ValueError(f"unknown insertion {self.kind!r}")


NONE = Insertion()


def _column_geometry(n_y: int) -> LatticeGeometry:
    # two columns of a torus give the right vertical links and sublattices
    return LatticeGeometry(2, n_y, "torus")


def _leg_orders(n_y: int, x: int):
    L = [((x, y), m) for y in range(n_y) for m in ("l+", "l-")]
    R = [((x, y), m) for y in range(n_y) for m in ("r+", "r-")]
    P = [((x, y), "psi") for y in range(n_y)]
    return L, R, P


def column_kets(params: fp.SiteTensorParams, n_y: int, n: int, x: int = 0, T=None) -> list:
    """``[(k_vertical, k_horizontal, |C_phi>)]`` for every Z_N column configuration.

    Vectors are dense over ``(L, R, P)``; angles are ``2 pi k / n``.
    """
    if n_y < 2 or n_y % 2:
        raise ValueError("the cylinder circumference must be even and >= 2")
    geom = _column_geometry(n_y)
    T = fp.build_T(params) if T is None else np.asarray(T, dtype=complex)
    sites = [(x, y) for y in range(n_y)]
    base = np.ones(1, dtype=complex)
    labels = []
    for s in sites:
        base = np.kron(base, fock.pairing_state(fp.site_pairing_matrix(geom.parity(s), T)))
        labels += [(s, m) for m in fp.SITE_MODES]
    n_modes = len(labels)
    vlinks = [geom.link(s, 2) for s in sites]
    bond = fock.pairing_state(fp._bond_K())
    bond = bond / np.linalg.norm(bond)
    L, R, P = _leg_orders(n_y, x)
    out = []
    for kv in itertools.product(range(n), repeat=n_y):
        vec = base.copy()
        for k, link in zip(kv, vlinks):
            a = 2 * np.pi * k / n
            plus, minus = fp.link_modes(geom, link)
            vec = fock.number_phase(vec, n_modes, labels.index(plus), a)
            vec = fock.number_phase(vec, n_modes, labels.index(minus), -a)
        lab = list(labels)
        for link in vlinks:
            modes = fp.bond_modes(geom, link)
            vec = fock.project_modes(vec, len(lab), [lab.index(m) for m in modes], bond)
            lab = [l for l in lab if l not in modes]
        order = [lab.index(m) for m in L + R + P]
        vec = fock.permute_modes(vec, len(lab), order)
        rmodes = len(lab)
        for kh in itertools.product(range(n), repeat=n_y):
            v = vec
            for y, k in enumerate(kh):
                a = 2 * np.pi * k / n
                v = fock.number_phase(v, rmodes, len(L) + 2 * y, a)
                v = fock.number_phase(v, rmodes, len(L) + 2 * y + 1, -a)
            out.append((kv, kh, v))
    return out


def column_operator(params: fp.SiteTensorParams, n_y: int, n: int, x: int = 0,
                    insertion: Insertion = NONE, T=None, kets=None) -> np.ndarray:
    """Gauge-summed double-layer column ``E`` as a matrix on ``L R``.

    ``kets`` may pass precomputed :func:`column_kets` output for column ``x``.
    """
    dim_lr = 4 ** (2 * n_y)
    dim_p = 2 ** n_y
    geom = _column_geometry(n_y)
    O = np.eye(dim_p)
    if insertion.kind == "n":
        occ = fock.occupations(n_y)[:, insertion.row].astype(float)
        if geom.parity((x, insertion.row)) == -1:
            occ = 1.0 - occ  # psi creates a hole on odd sites
        O = np.diag(occ)
    E = np.zeros((dim_lr, dim_lr), dtype=complex)
    kets = column_kets(params, n_y, n, x, T) if kets is None else kets
    for kv, kh, v in kets:
        C = v.reshape(dim_lr, dim_p)
        w = 1.0
        if insertion.kind == "U":
            w = np.exp(2j * np.pi * kh[insertion.row] / n)
        E += w * (C @ O.T @ C.conj().T)
    return E / n ** (2 * n_y)


def bond_projector(n_y: int) -> np.ndarray:
    """``|omega><omega|`` on ``(R, L')`` for all horizontal bonds across a cut."""
    nm = 4 * n_y
    pairs = []
    for y in range(n_y):
        r_plus, r_minus = 2 * y, 2 * y + 1
        l_plus, l_minus = 2 * n_y + 2 * y, 2 * n_y + 2 * y + 1
        pairs += [(l_plus, r_plus, 1.0), (l_minus, r_minus, 1.0)]
    w = fock.pairing_state(fock.antisymmetric_from_pairs(nm, pairs))
    w = w / np.linalg.norm(w)
    return np.outer(w, w.conj())


def column_transfer(E: np.ndarray, Pi: np.ndarray) -> np.ndarray:
    """Matrix of ``M -> Tr_{R,L'}[(Pi (x) 1)(M (x) E')]`` on row-major ``vec(M)``."""
    d = int(round(math.sqrt(E.shape[0])))
    Pi4 = Pi.reshape(d, d, d, d)        # [r, l, r2, l2]
    E4 = E.reshape(d, d, d, d)          # [l2, s, l, s2]
    # M'[s, s2] = sum Pi[r, l, r2, l2] M[r2, r] E[l2, s, l, s2]
    Tm = np.einsum("rlab,bslu->suar", Pi4, E4, optimize=True)
    return Tm.reshape(d * d, d * d)


@dataclass
class TransferOperator:
    """Two-column transfer matrix (even column then odd column)."""
    matrix: np.ndarray
    columns: tuple
    n_y: int
    n: int
    params: fp.SiteTensorParams
    insertion: Insertion = NONE
    meta: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


class TransferBuilder:
    """Caches column operators for one parameter point."""

    def __init__(self, params: fp.SiteTensorParams, n_y: int = 2, n: int = 3,
                 cap: int = DEFAULT_TRANSFER_CAP):
        dim = (4 ** n_y) ** 2
        if dim > cap:
            raise DimensionCapError(f"transfer dimension {dim} exceeds cap {cap}")
        self.params, self.n_y, self.n = params, n_y, n
        self.T = fp.build_T(params)
        self.Pi = bond_projector(n_y)
        self._cache = {}
        self._kets = {}

    def kets(self, x: int) -> list:
        if x % 2 not in self._kets:
            self._kets[x % 2] = column_kets(self.params, self.n_y, self.n, x % 2, self.T)
        return self._kets[x % 2]

    def column_operator(self, x: int, insertion: Insertion = NONE) -> np.ndarray:
        return column_operator(self.params, self.n_y, self.n, x % 2, insertion, self.T, self.kets(x))

    def column(self, x: int, insertion: Insertion = NONE) -> np.ndarray:
        key = (x % 2, insertion)
        if key not in self._cache:
            self._cache[key] = column_transfer(self.column_operator(x, insertion), self.Pi)
        return self._cache[key]

    def pair(self, insertions=(NONE, NONE)) -> np.ndarray:
        return self.column(1, insertions[1]) @ self.column(0, insertions[0])

    def left_boundary(self) -> np.ndarray:
        """``vec`` of ``Tr_L[|0><0|_L E_0]`` for an open left edge."""
        E = self.column_operator(0)
        d = int(round(math.sqrt(E.shape[0])))
        return E.reshape(d, d, d, d)[0, :, 0, :].reshape(-1)

    def right_boundary(self) -> np.ndarray:
        """Covector closing open right legs on the vacuum: ``M -> M[0, 0]``."""
        d = 4 ** self.n_y
        v = np.zeros(d * d)
        v[0] = 1.0
        return v


def build_transfer(params: fp.SiteTensorParams, n_y: int = 2, n: int = 3, insertion: Insertion = NONE,
                   cap: int = DEFAULT_TRANSFER_CAP) -> TransferOperator:
    """Two-column transfer operator, optionally with ``insertion`` on the first column."""
    b = TransferBuilder(params, n_y, n, cap)
    M = b.pair((insertion, NONE))
    if not np.all(np.isfinite(M)):
        raise FloatingPointError("transfer operator has non-finite entries")
    return TransferOperator(M, (0, 1), n_y, n, params, insertion)


def leading_spectrum(op, k: int = 2) -> np.ndarray:
    """``k`` eigenvalues of largest magnitude, sorted descending by modulus."""
    M = op.matrix if isinstance(op, TransferOperator) else np.asarray(op)
    if not 1 <= k <= M.shape[0]:
        raise ValueError("k must be between 1 and the operator dimension")
    ev = np.linalg.eigvals(M)
    return ev[np.argsort(-np.abs(ev), kind="stable")][:k]


def gap_ratio(op, tol: float = DEGENERACY_TOL) -> float:
    """``|lambda_2 / lambda_1|`` with the leading eigenvalue counted once.

    Copies of ``|lambda_1|`` within ``tol`` are treated as a degenerate leading
    level: the ratio is then reported as 1.
    """
    ev = leading_spectrum(op, min(3, (op.matrix if isinstance(op, TransferOperator) else op).shape[0]))
    l1 = abs(ev[0])
    if l1 == 0:
        return 0.0
    return float(abs(ev[1]) / l1) if len(ev) > 1 else 0.0


def correlation_length(op, tol: float = DEGENERACY_TOL) -> float:
    """``-1 / ln |lambda_2 / lambda_1|`` in units of the transfer step.

    0 for a rank-1 operator; ``inf`` when the leading level is degenerate.
    """
    r = gap_ratio(op)
    if r <= 0:
        return 0.0
    if r >= 1 - tol:
        return math.inf
    return -1.0 / math.log(r)


# -- correlators ----------------------------------------------------------------
def _dominant(M):
    """Leading right and left eigenvectors normalised so ``l . r = 1``."""
    ev, V = np.linalg.eig(M)
    i = int(np.argmax(np.abs(ev)))
    evl, W = np.linalg.eig(M.T)
    j = int(np.argmin(np.abs(evl - ev[i])))
    r, l = V[:, i], W[:, j]
    return ev[i], r, l / (l @ r)


@dataclass
class CorrelatorCheck:
    distances: tuple
    explicit: np.ndarray
    spectral: np.ndarray
    max_deviation: float
    gap_ratio: float


def correlator_check(params: fp.SiteTensorParams, n_y: int = 2, n: int = 3, max_l: int = 5,
                     a: Insertion = Insertion("n", 0), b: Insertion = Insertion("n", 0)) -> CorrelatorCheck:
    """Connected ``<A(0) B(L)>`` on the infinite cylinder, two ways.

    ``explicit`` applies the transfer matrices pair by pair to the dominant
    boundary vectors; ``spectral`` sums ``c_k (lambda_k / lambda_1)^(L-1)``
    over the eigen-decomposition. ``L`` counts two-column units.
    """
    bld = TransferBuilder(params, n_y, n)
    T = bld.pair()
    TA = bld.pair((a, NONE))
    TB = bld.pair((b, NONE))
    lam, r, l = _dominant(T)
    mean_a = (l @ TA @ r) / lam
    mean_b = (l @ TB @ r) / lam
    explicit = []
    for L in range(1, max_l + 1):
        v = TA @ r / lam
        for _ in range(L - 1):
            v = T @ v / lam
        v = TB @ v / lam
        explicit.append(l @ v - mean_a * mean_b)
    ev, V = np.linalg.eig(T)
    left = (l @ TB) @ V
    right = np.linalg.solve(V, TA @ r)
    ratio = ev / lam
    spectral = []
    for L in range(1, max_l + 1):
        spectral.append(np.sum(left * right * ratio ** (L - 1)) / lam ** 2 - mean_a * mean_b)
    explicit, spectral = np.array(explicit), np.array(spectral)
    return CorrelatorCheck(tuple(range(1, max_l + 1)), explicit, spectral,
                           float(np.max(np.abs(explicit - spectral))), gap_ratio(T))


def open_cylinder_norm(params: fp.SiteTensorParams, n_columns: int, n_y: int = 2, n: int = 3,
                       insertions: dict | None = None) -> complex:
    """``sum_Phi <psi(Phi)|psi(Phi)>`` on an open ``n_columns x n_y`` cylinder,
    with Z_N-averaged link angles (the Haar average becomes ``1/N`` per link)."""
    insertions = insertions or {}
    bld = TransferBuilder(params, n_y, n)
    d = 4 ** n_y
    if n_columns < 1:
        raise ValueError("need at least one column")
    E0 = bld.column_operator(0, insertions.get(0, NONE))
    v = E0.reshape(d, d, d, d)[0, :, 0, :].reshape(-1)
    for x in range(1, n_columns):
        v = bld.column(x, insertions.get(x, NONE)) @ v
    return complex(v[0])


def emit_transfer_row(params: fp.SiteTensorParams, n_y: int, n: int) -> dict:
    op = build_transfer(params, n_y, n)
    ev = leading_spectrum(op, 2)
    row = params.to_dict()
    row.update({"n_y": n_y, "n": n, "lambda_1": float(np.real(ev[0])), "gap_ratio": gap_ratio(op),
                "correlation_length": correlation_length(op)})
    return row


def write_rows(path, rows, fields=SCAN_FIELDS) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(fields))
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.15g}" if isinstance(v, float) else v) for k, v in r.items() if k in fields})

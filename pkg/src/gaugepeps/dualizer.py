"""Constraint-solving maps: the Higgs unitary gauge and 1D fermion elimination.

Higgs matter is a Z_N clock per vertex holding the charge ``Q(x)``; the phase
``e^{i theta(x)}`` raises it. The unitary gauge is the controlled shift

    U_H : Q(x) -> Q(x) - div E(x)   (mod N),

which maps every gauge-invariant state (``div E = Q``) to ``|Q = 0>`` times a
gauge-field state.

Fermion elimination works in an enlarged space with, per vertex, a Majorana
``c = chi + chi^dag`` and a hard-core spin, and per link a pair of auxiliary
Majoranas ``alpha(x), beta(x+1)`` bound into ``f = (alpha - i beta) / 2``.
The fermion is ``psi^dag = c eta^dag`` with ``eta^dag = sigma_+ (-1)^{n_chi}``.
Conjugating by ``U_F = prod_x (i c beta)^{E(x-1)} (i c alpha)^{E(x)}`` and
fixing ``f`` and ``chi`` to their vacua gives the spin chain

    -i eps sum_x ((-1)^{E(x-1)} sigma_+(x) U(x) sigma_-(x+1) + h.c.),

with the phase set to 1 on the first vertex.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .exact import (FERMION_A, FERMION_ADAG, Factor, GaugedSystem, HamiltonianParams,
                    TensorSpace, ZnLinkSpace, build_hamiltonian, electric_diag, fold,
                    sector_mask)
from .lattice import Boundary, LatticeGeometry, LinkId

SIGMA_PLUS = np.array([[0.0, 0.0], [1.0, 0.0]])  # |0> -> |1>, index 1 is "up"
SIGMA_MINUS = SIGMA_PLUS.T.copy()
MAJORANA_X = np.array([[0.0, 1.0], [1.0, 0.0]])


def _parity_power(op, exponent_diag) -> sp.csr_matrix:
    """``op ** E`` for an involution ``op`` and integer diagonal ``E``."""
    odd = (np.rint(exponent_diag).astype(np.int64) % 2 != 0).astype(float)
    return sp.csr_matrix(sp.diags(1.0 - odd) + sp.diags(odd) @ op)


# -- Higgs unitary gauge -------------------------------------------------------
class HiggsSystem(TensorSpace):
    """Z_N clock matter on vertices (charge basis) and Z_N links."""

    def __init__(self, geometry: LatticeGeometry, n: int = 3, cap: int | None = None):
        if n < 2:
            raise ValueError("Z_N needs N >= 2")
        self.geometry = geometry
        self.n = n
        self.link_space = ZnLinkSpace(n)
        factors = [Factor(("Q", v), n) for v in geometry.vertices()]
        factors += [Factor(("link", l), n) for l in geometry.links]
        super().__init__(factors, cap)

    @property
    def matter_dim(self) -> int:
        return self.n ** self.geometry.n_vertices

    def charge_diag(self, x) -> np.ndarray:
        return self.diag_of(("Q", tuple(x)), self.link_space.window.astype(float))

    def field_diag(self, link) -> np.ndarray:
        return self.diag_of(("link", LinkId(*link)), self.link_space.window.astype(float))

    def divergence_diag(self, x) -> np.ndarray:
        out = np.zeros(self.dim)
        for link, sign in self.geometry.star_links(x):
            out = out + sign * self.field_diag(link)
        return out

    def gauss_diag(self, x) -> np.ndarray:
        """``div E(x) - Q(x)`` folded into the Z_N window."""
        g = self.divergence_diag(x) - self.charge_diag(x)
        return fold(np.rint(g).astype(np.int64), self.n).astype(float)

    def sector_mask(self) -> np.ndarray:
        mask = np.ones(self.dim, dtype=bool)
        for x in self.geometry.vertices():
            mask &= self.gauss_diag(x) == 0
        return mask

    def U(self, link) -> sp.csr_matrix:
        return self.local(("link", LinkId(*link)), self.link_space.U())

    def phase_raiser(self, x) -> sp.csr_matrix:
        """``e^{i theta(x)}``: raises the charge at ``x`` by one."""
        return self.local(("Q", tuple(x)), self.link_space.U())

    def random_gauge_invariant_state(self, rng) -> np.ndarray:
        v = rng.normal(size=self.dim) + 1j * rng.normal(size=self.dim)
        v = np.where(self.sector_mask(), v, 0.0)
        return v / np.linalg.norm(v)


def higgs_hopping(system: HiggsSystem, eps: float) -> sp.csr_matrix:
    """``eps sum (e^{i theta(x)} U(x, i) e^{-i theta(x + e_i)} + h.c.)``."""
    H = sp.csr_matrix((system.dim, system.dim), dtype=complex)
    for link in system.geometry.links:
        x, y = link.origin, system.geometry.link_end(link)
        term = system.phase_raiser(x) @ system.U(link) @ system.phase_raiser(y).getH()
        H = H + eps * (term + term.getH())
    return sp.csr_matrix(H)


def unitary_gauge_transform(system: HiggsSystem) -> sp.csr_matrix:
    """Permutation ``U_H`` shifting each clock by minus the local divergence."""
    digits = system.digits.copy()
    for x in system.geometry.vertices():
        k = system.index(("Q", tuple(x)))
        div = np.rint(system.divergence_diag(x)).astype(np.int64)
        digits[:, k] = (digits[:, k] - div) % system.n
    return system.permutation(digits)


@dataclass
class UnitaryGaugeReport:
    purity: float
    norm_in: float
    norm_out: float
    matter_weight_at_zero: float
    in_sector: bool
    decoupled: bool


def matter_reduced_state(system: HiggsSystem, state) -> np.ndarray:
    """Reduced density matrix of all vertex clocks (they come first in the basis)."""
    amps = np.asarray(state, dtype=complex).reshape(system.matter_dim, -1)
    return amps @ amps.conj().T


def unitary_gauge_report(system: HiggsSystem, state, tol: float = 1e-12) -> UnitaryGaugeReport:
    """Apply ``U_H`` and check that the matter factor ends in ``|Q = 0>``."""
    state = np.asarray(state, dtype=complex)
    out = unitary_gauge_transform(system) @ state
    rho = matter_reduced_state(system, out)
    tr = float(np.real(np.trace(rho)))
    purity = float(np.real(np.trace(rho @ rho))) / tr ** 2 if tr > 0 else 0.0
    zero_digits = np.array([int(np.nonzero(system.link_space.window == 0)[0][0])] * system.geometry.n_vertices)
    strides = system.n ** np.arange(system.geometry.n_vertices - 1, -1, -1)
    z = int(zero_digits @ strides)
    at_zero = float(np.real(rho[z, z])) / tr if tr > 0 else 0.0
    in_sector = bool(np.linalg.norm(state[~system.sector_mask()]) <= tol * max(1.0, np.linalg.norm(state)))
    return UnitaryGaugeReport(purity, float(np.linalg.norm(state)), float(np.linalg.norm(out)),
                              at_zero, in_sector, bool(1.0 - at_zero <= tol))


def cnot_product(system: HiggsSystem) -> sp.csr_matrix:
    """Z_2 unitary gauge written as CNOTs from every link onto both of its ends."""
    if system.n != 2:
        raise ValueError("the CNOT form holds for Z_2 only")
    out = sp.identity(system.dim, format="csr")
    X = np.array([[0.0, 1.0], [1.0, 0.0]])
    for link in system.geometry.links:
        p1 = sp.diags(system.diag_of(("link", link), [0.0, 1.0]))
        p0 = sp.identity(system.dim) - p1
        for v in (link.origin, system.geometry.link_end(link)):
            cnot = p0 + p1 @ system.local(("Q", tuple(v)), X)
            out = sp.csr_matrix(cnot @ out)
    return out


# -- 1D fermion elimination: operator level -------------------------------------
def _check_chain(geom: LatticeGeometry) -> None:
    if geom.height != 1 or geom.boundary != Boundary.OPEN:
        raise ValueError("fermion elimination is implemented for open 1D chains")


class EnlargedChain(TensorSpace):
    """Vertex Majoranas, link auxiliary fermions, hard-core spins and Z_N links."""

    def __init__(self, geometry: LatticeGeometry, n: int = 4, cap: int | None = None):
        _check_chain(geometry)
        if n % 2:
            raise ValueError("fermion elimination needs an even N (Z_2 subgroup)")
        self.geometry = geometry
        self.n = n
        self.link_space = ZnLinkSpace(n)
        self.sites = [v[0] for v in geometry.vertices()]
        self.bonds = [l.origin[0] for l in geometry.links]
        factors = [Factor(("chi", x), 2, True) for x in self.sites]
        factors += [Factor(("f", b), 2, True) for b in self.bonds]
        factors += [Factor(("s", x), 2) for x in self.sites]
        factors += [Factor(("link", b), n) for b in self.bonds]
        super().__init__(factors, cap)

    def c(self, x) -> sp.csr_matrix:
        return self.local(("chi", x), MAJORANA_X)

    def alpha(self, b) -> sp.csr_matrix:
        return self.local(("f", b), FERMION_A + FERMION_ADAG)

    def beta(self, b) -> sp.csr_matrix:
        return self.local(("f", b), 1j * (FERMION_A - FERMION_ADAG))

    def chi_parity(self, x) -> sp.csr_matrix:
        return sp.diags(self.diag_of(("chi", x), [1.0, -1.0])).tocsr()

    def sigma_plus(self, x) -> sp.csr_matrix:
        return self.local(("s", x), SIGMA_PLUS)

    def eta_dag(self, x) -> sp.csr_matrix:
        return self.sigma_plus(x) @ self.chi_parity(x)

    def psi_dag(self, x) -> sp.csr_matrix:
        return sp.csr_matrix(self.c(x) @ self.eta_dag(x))

    def psi(self, x) -> sp.csr_matrix:
        return sp.csr_matrix(self.psi_dag(x).getH())

    def U(self, b) -> sp.csr_matrix:
        return self.local(("link", b), self.link_space.U())

    def field_diag(self, b) -> np.ndarray:
        return self.diag_of(("link", b), self.link_space.window.astype(float))

    def fermion_parity(self) -> sp.csr_matrix:
        d = np.ones(self.dim)
        for name in [("chi", x) for x in self.sites] + [("f", b) for b in self.bonds]:
            d = d * self.diag_of(name, [1.0, -1.0])
        return sp.diags(d).tocsr()

    def reference_mask(self) -> np.ndarray:
        """Basis states with ``chi`` and ``f`` in their vacua."""
        mask = np.ones(self.dim, dtype=bool)
        for name in [("chi", x) for x in self.sites] + [("f", b) for b in self.bonds]:
            mask &= self.digits[:, self.index(name)] == 0
        return mask

    def hamiltonian(self, params: HamiltonianParams, electric: bool = True) -> sp.csr_matrix:
        """Gauged fermion chain written through ``psi^dag = c eta^dag``."""
        H = sp.csr_matrix((self.dim, self.dim), dtype=complex)
        for x in self.sites:
            sign = 1.0 if x % 2 == 0 else -1.0
            H = H + params.M * sign * self.sigma_plus(x) @ self.sigma_plus(x).getH()
        for b in self.bonds:
            t = self.psi_dag(b) @ self.U(b) @ self.psi(b + 1)
            H = H + params.eps * (t + t.getH())
        if electric:
            H = H + sp.diags(sum(0.5 * params.g ** 2 * self.field_diag(b) ** 2 for b in self.bonds))
        return sp.csr_matrix(H)


def build_UF_1d(chain: EnlargedChain) -> list:
    """Local factors ``U_F(x) = (i c(x) beta(x))^{E(x-1)} (i c(x) alpha(x))^{E(x)}``.

    ``beta(x)`` is the end Majorana of the link entering ``x``, ``alpha(x)`` the
    start Majorana of the link leaving it. Missing links contribute nothing.
    """
    out = []
    for x in chain.sites:
        u = sp.identity(chain.dim, format="csr", dtype=complex)
        if x - 1 in chain.bonds:
            u = u @ _parity_power(1j * chain.c(x) @ chain.beta(x - 1), chain.field_diag(x - 1))
        if x in chain.bonds:
            u = u @ _parity_power(1j * chain.c(x) @ chain.alpha(x), chain.field_diag(x))
        out.append(sp.csr_matrix(u))
    return out


def uf_product(factors) -> sp.csr_matrix:
    out = factors[0]
    for f in factors[1:]:
        out = out @ f
    return sp.csr_matrix(out)


# -- 1D fermion elimination: symbolic terms -------------------------------------
MAJORANA_SYMBOLS = ("c", "alpha", "beta")


@dataclass(frozen=True)
class Term:
    """``coeff * prod ops`` with ops ``(symbol, site)`` in operator order.

    ``dressed`` marks terms whose cross-site statistics were carried by an
    auxiliary Majorana pair that has since been replaced by its vacuum value.
    """
    coeff: complex
    ops: tuple
    dressed: bool = False

    def symbols(self) -> set:
        return {s for s, _ in self.ops}

    def sites(self, names) -> set:
        return {x for s, x in self.ops if s in names}


def fermionic_terms_1d(n_sites: int, params: HamiltonianParams) -> list:
    """Mass and hopping terms with ``psi^dag = c eta^dag`` (electric part is diagonal)."""
    terms = []
    for x in range(n_sites):
        sign = 1.0 if x % 2 == 0 else -1.0
        terms.append(Term(params.M * sign, (("eta+", x), ("eta-", x))))
    for x in range(n_sites - 1):
        # psi^dag(x) U psi(x+1) = eta^dag(x) c(x) U(x) c(x+1) eta(x+1)
        terms.append(Term(params.eps, (("eta+", x), ("c", x), ("U", x), ("c", x + 1), ("eta-", x + 1))))
        terms.append(Term(params.eps, (("eta+", x + 1), ("c", x + 1), ("U+", x), ("c", x), ("eta-", x))))
    return terms


def conjugate_terms_by_uf(terms) -> list:
    """Apply ``U_F ... U_F^dag`` to each term symbolically.

    ``c(x) U(x) c(x+1) -> xi(x) alpha(x) U(x) beta(x+1)`` with the sign operator
    ``xi(x) = (-1)^{E(x-1)}`` (1 on the first vertex); the conjugate pattern
    maps to ``xi(x) beta(x+1) U^dag(x) alpha(x)``. Terms without Majoranas
    commute with ``U_F`` and pass through.
    """
    out = []
    for t in terms:
        ops = list(t.ops)
        new = []
        i = 0
        while i < len(ops):
            win = ops[i:i + 3]
            if (len(win) == 3 and win[0][0] == "c" and win[2][0] == "c" and win[1][0] in ("U", "U+")):
                b = win[1][1]
                if win[1][0] == "U" and win[0][1] == b and win[2][1] == b + 1:
                    new += [("xi", b), ("alpha", b), ("U", b), ("beta", b)]
                elif win[1][0] == "U+" and win[0][1] == b + 1 and win[2][1] == b:
                    new += [("xi", b), ("beta", b), ("U+", b), ("alpha", b)]
                else:
                    raise ValueError(f"unsupported Majorana pattern {win}")
                i += 3
                continue
            new.append(ops[i])
            i += 1
        out.append(Term(t.coeff, tuple(new), t.dressed))
    return out


def replace_aux_pairs(terms) -> list:
    """Set each ``alpha(b) ... beta(b)`` pair to its vacuum value.

    In the ``f`` vacuum ``alpha(b) beta(b) = -i`` and ``beta(b) alpha(b) = +i``;
    link and sign operators in between commute with both Majoranas.
    """
    out = []
    for t in terms:
        ops = list(t.ops)
        coeff = complex(t.coeff)
        dressed = t.dressed
        for b in sorted(t.sites(("alpha", "beta"))):
            ia = ops.index(("alpha", b)) if ("alpha", b) in ops else None
            ib = ops.index(("beta", b)) if ("beta", b) in ops else None
            if ia is None or ib is None:
                raise ValueError(f"unpaired auxiliary Majorana on link {b}")
            coeff *= -1j if ia < ib else 1j
            ops = [o for o in ops if o not in (("alpha", b), ("beta", b))]
            dressed = True
        out.append(Term(coeff, tuple(ops), dressed))
    return out


def hardcore_substitution(terms) -> list:
    """Replace ``eta^dag, eta`` by ``sigma_+, sigma_-``.

    Refuses terms that still hold a Majorana, and cross-site ``eta`` products
    that were never dressed (their fermionic signs would be lost).
    """
    out = []
    for t in terms:
        left = t.symbols() & set(MAJORANA_SYMBOLS)
        if left:
            raise ValueError(f"residual Majorana operators {sorted(left)} in term {t.ops}")
        if len(t.sites(("eta+", "eta-"))) > 1 and not t.dressed:
            raise ValueError(f"undressed cross-site hard-core term {t.ops}")
        ops = tuple((("sigma+" if s == "eta+" else "sigma-" if s == "eta-" else s), x) for s, x in t.ops)
        out.append(Term(t.coeff, ops, t.dressed))
    return out


def spin_terms_1d(n_sites: int, params: HamiltonianParams) -> list:
    """Full symbolic pipeline from the fermionic chain to spin terms."""
    terms = fermionic_terms_1d(n_sites, params)
    return hardcore_substitution(replace_aux_pairs(conjugate_terms_by_uf(terms)))


# -- spin chain ---------------------------------------------------------------
class SpinChain(TensorSpace):
    """Hard-core spins on vertices and Z_N links of an open chain."""

    def __init__(self, geometry: LatticeGeometry, n: int = 4, cap: int | None = None):
        _check_chain(geometry)
        self.geometry = geometry
        self.n = n
        self.link_space = ZnLinkSpace(n)
        self.sites = [v[0] for v in geometry.vertices()]
        self.bonds = [l.origin[0] for l in geometry.links]
        factors = [Factor(("s", x), 2) for x in self.sites]
        factors += [Factor(("link", b), n) for b in self.bonds]
        super().__init__(factors, cap)

    def field_diag(self, b) -> np.ndarray:
        return self.diag_of(("link", b), self.link_space.window.astype(float))

    def number_diag(self, x) -> np.ndarray:
        return self.diag_of(("s", x), [0.0, 1.0])

    def gauss_diag(self, x) -> np.ndarray:
        """``E(x) - E(x-1) - (n(x) - [x odd])`` folded into the Z_N window."""
        g = -(self.number_diag(x) - (x % 2))
        if x in self.bonds:
            g = g + self.field_diag(x)
        if x - 1 in self.bonds:
            g = g - self.field_diag(x - 1)
        return fold(np.rint(g).astype(np.int64), self.n).astype(float)

    def sector_mask(self) -> np.ndarray:
        mask = np.ones(self.dim, dtype=bool)
        for x in self.sites:
            mask &= self.gauss_diag(x) == 0
        return mask

    def symbol(self, name: str, x) -> sp.csr_matrix:
        if name == "sigma+":
            return self.local(("s", x), SIGMA_PLUS)
        if name == "sigma-":
            return self.local(("s", x), SIGMA_MINUS)
        if name == "U":
            return self.local(("link", x), self.link_space.U())
        if name == "U+":
            return self.local(("link", x), self.link_space.U().getH())
        if name == "xi":
            if x - 1 not in self.bonds:
                return sp.identity(self.dim, format="csr")
            e = np.rint(self.field_diag(x - 1)).astype(np.int64)
            return sp.diags(np.where(e % 2 == 0, 1.0, -1.0)).tocsr()
        raise ValueError(f"symbol {name!r} has no spin-chain representation")

    def operator(self, terms) -> sp.csr_matrix:
        H = sp.csr_matrix((self.dim, self.dim), dtype=complex)
        for t in terms:
            op = sp.identity(self.dim, format="csr", dtype=complex)
            for name, x in t.ops:
                op = op @ self.symbol(name, x)
            H = H + t.coeff * op
        return sp.csr_matrix(H)


def eliminate_fermions_1d(geometry: LatticeGeometry, params: HamiltonianParams, n: int = 4,
                          electric: bool = True) -> tuple:
    """Spin-model Hamiltonian equivalent to the gauged fermion chain.

    Returns ``(SpinChain, H_spin)``; no fermionic operator is left.
    """
    chain = SpinChain(geometry, n)
    H = chain.operator(spin_terms_1d(len(chain.sites), params))
    if electric:
        H = H + sp.diags(sum(0.5 * params.g ** 2 * chain.field_diag(b) ** 2 for b in chain.bonds))
    return chain, sp.csr_matrix(H)


def fermionic_chain_hamiltonian(system: GaugedSystem, params: HamiltonianParams,
                                electric: bool = True) -> sp.csr_matrix:
    """Mass, gauged hopping and (optionally) electric energy of a chain."""
    H = build_hamiltonian(system, params, "H_f_gauged")
    if electric:
        H = H + sp.diags(electric_diag(system, params))
    return sp.csr_matrix(H)


def sector_spectrum(H, mask) -> np.ndarray:
    H = sp.csr_matrix(H)[mask][:, mask].toarray()
    return np.linalg.eigvalsh(H)


@dataclass
class EliminationReport:
    fermion_spectrum: np.ndarray
    spin_spectrum: np.ndarray
    max_deviation: float
    uf_commutator: float = field(default=np.nan)


def compare_spectra_1d(n_sites: int, params: HamiltonianParams, n: int = 4) -> EliminationReport:
    """Physical-sector spectra of the fermionic and spin chains."""
    geom = LatticeGeometry(n_sites, 1, "open")
    fsys = GaugedSystem(geom, n)
    ef = sector_spectrum(fermionic_chain_hamiltonian(fsys, params), sector_mask(fsys))
    chain, Hs = eliminate_fermions_1d(geom, params, n)
    es = sector_spectrum(Hs, chain.sector_mask())
    dev = float(np.max(np.abs(ef - es))) if ef.shape == es.shape else np.inf
    return EliminationReport(ef, es, dev)

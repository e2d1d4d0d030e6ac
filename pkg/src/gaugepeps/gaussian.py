"""Fermionic Gaussian states in the Majorana covariance representation.

A state is stored as ``exp(log_norm)`` times a normalised Gaussian state with
covariance ``Gamma_kl = (i/2) <[c_k, c_l]>``, where mode ``j`` carries the
Majoranas ``c_{2j} = f_j + f_j^dag`` and ``c_{2j+1} = i (f_j - f_j^dag)``.
With this convention the vacuum of one mode is ``[[0, 1], [-1, 0]]`` and
``<f^dag f> = (1 - Gamma_{2j, 2j+1}) / 2``.

Ladder operators are addressed as ``(mode, dagger)`` tuples.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .pfaffian import slog_pfaffian

ANTISYM_TOL = 1e-10


class ZeroNormError(ArithmeticError):
    """A projection annihilated the state (orthogonal Gaussian projection)."""


@dataclass(frozen=True)
class CovarianceState:
    gamma: np.ndarray
    log_norm: float = 0.0
    labels: tuple = field(default=())

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] % 2:
            raise ValueError(f"covariance must be a square even-sized matrix, got {g.shape}")
        object.__setattr__(self, "gamma", g)
        if self.labels and len(self.labels) != g.shape[0] // 2:
            raise ValueError("one label per mode expected")

    @property
    def n_modes(self) -> int:
        return self.gamma.shape[0] // 2

    def mode_index(self, label) -> int:
        if isinstance(label, (int, np.integer)):
            return int(label)
        return self.labels.index(label)

    def is_pure(self, tol: float = 1e-10) -> bool:
        g = self.gamma
        return bool(np.allclose(g @ g.T, np.eye(g.shape[0]), atol=tol))

    def validate(self, tol: float = ANTISYM_TOL) -> None:
        g = self.gamma
        if np.max(np.abs(g + g.T), initial=0.0) > tol:
            raise ValueError("covariance is not antisymmetric")
        if g.size and np.linalg.norm(g, 2) > 1 + tol:
            raise ValueError("covariance has singular values above 1")

    def with_log_norm(self, log_norm: float) -> "CovarianceState":
        return CovarianceState(self.gamma, log_norm, self.labels)


def vacuum(n_modes: int, labels=()) -> CovarianceState:
    block = np.array([[0.0, 1.0], [-1.0, 0.0]])
    return CovarianceState(np.kron(np.eye(n_modes), block), 0.0, tuple(labels))


def from_antisymmetric(K, labels=()) -> CovarianceState:
    """Normalised ``exp(1/2 f^dag K f^dag)|0>`` with its norm in ``log_norm``.

    The state is annihilated by ``d_i = f_i - sum_j K_ij f_j^dag``; the
    covariance is ``2 Im P`` with ``P`` the orthogonal projector onto the
    span of those annihilators written in Majorana components.
    """
    K = np.asarray(K, dtype=complex)
    n = K.shape[0]
    if np.max(np.abs(K + K.T), initial=0.0) > ANTISYM_TOL * max(1.0, np.max(np.abs(K), initial=0.0)):
        raise ValueError("pairing matrix must be antisymmetric")
    if not np.all(np.isfinite(K)):
        raise ValueError("pairing matrix has non-finite entries")
    if n == 0:
        return CovarianceState(np.zeros((0, 0)), 0.0, tuple(labels))
    I = np.eye(n)
    w = np.zeros((n, 2 * n), dtype=complex)
    w[:, 0::2] = 0.5 * (I - K)
    w[:, 1::2] = -0.5j * (I + K)
    Q, _ = np.linalg.qr(w.T)
    P = Q @ Q.conj().T
    gamma = 2.0 * P.imag
    gamma = 0.5 * (gamma - gamma.T)
    # <psi|psi> = sqrt(det(1 + K^dag K))
    _, logdet = np.linalg.slogdet(I + K.conj().T @ K)
    return CovarianceState(gamma, 0.25 * logdet, tuple(labels))


def from_pairing(T, labels=()) -> CovarianceState:
    """State ``exp(sum_ij T_ij a_i^dag b_j^dag)|0>`` on modes ``(a..., b...)``."""
    T = np.atleast_2d(np.asarray(T, dtype=complex))
    na, nb = T.shape
    K = np.zeros((na + nb, na + nb), dtype=complex)
    K[:na, na:] = T
    K[na:, :na] = -T.T
    return from_antisymmetric(K, labels)


def direct_sum(*states: CovarianceState) -> CovarianceState:
    """Product state of ``states`` with modes concatenated in order."""
    gamma = sla.block_diag(*[s.gamma for s in states]) if states else np.zeros((0, 0))
    labels = ()
    if all(s.labels for s in states):
        labels = tuple(l for s in states for l in s.labels)
    return CovarianceState(gamma, float(sum(s.log_norm for s in states)), labels)


def permute_modes(state: CovarianceState, order) -> CovarianceState:
    """New mode ``p`` is old mode ``order[p]``."""
    order = [state.mode_index(m) for m in order]
    if sorted(order) != list(range(state.n_modes)):
        raise ValueError("order must be a permutation of the modes")
    maj = np.array([[2 * m, 2 * m + 1] for m in order], dtype=int).ravel()
    labels = tuple(state.labels[m] for m in order) if state.labels else ()
    return CovarianceState(state.gamma[np.ix_(maj, maj)], state.log_norm, labels)


def rotation_block(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, s], [-s, c]])


def rotate_mode(state: CovarianceState, mode, angle: float) -> CovarianceState:
    """Apply ``exp(i angle f^dag f)`` to one mode."""
    return rotate_modes(state, {mode: angle})


def rotate_modes(state: CovarianceState, angles: dict) -> CovarianceState:
    """Apply ``prod_m exp(i angle_m n_m)`` for a ``{mode: angle}`` mapping."""
    g = state.gamma.copy()
    for mode, angle in angles.items():
        if angle == 0:
            continue
        j = state.mode_index(mode)
        if not 0 <= j < state.n_modes:
            raise IndexError(f"mode {mode!r} out of range")
        sl = slice(2 * j, 2 * j + 2)
        R = rotation_block(angle)
        g[sl, :] = R @ g[sl, :]
        g[:, sl] = g[:, sl] @ R.T
    return CovarianceState(g, state.log_norm, state.labels)


def project(state: CovarianceState, modes, bond: CovarianceState,
            zero_tol: float = 1e-12) -> CovarianceState:
    """Contract ``modes`` of ``state`` with the pure Gaussian ``bond`` bra.

    Returns ``<bond|_modes |state>`` on the remaining modes. The success
    probability ``Tr(rho_modes rho_bond) = 2^-m |Pf(Gamma_vv + Gamma_bond)|``
    enters ``log_norm`` (halved, as log_norm is the log of the norm, not its
    square) together with the bond's own log_norm. The conditional covariance
    is the Schur complement ``Gamma_pp + Gamma_pv (Gamma_vv + Gamma_bond)^-1 Gamma_pv^T``.

    Raises :class:`ZeroNormError` when the projection annihilates the state.
    """
    modes = [state.mode_index(m) for m in modes]
    if len(set(modes)) != len(modes):
        raise ValueError("projected modes must be distinct")
    if bond.n_modes != len(modes):
        raise ValueError(f"bond has {bond.n_modes} modes, {len(modes)} selected")
    rest = [m for m in range(state.n_modes) if m not in modes]
    v = np.array([[2 * m, 2 * m + 1] for m in modes], dtype=int).ravel()
    p = np.array([[2 * m, 2 * m + 1] for m in rest], dtype=int).ravel()
    g = state.gamma
    kernel = g[np.ix_(v, v)] + bond.gamma
    sign, log_pf = slog_pfaffian(kernel)
    log_prob = log_pf - len(modes) * np.log(2.0)
    if log_pf == -np.inf:
        raise ZeroNormError("Gaussian projection has zero overlap")
    if kernel.size:
        # relative test: the kernel's entries are O(1), so its smallest
        # singular value measures how close the overlap is to zero
        svals = np.linalg.svd(kernel, compute_uv=False)
        if svals[-1] < zero_tol * max(1.0, svals[0]):
            raise ZeroNormError("Gaussian projection has zero overlap")
    g_pv = g[np.ix_(p, v)]
    g_out = g[np.ix_(p, p)] + g_pv @ np.linalg.solve(kernel, g_pv.T)
    g_out = 0.5 * (g_out - g_out.T)
    labels = tuple(state.labels[m] for m in rest) if state.labels else ()
    return CovarianceState(g_out, state.log_norm + bond.log_norm + 0.5 * log_prob, labels)


def project_pair(state, modes_a, modes_b, bond) -> CovarianceState:
    """Contract the union of ``modes_a`` and ``modes_b`` with ``bond``."""
    return project(state, list(modes_a) + list(modes_b), bond)


def norm_squared(state: CovarianceState) -> float:
    return float(np.exp(2.0 * state.log_norm))


def _ladder_vector(state, op) -> np.ndarray:
    mode, dagger = op
    j = state.mode_index(mode)
    v = np.zeros(2 * state.n_modes, dtype=complex)
    # f = (c_{2j} - i c_{2j+1}) / 2 ;  f^dag = (c_{2j} + i c_{2j+1}) / 2
    v[2 * j] = 0.5
    v[2 * j + 1] = 0.5j if dagger else -0.5j
    return v


def majorana_two_point(state: CovarianceState) -> np.ndarray:
    """Matrix ``<c_k c_l> = delta_kl - i Gamma_kl``."""
    return np.eye(state.gamma.shape[0]) - 1j * state.gamma


def two_point(state: CovarianceState, op1, op2) -> complex:
    """Normalised ``<op1 op2>``."""
    C = majorana_two_point(state)
    return complex(_ladder_vector(state, op1) @ C @ _ladder_vector(state, op2))


def four_point(state: CovarianceState, op1, op2, op3, op4) -> complex:
    """Normalised ``<op1 op2 op3 op4>`` by Wick's theorem."""
    C = majorana_two_point(state)
    v = [_ladder_vector(state, o) for o in (op1, op2, op3, op4)]

    def w(a, b):
        return v[a] @ C @ v[b]

    return complex(w(0, 1) * w(2, 3) - w(0, 2) * w(1, 3) + w(0, 3) * w(1, 2))


def correlation_matrix(state: CovarianceState) -> np.ndarray:
    """``C_ij = <f_i^dag f_j>`` for all mode pairs."""
    n = state.n_modes
    G = state.gamma
    out = np.empty((n, n), dtype=complex)
    # vectorised form of two_point with dagger/annihilator vectors
    Cm = np.eye(2 * n) - 1j * G
    Vd = np.zeros((n, 2 * n), dtype=complex)
    Va = np.zeros((n, 2 * n), dtype=complex)
    idx = np.arange(n)
    Vd[idx, 2 * idx] = 0.5
    Vd[idx, 2 * idx + 1] = 0.5j
    Va[idx, 2 * idx] = 0.5
    Va[idx, 2 * idx + 1] = -0.5j
    out[:] = Vd @ Cm @ Va.T
    return out


def occupation(state: CovarianceState, mode) -> float:
    j = state.mode_index(mode)
    return float(0.5 * (1.0 - state.gamma[2 * j, 2 * j + 1]))


def parity(state: CovarianceState) -> float:
    """Fermionic parity ``<(-1)^N>`` of a pure state, ``Pf(Gamma)``."""
    sign, logabs = slog_pfaffian(state.gamma)
    return float(np.real(sign) * np.exp(logabs))

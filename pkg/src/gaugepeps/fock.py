"""Dense Fock-space vectors with Jordan-Wigner ordering.

Brute-force reference for the Gaussian machinery: every state here is an
explicit amplitude vector, so nothing in this module relies on covariance
matrices or Pfaffians.

Mode ``j`` of an ``n``-mode register sits on bit ``n - 1 - j`` of the basis
index (mode 0 is the most significant bit, matching ``np.kron`` ordering).
Basis state bits ``(n_0, ..., n_{n-1})`` stand for
``(f_0^dag)^{n_0} ... (f_{n-1}^dag)^{n_{n-1}} |0>``.
"""
from __future__ import annotations

import itertools

import numpy as np

MAX_MODES = 22


def _check(n_modes):
    if n_modes > MAX_MODES:
        raise MemoryError(f"{n_modes} modes exceeds the dense Fock limit of {MAX_MODES}")


def occupations(n_modes: int) -> np.ndarray:
    """Boolean array ``(2**n, n)`` of mode occupations per basis index."""
    _check(n_modes)
    idx = np.arange(2 ** n_modes)
    shifts = np.arange(n_modes - 1, -1, -1)
    return ((idx[:, None] >> shifts) & 1).astype(bool)


def _bit(n_modes, j):
    return 1 << (n_modes - 1 - j)


def _jw_sign(n_modes, j):
    idx = np.arange(2 ** n_modes)
    mask = 0
    for k in range(j):
        mask |= _bit(n_modes, k)
    count = np.zeros(idx.shape, dtype=np.int64)
    m = idx & mask
    while np.any(m):
        count += m & 1
        m = m >> 1
    return np.where(count % 2 == 0, 1.0, -1.0)


def vacuum(n_modes: int) -> np.ndarray:
    _check(n_modes)
    v = np.zeros(2 ** n_modes, dtype=complex)
    v[0] = 1.0
    return v


def create(vec: np.ndarray, n_modes: int, j: int) -> np.ndarray:
    b = _bit(n_modes, j)
    idx = np.arange(vec.size)
    src = idx[(idx & b) == 0]
    out = np.zeros_like(vec)
    out[src | b] = vec[src] * _jw_sign(n_modes, j)[src]
    return out


def annihilate(vec: np.ndarray, n_modes: int, j: int) -> np.ndarray:
    b = _bit(n_modes, j)
    idx = np.arange(vec.size)
    src = idx[(idx & b) != 0]
    out = np.zeros_like(vec)
    out[src ^ b] = vec[src] * _jw_sign(n_modes, j)[src]
    return out


def apply(vec, n_modes, op):
    """Apply a single ladder operator ``(mode, dagger)``."""
    j, dagger = op
    return create(vec, n_modes, j) if dagger else annihilate(vec, n_modes, j)


def apply_string(vec, n_modes, ops):
    """Apply ``ops[0] ops[1] ... ops[-1]`` (rightmost acts first)."""
    for op in reversed(list(ops)):
        vec = apply(vec, n_modes, op)
    return vec


def majorana(vec, n_modes, k):
    """``c_{2j} = f_j + f_j^dag``, ``c_{2j+1} = i (f_j - f_j^dag)``."""
    j, odd = divmod(k, 2)
    if odd:
        return 1j * (annihilate(vec, n_modes, j) - create(vec, n_modes, j))
    return annihilate(vec, n_modes, j) + create(vec, n_modes, j)


def number_phase(vec, n_modes, j, angle):
    """``exp(i angle n_j) vec``."""
    occ = (np.arange(vec.size) & _bit(n_modes, j)) != 0
    return np.where(occ, np.exp(1j * angle), 1.0) * vec


def parity(n_modes: int) -> np.ndarray:
    return np.where(occupations(n_modes).sum(axis=1) % 2 == 0, 1.0, -1.0)


def pairing_state(K: np.ndarray) -> np.ndarray:
    """Unnormalised ``exp(1/2 sum_ij K_ij f_i^dag f_j^dag) |0>``.

    The exponent is a sum of commuting nilpotent pair creators, so the
    exponential factorises into ``prod_{i<j} (1 + K_ij f_i^dag f_j^dag)``.
    """
    K = np.asarray(K, dtype=complex)
    n = K.shape[0]
    vec = vacuum(n)
    for i, j in itertools.combinations(range(n), 2):
        if K[i, j] != 0:
            vec = vec + K[i, j] * create(create(vec, n, j), n, i)
    return vec


def antisymmetric_from_pairs(n_modes, pairs) -> np.ndarray:
    """``K`` such that ``1/2 f^dag K f^dag = sum c f_i^dag f_j^dag`` over ``(i, j, c)``."""
    K = np.zeros((n_modes, n_modes), dtype=complex)
    for i, j, c in pairs:
        K[i, j] += c
        K[j, i] -= c
    return K


def expectation(vec, n_modes, ops) -> complex:
    """Normalised ``<v| ops |v> / <v|v>``."""
    norm = np.vdot(vec, vec).real
    return np.vdot(vec, apply_string(vec, n_modes, ops)) / norm


def covariance(vec, n_modes) -> np.ndarray:
    """Majorana covariance ``Gamma_kl = (i/2) <[c_k, c_l]>`` of a dense state."""
    norm = np.vdot(vec, vec).real
    cs = [majorana(vec, n_modes, k) for k in range(2 * n_modes)]
    G = np.zeros((2 * n_modes, 2 * n_modes))
    for k in range(2 * n_modes):
        for l in range(k + 1, 2 * n_modes):
            # <c_k c_l> = <c_k^dag v | c_l v>
            val = 1j * np.vdot(cs[k], cs[l]) / norm
            G[k, l] = val.real
            G[l, k] = -val.real
    return G


def permutation_signs(n_modes: int, order) -> np.ndarray:
    """Fermionic sign per basis state (old indexing) when modes are reordered.

    ``order[p]`` is the old mode that lands on new position ``p``.
    """
    occ = occupations(n_modes)
    sign = np.ones(2 ** n_modes)
    order = list(order)
    for p in range(n_modes):
        for q in range(p + 1, n_modes):
            if order[p] > order[q]:
                both = occ[:, order[p]] & occ[:, order[q]]
                sign[both] *= -1
    return sign


def permute_modes(vec, n_modes, order) -> np.ndarray:
    """Re-express ``vec`` with modes reordered so new mode ``p`` is old ``order[p]``."""
    order = list(order)
    if sorted(order) != list(range(n_modes)):
        raise ValueError("order must be a permutation of the modes")
    occ = occupations(n_modes)
    new_idx = np.zeros(2 ** n_modes, dtype=np.int64)
    for p, old in enumerate(order):
        new_idx |= occ[:, old].astype(np.int64) << (n_modes - 1 - p)
    out = np.zeros_like(vec)
    out[new_idx] = vec * permutation_signs(n_modes, order)
    return out


def project_modes(vec, n_modes, modes, bra) -> np.ndarray:
    """Partial inner product ``<bra|_modes |vec>`` leaving the other modes.

    ``bra`` is a dense vector over ``modes`` (in the listed order). Remaining
    modes keep their relative order.
    """
    modes = list(modes)
    rest = [m for m in range(n_modes) if m not in modes]
    moved = permute_modes(vec, n_modes, modes + rest)
    block = moved.reshape(2 ** len(modes), 2 ** len(rest))
    return np.conj(bra) @ block

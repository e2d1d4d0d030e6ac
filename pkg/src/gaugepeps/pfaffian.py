"""Pfaffians of antisymmetric matrices by pivoted Parlett-Reid elimination."""
from __future__ import annotations

import numpy as np


def _check_antisymmetric(A, tol):
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("Pfaffian needs a square matrix")
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if A.size and np.max(np.abs(A + A.T)) > tol * scale:
        raise ValueError("matrix is not antisymmetric")
    return A


def slog_pfaffian(A, tol: float = 1e-10):
    """Return ``(sign, logabs)`` with ``Pf(A) = sign * exp(logabs)``.

    ``sign`` is +-1 for real input and a unit complex number otherwise; a
    singular matrix gives ``(0, -inf)``. Row/column exchanges are counted
    exactly, the magnitude accumulates in log space.
    """
    A = _check_antisymmetric(A, tol)
    n = A.shape[0]
    dtype = np.result_type(A.dtype, np.float64)
    if n == 0:
        return dtype.type(1), 0.0
    if n % 2:
        return dtype.type(0), -np.inf
    A = np.array(A, dtype=dtype, copy=True)
    sign = dtype.type(1)
    logabs = 0.0
    for k in range(0, n - 1, 2):
        # pivot: largest entry in column k below the diagonal
        kp = k + 1 + int(np.argmax(np.abs(A[k + 1:, k])))
        if kp != k + 1:
            A[[k + 1, kp], :] = A[[kp, k + 1], :]
            A[:, [k + 1, kp]] = A[:, [kp, k + 1]]
            sign = -sign
        pivot = A[k, k + 1]
        if pivot == 0:
            return dtype.type(0), -np.inf
        mag = abs(pivot)
        sign = sign * (pivot / mag)
        logabs += np.log(mag)
        if k + 2 < n:
            tau = A[k, k + 2:] / pivot
            # A' = A + tau (x) A[k+1] - A[k+1] (x) tau restricted to trailing block
            col = A[k + 2:, k + 1]
            A[k + 2:, k + 2:] += np.outer(tau, col) - np.outer(col, tau)
    return sign, logabs


def pfaffian(A, tol: float = 1e-10):
    sign, logabs = slog_pfaffian(A, tol)
    if logabs == -np.inf:
        return sign * 0
    return sign * np.exp(logabs)


def pfaffian_bruteforce(A):
    """Sum over perfect matchings; exponential, for tests only."""
    A = np.asarray(A)
    n = A.shape[0]
    if n % 2:
        return 0.0

    def rec(items):
        if not items:
            return 1.0
        first, rest = items[0], items[1:]
        total = 0.0
        for i, other in enumerate(rest):
            sub = rest[:i] + rest[i + 1:]
            total += (-1) ** i * A[first, other] * rec(sub)
        return total

    return rec(list(range(n)))

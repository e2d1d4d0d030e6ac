import numpy as np
import pytest

from gaugepeps.pfaffian import pfaffian, pfaffian_bruteforce, slog_pfaffian


def _antisym(rng, n, complex_=False):
    A = rng.normal(size=(n, n))
    if complex_:
        A = A + 1j * rng.normal(size=(n, n))
    return A - A.T


@pytest.mark.parametrize("n", [2, 4, 6, 8])
@pytest.mark.parametrize("complex_", [False, True])
def test_matches_bruteforce(n, complex_):
    rng = np.random.default_rng(n)
    A = _antisym(rng, n, complex_)
    assert abs(pfaffian(A) - pfaffian_bruteforce(A)) <= 1e-10 * max(1.0, abs(pfaffian_bruteforce(A)))


def test_square_is_determinant():
    rng = np.random.default_rng(1)
    for n in (2, 6, 10, 16):
        A = _antisym(rng, n, True)
        assert pfaffian(A) ** 2 == pytest.approx(np.linalg.det(A), rel=1e-9)


def test_odd_empty_and_singular():
    assert pfaffian(np.zeros((3, 3))) == 0
    assert pfaffian(np.zeros((0, 0))) == 1
    assert slog_pfaffian(np.zeros((4, 4)))[1] == -np.inf


def test_canonical_block_sign():
    J = np.kron(np.eye(3), np.array([[0.0, 1.0], [-1.0, 0.0]]))
    assert pfaffian(J) == pytest.approx(1.0)
    P = np.eye(6)[[1, 0, 2, 3, 4, 5]]
    assert pfaffian(P @ J @ P.T) == pytest.approx(-1.0)


def test_log_space_survives_overflow():
    A = 1e200 * np.kron(np.eye(4), np.array([[0.0, 1.0], [-1.0, 0.0]]))
    sign, logabs = slog_pfaffian(A)
    assert sign == 1 and logabs == pytest.approx(4 * np.log(1e200))


def test_rejects_non_antisymmetric():
    with pytest.raises(ValueError):
        pfaffian(np.ones((2, 2)))
    with pytest.raises(ValueError):
        pfaffian(np.zeros((2, 3)))

"""Random instance generators and small independent oracles for the tests."""

import numpy as np

EX1_A = np.array([[0.1, 1.0], [0.0, 0.0]])
EX1_B = np.array([[0.1, 0.0], [1.0, 0.0]])

SWAP_A = np.array([[0.0, 0.75], [1.0, 0.0]])
SWAP_B = np.array([[0.0, 1.0], [0.75, 0.0]])

LES_A = np.array([[0.1, 0.85, 0.15], [0.9, 0.0, 0.0], [0.0, 0.7, 0.2]])
LES_B = np.array([[0.6, 0.1, 1.0], [0.5, 0.0, 0.0], [0.0, 0.35, 0.45]])
LES_D = np.array([[0.0, 0.0, 0.0], [0.25, 0.0, 0.0], [0.0, 0.2, 0.0]])


def rho_eig(a):
    """Reference spectral radius straight from LAPACK."""
    return float(np.max(np.abs(np.linalg.eigvals(a))))


def rho_2x2(a):
    """Closed-form spectral radius of a real 2x2 matrix."""
    tr = a[0, 0] + a[1, 1]
    det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    disc = tr * tr / 4 - det
    if disc >= 0:
        r = np.sqrt(disc)
        return max(abs(tr / 2 + r), abs(tr / 2 - r))
    return float(np.sqrt(det))


def random_nonneg(rng, n, target_rho):
    """Dense uniform matrix rescaled to the requested spectral radius."""
    a = rng.random((n, n))
    return a * (target_rho / rho_eig(a))


def random_leslie(rng, n, max_rho=None, corner=True):
    a = np.zeros((n, n))
    a[0] = rng.random(n)
    idx = np.arange(1, n)
    a[idx, idx - 1] = rng.random(n - 1)
    if corner:
        a[n - 1, n - 1] = rng.random()
    if max_rho is not None:
        r = rho_eig(a)
        if r > max_rho:
            a *= max_rho / r
    return a


def reachability_irreducible(a):
    """Irreducibility via positivity of (I + A)^(n-1), independent of graph search."""
    n = a.shape[0]
    p = np.linalg.matrix_power(np.eye(n) + (a > 0), max(n - 1, 1))
    return bool(np.all(p > 0))


def coupled(a, b, d):
    return np.block([[a - d, d], [d, b - d]])

"""Random test objects: colligations and row contractions."""
from __future__ import annotations

import numpy as np

from .colligation import Colligation
from .sampling import random_matrix, random_unitary


def unitary_shapes(max_d: int = 3, max_n: int = 6, max_pq: int = 3) -> list[tuple[int, int, int, int]]:
    """All (d, n, p, q) with n >= 1 admitting a unitary colligation, i.e. n + p = dn + q."""
    out = []
    for d in range(1, max_d + 1):
        for n in range(1, max_n + 1):
            for q in range(0, max_pq + 1):
                p = (d - 1) * n + q
                if 0 <= p <= max_pq:
                    out.append((d, n, p, q))
    return out


def random_unitary_colligation(d: int, n: int, q: int, rng: np.random.Generator) -> Colligation:
    p = (d - 1) * n + q
    U = random_unitary(n + p, rng)
    return Colligation.from_matrix(U, d, n)


def random_contractive_colligation(d: int, n: int, p: int, q: int, rng: np.random.Generator,
                                   norm: float = 0.9) -> Colligation:
    M = random_matrix(d * n + q, n + p, rng)
    M *= norm / np.linalg.norm(M, 2)
    return Colligation.from_matrix(M, d, n)


def random_row_contraction_blocks(d: int, n: int, rng: np.random.Generator, norm: float = 0.9) -> list[np.ndarray]:
    """Generic (noncommuting) tuple with ``||[T_1 ... T_d]|| = norm``."""
    row = random_matrix(n, d * n, rng)
    row *= norm / np.linalg.norm(row, 2)
    return [row[:, k * n:(k + 1) * n] for k in range(d)]


def random_commuting_blocks(d: int, n: int, rng: np.random.Generator, norm: float = 0.9) -> list[np.ndarray]:
    """Commuting tuple: polynomials in one random matrix, rescaled to a row contraction."""
    M = random_matrix(n, n, rng) / np.sqrt(2 * n)
    mats = []
    for _ in range(d):
        c = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        mats.append(c[0] * np.eye(n) + c[1] * M + c[2] * M @ M)
    row = np.hstack(mats)
    s = norm / np.linalg.norm(row, 2)
    return [s * m for m in mats]


def spherical_blocks(d: int, rng: np.random.Generator) -> list[np.ndarray]:
    """A random point of the unit sphere as a 1x1 row coisometry."""
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    v /= np.linalg.norm(v)
    return [np.array([[x]]) for x in v]


def direct_sum(*tuples: list[np.ndarray]) -> list[np.ndarray]:
    d = len(tuples[0])
    out = []
    for k in range(d):
        blocks = [t[k] for t in tuples]
        size = sum(b.shape[0] for b in blocks)
        M = np.zeros((size, size), dtype=complex)
        r = 0
        for b in blocks:
            M[r:r + b.shape[0], r:r + b.shape[0]] = b
            r += b.shape[0]
        out.append(M)
    return out


def conjugate(blocks: list[np.ndarray], Q: np.ndarray) -> list[np.ndarray]:
    return [Q @ b @ Q.conj().T for b in blocks]


def mixed_row_contraction_blocks(rng: np.random.Generator, max_d: int = 3, max_n: int = 5) -> list[np.ndarray]:
    """Random tuple drawn from a mixture of generic, commuting, spherical and direct-sum families."""
    d = int(rng.integers(1, max_d + 1))
    kind = int(rng.integers(0, 6))
    if kind == 0:
        n = int(rng.integers(1, max_n + 1))
        return random_row_contraction_blocks(d, n, rng, norm=float(rng.uniform(0.3, 1.0)))
    if kind == 1:
        n = int(rng.integers(1, max_n + 1))
        return random_commuting_blocks(d, n, rng, norm=float(rng.uniform(0.3, 1.0)))
    if kind == 2:
        k = int(rng.integers(1, max_n + 1))
        return conjugate(direct_sum(*[spherical_blocks(d, rng) for _ in range(k)]), random_unitary(k, rng))
    n1 = int(rng.integers(1, max_n))
    n2 = int(rng.integers(1, max_n - n1 + 1))
    first = (random_row_contraction_blocks(d, n1, rng, norm=float(rng.uniform(0.3, 1.0)))
             if kind in (3, 5) else random_commuting_blocks(d, n1, rng))
    if kind == 5:
        second = random_row_contraction_blocks(d, n2, rng, norm=1.0)
    else:
        second = direct_sum(*[spherical_blocks(d, rng) for _ in range(n2)])
    T = direct_sum(first, second)
    return conjugate(T, random_unitary(T[0].shape[0], rng))

"""Deterministic sample points in the open unit ball of C^d."""
from __future__ import annotations

import numpy as np
from scipy.stats import qmc

DEFAULT_RADIUS = 0.9


def ball_points(d: int, count: int, seed: int = 0, radius: float = DEFAULT_RADIUS) -> np.ndarray:
    """``count`` points uniformly distributed in the ball of the given radius (rows)."""
    rng = np.random.default_rng(seed)
    if count == 0 or d == 0:
        return np.zeros((count, d), dtype=complex)
    g = rng.standard_normal((count, d)) + 1j * rng.standard_normal((count, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(count) ** (1.0 / (2 * d))
    return g * r[:, None]


def sample_pairs(d: int, count: int, seed: int = 0, radius: float = DEFAULT_RADIUS) -> list[tuple[np.ndarray, np.ndarray]]:
    pts = ball_points(d, 2 * count, seed=seed, radius=radius)
    return [(pts[2 * k], pts[2 * k + 1]) for k in range(count)]


def grid_points(d: int, count: int, radius: float = DEFAULT_RADIUS) -> np.ndarray:
    """Fixed quasi-random (unscrambled Halton) grid; the first point is the origin."""
    if count == 0 or d == 0:
        return np.zeros((count, d), dtype=complex)
    u = qmc.Halton(d=2 * d, scramble=False).random(count)[1:]
    w = 2.0 * u - 1.0
    c = np.vstack([np.zeros((1, d), dtype=complex), w[:, 0::2] + 1j * w[:, 1::2]])
    norms = np.linalg.norm(c, axis=1)
    scale = np.where(norms > 1.0, 1.0 / np.where(norms > 0, norms, 1.0), 1.0)
    return radius * c * scale[:, None]


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR with phase correction."""
    if n == 0:
        return np.zeros((0, 0), dtype=complex)
    Z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    ph = np.diag(R) / np.abs(np.diag(R))
    return Q * ph[None, :]


def random_matrix(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))

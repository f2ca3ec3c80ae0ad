"""Truncated matrix-valued power series.

Two flavours are provided:

* :class:`CommSeries` -- commuting variables ``z_1..z_d``, keyed by
  multi-indices (tuples of nonnegative ints of length ``d``);
* :class:`NcSeries` -- noncommuting indeterminates, keyed by words
  (tuples of letters in ``1..d``).

Word conventions: a word ``v = (i_1, ..., i_N)`` is read left to right, the
monomial is ``z_{i_1} ... z_{i_N}`` and ``M^v = M_{i_1} ... M_{i_N}``.  With
these conventions the coefficient of ``z^v`` in ``(I - sum_k z_k M_k)^{-1}``
is exactly ``M^v``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import factorial
from typing import Callable, Dict, Iterator, Mapping, Sequence, Tuple

import numpy as np

from .errors import DimensionMismatch, OrderZero
from .matcore import as_matrix

MultiIndex = Tuple[int, ...]
Word = Tuple[int, ...]


# ---------------------------------------------------------------------------
# index helpers


def degree(n: MultiIndex) -> int:
    return int(sum(n))


def unit(d: int, j: int) -> MultiIndex:
    """Multi-index ``e_j`` (``j`` is 1-based)."""
    return tuple(1 if k == j - 1 else 0 for k in range(d))


def shift(n: MultiIndex, j: int, by: int = 1) -> MultiIndex:
    return tuple(x + by if k == j - 1 else x for k, x in enumerate(n))


def multi_indices(d: int, order: int) -> list[MultiIndex]:
    """All multi-indices of total degree <= order, by degree and then descending lexicographic order."""
    out: list[MultiIndex] = []
    for deg in range(order + 1):
        out.extend(multi_indices_of_degree(d, deg))
    return out


def multi_indices_of_degree(d: int, deg: int) -> list[MultiIndex]:
    if d == 0:
        return [()] if deg == 0 else []
    found = [n for n in itertools.product(range(deg + 1), repeat=d) if sum(n) == deg]
    return sorted(found, reverse=True)


def multinomial(n: MultiIndex) -> int:
    out = factorial(degree(n))
    for x in n:
        out //= factorial(x)
    return out


def coefficient_bound(norms: Sequence[float], n: MultiIndex) -> float:
    """Bound on the ``z^n`` coefficient of ``(I - sum_k z_k M_k)^{-1}`` given ``||M_k|| <= norms[k]``.

    It is the sum of the norms of all words with letter counts ``n``.
    """
    out = float(multinomial(n))
    for x, k in zip(norms, n):
        out *= x ** k
    return out


def da_weight(n: MultiIndex) -> float:
    """Drury-Arveson weight ``n! / |n|!`` of the monomial ``z^n``."""
    return 1.0 / multinomial(n)


def words(d: int, length: int) -> list[Word]:
    """All words of exactly the given length, in lexicographic order."""
    return [tuple(w) for w in itertools.product(range(1, d + 1), repeat=length)]


def words_upto(d: int, order: int) -> list[Word]:
    out: list[Word] = []
    for k in range(order + 1):
        out.extend(words(d, k))
    return out


def transpose(v: Word) -> Word:
    return tuple(reversed(v))


def abelianization(v: Word, d: int) -> MultiIndex:
    counts = [0] * d
    for letter in v:
        counts[letter - 1] += 1
    return tuple(counts)


def word_key(v: Word, d: int) -> str:
    sep = "" if d < 10 else ","
    return sep.join(str(x) for x in v)


def index_key(n: MultiIndex) -> str:
    return ",".join(str(x) for x in n)


def word_product(mats: Sequence[np.ndarray], v: Word, size: int) -> np.ndarray:
    """``M^v = M_{v[0]} ... M_{v[-1]}`` (identity for the empty word)."""
    out = np.eye(size, dtype=complex)
    for letter in v:
        out = out @ mats[letter - 1]
    return out


# ---------------------------------------------------------------------------
# series containers


@dataclass(frozen=True, eq=False)
class CommSeries:
    """Truncated power series ``sum_{|n| <= order} c_n z^n`` with matrix coefficients."""

    d: int
    shape: Tuple[int, int]
    order: int
    coeffs: Mapping[MultiIndex, np.ndarray] = field(default_factory=dict)

    def coeff(self, n: MultiIndex) -> np.ndarray:
        c = self.coeffs.get(tuple(n))
        if c is None:
            return np.zeros(self.shape, dtype=complex)
        return c

    def keys(self) -> list[MultiIndex]:
        return multi_indices(self.d, self.order)

    def items(self) -> Iterator[tuple[MultiIndex, np.ndarray]]:
        for n in self.keys():
            yield n, self.coeff(n)

    def evaluate(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex).reshape(-1)
        if z.size != self.d:
            raise DimensionMismatch(f"point has {z.size} coordinates, series has d={self.d}")
        out = np.zeros(self.shape, dtype=complex)
        for n, c in self.items():
            out = out + np.prod(z ** np.array(n, dtype=int)) * c
        return out

    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "CommSeries":
        new = {n: fn(c) for n, c in self.items()}
        shape = next(iter(new.values())).shape if new else self.shape
        return CommSeries(self.d, shape, self.order, new)

    def truncate(self, order: int) -> "CommSeries":
        order = min(order, self.order)
        return CommSeries(self.d, self.shape, order, {n: self.coeff(n) for n in multi_indices(self.d, order)})

    def __add__(self, other: "CommSeries") -> "CommSeries":
        _compatible(self, other)
        order = min(self.order, other.order)
        return CommSeries(self.d, self.shape, order,
                          {n: self.coeff(n) + other.coeff(n) for n in multi_indices(self.d, order)})

    def __sub__(self, other: "CommSeries") -> "CommSeries":
        return self + other.map(lambda c: -c)

    def __matmul__(self, other: "CommSeries") -> "CommSeries":
        """Cauchy product, truncated at the smaller order."""
        if self.d != other.d or self.shape[1] != other.shape[0]:
            raise DimensionMismatch("incompatible series product")
        order = min(self.order, other.order)
        shape = (self.shape[0], other.shape[1])
        out = {n: np.zeros(shape, dtype=complex) for n in multi_indices(self.d, order)}
        for a, ca in self.items():
            if degree(a) > order:
                continue
            for b, cb in other.items():
                if degree(a) + degree(b) > order:
                    continue
                key = tuple(x + y for x, y in zip(a, b))
                out[key] = out[key] + ca @ cb
        return CommSeries(self.d, shape, order, out)

    def max_abs_diff(self, other: "CommSeries") -> float:
        order = min(self.order, other.order)
        worst = 0.0
        for n in multi_indices(self.d, order):
            diff = self.coeff(n) - other.coeff(n)
            if diff.size:
                worst = max(worst, float(np.max(np.abs(diff))))
        return worst


@dataclass(frozen=True, eq=False)
class NcSeries:
    """Truncated formal series ``sum_{|v| <= order} c_v z^v`` in noncommuting indeterminates."""

    d: int
    shape: Tuple[int, int]
    order: int
    coeffs: Mapping[Word, np.ndarray] = field(default_factory=dict)

    def coeff(self, v: Word) -> np.ndarray:
        c = self.coeffs.get(tuple(v))
        if c is None:
            return np.zeros(self.shape, dtype=complex)
        return c

    def keys(self) -> list[Word]:
        return words_upto(self.d, self.order)

    def items(self) -> Iterator[tuple[Word, np.ndarray]]:
        for v in self.keys():
            yield v, self.coeff(v)

    def abelianize(self) -> CommSeries:
        out: Dict[MultiIndex, np.ndarray] = {}
        for v, c in self.items():
            n = abelianization(v, self.d)
            out[n] = out.get(n, np.zeros(self.shape, dtype=complex)) + c
        return CommSeries(self.d, self.shape, self.order, out)

    def max_abs_diff(self, other: "NcSeries") -> float:
        order = min(self.order, other.order)
        worst = 0.0
        for v in words_upto(self.d, order):
            diff = self.coeff(v) - other.coeff(v)
            if diff.size:
                worst = max(worst, float(np.max(np.abs(diff))))
        return worst


def _compatible(a: CommSeries, b: CommSeries) -> None:
    if a.d != b.d or tuple(a.shape) != tuple(b.shape):
        raise DimensionMismatch("series have different variable counts or shapes")


def _check_blocks(blocks: Sequence[np.ndarray]) -> tuple[list[np.ndarray], int]:
    mats = [as_matrix(M, name="block") for M in blocks]
    if not mats:
        raise DimensionMismatch("at least one block is required")
    size = mats[0].shape[0]
    for M in mats:
        if M.shape != (size, size):
            raise DimensionMismatch(f"blocks must be square of equal size, got {M.shape}")
    return mats, size


def _caps(size: int, left, right) -> tuple[np.ndarray, np.ndarray]:
    L = np.eye(size, dtype=complex) if left is None else as_matrix(left, cols=size, name="left cap")
    R = np.eye(size, dtype=complex) if right is None else as_matrix(right, rows=size, name="right cap")
    return L, R


# ---------------------------------------------------------------------------
# operations


def resolvent_taylor_comm(blocks: Sequence[np.ndarray], order: int, side: str = "left",
                          left=None, right=None) -> CommSeries:
    """Taylor coefficients of ``left (I - sum_j z_j M_j)^{-1} right`` up to total degree ``order``.

    The coefficient of ``z^n`` is the sum of all products of the blocks whose
    letter counts equal ``n``.  ``side="left"`` uses ``F_n = sum_j M_j F_{n-e_j}``,
    ``side="right"`` uses ``F_n = sum_j F_{n-e_j} M_j``; both give the same series.
    """
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    mats, size = _check_blocks(blocks)
    L, R = _caps(size, left, right)
    d = len(mats)
    raw: Dict[MultiIndex, np.ndarray] = {}
    for n in multi_indices(d, order):
        if degree(n) == 0:
            raw[n] = np.eye(size, dtype=complex)
            continue
        acc = np.zeros((size, size), dtype=complex)
        for j in range(1, d + 1):
            if n[j - 1] == 0:
                continue
            prev = raw[shift(n, j, -1)]
            acc = acc + (mats[j - 1] @ prev if side == "left" else prev @ mats[j - 1])
        raw[n] = acc
    coeffs = {n: L @ F @ R for n, F in raw.items()}
    return CommSeries(d, (L.shape[0], R.shape[1]), order, coeffs)


def nc_resolvent_series(blocks: Sequence[np.ndarray], order: int, left=None, right=None) -> NcSeries:
    """Word coefficients ``left M^v right`` of ``(I - sum_k z_k M_k)^{-1}`` for ``|v| <= order``."""
    mats, size = _check_blocks(blocks)
    L, R = _caps(size, left, right)
    d = len(mats)
    raw: Dict[Word, np.ndarray] = {(): np.eye(size, dtype=complex)}
    for k in range(1, order + 1):
        for v in words(d, k):
            raw[v] = raw[v[:-1]] @ mats[v[-1] - 1]
    coeffs = {v: L @ P @ R for v, P in raw.items()}
    return NcSeries(d, (L.shape[0], R.shape[1]), order, coeffs)


def _row_blocks(T) -> list[np.ndarray]:
    mats = getattr(T, "T", T)
    return [as_matrix(M, name="T_k") for M in mats]


def xn_coefficients(T, max_degree: int) -> Dict[MultiIndex, np.ndarray]:
    """Coefficients ``X_n`` of ``(I_{X^d} - T* Z(z))^{-1}``.

    ``X_0 = I`` and ``X_n = sum_{j: n_j >= 1} T* I_j^* X_{n - e_j}``, where
    ``I_j^*`` keeps the j-th block row.
    """
    mats = _row_blocks(T)
    d = len(mats)
    n = mats[0].shape[0]
    row = np.hstack(mats)
    Tstar = row.conj().T
    out: Dict[MultiIndex, np.ndarray] = {}
    for m in multi_indices(d, max_degree):
        if degree(m) == 0:
            out[m] = np.eye(d * n, dtype=complex)
            continue
        acc = np.zeros((d * n, d * n), dtype=complex)
        for j in range(1, d + 1):
            if m[j - 1] == 0:
                continue
            prev = out[shift(m, j, -1)]
            acc = acc + Tstar @ prev[(j - 1) * n:j * n, :]
        out[m] = acc
    return out


def da_backward_shift(f: CommSeries, j: int) -> CommSeries:
    """Adjoint of multiplication by ``z_j`` in the Drury-Arveson inner product.

    ``(M_{z_j}^* f)_n = (n_j + 1)/(|n| + 1) f_{n + e_j}``; the result has order one less.
    """
    if not 1 <= j <= f.d:
        raise ValueError(f"variable index {j} outside 1..{f.d}")
    if f.order == 0:
        raise OrderZero("a series of order 0 has no coefficients to shift down")
    out = {}
    for n in multi_indices(f.d, f.order - 1):
        w = (n[j - 1] + 1) / (degree(n) + 1)
        out[n] = w * f.coeff(shift(n, j))
    return CommSeries(f.d, f.shape, f.order - 1, out)


def multiply_by_variable(g: CommSeries, j: int) -> CommSeries:
    """``z_j g``; the order grows by one."""
    out = {}
    for n in multi_indices(g.d, g.order + 1):
        out[n] = g.coeff(shift(n, j, -1)) if n[j - 1] >= 1 else np.zeros(g.shape, dtype=complex)
    return CommSeries(g.d, g.shape, g.order + 1, out)


def da_inner(f: CommSeries, g: CommSeries) -> complex:
    """``<f, g> = sum_n (n!/|n|!) tr(g_n^* f_n)`` over the common truncation."""
    _compatible(f, g)
    total = 0j
    for n in multi_indices(f.d, min(f.order, g.order)):
        total += da_weight(n) * complex(np.vdot(g.coeff(n), f.coeff(n)))
    return total

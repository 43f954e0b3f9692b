"""Real orthonormal coordinates for Hermitian matrices.

An ``n x n`` Hermitian matrix has ``n**2`` real degrees of freedom.  The
coordinate vector stacks the diagonal, then ``sqrt(2) * Re X[i, j]`` and
``sqrt(2) * Im X[i, j]`` for ``i < j``.  With this scaling the Euclidean
inner product of coordinates equals the Frobenius inner product
``Re Tr(X Y)``, so the gradient of ``Tr(G X)`` is simply ``to_vec(G)``.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

_S = 1.0 / np.sqrt(2.0)


@lru_cache(maxsize=None)
def _indices(n: int):
    iu, ju = np.triu_indices(n, 1)
    return np.arange(n), iu, ju


@lru_cache(maxsize=None)
def basis_entries(n: int):
    """Sparse description of the basis: (count, rows, cols, coefs).

    Each basis matrix has one or two nonzero entries; unused slots carry a
    zero coefficient.
    """
    d, iu, ju = _indices(n)
    dim = n * n
    count = np.zeros(dim, dtype=np.intp)
    rows = np.zeros((dim, 2), dtype=np.intp)
    cols = np.zeros((dim, 2), dtype=np.intp)
    coefs = np.zeros((dim, 2), dtype=complex)
    a = 0
    for i in d:
        count[a] = 1
        rows[a, 0] = cols[a, 0] = i
        coefs[a, 0] = 1.0
        a += 1
    for i, j in zip(iu, ju):
        count[a] = 2
        rows[a] = (i, j)
        cols[a] = (j, i)
        coefs[a] = (_S, _S)
        a += 1
    for i, j in zip(iu, ju):
        count[a] = 2
        rows[a] = (i, j)
        cols[a] = (j, i)
        coefs[a] = (1j * _S, -1j * _S)
        a += 1
    for arr in (count, rows, cols, coefs):
        arr.setflags(write=False)
    return count, rows, cols, coefs


@lru_cache(maxsize=None)
def basis_flat(n: int) -> np.ndarray:
    """Basis matrices flattened row-major, shape ``(n**2, n**2)``."""
    count, rows, cols, coefs = basis_entries(n)
    E = np.zeros((n * n, n, n), dtype=complex)
    for a in range(n * n):
        for e in range(count[a]):
            E[a, rows[a, e], cols[a, e]] += coefs[a, e]
    out = E.reshape(n * n, n * n)
    out.setflags(write=False)
    return out


def to_vec(X: np.ndarray) -> np.ndarray:
    """Real coordinates of the Hermitian part of ``X``."""
    X = np.asarray(X)
    n = X.shape[0]
    d, iu, ju = _indices(n)
    # Hermitian part: off-diagonal uses the average of X[i,j] and conj(X[j,i]).
    off = 0.5 * (X[iu, ju] + np.conj(X[ju, iu]))
    return np.concatenate([np.real(X[d, d]), np.sqrt(2.0) * off.real, np.sqrt(2.0) * off.imag])


def from_vec(y: np.ndarray, n: int) -> np.ndarray:
    d, iu, ju = _indices(n)
    m = len(iu)
    X = np.zeros((n, n), dtype=complex)
    X[d, d] = y[:n]
    z = (y[n:n + m] + 1j * y[n + m:]) * _S
    X[iu, ju] = z
    X[ju, iu] = np.conj(z)
    return X


def trace_coords(n: int) -> np.ndarray:
    """Coordinates ``u`` with ``u . to_vec(X) = Tr X``."""
    u = np.zeros(n * n)
    u[:n] = 1.0
    return u

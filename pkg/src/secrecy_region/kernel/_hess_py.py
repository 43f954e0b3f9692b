"""Pure-numpy implementation of the log-det Hessian accumulation kernel.

Mirrors ``_hesscore.pyx`` exactly; selected automatically when the
compiled extension is unavailable.
"""
import numpy as np

from .hermitian import basis_flat


def accumulate_term(W, offsets, weight, out, n):
    """Add ``weight * Re Tr(W[j,i] E_a W[i,j] E_b)`` into ``out``.

    ``W`` has shape ``(nb, nb, n, n)`` with ``W[i, j] = B_i^H M^{-1} B_j``;
    block ``(i, j)`` lands at rows ``offsets[i]:offsets[i]+n*n`` and columns
    ``offsets[j]:offsets[j]+n*n``.
    """
    E = basis_flat(n)
    Ec = E.conj()
    dim = n * n
    nb = W.shape[0]
    for i in range(nb):
        oi = offsets[i]
        for j in range(nb):
            oj = offsets[j]
            # vec_r(P E Q) = (P kron Q^T) vec_r(E)
            K = np.kron(W[j, i], W[i, j].T)
            blk = (E @ K.T) @ Ec.T
            out[oi:oi + dim, oj:oj + dim] += weight * blk.real

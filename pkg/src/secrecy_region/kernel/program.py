"""Concave log-det programs over Hermitian PSD matrices and free scalars.

A program maximizes

    F(x) = sum_j w_j logdet(A_j + sum_i B_ji X_i B_ji^H) + affine(x)

subject to ``g_c(x) >= 0`` for concave ``g_c`` of the same form, an optional
shared trace budget and ``X_i >= 0``.  Points are stored as one flat real
vector: ``m`` blocks of ``n**2`` Hermitian coordinates followed by ``s``
scalars.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla

from . import _backend
from .hermitian import from_vec, to_vec


class ProgramError(ValueError):
    """Malformed program (shape mismatch or failed concavity certificate)."""


@dataclass
class LogDetTerm:
    """``weight * logdet(A + sum_i B_i X_{var_i} B_i^H)``; ``A=None`` means identity."""

    weight: float
    blocks: Sequence[tuple]
    A: Optional[np.ndarray] = None

    def __post_init__(self):
        self.blocks = tuple((int(v), np.atleast_2d(np.asarray(B, dtype=complex))) for v, B in self.blocks)
        if self.A is not None:
            self.A = np.atleast_2d(np.asarray(self.A, dtype=complex))

    @property
    def rows(self) -> int:
        return self.blocks[0][1].shape[0]


@dataclass
class Affine:
    """``const + sum_i Re Tr(C_i X_i) + sum_j d_j s_j``."""

    const: float = 0.0
    mats: dict = field(default_factory=dict)
    scalars: dict = field(default_factory=dict)


@dataclass
class Concave:
    terms: list = field(default_factory=list)
    affine: Affine = field(default_factory=Affine)


@dataclass
class LogDetProgram:
    n: int
    m: int
    s: int
    objective: Concave
    constraints: list = field(default_factory=list)
    budget: Optional[float] = None
    budget_vars: Optional[tuple] = None
    names: Optional[tuple] = None

    def __post_init__(self):
        if self.budget_vars is None:
            self.budget_vars = tuple(range(self.m))
        self.check()

    @property
    def dim(self) -> int:
        return self.m * self.n * self.n + self.s

    def check(self):
        """Validate shapes and the concavity certificate (nonnegative weights)."""
        n = self.n
        for c, fn in enumerate([self.objective] + list(self.constraints)):
            where = "objective" if c == 0 else f"constraint {c - 1}"
            for term in fn.terms:
                if term.weight < 0:
                    raise ProgramError(f"{where}: negative log-det weight {term.weight}")
                seen = set()
                r = term.rows
                for v, B in term.blocks:
                    if not 0 <= v < self.m:
                        raise ProgramError(f"{where}: variable index {v} out of range")
                    if v in seen:
                        raise ProgramError(f"{where}: variable {v} repeated within one term")
                    seen.add(v)
                    if B.shape != (r, n):
                        raise ProgramError(f"{where}: block shape {B.shape}, expected ({r}, {n})")
                if term.A is not None:
                    if term.A.shape != (r, r):
                        raise ProgramError(f"{where}: A has shape {term.A.shape}")
                    if np.linalg.norm(term.A - term.A.conj().T) > 1e-10 * max(1.0, np.linalg.norm(term.A)):
                        raise ProgramError(f"{where}: A is not Hermitian")
                    if np.linalg.eigvalsh(term.A)[0] < -1e-12:
                        raise ProgramError(f"{where}: A is not PSD")
            for v, C in fn.affine.mats.items():
                if not 0 <= v < self.m or np.shape(C) != (n, n):
                    raise ProgramError(f"{where}: bad affine matrix for variable {v}")
            for j in fn.affine.scalars:
                if not 0 <= j < self.s:
                    raise ProgramError(f"{where}: scalar index {j} out of range")
        if self.budget is not None and self.budget < 0:
            raise ProgramError("negative budget")
        return True

    # -- point conversion --

    def pack(self, mats, scalars=None) -> np.ndarray:
        parts = [to_vec(np.asarray(X)) for X in mats]
        sc = np.zeros(self.s) if scalars is None else np.asarray(scalars, dtype=float)
        return np.concatenate(parts + [sc])

    def unpack(self, x: np.ndarray):
        nn = self.n * self.n
        mats = [from_vec(x[i * nn:(i + 1) * nn], self.n) for i in range(self.m)]
        return mats, np.array(x[self.m * nn:], dtype=float)


class _CompiledFunction:
    """Value/gradient/negated-Hessian evaluator for one concave function."""

    def __init__(self, prog: LogDetProgram, fn: Concave):
        self.n = prog.n
        nn = prog.n * prog.n
        self.m = prog.m
        self.dim = prog.dim
        self.terms = []
        for term in fn.terms:
            vars_ = np.array([v for v, _ in term.blocks], dtype=np.intp)
            Bs = np.stack([B for _, B in term.blocks])
            r = term.rows
            A = np.eye(r, dtype=complex) if term.A is None else term.A
            self.terms.append((term.weight, vars_, Bs, A, vars_ * nn))
        lin = np.zeros(self.dim)
        for v, C in fn.affine.mats.items():
            lin[v * nn:(v + 1) * nn] += to_vec(np.asarray(C, dtype=complex))
        for j, d in fn.affine.scalars.items():
            lin[self.m * nn + j] += d
        self.lin = lin
        self.const = float(fn.affine.const)

    def evaluate(self, mats, x, order=0, hess_out=None, hess_scale=1.0):
        """Return ``(value, grad)``; accumulate ``hess_scale * (-Hessian)`` into ``hess_out``.

        Returns ``None`` when a log-det argument is not positive definite.
        """
        val = self.const + float(self.lin @ x)
        grad = self.lin.copy() if order >= 1 else None
        nn = self.n * self.n
        for w, vars_, Bs, A, offs in self.terms:
            M = A.copy()
            for v, B in zip(vars_, Bs):
                M += B @ mats[v] @ B.conj().T
            M = 0.5 * (M + M.conj().T)
            try:
                c = sla.cho_factor(M, lower=True, check_finite=False)
            except np.linalg.LinAlgError:
                return None
            d = np.diagonal(c[0]).real
            if np.any(d <= 0) or not np.all(np.isfinite(d)):
                return None
            val += w * 2.0 * float(np.sum(np.log(d)))
            if order >= 1 and w != 0.0:
                Minv = sla.cho_solve(c, np.eye(M.shape[0], dtype=complex), check_finite=False)
                G = np.einsum("bri,rs->bis", Bs.conj(), Minv)
                W = np.einsum("bis,csj->bcij", G, Bs)
                for bi, v in enumerate(vars_):
                    grad[v * nn:(v + 1) * nn] += w * to_vec(W[bi, bi])
                if order >= 2 and hess_out is not None:
                    _backend.accumulate_term(W, offs, w * hess_scale, hess_out, self.n)
        return val, grad


def objective_and_gradient(prog: LogDetProgram, point):
    """Objective value (nats) and gradient in real coordinates at ``point``.

    ``point`` is either a flat vector or a ``(matrices, scalars)`` pair.
    """
    x = _as_flat(prog, point)
    mats, _ = prog.unpack(x)
    out = _CompiledFunction(prog, prog.objective).evaluate(mats, x, order=1)
    if out is None:
        raise ProgramError("singular log-det argument at the given point")
    return out


def _as_flat(prog, point):
    if isinstance(point, np.ndarray) and point.ndim == 1 and point.size == prog.dim:
        return point.astype(float)
    mats, scalars = point
    return prog.pack(mats, scalars)

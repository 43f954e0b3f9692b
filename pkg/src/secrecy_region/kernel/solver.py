"""Log-barrier path-following solver for :class:`LogDetProgram`.

At each barrier parameter ``t`` the solver maximizes

    t F(x) + sum_i logdet X_i + ln(P - sum Tr X_i) + sum_c ln g_c(x)

by damped Newton steps with an explicitly assembled Hessian, then sets
``t <- mu t`` until the duality-gap bound ``nu / t`` reaches the target.
Newton systems are solved in coordinates scaled by ``X_i^{1/2}`` so the
PSD-barrier block becomes the identity; this keeps the systems well
conditioned when the optimum is rank deficient.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla

from . import _backend
from .hermitian import from_vec, to_vec, trace_coords
from .program import Affine, Concave, LogDetProgram, _as_flat, _CompiledFunction

log = logging.getLogger(__name__)

PHASE1_SLACK = 1.0


class KernelError(RuntimeError):
    """Newton failure; ``last`` holds the last iterate (flat vector)."""

    def __init__(self, msg, last=None):
        super().__init__(msg)
        self.last = last


@dataclass(frozen=True)
class SolverConfig:
    mu: float = 10.0
    t0: float = 1.0
    eps: float = 1e-8
    newton_tol: float = 1e-10
    max_newton: int = 50
    alpha: float = 0.25
    beta: float = 0.5

    def __post_init__(self):
        if self.mu <= 1 or self.eps <= 0:
            raise ValueError("need mu > 1 and eps > 0")


@dataclass
class KernelSolution:
    X: list
    scalars: np.ndarray
    objective: float
    gamma: float
    constraint_duals: np.ndarray
    cone_duals: list
    status: str
    t: float = 0.0
    gap: float = 0.0
    newton_steps: int = 0
    history: list = field(default_factory=list, repr=False)
    x: Optional[np.ndarray] = field(default=None, repr=False)
    path: list = field(default_factory=list, repr=False)
    warm: bool = False

    @property
    def ok(self) -> bool:
        return self.status in ("optimal", "inaccurate")

    def path_point(self, t: float):
        """Centered ``(t_k, x_k)`` with the largest ``t_k <= t`` (first point if none)."""
        best = self.path[0] if self.path else (self.t, self.x)
        for tk, xk in self.path:
            if tk <= t:
                best = (tk, xk)
        return best

    def numerical_rank(self, i: int) -> int:
        X = self.X[i]
        lam = np.linalg.eigvalsh(X)
        return int(np.sum(lam > 1e-9 * max(np.trace(X).real, 1e-300)))


@dataclass
class Infeasible:
    """Returned (not raised) when no strictly feasible point exists."""

    max_slack: float
    status: str = "infeasible"

    @property
    def ok(self) -> bool:
        return False


class _Barrier:
    def __init__(self, prog: LogDetProgram):
        self.prog = prog
        self.n = prog.n
        self.nn = prog.n * prog.n
        self.f = _CompiledFunction(prog, prog.objective)
        self.g = [_CompiledFunction(prog, c) for c in prog.constraints]
        self.budget_mask = np.zeros(prog.dim)
        u = trace_coords(prog.n)
        for v in prog.budget_vars:
            self.budget_mask[v * self.nn:(v + 1) * self.nn] = u
        self.nu = prog.m * prog.n + (1 if prog.budget is not None else 0) + len(prog.constraints)
        self.eye_n = np.eye(prog.n)

    def mats(self, x):
        return [from_vec(x[i * self.nn:(i + 1) * self.nn], self.n) for i in range(self.prog.m)]

    def budget_slack(self, x):
        if self.prog.budget is None:
            return np.inf
        return self.prog.budget - float(self.budget_mask @ x)

    def slacks(self, x, mats=None):
        """Constraint values g_c(x), or None if any log argument is singular."""
        mats = self.mats(x) if mats is None else mats
        out = []
        for g in self.g:
            r = g.evaluate(mats, x)
            if r is None:
                return None
            out.append(r[0])
        return np.array(out)

    def strictly_feasible(self, x) -> bool:
        mats = self.mats(x)
        for X in mats:
            try:
                np.linalg.cholesky(X)
            except np.linalg.LinAlgError:
                return False
        if self.budget_slack(x) <= 0:
            return False
        if self.f.evaluate(mats, x) is None:
            return False
        s = self.slacks(x, mats)
        return s is not None and bool(np.all(s > 0))

    def value(self, x, t):
        """Barrier objective, or -inf outside the domain."""
        mats = self.mats(x)
        total = 0.0
        for X in mats:
            try:
                L = np.linalg.cholesky(X)
            except np.linalg.LinAlgError:
                return -np.inf
            total += 2.0 * np.sum(np.log(np.diagonal(L).real))
        sp = self.budget_slack(x)
        if sp <= 0:
            return -np.inf
        if np.isfinite(sp):
            total += np.log(sp)
        fv = self.f.evaluate(mats, x)
        if fv is None:
            return -np.inf
        total += t * fv[0]
        for g in self.g:
            r = g.evaluate(mats, x)
            if r is None or r[0] <= 0:
                return -np.inf
            total += np.log(r[0])
        return total

    def newton_system(self, x, t):
        """Barrier value, gradient and negated Hessian at ``x``.

        The rank-one curvature of the constraint and budget barriers is
        returned separately as ``(U, d)`` meaning ``sum_j d_j u_j u_j^T``; it
        dominates near active constraints and is handled by a Woodbury solve.
        """
        dim = self.prog.dim
        mats = self.mats(x)
        Hn = np.zeros((dim, dim))
        fv, fg = self.f.evaluate(mats, x, order=2, hess_out=Hn, hess_scale=t)
        val = t * fv
        grad = t * fg
        U, d = [], []
        for g in self.g:
            # ln g:  grad = g'/g,  -hess = -g''/g + g' g'^T / g^2
            Hc = np.zeros((dim, dim))
            gv, gg = g.evaluate(mats, x, order=2, hess_out=Hc)
            Hn += Hc / gv
            val += np.log(gv)
            grad += gg / gv
            U.append(gg)
            d.append(1.0 / gv ** 2)
        sp = self.budget_slack(x)
        if np.isfinite(sp):
            val += np.log(sp)
            grad -= self.budget_mask / sp
            U.append(self.budget_mask)
            d.append(1.0 / sp ** 2)
        roots = []
        for i, X in enumerate(mats):
            lam, V = np.linalg.eigh(X)
            val += float(np.sum(np.log(lam)))
            Xinv = (V / lam) @ V.conj().T
            sl = slice(i * self.nn, (i + 1) * self.nn)
            grad[sl] += to_vec(Xinv)
            roots.append((V * np.sqrt(lam)) @ V.conj().T)
        U = np.array(U).T if U else np.zeros((dim, 0))
        return val, grad, Hn, (U, np.array(d)), roots

    def scaling(self, roots):
        """Block-diagonal map ``z -> (S_i Z_i S_i, scalars)`` as a dense matrix."""
        dim = self.prog.dim
        L = np.zeros((dim, dim))
        for i, S in enumerate(roots):
            _backend.accumulate_term(S[None, None], np.array([i * self.nn], dtype=np.intp), 1.0, L, self.n)
        k = self.prog.m * self.nn
        L[k:, k:] = np.eye(self.prog.s)
        return L


def _solve_spd(A, b):
    try:
        c = sla.cho_factor(A, lower=True, check_finite=False)
        return sla.cho_solve(c, b, check_finite=False)
    except (np.linalg.LinAlgError, ValueError):
        lam, V = np.linalg.eigh(0.5 * (A + A.T))
        lam = np.maximum(lam, 1e-14 * max(lam[-1], 1.0))
        proj = V.T @ b
        return V @ (proj / (lam if proj.ndim == 1 else lam[:, None]))


def _solve_lowrank(A, U, d, b, n_scalars):
    """Solve ``(A + U diag(d) U^T) z = b`` via Woodbury.

    Free scalars often have no curvature outside the rank-one terms, so the
    scalar block of ``A`` is shifted by the identity and the shift is
    removed again through extra rank-one columns with weight -1.
    """
    if U.shape[1] == 0 and n_scalars == 0:
        return _solve_spd(A, b)
    dim = A.shape[0]
    if n_scalars:
        A = A.copy()
        idx = np.arange(dim - n_scalars, dim)
        A[idx, idx] += 1.0
        E = np.zeros((dim, n_scalars))
        E[idx, np.arange(n_scalars)] = 1.0
        U = np.column_stack([U, E])
        d = np.concatenate([d, -np.ones(n_scalars)])
    sol = _solve_spd(A, np.column_stack([b, U]))
    Ab, AU = sol[:, 0], sol[:, 1:]
    small = np.diag(1.0 / d) + U.T @ AU
    w = np.linalg.solve(0.5 * (small + small.T), U.T @ Ab)
    z = Ab - AU @ w
    # near the boundary the rank-one weights reach 1e17 and Woodbury loses
    # all accuracy; the systems are small, so fall back to a dense solve
    full = A + (U * d) @ U.T
    r = full @ z - b
    if not np.all(np.isfinite(z)) or np.linalg.norm(r) > 1e-8 * max(np.linalg.norm(b), 1e-300):
        full = 0.5 * (full + full.T)
        dg = np.sqrt(np.maximum(np.abs(np.diag(full)), 1e-300))
        z = _solve_spd(full / np.outer(dg, dg), b / dg) / dg
    return z


def _center(bar: _Barrier, x, t, cfg: SolverConfig, history, stop=None):
    """Damped Newton centering; returns (x, steps, stalled)."""
    prog = bar.prog
    nn = bar.nn
    for it in range(cfg.max_newton):
        val, grad, Hn, (U, d), roots = bar.newton_system(x, t)
        L = bar.scaling(roots)
        Hs = L.T @ Hn @ L
        k = prog.m * nn
        Hs[:k, :k] += np.eye(k)
        gs = L.T @ grad
        z = _solve_lowrank(Hs, L.T @ U, d, gs, prog.s)
        dec2 = float(gs @ z)
        if dec2 < 0:
            z = np.linalg.lstsq(Hs + ((L.T @ U) * d) @ (L.T @ U).T, gs, rcond=None)[0]
            dec2 = abs(float(gs @ z))
        if dec2 / 2 <= cfg.newton_tol:
            return x, it, False
        dx = L @ z
        amax = np.inf
        for i in range(prog.m):
            Z = from_vec(z[i * nn:(i + 1) * nn], prog.n)
            lmin = np.linalg.eigvalsh(Z)[0]
            if lmin < 0:
                amax = min(amax, -1.0 / lmin)
        sp = bar.budget_slack(x)
        if np.isfinite(sp):
            dtr = float(bar.budget_mask @ dx)
            if dtr > 0:
                amax = min(amax, sp / dtr)
        # at most halve any eigenvalue per step; deeper jumps toward the
        # boundary are cheap to take but slow to undo
        a = min(1.0, 0.5 * amax)
        accepted = False
        while a > 1e-14:
            xn = x + a * dx
            vn = bar.value(xn, t)
            if np.isfinite(vn) and (vn >= val + cfg.alpha * a * dec2 or (dec2 < 1e-6 and vn >= val - 1e-9 * max(1.0, abs(val)))):
                accepted = True
                break
            a *= cfg.beta
        if not accepted:
            # Round-off floor: the decrement is no longer resolvable in the barrier value.
            return x, it, True
        assert vn >= val - 1e-9 * max(1.0, abs(val)), "barrier objective decreased"
        x = xn
        history.append(vn)
        if stop is not None and stop(x, None):
            return x, it + 1, False
    if dec2 > 1e-3:
        raise KernelError(f"Newton did not converge at t={t:g} (decrement^2={dec2:.3e})", last=x)
    return x, cfg.max_newton, True


def _scalar_coefs(prog):
    coef = np.zeros((len(prog.constraints), prog.s))
    for c, fn in enumerate(prog.constraints):
        for j, d in fn.affine.scalars.items():
            coef[c, j] += d
    return coef


def _monotone_scalars(prog):
    """Scalars entering every constraint with the same sign."""
    coef = _scalar_coefs(prog)
    out = []
    for j in range(prog.s):
        col = coef[:, j][coef[:, j] != 0]
        if col.size and (np.all(col > 0) or np.all(col < 0)):
            out.append(j)
    return out


def _assign_scalars(bar: _Barrier, x, delta=PHASE1_SLACK):
    """Set free scalars so every constraint has slack >= delta; None if impossible."""
    prog = bar.prog
    k = prog.m * bar.nn
    coef = _scalar_coefs(prog)
    sign = np.zeros(prog.s)
    for j in _monotone_scalars(prog):
        sign[j] = 1
    x = x.copy()
    vals = bar.slacks(x)
    if vals is None:
        return None
    for c in range(len(prog.constraints)):
        vals = bar.slacks(x)
        if vals[c] >= delta:
            continue
        cand = [j for j in range(prog.s) if coef[c, j] != 0 and sign[j] != 0]
        if not cand:
            if vals[c] > 0:
                continue
            return None
        j = cand[0]
        x[k + j] += (delta - vals[c]) / coef[c, j]
    vals = bar.slacks(x)
    if vals is None or np.any(vals <= 0):
        return None
    return x


def _interior_matrices(prog: LogDetProgram):
    scale = prog.budget if prog.budget is not None else 10.0 * prog.m * prog.n
    eps0 = scale / (10.0 * prog.m * prog.n) if prog.m else 0.0
    return [eps0 * np.eye(prog.n) for _ in range(prog.m)]


def phase1_initialize(prog: LogDetProgram, cfg: SolverConfig = SolverConfig(), mats=None):
    """Strictly feasible starting point (flat vector) or :class:`Infeasible`.

    Matrices start at ``eps0 * I`` with ``eps0 = P / (10 m N)`` unless given;
    scalars are set to give every constraint slack ``>= 1``.  If that fails,
    an auxiliary program maximizing the smallest constraint slack is solved.
    """
    if prog.budget is not None and prog.budget <= 0 and prog.m > 0:
        return Infeasible(max_slack=0.0)
    bar = _Barrier(prog)
    if mats is None:
        mats = _interior_matrices(prog)
    x0 = prog.pack(mats, np.zeros(prog.s))
    if not prog.constraints:
        return x0 if bar.strictly_feasible(x0) else Infeasible(max_slack=-np.inf)
    x = _assign_scalars(bar, x0)
    if x is not None and bar.strictly_feasible(x):
        return x
    x0 = prog.pack(_interior_matrices(prog), np.zeros(prog.s))
    vals = bar.slacks(x0)
    if vals is None:
        return Infeasible(max_slack=-np.inf)
    # Constraints holding a one-signed scalar can always be met by moving that
    # scalar, so they are left out of the auxiliary program and fixed afterwards.
    monotone = set(_monotone_scalars(prog))
    keep = [c for c, fn in enumerate(prog.constraints)
            if not any(d != 0 and j in monotone for j, d in fn.affine.scalars.items())]
    if not keep:
        return Infeasible(max_slack=-np.inf)
    # auxiliary program: maximize s_aux s.t. g_c - s_aux >= 0, s_aux <= 1
    aux_j = prog.s
    cons = []
    for c in keep:
        fn = prog.constraints[c]
        sc = dict(fn.affine.scalars)
        sc[aux_j] = -1.0
        cons.append(Concave(fn.terms, Affine(fn.affine.const, fn.affine.mats, sc)))
    cons.append(Concave([], Affine(1.0, {}, {aux_j: -1.0})))
    for j in monotone:
        # box the idle scalars so the auxiliary Newton system stays nonsingular
        cons.append(Concave([], Affine(1.0, {}, {j: -1.0})))
        cons.append(Concave([], Affine(1.0, {}, {j: 1.0})))
    aux = LogDetProgram(prog.n, prog.m, prog.s + 1, Concave([], Affine(0.0, {}, {aux_j: 1.0})),
                        cons, prog.budget, prog.budget_vars)
    start = np.concatenate([x0, [min(float(vals[keep].min()), 1.0) - 1.0]])
    target = 0.5

    def enough(z, gap):
        # a centered point with slack s is within gap of the best slack, so
        # s >= gap certifies at least half the achievable margin
        return z[-1] >= target or (gap is not None and z[-1] > 0 and z[-1] >= gap)

    sol = solve(aux, cfg, init=start, stop=enough)
    if isinstance(sol, Infeasible) or sol.scalars[-1] <= 1e-12:
        best = -np.inf if isinstance(sol, Infeasible) else float(sol.scalars[-1])
        return Infeasible(max_slack=best)
    x = _assign_scalars(bar, sol.x[:-1], delta=min(PHASE1_SLACK, float(sol.scalars[-1])))
    if x is None or not bar.strictly_feasible(x):
        return Infeasible(max_slack=float(sol.scalars[-1]))
    return x


def solve(prog: LogDetProgram, cfg: SolverConfig = SolverConfig(), init=None, stop=None,
          t0: Optional[float] = None):
    """Maximize ``prog``; returns :class:`KernelSolution` or :class:`Infeasible`.

    ``init`` may be a flat vector, a ``(matrices, scalars)`` pair, or a
    ``(matrices, None)`` pair whose scalars are assigned automatically.  A
    point that is not strictly feasible falls back to phase 1.  ``stop(x, gap)``
    ends the path early; ``gap`` is None inside a centering step.  ``t0``
    overrides the initial barrier parameter when ``init`` is accepted, which
    suits warm starts from a centered point of a nearby program.
    """
    bar = _Barrier(prog)
    x = None
    if init is not None:
        if isinstance(init, tuple) and init[1] is None:
            cand = _assign_scalars(bar, prog.pack(init[0], np.zeros(prog.s)))
        else:
            cand = _as_flat(prog, init)
        if cand is not None and bar.strictly_feasible(cand):
            x = cand
    warm = x is not None
    if x is None:
        x = phase1_initialize(prog, cfg)
        if isinstance(x, Infeasible):
            return x
    t = t0 if (warm and t0 is not None) else cfg.t0
    history = []
    path = []
    steps = 0
    status = "optimal"
    while True:
        try:
            xc, it, stalled = _center(bar, x, t, cfg, history, stop)
        except KernelError as exc:
            if warm and not path and t > cfg.t0:
                # the warm point was too far from this center; restart the
                # path from the configured t at the last feasible iterate
                x = exc.last if exc.last is not None and bar.strictly_feasible(exc.last) else x
                t = cfg.t0
                steps += cfg.max_newton
                continue
            if not path or bar.nu / path[-1][0] >= 1e-5:
                raise
            stalled, it = True, 0
        steps += it
        if stalled and path and bar.nu / path[-1][0] < 1e-5:
            # round-off floor: keep the last well-centered point, whose
            # dual estimates are reliable
            t, x = path[-1]
            status = "inaccurate"
            break
        x = xc
        path.append((t, x))
        if stop is not None and stop(x, bar.nu / t):
            status = "stopped"
            break
        gap = bar.nu / t
        if gap <= cfg.eps:
            break
        if stalled and gap < 1e-5:
            status = "inaccurate"
            break
        t *= cfg.mu
    sol = _finish(prog, bar, x, t, status, steps, history)
    sol.path = path
    sol.warm = warm
    return sol


def _finish(prog, bar, x, t, status, steps, history):
    mats = bar.mats(x)
    fv, _ = bar.f.evaluate(mats, x)
    sp = bar.budget_slack(x)
    gamma = 1.0 / (t * sp) if np.isfinite(sp) else 0.0
    g = bar.slacks(x, mats)
    duals = 1.0 / (t * g) if len(g) else np.zeros(0)
    cones = [np.linalg.inv(X) / t for X in mats]
    _, scalars = prog.unpack(x)
    return KernelSolution(mats, scalars, float(fv), float(gamma), duals, cones, status,
                          t=t, gap=bar.nu / t, newton_steps=steps, history=history, x=x)

"""Weighted-sum rate maximization by alternating optimization.

Each log-det difference is rewritten with the identity

    -ln det(A^{-1}) = max_{S > 0} ln det S - Tr(S A) + N,   A > 0

(attained at ``S = A^{-1}``), which turns every capacity into a concave
function of the covariances once the slack matrices are fixed.  The
iteration alternates the closed-form slack update with one concave
covariance step, so the weighted objective never decreases.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import model
from .kernel import Affine, Concave, Infeasible, LogDetProgram, LogDetTerm, SolverConfig, solve
from .model import LN2, ChannelSet, CovarianceTriple, DomainError
from .region import BoundaryPoint, Iterate, RegionBoundary

log = logging.getLogger(__name__)

Q0_, QC_, QA_ = 0, 1, 2
ALPHA, BETA = 0, 1
WARM_T = 1e3


@dataclass(frozen=True)
class LambdaSweepConfig:
    lambdas: Optional[tuple] = None
    n_log: int = 20
    lam_min: float = 0.05
    lam_max: float = 20.0
    tol: float = 1e-4
    max_iter: int = 100
    warmstart: bool = True
    solver: SolverConfig = SolverConfig()

    def grid(self) -> np.ndarray:
        if self.lambdas is not None:
            return np.asarray(self.lambdas, dtype=float)
        return np.concatenate([[0.0], np.logspace(np.log10(self.lam_min), np.log10(self.lam_max), self.n_log)])


@dataclass
class AoDuals:
    """Multipliers of the final covariance step.

    ``rho`` are the eavesdropper-constraint multipliers divided by
    ``lambda_c`` (they sum to one at a KKT point); ``mu`` the multicast
    constraint multipliers; ``gamma`` the power multiplier; ``cones`` the
    PSD multipliers keyed by ``"Q0"``, ``"Qc"``, ``"Qa"``.
    """
    gamma: float
    rho: np.ndarray
    mu: np.ndarray
    cones: dict
    alpha: float
    beta: float


@dataclass
class AoResult:
    cov: CovarianceTriple
    lambda_c: float
    R0: float
    Rc: float
    raw_secrecy: float
    objective_bits: float
    trace: list
    iterations: int
    inner_solves: int
    converged: bool
    duals: Optional[AoDuals] = None
    x: Optional[np.ndarray] = field(default=None, repr=False)
    status: str = "converged"
    nonmonotone: int = 0
    iterates: list = field(default_factory=list)


def lemma3_value(E):
    """Maximum and maximizer of ``f(S) = -Tr(S E) + ln det S + N`` over ``S > 0``.

    Returns ``(ln det E^{-1}, E^{-1})``.
    """
    E = np.atleast_2d(np.asarray(E, dtype=complex))
    if np.linalg.norm(E - E.conj().T) > 1e-10 * max(1.0, np.linalg.norm(E)):
        raise DomainError("matrix is not Hermitian")
    lam = np.linalg.eigvalsh(E)
    if lam[0] <= 0:
        raise DomainError(f"matrix is not positive definite (min eigenvalue {lam[0]:.3g})")
    Einv = np.linalg.inv(E)
    return -model.logdet_hermitian(E), 0.5 * (Einv + Einv.conj().T)


def lemma3_objective(S, E) -> float:
    """``-Tr(S E) + ln det S + N``."""
    S = np.atleast_2d(S)
    return -float(np.trace(S @ np.atleast_2d(E)).real) + model.logdet_hermitian(S) + S.shape[0]


def closed_form_slacks(ch: ChannelSet, Qc, Qa):
    """Optimal slack matrices at fixed covariances.

    Returns ``(S1, S, U)``: ``S1 = (I + H_1 Qa H_1^H)^{-1}`` for the
    authorized receiver, and ``S[k] = U[k] = (I + H_k (Qc + Qa) H_k^H)^{-1}``
    for every receiver ``k``.
    """
    def inv_plus(H, Q):
        M = np.eye(H.shape[0]) + H @ Q @ H.conj().T
        Mi = np.linalg.inv(0.5 * (M + M.conj().T))
        return 0.5 * (Mi + Mi.conj().T)

    S1 = inv_plus(ch.h(1), Qa)
    U = {k: inv_plus(ch.h(k), Qc + Qa) for k in ch.receivers}
    S = {k: U[k] for k in ch.eves}
    return S1, S, U


def _slack_const(Sk) -> float:
    """``ln det S - Tr S + N``: the constant part of the rewritten log-det."""
    return lemma3_objective(Sk, np.eye(Sk.shape[0]))


def assemble_wsrm_subproblem(ch: ChannelSet, P: float, lambda_c: float, S1, S, U,
                             with_an: bool = True) -> LogDetProgram:
    """Concave covariance step at fixed slacks (objective in nats).

    Scalars are ``alpha`` (epigraph of the multicast minimum) and, when
    ``lambda_c > 0``, ``beta`` (epigraph of the largest eavesdropper rate).
    With ``lambda_c = 0`` the secrecy part carries no weight and ``beta``
    would be unbounded, so it is left out.
    """
    if lambda_c < 0:
        raise DomainError("lambda_c must be nonnegative")
    n = ch.n_t
    m = 3 if with_an else 2
    noise = [QC_, QA_] if with_an else [QC_]
    use_beta = lambda_c > 0
    s = 2 if use_beta else 1
    H1 = ch.h(1)

    obj_terms, mats, const = [], {}, 0.0
    scal = {ALPHA: 1.0}
    if use_beta:
        obj_terms.append(LogDetTerm(lambda_c, [(v, H1) for v in noise]))
        const = lambda_c * _slack_const(S1)
        if with_an:
            mats = {QA_: -lambda_c * (H1.conj().T @ S1 @ H1)}
        scal[BETA] = -lambda_c
    objective = Concave(obj_terms, Affine(const, mats, scal))

    cons = []
    if use_beta:
        for k in ch.eves:
            Hk = ch.h(k)
            G = Hk.conj().T @ S[k] @ Hk
            terms = [LogDetTerm(1.0, [(QA_, Hk)])] if with_an else []
            cons.append(Concave(terms, Affine(_slack_const(S[k]), {v: -G for v in noise}, {BETA: 1.0})))
    for k in ch.receivers:
        Hk = ch.h(k)
        G = Hk.conj().T @ U[k] @ Hk
        terms = [LogDetTerm(1.0, [(Q0_, Hk)] + [(v, Hk) for v in noise])]
        cons.append(Concave(terms, Affine(_slack_const(U[k]), {v: -G for v in noise}, {ALPHA: -1.0})))
    return LogDetProgram(n, m, s, objective, cons, budget=P, names=("Q0", "Qc", "Qa")[:m])


def initial_covariances(ch: ChannelSet, P: float) -> CovarianceTriple:
    """Starting point: ``Qc = Qa = P/(2 N_t) I`` and ``Q0 = 0`` (total power P)."""
    n = ch.n_t
    q = P / (2.0 * n) * np.eye(n, dtype=complex)
    return CovarianceTriple(np.zeros((n, n), dtype=complex), q, q.copy(), P)


def _exact(ch, lam, cov):
    return model.weighted_objective(lam, ch, cov) * LN2


def ao_solve(ch: ChannelSet, P: float, lambda_c: float, cfg: LambdaSweepConfig = LambdaSweepConfig(),
             init: Optional[CovarianceTriple] = None, with_an: bool = True) -> AoResult:
    """Alternate slack updates and covariance steps until the weighted objective settles.

    The trace holds the exact weighted objective (nats) after every
    iteration, starting with the initial point; iteration stops when it
    changes by at most ``cfg.tol``.
    """
    if lambda_c < 0:
        raise DomainError("lambda_c must be nonnegative")
    n = ch.n_t
    cov = init if init is not None else initial_covariances(ch, P)
    if not with_an:
        cov = CovarianceTriple(cov.Q0, cov.Qc, np.zeros((n, n), dtype=complex), P)
    if P <= 0:
        z = np.zeros((n, n), dtype=complex)
        cov = CovarianceTriple(z, z.copy(), z.copy(), 0.0)
        return AoResult(cov, lambda_c, 0.0, 0.0, 0.0, 0.0, [0.0], 0, 0, True, status="converged")
    f = _exact(ch, lambda_c, cov)
    trace = [f]
    iterates = [_iterate(0, f, ch, cov)]
    x, t_warm = None, None
    sol = None
    converged = False
    solves = 0
    nonmono = 0
    for it in range(cfg.max_iter):
        S1, S, U = closed_form_slacks(ch, cov.Qc, cov.Qa)
        prog = assemble_wsrm_subproblem(ch, P, lambda_c, S1, S, U, with_an)
        res = solve(prog, cfg.solver, init=x, t0=t_warm)
        solves += 1
        if isinstance(res, Infeasible):
            raise RuntimeError(f"covariance step infeasible (max slack {res.max_slack:.3g})")
        sol = res
        Q0, Qc = sol.X[0], sol.X[1]
        Qa = sol.X[2] if with_an else np.zeros((n, n), dtype=complex)
        cand = CovarianceTriple(Q0, Qc, Qa, P)
        f_new = _exact(ch, lambda_c, cand)
        if f_new < f:
            # An exact covariance step cannot lose objective; a drop is inner
            # solver tolerance, so the previous point is kept.
            nonmono += 1
            log.debug("step lowered the objective by %.3g at iteration %d; kept previous", f - f_new, it + 1)
            trace.append(f)
            iterates.append(_iterate(it + 1, f, ch, cov))
            # this step's surrogate was built at the kept point and its optimum
            # sits next to it, so its duals are the ones to certify it with
            converged = True
            break
        cov = cand
        trace.append(f_new)
        iterates.append(_iterate(it + 1, f_new, ch, cov))
        t_warm, x = sol.path_point(WARM_T)
        if abs(f_new - f) <= cfg.tol:
            f = f_new
            converged = True
            break
        f = f_new
    duals = _duals(ch, sol, lambda_c, with_an)
    raw = model.secrecy_difference(ch, cov)
    return AoResult(cov, lambda_c, model.multicast_rate(ch, cov), max(0.0, raw), raw, f / LN2,
                    trace, len(trace) - 1, solves, converged, duals, sol.x,
                    "converged" if converged else "max_iter", nonmono, iterates)


def _iterate(n, f, ch, cov) -> Iterate:
    return Iterate(n, float(f), model.multicast_rate(ch, cov), model.secrecy_rate(ch, cov))


def _duals(ch, sol, lambda_c, with_an) -> AoDuals:
    n_e = len(ch.eves) if lambda_c > 0 else 0
    cd = np.asarray(sol.constraint_duals)
    nu, mu = cd[:n_e], cd[n_e:]
    rho = nu / lambda_c if lambda_c > 0 else np.zeros(len(ch.eves))
    names = ("Q0", "Qc", "Qa")
    cones = {names[i]: sol.cone_duals[i] for i in range(len(sol.cone_duals))}
    if not with_an:
        cones["Qa"] = None
    beta = float(sol.scalars[BETA]) if lambda_c > 0 else float("nan")
    return AoDuals(sol.gamma, rho, mu, cones, float(sol.scalars[ALPHA]), beta)


def _flag_points(points):
    for p in points:
        if not p.ok:
            continue
        flags = []
        for q in points:
            if q is p or not q.ok:
                continue
            if q.R0 >= p.R0 and q.Rc >= p.Rc and (q.R0 > p.R0 + 1e-9 or q.Rc > p.Rc + 1e-9):
                flags.append("dominated")
                break
        for q in points:
            if q is not p and q.ok and abs(q.R0 - p.R0) <= 1e-6 and abs(q.Rc - p.Rc) <= 1e-6:
                flags.append("duplicate")
                break
        if p.param == 0.0:
            # secrecy carries no weight, so Rc is whatever the solver left
            flags.append("rc_unconstrained")
        p.flags = tuple(flags)


def trace_region_ao(ch: ChannelSet, P: float, cfg: LambdaSweepConfig = LambdaSweepConfig(),
                    with_an: bool = True) -> RegionBoundary:
    """Sweep the secrecy weight; points come back sorted by multicast rate.

    Dominated or duplicate points are kept but flagged.
    """
    method = "ao" if with_an else "no-an-ao"
    region = RegionBoundary(method, P=P)
    init = None
    for lam in cfg.grid():
        t0 = time.perf_counter()
        try:
            res = ao_solve(ch, P, float(lam), cfg, init=init if cfg.warmstart else None, with_an=with_an)
        except Exception as exc:  # recorded per point; the sweep continues
            log.warning("ao point lambda=%.6g failed: %s", lam, exc)
            region.points.append(BoundaryPoint(float(lam), 0.0, 0.0, status=f"failed: {exc}",
                                               wall_ms=1e3 * (time.perf_counter() - t0)))
            continue
        region.points.append(BoundaryPoint(float(lam), res.R0, res.Rc, res.iterations, res.inner_solves,
                                           1e3 * (time.perf_counter() - t0), res.status, res.raw_secrecy,
                                           res.cov, res.iterates))
        init = res.cov
    region.points.sort(key=lambda p: (p.R0, p.param))
    _flag_points(region.points)
    return region

"""Secrecy-rate maximization under a multicast-rate floor (DC approach).

The nonconvex problem

    max  C_b - max_k C_ek   s.t.  min_k C_mk >= tau,  Tr(Q0+Qc+Qa) <= P

is written as a difference of concave log-det functions.  The subtracted
parts are linearized at the current covariances, which gives a concave
surrogate whose feasible set is inside the true one; iterating the
surrogate optimum (majorization-minimization) converges to a stationary
point.  A final bisection on the scale of ``Q0`` makes the multicast floor
tight.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import model
from .kernel import (Affine, Concave, Infeasible, LogDetProgram, LogDetTerm,
                     SolverConfig, solve)
from .model import LN2, ChannelSet, CovarianceTriple, DomainError
from .region import BoundaryPoint, Iterate, RegionBoundary

log = logging.getLogger(__name__)

Q0_, QC_, QA_ = 0, 1, 2
ETA = 0
WARM_T = 1e3


class DcInfeasible(RuntimeError):
    """The first surrogate program has no strictly feasible point."""


@dataclass(frozen=True)
class QomsSweepConfig:
    n_points: int = 21
    tol: float = 1e-4
    max_outer: int = 50
    warmstart: bool = True
    taus: Optional[tuple] = None
    solver: SolverConfig = SolverConfig()

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")


DcIterate = Iterate


@dataclass
class DcResult:
    cov: CovarianceTriple
    Rc: float
    R0: float
    raw_secrecy: float
    surrogate_bits: float
    pre_rescale_multicast: float
    iterations: int
    inner_solves: int
    converged: bool
    trace: list = field(default_factory=list)
    x: Optional[np.ndarray] = field(default=None, repr=False)
    status: str = "converged"


def _zeros(n):
    return np.zeros((n, n), dtype=complex)


def _mats(ch: ChannelSet):
    return [ch.h(k) for k in ch.receivers]


def compute_tau_max(ch: ChannelSet, P: float, cfg: SolverConfig = SolverConfig()):
    """Largest achievable multicast rate (bits) and the maximizing ``Q0``."""
    n = ch.n_t
    if P <= 0:
        return 0.0, _zeros(n)
    cons = [Concave([LogDetTerm(1.0, [(0, ch.h(k))])], Affine(0.0, {}, {0: -1.0}))
            for k in ch.receivers]
    prog = LogDetProgram(n, 1, 1, Concave([], Affine(0.0, {}, {0: 1.0})), cons, budget=P,
                         names=("Q0",))
    sol = solve(prog, cfg)
    Q0 = sol.X[0]
    z = _zeros(n)
    achieved = model.multicast_rate_nats(ch, model.clean_psd(Q0), z, z)
    return max(achieved, sol.objective) / LN2, Q0


def varphi(ch: ChannelSet, k: int, Qa) -> float:
    """ln det(I + H_k Qa H_k^H)."""
    return model._ld_plus(ch.h(k), Qa)


def phi(ch: ChannelSet, k: int, Qc, Qa) -> float:
    """ln det(I + H_k (Qc + Qa) H_k^H)."""
    return model._ld_plus(ch.h(k), Qc + Qa)


def linearize_varphi1(ch: ChannelSet, Qa_tilde):
    """Tangent majorizer of ``ln det(I + H_1 Qa H_1^H)`` at ``Qa_tilde``.

    Returns ``(fn, S)`` where ``fn(Qa)`` evaluates the affine majorizer in nats.
    """
    H = ch.h(1)
    Minv = np.linalg.inv(np.eye(H.shape[0]) + H @ Qa_tilde @ H.conj().T)
    S = H.conj().T @ Minv @ H
    S = 0.5 * (S + S.conj().T)
    base = varphi(ch, 1, Qa_tilde)

    def fn(Qa):
        return base + float(np.trace(S @ (Qa - Qa_tilde)).real)

    return fn, S


def linearize_phi_k(ch: ChannelSet, k: int, Qc_tilde, Qa_tilde):
    """Tangent majorizer of ``ln det(I + H_k (Qc + Qa) H_k^H)``; returns ``(fn, U)``."""
    H = ch.h(k)
    Minv = np.linalg.inv(np.eye(H.shape[0]) + H @ (Qc_tilde + Qa_tilde) @ H.conj().T)
    U = H.conj().T @ Minv @ H
    U = 0.5 * (U + U.conj().T)
    base = phi(ch, k, Qc_tilde, Qa_tilde)

    def fn(Qc, Qa):
        return base + float(np.trace(U @ (Qc - Qc_tilde)).real) + float(np.trace(U @ (Qa - Qa_tilde)).real)

    return fn, U


def assemble_dc_subproblem(ch: ChannelSet, P: float, tau: float, Qc_tilde, Qa_tilde,
                           with_an: bool = True) -> LogDetProgram:
    """Concave surrogate at the expansion point; ``tau`` is in bits.

    Variables are ``(Q0, Qc[, Qa])`` and the epigraph scalar ``eta``.  With
    ``with_an=False`` the noise covariance is removed from the program.
    """
    n = ch.n_t
    m = 3 if with_an else 2
    noise = [(QC_, None)] + ([(QA_, None)] if with_an else [])
    H1 = ch.h(1)
    tau_nats = tau * LN2

    obj_terms = [LogDetTerm(1.0, [(v, H1) for v, _ in noise])]
    obj_aff = Affine(0.0, {}, {ETA: -1.0})
    if with_an:
        _, S = linearize_varphi1(ch, Qa_tilde)
        obj_aff.const = -varphi(ch, 1, Qa_tilde) + float(np.trace(S @ Qa_tilde).real)
        obj_aff.mats = {QA_: -S}

    cons = []
    lin = {}
    for k in ch.receivers:
        _, U = linearize_phi_k(ch, k, Qc_tilde, Qa_tilde)
        base = phi(ch, k, Qc_tilde, Qa_tilde) - float(np.trace(U @ (Qc_tilde + Qa_tilde)).real)
        lin[k] = (base, U)
    for k in ch.eves:
        base, U = lin[k]
        terms = [LogDetTerm(1.0, [(QA_, ch.h(k))])] if with_an else []
        mats = {v: -U for v, _ in noise}
        cons.append(Concave(terms, Affine(-base, mats, {ETA: 1.0})))
    for k in ch.receivers:
        base, U = lin[k]
        terms = [LogDetTerm(1.0, [(Q0_, ch.h(k))] + [(v, ch.h(k)) for v, _ in noise])]
        mats = {v: -U for v, _ in noise}
        cons.append(Concave(terms, Affine(-base - tau_nats, mats, {})))
    names = ("Q0", "Qc", "Qa")[:m]
    return LogDetProgram(n, m, 1, Concave(obj_terms, obj_aff), cons, budget=P, names=names)


def _triple(sol_X, P, with_an):
    Q0, Qc = sol_X[0], sol_X[1]
    Qa = sol_X[2] if with_an else _zeros(Q0.shape[0])
    return CovarianceTriple(Q0, Qc, Qa, P)


def rescale_to_equality(ch: ChannelSet, cov: CovarianceTriple, tau: float,
                        tol: float = 1e-6, max_iter: int = 50) -> CovarianceTriple:
    """Scale ``Q0`` by ``nu`` in [0, 1] so the multicast rate equals ``tau`` (bits).

    ``Qc`` and ``Qa`` are untouched, so the secrecy rate is unchanged.  The
    returned point keeps the multicast rate on the feasible side of ``tau``.
    """
    Q0, Qc, Qa = (model.clean_psd(Q) for Q in (cov.Q0, cov.Qc, cov.Qa))

    def rate(nu):
        return model.multicast_rate_nats(ch, nu * Q0, Qc, Qa) / LN2

    r1 = rate(1.0)
    if r1 < tau - 1e-9:
        raise DomainError(f"multicast rate {r1:.6g} is below the floor {tau:.6g}")
    if abs(r1 - tau) <= tol:
        return cov
    if tau <= 0:
        return CovarianceTriple(0 * Q0, cov.Qc, cov.Qa, cov.P)
    lo, hi = 0.0, 1.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        r = rate(mid)
        if r >= tau:
            hi = mid
            if r - tau <= tol:
                break
        else:
            lo = mid
    return CovarianceTriple(hi * cov.Q0, cov.Qc, cov.Qa, cov.P)


def dc_solve(ch: ChannelSet, P: float, tau: float, cfg: QomsSweepConfig = QomsSweepConfig(),
             init=None, x_init=None, with_an: bool = True, tau_max=None) -> DcResult:
    """Iterate the surrogate program from expansion point ``init = (Qc, Qa)``.

    The reported secrecy and multicast rates are exact re-evaluations, never
    the surrogate value.  ``x_init`` optionally warm-starts the first inner
    solve (a strictly feasible flat point of the first surrogate).
    """
    n = ch.n_t
    if tau < 0:
        raise DomainError("tau must be nonnegative")
    if tau_max is not None and tau > tau_max * (1 + 1e-9) + 1e-12:
        raise DcInfeasible(f"tau={tau:.6g} exceeds the multicast capacity {tau_max:.6g}")
    if tau_max is not None and tau >= tau_max * (1 - 1e-9):
        return _endpoint(ch, P, tau_max, cfg)
    Qc_t, Qa_t = (_zeros(n), _zeros(n)) if init is None else (np.asarray(init[0]), np.asarray(init[1]))
    if not with_an:
        Qa_t = _zeros(n)
    trace = []
    prev = None
    x = x_init
    converged = False
    solves = 0
    sol = None
    t_warm = None
    for it in range(cfg.max_outer):
        prog = assemble_dc_subproblem(ch, P, tau, Qc_t, Qa_t, with_an)
        res = solve(prog, cfg.solver, init=x, t0=t_warm)
        solves += 1
        if isinstance(res, Infeasible):
            if sol is None:
                raise DcInfeasible(f"surrogate infeasible at tau={tau:.6g} (max slack {res.max_slack:.3g})")
            break
        sol = res
        # Consecutive surrogates are close; a moderately centered point of the
        # last one is usually strictly feasible and nearly central for the next.
        t_warm, x = sol.path_point(WARM_T)
        cov = _triple(sol.X, P, with_an)
        rbar = sol.objective / LN2
        trace.append(DcIterate(it, sol.objective, model.multicast_rate(ch, cov),
                               model.secrecy_difference(ch, cov)))
        Qc_t, Qa_t = cov.Qc, cov.Qa
        if prev is not None and abs(rbar - prev) <= cfg.tol:
            converged = True
            break
        prev = rbar
    cov = _triple(sol.X, P, with_an)
    pre = model.multicast_rate(ch, cov)
    final = rescale_to_equality(ch, cov, tau)
    raw = model.secrecy_difference(ch, final)
    return DcResult(final, max(0.0, raw), model.multicast_rate(ch, final), raw,
                    sol.objective / LN2, pre, len(trace), solves, converged, trace, x,
                    "converged" if converged else "max_iter")


def _endpoint(ch, P, tau_max, cfg):
    _, Q0 = compute_tau_max(ch, P, cfg.solver)
    z = _zeros(ch.n_t)
    cov = CovarianceTriple(Q0, z, z.copy(), P)
    r0 = model.multicast_rate(ch, cov)
    trace = [DcIterate(0, 0.0, r0, model.secrecy_difference(ch, cov))]
    return DcResult(cov, 0.0, r0, 0.0, 0.0, r0, 0, 1, True, trace, None, "endpoint")


def tau_grid(tau_max: float, n_points: int) -> np.ndarray:
    """Uniform grid on [0, tau_max], descending."""
    return np.linspace(tau_max, 0.0, n_points)


def trace_region_dc(ch: ChannelSet, P: float, cfg: QomsSweepConfig = QomsSweepConfig(),
                    with_an: bool = True) -> RegionBoundary:
    """Sweep the multicast floor from ``tau_max`` down to 0.

    With warm starting, each floor starts from the previous floor's output
    covariances (and its last strictly feasible inner point).
    """
    tau_max, _ = compute_tau_max(ch, P, cfg.solver)
    taus = np.asarray(cfg.taus) if cfg.taus is not None else tau_grid(tau_max, cfg.n_points)
    method = "dc" if with_an else "no-an-dc"
    region = RegionBoundary(method, P=P, meta={"tau_max": tau_max})
    init, x_init = None, None
    for tau in taus:
        t0 = time.perf_counter()
        try:
            res = dc_solve(ch, P, float(tau), cfg, init=init if cfg.warmstart else None,
                           x_init=x_init if cfg.warmstart else None, with_an=with_an,
                           tau_max=tau_max)
        except Exception as exc:  # recorded per point; the sweep continues
            log.warning("dc point tau=%.6g failed: %s", tau, exc)
            region.points.append(BoundaryPoint(float(tau), 0.0, 0.0, status=f"failed: {exc}",
                                               wall_ms=1e3 * (time.perf_counter() - t0)))
            continue
        region.points.append(BoundaryPoint(float(tau), res.R0, res.Rc, res.iterations,
                                           res.inner_solves, 1e3 * (time.perf_counter() - t0),
                                           res.status, res.raw_secrecy, res.cov, res.trace))
        init = (res.cov.Qc, res.cov.Qa)
        x_init = res.x
    return region

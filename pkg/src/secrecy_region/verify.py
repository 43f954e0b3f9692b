"""Independent checkers: matrix identities, construction invariants, KKT residuals
and a brute-force oracle for single-antenna instances."""
from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Optional, Union

import numpy as np

from . import ao, dc, model
from .kernel import Affine, Concave, LogDetProgram, LogDetTerm, SolverConfig, objective_and_gradient, solve, to_vec
from .model import LN2, ChannelSet, CovarianceTriple, DomainError


# ---------------------------------------------------------------- helpers

def _ld(H, Q) -> float:
    M = np.eye(H.shape[0]) + H @ Q @ H.conj().T
    return model.logdet_hermitian(0.5 * (M + M.conj().T))


def _grad_ld(H, Q):
    """Gradient of ``ln det(I + H Q H^H)`` with respect to ``Q``."""
    M = np.eye(H.shape[0]) + H @ Q @ H.conj().T
    G = H.conj().T @ np.linalg.solve(0.5 * (M + M.conj().T), H)
    return 0.5 * (G + G.conj().T)


def _is_pd(X, strict=True) -> bool:
    X = np.atleast_2d(X)
    if np.linalg.norm(X - X.conj().T) > 1e-10 * max(1.0, np.linalg.norm(X)):
        return False
    lam = np.linalg.eigvalsh(X)[0]
    return lam > 0 if strict else lam >= -1e-12


def random_hermitian(rng, n, scale=1.0):
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * 0.5 * (A + A.conj().T)


def random_psd(rng, n, scale=1.0, rank=None):
    r = n if rank is None else rank
    A = rng.standard_normal((n, r)) + 1j * rng.standard_normal((n, r))
    return scale * (A @ A.conj().T) / max(r, 1)


# ---------------------------------------------------------------- variational identity

@dataclass
class Lemma3Check:
    passed: bool
    value: float
    expected: float
    value_error: float
    argmax_error: float
    S: np.ndarray


def check_lemma3(E, tol: float = 1e-6, cfg: SolverConfig = SolverConfig()) -> Lemma3Check:
    """Maximize ``-Tr(S E) + ln det S + N`` with the kernel and compare to ``ln det E^{-1}``."""
    E = np.atleast_2d(np.asarray(E, dtype=complex))
    n = E.shape[0]
    expected, S_star = ao.lemma3_value(E)
    obj = Concave([LogDetTerm(1.0, [(0, np.eye(n))], A=np.zeros((n, n)))], Affine(float(n), {0: -E}, {}))
    sol = solve(LogDetProgram(n, 1, 0, obj, []), cfg)
    S = sol.X[0]
    verr = abs(sol.objective - expected)
    aerr = np.linalg.norm(S - S_star) / max(1.0, np.linalg.norm(S_star))
    return Lemma3Check(bool(verr <= tol and aerr <= tol), sol.objective, expected, verr, aerr, S)


@dataclass
class DetRatioCheck:
    passed: bool
    lhs: float
    rhs: float


def check_det_ratio(A, B, D, tol: float = 1e-12) -> DetRatioCheck:
    """``ln(|A+B|/|B|) >= ln(|A+B+D|/|B+D|)`` for ``A, D >= 0`` and ``B > 0``."""
    A, B, D = (np.atleast_2d(np.asarray(X, dtype=complex)) for X in (A, B, D))
    if not _is_pd(A, strict=False) or not _is_pd(D, strict=False):
        raise DomainError("A and D must be Hermitian PSD")
    if not _is_pd(B):
        raise DomainError("B must be Hermitian PD")
    ld = model.logdet_hermitian
    lhs = ld(A + B) - ld(B)
    rhs = ld(A + B + D) - ld(B + D)
    return DetRatioCheck(bool(lhs >= rhs - tol), lhs, rhs)


# ---------------------------------------------------------------- tightness construction

def orth_complement_projector(H, rho: float):
    """``rho (I - H^H (H H^H)^{-1} H)``: scaled projector onto the null space of ``H``."""
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    r, n = H.shape
    if r >= n:
        raise DomainError(f"no orthogonal complement: {r} rows >= {n} columns")
    if np.linalg.matrix_rank(H) < r:
        raise DomainError("channel matrix is row-rank deficient")
    P = H.conj().T @ np.linalg.solve(H @ H.conj().T, H)
    E = rho * (np.eye(n) - 0.5 * (P + P.conj().T))
    return 0.5 * (E + E.conj().T)


def conditions(ch: ChannelSet) -> tuple:
    """Which antenna-count conditions hold: ``(N_t > N_r1, N_t > sum of eavesdropper N_r)``."""
    n_r = ch.n_r
    return ch.n_t > n_r[0], ch.n_t > sum(n_r[1:])


def improve_if_slack(ch: ChannelSet, cov: CovarianceTriple, tau: float, condition: Optional[int] = None,
                     max_iter: int = 50) -> Union[str, CovarianceTriple]:
    """Trade excess multicast power for null-space power without losing secrecy.

    Under the first condition the freed power becomes noise invisible to the
    authorized receiver; under the second it becomes confidential signal
    invisible to every eavesdropper.  Returns ``"tight"`` if the multicast
    floor already holds with equality.
    """
    c1, c2 = conditions(ch)
    if condition is None:
        condition = 1 if c1 else (2 if c2 else None)
    if condition not in (1, 2) or (condition == 1 and not c1) or (condition == 2 and not c2):
        raise DomainError("construction unavailable: neither antenna condition holds")
    Q0, Qc, Qa = (np.asarray(Q) for Q in (cov.Q0, cov.Qc, cov.Qa))
    if model.multicast_rate_nats(ch, Q0, Qc, Qa) / LN2 <= tau + 1e-6:
        return "tight"
    if condition == 1:
        Hn = ch.h(1)
    else:
        Hn = np.vstack([ch.h(k) for k in ch.eves])
    free_dim = ch.n_t - Hn.shape[0]
    tr0 = float(np.trace(Q0).real)
    unit = orth_complement_projector(Hn, 1.0)

    def build(xi):
        E = (1.0 - xi) * tr0 / free_dim * unit
        if condition == 1:
            return xi * Q0, Qc, Qa + E
        return xi * Q0, Qc + E, Qa

    def rate(xi):
        return model.multicast_rate_nats(ch, *build(xi)) / LN2

    lo, hi = 0.0, 1.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if rate(mid) >= tau:
            hi = mid
        else:
            lo = mid
    return CovarianceTriple(*build(hi), cov.P)


# ---------------------------------------------------------------- linearization check

@dataclass
class MajorizationCheck:
    passed: bool
    n_samples: int
    min_gap: float
    max_tangency_error: float


def tse_majorization_check(ch: ChannelSet, n_samples: int = 500, seed: int = 0,
                           scale: float = 1.0) -> MajorizationCheck:
    """Tangent majorizers lie above the concave log-dets and touch at the expansion point."""
    rng = np.random.default_rng(seed)
    n = ch.n_t
    min_gap, tang = np.inf, 0.0
    for i in range(n_samples):
        Qc_t, Qa_t = random_psd(rng, n, scale), random_psd(rng, n, scale)
        Qc, Qa = random_psd(rng, n, scale), random_psd(rng, n, scale)
        f1, _ = dc.linearize_varphi1(ch, Qa_t)
        min_gap = min(min_gap, f1(Qa) - dc.varphi(ch, 1, Qa))
        tang = max(tang, abs(f1(Qa_t) - dc.varphi(ch, 1, Qa_t)))
        k = ch.receivers[i % ch.K]
        fk, _ = dc.linearize_phi_k(ch, k, Qc_t, Qa_t)
        min_gap = min(min_gap, fk(Qc, Qa) - dc.phi(ch, k, Qc, Qa))
        tang = max(tang, abs(fk(Qc_t, Qa_t) - dc.phi(ch, k, Qc_t, Qa_t)))
    return MajorizationCheck(bool(min_gap >= -1e-9 and tang <= 1e-10), n_samples, float(min_gap), float(tang))


# ---------------------------------------------------------------- capacity gradients

def capacity_gradients(ch: ChannelSet, cov: CovarianceTriple) -> dict:
    """Closed-form gradients (nats) of every capacity with respect to each covariance."""
    Q0, Qc, Qa = cov.Q0, cov.Qc, cov.Qa
    out = {}
    H1 = ch.h(1)
    g_ca, g_a = _grad_ld(H1, Qc + Qa), _grad_ld(H1, Qa)
    out["b"] = {"Qc": g_ca, "Qa": g_ca - g_a}
    for k in ch.eves:
        Hk = ch.h(k)
        g_ca, g_a = _grad_ld(Hk, Qc + Qa), _grad_ld(Hk, Qa)
        out[("e", k)] = {"Qc": g_ca, "Qa": g_ca - g_a}
    for k in ch.receivers:
        Hk = ch.h(k)
        g_all, g_ca = _grad_ld(Hk, Q0 + Qc + Qa), _grad_ld(Hk, Qc + Qa)
        out[("m", k)] = {"Q0": g_all, "Qc": g_all - g_ca, "Qa": g_all - g_ca}
    return out


@dataclass
class DanskinCheck:
    passed: bool
    max_error: float


def check_danskin(ch: ChannelSet, cov: CovarianceTriple, tol: float = 1e-8) -> DanskinCheck:
    """Surrogate gradients at the closed-form slacks equal the capacity gradients.

    Surrogate gradients come from the kernel's generic log-det evaluator on
    the assembled covariance step; capacity gradients from closed forms.
    """
    n = ch.n_t
    S1, S, U = ao.closed_form_slacks(ch, cov.Qc, cov.Qa)
    prog = ao.assemble_wsrm_subproblem(ch, cov.P, 1.0, S1, S, U)
    point = ([cov.Q0, cov.Qc, cov.Qa], np.zeros(prog.s))
    nn = n * n
    grads = capacity_gradients(ch, cov)
    sl = {"Q0": slice(0, nn), "Qc": slice(nn, 2 * nn), "Qa": slice(2 * nn, 3 * nn)}

    def surrogate_grad(fn):
        sub = LogDetProgram(n, prog.m, prog.s, fn, [])
        return objective_and_gradient(sub, point)[1]

    err = 0.0
    g = surrogate_grad(prog.objective)
    for v, G in grads["b"].items():
        err = max(err, np.max(np.abs(g[sl[v]] - to_vec(G))))
    cons = list(prog.constraints)
    for k in ch.eves:
        g = -surrogate_grad(cons.pop(0))  # constraint is beta - phi_e
        for v, G in grads[("e", k)].items():
            err = max(err, np.max(np.abs(g[sl[v]] - to_vec(G))))
    for k in ch.receivers:
        g = surrogate_grad(cons.pop(0))
        for v, G in grads[("m", k)].items():
            err = max(err, np.max(np.abs(g[sl[v]] - to_vec(G))))
    return DanskinCheck(bool(err <= tol), float(err))


# ---------------------------------------------------------------- KKT residuals

@dataclass
class KktReport:
    stationarity_Qc: float
    stationarity_Qa: float
    stationarity_Q0: float
    violation_eve: float
    violation_multicast: float
    slackness_eve: float
    slackness_multicast: float
    slackness_power: float
    slackness_cone: float
    simplex_rho: float
    simplex_mu: float
    sign_gamma: float
    sign_rho: float
    sign_mu: float
    neg_eig_A: float
    neg_eig_B: float
    neg_eig_C: float

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @property
    def stationarity(self) -> float:
        return max(self.stationarity_Qc, self.stationarity_Qa, self.stationarity_Q0)

    @property
    def max_residual(self) -> float:
        return max(self.as_dict().values())

    def passed(self, tol: float = 1e-4) -> bool:
        return self.max_residual <= tol


def kkt_residuals(ch: ChannelSet, P: float, lambda_c: float, cov: CovarianceTriple, duals) -> KktReport:
    """Residuals of the first-order conditions of the weighted-sum problem.

    The eavesdropper multipliers enter the stationarity equations as
    ``lambda_c * rho_k`` with ``rho`` on the simplex; the multicast
    multipliers ``mu`` are on the simplex directly.  Both are projected onto
    their simplexes before the stationarity residuals are formed, and the
    projection distance is reported separately.  Everything is in nats.
    """
    if duals is None:
        raise DomainError("no dual estimates: rerun ao_solve so the final covariance step's duals are captured")
    Q0, Qc, Qa = cov.Q0, cov.Qc, cov.Qa
    n = ch.n_t
    with_an = duals.cones.get("Qa") is not None
    grads = capacity_gradients(ch, cov)
    eye = np.eye(n)
    use_rho = lambda_c > 0 and len(ch.eves) > 0
    rho = np.asarray(duals.rho, dtype=float) if use_rho else np.zeros(len(ch.eves))
    mu = np.asarray(duals.mu, dtype=float)
    rho_p = _project_simplex(rho) if use_rho else rho
    mu_p = _project_simplex(mu)
    gamma = float(duals.gamma)
    A = duals.cones.get("Qa") if with_an else np.zeros((n, n))
    B, C = duals.cones["Q0"], duals.cones["Qc"]

    def stat(var, cone):
        R = -gamma * eye + cone
        if var in grads["b"]:
            R = R + lambda_c * grads["b"][var]
        for i, k in enumerate(ch.eves):
            if var in grads[("e", k)]:
                R = R - lambda_c * rho_p[i] * grads[("e", k)][var]
        for i, k in enumerate(ch.receivers):
            R = R + mu_p[i] * grads[("m", k)][var]
        return float(np.linalg.norm(R))

    ce = np.array([model.eve_capacity_nats(k, ch, Qc, Qa) for k in ch.eves])
    cm = np.array([model.multicast_capacity_nats(k, ch, Q0, Qc, Qa) for k in ch.receivers])
    beta, alpha = (ce.max() if ce.size else 0.0), cm.min()
    tr = float(np.trace(Q0 + Qc + Qa).real)

    def neg_eig(X):
        return max(0.0, -float(np.linalg.eigvalsh(X)[0]))

    cone_cs = max(abs(float(np.trace(B @ Q0).real)), abs(float(np.trace(C @ Qc).real)),
                  abs(float(np.trace(A @ Qa).real)) if with_an else 0.0)
    return KktReport(
        stationarity_Qc=stat("Qc", C),
        stationarity_Qa=stat("Qa", A) if with_an else 0.0,
        stationarity_Q0=stat("Q0", B),
        violation_eve=float(max(0.0, (ce - beta).max())) if ce.size else 0.0,
        violation_multicast=float(max(0.0, (alpha - cm).max())),
        slackness_eve=float(np.max(np.abs(rho * (ce - beta)))) if use_rho else 0.0,
        slackness_multicast=float(np.max(np.abs(mu * (cm - alpha)))),
        slackness_power=abs(gamma * (tr - P)),
        slackness_cone=cone_cs,
        simplex_rho=abs(rho.sum() - 1.0) if use_rho else 0.0,
        simplex_mu=abs(mu.sum() - 1.0),
        sign_gamma=max(0.0, -gamma),
        sign_rho=float(max(0.0, -rho.min())) if rho.size else 0.0,
        sign_mu=float(max(0.0, -mu.min())),
        neg_eig_A=neg_eig(A) if with_an else 0.0,
        neg_eig_B=neg_eig(B),
        neg_eig_C=neg_eig(C),
    )


def _project_simplex(v):
    """Euclidean projection onto the probability simplex."""
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        return v
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    r = idx[u - css / idx > 0][-1]
    return np.maximum(v - css[r - 1] / r, 0.0)


def perturb(cov: CovarianceTriple, size: float, rng) -> CovarianceTriple:
    """Move every covariance by ``size`` (Frobenius) along a random Hermitian direction."""
    out = []
    for Q in (cov.Q0, cov.Qc, cov.Qa):
        D = random_hermitian(rng, Q.shape[0])
        out.append(Q + size * D / np.linalg.norm(D))
    return CovarianceTriple(*out, cov.P)


# ---------------------------------------------------------------- scalar oracle

@dataclass(frozen=True)
class ScalarInstance:
    h: tuple
    P: float
    tau: Optional[float] = None
    lambda_c: Optional[float] = None
    delta: Optional[float] = None

    def __post_init__(self):
        if len(self.h) < 2:
            raise DomainError("need at least two receivers")
        if any(not np.isreal(x) or x <= 0 for x in self.h):
            raise DomainError("scalar channels must be real and positive")
        if self.P <= 0:
            raise DomainError("P must be positive")
        if self.delta is not None and self.delta <= 0:
            raise DomainError("grid step must be positive")
        if (self.tau is None) == (self.lambda_c is None):
            raise DomainError("give exactly one of tau or lambda_c")

    @property
    def K(self) -> int:
        return len(self.h)

    @property
    def step(self) -> float:
        return self.delta if self.delta is not None else self.P / 200.0

    def channels(self) -> ChannelSet:
        return ChannelSet.scalar(self.h)


@dataclass
class OracleResult:
    value: float
    argmax: tuple
    lipschitz: float
    error_bound: float
    feasible_points: int


def brute_force_scalar_oracle(inst: ScalarInstance) -> OracleResult:
    """Exhaustive grid over ``q0 + qc + qa <= P`` for single-antenna instances.

    In the floor mode the objective is the clamped secrecy rate over grid
    points whose multicast rate reaches ``tau``; in the weighted mode it is
    ``lambda_c * (C_b - max C_e) + min C_m``.  The reported error bound is
    the observed grid Lipschitz constant times the step.
    """
    if not isinstance(inst, ScalarInstance):
        raise DomainError("oracle needs a ScalarInstance")
    d = inst.step
    if d > 0.02 * inst.P * (1 + 1e-12):
        raise DomainError("grid step must be at most 0.02 P")
    m = int(np.floor(inst.P / d + 1e-9))
    g = np.arange(m + 1) * d
    q0, qc, qa = np.meshgrid(g, g, g, indexing="ij")
    inside = q0 + qc + qa <= inst.P * (1 + 1e-12)
    gains = np.asarray(inst.h, dtype=float) ** 2
    log2 = np.log2
    cb = log2(1 + gains[0] * (qc + qa)) - log2(1 + gains[0] * qa)
    ce = np.max([log2(1 + gk * (qc + qa)) - log2(1 + gk * qa) for gk in gains[1:]], axis=0)
    cm = np.min([log2(1 + gk * (q0 + qc + qa)) - log2(1 + gk * (qc + qa)) for gk in gains], axis=0)
    if inst.tau is not None:
        f = np.maximum(cb - ce, 0.0)
        ok = inside & (cm >= inst.tau - 1e-12)
    else:
        f = inst.lambda_c * (cb - ce) + cm
        ok = inside
    if not ok.any():
        raise DomainError("no grid point satisfies the multicast floor")
    vals = np.where(ok, f, -np.inf)
    idx = np.unravel_index(np.argmax(vals), vals.shape)
    lip = 0.0
    for ax in range(3):
        a = np.swapaxes(vals, 0, ax)
        both = np.isfinite(a[1:]) & np.isfinite(a[:-1])
        diff = np.abs(a[1:][both] - a[:-1][both])
        if diff.size:
            lip = max(lip, float(diff.max()) / d)
    return OracleResult(float(vals[idx]), (float(g[idx[0]]), float(g[idx[1]]), float(g[idx[2]])),
                        lip, lip * d, int(ok.sum()))


def scalar_tau_max(inst: ScalarInstance) -> float:
    """Multicast-only rate: ``log2(1 + min_k h_k^2 P)``."""
    return float(np.log2(1 + min(x * x for x in inst.h) * inst.P))

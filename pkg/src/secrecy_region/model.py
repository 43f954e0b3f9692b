"""Domain types and exact evaluation of the capacity and rate functions.

All internal arithmetic is done in nats; the public ``*_capacity`` and
``*_rate`` helpers convert to bits at the boundary.  Receiver indices are
1-based throughout: receiver 1 is the authorized (confidential) receiver,
receivers 2..K are the unauthorized set.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

LN2 = np.log(2.0)

# PSD tolerance: eigenvalues in [-PSD_TOL, 0) are clipped to zero.
PSD_TOL = 1e-9
HERM_TOL = 1e-10


class DomainError(ValueError):
    """Raised when a matrix argument violates a definiteness/shape contract."""


@dataclass(frozen=True)
class ChannelSet:
    """Channel matrices ``H[k-1]`` of shape ``(N_r[k], N_t)`` for receivers 1..K."""

    H: tuple

    def __post_init__(self):
        mats = tuple(np.atleast_2d(np.asarray(h, dtype=complex)) for h in self.H)
        object.__setattr__(self, "H", mats)
        if len(mats) < 2:
            raise DomainError("need K >= 2 receivers (at least one unauthorized)")
        n_t = mats[0].shape[1]
        for k, h in enumerate(mats, start=1):
            if h.ndim != 2 or h.shape[1] != n_t:
                raise DomainError(f"H_{k} has shape {h.shape}, expected (N_r, {n_t})")
            if not np.all(np.isfinite(h)):
                raise DomainError(f"H_{k} has non-finite entries")

    @classmethod
    def scalar(cls, gains: Sequence[float]) -> "ChannelSet":
        """Single-antenna channel set with real gains ``h_k``."""
        return cls(tuple(np.array([[complex(g)]]) for g in gains))

    @property
    def K(self) -> int:
        return len(self.H)

    @property
    def n_t(self) -> int:
        return self.H[0].shape[1]

    @property
    def n_r(self) -> tuple:
        return tuple(h.shape[0] for h in self.H)

    def h(self, k: int) -> np.ndarray:
        if not 1 <= k <= self.K:
            raise DomainError(f"receiver index {k} outside 1..{self.K}")
        return self.H[k - 1]

    @property
    def eves(self) -> range:
        return range(2, self.K + 1)

    @property
    def receivers(self) -> range:
        return range(1, self.K + 1)


@dataclass
class CovarianceTriple:
    """Multicast, confidential and artificial-noise covariances under budget ``P``."""

    Q0: np.ndarray
    Qc: np.ndarray
    Qa: np.ndarray
    P: float

    def __post_init__(self):
        self.Q0 = np.atleast_2d(np.asarray(self.Q0, dtype=complex))
        self.Qc = np.atleast_2d(np.asarray(self.Qc, dtype=complex))
        self.Qa = np.atleast_2d(np.asarray(self.Qa, dtype=complex))
        n = self.Q0.shape[0]
        for name in ("Q0", "Qc", "Qa"):
            if getattr(self, name).shape != (n, n):
                raise DomainError(f"{name} must be {n}x{n}")
        self.P = float(self.P)

    @classmethod
    def zeros(cls, n_t: int, P: float) -> "CovarianceTriple":
        z = np.zeros((n_t, n_t), dtype=complex)
        return cls(z, z.copy(), z.copy(), P)

    @property
    def n_t(self) -> int:
        return self.Q0.shape[0]

    @property
    def total_power(self) -> float:
        return float(np.trace(self.Q0 + self.Qc + self.Qa).real)

    def copy(self) -> "CovarianceTriple":
        return CovarianceTriple(self.Q0.copy(), self.Qc.copy(), self.Qa.copy(), self.P)


@dataclass(frozen=True)
class RatePoint:
    """Achievable rate pair in bits/s/Hz; ``raw_secrecy`` is the unclamped difference."""

    R0: float
    Rc: float
    raw_secrecy: float = field(default=0.0, compare=False)

    def __post_init__(self):
        if self.R0 < 0 or self.Rc < 0:
            raise DomainError(f"rates must be nonnegative, got ({self.R0}, {self.Rc})")


def _herm_defect(M: np.ndarray) -> float:
    return float(np.linalg.norm(M - M.conj().T))


def logdet_hermitian(M: np.ndarray) -> float:
    """Natural log-determinant of a Hermitian positive-definite matrix.

    Uses a Cholesky factorization; falls back to an eigendecomposition only
    to report the offending eigenvalue when ``M`` is not positive definite.
    """
    M = np.atleast_2d(np.asarray(M))
    scale = max(np.linalg.norm(M), 1.0)
    if _herm_defect(M) > HERM_TOL * scale:
        raise DomainError("matrix is not Hermitian")
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        lam = np.linalg.eigvalsh(0.5 * (M + M.conj().T))
        raise DomainError(f"matrix is not positive definite (eigenvalue {lam[0]:.3e})") from None
    d = np.diagonal(L).real
    return float(2.0 * np.sum(np.log(d)))


def clean_psd(Q: np.ndarray, name: str = "Q") -> np.ndarray:
    """Symmetrize and clip tiny negative eigenvalues; error on real violations."""
    Q = np.atleast_2d(np.asarray(Q, dtype=complex))
    if _herm_defect(Q) > 1e-8 * max(np.linalg.norm(Q), 1.0):
        raise DomainError(f"{name} is not Hermitian")
    Q = 0.5 * (Q + Q.conj().T)
    lam, V = np.linalg.eigh(Q)
    if lam[0] < -PSD_TOL:
        raise DomainError(f"{name} is not PSD (eigenvalue {lam[0]:.3e})")
    if lam[0] < 0:
        lam = np.clip(lam, 0.0, None)
        Q = (V * lam) @ V.conj().T
    return Q


def _ld_plus(H: np.ndarray, Q: np.ndarray) -> float:
    """ln det(I + H Q H^H)."""
    M = np.eye(H.shape[0]) + H @ Q @ H.conj().T
    return logdet_hermitian(0.5 * (M + M.conj().T))


def _clean(cov: CovarianceTriple):
    return clean_psd(cov.Q0, "Q0"), clean_psd(cov.Qc, "Qc"), clean_psd(cov.Qa, "Qa")


def _check_dims(ch: ChannelSet, cov: CovarianceTriple):
    if cov.n_t != ch.n_t:
        raise DomainError(f"covariances are {cov.n_t}x{cov.n_t} but N_t = {ch.n_t}")


# -- nats-valued kernels (used by the optimizers and the verification suite) --

def multicast_capacity_nats(k: int, ch: ChannelSet, Q0, Qc, Qa) -> float:
    H = ch.h(k)
    return _ld_plus(H, Q0 + Qc + Qa) - _ld_plus(H, Qc + Qa)


def bob_capacity_nats(ch: ChannelSet, Qc, Qa) -> float:
    H = ch.h(1)
    return _ld_plus(H, Qc + Qa) - _ld_plus(H, Qa)


def eve_capacity_nats(k: int, ch: ChannelSet, Qc, Qa) -> float:
    if k == 1:
        raise DomainError("receiver 1 is the authorized receiver, not an eavesdropper")
    H = ch.h(k)
    return _ld_plus(H, Qc + Qa) - _ld_plus(H, Qa)


def secrecy_diff_nats(ch: ChannelSet, Qc, Qa) -> float:
    """Unclamped ``C_b - max_k C_{e,k}`` in nats."""
    return bob_capacity_nats(ch, Qc, Qa) - max(eve_capacity_nats(k, ch, Qc, Qa) for k in ch.eves)


def multicast_rate_nats(ch: ChannelSet, Q0, Qc, Qa) -> float:
    return min(multicast_capacity_nats(k, ch, Q0, Qc, Qa) for k in ch.receivers)


# -- public bits-valued API --

def multicast_capacity(k: int, ch: ChannelSet, cov: CovarianceTriple) -> float:
    """Multicast capacity of receiver ``k`` in bits, treating Qc+Qa as noise."""
    _check_dims(ch, cov)
    return multicast_capacity_nats(k, ch, *_clean(cov)) / LN2


def bob_capacity(ch: ChannelSet, cov: CovarianceTriple) -> float:
    _check_dims(ch, cov)
    _, Qc, Qa = _clean(cov)
    return bob_capacity_nats(ch, Qc, Qa) / LN2


def eve_capacity(k: int, ch: ChannelSet, cov: CovarianceTriple) -> float:
    _check_dims(ch, cov)
    _, Qc, Qa = _clean(cov)
    return eve_capacity_nats(k, ch, Qc, Qa) / LN2


def secrecy_rate(ch: ChannelSet, cov: CovarianceTriple) -> float:
    """Clamped secrecy rate ``max(0, C_b - max_k C_{e,k})`` in bits."""
    return max(0.0, secrecy_difference(ch, cov))


def secrecy_difference(ch: ChannelSet, cov: CovarianceTriple) -> float:
    _check_dims(ch, cov)
    _, Qc, Qa = _clean(cov)
    return secrecy_diff_nats(ch, Qc, Qa) / LN2


def multicast_rate(ch: ChannelSet, cov: CovarianceTriple) -> float:
    _check_dims(ch, cov)
    return multicast_rate_nats(ch, *_clean(cov)) / LN2


def rate_point(ch: ChannelSet, cov: CovarianceTriple) -> RatePoint:
    """Assemble the (R0, Rc) pair; the only place the secrecy difference is clamped."""
    raw = secrecy_difference(ch, cov)
    return RatePoint(max(0.0, multicast_rate(ch, cov)), max(0.0, raw), raw)


def weighted_objective(lambda_c: float, ch: ChannelSet, cov: CovarianceTriple) -> float:
    """``lambda_c * (C_b - max C_e) + min C_m`` in bits (secrecy term unclamped)."""
    if lambda_c < 0:
        raise DomainError("lambda_c must be nonnegative")
    return lambda_c * secrecy_difference(ch, cov) + multicast_rate(ch, cov)


@dataclass
class CovarianceReport:
    hermitian_defect: dict
    min_eigenvalue: dict
    trace_slack: float
    passed: bool

    def __bool__(self):
        return self.passed


def validate_covariances(cov: CovarianceTriple) -> CovarianceReport:
    """Diagnose Hermitian-ness, PSD-ness and the power budget; never raises."""
    herm, mins = {}, {}
    ok = True
    for name in ("Q0", "Qc", "Qa"):
        Q = getattr(cov, name)
        nrm = float(np.linalg.norm(Q))
        herm[name] = _herm_defect(Q)
        mins[name] = float(np.linalg.eigvalsh(0.5 * (Q + Q.conj().T))[0])
        if herm[name] > 1e-10 * nrm or mins[name] < -PSD_TOL:
            ok = False
    tr = cov.total_power
    slack = cov.P - tr
    if tr > cov.P * (1 + 1e-9):
        ok = False
    return CovarianceReport(herm, mins, slack, ok)

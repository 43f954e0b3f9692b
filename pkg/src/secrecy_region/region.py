"""Boundary records shared by the tracers, baselines and file writers."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .model import CovarianceTriple


@dataclass
class Iterate:
    """One outer iteration: surrogate or weighted objective plus exact rates."""
    n: int
    objective_nats: float
    multicast_bits: float
    secrecy_bits: float

    def as_dict(self) -> dict:
        return {"n": self.n, "objective_nats": self.objective_nats,
                "multicast_bits": self.multicast_bits, "secrecy_bits": self.secrecy_bits}


@dataclass
class BoundaryPoint:
    param: float
    R0: float
    Rc: float
    outer_iters: int = 0
    inner_solves: int = 0
    wall_ms: float = 0.0
    status: str = "ok"
    raw_secrecy: float = 0.0
    cov: Optional[CovarianceTriple] = field(default=None, repr=False)
    trace: list = field(default_factory=list, repr=False)
    flags: tuple = ()

    @property
    def ok(self) -> bool:
        return self.status in ("ok", "converged", "max_iter", "endpoint")


@dataclass
class RegionBoundary:
    method: str
    points: list = field(default_factory=list)
    P: float = 0.0
    seed: Optional[int] = None
    meta: dict = field(default_factory=dict)

    @property
    def ok_points(self) -> list:
        return [p for p in self.points if p.ok]

    def pairs(self) -> list:
        return [(p.R0, p.Rc) for p in self.ok_points]

    def n_failed(self) -> int:
        return sum(not p.ok for p in self.points)

    def max_secrecy_at(self, r0: float, tol: float = 1e-9) -> float:
        """Largest Rc among points with multicast rate at least ``r0``."""
        vals = [p.Rc for p in self.ok_points if p.R0 >= r0 - tol]
        return max(vals) if vals else 0.0

    def dominates_point(self, r0: float, rc: float, tol: float = 0.0) -> bool:
        """True if some boundary point weakly dominates ``(r0, rc)``."""
        return any(p.R0 >= r0 - tol and p.Rc >= rc - tol for p in self.ok_points)

"""Channel generation, baselines, complexity counts and experiment orchestration.

Random channels use numpy's ``PCG64`` bit generator seeded with the
experiment seed.  Receivers are drawn in order 1..K; for each one the real
parts of the whole ``(N_r, N_t)`` matrix are drawn first, then the
imaginary parts, both with variance 1/2.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import ao, dc
from .model import ChannelSet, CovarianceTriple, DomainError
from .region import BoundaryPoint, RegionBoundary

log = logging.getLogger(__name__)

CSV_HEADER = ("method", "seed", "P_dB", "param", "R0_bits", "Rc_bits",
              "outer_iters", "inner_solves", "wall_ms", "status")
DEFAULT_P_DB = (0.0, 4.0, 8.0, 12.0, 16.0, 20.0)
METHODS = ("dc", "ao", "no-an-dc", "no-an-ao", "tdma")

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2


def db_to_linear(p_db: float) -> float:
    return float(10.0 ** (p_db / 10.0))


def linear_to_db(p: float) -> float:
    return float(10.0 * np.log10(p))


def generate_channels(seed: int, n_t: int, n_r: Sequence[int]) -> ChannelSet:
    """I.i.d. circularly-symmetric complex Gaussian channels with unit entry variance."""
    if n_t < 1 or not n_r or any(int(r) < 1 for r in n_r):
        raise DomainError("antenna counts must be positive")
    rng = np.random.Generator(np.random.PCG64(seed))
    scale = np.sqrt(0.5)
    mats = []
    for r in n_r:
        re = rng.standard_normal((int(r), n_t))
        im = rng.standard_normal((int(r), n_t))
        mats.append(scale * (re + 1j * im))
    return ChannelSet(tuple(mats))


def run_no_an(ch: ChannelSet, P: float, method: str = "dc", grid=None, cfg=None) -> RegionBoundary:
    """Trace the region with the artificial-noise covariance fixed at zero.

    ``grid`` is a sequence of multicast floors (``dc``) or weights (``ao``).
    """
    if method == "dc":
        cfg = cfg or dc.QomsSweepConfig()
        if grid is not None:
            cfg = replace(cfg, taus=tuple(grid))
        return dc.trace_region_dc(ch, P, cfg, with_an=False)
    if method == "ao":
        cfg = cfg or ao.LambdaSweepConfig()
        if grid is not None:
            cfg = replace(cfg, lambdas=tuple(grid))
        return ao.trace_region_ao(ch, P, cfg, with_an=False)
    raise DomainError(f"no-AN method must be 'dc' or 'ao', got {method!r}")


def run_tdma(ch: ChannelSet, P: float, grid=None, cfg: Optional[dc.QomsSweepConfig] = None) -> RegionBoundary:
    """Time sharing between the multicast-only and confidential-only points.

    ``param`` is the multicast time fraction; the equal-slot point is at 0.5
    and is always included.
    """
    cfg = cfg or dc.QomsSweepConfig()
    t0 = time.perf_counter()
    tau_max, _ = dc.compute_tau_max(ch, P, cfg.solver)
    res = dc.dc_solve(ch, P, 0.0, cfg)
    rc_max = res.Rc
    ts = np.linspace(0.0, 1.0, 11) if grid is None else np.asarray(grid, dtype=float)
    if np.any((ts < 0) | (ts > 1)):
        raise DomainError("time fractions must lie in [0, 1]")
    ts = np.unique(np.concatenate([ts, [0.5]]))
    wall = 1e3 * (time.perf_counter() - t0)
    region = RegionBoundary("tdma", P=P, meta={"tau_max": float(tau_max), "rc_max": float(rc_max),
                                                "equal_slot": (float(tau_max) / 2, float(rc_max) / 2)})
    for t in ts:
        region.points.append(BoundaryPoint(float(t), float(t * tau_max), float((1 - t) * rc_max),
                                           res.iterations, res.inner_solves + 1, wall, "ok"))
    return region


def complexity_estimate(n_t: int, k: int) -> tuple:
    """Arithmetic-cost orders of one DC subproblem and one AO covariance step.

    Returns ``(n1, n2, T1, T2)`` with ``n1 = 3 N_t^2 + 1`` and
    ``n2 = 3 N_t^2 + 2`` real variables.
    """
    if n_t < 1 or k < 1:
        raise DomainError("N_t and K must be at least 1")

    def cost(n):
        return math.sqrt(2 * k + 3 * n_t) * (n * (2 * k + 3 * n_t ** 3) + n ** 2 * (2 * k + 3 * n_t ** 2) + n ** 3)

    n1, n2 = 3 * n_t ** 2 + 1, 3 * n_t ** 2 + 2
    return n1, n2, cost(n1), cost(n2)


# ---------------------------------------------------------------- file formats

def covariance_to_json(cov: CovarianceTriple) -> dict:
    """Binary-free dump: each matrix as nested ``real`` and ``imag`` lists."""
    out = {"P": cov.P}
    for name in ("Q0", "Qc", "Qa"):
        M = getattr(cov, name)
        out[name] = {"real": M.real.tolist(), "imag": M.imag.tolist()}
    return out


def covariance_from_json(data: dict) -> CovarianceTriple:
    mats = [np.asarray(data[n]["real"], dtype=float) + 1j * np.asarray(data[n]["imag"], dtype=float)
            for n in ("Q0", "Qc", "Qa")]
    return CovarianceTriple(*mats, data["P"])


def channels_to_json(ch: ChannelSet, seed: Optional[int] = None) -> dict:
    return {"seed": seed, "n_t": ch.n_t, "n_r": list(ch.n_r),
            "H": [{"real": h.real.tolist(), "imag": h.imag.tolist()} for h in ch.H]}


def channels_from_json(data: dict) -> ChannelSet:
    return ChannelSet(tuple(np.asarray(h["real"]) + 1j * np.asarray(h["imag"]) for h in data["H"]))


def _fmt(v) -> str:
    return repr(float(v))


def boundary_rows(region: RegionBoundary, seed, p_db: float) -> list:
    return [[region.method, seed, _fmt(p_db), _fmt(p.param), _fmt(p.R0), _fmt(p.Rc),
             p.outer_iters, p.inner_solves, f"{p.wall_ms:.3f}", p.status] for p in region.points]


def write_csv(path, rows, header=CSV_HEADER):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    atomic_write(path, buf.getvalue())


def trace_lines(point: BoundaryPoint) -> str:
    return "".join(json.dumps(it.as_dict()) + "\n" for it in point.trace)


def atomic_write(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------- orchestration

class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    seed: int
    n_t: int = 5
    n_r: list = field(default_factory=lambda: [3, 3, 3, 3])
    k: Optional[int] = None
    p_db: list = field(default_factory=lambda: list(DEFAULT_P_DB))
    method: str = "dc"
    n_points: int = 21
    taus: Optional[list] = None
    lambdas: Optional[list] = None
    n_log: int = 20
    tdma_grid: Optional[list] = None
    tol: float = 1e-4
    max_iter: Optional[int] = None
    out: str = "boundary.csv"
    trace_dir: Optional[str] = None
    cov_dir: Optional[str] = None

    def __post_init__(self):
        self.n_r = [int(r) for r in self.n_r]
        if self.k is None:
            self.k = len(self.n_r)
        self.p_db = [float(p) for p in self.p_db]
        self.validate()

    def validate(self):
        if self.seed is None:
            raise ConfigError("a seed is required")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.k != len(self.n_r):
            raise ConfigError(f"K={self.k} does not match the {len(self.n_r)} receive-antenna entries")
        if self.k < 2:
            raise ConfigError("need at least two receivers")
        if self.n_t < 1 or any(r < 1 for r in self.n_r):
            raise ConfigError("antenna counts must be positive")
        if not self.p_db or not all(np.isfinite(self.p_db)):
            raise ConfigError("power list must be nonempty and finite")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {', '.join(METHODS)}")
        for name in ("taus", "lambdas", "tdma_grid"):
            g = getattr(self, name)
            if g is not None and len(g) == 0:
                raise ConfigError(f"{name} grid is empty")
        if self.n_points < 1 or self.n_log < 1:
            raise ConfigError("grids must be nonempty")
        if self.tol <= 0:
            raise ConfigError("tolerance must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(extra))}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class ExperimentOutcome:
    exit_code: int
    regions: dict
    files: list
    messages: list


def _cell(cfg: ExperimentConfig, ch: ChannelSet, p_db: float) -> RegionBoundary:
    P = db_to_linear(p_db)
    method = cfg.method
    if method in ("dc", "no-an-dc", "tdma"):
        kw = {"n_points": cfg.n_points, "tol": cfg.tol}
        if cfg.taus is not None:
            kw["taus"] = tuple(cfg.taus)
        if cfg.max_iter is not None:
            kw["max_outer"] = cfg.max_iter
        dcfg = dc.QomsSweepConfig(**kw)
        if method == "tdma":
            return run_tdma(ch, P, cfg.tdma_grid, dcfg)
        return dc.trace_region_dc(ch, P, dcfg, with_an=(method == "dc"))
    kw = {"n_log": cfg.n_log, "tol": cfg.tol}
    if cfg.lambdas is not None:
        kw["lambdas"] = tuple(cfg.lambdas)
    if cfg.max_iter is not None:
        kw["max_iter"] = cfg.max_iter
    return ao.trace_region_ao(ch, P, ao.LambdaSweepConfig(**kw), with_an=(method == "ao"))


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("SRR_THREADS", "1")))
    except ValueError:
        return 1


def run_experiment(cfg: ExperimentConfig) -> ExperimentOutcome:
    """Run every power level of ``cfg`` and write the boundary files.

    Power levels are independent cells; up to ``SRR_THREADS`` run at once.
    Per-point traces go to ``trace_dir`` and covariances to ``cov_dir`` when
    set, one file per point, each written atomically.
    """
    msgs = []
    try:
        cfg.validate()
        ch = generate_channels(int(cfg.seed), cfg.n_t, cfg.n_r)
    except (ConfigError, DomainError) as exc:
        return ExperimentOutcome(EXIT_FATAL, {}, [], [f"config error: {exc}"])

    def work(p_db):
        try:
            return p_db, _cell(cfg, ch, p_db), None
        except Exception as exc:  # a whole cell failing is fatal for the run
            return p_db, None, exc

    n_workers = min(_threads(), len(cfg.p_db))
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(work, cfg.p_db))
    else:
        results = [work(p) for p in cfg.p_db]

    regions, rows, files = {}, [], []
    fatal = partial = False
    for p_db, region, exc in results:
        if exc is not None:
            fatal = True
            msgs.append(f"fatal: method={cfg.method} seed={cfg.seed} P_dB={p_db:g}: {exc}")
            continue
        region.seed = cfg.seed
        regions[p_db] = region
        rows.extend(boundary_rows(region, cfg.seed, p_db))
        for i, p in enumerate(region.points):
            if not p.ok:
                partial = True
                msgs.append(f"point failed: method={cfg.method} seed={cfg.seed} P_dB={p_db:g} "
                            f"param={p.param!r}: {p.status}")
            stem = f"{cfg.method}_seed{cfg.seed}_P{p_db:g}dB_{i:02d}"
            if cfg.trace_dir and p.trace:
                path = Path(cfg.trace_dir) / f"{stem}.jsonl"
                atomic_write(path, trace_lines(p))
                files.append(str(path))
            if cfg.cov_dir and p.cov is not None:
                path = Path(cfg.cov_dir) / f"{stem}.json"
                data = covariance_to_json(p.cov)
                data.update({"method": cfg.method, "seed": cfg.seed, "P_dB": p_db, "param": p.param})
                atomic_write(path, json.dumps(data))
                files.append(str(path))
    if rows or not fatal:
        write_csv(cfg.out, rows)
        files.insert(0, str(cfg.out))
    code = EXIT_FATAL if fatal else (EXIT_PARTIAL if partial else EXIT_OK)
    return ExperimentOutcome(code, regions, files, msgs)

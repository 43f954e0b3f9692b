"""Acceptance checks, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line with the measured numbers
before asserting, so ``pytest -v`` shows the full scorecard even when a
criterion is red.
"""
import time

import numpy as np
import pytest

from secrecy_region import ao, dc, harness, model, verify
from secrecy_region.model import ChannelSet

from conftest import random_channels

TAU_DB = (0.0, 10.0, 20.0)


@pytest.fixture
def report(capsys):
    def emit(name, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} {name}: {detail}", flush=True)
        return ok
    return emit


# ---------------------------------------------------------------- identities

def test_identity_suite(report):
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    lemma = [verify.check_lemma3(verify.random_psd(rng, 3) + 0.1 * np.eye(3)) for _ in range(50)]
    dets = [verify.check_det_ratio(verify.random_psd(rng, 4), verify.random_psd(rng, 4) + 0.01 * np.eye(4),
                                   verify.random_psd(rng, 4)) for _ in range(200)]
    maj = verify.tse_majorization_check(random_channels(rng, 4, [3, 2, 2]), n_samples=500, seed=7)
    dansk = []
    for _ in range(100):
        ch = random_channels(rng, 3, [2, 1, 2])
        cov = model.CovarianceTriple(*(verify.random_psd(rng, 3) for _ in range(3)), 10.0)
        dansk.append(verify.check_danskin(ch, cov))
    wall = time.perf_counter() - t0
    counts = (sum(c.passed for c in lemma), sum(d.passed for d in dets), maj.passed, sum(d.passed for d in dansk))
    ok = counts == (50, 200, True, 100) and wall < 60.0
    report("identities", ok, f"variational {counts[0]}/50, det_ratio {counts[1]}/200, majorization "
           f"{'ok' if counts[2] else 'bad'} (min gap {maj.min_gap:.2e}), danskin {counts[3]}/100, {wall:.1f}s")
    assert ok


# ---------------------------------------------------------------- scalar oracle

def test_scalar_oracle_agreement(report):
    rng = np.random.default_rng(2024)
    n_ok = n_feas = n = 0
    worst = np.inf
    for i in range(50):
        K = 2 + i % 2
        P = (1.0, 10.0)[(i // 2) % 2]
        h = tuple(float(x) for x in rng.uniform(0.3, 2.0, K))
        ch = ChannelSet.scalar(h)
        tmax = verify.scalar_tau_max(verify.ScalarInstance(h, P, tau=0.0))
        for tau in (0.0, tmax / 2):
            orc = verify.brute_force_scalar_oracle(verify.ScalarInstance(h, P, tau=tau, delta=P / 100))
            res = dc.dc_solve(ch, P, tau)
            feas = (model.multicast_rate(ch, res.cov) >= tau - 1e-6
                    and model.validate_covariances(res.cov).passed)
            n += 1
            n_ok += res.Rc >= orc.value - 0.05
            n_feas += feas
            worst = min(worst, res.Rc - orc.value)
        for lam in (0.5, 1.0, 2.0):
            orc = verify.brute_force_scalar_oracle(verify.ScalarInstance(h, P, lambda_c=lam, delta=P / 100))
            res = ao.ao_solve(ch, P, lam)
            val = model.weighted_objective(lam, ch, res.cov)
            n += 1
            n_ok += val >= orc.value - 0.05
            n_feas += model.validate_covariances(res.cov).passed
            worst = min(worst, val - orc.value)
    ok = n_ok >= 0.95 * n and n_feas == n
    report("scalar-oracle", ok, f"within 0.05 bits {n_ok}/{n}, feasible {n_feas}/{n}, worst margin {worst:+.4f}")
    assert ok


# ---------------------------------------------------------------- convergence protocol

@pytest.fixture(scope="module")
def protocol_runs():
    ch = harness.generate_channels(0, 5, [3, 3, 3, 3])
    out = {}
    for db in TAU_DB:
        P = harness.db_to_linear(db)
        out[db] = (dc.dc_solve(ch, P, 2.0), ao.ao_solve(ch, P, 1.0))
    return out


def test_convergence_protocol(report, protocol_runs):
    parts, ok = [], True
    for db, (d, a) in protocol_runs.items():
        drops = [x - y for x, y in zip(a.trace, a.trace[1:])]
        worst = max(drops) if drops else 0.0
        good = (d.converged and d.iterations <= 50 and abs(d.R0 - 2.0) <= 1e-3
                and a.converged and a.iterations <= 100 and worst <= 1e-9)
        ok &= good
        parts.append(f"{db:g}dB dc {d.iterations} it R0={d.R0:.6f}, ao {a.iterations} it max drop {worst:.1e}")
    report("convergence", ok, "; ".join(parts))
    assert ok


# ---------------------------------------------------------------- sweeps at 10 dB

@pytest.fixture(scope="module")
def sweeps():
    """AN and no-AN sweeps plus the TDMA equal-slot point on ten 3-antenna instances."""
    P = 10.0
    out = []
    for seed in range(10):
        ch = harness.generate_channels(seed, 3, [2, 2, 2])
        an = dc.trace_region_dc(ch, P, dc.QomsSweepConfig(n_points=5))
        taus = tuple(p.param for p in an.points)
        no = dc.trace_region_dc(ch, P, dc.QomsSweepConfig(taus=taus), with_an=False)
        tdma = harness.run_tdma(ch, P, grid=[0.5])
        out.append((ch, an, no, tdma))
    return out


def test_rescale_tightness(report, sweeps):
    n = n_tight = n_slack_ok = n_c1 = 0
    worst = 0.0
    for ch, an, _, _ in sweeps:
        c1 = verify.conditions(ch)[0]
        for p in an.points:
            n += 1
            err = abs(p.R0 - p.param)
            worst = max(worst, err)
            n_tight += p.ok and err <= 1e-6
            if c1:
                n_c1 += 1
                n_slack_ok += p.trace[-1].multicast_bits - p.param <= 1e-4
    ok = n_tight == n and n_c1 > 0 and n_slack_ok >= 0.9 * n_c1
    report("rescale", ok, f"tight {n_tight}/{n} (worst {worst:.1e}), pre-rescale slack <= 1e-4 "
           f"{n_slack_ok}/{n_c1} points under the first antenna condition")
    assert ok


def test_region_dominance(report, sweeps):
    n_inst = len(sweeps)
    nested = beats_tdma = 0
    worst = np.inf
    for _, an, no, tdma in sweeps:
        diffs = [p.Rc - q.Rc for p, q in zip(an.points, no.points) if p.ok and q.ok]
        complete = len(diffs) == len(an.points)
        nested += complete and min(diffs) >= -1e-3
        worst = min(worst, min(diffs))
        r0, rc = tdma.meta["equal_slot"]
        beats_tdma += an.max_secrecy_at(r0) >= rc
    ok = nested == n_inst and beats_tdma >= 0.95 * n_inst
    report("dominance", ok, f"AN >= no-AN on {nested}/{n_inst} (worst {worst:+.2e}), "
           f"AN >= TDMA equal slot on {beats_tdma}/{n_inst}")
    assert ok


# ---------------------------------------------------------------- KKT certificate

@pytest.fixture(scope="module")
def kkt_runs():
    out = []
    for seed in range(3):
        ch = harness.generate_channels(seed, 3, [2, 2, 2])
        for lam in (0.5, 1.0, 2.0):
            out.append((ch, lam, ao.ao_solve(ch, 10.0, lam, ao.LambdaSweepConfig(tol=1e-6))))
    return out


def test_kkt_certificate(report, kkt_runs):
    reps = [(verify.kkt_residuals(ch, 10.0, lam, res.cov, res.duals), res.converged) for ch, lam, res in kkt_runs]
    n_pass = sum(conv and rep.passed(1e-4) for rep, conv in reps)
    worst = max(rep.max_residual for rep, _ in reps)
    worst_field = max(reps[0][0].as_dict(), key=lambda k: max(r.as_dict()[k] for r, _ in reps))
    ch, lam, res = kkt_runs[0]
    rng = np.random.default_rng(17)
    fails = sum(verify.kkt_residuals(ch, 10.0, lam, verify.perturb(res.cov, 1e-2, rng), res.duals).stationarity
                > 1e-4 for _ in range(20))
    ok = n_pass == len(reps) and fails == 20
    report("kkt", ok, f"converged runs within 1e-4: {n_pass}/{len(reps)} (worst {worst:.2e} in {worst_field}); "
           f"perturbed points failing stationarity {fails}/20")
    assert ok


# ---------------------------------------------------------------- complexity

def test_complexity_hand_values(report):
    n1, n2, t1, t2 = harness.complexity_estimate(1, 1)
    m1, m2, u1, u2 = harness.complexity_estimate(5, 4)
    # N_t=5, K=4: n1=76, n2=77, phi(n) = n*383 + n^2*83 + n^3, scaled by sqrt(23)
    hand = (np.sqrt(5) * 164, np.sqrt(5) * 275,
            np.sqrt(23) * (76 * 383 + 76 ** 2 * 83 + 76 ** 3), np.sqrt(23) * (77 * 383 + 77 ** 2 * 83 + 77 ** 3))
    ok = ((n1, n2, m1, m2) == (4, 5, 76, 77) and np.allclose((t1, t2, u1, u2), hand, rtol=1e-12)
          and t2 > t1 and u2 > u1)
    report("complexity", ok, f"(1,1): T1={t1:.1f} T2={t2:.1f}; (5,4): T1={u1:.4g} T2={u2:.4g}")
    assert ok


# ---------------------------------------------------------------- runtime report

def test_runtime_report(report):
    ch = harness.generate_channels(0, 5, [3, 3, 3, 3])
    parts = []
    for db in (0.0, 20.0):
        P = harness.db_to_linear(db)
        tm, _ = dc.compute_tau_max(ch, P)
        t_dc = []
        for frac in (0.25, 0.5, 0.75):
            t0 = time.perf_counter()
            dc.dc_solve(ch, P, frac * tm)
            t_dc.append(time.perf_counter() - t0)
        t_ao = []
        for lam in (0.5, 1.0, 2.0):
            t0 = time.perf_counter()
            ao.ao_solve(ch, P, lam)
            t_ao.append(time.perf_counter() - t0)
        parts.append(f"{db:g}dB dc {np.mean(t_dc):.2f}s ao {np.mean(t_ao):.2f}s per point")
    report("runtime", True, "; ".join(parts) + " (reported only)")

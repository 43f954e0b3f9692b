import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from secrecy_region import dc, model, verify
from secrecy_region.kernel import LogDetProgram
from secrecy_region.model import ChannelSet, CovarianceTriple, DomainError

from conftest import random_channels


def scalar_cov(q0=0.0, qc=0.0, qa=0.0, P=10.0):
    return CovarianceTriple([[q0]], [[qc]], [[qa]], P)


# ---------------------------------------------------------------- tau_max

def test_tau_max_zero_power():
    tm, Q0 = dc.compute_tau_max(ChannelSet.scalar([1.0, 2.0]), 0.0)
    assert tm == 0.0 and np.all(Q0 == 0)


def test_tau_max_scalar_closed_form():
    tm, Q0 = dc.compute_tau_max(ChannelSet.scalar([1.0, 2.0]), 3.0)
    assert tm == pytest.approx(2.0, abs=1e-6)
    assert Q0[0, 0].real == pytest.approx(3.0, abs=1e-5)


def test_tau_max_miso_matches_one_dimensional_oracle(rng):
    # two single-antenna receivers: a rank-one beam in span{h1^H, h2^H} is optimal,
    # and the relative phase that serves both users is fixed by h1 v2
    ch = random_channels(rng, 2, [1, 1])
    P = 4.0
    tm, _ = dc.compute_tau_max(ch, P)
    h1, h2 = ch.h(1)[0], ch.h(2)[0]
    v1, v2 = h1.conj() / np.linalg.norm(h1), h2.conj() / np.linalg.norm(h2)
    phase = np.exp(-1j * np.angle(h1 @ v2))

    def neg_min_rate(theta):
        u = np.cos(theta) * v1 + np.sin(theta) * phase * v2
        u = u / np.linalg.norm(u)
        return -min(np.log2(1 + P * abs(h @ u) ** 2) for h in (h1, h2))

    r = minimize_scalar(neg_min_rate, bounds=(0, np.pi / 2), method="bounded", options={"xatol": 1e-12})
    assert tm == pytest.approx(-r.fun, abs=1e-4)


# ---------------------------------------------------------------- linearizations

def test_linearize_varphi1_at_zero():
    ch = ChannelSet.scalar([1.0, 1.0])
    fn, S = dc.linearize_varphi1(ch, np.zeros((1, 1)))
    assert S[0, 0].real == pytest.approx(1.0)
    assert fn(np.array([[0.5]])) == pytest.approx(0.5)
    assert fn(np.array([[0.5]])) >= np.log(1.5)


def test_linearize_phi_k_at_zero():
    ch = ChannelSet.scalar([1.0, 1.0])
    fn, U = dc.linearize_phi_k(ch, 1, np.zeros((1, 1)), np.zeros((1, 1)))
    assert U[0, 0].real == pytest.approx(1.0)
    assert fn(np.eye(1), np.eye(1)) == pytest.approx(2.0)
    assert fn(np.eye(1), np.eye(1)) >= np.log(3.0)


def test_linearizations_touch_at_expansion_point(rng):
    ch = random_channels(rng, 3, [2, 2, 1])
    Qc, Qa = verify.random_psd(rng, 3), verify.random_psd(rng, 3)
    f1, _ = dc.linearize_varphi1(ch, Qa)
    assert f1(Qa) == pytest.approx(dc.varphi(ch, 1, Qa), abs=1e-12)
    for k in ch.receivers:
        fk, U = dc.linearize_phi_k(ch, k, Qc, Qa)
        assert fk(Qc, Qa) == pytest.approx(dc.phi(ch, k, Qc, Qa), abs=1e-12)
        H = ch.h(k)
        expect = H.conj().T @ np.linalg.solve(np.eye(H.shape[0]) + H @ (Qc + Qa) @ H.conj().T, H)
        assert np.allclose(U, expect)


@given(st.integers(0, 2 ** 32 - 1))
def test_majorization_property(seed):
    rng = np.random.default_rng(seed)
    ch = random_channels(rng, 2, [1, 2, 1])
    assert verify.tse_majorization_check(ch, n_samples=100, seed=seed).passed


# ---------------------------------------------------------------- subproblem

def test_subproblem_passes_concavity_certificate(rng):
    ch = random_channels(rng, 3, [2, 1, 2])
    prog = dc.assemble_dc_subproblem(ch, 10.0, 1.0, verify.random_psd(rng, 3), verify.random_psd(rng, 3))
    assert isinstance(prog, LogDetProgram)
    prog.check()
    assert all(t.weight >= 0 for fn in [prog.objective] + list(prog.constraints) for t in fn.terms)


def test_subproblem_without_noise_has_two_matrices(rng):
    ch = random_channels(rng, 2, [1, 1])
    prog = dc.assemble_dc_subproblem(ch, 10.0, 0.5, np.zeros((2, 2)), np.zeros((2, 2)), with_an=False)
    assert prog.m == 2


# ---------------------------------------------------------------- rescale

def test_rescale_scalar_inversion():
    ch = ChannelSet.scalar([1.0, 1.0])
    out = dc.rescale_to_equality(ch, scalar_cov(q0=3.0), 1.0)
    assert out.Q0[0, 0].real == pytest.approx(1.0, abs=1e-5)
    assert model.multicast_rate(ch, out) == pytest.approx(1.0, abs=1e-6)
    assert model.multicast_rate(ch, out) >= 1.0


def test_rescale_identity_when_tight():
    ch = ChannelSet.scalar([1.0, 1.0])
    cov = scalar_cov(q0=3.0)
    assert dc.rescale_to_equality(ch, cov, 2.0) is cov


def test_rescale_zero_floor_zeroes_multicast():
    ch = ChannelSet.scalar([1.0, 1.0])
    out = dc.rescale_to_equality(ch, scalar_cov(q0=3.0, qc=1.0), 0.0)
    assert np.all(out.Q0 == 0) and out.Qc[0, 0] == 1.0


def test_rescale_rejects_infeasible_input():
    ch = ChannelSet.scalar([1.0, 1.0])
    with pytest.raises(DomainError):
        dc.rescale_to_equality(ch, scalar_cov(q0=1.0), 2.0)


def test_rescale_keeps_secrecy(rng):
    ch = random_channels(rng, 3, [2, 1, 2])
    cov = CovarianceTriple(verify.random_psd(rng, 3, 3.0), verify.random_psd(rng, 3), verify.random_psd(rng, 3), 20.0)
    tau = 0.5 * model.multicast_rate(ch, cov)
    out = dc.rescale_to_equality(ch, cov, tau)
    assert abs(model.multicast_rate(ch, out) - tau) <= 1e-6
    assert model.secrecy_difference(ch, out) == model.secrecy_difference(ch, cov)


# ---------------------------------------------------------------- dc_solve

def test_dc_scalar_against_grid_oracle():
    ch = ChannelSet.scalar([2.0, 1.0])
    res = dc.dc_solve(ch, 1.0, 0.5)
    oracle = verify.brute_force_scalar_oracle(verify.ScalarInstance((2.0, 1.0), 1.0, tau=0.5, delta=0.01))
    assert res.Rc >= oracle.value - 0.05
    assert res.R0 >= 0.5 - 1e-6


def test_dc_zero_floor_matches_secrecy_only_optimum():
    ch = ChannelSet.scalar([2.0, 1.0])
    res = dc.dc_solve(ch, 1.0, 0.0)
    # without noise help the best scalar secrecy rate is log2(1+4P) - log2(1+P)
    assert res.Rc >= np.log2(5) - 1 - 1e-4


def test_dc_endpoint_returns_zero_secrecy():
    ch = ChannelSet.scalar([2.0, 1.0])
    tm, _ = dc.compute_tau_max(ch, 1.0)
    res = dc.dc_solve(ch, 1.0, tm, tau_max=tm)
    assert res.Rc == 0.0
    assert res.R0 == pytest.approx(tm, abs=1e-3)


def test_dc_reports_exact_rates_and_surrogate_bound(rng):
    ch = random_channels(rng, 2, [1, 1, 1])
    tm, _ = dc.compute_tau_max(ch, 10.0)
    res = dc.dc_solve(ch, 10.0, 0.5 * tm)
    assert res.Rc == pytest.approx(max(0.0, model.secrecy_difference(ch, res.cov)))
    assert res.R0 == pytest.approx(model.multicast_rate(ch, res.cov))
    assert res.surrogate_bits <= res.raw_secrecy + 1e-8
    assert abs(res.R0 - 0.5 * tm) <= 1e-6
    assert model.validate_covariances(res.cov).passed


def test_dc_exact_objective_is_nondecreasing(rng):
    ch = random_channels(rng, 3, [2, 1, 1])
    tm, _ = dc.compute_tau_max(ch, 10.0)
    res = dc.dc_solve(ch, 10.0, 0.3 * tm)
    secrecy = [it.secrecy_bits for it in res.trace]
    assert all(b >= a - 1e-8 for a, b in zip(secrecy, secrecy[1:]))
    surrogate = [it.objective_nats for it in res.trace]
    assert all(b >= a - 1e-8 for a, b in zip(surrogate, surrogate[1:]))


def test_dc_rejects_negative_floor():
    with pytest.raises(DomainError):
        dc.dc_solve(ChannelSet.scalar([2.0, 1.0]), 1.0, -0.1)


def test_dc_infeasible_floor_raises():
    with pytest.raises(dc.DcInfeasible):
        dc.dc_solve(ChannelSet.scalar([2.0, 1.0]), 1.0, 5.0)


# ---------------------------------------------------------------- sweep

@pytest.fixture(scope="module")
def small_region():
    rng = np.random.default_rng(7)
    ch = random_channels(rng, 2, [1, 1, 1])
    cfg = dc.QomsSweepConfig(n_points=6)
    return ch, dc.trace_region_dc(ch, 10.0, cfg)


def test_sweep_shape_and_order(small_region):
    _, region = small_region
    assert region.method == "dc"
    taus = [p.param for p in region.points]
    assert len(taus) == 6 and taus == sorted(taus, reverse=True)
    assert taus[0] == pytest.approx(region.meta["tau_max"]) and taus[-1] == 0.0
    assert region.n_failed() == 0


def test_sweep_endpoint_and_monotone_secrecy(small_region):
    _, region = small_region
    pts = region.points
    assert pts[0].Rc == 0.0
    rcs = [p.Rc for p in pts]
    assert all(b >= a - 1e-3 for a, b in zip(rcs, rcs[1:]))


def test_sweep_zero_floor_point_matches_direct_solve(small_region):
    ch, region = small_region
    direct = dc.dc_solve(ch, 10.0, 0.0)
    assert region.points[-1].Rc == pytest.approx(direct.Rc, abs=1e-3)


def test_sweep_points_are_tight(small_region):
    _, region = small_region
    for p in region.points[1:]:
        assert abs(p.R0 - p.param) <= 1e-6


def test_tau_grid_descending():
    g = dc.tau_grid(2.0, 5)
    assert np.allclose(g, [2.0, 1.5, 1.0, 0.5, 0.0])


def test_sweep_config_invariants():
    with pytest.raises(ValueError):
        dc.QomsSweepConfig(tol=0.0)


def test_floor_above_capacity_raises_even_with_known_capacity():
    ch = ChannelSet.scalar([2.0, 1.0])
    tm, _ = dc.compute_tau_max(ch, 1.0)
    with pytest.raises(dc.DcInfeasible):
        dc.dc_solve(ch, 1.0, tm + 0.1, tau_max=tm)


def test_endpoint_has_one_trace_entry():
    ch = ChannelSet.scalar([2.0, 1.0])
    tm, _ = dc.compute_tau_max(ch, 1.0)
    res = dc.dc_solve(ch, 1.0, tm, tau_max=tm)
    assert len(res.trace) == 1 and res.trace[0].multicast_bits == pytest.approx(tm)

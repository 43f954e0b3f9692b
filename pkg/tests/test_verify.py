import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from secrecy_region import ao, dc, model, verify
from secrecy_region.model import ChannelSet, CovarianceTriple, DomainError

from conftest import cn, random_channels

seeds = st.integers(0, 2 ** 32 - 1)


# ---------------------------------------------------------------- variational identity

def test_variational_identity_passes_exactly():
    rep = verify.check_lemma3(np.eye(2))
    assert rep.passed and rep.expected == 0.0


def test_variational_diagonal():
    rep = verify.check_lemma3(np.diag([2.0, 0.5]))
    assert rep.passed
    assert rep.expected == pytest.approx(0.0, abs=1e-14)
    assert np.allclose(rep.S, np.diag([0.5, 2.0]), atol=1e-6)


def test_variational_random_3x3(rng):
    for _ in range(10):
        assert verify.check_lemma3(verify.random_psd(rng, 3) + 0.1 * np.eye(3)).passed


# ---------------------------------------------------------------- determinant ratio

def test_det_ratio_scalars():
    rep = verify.check_det_ratio([[1.0]], [[1.0]], [[1.0]])
    assert rep.passed
    assert rep.lhs == pytest.approx(np.log(2.0)) and rep.rhs == pytest.approx(np.log(1.5))


def test_det_ratio_zero_perturbation_is_equality(rng):
    A, B = verify.random_psd(rng, 3), verify.random_psd(rng, 3) + np.eye(3)
    rep = verify.check_det_ratio(A, B, np.zeros((3, 3)))
    assert rep.passed and rep.lhs == pytest.approx(rep.rhs, abs=1e-14)


def test_det_ratio_rejects_singular_denominator():
    with pytest.raises(DomainError):
        verify.check_det_ratio(np.eye(2), np.zeros((2, 2)), np.eye(2))


@given(seeds)
def test_det_ratio_random_4x4(seed):
    rng = np.random.default_rng(seed)
    rep = verify.check_det_ratio(verify.random_psd(rng, 4), verify.random_psd(rng, 4) + 0.01 * np.eye(4),
                                 verify.random_psd(rng, 4))
    assert rep.passed


# ---------------------------------------------------------------- projector and construction

def test_projector_axis_aligned():
    assert np.allclose(verify.orth_complement_projector(np.array([[1.0, 0.0]]), 1.0), np.diag([0.0, 1.0]))


def test_projector_needs_a_complement(rng):
    with pytest.raises(DomainError):
        verify.orth_complement_projector(cn(rng, 2, 2), 1.0)


@given(seeds, st.floats(0.1, 10.0))
def test_projector_annihilates_channel(seed, rho):
    rng = np.random.default_rng(seed)
    H = cn(rng, 2, 5)
    E = verify.orth_complement_projector(H, rho)
    assert np.linalg.norm(H @ E) <= 1e-10 * max(1.0, rho)
    assert np.trace(E).real == pytest.approx(3 * rho)
    assert np.linalg.eigvalsh(E)[0] >= -1e-12


def _slack_instance(rng, n_r):
    ch = random_channels(rng, 4, n_r)
    cov = CovarianceTriple(verify.random_psd(rng, 4, 2.0), verify.random_psd(rng, 4), verify.random_psd(rng, 4),
                           20.0)
    return ch, cov, 0.5 * model.multicast_rate(ch, cov)


def test_improve_tight_input():
    ch = ChannelSet((np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]])))
    cov = CovarianceTriple(np.diag([3.0, 3.0]), np.zeros((2, 2)), np.zeros((2, 2)), 6.0)
    assert verify.improve_if_slack(ch, cov, model.multicast_rate(ch, cov)) == "tight"


@given(seeds)
def test_improve_under_condition_one(seed):
    ch, cov, tau = _slack_instance(np.random.default_rng(seed), [2, 2, 2])
    out = verify.improve_if_slack(ch, cov, tau, condition=1)
    tr = lambda c: float(np.trace(c.Q0 + c.Qc + c.Qa).real)  # noqa: E731
    assert abs(tr(out) - tr(cov)) <= 1e-9
    assert model.bob_capacity(ch, out) == pytest.approx(model.bob_capacity(ch, cov), abs=1e-9)
    assert model.secrecy_difference(ch, out) >= model.secrecy_difference(ch, cov) - 1e-9
    assert model.multicast_rate(ch, out) >= tau - 1e-9


@given(seeds)
def test_improve_under_condition_two(seed):
    ch, cov, tau = _slack_instance(np.random.default_rng(seed), [3, 1, 2])
    out = verify.improve_if_slack(ch, cov, tau, condition=2)
    for k in ch.eves:
        assert model.eve_capacity(k, ch, out) == pytest.approx(model.eve_capacity(k, ch, cov), abs=1e-9)
    assert model.bob_capacity(ch, out) >= model.bob_capacity(ch, cov) - 1e-9


def test_improve_unavailable(rng):
    ch = random_channels(rng, 2, [2, 2])
    cov = CovarianceTriple(np.eye(2), np.zeros((2, 2)), np.zeros((2, 2)), 2.0)
    with pytest.raises(DomainError, match="construction unavailable"):
        verify.improve_if_slack(ch, cov, 0.1)


# ---------------------------------------------------------------- majorization and gradients

def test_majorization_scalar_value():
    ch = ChannelSet.scalar([1.0, 1.0])
    f, _ = dc.linearize_varphi1(ch, np.zeros((1, 1)))
    assert f(np.array([[0.5]])) == pytest.approx(0.5)
    assert dc.varphi(ch, 1, np.array([[0.5]])) == pytest.approx(np.log(1.5))


def test_majorization_random_four_antennas(rng):
    ch = random_channels(rng, 4, [2, 3, 1])
    assert verify.tse_majorization_check(ch, n_samples=100, seed=1).passed


@given(seeds)
def test_danskin_identity(seed):
    rng = np.random.default_rng(seed)
    ch = random_channels(rng, 3, [2, 1, 2])
    cov = CovarianceTriple(*(verify.random_psd(rng, 3) for _ in range(3)), 10.0)
    assert verify.check_danskin(ch, cov).passed


def test_capacity_gradients_match_finite_differences(rng):
    ch = random_channels(rng, 2, [2, 1])
    cov = CovarianceTriple(*(verify.random_psd(rng, 2) for _ in range(3)), 10.0)
    G = verify.capacity_gradients(ch, cov)["b"]["Qa"]
    D = verify.random_hermitian(rng, 2)
    h = 1e-6
    up = CovarianceTriple(cov.Q0, cov.Qc, cov.Qa + h * D, 10.0)
    dn = CovarianceTriple(cov.Q0, cov.Qc, cov.Qa - h * D, 10.0)
    fd = (model.bob_capacity_nats(ch, up.Qc, up.Qa) - model.bob_capacity_nats(ch, dn.Qc, dn.Qa)) / (2 * h)
    assert fd == pytest.approx(np.trace(G @ D).real, abs=1e-7)


# ---------------------------------------------------------------- KKT

@pytest.fixture(scope="module")
def converged():
    rng = np.random.default_rng(2)
    ch = random_channels(rng, 3, [2, 2, 2])
    return ch, ao.ao_solve(ch, 10.0, 1.0, ao.LambdaSweepConfig(tol=1e-6))


def test_kkt_report_fields_nonnegative(converged):
    ch, res = converged
    rep = verify.kkt_residuals(ch, 10.0, 1.0, res.cov, res.duals)
    assert all(np.isfinite(v) and v >= 0 for v in rep.as_dict().values())


def test_kkt_power_slackness(converged):
    ch, res = converged
    rep = verify.kkt_residuals(ch, 10.0, 1.0, res.cov, res.duals)
    assert rep.slackness_power <= 1e-6


def test_kkt_converged_point_passes(converged):
    ch, res = converged
    assert res.converged
    rep = verify.kkt_residuals(ch, 10.0, 1.0, res.cov, res.duals)
    assert rep.passed(1e-4), rep.as_dict()


def test_kkt_random_point_is_not_stationary(converged):
    ch, res = converged
    rng = np.random.default_rng(9)
    cov = CovarianceTriple(*(verify.random_psd(rng, 3, 1.0) for _ in range(3)), 10.0)
    assert verify.kkt_residuals(ch, 10.0, 1.0, cov, res.duals).stationarity > 0.1


def test_kkt_requires_duals(converged):
    ch, res = converged
    with pytest.raises(DomainError, match="rerun"):
        verify.kkt_residuals(ch, 10.0, 1.0, res.cov, None)


# ---------------------------------------------------------------- scalar oracle

def test_oracle_no_floor_corner():
    r = verify.brute_force_scalar_oracle(verify.ScalarInstance((2.0, 1.0), 1.0, tau=0.0, delta=0.01))
    assert r.value == pytest.approx(np.log2(5) - 1, abs=1e-12)
    assert r.argmax[0] == 0.0 and r.argmax[1] == pytest.approx(1.0)


def test_oracle_floor_at_capacity():
    inst = verify.ScalarInstance((2.0, 1.0), 1.0, tau=verify.scalar_tau_max(
        verify.ScalarInstance((2.0, 1.0), 1.0, tau=0.0)), delta=0.01)
    r = verify.brute_force_scalar_oracle(inst)
    assert r.value == 0.0 and r.argmax == (1.0, 0.0, 0.0)


def test_oracle_zero_weight():
    r = verify.brute_force_scalar_oracle(verify.ScalarInstance((2.0, 1.0), 1.0, lambda_c=0.0, delta=0.01))
    assert r.value == pytest.approx(1.0, abs=1e-12)
    assert r.argmax == (1.0, 0.0, 0.0)


def test_oracle_validation():
    with pytest.raises(DomainError):
        verify.ScalarInstance((2.0,), 1.0, tau=0.0)
    with pytest.raises(DomainError):
        verify.ScalarInstance((2.0, 1.0), 1.0)
    with pytest.raises(DomainError):
        verify.brute_force_scalar_oracle(verify.ScalarInstance((2.0, 1.0), 1.0, tau=0.0, delta=0.5))


def test_checkers_are_deterministic(rng):
    ch = random_channels(rng, 2, [1, 2])
    a = verify.tse_majorization_check(ch, 50, seed=4)
    b = verify.tse_majorization_check(ch, 50, seed=4)
    assert a == b

"""Tests for the truncation ramp, exact identities, dyadic machinery, VC
checks, and the exhaustive tiny-instance oracle."""

import json
import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.special import erfc

from lminlab import distributions as dist
from lminlab import empirical_process as ep
from lminlab.errors import BudgetExceededError, InvalidParameterError


# ---------------------------------------------------------------------------
# truncation ramp
# ---------------------------------------------------------------------------


def test_phi_values():
    assert ep.truncation_phi(1.0, 3.0) == 1.0
    assert ep.truncation_phi(1.0, 1.5) == 0.5
    assert ep.truncation_phi(1.0, 0.99) == 0.0
    assert ep.truncation_phi(1.0, 2.0) == 1.0
    assert ep.truncation_phi(1.0, 1.0) == 0.0


def test_phi_rejects_bad_u():
    with pytest.raises(InvalidParameterError):
        ep.truncation_phi(0.0, 1.0)
    with pytest.raises(InvalidParameterError):
        ep.truncation_phi(-1.0, 1.0)


def test_phi_indicator_sandwich_exact_grid():
    us = np.linspace(0.05, 5.0, 100)
    ts = np.linspace(0.0, 12.0, 100)
    for u in us:
        vals = ep.truncation_phi(u, ts)
        upper = (ts >= u).astype(float)
        lower = (ts >= 2 * u).astype(float)
        assert np.all(vals <= upper) and np.all(vals >= lower)


def test_phi_lipschitz_exact_grid():
    rng = np.random.default_rng(0)
    for u in np.linspace(0.1, 3.0, 20):
        t1 = rng.uniform(0, 8, 100)
        t2 = rng.uniform(0, 8, 100)
        lhs = np.abs(ep.truncation_phi(u, t1) - ep.truncation_phi(u, t2))
        assert np.all(lhs <= np.abs(t1 - t2) / u + 1e-12)


# ---------------------------------------------------------------------------
# second-moment identity
# ---------------------------------------------------------------------------


def test_identity_constant_values():
    lhs, rhs, gap = ep.second_moment_identity([1.0, 1.0, 1.0])
    assert lhs == rhs == 1.0 and gap == 0.0


def test_identity_closed_form():
    lhs, rhs, gap = ep.second_moment_identity([0.0, 2.0])
    assert lhs == 2.0 and rhs == pytest.approx(2.0, abs=1e-15)


def test_identity_random_battery():
    rng = np.random.default_rng(1)
    for _ in range(100):
        v = rng.standard_normal(int(rng.integers(1, 120))) * rng.uniform(0.01, 50)
        lhs, _, gap = ep.second_moment_identity(v)
        assert gap <= 1e-12 * max(lhs, 1e-300)


# ---------------------------------------------------------------------------
# tail integral
# ---------------------------------------------------------------------------


def test_tail_integral_pure_pareto_closed_form():
    # 2 int_2^inf u * u^-3 du = 1
    assert ep.tail_integral(lambda u: min(1.0, u**-3.0), 2.0) == pytest.approx(1.0, rel=1e-9)


def test_tail_integral_at_dyadic_truncation_level():
    # with A = (L/(eta delta))^(1/eta) the pure-power integral equals exactly
    # 2L/(eta A^eta) = 2 delta
    L, eta, delta = 1.0, 1.0, 0.1
    a = (L / (eta * delta)) ** (1 / eta)
    val = ep.tail_integral(lambda u: L * u ** -(2 + eta), a)
    assert val == pytest.approx(2 * L / (eta * a**eta), rel=1e-9)
    assert val == pytest.approx(2 * delta, rel=1e-9)


def test_tail_integral_gaussian_small():
    val = ep.tail_integral(lambda u: float(erfc(u / math.sqrt(2))), 5.0)
    assert 0 < val <= 1e-5


def test_tail_integral_divergent_flagged_as_inf():
    assert ep.tail_integral(lambda u: min(1.0, u**-2.0), 2.0) == math.inf


# ---------------------------------------------------------------------------
# dyadic decomposition and deviations
# ---------------------------------------------------------------------------


def test_dyadic_decomposition_level_bracketing():
    d = ep.DyadicDecomposition.from_profile(eta=1.0, L=1.0, delta=0.1)
    assert d.a_trunc == pytest.approx(10.0)
    assert 2**d.j0 >= d.a_trunc > 2 ** (d.j0 - 1)
    assert d.j0 == 4
    assert len(d.sigma_bounds) == d.j0
    assert all(a > b for a, b in zip(d.sigma_bounds, d.sigma_bounds[1:]))


def test_dyadic_decomposition_unit_truncation():
    d = ep.DyadicDecomposition.from_profile(eta=4.0, L=1.0, delta=10.0)
    assert d.a_trunc == 1.0 and d.j0 == 0 and d.sigma_bounds == ()


def test_dyadic_sigma_equality_for_sharp_marginal():
    # heavy-iid coordinate marginal attains tail = L_sharp 2^(-j(2+eta)) at
    # u = 2^j once past the plateau
    eta = 1.0
    spec = dist.DistributionSpec("heavy-iid", 3, eta=eta)
    sharp = dist.radial_tail_constant(spec)  # u0^(2+eta) for the scalar law
    for j in (1, 2, 3):
        tail = dist.theoretical_tail(spec, 2.0**j)
        assert tail == pytest.approx(sharp * 2.0 ** (-j * (2 + eta)), rel=1e-12)


def test_dyadic_sup_dev_zero_for_identical_reference():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((5000, 4))
    dirs = np.eye(4)
    d = ep.dyadic_sup_dev(x, level=0, directions=dirs, reference=x)
    assert d.value == 0.0
    assert d.reference == "sample"


def test_dyadic_sup_dev_rate_slope():
    # deviation ~ 1/sqrt(N): fitted log-log slope within +-0.15 of -1/2
    spec = dist.DistributionSpec("gaussian-iid", 4)
    dirs = np.vstack([np.eye(4), -np.eye(4)])
    ref = lambda u: dist.theoretical_tail(spec, u)  # noqa: E731
    sizes = [200, 800, 3200, 12800, 51200]
    devs = []
    for i, m in enumerate(sizes):
        reps = []
        for r in range(8):
            x = dist.sample_matrix(spec, m, np.random.default_rng(100 + 17 * i + r))
            reps.append(ep.dyadic_sup_dev(x, level=0, directions=dirs, reference=ref).value)
        devs.append(np.mean(reps))
    slope = np.polyfit(np.log(sizes), np.log(devs), 1)[0]
    assert abs(slope + 0.5) <= 0.15


def test_dyadic_sup_dev_high_level_matches_tiny_tail():
    # a level far above every sampled magnitude sees deviation = reference
    # tail, which sits below the level's sigma^2 bound
    eta = 1.0
    spec = dist.DistributionSpec("heavy-iid", 3, eta=eta)
    x = np.clip(dist.sample_matrix(spec, 2000, np.random.default_rng(3)), -7.9, 7.9)
    ref = lambda u: dist.theoretical_tail(spec, u)  # noqa: E731
    j = 3  # thresholds in [8, 16], above every clipped magnitude
    d = ep.dyadic_sup_dev(x, level=j, directions=np.eye(3)[:1], reference=ref)
    assert d.value == pytest.approx(dist.theoretical_tail(spec, 8.0), rel=1e-12)
    assert d.value <= 1.0 * 2.0 ** (-j * (2 + eta))


# ---------------------------------------------------------------------------
# VC deviation formula and brute force
# ---------------------------------------------------------------------------


def test_vc_deviation_plugin_all_ones():
    assert ep.vc_deviation_bound(1.0, 10, 10, 10.0, kappa=1.0) == pytest.approx(4.0)


def test_vc_deviation_log_arithmetic():
    sigma = math.exp(-2)
    val = ep.vc_deviation_bound(sigma, 10, 10, 1e-12, kappa=1.0)
    # first two terms use log(e/sigma) = 3
    expected = sigma * math.sqrt(3.0) + 3.0
    assert val == pytest.approx(expected, abs=1e-5)


def test_vc_deviation_validates_sigma():
    with pytest.raises(InvalidParameterError):
        ep.vc_deviation_bound(1.5, 10, 10, 1.0)
    with pytest.raises(InvalidParameterError):
        ep.vc_deviation_bound(0.0, 10, 10, 1.0)


def test_vc_deviation_covers_measured_net_deviations():
    # MC coverage experiment: with kappa = 1 and t = log(2/0.05), the bound at
    # d = 3n exceeds the measured level-0 net deviation in >= 95% of trials
    spec = dist.DistributionSpec("gaussian-iid", 4)
    dirs = np.vstack([np.eye(4), -np.eye(4)])
    ref = lambda u: dist.theoretical_tail(spec, u)  # noqa: E731
    N = 600
    bound = ep.vc_deviation_bound(1.0, 3 * 4, N, math.log(2 / 0.05), kappa=1.0)
    covered = 0
    trials = 200
    for r in range(trials):
        x = dist.sample_matrix(spec, N, np.random.default_rng(1000 + r))
        if ep.dyadic_sup_dev(x, 0, dirs, ref).value <= bound:
            covered += 1
    assert covered / trials >= 0.95


def test_vc_halfspaces_planar_generic():
    pts = np.random.default_rng(3).standard_normal((10, 2))
    assert ep.vc_bruteforce(pts, "halfspaces") == 3


def test_vc_halfspaces_line():
    pts = np.random.default_rng(4).standard_normal((8, 1))
    assert ep.vc_bruteforce(pts, "halfspaces") == 2


def test_vc_abs_threshold_line_generic():
    pts = np.array([[0.5], [1.3], [-2.1], [0.9], [-0.3], [1.7]])
    assert ep.vc_bruteforce(pts, "abs-threshold") == 1


def test_vc_singleton():
    assert ep.vc_bruteforce(np.array([[1.0]]), "abs-threshold") == 1
    assert ep.vc_bruteforce(np.array([[1.0, 2.0]]), "halfspaces") == 1


def test_vc_budget_guard():
    with pytest.raises(BudgetExceededError):
        ep.vc_bruteforce(np.zeros((26, 2)), "halfspaces")
    with pytest.raises(BudgetExceededError):
        ep.vc_bruteforce(np.zeros((5, 4)), "halfspaces")


# ---------------------------------------------------------------------------
# tiny oracle
# ---------------------------------------------------------------------------


def test_oracle_constant_function():
    inst = ep.FiniteInstance(
        probs=(Fraction(1, 2), Fraction(1, 2)), functions=((1.0, 1.0),), N=6
    )
    rep = ep.tiny_smallball_oracle(inst, tau=0.25)
    assert rep.q2tau == 1
    assert rep.floor == pytest.approx(1 / 32)
    assert rep.exact_prob == 1
    assert float(rep.exact_prob) >= rep.bound
    # R_N for f == c is |c| E|sum eps|/N, enumerated independently here
    signs = np.array([[1 if (k >> i) & 1 else -1 for i in range(6)] for k in range(64)])
    expected_rn = np.abs(signs.sum(axis=1)).mean() / 6
    assert rep.r_n == pytest.approx(expected_rn, abs=1e-13)


def test_oracle_two_atom_identity_function():
    inst = ep.FiniteInstance(
        probs=(Fraction(1, 2), Fraction(1, 2)), functions=((0.0, 1.0),), N=6
    )
    rep = ep.tiny_smallball_oracle(inst, tau=0.1)
    assert rep.q2tau == Fraction(1, 2)
    # floor = tau^2 Q/2 = 0.0025; P_N f^2 = (# ones)/6, fails only when all
    # six draws hit the zero atom
    assert rep.exact_prob == Fraction(63, 64)
    # brute-force check of the event probability by direct enumeration
    total = Fraction(0)
    for code in range(2**6):
        ones = bin(code).count("1")
        if ones / 6 >= rep.floor:
            total += Fraction(1, 64)
    assert total == rep.exact_prob


def test_oracle_zero_functions_applicable():
    inst = ep.FiniteInstance(
        probs=(Fraction(1, 3), Fraction(2, 3)), functions=((0.0, 0.0),), N=5
    )
    rep = ep.tiny_smallball_oracle(inst, tau=0.5)
    assert rep.hypothesis_ok  # R_N = 0 = tau Q(2 tau)/16
    assert rep.verdict == "holds"
    assert rep.exact_prob == 1


def test_oracle_gated_when_hypothesis_fails():
    inst = ep.FiniteInstance(
        probs=(Fraction(1, 2), Fraction(1, 2)), functions=((-1.0, 1.0),), N=4
    )
    rep = ep.tiny_smallball_oracle(inst, tau=0.25)
    assert not rep.hypothesis_ok
    assert rep.verdict == "not-applicable"


def test_oracle_budget_guard():
    inst = ep.FiniteInstance(
        probs=(Fraction(1, 6),) * 6, functions=((1.0,) * 6,), N=10
    )
    with pytest.raises(BudgetExceededError):
        ep.tiny_smallball_oracle(inst, tau=0.25)


def test_oracle_probabilities_are_exact_rationals():
    rng = np.random.default_rng(5)
    for inst, tau in ep.random_instances(10, rng=rng):
        rep = ep.tiny_smallball_oracle(inst, tau)
        assert isinstance(rep.exact_prob, Fraction)
        assert 0 <= rep.exact_prob <= 1
        payload = json.loads(rep.to_json())
        assert set(payload) >= {"instance", "q2tau", "r_n", "exact_prob", "bound", "verdict"}


def test_oracle_battery_no_violations():
    battery = ep.random_instances(100, rng=42)
    reports, applicable, violated = ep.oracle_battery(battery)
    assert len(reports) == 100
    assert violated == 0
    assert applicable >= 5  # the battery exercises the applicable branch


def test_finite_instance_validation():
    with pytest.raises(InvalidParameterError):
        ep.FiniteInstance(probs=(Fraction(1, 2),), functions=((1.0,),), N=2)  # sum != 1
    with pytest.raises(InvalidParameterError):
        ep.FiniteInstance(
            probs=(Fraction(1, 2), Fraction(1, 2)), functions=((1.0,),), N=2
        )  # value count mismatch
    with pytest.raises(InvalidParameterError):
        ep.FiniteInstance(
            probs=(Fraction(1, 2), Fraction(1, 2)), functions=((1.0, 1.0),), N=11
        )

"""Tests for the small-ball sandwich: direction search, moment ratios,
Paley-Zygmund bounds, and the curve report."""

import math

import numpy as np
import pytest

from lminlab import distributions as dist
from lminlab import smallball as sb
from lminlab.errors import InvalidParameterError, UnsupportedQueryError

GAUSS_ALPHA = math.sqrt(2 / math.pi)  # L1 norm of a standard normal
GAUSS_BETA2 = math.sqrt(math.pi / 2)


@pytest.fixture(scope="module")
def gauss_samples():
    spec = dist.DistributionSpec("gaussian-iid", 5)
    return dist.sample_matrix(spec, 200000, np.random.default_rng(31))


def test_q_direction_u_zero_is_one(gauss_samples):
    t = np.eye(5)[0]
    assert sb.q_direction(gauss_samples, t, 0.0) == 1.0


def test_q_direction_matches_quadrature(gauss_samples):
    spec = dist.DistributionSpec("gaussian-iid", 5)
    t = np.eye(5)[0]
    m = len(gauss_samples)
    for u in (0.2, 1.0):
        emp = sb.q_direction(gauss_samples, t, u)
        th = dist.theoretical_tail(spec, u)
        assert abs(emp - th) <= 3 * math.sqrt(th * (1 - th) / m)


def test_q_direction_atomic_mixture():
    spec = dist.DistributionSpec("atomic-mixture", 4, mixture_p=0.5)
    x = dist.sample_matrix(spec, 100000, np.random.default_rng(9))
    q = sb.q_direction(x, np.eye(4)[0], 0.01)
    # the atom at zero removes exactly p of the mass as u -> 0+
    assert q == pytest.approx(0.5, abs=0.02)


def test_q_direction_validates():
    x = np.ones((10, 2))
    with pytest.raises(InvalidParameterError):
        sb.q_direction(x, np.array([1.0, 1.0]), 0.1)  # not unit norm
    with pytest.raises(InvalidParameterError):
        sb.q_direction(x, np.array([1.0, 0.0]), -0.1)


def test_search_matches_coordinate_on_rotation_invariant(gauss_samples):
    # direction-independence: the search minimum equals the e1 value within noise
    q_e1 = sb.q_direction(gauss_samples, np.eye(5)[0], 0.3)
    q_min, t = sb.q_inf_search(gauss_samples, 0.3, budget=128, rng=4)
    se = math.sqrt(q_e1 * (1 - q_e1) / len(gauss_samples))
    assert q_min <= q_e1 + 1e-12
    assert q_min >= q_e1 - 5 * se
    assert np.linalg.norm(t) == pytest.approx(1.0, abs=1e-12)


def test_search_finds_degenerate_hyperplane():
    # X supported on a hyperplane: Q(u) = 0 at the normal direction
    rng = np.random.default_rng(5)
    x = np.zeros((50000, 3))
    x[:, :2] = rng.standard_normal((50000, 2))
    q, t = sb.q_inf_search(x, 0.1, budget=400, rng=4)
    assert q == 0.0
    assert abs(t[2]) > 0.99


def test_search_budget_one_is_single_random_direction(gauss_samples):
    q, t = sb.q_inf_search(gauss_samples, 0.4, budget=1, rng=123)
    # replicate the single direction the search draws
    rng = np.random.default_rng(123)
    g = rng.standard_normal((1, 5))
    d = g[0] / np.linalg.norm(g[0])
    assert np.allclose(t, d)
    assert q == sb.q_direction(gauss_samples, d, 0.4)


def test_search_dominates_coordinate_direction(gauss_samples):
    # budget large enough to include e1 in the pool
    q, _ = sb.q_inf_search(gauss_samples, 0.5, budget=64, rng=8)
    assert q <= sb.q_direction(gauss_samples, np.eye(5)[0], 0.5) + 1e-15


def test_search_monotone_in_u_for_fixed_pool(gauss_samples):
    # a budget covering exactly the base pool (no refinement) keeps the search
    # set identical across u
    n = gauss_samples.shape[1]
    budget = int(round(0.8 * 50)) + 2 * n  # all baseline directions, no refinement
    prev = 1.1
    for u in (0.1, 0.3, 0.6, 1.0, 1.8):
        q, _ = sb.q_inf_search(gauss_samples, u, budget=budget, rng=99)
        assert q <= prev + 1e-15
        prev = q


def test_moment_ratios_gaussian_analytic():
    r = sb.moment_ratios(dist.DistributionSpec("gaussian-iid", 5), p=2.0)
    assert r.alpha == pytest.approx(GAUSS_ALPHA, rel=1e-10)
    assert r.beta_p == pytest.approx(GAUSS_BETA2, rel=1e-10)


def test_moment_ratios_analytic_requires_rotation_invariance():
    with pytest.raises(UnsupportedQueryError):
        sb.moment_ratios(dist.DistributionSpec("rademacher-vec", 4), p=2.0)


def test_moment_ratios_empirical_close_to_analytic(gauss_samples):
    r = sb.moment_ratios(gauss_samples, p=2.0, budget=192, rng=6)
    assert r.alpha == pytest.approx(GAUSS_ALPHA, rel=0.02)
    assert r.beta_p == pytest.approx(GAUSS_BETA2, rel=0.02)
    assert r.beta_p >= 1.0
    assert not r.degenerate


def test_moment_ratios_rademacher_n1():
    spec = dist.DistributionSpec("rademacher-vec", 1)
    x = dist.sample_matrix(spec, 4000, np.random.default_rng(3))
    r = sb.moment_ratios(x, p=2.0, budget=32, rng=1)
    assert r.alpha == pytest.approx(1.0, abs=1e-12)
    assert r.beta_p == pytest.approx(1.0, abs=1e-12)


def test_moment_ratios_khintchine_extreme_direction():
    # sign vectors in the plane: the worst L2/L1 ratio over the sphere is
    # sqrt(2), attained at the diagonal; the search should find it
    spec = dist.DistributionSpec("rademacher-vec", 2)
    x = dist.sample_matrix(spec, 40000, np.random.default_rng(4))
    r = sb.moment_ratios(x, p=2.0, budget=256, rng=5)
    assert r.beta_p == pytest.approx(math.sqrt(2), abs=0.03)
    # in higher dimension the ratio stays below sqrt(2)
    x4 = dist.sample_matrix(dist.DistributionSpec("rademacher-vec", 4), 40000, np.random.default_rng(4))
    r4 = sb.moment_ratios(x4, p=2.0, budget=256, rng=5)
    assert r4.beta_p <= math.sqrt(2) + 0.03


def test_moment_ratios_degenerate_zero_vector():
    x = np.zeros((1000, 3))
    r = sb.moment_ratios(x, p=2.0, budget=32, rng=2)
    assert r.alpha == 0.0
    assert r.degenerate


def test_paley_zygmund_gaussian_number():
    r = sb.MomentRatios(alpha=GAUSS_ALPHA, beta_p=GAUSS_BETA2, p=2.0)
    val, vac = sb.paley_zygmund_lower(r, 0.2)
    assert not vac
    assert val == pytest.approx(0.357, abs=5e-4)
    # the bound sits below the true tail
    assert val <= dist.theoretical_tail(dist.DistributionSpec("gaussian-iid", 2), 0.2)


def test_paley_zygmund_limits_and_plugin():
    r = sb.MomentRatios(alpha=1.0, beta_p=1.0, p=2.0)
    assert sb.paley_zygmund_lower(r, 0.5).value == pytest.approx(0.25, abs=1e-15)
    # u -> 0 limit is (1/beta_p)^q
    r2 = sb.MomentRatios(alpha=1.0, beta_p=2.0, p=2.0)
    assert sb.paley_zygmund_lower(r2, 1e-12).value == pytest.approx(0.25, rel=1e-6)


def test_paley_zygmund_vacuous_beyond_alpha():
    r = sb.MomentRatios(alpha=0.5, beta_p=1.5, p=2.0)
    val, vac = sb.paley_zygmund_lower(r, 0.5)
    assert val == 0.0 and vac
    val, vac = sb.paley_zygmund_lower(r, 0.7)
    assert val == 0.0 and vac


def test_pz_sandwich_analytic_no_mc_noise():
    # quadrature-exact: PZ lower <= analytic tail on a grid, for every
    # rotation-invariant family
    for spec in (
        dist.DistributionSpec("gaussian-iid", 4),
        dist.DistributionSpec("heavy-radial", 4, eta=2.0),
        dist.DistributionSpec("atomic-mixture", 4, mixture_p=0.3),
    ):
        r = sb.moment_ratios(spec, p=2.0)
        for u in np.linspace(0.0, 1.2, 13):
            assert sb.paley_zygmund_lower(r, u).value <= dist.theoretical_tail(spec, u) + 1e-12


def test_pz_validity_on_empirical_data(gauss_samples):
    # empirical PZ bound never exceeds the empirical tail at the minimizing
    # direction by more than 3 binomial stderr
    r = sb.moment_ratios(gauss_samples, p=2.0, budget=128, rng=11)
    m = len(gauss_samples)
    for u in (0.1, 0.3, 0.5):
        pz = sb.paley_zygmund_lower(r, u).value
        q = sb.q_direction(gauss_samples, r.alpha_dir, u)
        assert pz <= q + 3 * math.sqrt(max(q * (1 - q), 1e-12) / m)


def test_curve_invariants_and_csv(tmp_path, gauss_samples):
    u_grid = [0.0, 0.1, 0.2, 0.4, 0.8, 1.6]
    curve = sb.small_ball_curve(gauss_samples, u_grid, budget=200, rng=12)
    assert curve.upper[0] == 1.0
    assert np.all(np.diff(curve.upper) <= 1e-15)
    assert np.all((curve.lower >= 0) & (curve.lower <= 1))
    se = curve.stderr()
    assert np.all(curve.lower <= curve.upper + 3 * se)
    norms = np.linalg.norm(curve.argmin_dirs, axis=1)
    assert np.allclose(norms, 1.0, atol=1e-12)

    path = tmp_path / "curve.csv"
    curve.to_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "u,q_upper,q_lower,dir_index,stderr"
    assert len(lines) == 1 + len(u_grid)


def test_curve_rejects_bad_grid(gauss_samples):
    with pytest.raises(InvalidParameterError):
        sb.small_ball_curve(gauss_samples, [0.4, 0.2], budget=32, rng=1)
    with pytest.raises(InvalidParameterError):
        sb.small_ball_curve(gauss_samples, [], budget=32, rng=1)

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats
from scipy.stats import ortho_group

from conftest import random_spd
from esdmix.esd import (
    density_upper_bound,
    eigenvalue_floor,
    esd_log_density,
    mahalanobis_sq,
    make_scatter,
    scatter_from_eig,
)
from esdmix.exceptions import NotPSDError, ShapeError
from esdmix.generators import DensityGenerator

G = DensityGenerator.gaussian()
T4 = DensityGenerator.student_t(4.0)
CAUCHY = DensityGenerator.student_t(1.0)


def test_identity_scatter():
    s = make_scatter(np.eye(3))
    np.testing.assert_array_equal(s.eigvals, [1, 1, 1])
    assert s.log_det == 0.0


def test_diagonal_scatter():
    s = make_scatter(np.diag([4.0, 1.0]))
    np.testing.assert_allclose(s.eigvals, [1, 4])
    assert s.log_det == pytest.approx(math.log(4))


def test_eigvals_match_characteristic_polynomial():
    s = make_scatter([[2.0, 1.0], [1.0, 2.0]])
    roots = np.sort(np.roots([1, -4, 3]))
    np.testing.assert_allclose(s.eigvals, roots, rtol=1e-12)
    assert s.log_det == pytest.approx(1.098612, abs=1e-6)


def test_scatter_is_immutable():
    s = make_scatter(np.eye(2))
    with pytest.raises(ValueError):
        s.matrix[0, 0] = 5.0


def test_asymmetric_rejected():
    with pytest.raises(ShapeError):
        make_scatter([[1.0, 0.5], [0.0, 1.0]])
    with pytest.raises(ShapeError):
        make_scatter(np.ones((2, 3)))


def test_negative_eigenvalue_rejected():
    with pytest.raises(NotPSDError):
        make_scatter([[1.0, 2.0], [2.0, 1.0]])


def test_numerically_singular_scatter_is_floored():
    s = make_scatter(np.diag([0.0, 2.0]))
    assert s.eigvals[0] == eigenvalue_floor(2.0)
    assert np.isfinite(s.log_det)


@given(st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_scatter_invariants(p, seed):
    rng = np.random.default_rng(seed)
    a = random_spd(rng, p, 1e-3, 1e3)
    s = make_scatter(a)
    recon = (s.eigvecs * s.eigvals) @ s.eigvecs.T
    assert np.linalg.norm(recon - s.matrix) <= 1e-8 * (1 + np.linalg.norm(s.matrix))
    np.testing.assert_allclose(s.eigvecs.T @ s.eigvecs, np.eye(p), atol=1e-8)
    assert np.all(np.diff(s.eigvals) >= 0)
    assert s.eigvals[0] >= eigenvalue_floor(s.eigvals[-1])
    assert s.log_det == pytest.approx(np.sum(np.log(s.eigvals)))


def test_scatter_from_eig_keeps_values():
    q = ortho_group.rvs(3, random_state=1)
    s = scatter_from_eig([3.0, 1.0, 2.0], q)
    np.testing.assert_array_equal(s.eigvals, [1.0, 2.0, 3.0])
    np.testing.assert_allclose(s.matrix, (q * [3.0, 1.0, 2.0]) @ q.T, atol=1e-14)


def test_mahalanobis_examples():
    s = make_scatter([[2.0, 1.0], [1.0, 2.0]])
    assert mahalanobis_sq([0.3, -1.0], [0.3, -1.0], s) == 0.0
    assert mahalanobis_sq([2.0, 0.0], [0.0, 0.0], make_scatter(np.diag([4.0, 1.0]))) == pytest.approx(1.0)
    x = np.array([1.0, 1.0])
    inv = np.array([[2.0, -1.0], [-1.0, 2.0]]) / 3.0
    assert mahalanobis_sq(x, np.zeros(2), s) == pytest.approx(x @ inv @ x, rel=1e-12)
    assert mahalanobis_sq(x, np.zeros(2), s) == pytest.approx(2 / 3, rel=1e-12)


def test_mahalanobis_rows_and_mismatch(rng):
    a = random_spd(rng, 3)
    s = make_scatter(a)
    x = rng.standard_normal((7, 3))
    mu = rng.standard_normal(3)
    oracle = np.einsum("ij,jk,ik->i", x - mu, np.linalg.inv(a), x - mu)
    np.testing.assert_allclose(mahalanobis_sq(x, mu, s), oracle, rtol=1e-10)
    with pytest.raises(ShapeError):
        mahalanobis_sq(np.zeros(2), np.zeros(3), s)


def test_log_density_examples():
    assert esd_log_density([0.0], [0.0], make_scatter([[1.0]]), G) == pytest.approx(-0.918939, abs=1e-6)
    s = make_scatter(np.diag([4.0, 1.0]))
    oracle = stats.multivariate_normal(np.zeros(2), np.diag([4.0, 1.0])).logpdf([2.0, 0.0])
    assert esd_log_density([2.0, 0.0], [0.0, 0.0], s, G) == pytest.approx(oracle, abs=1e-12)
    closed_form = -math.log(2 * math.pi) - 0.5 * math.log(4) - 0.5
    assert oracle == pytest.approx(closed_form, abs=1e-12)
    assert oracle == pytest.approx(-3.03102, abs=1e-5)
    cauchy = esd_log_density([0.0], [0.0], make_scatter([[1.0]]), CAUCHY)
    assert cauchy == pytest.approx(stats.cauchy.logpdf(0.0), abs=1e-12)


def test_log_density_against_scipy_t(rng):
    a = random_spd(rng, 3)
    mu = rng.standard_normal(3)
    x = rng.standard_normal((50, 3)) * 3
    oracle = stats.multivariate_t(mu, a, df=4.0).logpdf(x)
    np.testing.assert_allclose(esd_log_density(x, mu, make_scatter(a), T4), oracle, rtol=1e-10)


def test_upper_bound_examples():
    s = make_scatter(np.diag([0.25, 1.0]))
    assert density_upper_bound(s, G, 2) == pytest.approx(1 / (2 * math.pi) / 0.25, rel=1e-12)
    grid = np.stack(np.meshgrid(np.linspace(-1, 1, 201), np.linspace(-1, 1, 201)), -1).reshape(-1, 2)
    assert density_upper_bound(s, G, 2) == pytest.approx(0.636620, abs=1e-6)
    # the bound is attained only by spherical scatters; diag(0.25, 1) peaks at half of it
    peak = np.exp(esd_log_density(grid, np.zeros(2), s, G)).max()
    assert peak == pytest.approx(0.5 * density_upper_bound(s, G), rel=1e-12)
    sph = make_scatter(0.25 * np.eye(2))
    peak = np.exp(esd_log_density(grid, np.zeros(2), sph, G)).max()
    assert peak == pytest.approx(density_upper_bound(sph, G), rel=1e-12)
    assert density_upper_bound(make_scatter([[1.0]]), G, 1) == pytest.approx(0.398942, abs=1e-6)
    assert density_upper_bound(make_scatter(np.eye(2)), T4, 2) == pytest.approx(0.159155, abs=1e-6)
    with pytest.raises(ShapeError):
        density_upper_bound(s, G, 3)


@pytest.mark.parametrize("gen", [G, T4, CAUCHY], ids=repr)
def test_bound_property(gen, rng):
    for _ in range(1000):
        p = int(rng.integers(1, 5))
        s = make_scatter(random_spd(rng, p, 1e-3, 10.0))
        x, mu = rng.standard_normal(p), rng.standard_normal(p)
        assert math.exp(esd_log_density(x, mu, s, gen)) <= density_upper_bound(s, gen) * (1 + 1e-12)


@given(st.integers(0, 2**32 - 1))
def test_rotation_invariance(seed):
    rng = np.random.default_rng(seed)
    p = 3
    r = ortho_group.rvs(p, random_state=seed)
    a = random_spd(rng, p)
    x, mu = rng.standard_normal(p), rng.standard_normal(p)
    for gen in (G, T4):
        before = esd_log_density(x, mu, make_scatter(a), gen)
        after = esd_log_density(r @ x, r @ mu, make_scatter(r @ a @ r.T), gen)
        assert after == pytest.approx(before, abs=1e-10)


@given(arrays(float, 2, elements=st.floats(-1, 1)).filter(lambda v: np.linalg.norm(v) > 1e-3),
       st.integers(0, 2**32 - 1))
def test_unimodal_along_rays(direction, seed):
    rng = np.random.default_rng(seed)
    s = make_scatter(random_spd(rng, 2))
    mu = rng.standard_normal(2)
    steps = np.linspace(0, 10, 200)[:, None] * direction / np.linalg.norm(direction)
    for gen in (G, CAUCHY):
        assert np.all(np.diff(esd_log_density(mu + steps, mu, s, gen)) <= 1e-12)


@pytest.mark.parametrize("p", [1, 2, 4])
def test_peak_grows_as_scatter_shrinks(p):
    mu = np.zeros(p)
    prev = esd_log_density(mu, mu, make_scatter(np.eye(p)), G)
    for t in range(1, 8):
        s2 = 10.0 ** -t
        cur = esd_log_density(mu, mu, make_scatter(s2 * np.eye(p)), G)
        assert cur - prev == pytest.approx(-0.5 * p * math.log(10.0 ** -1), rel=1e-9)
        prev = cur

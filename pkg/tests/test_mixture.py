"""Mixture fitting and time conditioning, checked against quadrature oracles."""

import numpy as np
import pytest

from ckmp.mixture import (
    GaussianMixture,
    ReferenceTrajectory,
    fit_gmm,
    gmr_condition,
    load_gmm,
    save_gmm,
)


def two_cluster_data(n=400, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.multivariate_normal([-3.0, 0.0], [[0.3, 0.1], [0.1, 0.4]], size=n)
    b = rng.multivariate_normal([3.0, 1.0], [[0.5, -0.1], [-0.1, 0.2]], size=n)
    return np.vstack([a, b])


def joint_density(model, points):
    """Mixture density evaluated row-wise, computed from first principles."""
    out = np.zeros(points.shape[0])
    for w, mu, cov in zip(model.weights, model.means, model.covariances):
        diff = points - mu
        inv = np.linalg.inv(cov)
        maha = np.einsum("ne,ef,nf->n", diff, inv, diff)
        norm = np.sqrt((2.0 * np.pi) ** mu.size * np.linalg.det(cov))
        out += w * np.exp(-0.5 * maha) / norm
    return out


def test_mixture_validation():
    with pytest.raises(ValueError):
        GaussianMixture(weights=np.array([0.5, 0.4]), means=np.zeros((2, 2)),
                        covariances=np.stack([np.eye(2)] * 2))
    with pytest.raises(ValueError):
        GaussianMixture(weights=np.array([0.5, 0.5]), means=np.zeros((2, 2)),
                        covariances=np.stack([np.eye(2), -np.eye(2)]))
    with pytest.raises(ValueError):
        GaussianMixture(weights=np.array([1.0]), means=np.zeros((2, 2)),
                        covariances=np.stack([np.eye(2)] * 2))


def test_fit_recovers_separated_clusters():
    x = two_cluster_data()
    model = fit_gmm(x, 2, seed=0)
    order = np.argsort(model.means[:, 0])
    means = model.means[order]
    assert np.allclose(means[0], [-3.0, 0.0], atol=0.15)
    assert np.allclose(means[1], [3.0, 1.0], atol=0.15)
    assert np.allclose(model.weights, [0.5, 0.5], atol=0.05)


def test_fit_log_likelihood_is_nondecreasing():
    x = two_cluster_data(seed=3)
    model = fit_gmm(x, 3, seed=1)
    trace = model.fit_info["log_likelihoods"]
    assert len(trace) >= 2
    diffs = np.diff(trace)
    assert np.all(diffs >= -1e-7 * np.abs(trace[:-1]))


def test_fit_determinism():
    x = two_cluster_data(seed=5)
    a = fit_gmm(x, 2, seed=7)
    b = fit_gmm(x, 2, seed=7)
    assert np.array_equal(a.means, b.means)
    assert np.array_equal(a.covariances, b.covariances)
    assert np.array_equal(a.weights, b.weights)


def test_fit_rejects_degenerate_setups():
    with pytest.raises(ValueError):
        fit_gmm(np.zeros((3, 2)), 2, seed=0)
    with pytest.raises(ValueError):
        fit_gmm(np.random.default_rng(0).normal(size=(50, 2)), 0, seed=0)
    with pytest.raises(ValueError):
        fit_gmm(np.random.default_rng(0).normal(size=(50, 2)), 2, seed=0, reg=-1.0)


def test_gmr_single_component_matches_gaussian_conditional():
    # With one component the regression must equal the textbook conditional
    # of a joint Gaussian, computable in closed form.
    cov = np.array([[0.5, 0.2, -0.1],
                    [0.2, 0.8, 0.3],
                    [-0.1, 0.3, 0.6]])
    mu = np.array([1.0, -2.0, 0.5])
    model = GaussianMixture(weights=np.array([1.0]), means=mu[None, :],
                            covariances=cov[None, :, :])
    t = np.array([0.3, 1.0, 1.8])
    ref = gmr_condition(model, t)
    gain = cov[1:, 0] / cov[0, 0]
    for i, ti in enumerate(t):
        expected_mean = mu[1:] + gain * (ti - mu[0])
        expected_cov = cov[1:, 1:] - np.outer(gain, cov[1:, 0])
        assert np.allclose(ref.means[i], expected_mean, atol=1e-12)
        assert np.allclose(ref.covariances[i], expected_cov, atol=1e-12)


def test_gmr_matches_quadrature_oracle():
    # Two-component joint over (t, x); the conditional mean and variance at
    # a fixed t are integrals of the exact conditional density, evaluated
    # here by brute-force quadrature on a fine x grid.
    model = GaussianMixture(
        weights=np.array([0.6, 0.4]),
        means=np.array([[0.5, -1.0], [1.5, 2.0]]),
        covariances=np.array([
            [[0.40, 0.15], [0.15, 0.50]],
            [[0.30, -0.10], [-0.10, 0.35]],
        ]),
    )
    queries = np.array([0.2, 0.8, 1.1, 1.7])
    ref = gmr_condition(model, queries)
    xs = np.linspace(-8.0, 9.0, 20001)
    for i, t in enumerate(queries):
        points = np.column_stack([np.full(xs.size, t), xs])
        dens = joint_density(model, points)
        z = np.trapezoid(dens, xs)
        mean = np.trapezoid(xs * dens, xs) / z
        var = np.trapezoid(xs**2 * dens, xs) / z - mean**2
        assert abs(ref.means[i, 0] - mean) < 1e-8
        assert abs(ref.covariances[i, 0, 0] - var) < 1e-8


def test_gmr_blend_is_smooth_between_components():
    # Far from a component the conditioning must fall back to the nearer
    # one; in between the mean interpolates without jumps.
    model = GaussianMixture(
        weights=np.array([0.5, 0.5]),
        means=np.array([[0.0, 0.0], [2.0, 4.0]]),
        covariances=np.array([
            [[0.2, 0.0], [0.0, 0.3]],
            [[0.2, 0.0], [0.0, 0.3]],
        ]),
    )
    t = np.linspace(-0.5, 2.5, 61)
    ref = gmr_condition(model, t)
    assert abs(ref.means[0, 0] - 0.0) < 1e-3
    assert abs(ref.means[-1, 0] - 4.0) < 1e-3
    steps = np.abs(np.diff(ref.means[:, 0]))
    assert steps.max() < 0.5


def test_gmr_covariances_stay_positive_definite():
    rng = np.random.default_rng(8)
    x = np.column_stack([
        np.repeat(np.linspace(0, 1, 60), 3),
        rng.normal(size=180),
        rng.normal(size=180),
    ])
    model = fit_gmm(x, 3, seed=2)
    ref = gmr_condition(model, np.linspace(0.0, 1.0, 25))
    for cov in ref.covariances:
        assert np.linalg.eigvalsh(cov).min() > 0.0


def test_reference_trajectory_validation():
    t = np.linspace(0, 1, 4)
    means = np.zeros((4, 2))
    covs = np.stack([np.eye(2)] * 4)
    ReferenceTrajectory(times=t, means=means, covariances=covs)
    with pytest.raises(ValueError):
        ReferenceTrajectory(times=t[::-1], means=means, covariances=covs)
    bad = covs.copy()
    bad[1] = -np.eye(2)
    with pytest.raises(ValueError):
        ReferenceTrajectory(times=t, means=means, covariances=bad)


def test_save_load_round_trip(tmp_path):
    x = two_cluster_data(seed=9)
    model = fit_gmm(x, 2, seed=3)
    path = tmp_path / "mixture.yaml"
    save_gmm(model, path)
    back = load_gmm(path)
    assert np.allclose(back.weights, model.weights)
    assert np.allclose(back.means, model.means)
    assert np.allclose(back.covariances, model.covariances)
    assert back.fit_info["seed"] == 3
    path.write_text("weights: [1.0]\n")
    with pytest.raises(ValueError, match="means"):
        load_gmm(path)

"""Gaussian mixture fitting and conditioning for trajectory references.

Demonstrations are pooled into rows (t, q, qdot) and modelled with a full
covariance Gaussian mixture fitted by expectation-maximization.  Conditioning
the joint model on the scalar time input (Gaussian mixture regression) yields
a per-time reference distribution: a mean state and a full covariance blended
across components with moment matching.  The sequence of references over a
time grid is the probabilistic target the trajectory optimizer tracks.

Fitting is deterministic for a fixed seed: initialization is k-means++ with a
few Lloyd refinements, then EM with a fixed covariance regularizer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import yaml
from scipy.special import logsumexp

__all__ = [
    "GaussianMixture",
    "fit_gmm",
    "gmr_condition",
    "ReferenceTrajectory",
    "save_gmm",
    "load_gmm",
]


@dataclass
class GaussianMixture:
    """Weights (C,), means (C, D) and full covariances (C, D, D).

    fit_info records how the model was obtained (seed, regularizer, iteration
    count, log-likelihood trace) so a fit can be reproduced from its file.
    """

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    fit_info: dict = field(default_factory=dict)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        mu = np.asarray(self.means, dtype=float)
        cov = np.asarray(self.covariances, dtype=float)
        if w.ndim != 1 or mu.ndim != 2 or cov.ndim != 3:
            raise ValueError("weights, means, covariances must be 1-D, 2-D, 3-D arrays")
        c, d = mu.shape
        if w.shape != (c,) or cov.shape != (c, d, d):
            raise ValueError(
                f"inconsistent mixture shapes: weights {w.shape}, means {mu.shape}, "
                f"covariances {cov.shape}"
            )
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("mixture weights must be positive and sum to one")
        for k in range(c):
            try:
                np.linalg.cholesky(cov[k])
            except np.linalg.LinAlgError:
                raise ValueError(f"component {k} covariance is not symmetric positive definite")
        self.weights, self.means, self.covariances = w, mu, cov

    @property
    def n_components(self):
        return self.weights.size

    @property
    def dim(self):
        return self.means.shape[1]


def _log_gaussian(x, mean, cov):
    """Row-wise log density of N(mean, cov); x has shape (n, d)."""
    d = mean.size
    chol = np.linalg.cholesky(cov)
    diff = x - mean
    sol = np.linalg.solve(chol, diff.T)
    maha = np.sum(sol * sol, axis=0)
    log_det = 2.0 * np.sum(np.log(np.diag(chol)))
    return -0.5 * (maha + log_det + d * np.log(2.0 * np.pi))


def _kmeans_init(x, k, rng):
    """k-means++ seeding plus Lloyd refinement; returns assignment labels."""
    n = x.shape[0]
    centers = [x[rng.integers(n)]]
    for _ in range(1, k):
        d2 = np.min(
            [np.sum((x - c) ** 2, axis=1) for c in centers], axis=0
        )
        total = d2.sum()
        if total <= 0:
            centers.append(x[rng.integers(n)])
            continue
        centers.append(x[rng.choice(n, p=d2 / total)])
    centers = np.array(centers)
    labels = np.zeros(n, dtype=int)
    for _ in range(50):
        dists = np.sum((x[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new_labels = np.argmin(dists, axis=1)
        if np.array_equal(new_labels, labels) and _ > 0:
            break
        labels = new_labels
        for j in range(k):
            mask = labels == j
            if np.any(mask):
                centers[j] = x[mask].mean(axis=0)
    return labels


def fit_gmm(samples, n_components, seed=0, reg=None, max_iter=200, tol=1e-8):
    """Fit a full-covariance Gaussian mixture with EM.

    samples: (n, d) pooled data rows.  reg is added to every covariance
    diagonal each M step; when None it defaults to 1e-6 times the mean data
    variance.  Raises ValueError when a component degenerates (its effective
    sample count drops below the dimension).  The returned model's fit_info
    carries the log-likelihood trace, which is non-decreasing.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"samples must be a 2-D array, got shape {x.shape}")
    n, d = x.shape
    if n_components < 1:
        raise ValueError(f"n_components must be positive, got {n_components}")
    if n < n_components * d:
        raise ValueError(
            f"{n} samples are too few for {n_components} components of dimension {d}"
        )
    if reg is None:
        reg = 1e-6 * float(np.mean(np.var(x, axis=0)))
    if reg < 0:
        raise ValueError(f"covariance regularizer must be non-negative, got {reg}")

    rng = np.random.default_rng(seed)
    labels = _kmeans_init(x, n_components, rng)
    resp = np.zeros((n, n_components))
    resp[np.arange(n), labels] = 1.0

    weights = np.empty(n_components)
    means = np.empty((n_components, d))
    covs = np.empty((n_components, d, d))
    log_likelihoods = []
    for iteration in range(max_iter):
        # M step from current responsibilities.
        counts = resp.sum(axis=0)
        if np.any(counts < d):
            raise ValueError(
                "EM degenerated: a component would be fitted from fewer samples "
                "than the problem dimension"
            )
        weights = counts / n
        means = (resp.T @ x) / counts[:, None]
        for j in range(n_components):
            diff = x - means[j]
            covs[j] = (resp[:, j][:, None] * diff).T @ diff / counts[j]
            covs[j][np.diag_indices(d)] += reg
        # E step and log likelihood.
        log_prob = np.empty((n, n_components))
        for j in range(n_components):
            log_prob[:, j] = np.log(weights[j]) + _log_gaussian(x, means[j], covs[j])
        norm = logsumexp(log_prob, axis=1)
        log_likelihoods.append(float(norm.sum()))
        resp = np.exp(log_prob - norm[:, None])
        if iteration > 0:
            prev, cur = log_likelihoods[-2], log_likelihoods[-1]
            if abs(cur - prev) <= tol * (1.0 + abs(prev)):
                break

    return GaussianMixture(
        weights=weights,
        means=means,
        covariances=covs,
        fit_info={
            "seed": int(seed),
            "reg": float(reg),
            "tol": float(tol),
            "max_iter": int(max_iter),
            "n_iterations": len(log_likelihoods),
            "log_likelihoods": [float(v) for v in log_likelihoods],
        },
    )


@dataclass
class ReferenceTrajectory:
    """Per-time reference distribution on a strictly increasing grid.

    means has shape (N, E) and covariances (N, E, E) with E the state
    dimension (twice the dof); every covariance is symmetric positive
    definite.
    """

    times: np.ndarray
    means: np.ndarray
    covariances: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        mu = np.asarray(self.means, dtype=float)
        cov = np.asarray(self.covariances, dtype=float)
        if t.ndim != 1 or mu.ndim != 2 or mu.shape[0] != t.size:
            raise ValueError("reference times and means have inconsistent shapes")
        if cov.shape != (t.size, mu.shape[1], mu.shape[1]):
            raise ValueError("reference covariances have inconsistent shape")
        if np.any(np.diff(t) <= 0):
            raise ValueError("reference times must be strictly increasing")
        for i in range(t.size):
            try:
                np.linalg.cholesky(cov[i])
            except np.linalg.LinAlgError:
                raise ValueError(f"reference covariance at index {i} is not positive definite")
        self.times, self.means, self.covariances = t, mu, cov

    @property
    def state_dim(self):
        return self.means.shape[1]

    def __len__(self):
        return self.times.size


def gmr_condition(model, query_times):
    """Condition a joint (time, state) mixture on a grid of times.

    Returns a ReferenceTrajectory whose mean and covariance at each time are
    the moment-matched statistics of the conditional mixture. The blend
    weights are the component likelihoods of the query time; they sum to one.
    """
    t = np.atleast_1d(np.asarray(query_times, dtype=float))
    if model.dim < 2:
        raise ValueError("mixture must model at least one output dimension beyond time")
    e = model.dim - 1
    c = model.n_components

    # Per-component conditional pieces; the input block is the scalar time.
    mu_t = model.means[:, 0]
    mu_x = model.means[:, 1:]
    s_tt = model.covariances[:, 0, 0]
    s_xt = model.covariances[:, 1:, 0]
    s_xx = model.covariances[:, 1:, 1:]
    if np.any(s_tt <= 0):
        raise ValueError("time variance must be positive in every component")
    gain = s_xt / s_tt[:, None]
    cond_cov = s_xx - np.einsum("ce,cf->cef", gain, s_xt)

    log_h = (
        np.log(model.weights)[None, :]
        - 0.5 * np.log(2.0 * np.pi * s_tt)[None, :]
        - 0.5 * (t[:, None] - mu_t[None, :]) ** 2 / s_tt[None, :]
    )
    log_h = log_h - logsumexp(log_h, axis=1, keepdims=True)
    h = np.exp(log_h)

    cond_mu = mu_x[None, :, :] + (t[:, None] - mu_t[None, :])[:, :, None] * gain[None, :, :]
    mean = np.einsum("nc,nce->ne", h, cond_mu)
    second = np.einsum("nc,cef->nef", h, cond_cov) + np.einsum(
        "nc,nce,ncf->nef", h, cond_mu, cond_mu
    )
    cov = second - np.einsum("ne,nf->nef", mean, mean)
    cov = 0.5 * (cov + np.transpose(cov, (0, 2, 1)))
    min_eig = min(np.linalg.eigvalsh(cov[i]).min() for i in range(t.size)) if t.size else 0.0
    if min_eig < -1e-10 * max(1.0, float(np.abs(cov).max())):
        raise ValueError("conditioned covariance lost positive semi-definiteness")
    return ReferenceTrajectory(times=t, means=mean, covariances=cov)


def save_gmm(model, path):
    """Write a mixture (and its fit metadata) to a YAML document."""
    doc = {
        "dim": int(model.dim),
        "n_components": int(model.n_components),
        "weights": [float(w) for w in model.weights],
        "means": [[float(v) for v in row] for row in model.means],
        "covariances": [
            [[float(v) for v in row] for row in mat] for mat in model.covariances
        ],
        "fit_info": model.fit_info,
    }
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)


def load_gmm(path):
    """Inverse of save_gmm."""
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    for key in ("weights", "means", "covariances"):
        if key not in doc:
            raise ValueError(f"mixture file {path} is missing '{key}'")
    return GaussianMixture(
        weights=np.array(doc["weights"], dtype=float),
        means=np.array(doc["means"], dtype=float),
        covariances=np.array(doc["covariances"], dtype=float),
        fit_info=doc.get("fit_info", {}),
    )

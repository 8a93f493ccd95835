"""Kernel block tests: analytic derivative limits, Gram symmetry, PSD."""

import numpy as np
import pytest

from ckmp.kernel import KernelConfig, scalar_kernel, block_kernel, assemble_gram


def analytic_blocks(k_h, ti, tj):
    """Gaussian kernel and its exact partial derivatives in each argument."""
    diff = ti - tj
    k = np.exp(-k_h * diff * diff)
    d_tj = 2.0 * k_h * diff * k
    d_ti = -2.0 * k_h * diff * k
    d_titj = (2.0 * k_h - 4.0 * k_h**2 * diff * diff) * k
    return k, d_tj, d_ti, d_titj


def test_scalar_kernel_matches_formula():
    config = KernelConfig(k_h=4.0)
    rng = np.random.default_rng(3)
    for _ in range(50):
        ti, tj = rng.uniform(-2.0, 2.0, size=2)
        expected = np.exp(-4.0 * (ti - tj) ** 2)
        assert abs(scalar_kernel(config, ti, tj) - expected) < 1e-15


def test_scalar_kernel_broadcasts():
    config = KernelConfig(k_h=0.5)
    t = np.linspace(0.0, 2.0, 7)
    grid = scalar_kernel(config, t[:, None], t[None, :])
    assert grid.shape == (7, 7)
    assert np.allclose(np.diag(grid), 1.0)


def test_block_kernel_shape_and_identity_structure():
    config = KernelConfig(k_h=1.0, delta=1e-4, dof=3)
    block = block_kernel(config, 0.4, 0.9)
    assert block.shape == (6, 6)
    # Every 3x3 sub-block must be a multiple of the identity: different
    # degrees of freedom never mix through the kernel.
    for a in range(2):
        for b in range(2):
            sub = block[3 * a : 3 * a + 3, 3 * b : 3 * b + 3]
            assert np.allclose(sub, sub[0, 0] * np.eye(3), atol=1e-15)


def test_derivative_blocks_approach_analytic_derivatives():
    # Finite differences with step delta approximate the true derivative
    # blocks to O(delta); with delta = 1e-3 and k_h = 4 the agreement on
    # [0, 2]^2 is comfortably below 1e-2.
    config = KernelConfig(k_h=4.0, delta=1e-3, dof=1)
    t = np.linspace(0.0, 2.0, 21)
    gram = assemble_gram(config, t, t).block
    k_tt = gram[0::2, 0::2]
    k_td = gram[0::2, 1::2]
    k_dt = gram[1::2, 0::2]
    k_dd = gram[1::2, 1::2]
    k, d_tj, d_ti, d_titj = analytic_blocks(4.0, t[:, None], t[None, :])
    assert np.max(np.abs(k_tt - k)) < 1e-14
    assert np.max(np.abs(k_td - d_tj)) < 1e-2
    assert np.max(np.abs(k_dt - d_ti)) < 1e-2
    assert np.max(np.abs(k_dd - d_titj)) < 1e-2


def test_derivative_block_error_shrinks_with_delta():
    t = np.linspace(0.0, 2.0, 11)
    errors = []
    for delta in (1e-2, 1e-3, 1e-4):
        config = KernelConfig(k_h=4.0, delta=delta, dof=1)
        gram = assemble_gram(config, t, t).block
        _, d_tj, _, _ = analytic_blocks(4.0, t[:, None], t[None, :])
        errors.append(np.max(np.abs(gram[0::2, 1::2] - d_tj)))
    assert errors[0] > errors[1] > errors[2]


def test_gram_is_symmetric_and_psd():
    rng = np.random.default_rng(11)
    for trial in range(5):
        n = int(rng.integers(3, 12))
        t = np.sort(rng.uniform(0.0, 3.0, size=n))
        t += np.arange(n) * 1e-6  # guard against duplicate draws
        config = KernelConfig(k_h=float(rng.uniform(0.5, 6.0)), delta=1e-3,
                              dof=int(rng.integers(1, 4)))
        gram = assemble_gram(config, t, t).block
        assert np.allclose(gram, gram.T, atol=1e-13)
        eigs = np.linalg.eigvalsh(gram)
        # Exact Gram of a feature map: only round-off below zero.
        assert eigs.min() > -1e-10 * max(1.0, eigs.max())


def test_gram_entries_match_block_kernel():
    config = KernelConfig(k_h=2.0, delta=1e-3, dof=2)
    rows = np.array([0.0, 0.7, 1.1])
    cols = np.array([0.2, 0.9])
    gram = assemble_gram(config, rows, cols).block
    d = 2 * config.dof
    for i, ti in enumerate(rows):
        for j, tj in enumerate(cols):
            expected = block_kernel(config, ti, tj)
            got = gram[i * d : (i + 1) * d, j * d : (j + 1) * d]
            assert np.allclose(got, expected, atol=1e-15)


def test_cross_gram_transpose_relation():
    # k(t, s) blocks relate to k(s, t) by swapping which argument carries
    # the difference step, which is exactly the block transpose.
    config = KernelConfig(k_h=1.5, delta=1e-3, dof=2)
    rows = np.array([0.1, 0.5, 0.8])
    cols = np.array([0.0, 0.3, 0.6, 1.2])
    ab = assemble_gram(config, rows, cols).block
    ba = assemble_gram(config, cols, rows).block
    assert np.allclose(ab, ba.T, atol=1e-14)


def test_config_validation():
    with pytest.raises(ValueError):
        KernelConfig(k_h=0.0)
    with pytest.raises(ValueError):
        KernelConfig(k_h=1.0, delta=0.0)
    with pytest.raises(ValueError):
        KernelConfig(k_h=1.0, dof=0)
    with pytest.raises(ValueError):
        assemble_gram(KernelConfig(k_h=1.0), np.zeros((2, 2)), np.zeros(2))

"""Spectral probes against dense linear-algebra oracles."""

import numpy as np
import pytest

from spikelab import (ParamVector, Preconditioner, ProbeWarmStart, compute_probe,
                      lambda_grad, lambda_max_preconditioned, lambda_max_raw,
                      power_iteration, sustained_predictor)
from spikelab.errors import BoundaryUndefined, ConfigError, ZeroGradient
from spikelab.probes import lambda_grad_weighted

# === power iteration ========================================================


def _sym(seed, n):
    a = np.random.default_rng(seed).standard_normal((n, n))
    return a @ a.T / n


def test_power_iteration_matches_dense():
    A = _sym(0, 12)
    top = float(np.linalg.eigvalsh(A)[-1])
    res = power_iteration(lambda w: A @ w, dim=12, max_iters=500, tol=1e-12)
    assert res.converged
    assert res.value == pytest.approx(top, rel=1e-6)


def test_power_iteration_zero_operator():
    res = power_iteration(lambda w: np.zeros_like(w), dim=4)
    assert res.value == 0.0 and res.converged


def test_power_iteration_warm_start_is_fast():
    A = _sym(1, 20)
    cold = power_iteration(lambda w: A @ w, dim=20, tol=1e-10, max_iters=500)
    warm = power_iteration(lambda w: A @ w, dim=20, tol=1e-10, max_iters=500,
                           v0=cold.vector)
    assert warm.iters_used <= 3
    assert warm.value == pytest.approx(cold.value, rel=1e-8)


def test_power_iteration_rejects_empty():
    with pytest.raises(ConfigError):
        power_iteration(lambda w: w, dim=0)


# === preconditioner =========================================================


def test_adam_scale_formula():
    pre = Preconditioner.for_adam(0.9, 0.999, 1, np.ones(2), 0.0)
    want = (0.1 / 1.9) / (1.0 - 0.9)
    assert pre.scale == pytest.approx(want)
    assert np.allclose(pre.diag(), want)


def test_adam_scale_without_bias_correction():
    pre = Preconditioner.for_adam(0.9, 0.999, 1, np.ones(2), 0.0,
                                  bias_correction=False)
    assert pre.scale == pytest.approx(0.1 / 1.9)


def test_preconditioner_validation():
    with pytest.raises(ConfigError):
        Preconditioner(0.0, 0.999, 0, np.ones(2), 0.0, 1.0)
    with pytest.raises(ConfigError):
        Preconditioner(0.0, 0.999, 1, np.ones(2), 0.0, 0.0)
    bad = Preconditioner(0.0, 0.999, 1, -np.ones(2), 0.0, 1.0)
    with pytest.raises(ConfigError):
        bad.diag()


# === preconditioned spectrum ================================================


def test_preconditioned_lambda_matches_dense(quad3):
    d = np.array([0.5, 2.0, 0.1])
    pre = Preconditioner(0.0, 0.999, 1, (1.0 / d) ** 2, 0.0, 1.0)
    assert np.allclose(pre.diag(), d)
    th = np.ones(3)
    res = lambda_max_preconditioned(pre, quad3, th, tol=1e-12, max_iters=500)
    want = float(np.max(d * np.array([1.0, 5.0, 10.0])))
    assert res.value == pytest.approx(want, rel=1e-6)


def test_raw_lambda_on_quadratic(quad3):
    res = lambda_max_raw(quad3, np.ones(3), dim=3, tol=1e-12, max_iters=500)
    assert res.value == pytest.approx(10.0, rel=1e-6)


def test_lambda_grad_quotient(quad3):
    d = np.array([1.0, 0.5, 0.25])
    pre = Preconditioner(0.0, 0.999, 1, (1.0 / d) ** 2, 0.0, 1.0)
    th = np.array([1.0, 1.0, 1.0])
    g = quad3.gradient(th)
    got = lambda_grad(pre, quad3, th, g)
    want = float(g @ (d * quad3.hvp(th, g))) / float(g @ g)
    assert got == pytest.approx(want, rel=1e-12)


def test_lambda_grad_zero_gradient(quad3):
    pre = Preconditioner(0.0, 0.999, 1, np.ones(3), 0.0, 1.0)
    with pytest.raises(ZeroGradient):
        lambda_grad(pre, quad3, np.zeros(3), np.zeros(3))


def test_weighted_quotient_bounded_by_lambda_max(quad3):
    # the D^(-1) inner product makes the bound exact, not just approximate
    rng = np.random.default_rng(4)
    for _ in range(10):
        d = np.exp(rng.standard_normal(3))
        pre = Preconditioner(0.0, 0.999, 1, (1.0 / d) ** 2, 0.0, 1.0)
        th = rng.standard_normal(3)
        if not np.any(quad3.gradient(th)):
            continue
        lam = lambda_max_preconditioned(pre, quad3, th, tol=1e-12,
                                        max_iters=1000).value
        got = lambda_grad_weighted(pre, quad3, th, quad3.gradient(th))
        assert got <= lam * (1.0 + 1e-8)


# === sustained predictor ====================================================


def test_sustained_is_min_of_three():
    s = [5.0, 1.0, 4.0, 2.0, 9.0]
    assert sustained_predictor(s, 1) == 1.0
    assert sustained_predictor(s, 2) == 1.0
    assert sustained_predictor(s, 3) == 2.0


def test_sustained_undefined_at_edges():
    with pytest.raises(BoundaryUndefined):
        sustained_predictor([1.0, 2.0, 3.0], 0)
    with pytest.raises(BoundaryUndefined):
        sustained_predictor([1.0, 2.0, 3.0], 2)


# === full probe =============================================================


def test_compute_probe_record(quad3):
    th = np.array([1.0, 1.0, 1.0])
    g = quad3.gradient(th)
    pre = Preconditioner(0.0, 0.999, 1, np.ones(3), 0.0, 1.0)
    warm = ProbeWarmStart()
    rec = compute_probe(quad3, th, pre, g, eta_t=0.1, step=7, seed=0, warm=warm)
    assert rec.step == 7
    assert rec.threshold == pytest.approx(20.0)
    assert rec.lambda_max_H == pytest.approx(10.0, rel=1e-4)
    assert rec.lambda_max_Hhat == pytest.approx(10.0, rel=1e-4)
    assert rec.lambda_grad_Hhat is not None
    assert rec.lambda_update_Hhat is None
    assert rec.converged
    assert warm.raw is not None and warm.pre is not None


def test_compute_probe_skips_grad_quotient_at_minimum(quad3):
    th = np.zeros(3)
    pre = Preconditioner(0.0, 0.999, 1, np.ones(3), 0.0, 1.0)
    rec = compute_probe(quad3, th, pre, np.zeros(3), eta_t=0.1, step=0, seed=0,
                        warm=ProbeWarmStart())
    assert rec.lambda_grad_Hhat is None

"""Correlated MIMO helpers and the input covariance search: determinant dual
route, gradient finite differences, white-channel recovery, and a frozen
shaping witness with a grid oracle cross-check."""

import math

import numpy as np
import pytest

from outagekit.errors import InfeasibleShapingError
from outagekit.exponent import exponent_closed_form, exponent_numeric, min_energy_per_nat
from outagekit.mimo import (
    _ShapingProblem,
    correlated_exponent,
    receive_partial_trace,
    shape_covariance,
    white_log_mgf_det,
)
from outagekit.models import MimoCorrelated, MimoWhite

CORR_T = np.array([[1.0, 0.9], [0.9, 1.0]])
WITNESS_PSI = np.kron(np.eye(2), CORR_T)


def _random_unit_diag_psi(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    psi = a @ a.conj().T
    d = np.sqrt(np.real(np.diag(psi)))
    return psi / np.outer(d, d)


def test_white_psi_white_sigma_reduces_to_closed_form():
    for n_t, n_r in [(1, 1), (2, 2), (4, 2), (3, 1)]:
        model = MimoCorrelated(
            psi=np.eye(n_t * n_r), sigma=np.eye(n_t) / n_t, n_t=n_t, n_r=n_r
        )
        assert min_energy_per_nat(model) == 1.0 / n_r
        white = MimoWhite(n_t=n_t, n_r=n_r)
        for eta in np.geomspace(1.2 / n_r, 40.0 / n_r, 6):
            assert correlated_exponent(model, eta).exponent == pytest.approx(
                exponent_closed_form(white, eta).exponent, abs=1e-9
            )


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_determinant_route_matches_eigen_route(seed):
    n_t, n_r = 2, 2
    psi = _random_unit_diag_psi(n_t * n_r, seed)
    model = MimoCorrelated(psi=psi, sigma=np.eye(n_t) / n_t, n_t=n_t, n_r=n_r)
    for lam in [-0.2, -1.0, -5.0, -30.0]:
        assert model.log_mgf(lam) == pytest.approx(
            white_log_mgf_det(psi, n_t, lam), abs=1e-10
        )


def test_receive_partial_trace_of_kron():
    psi_t = CORR_T
    for n_r in [1, 2, 3]:
        psi = np.kron(np.eye(n_r), psi_t)
        assert np.allclose(receive_partial_trace(psi, 2, n_r), n_r * psi_t, atol=1e-14)


def test_objective_gradient_finite_difference():
    problem = _ShapingProblem(WITNESS_PSI.astype(complex), 2, 2, 10.0)
    rng = np.random.default_rng(8)
    sigma = np.array([[0.6, 0.1 + 0.05j], [0.1 - 0.05j, 0.4]], dtype=complex)
    f0, _, lam, mean = problem.eval_objective(sigma)
    grad = problem.gradient(sigma, lam, mean)
    for _ in range(4):
        h = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        h = 0.5 * (h + h.conj().T)
        h -= np.eye(2) * np.trace(h).real / 2.0  # stay on the trace-1 slice
        eps = 1e-6
        fp = problem.eval_objective(sigma + eps * h)[0]
        fm = problem.eval_objective(sigma - eps * h)[0]
        directional = (fp - fm) / (2.0 * eps)
        predicted = float(np.real(np.trace(grad @ h)))
        assert directional == pytest.approx(predicted, rel=1e-4, abs=1e-8)


def test_shape_identity_psi_recovers_white():
    result = shape_covariance(np.eye(4), n_t=2, n_r=2, eta=10.0, n_starts=6, seed=0)
    expect = exponent_closed_form(MimoWhite(n_t=2, n_r=2), 10.0).exponent
    assert result.exponent == pytest.approx(expect, abs=1e-9)
    assert np.abs(result.sigma - np.eye(2) / 2.0).max() < 1e-5
    assert result.eta_bar == pytest.approx(0.5)


# frozen after the first multistart run; a dense scan over the
# (eigenvalue split, rotation) parametrization confirmed the same optimum
WITNESS_SHAPED = 5.714098259520033
WITNESS_WHITE = 5.604843134332912
WITNESS_BEAMFORMER = 5.327803898400141


def test_shape_witness_frozen_values():
    result = shape_covariance(WITNESS_PSI, n_t=2, n_r=2, eta=10.0, n_starts=8, seed=0)
    assert result.exponent == pytest.approx(WITNESS_SHAPED, abs=1e-6)
    assert abs(np.trace(result.sigma).real - 1.0) < 1e-12

    white = MimoCorrelated(psi=WITNESS_PSI, sigma=np.eye(2) / 2, n_t=2, n_r=2)
    assert exponent_numeric(white, 10.0).exponent == pytest.approx(WITNESS_WHITE, abs=1e-9)

    vals, vecs = np.linalg.eigh(receive_partial_trace(WITNESS_PSI, 2, 2))
    top = vecs[:, -1:]
    beam = MimoCorrelated(psi=WITNESS_PSI, sigma=top @ top.conj().T, n_t=2, n_r=2)
    assert exponent_numeric(beam, 10.0).exponent == pytest.approx(WITNESS_BEAMFORMER, abs=1e-9)

    # the searched covariance strictly beats both fixed choices
    assert result.exponent > WITNESS_WHITE + 1e-3
    assert result.exponent > WITNESS_BEAMFORMER + 1e-3


def test_shape_witness_matches_parametric_grid_oracle():
    # independent oracle: Sigma = R(theta, phi) diag(s, 1-s) R^H scanned on a grid
    best = -np.inf
    for s in np.linspace(0.5, 1.0, 26):
        for theta in np.linspace(0.0, math.pi / 2.0, 31):
            c, sn = math.cos(theta), math.sin(theta)
            u = np.array([[c, -sn], [sn, c]], dtype=complex)
            sigma = u @ np.diag([s, 1.0 - s]) @ u.conj().T
            model = MimoCorrelated(psi=WITNESS_PSI, sigma=sigma, n_t=2, n_r=2)
            val = exponent_numeric(model, 10.0).exponent
            best = max(best, val)
    assert best == pytest.approx(WITNESS_SHAPED, abs=1e-3)
    assert best < WITNESS_SHAPED + 1e-6  # search result dominates the grid


def test_shape_beamforming_regime_single_receive_antenna():
    # strong transmit correlation at moderate eta favors a rank-1 covariance
    result = shape_covariance(CORR_T, n_t=2, n_r=1, eta=5.0, n_starts=8, seed=0)
    white = MimoCorrelated(psi=CORR_T, sigma=np.eye(2) / 2, n_t=2, n_r=1)
    white_val = exponent_numeric(white, 5.0).exponent
    assert result.exponent > white_val + 0.1

    # 1-D oracle: eigenbasis of the transmit correlation, split s vs 1-s
    vals, vecs = np.linalg.eigh(CORR_T.astype(complex))
    best = -np.inf
    for s in np.linspace(0.0, 1.0, 2001):
        sigma = vecs @ np.diag([1.0 - s, s]) @ vecs.conj().T
        model = MimoCorrelated(psi=CORR_T, sigma=sigma, n_t=2, n_r=1)
        if model.mean_rate_derivative() <= 1.0 / 5.0:
            continue
        best = max(best, exponent_numeric(model, 5.0).exponent)
    assert result.exponent == pytest.approx(best, abs=1e-6)


def test_shape_infeasible_eta_raises():
    # best attainable mean rate derivative is the top partial-trace eigenvalue
    top = np.linalg.eigvalsh(receive_partial_trace(WITNESS_PSI, 2, 2)).max()
    with pytest.raises(InfeasibleShapingError):
        shape_covariance(WITNESS_PSI, n_t=2, n_r=2, eta=0.9 / top, n_starts=2, seed=0)


def test_shape_result_metadata():
    result = shape_covariance(WITNESS_PSI, n_t=2, n_r=2, eta=10.0, n_starts=4, seed=1)
    assert len(result.start_objectives) == 4
    assert 0 <= result.best_start < 4
    assert result.eta == 10.0
    assert result.mean_rate_derivative > 1.0 / 10.0
    assert max(result.start_objectives) == pytest.approx(result.exponent, abs=1e-12)

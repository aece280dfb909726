"""Correlated MIMO exponents and input covariance shaping.

The correlated channel is specified by the covariance Psi of the stacked
conjugate channel vector (unit diagonal) together with an input covariance
S of unit trace. The exponent engine works off the eigenvalue weights of
sqrt(Psi) (I kron S) sqrt(Psi); this module adds the search over S:

    maximize   E(eta; S)
    subject to S PSD, tr S = 1, and mean rate derivative >= 1/eta.

The objective is a pointwise supremum of concave functions of S and is not
itself concave, so the search runs projected gradient ascent from multiple
starts, with the gradient coming from the envelope theorem at the inner
maximizer lam_star.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from .errors import DescriptorError, InfeasibleShapingError
from .exponent import ExponentPoint, exponent_numeric, maximize_concave
from .models import MimoCorrelated, _psd_eigh, _check_hermitian


def correlated_exponent(model: MimoCorrelated, eta: float) -> ExponentPoint:
    """Outage exponent of a correlated MIMO channel at fixed input covariance."""
    return exponent_numeric(model, eta)


def white_log_mgf_det(psi, n_t: int, lam: float) -> float:
    """Log-MGF of the white-input rate derivative via the determinant identity.

    Independent route to MimoCorrelated(psi, I/n_t).log_mgf: the MGF equals
    det(I - (lam/n_t) Psi)^-1 for lam below n_t over the largest eigenvalue
    of Psi. Used for cross-checks.
    """
    psi = np.asarray(psi, dtype=complex)
    n = psi.shape[0]
    sign, logdet = np.linalg.slogdet(np.eye(n) - (lam / n_t) * psi)
    if sign.real <= 0:
        raise ValueError("lam is outside the MGF domain of the white-input law")
    return float(-logdet)


def receive_partial_trace(psi: np.ndarray, n_t: int, n_r: int) -> np.ndarray:
    """Sum of the n_r diagonal transmit-side blocks of an (n_t*n_r)^2 matrix."""
    out = np.zeros((n_t, n_t), dtype=complex)
    for r in range(n_r):
        sl = slice(r * n_t, (r + 1) * n_t)
        out += psi[sl, sl]
    return out


@dataclass
class ShapingResult:
    """Outcome of the input covariance search at one eta."""

    sigma: np.ndarray
    exponent: float
    lambda_star: float
    eta: float
    eta_bar: float
    mean_rate_derivative: float
    start_objectives: List[float]
    best_start: int
    iterations: List[int]


class _ShapingProblem:
    def __init__(self, psi: np.ndarray, n_t: int, n_r: int, eta: float):
        self.psi = psi
        self.n_t = n_t
        self.n_r = n_r
        self.eta = eta
        self.inv_eta = 1.0 / eta
        vals, vecs = _psd_eigh(psi, "psi", 1e-10)
        self.psi_half = (vecs * np.sqrt(vals)) @ vecs.conj().T
        self.partial = receive_partial_trace(psi, n_t, n_r)
        self.eye_r = np.eye(n_r)
        self.eye_n = np.eye(n_t * n_r)
        self.penalty = 1e4

    def sigma_of(self, ell: np.ndarray) -> np.ndarray:
        gram = ell @ ell.conj().T
        return gram / np.trace(gram).real

    def eval_objective(self, sigma: np.ndarray):
        """Penalized objective, exponent, lam_star, mean at this covariance."""
        big = np.kron(self.eye_r, sigma)
        sym = self.psi_half @ big @ self.psi_half
        mu = np.clip(np.linalg.eigvalsh(sym), 0.0, None)
        mean = float(mu.sum())
        if mean <= self.inv_eta:
            shortfall = self.inv_eta - mean
            return -self.penalty * shortfall**2, 0.0, 0.0, mean
        mu_pos = mu[mu > 0.0]

        def deriv(lam: float) -> float:
            return self.inv_eta - float((mu_pos / (1.0 - lam * mu_pos)).sum())

        lam, _ = maximize_concave(deriv)
        value = lam * self.inv_eta + float(np.log1p(-lam * mu_pos).sum())
        return value, value, lam, mean

    def gradient(self, sigma: np.ndarray, lam: float, mean: float) -> np.ndarray:
        """Gradient of the penalized objective with respect to sigma."""
        if mean <= self.inv_eta:
            return 2.0 * self.penalty * (self.inv_eta - mean) * self.partial
        if lam == 0.0:
            return np.zeros_like(sigma)
        # envelope theorem: d/dS of log det(I - lam (I kron S) Psi) at fixed
        # lam_star is -lam * partial trace of Psi (I - lam (I kron S) Psi)^-1,
        # computed in its explicitly Hermitian factorized form.
        big = np.kron(self.eye_r, sigma)
        a = self.psi_half @ big @ self.psi_half
        inner = np.linalg.solve(self.eye_n - lam * a, self.psi_half)
        b = self.psi_half @ inner
        grad = -lam * receive_partial_trace(b, self.n_t, self.n_r)
        return 0.5 * (grad + grad.conj().T)

    def ascend(self, ell: np.ndarray, max_iters: int):
        ell = ell.copy()
        sigma = self.sigma_of(ell)
        f, value, lam, mean = self.eval_objective(sigma)
        stall = 0
        iters = 0
        for iters in range(1, max_iters + 1):
            grad_sigma = self.gradient(sigma, lam, mean)
            t = np.trace(ell @ ell.conj().T).real
            direction = (grad_sigma @ ell - np.trace(grad_sigma @ sigma).real * ell) / t
            norm = np.linalg.norm(direction)
            if norm == 0.0:
                break
            step = 1.0
            improved = False
            while step > 1e-14:
                cand = ell + step * direction / norm
                cand_sigma = self.sigma_of(cand)
                cand_f, cand_value, cand_lam, cand_mean = self.eval_objective(cand_sigma)
                if cand_f > f:
                    improved = cand_f > f + 1e-10
                    ell, sigma = cand, cand_sigma
                    f, value, lam, mean = cand_f, cand_value, cand_lam, cand_mean
                    break
                step *= 0.5
            stall = 0 if improved else stall + 1
            if stall >= 20:
                break
        return sigma, f, value, lam, mean, iters


def shape_covariance(
    psi,
    n_t: int,
    n_r: int,
    eta: float,
    n_starts: int = 16,
    seed: int = 0,
    max_iters: int = 5000,
) -> ShapingResult:
    """Search for the input covariance maximizing the outage exponent at eta.

    Feasibility requires some trace-1 PSD covariance to reach mean rate
    derivative 1/eta; the best attainable mean is the top eigenvalue of the
    receive partial trace of psi (attained by the rank-1 beamformer), so an
    eta below its reciprocal raises InfeasibleShapingError.
    """
    psi = np.array(psi, dtype=complex)
    n = n_t * n_r
    if psi.shape != (n, n):
        raise DescriptorError(f"psi must be {n}x{n}, got {psi.shape}")
    _check_hermitian(psi, "psi", 1e-10)
    if not np.allclose(np.diag(psi).real, 1.0, atol=1e-8):
        raise DescriptorError("psi must have unit diagonal")
    if n_starts < 1:
        raise ValueError("n_starts must be >= 1")
    prob = _ShapingProblem(psi, n_t, n_r, eta)
    top_mean, top_vecs = np.linalg.eigh(prob.partial)
    if 1.0 / eta > top_mean[-1] + 1e-12:
        raise InfeasibleShapingError(
            f"no unit-trace covariance reaches mean rate derivative {1.0 / eta:.6g} "
            f"(maximum attainable {top_mean[-1]:.6g})"
        )

    rng = np.random.default_rng(seed)
    starts = [np.eye(n_t, dtype=complex) / np.sqrt(n_t)]
    if n_starts >= 2:
        beam = np.zeros((n_t, n_t), dtype=complex)
        beam[:, 0] = top_vecs[:, -1]
        starts.append(beam)
    while len(starts) < n_starts:
        starts.append(
            rng.standard_normal((n_t, n_t)) + 1j * rng.standard_normal((n_t, n_t))
        )

    white = np.eye(n_t) / n_t
    candidates = []
    objectives: List[float] = []
    iteration_counts: List[int] = []
    for ell in starts:
        sigma, f, value, lam, mean, iters = prob.ascend(ell, max_iters)
        feasible = mean >= prob.inv_eta - 1e-9
        objectives.append(float(value) if feasible else float(f))
        iteration_counts.append(iters)
        if feasible:
            candidates.append((float(value), float(lam), float(mean), sigma))
    if not candidates:
        raise InfeasibleShapingError("no start converged to a feasible covariance")

    best_value = max(c[0] for c in candidates)
    tied = [c for c in candidates if c[0] >= best_value - 1e-9]
    value, lam, mean, sigma = min(
        tied, key=lambda c: float(np.linalg.norm(c[3] - white))
    )
    best_start = int(max(range(len(objectives)), key=lambda i: objectives[i]))
    return ShapingResult(
        sigma=sigma,
        exponent=value,
        lambda_star=lam,
        eta=eta,
        eta_bar=1.0 / mean,
        mean_rate_derivative=mean,
        start_objectives=objectives,
        best_start=best_start,
        iterations=iteration_counts,
    )

"""Fading channel models: rate derivatives, log-MGFs, and sampling.

A channel state s determines the instantaneous rate J(gamma, s) achievable at
per-channel SNR gamma:

    scalar channel   J(gamma, a)  = log(1 + gamma * a),        a = |h|^2
    MIMO channel     J(gamma, H)  = log det(I + gamma H S H*),  S = input covariance

The wideband regime is governed by the rate derivative at zero SNR,
J_dot(0, s) (|h|^2 for scalar channels, tr(H S H*) for MIMO), so each model
exposes the distribution of that derivative: its mean, its log-MGF on the
nonpositive half-line, exact sampling, and (where the law is a Gamma law)
exponentially tilted sampling for importance-sampled rare-event estimation.

All families are normalized to unit per-antenna gain, so the scalar models
have E[J_dot] = 1 and the white n_t x n_r MIMO model has E[J_dot] = n_r.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .errors import (
    DescriptorError,
    MgfDomainError,
    TiltingUnavailableError,
)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    # unit-variance circular complex Gaussian: Re, Im ~ N(0, 1/2)
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return z / np.sqrt(2.0)


class FadingModel:
    """Common interface for fading model families."""

    kind: str = "abstract"

    def mean_rate_derivative(self) -> float:
        """E[J_dot(0, S)], the zero-SNR slope of the mean rate."""
        raise NotImplementedError

    @property
    def lambda_sup(self) -> float:
        """Supremum of the finite domain of the log-MGF."""
        raise NotImplementedError

    def log_mgf(self, lam):
        """log E[exp(lam * J_dot(0, S))], finite for lam < lambda_sup."""
        raise NotImplementedError

    def log_mgf_deriv(self, lam):
        """First derivative of log_mgf; increasing, equals the mean at 0."""
        raise NotImplementedError

    def sample(self, n: int, seed) -> np.ndarray:
        """n i.i.d. draws of J_dot(0, S)."""
        return self.rate_derivative(self.sample_state(n, seed))

    def sample_state(self, n: int, seed):
        """n i.i.d. channel states (gain values or channel matrices)."""
        raise NotImplementedError

    def rate_derivative(self, states) -> np.ndarray:
        """J_dot(0, s) for each sampled state."""
        raise NotImplementedError

    def exact_rate(self, gamma: float, states) -> np.ndarray:
        """Finite-SNR rate J(gamma, s) for each sampled state."""
        raise NotImplementedError

    def tilted_sample(self, lam: float, n: int, seed) -> Tuple[np.ndarray, np.ndarray]:
        """Draws under the exponentially tilted law, with per-draw log weights.

        The tilted density is proportional to exp(lam * x) times the original
        density; the returned log weight -lam*x + log_mgf(lam) converts a
        tilted draw back to an unbiased estimate under the original law.
        """
        raise TiltingUnavailableError(self.kind)

    def descriptor(self) -> dict:
        raise NotImplementedError

    def _check_domain(self, lam) -> None:
        if np.max(lam) >= self.lambda_sup:
            raise MgfDomainError(
                f"log-MGF of {self.kind} is finite only for lam < "
                f"{self.lambda_sup:.6g}"
            )


class _GammaRateModel(FadingModel):
    """Models whose rate derivative is Gamma(shape, scale) distributed."""

    _shape: float
    _scale: float

    def mean_rate_derivative(self) -> float:
        return self._shape * self._scale

    @property
    def lambda_sup(self) -> float:
        return 1.0 / self._scale

    def log_mgf(self, lam):
        self._check_domain(lam)
        return -self._shape * np.log1p(-self._scale * np.asarray(lam))

    def log_mgf_deriv(self, lam):
        self._check_domain(lam)
        return self._shape * self._scale / (1.0 - self._scale * np.asarray(lam))

    def sample_state(self, n: int, seed) -> np.ndarray:
        return _rng(seed).standard_gamma(self._shape, n) * self._scale

    def rate_derivative(self, states) -> np.ndarray:
        return np.asarray(states)

    def exact_rate(self, gamma: float, states) -> np.ndarray:
        return np.log1p(gamma * np.asarray(states))

    def tilted_sample(self, lam: float, n: int, seed):
        if lam > 0:
            raise MgfDomainError("tilting parameter must be <= 0")
        scale = self._scale / (1.0 - self._scale * lam)
        draws = _rng(seed).standard_gamma(self._shape, n) * scale
        log_w = -lam * draws + float(self.log_mgf(lam))
        return draws, log_w


@dataclass(frozen=True)
class Rayleigh(_GammaRateModel):
    """Unit-mean Rayleigh fading: |h|^2 ~ Exp(1)."""

    kind: str = field(default="rayleigh", init=False)

    _shape = 1.0
    _scale = 1.0

    def descriptor(self) -> dict:
        return {"kind": "rayleigh"}


@dataclass(frozen=True)
class Nakagami(_GammaRateModel):
    """Nakagami-m fading: |h|^2 ~ Gamma(m, 1/m), unit mean, m >= 1/2."""

    m: float
    kind: str = field(default="nakagami", init=False)

    def __post_init__(self):
        if not (self.m >= 0.5 and np.isfinite(self.m)):
            raise DescriptorError(f"nakagami shape m must be >= 0.5, got {self.m}")

    @property
    def _shape(self) -> float:
        return float(self.m)

    @property
    def _scale(self) -> float:
        return 1.0 / float(self.m)

    def descriptor(self) -> dict:
        return {"kind": "nakagami", "m": float(self.m)}


@dataclass(frozen=True)
class MimoWhite(_GammaRateModel):
    """n_t x n_r i.i.d. MIMO with white input covariance I/n_t.

    The rate derivative tr(H H*)/n_t is Gamma(n_t*n_r, 1/n_t): a sum of
    n_t*n_r unit-mean exponentials scaled by the per-antenna power 1/n_t.
    """

    n_t: int
    n_r: int
    kind: str = field(default="mimo_white", init=False)

    def __post_init__(self):
        for name, v in (("n_t", self.n_t), ("n_r", self.n_r)):
            if not (isinstance(v, (int, np.integer)) and v >= 1):
                raise DescriptorError(f"{name} must be a positive integer, got {v}")

    @property
    def _shape(self) -> float:
        return float(self.n_t * self.n_r)

    @property
    def _scale(self) -> float:
        return 1.0 / float(self.n_t)

    def sample_state(self, n: int, seed) -> np.ndarray:
        # channel matrices drawn entrywise; shape (n, n_r, n_t)
        return _complex_normal(_rng(seed), (n, self.n_r, self.n_t))

    def rate_derivative(self, states) -> np.ndarray:
        h = np.asarray(states)
        if h.ndim == 1:  # already reduced gains (e.g. tilted draws)
            return h
        return (np.abs(h) ** 2).sum(axis=(1, 2)) / self.n_t

    def exact_rate(self, gamma: float, states) -> np.ndarray:
        h = np.asarray(states)
        gram = np.einsum("nij,nkj->nik", h, h.conj()) * (gamma / self.n_t)
        eye = np.eye(self.n_r)
        return np.linalg.slogdet(eye + gram)[1]

    def descriptor(self) -> dict:
        return {"kind": "mimo_white", "n_t": int(self.n_t), "n_r": int(self.n_r)}


@dataclass(frozen=True)
class Rician(FadingModel):
    """Rician fading h ~ CN(kappa, 1 - kappa^2), unit-mean |h|^2.

    |h|^2 scaled by 2/(1-kappa^2) is noncentral chi-square with 2 degrees of
    freedom and noncentrality 2 kappa^2/(1-kappa^2), which gives the closed
    log-MGF below (see docs/rician_logmgf.md for the derivation).
    """

    kappa: float
    kind: str = field(default="rician", init=False)

    def __post_init__(self):
        if not (0.0 <= self.kappa < 1.0):
            raise DescriptorError(
                f"rician line-of-sight fraction kappa must lie in [0, 1), got {self.kappa}"
            )

    def mean_rate_derivative(self) -> float:
        return 1.0

    @property
    def lambda_sup(self) -> float:
        return 1.0 / (1.0 - self.kappa**2)

    def log_mgf(self, lam):
        self._check_domain(lam)
        lam = np.asarray(lam)
        k2 = self.kappa**2
        b = 1.0 - k2
        return k2 * lam / (1.0 - b * lam) - np.log1p(-b * lam)

    def log_mgf_deriv(self, lam):
        self._check_domain(lam)
        lam = np.asarray(lam)
        k2 = self.kappa**2
        b = 1.0 - k2
        u = 1.0 / (1.0 - b * lam)
        return k2 * u**2 + b * u

    def sample_state(self, n: int, seed) -> np.ndarray:
        scatter = np.sqrt(1.0 - self.kappa**2)
        h = self.kappa + scatter * _complex_normal(_rng(seed), n)
        return np.abs(h) ** 2

    def rate_derivative(self, states) -> np.ndarray:
        return np.asarray(states)

    def exact_rate(self, gamma: float, states) -> np.ndarray:
        return np.log1p(gamma * np.asarray(states))

    def descriptor(self) -> dict:
        return {"kind": "rician", "kappa": float(self.kappa)}


def _check_hermitian(mat: np.ndarray, name: str, atol: float) -> None:
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise DescriptorError(f"{name} must be square, got shape {mat.shape}")
    if not np.allclose(mat, mat.conj().T, atol=atol):
        raise DescriptorError(f"{name} must be Hermitian")


def _psd_eigh(mat: np.ndarray, name: str, atol: float) -> Tuple[np.ndarray, np.ndarray]:
    vals, vecs = np.linalg.eigh(mat)
    floor = -atol * max(1.0, float(vals[-1]))
    if vals[0] < floor:
        raise DescriptorError(
            f"{name} must be positive semidefinite (min eigenvalue {vals[0]:.3g})"
        )
    return np.clip(vals, 0.0, None), vecs


class MimoCorrelated(FadingModel):
    """Correlated MIMO channel with explicit input covariance.

    The stacked conjugate channel vector vec(H*) is CN(0, Psi) with Psi an
    (n_t*n_r) x (n_t*n_r) Hermitian PSD matrix with unit diagonal. For input
    covariance S (trace 1), the rate derivative tr(H S H*) is a weighted sum
    of independent unit exponentials whose weights are the eigenvalues of
    sqrt(Psi) (I kron S) sqrt(Psi), so

        log_mgf(lam) = -sum_i log(1 - lam * mu_i),   lam < 1/max(mu).
    """

    kind = "mimo_correlated"

    def __init__(self, psi, sigma, n_t: int, n_r: int):
        psi = np.array(psi, dtype=complex)
        sigma = np.array(sigma, dtype=complex)
        if not (int(n_t) >= 1 and int(n_r) >= 1):
            raise DescriptorError("n_t and n_r must be positive integers")
        self.n_t = int(n_t)
        self.n_r = int(n_r)
        n = self.n_t * self.n_r
        if psi.shape != (n, n):
            raise DescriptorError(
                f"psi must be {n}x{n} for n_t={n_t}, n_r={n_r}, got {psi.shape}"
            )
        if sigma.shape != (self.n_t, self.n_t):
            raise DescriptorError(
                f"sigma must be {n_t}x{n_t}, got shape {sigma.shape}"
            )
        _check_hermitian(psi, "psi", 1e-10)
        _check_hermitian(sigma, "sigma", 1e-10)
        if not np.allclose(np.diag(psi).real, 1.0, atol=1e-8):
            raise DescriptorError("psi must have unit diagonal")
        tr = float(np.trace(sigma).real)
        if abs(tr - 1.0) > 1e-10:
            raise DescriptorError(f"sigma must have trace 1 (+-1e-10), got {tr!r}")
        psi_vals, psi_vecs = _psd_eigh(psi, "psi", 1e-10)
        _psd_eigh(sigma, "sigma", 1e-10)
        self.psi = psi
        self.sigma = sigma
        self.psi.setflags(write=False)
        self.sigma.setflags(write=False)
        self._psi_half = (psi_vecs * np.sqrt(psi_vals)) @ psi_vecs.conj().T
        big_sigma = np.kron(np.eye(self.n_r), sigma)
        sym = self._psi_half @ big_sigma @ self._psi_half
        self._mu = np.clip(np.linalg.eigvalsh(sym), 0.0, None)

    @property
    def mode_weights(self) -> np.ndarray:
        """Eigenvalue weights of the rate derivative's exponential mixture."""
        return self._mu.copy()

    def mean_rate_derivative(self) -> float:
        return float(self._mu.sum())

    @property
    def lambda_sup(self) -> float:
        mu_max = float(self._mu.max())
        return np.inf if mu_max == 0.0 else 1.0 / mu_max

    def log_mgf(self, lam):
        self._check_domain(lam)
        lam = np.asarray(lam)
        return -np.log1p(-np.multiply.outer(lam, self._mu)).sum(axis=-1)

    def log_mgf_deriv(self, lam):
        self._check_domain(lam)
        lam = np.asarray(lam)
        return (self._mu / (1.0 - np.multiply.outer(lam, self._mu))).sum(axis=-1)

    def sample_state(self, n: int, seed) -> np.ndarray:
        w = _complex_normal(_rng(seed), (n, self.n_t * self.n_r))
        v = w @ self._psi_half.T  # rows ~ CN(0, psi)
        # v holds vec(H*): receive-antenna blocks of length n_t
        return np.conj(v.reshape(n, self.n_r, self.n_t))

    def rate_derivative(self, states) -> np.ndarray:
        h = np.asarray(states)
        return np.einsum("nrt,ts,nrs->n", h, self.sigma, h.conj()).real

    def exact_rate(self, gamma: float, states) -> np.ndarray:
        h = np.asarray(states)
        hs = np.einsum("nrt,ts->nrs", h, self.sigma)
        gram = np.einsum("nrs,nks->nrk", hs, h.conj()) * gamma
        eye = np.eye(self.n_r)
        return np.linalg.slogdet(eye + gram)[1]

    def with_sigma(self, sigma) -> "MimoCorrelated":
        """Same propagation statistics with a different input covariance."""
        return MimoCorrelated(self.psi, sigma, self.n_t, self.n_r)

    def descriptor(self) -> dict:
        return {
            "kind": "mimo_correlated",
            "n_t": self.n_t,
            "n_r": self.n_r,
            "psi": encode_complex_matrix(self.psi),
            "sigma": encode_complex_matrix(self.sigma),
        }


def parse_complex_matrix(rows, name: str = "matrix") -> np.ndarray:
    """Decode a row-major nested list of [re, im] pairs into a complex array."""
    try:
        arr = np.asarray(rows, dtype=float)
    except (TypeError, ValueError) as exc:
        raise DescriptorError(f"{name}: expected nested [re, im] pairs") from exc
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise DescriptorError(
            f"{name}: expected shape (rows, cols, 2) of [re, im] pairs, got {arr.shape}"
        )
    return arr[..., 0] + 1j * arr[..., 1]


def encode_complex_matrix(mat: np.ndarray) -> list:
    """Inverse of parse_complex_matrix, for JSON round trips."""
    mat = np.asarray(mat, dtype=complex)
    out = np.stack([mat.real, mat.imag], axis=-1)
    return out.tolist()


def model_from_descriptor(desc: dict) -> FadingModel:
    """Build a model from its JSON descriptor, e.g. {"kind": "rician", "kappa": 0.9}."""
    if not isinstance(desc, dict) or "kind" not in desc:
        raise DescriptorError("model descriptor must be an object with a 'kind' field")
    kind = desc["kind"]
    try:
        if kind == "rayleigh":
            return Rayleigh()
        if kind == "rician":
            return Rician(kappa=float(desc["kappa"]))
        if kind == "nakagami":
            return Nakagami(m=float(desc["m"]))
        if kind == "mimo_white":
            return MimoWhite(n_t=int(desc["n_t"]), n_r=int(desc["n_r"]))
        if kind == "mimo_correlated":
            psi = parse_complex_matrix(desc["psi"], "psi")
            sigma = parse_complex_matrix(desc["sigma"], "sigma")
            return MimoCorrelated(psi, sigma, int(desc["n_t"]), int(desc["n_r"]))
    except KeyError as exc:
        raise DescriptorError(f"model descriptor missing field {exc}") from exc
    raise DescriptorError(f"unknown model kind {kind!r}")

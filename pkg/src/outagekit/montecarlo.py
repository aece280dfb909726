"""Monte Carlo outage estimation across K parallel fading channels.

Estimators come in two flavours. Model-driven runs draw per-channel rate
derivatives (or channel states for the exact finite-power rate) from a
FadingModel and test the sum against the outage threshold. Protocol-driven
runs simulate the one-bit feedback power split instead.

Sampling is blocked so that memory stays bounded and results do not depend
on the block size: block b of a run uses a fresh generator seeded with
(seed, n_channels, b), so the stream for a given (seed, K) is reproducible
regardless of how many trials are requested.

For rare events the plain estimator is hopeless; the tilted estimator
reweights draws from the exponentially tilted distribution at the optimizer
lambda* of the exponent, which concentrates samples on the outage boundary
and keeps every weight below exp(-K E).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import gammainc

from .errors import (
    InsufficientDataError,
    NoClosedFormError,
    TiltingUnavailableError,
)
from .exponent import exponent_numeric, min_energy_per_nat
from .feedback import ProtocolParams, general_exponent
from .models import FadingModel, MimoWhite, Nakagami, Rayleigh

MAX_BLOCK_TRIALS = 10_000
TARGET_DRAWS_PER_BLOCK = 2_000_000


@dataclass(frozen=True)
class OutageEstimate:
    """Outage probability estimate at one channel count."""

    n_channels: int
    trials: int
    outage_prob: float
    std_err: float
    log_prob: float
    n_effective: float
    flagged: bool
    sampler: str
    mode: str


@dataclass(frozen=True)
class RateStats:
    """Mean linearized rate per unit energy over protocol trials."""

    n_channels: int
    trials: int
    mean_rate: float
    std_err: float


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r_squared: float
    n_points: int


def _iter_blocks(trials: int, n_channels: int):
    """Yield (block_index, block_trials) pairs covering all trials."""
    block = min(MAX_BLOCK_TRIALS, max(100, TARGET_DRAWS_PER_BLOCK // max(1, n_channels)))
    start = 0
    idx = 0
    while start < trials:
        n = min(block, trials - start)
        yield idx, n
        idx += 1
        start += n


def _block_rng(seed: int, n_channels: int, block_idx: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, n_channels, block_idx)))


def _validate_run(eta: float, n_channels: int, trials: int):
    if not (eta > 0.0 and math.isfinite(eta)):
        raise ValueError(f"eta must be positive, got {eta}")
    if n_channels < 1:
        raise ValueError(f"need at least one channel, got {n_channels}")
    if trials < 1:
        raise ValueError(f"need at least one trial, got {trials}")


def estimate_outage(
    model: FadingModel,
    eta: float,
    n_channels: int,
    trials: int,
    sampler: str = "plain",
    mode: str = "linearized",
    rho: Optional[float] = None,
    seed: int = 0,
) -> OutageEstimate:
    """Estimate the outage probability for K = n_channels parallel channels.

    mode "linearized" tests sum of rate derivatives < K/eta. mode "exact"
    tests the finite-power rate at total energy rho spread equally across
    channels against rho/eta; it requires rho and supports plain sampling
    only. sampler "tilted" draws from the exponentially tilted law at the
    exponent optimizer and reweights; it needs the model to support tilting.

    A run with zero (weighted) hits is flagged and its std_err is replaced
    by the rule-of-three upper bound 3/trials.
    """
    _validate_run(eta, n_channels, trials)
    if mode not in ("linearized", "exact"):
        raise ValueError(f"unknown mode {mode!r}")
    if sampler not in ("plain", "tilted"):
        raise ValueError(f"unknown sampler {sampler!r}")
    if mode == "exact":
        if sampler == "tilted":
            raise TiltingUnavailableError("exact-rate mode")
        if rho is None or not (rho > 0.0):
            raise ValueError("exact mode needs a positive total energy rho")

    K = n_channels
    lam = 0.0
    if sampler == "tilted":
        # below the minimum energy the event is typical and lambda* is 0,
        # so tilting degrades to plain sampling instead of erroring out
        if eta > min_energy_per_nat(model):
            lam = exponent_numeric(model, eta).lambda_star
        if lam < 0.0:
            # probe tilting support before burning through the blocks
            model.tilted_sample(lam, 1, _block_rng(seed, K, 0))

    threshold = K / eta if mode == "linearized" else rho / eta
    block_v: List[float] = []
    block_v2: List[float] = []
    for idx, n in _iter_blocks(trials, K):
        rng = _block_rng(seed, K, idx)
        if mode == "exact":
            states = model.sample_state(n * K, rng)
            rates = model.exact_rate(rho / K, states)
            total = rates.reshape(n, K).sum(axis=1)
            hits = float(np.count_nonzero(total < threshold))
            block_v.append(hits)
            block_v2.append(hits)
        elif sampler == "plain" or lam == 0.0:
            s = model.sample(n * K, rng).reshape(n, K).sum(axis=1)
            hits = float(np.count_nonzero(s < threshold))
            block_v.append(hits)
            block_v2.append(hits)
        else:
            draws, logw = model.tilted_sample(lam, n * K, rng)
            s = draws.reshape(n, K).sum(axis=1)
            lw = logw.reshape(n, K).sum(axis=1)
            inside = s < threshold
            v = np.zeros(n)
            v[inside] = np.exp(lw[inside])
            block_v.append(float(v.sum()))
            block_v2.append(float(np.square(v).sum()))

    total_v = math.fsum(block_v)
    total_v2 = math.fsum(block_v2)
    p = total_v / trials
    mean_sq = total_v2 / trials
    var = max(0.0, mean_sq - p * p)
    se = math.sqrt(var / trials)
    flagged = total_v == 0.0
    if flagged:
        se = 3.0 / trials
    if sampler == "tilted" and lam < 0.0:
        n_eff = total_v * total_v / total_v2 if total_v2 > 0.0 else 0.0
    else:
        n_eff = float(trials)
    return OutageEstimate(
        n_channels=K,
        trials=trials,
        outage_prob=p,
        std_err=se,
        log_prob=math.log(p) if p > 0.0 else -math.inf,
        n_effective=n_eff,
        flagged=flagged,
        sampler=sampler,
        mode=mode,
    )


def _protocol_draws(rng: np.random.Generator, params: ProtocolParams, K: int, n: int):
    """Draw n protocol trials: below/above counts, gain sums and raw draws."""
    p0 = params.p_below
    k0 = rng.binomial(K, p0, size=n)
    k1 = K - k0
    ids0 = np.repeat(np.arange(n), k0)
    # gain below the threshold: exponential truncated to [0, tau]
    u = rng.random(ids0.size)
    a0 = -np.log1p(-u * p0)
    ids1 = np.repeat(np.arange(n), k1)
    a1 = params.tau + rng.standard_exponential(ids1.size)
    return k0, k1, ids0, a0, ids1, a1


def _protocol_linearized(params, K, n, k0, k1, ids0, a0, ids1, a1):
    sum0 = np.bincount(ids0, weights=a0, minlength=n)
    sum1 = np.bincount(ids1, weights=a1, minlength=n)
    avg0 = np.divide(sum0, k0, out=np.zeros(n), where=k0 > 0)
    avg1 = np.divide(sum1, k1, out=np.zeros(n), where=k1 > 0)
    return params.g0 * avg0 + params.g1 * avg1


def _protocol_exact(params, rho, K, n, k0, k1, ids0, a0, ids1, a1):
    c0 = params.g0 * rho / k0[ids0]
    c1 = params.g1 * rho / k1[ids1]
    r0 = np.bincount(ids0, weights=np.log1p(c0 * a0), minlength=n)
    r1 = np.bincount(ids1, weights=np.log1p(c1 * a1), minlength=n)
    return r0 + r1


def model_rate_stats(
    model: FadingModel,
    n_channels: int,
    trials: int,
    mode: str = "linearized",
    rho: float = 1.0,
    seed: int = 0,
) -> RateStats:
    """Mean and standard error of the rate per unit energy R/rho.

    In linearized mode R/rho is the mean of the K rate derivatives, so rho
    drops out; in exact mode it is the finite-power rate at total energy rho
    divided by rho.
    """
    _validate_run(1.0, n_channels, trials)
    if mode not in ("linearized", "exact"):
        raise ValueError(f"unknown mode {mode!r}")
    if not (rho > 0.0):
        raise ValueError("rho must be positive")
    K = n_channels
    block_s: List[float] = []
    block_s2: List[float] = []
    for idx, n in _iter_blocks(trials, K):
        rng = _block_rng(seed, K, idx)
        if mode == "linearized":
            r = model.sample(n * K, rng).reshape(n, K).sum(axis=1) / K
        else:
            states = model.sample_state(n * K, rng)
            r = model.exact_rate(rho / K, states).reshape(n, K).sum(axis=1) / rho
        block_s.append(float(r.sum()))
        block_s2.append(float(np.square(r).sum()))
    mean = math.fsum(block_s) / trials
    var = max(0.0, math.fsum(block_s2) / trials - mean * mean)
    return RateStats(
        n_channels=K,
        trials=trials,
        mean_rate=mean,
        std_err=math.sqrt(var / trials),
    )


def protocol_rate_stats(
    params: ProtocolParams,
    n_channels: int,
    trials: int,
    seed: int = 0,
) -> RateStats:
    """Mean and standard error of the linearized rate per unit energy."""
    _validate_run(1.0, n_channels, trials)
    K = n_channels
    block_s: List[float] = []
    block_s2: List[float] = []
    for idx, n in _iter_blocks(trials, K):
        rng = _block_rng(seed, K, idx)
        r = _protocol_linearized(params, K, n, *_protocol_draws(rng, params, K, n))
        block_s.append(float(r.sum()))
        block_s2.append(float(np.square(r).sum()))
    mean = math.fsum(block_s) / trials
    var = max(0.0, math.fsum(block_s2) / trials - mean * mean)
    return RateStats(
        n_channels=K,
        trials=trials,
        mean_rate=mean,
        std_err=math.sqrt(var / trials),
    )


def estimate_protocol_outage(
    params: ProtocolParams,
    eta: float,
    n_channels: int,
    trials: int,
    mode: str = "linearized",
    rho: Optional[float] = None,
    seed: int = 0,
) -> OutageEstimate:
    """Plain-sampling outage estimate for the one-bit feedback protocol."""
    _validate_run(eta, n_channels, trials)
    if mode not in ("linearized", "exact"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "exact" and (rho is None or not (rho > 0.0)):
        raise ValueError("exact mode needs a positive total energy rho")
    K = n_channels
    threshold = 1.0 / eta if mode == "linearized" else rho / eta
    hits_blocks: List[float] = []
    for idx, n in _iter_blocks(trials, K):
        rng = _block_rng(seed, K, idx)
        drawn = _protocol_draws(rng, params, K, n)
        if mode == "linearized":
            r = _protocol_linearized(params, K, n, *drawn)
        else:
            r = _protocol_exact(params, rho, K, n, *drawn)
        hits_blocks.append(float(np.count_nonzero(r < threshold)))
    hits = math.fsum(hits_blocks)
    p = hits / trials
    se = math.sqrt(max(0.0, p * (1.0 - p)) / trials)
    flagged = hits == 0.0
    if flagged:
        se = 3.0 / trials
    return OutageEstimate(
        n_channels=K,
        trials=trials,
        outage_prob=p,
        std_err=se,
        log_prob=math.log(p) if p > 0.0 else -math.inf,
        n_effective=float(trials),
        flagged=flagged,
        sampler="plain",
        mode=mode,
    )


def linearized_outage_oracle(model: FadingModel, eta: float, n_channels: int) -> float:
    """Exact linearized outage probability where the K-fold sum is Gamma."""
    if isinstance(model, (Rayleigh, Nakagami, MimoWhite)):
        shape = model._shape * n_channels
        scale = model._scale
        return float(gammainc(shape, (n_channels / eta) / scale))
    raise NoClosedFormError(
        f"no exact outage expression for kind {model.kind!r}; "
        "compare against a high-trial plain run instead"
    )


def protocol_outage_oracle(params: ProtocolParams, eta: float, n_channels: int) -> float:
    """Exact linearized protocol outage in the all-below-dominated setting.

    Valid for g0 = 0 with tau >= 1/eta: any channel above the threshold
    already carries rate tau >= 1/eta, so outage happens iff every channel
    reports below, with probability p0^K.
    """
    if params.g0 != 0.0 or params.tau < 1.0 / eta:
        raise NoClosedFormError(
            "exact protocol outage needs g0 = 0 and tau >= 1/eta"
        )
    return params.p_below ** n_channels


def analytical_slope(
    model: Optional[FadingModel] = None,
    params: Optional[ProtocolParams] = None,
    eta: float = 1.0,
) -> float:
    """Exponent the fitted slope should approach for a linearized run."""
    if (model is None) == (params is None):
        raise ValueError("pass exactly one of model or params")
    if model is not None:
        return exponent_numeric(model, eta).exponent
    return general_exponent(params, eta).exponent


def fit_exponent(estimates: Sequence[OutageEstimate]) -> FitResult:
    """Weighted least squares of -log outage against channel count.

    Weights are the inverse delta-method variances (p/se)^2 of log p. Flagged
    or zero-probability points are dropped; fewer than four surviving points
    raises InsufficientDataError.
    """
    pts: List[Tuple[float, float, float]] = []
    for e in estimates:
        if e.flagged or not (e.outage_prob > 0.0) or not (e.std_err > 0.0):
            continue
        pts.append((float(e.n_channels), e.outage_prob, e.std_err))
    if len(pts) < 4:
        raise InsufficientDataError(len(pts))
    k = np.array([p[0] for p in pts])
    y = -np.log(np.array([p[1] for p in pts]))
    w = np.array([(p[1] / p[2]) ** 2 for p in pts])
    if np.unique(k).size < 2:
        raise ValueError("need at least two distinct channel counts to fit a slope")
    wsum = w.sum()
    kbar = float((w * k).sum() / wsum)
    ybar = float((w * y).sum() / wsum)
    skk = float((w * (k - kbar) ** 2).sum())
    sky = float((w * (k - kbar) * (y - ybar)).sum())
    slope = sky / skk
    intercept = ybar - slope * kbar
    resid = y - slope * k - intercept
    ss_res = float((w * resid**2).sum())
    ss_tot = float((w * (y - ybar) ** 2).sum())
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    return FitResult(
        slope=slope,
        intercept=intercept,
        r_squared=r_squared,
        n_points=len(pts),
    )

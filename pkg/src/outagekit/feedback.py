"""One-bit channel-state feedback: power split protocols and their exponents.

Each channel reports whether its gain exceeds a threshold tau. The
transmitter spends a fraction g0 of its power, shared equally, on channels
that reported "below" and the rest on channels that reported "above". With
unit-mean exponential gains the below/above probabilities are
p0 = 1 - exp(-tau) and p1 = exp(-tau).

The outage exponent of this protocol has two regimes in the energy budget
eta. Below the regime boundary 1/((1-g0) tau) the dominant error event
involves an atypical fraction x of "below" reports, giving

    E(eta) = min( inf over x in (0,1) of E(eta, x),  E0(eta) )

where E(eta, x) couples a binomial large-deviation cost with a conditional
tilted gap, and E0(eta) is the corner where essentially every channel
reports "below". Above the boundary only E0 remains. For the on-off special
case g0 = 0 the inner infimum is available in closed form, as is the upper
envelope over tau.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.special import xlogy

from .errors import BelowMinimumEnergyError, DescriptorError
from .exponent import maximize_concave

LAMBDA_CAP = 1e12


@dataclass(frozen=True)
class ProtocolParams:
    """Threshold tau > 0 and below-power fraction g0 in [0, 1]."""

    tau: float
    g0: float = 0.0

    def __post_init__(self):
        if not (self.tau > 0.0 and math.isfinite(self.tau)):
            raise DescriptorError(f"threshold tau must be positive, got {self.tau}")
        if not (0.0 <= self.g0 <= 1.0):
            raise DescriptorError(f"power fraction g0 must lie in [0, 1], got {self.g0}")

    @property
    def p_below(self) -> float:
        return -math.expm1(-self.tau)

    @property
    def p_above(self) -> float:
        return math.exp(-self.tau)

    @property
    def g1(self) -> float:
        return 1.0 - self.g0

    def descriptor(self) -> dict:
        return {"tau": float(self.tau), "g0": float(self.g0)}


@dataclass(frozen=True)
class FeedbackPoint:
    """Protocol outage exponent at one energy budget."""

    eta: float
    exponent: float
    regime: str  # "below_threshold" or "above_threshold"
    x_star: Optional[float]
    tau: float
    g0: float


@dataclass(frozen=True)
class EnvelopePoint:
    eta: float
    tau_opt: float
    exponent: float


def binary_entropy(x) -> np.ndarray:
    """Entropy in nats of a Bernoulli(x), with the 0 log 0 = 0 convention."""
    x = np.asarray(x, dtype=float)
    if np.any((x < 0) | (x > 1)):
        raise ValueError("binary_entropy requires x in [0, 1]")
    return -xlogy(x, x) - xlogy(1.0 - x, 1.0 - x)


def min_energy_per_nat(params: ProtocolParams) -> float:
    """Reciprocal of the protocol's mean linearized rate per unit power."""
    tau, g0 = params.tau, params.g0
    return 1.0 / (tau + 1.0 - g0 * tau / (-math.expm1(-tau)))


def regime_threshold(params: ProtocolParams) -> float:
    """Energy budget above which the all-below corner dominates alone."""
    if params.g0 >= 1.0:
        return math.inf
    return 1.0 / ((1.0 - params.g0) * params.tau)


def _plateau(tau: float) -> float:
    # tau - log(e^tau - 1), the exponent of the all-below corner at g0 = 0
    return -math.log1p(-math.exp(-tau))


def _log_expm1(u: float) -> float:
    # log(e^u - 1) for u > 0 without overflow
    return u + math.log1p(-math.exp(-u))


def onoff_exponent(tau: float, eta: float) -> FeedbackPoint:
    """Closed-form exponent of the on-off protocol (g0 = 0)."""
    params = ProtocolParams(tau=tau, g0=0.0)
    eta_bar = 1.0 / (tau + 1.0)
    if eta < eta_bar - 1e-12:
        raise BelowMinimumEnergyError(eta, eta_bar)
    eta = max(eta, eta_bar)
    d = 1.0 / eta - tau
    if d < 1e-300:
        regime = "below_threshold" if d >= 0.0 else "above_threshold"
        x_star = 1.0 if d >= 0.0 else None
        return FeedbackPoint(eta, _plateau(tau), regime, x_star, tau, 0.0)
    # interior branch: the optimal below fraction trades the binomial cost
    # against the conditional gap of the surviving on-channels
    ratio = d * math.exp(-(tau + d - 1.0)) / (-math.expm1(-tau))
    omega = ratio / (1.0 + ratio)  # 1 - x_star, computed without cancellation
    x = 1.0 - omega
    entropy = float(-xlogy(x, x) - xlogy(omega, omega))
    value = (
        tau
        + omega * (d - 1.0 - math.log(d))
        - x * _log_expm1(tau)
        - entropy
    )
    return FeedbackPoint(eta, float(value), "below_threshold", float(x), tau, 0.0)


def onoff_envelope(eta: float) -> EnvelopePoint:
    """Upper envelope over thresholds of the on-off exponent at budget eta.

    The envelope touches each fixed-tau curve at its regime boundary, so the
    best threshold is tau = 1/eta with exponent tau - log(e^tau - 1) there.
    """
    if not (eta > 0.0 and math.isfinite(eta)):
        raise ValueError(f"eta must be positive, got {eta}")
    tau_opt = 1.0 / eta
    return EnvelopePoint(eta=eta, tau_opt=tau_opt, exponent=_plateau(tau_opt))


def _all_below_exponent(params: ProtocolParams, inv_eta: float) -> Tuple[float, float]:
    """E0: exponent of the corner where every channel reports below."""
    tau, g0 = params.tau, params.g0
    if g0 == 0.0:
        return _plateau(tau), 0.0

    def deriv(lam: float) -> float:
        v = (1.0 - g0 * lam) * tau
        emv = math.exp(-v)
        return inv_eta - g0 * (1.0 / (1.0 - g0 * lam) - tau * emv / (1.0 - emv))

    lam, _ = maximize_concave(deriv)
    v = (1.0 - g0 * lam) * tau
    value = lam * inv_eta + math.log(1.0 - g0 * lam) - math.log1p(-math.exp(-v))
    return float(value), float(lam)


def _gap_deriv(inv_eta: float, tau: float, g0: float, x, lam):
    """Derivative in lam of the conditional tilted gap at below fraction x."""
    u = (1.0 - g0 * lam / x) * tau
    emu = np.exp(-u)
    below = g0 * (1.0 / (1.0 - g0 * lam / x) - tau * emu / (1.0 - emu))
    above = (1.0 - g0) * (tau + 1.0 / (1.0 - (1.0 - g0) * lam / (1.0 - x)))
    return inv_eta - below - above


def _gap_value(inv_eta: float, tau: float, g0: float, x, lam):
    """Conditional tilted gap plus binomial cost at below fraction x."""
    u = (1.0 - g0 * lam / x) * tau
    log_expm1_u = u + np.log1p(-np.exp(-u))
    return (
        lam * inv_eta
        - x * log_expm1_u
        + x * np.log(x - g0 * lam)
        + (1.0 - x) * np.log(1.0 - x - (1.0 - g0) * lam)
        + (1.0 - lam) * tau
    )


def _sup_gap_grid(inv_eta: float, tau: float, g0: float, xs: np.ndarray):
    """sup over lam <= 0 of the conditional gap, vectorized over x.

    Entries whose derivative never changes sign before the bracket cap are
    reported as +inf: there the supremum diverges (the conditioned rate event
    is impossible), so they never win the outer infimum.
    """
    zeros = np.zeros_like(xs)
    d0 = _gap_deriv(inv_eta, tau, g0, xs, zeros)
    lam_star = zeros.copy()
    active = d0 < 0.0
    capped = np.zeros_like(xs, dtype=bool)
    if np.any(active):
        lo = np.where(active, -1.0, 0.0)
        hi = zeros.copy()
        expanding = active.copy()
        while np.any(expanding):
            d_lo = _gap_deriv(inv_eta, tau, g0, xs, lo)
            still = expanding & (d_lo <= 0.0)
            expanding &= still
            if not np.any(still):
                break
            at_cap = still & (-lo >= LAMBDA_CAP)
            capped |= at_cap
            expanding &= ~at_cap
            move = still & ~at_cap
            hi = np.where(move, lo, hi)
            lo = np.where(move, 2.0 * lo, lo)
        solve = active & ~capped
        for _ in range(130):
            mid = 0.5 * (lo + hi)
            pos = _gap_deriv(inv_eta, tau, g0, xs, mid) > 0.0
            lo = np.where(solve & pos, mid, lo)
            hi = np.where(solve & ~pos, mid, hi)
        lam_star = np.where(solve, 0.5 * (lo + hi), lam_star)
    values = _gap_value(inv_eta, tau, g0, xs, lam_star)
    values = np.where(capped, np.inf, values)
    return values, lam_star, capped


def _sup_gap_scalar(inv_eta: float, tau: float, g0: float, x: float) -> float:
    """Scalar fast path of _sup_gap_grid for the refinement stage."""

    def deriv(lam: float) -> float:
        u = (1.0 - g0 * lam / x) * tau
        emu = math.exp(-u)
        below = g0 * (1.0 / (1.0 - g0 * lam / x) - tau * emu / (1.0 - emu))
        above = (1.0 - g0) * (tau + 1.0 / (1.0 - (1.0 - g0) * lam / (1.0 - x)))
        return inv_eta - below - above

    if deriv(0.0) >= 0.0:
        lam = 0.0
    else:
        hi = 0.0
        lo = -1.0
        while deriv(lo) <= 0.0:
            hi = lo
            lo *= 2.0
            if -lo > LAMBDA_CAP:
                return math.inf
        while hi - lo > 1e-15 * max(1.0, -lo):
            mid = 0.5 * (lo + hi)
            if deriv(mid) > 0.0:
                lo = mid
            else:
                hi = mid
        lam = 0.5 * (lo + hi)
    u = (1.0 - g0 * lam / x) * tau
    return (
        lam * inv_eta
        - x * (u + math.log1p(-math.exp(-u)))
        + x * math.log(x - g0 * lam)
        + (1.0 - x) * math.log(1.0 - x - (1.0 - g0) * lam)
        + (1.0 - lam) * tau
    )


def _golden_min(f: Callable[[float], float], lo: float, hi: float, iters: int = 80):
    """Golden-section refinement returning the best evaluated point."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    best_x, best_f = (c, fc) if fc <= fd else (d, fd)
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
        if fc < best_f:
            best_x, best_f = c, fc
        if fd < best_f:
            best_x, best_f = d, fd
    return best_x, best_f


def general_exponent(
    params: ProtocolParams, eta: float, x_step: float = 1e-3
) -> FeedbackPoint:
    """Protocol outage exponent for arbitrary (tau, g0) by numeric search.

    The inner infimum over the below fraction x is located on a coarse grid
    of step x_step and refined by golden section inside the winning bracket.
    """
    tau, g0 = params.tau, params.g0
    eta_bar = min_energy_per_nat(params)
    if eta < eta_bar - 1e-12:
        raise BelowMinimumEnergyError(eta, eta_bar)
    eta = max(eta, eta_bar)
    inv_eta = 1.0 / eta
    e0, _ = _all_below_exponent(params, inv_eta)
    if eta > regime_threshold(params):
        return FeedbackPoint(eta, e0, "above_threshold", None, tau, g0)
    xs = np.arange(x_step, 1.0, x_step)
    values, _, _ = _sup_gap_grid(inv_eta, tau, g0, xs)
    i = int(np.argmin(values))
    x_best: Optional[float] = None
    v_best = math.inf
    if math.isfinite(values[i]):
        lo = xs[i - 1] if i > 0 else x_step * 1e-3
        hi = xs[i + 1] if i + 1 < xs.size else 1.0 - 1e-12
        x_best, v_best = _golden_min(
            lambda x: _sup_gap_scalar(inv_eta, tau, g0, x), lo, hi
        )
        if values[i] < v_best:
            x_best, v_best = float(xs[i]), float(values[i])
    if v_best < e0:
        return FeedbackPoint(eta, float(v_best), "below_threshold", float(x_best), tau, g0)
    return FeedbackPoint(eta, float(e0), "below_threshold", None, tau, g0)


@dataclass(frozen=True)
class ScanEntry:
    tau: float
    g0: float
    exponent: Optional[float]
    feasible: bool


@dataclass
class ConjectureScan:
    """Grid evidence for where the best (tau, g0) sits at a given eta."""

    eta: float
    entries: List[ScanEntry]
    best: Optional[ScanEntry]
    tau_expected: float
    supported: bool


def conjecture_scan(eta: float, tau_grid, g0_grid) -> ConjectureScan:
    """Scan protocol parameters at fixed eta and flag the conjectured argmax.

    The flag reports whether the grid maximum lands on g0 = 0 with tau at the
    grid point nearest 1/eta. Ties resolve to the lowest tau, then lowest g0.
    Grid points whose minimum energy exceeds eta are recorded as infeasible.
    """
    if not (eta > 0.0 and math.isfinite(eta)):
        raise ValueError(f"eta must be positive, got {eta}")
    taus = np.unique(np.asarray(tau_grid, dtype=float))
    g0s = np.unique(np.asarray(g0_grid, dtype=float))
    if taus.size == 0 or g0s.size == 0:
        raise ValueError("tau and g0 grids must be non-empty")
    entries: List[ScanEntry] = []
    best: Optional[ScanEntry] = None
    for tau in taus:
        for g0 in g0s:
            params = ProtocolParams(tau=float(tau), g0=float(g0))
            if eta < min_energy_per_nat(params) - 1e-12:
                entries.append(ScanEntry(float(tau), float(g0), None, False))
                continue
            point = general_exponent(params, eta)
            entry = ScanEntry(float(tau), float(g0), float(point.exponent), True)
            entries.append(entry)
            if best is None or entry.exponent > best.exponent:
                best = entry
    tau_expected = float(taus[int(np.argmin(np.abs(taus - 1.0 / eta)))])
    supported = (
        best is not None and best.g0 == 0.0 and best.tau == tau_expected
    )
    return ConjectureScan(
        eta=eta,
        entries=entries,
        best=best,
        tau_expected=tau_expected,
        supported=supported,
    )

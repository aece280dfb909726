"""Wideband outage exponents via one-dimensional concave maximization.

For a model with rate-derivative log-MGF L(lam), the outage exponent at
energy-per-nat budget eta is

    E(eta) = sup over lam <= 0 of [ lam/eta - L(lam) ],

the convex-conjugate value restricted to the nonpositive half-line. The
objective is strictly concave with derivative 1/eta - L'(lam), so the
maximizer is bracketed by doubling and then pinned down by bisection on the
derivative. E(eta) is zero exactly at eta equal to the minimum energy per
nat 1/E[J_dot] and strictly positive above it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from .errors import BelowMinimumEnergyError, NoClosedFormError
from .models import FadingModel, MimoWhite, Nakagami, Rayleigh, Rician

LAMBDA_CAP = 1e12


@dataclass(frozen=True)
class ExponentPoint:
    """One point of an outage-exponent curve."""

    eta: float
    exponent: float
    lambda_star: float
    capped: bool = False


@dataclass
class ExponentCurve:
    """Exponent evaluated on an eta grid; infeasible grid entries recorded."""

    eta_bar: float
    points: List[ExponentPoint]
    dropped: List[float] = field(default_factory=list)


def maximize_concave(
    deriv: Callable[[float], float],
    lambda_cap: float = LAMBDA_CAP,
) -> Tuple[float, bool]:
    """Locate argmax over lam <= 0 of a concave function from its derivative.

    deriv must be decreasing in lam. Returns (lam_star, capped); capped means
    the derivative never changed sign before the bracket reached lambda_cap
    and lam_star is the capped endpoint (the true supremum sits further out).
    """
    if deriv(0.0) >= 0.0:
        return 0.0, False
    hi = 0.0
    lo = -1.0
    while deriv(lo) <= 0.0:
        hi = lo
        lo *= 2.0
        if -lo > lambda_cap:
            return lo, True
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if deriv(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(1.0, -lo):
            break
    return 0.5 * (lo + hi), False


def min_energy_per_nat(model: FadingModel) -> float:
    """Minimum energy per nat: reciprocal of the mean rate derivative."""
    return 1.0 / model.mean_rate_derivative()


def exponent_numeric(model: FadingModel, eta: float) -> ExponentPoint:
    """Outage exponent by numeric maximization of the tilted gap."""
    eta_bar = min_energy_per_nat(model)
    if eta < eta_bar - 1e-12:
        raise BelowMinimumEnergyError(eta, eta_bar)
    if eta <= eta_bar:
        return ExponentPoint(eta=eta, exponent=0.0, lambda_star=0.0)
    inv_eta = 1.0 / eta
    lam, capped = maximize_concave(lambda l: inv_eta - float(model.log_mgf_deriv(l)))
    value = lam * inv_eta - float(model.log_mgf(lam))
    return ExponentPoint(eta=eta, exponent=value, lambda_star=lam, capped=capped)


def exponent_closed_form(model: FadingModel, eta: float) -> ExponentPoint:
    """Closed-form exponent for the families that admit one.

    Raises NoClosedFormError for models without a closed form (use the
    numeric engine in that case).
    """
    eta_bar = min_energy_per_nat(model)
    if eta < eta_bar - 1e-12:
        raise BelowMinimumEnergyError(eta, eta_bar)
    eta = max(eta, eta_bar)
    if isinstance(model, Rayleigh):
        return ExponentPoint(
            eta=eta,
            exponent=1.0 / eta - 1.0 + np.log(eta),
            lambda_star=1.0 - eta,
        )
    if isinstance(model, Nakagami):
        m = float(model.m)
        return ExponentPoint(
            eta=eta,
            exponent=m * (1.0 / eta - 1.0 + np.log(eta)),
            lambda_star=m * (1.0 - eta),
        )
    if isinstance(model, MimoWhite):
        nt, nr = model.n_t, model.n_r
        return ExponentPoint(
            eta=eta,
            exponent=nt * nr * (1.0 / (nr * eta) - 1.0 + np.log(nr * eta)),
            lambda_star=nt * (1.0 - nr * eta),
        )
    if isinstance(model, Rician):
        return _rician_closed_form(float(model.kappa), eta)
    raise NoClosedFormError(
        f"no closed-form exponent for {model.kind}; use exponent_numeric"
    )


def _rician_closed_form(kappa: float, eta: float) -> ExponentPoint:
    k2 = kappa**2
    b = 1.0 - k2
    root = np.sqrt(1.0 + 4.0 * k2 / (b**2 * eta))
    value = (
        1.0 / (b * eta)
        + k2 / b
        - root
        + np.log(b * eta / 2.0)
        + np.log1p(root)
    )
    # stationary point of lam/eta - log_mgf(lam): with u = 1/(1 - b*lam),
    # k2*u^2 + b*u = 1/eta, whose positive root is written in cancellation-free
    # form below (valid down to kappa = 0).
    u = 2.0 / (eta * (b + np.sqrt(b**2 + 4.0 * k2 / eta)))
    lam = (1.0 - 1.0 / u) / b
    return ExponentPoint(eta=eta, exponent=float(value), lambda_star=float(lam))


def exponent_curve(
    model: FadingModel,
    eta_grid,
    closed_form: bool = False,
) -> ExponentCurve:
    """Evaluate the exponent over an increasing eta grid.

    Grid entries below the minimum energy per nat are dropped and recorded in
    the returned curve rather than raising.
    """
    grid = np.asarray(eta_grid, dtype=float)
    if grid.size == 0:
        raise ValueError("eta grid must be non-empty")
    if grid.size > 1 and not np.all(np.diff(grid) > 0):
        raise ValueError("eta grid must be strictly increasing")
    eta_bar = min_energy_per_nat(model)
    evaluate = exponent_closed_form if closed_form else exponent_numeric
    points: List[ExponentPoint] = []
    dropped: List[float] = []
    for eta in grid:
        if eta < eta_bar - 1e-12:
            dropped.append(float(eta))
        else:
            points.append(evaluate(model, float(eta)))
    return ExponentCurve(eta_bar=eta_bar, points=points, dropped=dropped)


def eta_to_db(eta) -> np.ndarray:
    """Energy per nat expressed in decibels."""
    return 10.0 * np.log10(np.asarray(eta, dtype=float))


PER_BIT_DB_SHIFT = float(10.0 * np.log10(np.log(2.0)))
"""dB offset from cost per nat to cost per bit (log 2 in dB, about -1.59)."""

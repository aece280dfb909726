"""Exception types shared across the toolkit."""


class OutagekitError(ValueError):
    """Base class for domain errors raised by this package."""


class BelowMinimumEnergyError(OutagekitError):
    """Requested energy per nat is below the minimum for reliable communication."""

    def __init__(self, eta: float, eta_bar: float):
        self.eta = eta
        self.eta_bar = eta_bar
        super().__init__(
            f"eta={eta:.6g} is below minimum energy per nat {eta_bar:.6g}: "
            "exponent undefined (outage probability tends to 1)"
        )


class MgfDomainError(OutagekitError):
    """Log-MGF evaluated outside its finite domain."""


class TiltingUnavailableError(OutagekitError):
    """Exponential tilting is not implemented for this model family."""

    def __init__(self, model_name: str):
        super().__init__(
            f"tilting not available for {model_name}; use plain sampling"
        )


class NoClosedFormError(OutagekitError):
    """No closed-form exponent exists for this model; use the numeric engine."""


class InfeasibleShapingError(OutagekitError):
    """No input covariance attains the requested energy budget."""


class InsufficientDataError(OutagekitError):
    """Too few valid outage estimates to fit an exponent."""

    def __init__(self, n_valid: int, n_needed: int = 4):
        super().__init__(
            f"only {n_valid} valid outage estimates (need >= {n_needed}); "
            "increase trials or switch to the tilted sampler"
        )


class DescriptorError(OutagekitError):
    """Malformed model or config descriptor."""

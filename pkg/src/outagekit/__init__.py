"""Numerical toolkit for wideband outage exponents of parallel fading channels."""

__version__ = "0.1.0"

from .errors import (
    BelowMinimumEnergyError,
    DescriptorError,
    InfeasibleShapingError,
    InsufficientDataError,
    MgfDomainError,
    NoClosedFormError,
    OutagekitError,
    TiltingUnavailableError,
)
from .exponent import (
    ExponentCurve,
    ExponentPoint,
    eta_to_db,
    exponent_closed_form,
    exponent_curve,
    exponent_numeric,
    min_energy_per_nat,
)
from .feedback import (
    ConjectureScan,
    EnvelopePoint,
    FeedbackPoint,
    ProtocolParams,
    binary_entropy,
    conjecture_scan,
    general_exponent,
    onoff_envelope,
    onoff_exponent,
)
from .mimo import ShapingResult, receive_partial_trace, shape_covariance, white_log_mgf_det
from .models import (
    FadingModel,
    MimoCorrelated,
    MimoWhite,
    Nakagami,
    Rayleigh,
    Rician,
    model_from_descriptor,
)
from .montecarlo import (
    FitResult,
    OutageEstimate,
    RateStats,
    estimate_outage,
    estimate_protocol_outage,
    fit_exponent,
    linearized_outage_oracle,
    model_rate_stats,
    protocol_outage_oracle,
    protocol_rate_stats,
)

__all__ = [
    "__version__",
    "BelowMinimumEnergyError",
    "DescriptorError",
    "InfeasibleShapingError",
    "InsufficientDataError",
    "MgfDomainError",
    "NoClosedFormError",
    "OutagekitError",
    "TiltingUnavailableError",
    "ExponentCurve",
    "ExponentPoint",
    "eta_to_db",
    "exponent_closed_form",
    "exponent_curve",
    "exponent_numeric",
    "min_energy_per_nat",
    "ConjectureScan",
    "EnvelopePoint",
    "FeedbackPoint",
    "ProtocolParams",
    "binary_entropy",
    "conjecture_scan",
    "general_exponent",
    "onoff_envelope",
    "onoff_exponent",
    "ShapingResult",
    "receive_partial_trace",
    "shape_covariance",
    "white_log_mgf_det",
    "FadingModel",
    "MimoCorrelated",
    "MimoWhite",
    "Nakagami",
    "Rayleigh",
    "Rician",
    "model_from_descriptor",
    "FitResult",
    "OutageEstimate",
    "RateStats",
    "estimate_outage",
    "estimate_protocol_outage",
    "fit_exponent",
    "linearized_outage_oracle",
    "model_rate_stats",
    "protocol_outage_oracle",
    "protocol_rate_stats",
]

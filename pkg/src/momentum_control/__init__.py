"""Price-impact market with momentum traders, speculators and a stabilizing controller."""

from .control import (
    FeedbackGain,
    QuickResponse,
    SystemMatrices,
    UncontrollableError,
    char_poly_coeffs,
    controllability_det,
    controllability_matrix,
    is_controllable,
    pole_place,
    quick_response_control,
    stabilize_simulation,
    system_matrices,
)
from .dynamics import (
    NULL_CONTROL,
    MarketParams,
    NullControl,
    PeriodRecord,
    PricingRule,
    StateVector,
    Trajectory,
    impact_price,
    momentum_order,
    simulate,
    speculator_payoff,
    update_quote,
)
from .lineardiff import (
    RecurrenceParams,
    RootKind,
    RootSpec,
    characteristic_roots,
    closed_form_q,
    monotone_price_check,
    recurrence_q,
)
from .viability import RegionLabel, ViabilityValues, classify, in_maximal_set, region_grid, viability_values

__version__ = "0.1.0"

__all__ = [
    "FeedbackGain",
    "MarketParams",
    "NULL_CONTROL",
    "NullControl",
    "PeriodRecord",
    "PricingRule",
    "QuickResponse",
    "RecurrenceParams",
    "RegionLabel",
    "RootKind",
    "RootSpec",
    "StateVector",
    "SystemMatrices",
    "Trajectory",
    "UncontrollableError",
    "ViabilityValues",
    "char_poly_coeffs",
    "characteristic_roots",
    "classify",
    "closed_form_q",
    "controllability_det",
    "controllability_matrix",
    "impact_price",
    "in_maximal_set",
    "is_controllable",
    "momentum_order",
    "monotone_price_check",
    "pole_place",
    "quick_response_control",
    "recurrence_q",
    "region_grid",
    "simulate",
    "speculator_payoff",
    "stabilize_simulation",
    "system_matrices",
    "update_quote",
    "viability_values",
]

"""Coefficient fields, exponent bookkeeping, localized norms and mollifiers."""
from slflab.fields.coefficients import (
    BUILTIN_FIELDS,
    CoefficientField,
    constant_field,
    counterexample_field,
    field_from_config,
    ou_field,
    probe_divergence,
    probe_ellipticity,
    restrict_away_from_hyperplane,
    rotation_field,
)
from slflab.fields.counterexample_drift import CounterexampleParams, counterexample_drift
from slflab.fields.lps import LpsExponents, make_lps
from slflab.fields.mollify import mollify, mollify_array, mollify_function
from slflab.fields.norms import localized_norm
from slflab.fields.profiles import (
    CutoffProfile,
    MollifierSpec,
    g_profile,
    g_profile_deriv,
    smooth_step,
    smooth_step_deriv,
)

__all__ = [
    "BUILTIN_FIELDS", "CoefficientField", "CounterexampleParams", "CutoffProfile",
    "LpsExponents", "MollifierSpec", "constant_field", "counterexample_drift",
    "counterexample_field", "field_from_config", "g_profile", "g_profile_deriv",
    "localized_norm", "make_lps", "mollify", "mollify_array", "mollify_function",
    "ou_field", "probe_divergence", "probe_ellipticity", "restrict_away_from_hyperplane",
    "rotation_field", "smooth_step", "smooth_step_deriv",
]

"""Weak non-uniqueness experiment: cone geometry, skeleton ODE, path functionals, splitting statistics."""
from slflab.counterexample.experiment import (Calibration, SplitStatistics, calibrate_N,
                                              default_starts, pilot_noise, run_split_experiment,
                                              starts_in_cone, weighted_slope)
from slflab.counterexample.functionals import (SplitTracker, detect_stopping_times, f_odd,
                                               omega_N_check, path_functional_F)
from slflab.counterexample.skeleton import (SkeletonSolution, closed_form_height, cone_membership,
                                            growth_factor, sigma_hit_time, skeleton_bracket,
                                            skeleton_solve)
from slflab.fields.counterexample_drift import CounterexampleParams

__all__ = [
    "Calibration", "CounterexampleParams", "SkeletonSolution", "SplitStatistics", "SplitTracker",
    "calibrate_N", "closed_form_height", "cone_membership", "default_starts",
    "detect_stopping_times", "f_odd", "growth_factor", "omega_N_check", "path_functional_F",
    "pilot_noise", "run_split_experiment", "sigma_hit_time", "skeleton_bracket", "skeleton_solve",
    "starts_in_cone", "weighted_slope",
]

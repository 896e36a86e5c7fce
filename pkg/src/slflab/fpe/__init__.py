"""Finite-volume solver for the Fokker-Planck and Kolmogorov equations with level-set diagnostics."""
from slflab.fpe.diagnostics import (DeGiorgiReport, DecayTrace, LevelSetEnergy, StabilityReport,
                                    degiorgi_sequence, energy_report, fast_decay_check,
                                    stability_compare)
from slflab.fpe.solver import (FpeOperator, FpeSolution, GridFunction, gaussian_density,
                               solve_fpe)
from slflab.fpe.io import read_binary, write_binary, write_csv

__all__ = [
    "DeGiorgiReport", "DecayTrace", "FpeOperator", "FpeSolution", "GridFunction",
    "LevelSetEnergy", "StabilityReport", "degiorgi_sequence", "energy_report",
    "fast_decay_check", "gaussian_density", "read_binary", "solve_fpe", "stability_compare",
    "write_binary", "write_csv",
]

"""Particle Monte Carlo for the SDE with counter-based noise."""
from slflab.particles.density import DensityEstimate, density_histogram, histogram_noise_floor
from slflab.particles.diagnostics import (CouplingDiagnostics, KrylovFit, MaximalFieldData,
                                          Phi_eps, SuperpositionReport, coupling_diagnostic,
                                          krylov_scaling, maximal_field, phi_eps,
                                          restricted_maximal, superposition_check)
from slflab.particles.ensemble import ParticleEnsemble, PathRecord
from slflab.particles.evolve import Observer, StepOptions, evolve

__all__ = [
    "CouplingDiagnostics", "DensityEstimate", "KrylovFit", "MaximalFieldData", "Observer",
    "ParticleEnsemble", "PathRecord", "Phi_eps", "StepOptions", "SuperpositionReport",
    "coupling_diagnostic", "density_histogram", "evolve", "histogram_noise_floor",
    "krylov_scaling", "maximal_field", "phi_eps", "restricted_maximal", "superposition_check",
]

"""Numerical tolerances used across the package, kept in one place."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    hermitian: float = 1e-12
    state_norm: float = 1e-10
    density_hermitian: float = 1e-10
    density_trace: float = 1e-8
    density_positivity: float = 1e-8
    real_expectation: float = 1e-10
    # relative to omega_a
    ground_gap: float = 1e-6
    dressed_degeneracy: float = 1e-9
    track_overlap: float = 0.999
    norm_drift_per_period: float = 1e-8
    cutoff_leak: float = 1e-8
    fourier_conjugate: float = 1e-10
    fourier_reconstruction: float = 1e-8
    floquet_residual: float = 1e-8
    cutoff_convergence: float = 1e-3
    dense_dimension_limit: int = 4096
    dense_eigensolver_limit: int = 512


TOL = Tolerances()

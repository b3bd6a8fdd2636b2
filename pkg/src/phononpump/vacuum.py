"""Adiabatic vacuum of the cavity-matter system and its radiation pressure.

The cavity-matter ground state is tracked over one drive period. The
radiation pressure ``N(t) = <psi_0(t)| 2 a^dag a + a^2 + a^dag^2 |psi_0(t)>``
drives the mirror; its Fourier coefficients follow the convention
``N(t) = sum_k N_k exp(i k omega_d t)``.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.sparse.linalg import eigsh

from .errors import ConvergenceError, DegenerateGroundStateError, InvalidArgumentError
from .hilbert import PureState
from .models import SystemParams, UscOperators, usc_operators
from .tolerances import TOL

log = logging.getLogger(__name__)


def _frequency_scale(p: SystemParams) -> float:
    return p.omega_a if p.omega_a > 0 else max(p.omega_sigma, 1.0)


def _lowest_pair(h: np.ndarray):
    n = h.shape[0]
    if n <= TOL.dense_eigensolver_limit:
        energies, vectors = np.linalg.eigh(h)
        return energies[:2], vectors[:, 0]
    energies, vectors = eigsh(h, k=2, which="SA")
    order = np.argsort(energies)
    return energies[order], vectors[:, order[0]]


def ground_state_at(p: SystemParams, t: float, ops: UscOperators | None = None,
                    gap_tolerance: float | None = None):
    """Ground state, ground energy and first gap of ``H_R + H_M(t)``.

    Raises
    ------
    DegenerateGroundStateError
        If the gap is below ``gap_tolerance`` (default ``1e-6 * omega_a``).
    """
    ops = ops or usc_operators(p)
    if gap_tolerance is None:
        gap_tolerance = TOL.ground_gap * _frequency_scale(p)
    h = ops.hamiltonian(p, t).dense()
    energies, vec = _lowest_pair(h)
    gap = float(energies[1] - energies[0])
    if gap < gap_tolerance:
        raise DegenerateGroundStateError(
            f"ground-state gap {gap:.3e} below tolerance {gap_tolerance:.3e} at t={t}")
    return PureState.normalized(ops.layout, vec), float(energies[0]), gap


def radiation_pressure(p: SystemParams, t: float, ops: UscOperators | None = None) -> float:
    ops = ops or usc_operators(p)
    state, _, _ = ground_state_at(p, t, ops)
    psi = state.amplitudes
    value = np.vdot(psi, ops.pressure.matrix @ psi)
    if abs(value.imag) > TOL.real_expectation:
        raise ConvergenceError(f"radiation pressure has imaginary part {value.imag:.2e}")
    return float(value.real)


@dataclass(frozen=True)
class GroundStateTrack:
    """Instantaneous ground states sampled over one drive period."""

    omega_d: float
    times: np.ndarray
    states: tuple
    energies: np.ndarray
    gaps: np.ndarray
    pressure: np.ndarray


def track_ground_state(p: SystemParams, M: int = 256, workers: int | None = None
                       ) -> GroundStateTrack:
    """Sample the ground state at ``M`` uniform times over one drive period.

    The phases of consecutive samples are fixed so their overlap is real and
    positive; a continuity check guards against sampling that is too coarse.
    """
    if M < 2:
        raise InvalidArgumentError("M must be >= 2")
    ops = usc_operators(p)
    period = p.drive_period
    times = period * np.arange(M) / M

    def sample(t):
        return ground_state_at(p, float(t), ops)

    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(sample, times))
    else:
        results = [sample(t) for t in times]

    vectors = [r[0].amplitudes.copy() for r in results]
    for i in range(1, M):
        overlap = np.vdot(vectors[i - 1], vectors[i])
        if abs(overlap) < TOL.track_overlap:
            raise ConvergenceError(
                f"ground-state track discontinuous between samples {i - 1} and {i} "
                f"(|overlap| = {abs(overlap):.6f}); increase M")
        vectors[i] *= np.conj(overlap) / abs(overlap)
    states = tuple(PureState.normalized(ops.layout, v) for v in vectors)
    pmat = ops.pressure.matrix
    pressure = np.array([np.vdot(v, pmat @ v).real for v in vectors])
    return GroundStateTrack(
        omega_d=p.omega_d, times=times, states=states,
        energies=np.array([r[1] for r in results]),
        gaps=np.array([r[2] for r in results]), pressure=pressure)


@dataclass(frozen=True)
class FourierSpectrum:
    """Coefficients ``N_k`` for ``k = -K..K`` stored at index ``k + K``."""

    omega_d: float
    coefficients: np.ndarray
    reconstruction_error: float = 0.0

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=complex).ravel()
        if c.size % 2 != 1:
            raise InvalidArgumentError("coefficient array must have odd length 2K+1")
        asym = np.max(np.abs(c - c[::-1].conj())) if c.size else 0.0
        if asym > TOL.fourier_conjugate * max(1.0, np.max(np.abs(c))):
            raise InvalidArgumentError(
                f"coefficients violate N_-k = conj(N_k) by {asym:.2e}")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @classmethod
    def from_harmonics(cls, omega_d: float, harmonics: dict) -> "FourierSpectrum":
        """Build a real-signal spectrum from ``{k: N_k}`` for ``k >= 0``."""
        K = max(harmonics) if harmonics else 0
        c = np.zeros(2 * K + 1, dtype=complex)
        for k, value in harmonics.items():
            c[K + k] = value
            c[K - k] = np.conj(value)
        if 0 in harmonics:
            c[K] = complex(harmonics[0]).real
        return cls(omega_d, c)

    @property
    def K(self) -> int:
        return (self.coefficients.size - 1) // 2

    @property
    def ks(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)

    def coefficient(self, k: int) -> complex:
        if abs(k) > self.K:
            return 0j
        return complex(self.coefficients[k + self.K])

    def evaluate(self, t) -> np.ndarray:
        """Reconstructed ``N(t)`` (real) at times ``t``."""
        t = np.asarray(t, dtype=float)
        phase = np.exp(1j * self.omega_d * np.multiply.outer(t, self.ks))
        return (phase @ self.coefficients).real

    def with_omega_d(self, omega_d: float) -> "FourierSpectrum":
        """Same coefficients at another drive frequency.

        In the adiabatic regime ``N(t)`` depends on time only through the
        phase ``omega_d t``, so the coefficients do not depend on ``omega_d``.
        """
        return replace(self, omega_d=float(omega_d))

    def scaled(self, factor: float) -> "FourierSpectrum":
        return replace(self, omega_d=self.omega_d * factor)


def _check_uniform(times: np.ndarray, omega_d: float):
    M = times.size
    period = 2 * math.pi / omega_d
    dt = period / M
    expected = times[0] + dt * np.arange(M)
    if np.max(np.abs(times - expected)) > 1e-9 * period:
        raise InvalidArgumentError(
            "time grid must be uniform and span exactly one drive period (endpoint excluded)")


def fourier_components(track: GroundStateTrack, K: int = 8) -> FourierSpectrum:
    """Discrete Fourier quadrature of the tracked radiation pressure."""
    times = np.asarray(track.times, dtype=float)
    M = times.size
    if K < 0:
        raise InvalidArgumentError("K must be >= 0")
    if M < 4 * K + 1:
        raise InvalidArgumentError(f"need M >= 4K+1 samples, got M={M} for K={K}")
    _check_uniform(times, track.omega_d)
    values = np.asarray(track.pressure, dtype=float)
    ks = np.arange(-K, K + 1)
    phase = np.exp(-1j * track.omega_d * np.multiply.outer(ks, times))
    coeffs = phase @ values / M
    coeffs = 0.5 * (coeffs + coeffs[::-1].conj())
    spectrum = FourierSpectrum(track.omega_d, coeffs)
    scale = max(np.max(np.abs(values)), np.finfo(float).tiny)
    err = float(np.max(np.abs(spectrum.evaluate(times) - values)) / scale)
    if np.max(np.abs(values)) == 0:
        err = 0.0
    if err > TOL.fourier_reconstruction:
        log.warning("Fourier reconstruction error %.2e exceeds %.0e; increase K",
                    err, TOL.fourier_reconstruction)
    return replace(spectrum, reconstruction_error=err)


def pressure_spectrum(p: SystemParams, K: int = 8, M: int = 256, tol: float = 1e-8,
                      max_M: int = 4096, workers: int | None = None) -> FourierSpectrum:
    """Radiation-pressure spectrum, doubling ``M`` until ``N_k`` settle to ``tol``."""
    spectrum = fourier_components(track_ground_state(p, M, workers), K)
    while True:
        if 2 * M > max_M:
            return spectrum
        M *= 2
        finer = fourier_components(track_ground_state(p, M, workers), K)
        delta = np.max(np.abs(finer.coefficients - spectrum.coefficients))
        spectrum = finer
        if delta < tol:
            return spectrum

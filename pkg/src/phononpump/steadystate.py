"""Periodic steady states of the driven, damped mirror.

Three routes, from cheapest to most complete:

* :func:`analytic_steady_state` keeps the single resonant harmonic of the
  radiation pressure (rotating-wave approximation).
* :func:`moment_limit_cycle` solves the moment equations exactly by harmonic
  balance, keeping every harmonic.
* :func:`floquet_fixed_point` finds the fixed point of the one-period map of
  the phonon master equation.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigs

from . import _kernels
from .dynamics import (bath_rates, check_leak, default_steps_per_period, drive_nodes,
                       frame_rotation, phonon_moments)
from .errors import (ConvergenceError, CutoffLeakError, DivergenceError,
                     InvalidArgumentError, PhononPumpError)
from .hilbert import thermal_state
from .models import DissipationParams, SystemParams
from .tolerances import TOL
from .vacuum import FourierSpectrum, pressure_spectrum

log = logging.getLogger(__name__)

SWEEP_AXES = ("drive_frequency", "detuning", "n_th", "gamma_b", "xi", "lambda")


class ResonanceTieWarning(UserWarning):
    """``omega_b / omega_d`` sits halfway between two integers."""


class OffResonanceWarning(UserWarning):
    """The resonant-harmonic approximation is used far from resonance."""


@dataclass(frozen=True)
class SteadyStateResult:
    """Stroboscopic (``t = 0 mod T``) phonon moments of the periodic state."""

    b_ss: complex
    n_ss: float
    method: str
    k_bar: int
    detuning: float
    residual: float = 0.0
    extras: dict = field(default_factory=dict, compare=False)


def select_k_bar(omega_b: float, omega_d: float) -> int:
    """Nearest harmonic to the mirror frequency; ties go to the lower one."""
    if omega_d <= 0:
        raise InvalidArgumentError("omega_d must be > 0")
    ratio = omega_b / omega_d
    lower = math.floor(ratio)
    frac = ratio - lower
    if abs(frac - 0.5) < 1e-12:
        warnings.warn(f"omega_b/omega_d = {ratio} is a half-integer tie; using k={lower}",
                      ResonanceTieWarning, stacklevel=2)
        return int(lower)
    return int(lower + (frac > 0.5))


def analytic_steady_state(spectrum: FourierSpectrum, p: SystemParams,
                          d: DissipationParams, k_bar: int | None = None
                          ) -> SteadyStateResult:
    """Resonant-harmonic steady state.

    ``b_ss = g conj(N_kbar) / (2 Delta + i Gamma)`` and
    ``n_ss = (Gamma / gamma_b) |b_ss|^2 + n_th`` with ``Gamma = gamma_b + gamma_D``
    and ``Delta = kbar omega_d - omega_b``. ``p.omega_d`` is authoritative;
    the spectrum's coefficients do not depend on it.
    """
    if d.gamma_b <= 0:
        raise DivergenceError("gamma_b = 0: the phonon number grows without bound")
    if k_bar is None:
        k_bar = select_k_bar(p.omega_b, p.omega_d)
    detuning = k_bar * p.omega_d - p.omega_b
    if abs(detuning) > 0.1 * p.omega_b:
        warnings.warn(f"|detuning| = {abs(detuning):.3g} exceeds omega_b/10; the "
                      "single-harmonic result is unreliable here", OffResonanceWarning,
                      stacklevel=2)
    gamma = d.gamma_b + d.gamma_D
    b = p.g * np.conj(spectrum.coefficient(k_bar)) / (2.0 * detuning + 1j * gamma)
    n = gamma / d.gamma_b * abs(b) ** 2 + d.n_th
    return SteadyStateResult(complex(b), float(n), "analytic", int(k_bar), float(detuning))


def moment_limit_cycle(p: SystemParams, spectrum: FourierSpectrum, d: DissipationParams,
                       samples: int = 64) -> SteadyStateResult:
    """Exact periodic solution of the moment equations (no rotating-wave step).

    ``extras`` holds the harmonics of ``<b>`` and ``<n>`` and the
    period-averaged phonon number ``n_avg``.
    """
    if d.gamma_b <= 0:
        raise DivergenceError("gamma_b = 0: the phonon number grows without bound")
    K = spectrum.K
    wd = p.omega_d
    ks = np.arange(-K, K + 1)
    Nk = spectrum.coefficients
    gamma = d.gamma_b + d.gamma_D
    B = -0.5j * p.g * Nk / (0.5 * gamma + 1j * (ks * wd + p.omega_b))
    im_b = (B - np.conj(B[::-1])) / 2j
    S = -p.g * np.convolve(Nk, im_b)            # harmonics -2K..2K
    ks2 = np.arange(-2 * K, 2 * K + 1)
    n_k = S / (d.gamma_b + 1j * ks2 * wd)
    n_k[2 * K] += d.n_th
    b_ss = complex(B.sum())
    n_ss = float(n_k.sum().real)

    # residual of the moment equations on a sample grid, relative to the drive
    t = p.drive_period * np.arange(samples) / samples
    eb = np.exp(1j * wd * np.multiply.outer(t, ks))
    en = np.exp(1j * wd * np.multiply.outer(t, ks2))
    b_t, db_t = eb @ B, eb @ (1j * ks * wd * B)
    n_t, dn_t = (en @ n_k).real, (en @ (1j * ks2 * wd * n_k)).real
    N_t = spectrum.with_omega_d(wd).evaluate(t)
    rb = db_t - (-1j * p.omega_b * b_t - 0.5j * p.g * N_t - 0.5 * gamma * b_t)
    rn = dn_t - (-p.g * N_t * b_t.imag - d.gamma_b * (n_t - d.n_th))
    scale = max(abs(p.g) * np.max(np.abs(N_t)), np.finfo(float).tiny)
    residual = float(max(np.max(np.abs(rb)), np.max(np.abs(rn))) / scale)
    k_bar = select_k_bar(p.omega_b, wd)
    return SteadyStateResult(b_ss, n_ss, "moments", k_bar, k_bar * wd - p.omega_b,
                             residual, {"b_harmonics": B, "n_harmonics": n_k,
                                        "n_avg": float(n_k[2 * K].real)})


class FloquetMap:
    """One-period map of the phonon master equation in the lab frame."""

    def __init__(self, p: SystemParams, spectrum: FourierSpectrum, d: DissipationParams,
                 cutoff: int, steps_per_period: int | None = None):
        if p.omega_d <= 0:
            raise InvalidArgumentError("omega_d must be > 0")
        self.n = int(cutoff)
        spectrum = spectrum.with_omega_d(p.omega_d)
        self.steps = steps_per_period or default_steps_per_period(p, spectrum)
        self.dt = p.drive_period / self.steps
        self.nodes = drive_nodes(p, spectrum, 0.0, self.dt, self.steps)
        self.rates = bath_rates(d)
        self.rotation = frame_rotation(self.n, p.omega_b, p.drive_period)
        self.calls = 0

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        self.calls += 1
        out = _kernels.lindblad_rk4(rho, self.nodes, self.dt, *self.rates)
        return out * self.rotation

    def as_linear_operator(self) -> LinearOperator:
        n = self.n

        def matvec(v):
            return self(np.reshape(v, (n, n))).ravel()

        return LinearOperator((n * n, n * n), matvec=matvec, dtype=complex)


def _trace_norm(m: np.ndarray) -> float:
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def averaged_liouvillian(p: SystemParams, spectrum: FourierSpectrum, d: DissipationParams,
                         cutoff: int, k_bar: int) -> sp.csr_matrix:
    """Period-averaged generator in the frame rotating at ``kbar omega_d``.

    Acts on row-major ``vec(rho)``. Over one period the stroboscopic map is
    close to ``exp(T L_avg)`` when the off-resonant harmonics are weak.
    """
    n = int(cutoff)
    b = sp.diags(np.sqrt(np.arange(1, n)), 1, format="csr", dtype=complex)
    bd = b.T.conj().tocsr()
    num = sp.diags(np.arange(n, dtype=complex), format="csr")
    eye = sp.identity(n, dtype=complex, format="csr")
    nk = spectrum.coefficient(k_bar)
    detuning = k_bar * p.omega_d - p.omega_b
    h = -detuning * num + 0.5 * p.g * (nk * b + np.conj(nk) * bd)
    lv = -1j * (sp.kron(h, eye) - sp.kron(eye, h.T))
    g_down, g_up, g_deph = bath_rates(d)
    for rate, c in ((g_down, b), (g_up, bd), (g_deph, num)):
        if rate:
            cdc = (c.T.conj() @ c).tocsr()
            lv = lv + rate * (sp.kron(c, c.conj()) - 0.5 * sp.kron(cdc, eye)
                              - 0.5 * sp.kron(eye, cdc.T))
    return lv.tocsc()


def _bordered(n: int) -> sp.csc_matrix:
    """``vec(x) -> vec(|0><0|) Tr(x)``: pins the trace of the fixed point."""
    cols = np.arange(n) * (n + 1)
    return sp.csc_matrix((np.ones(n, dtype=complex), (np.zeros(n, dtype=int), cols)),
                         shape=(n * n, n * n))


def _gap_estimate(lu, dim: int, k: int = 16) -> complex:
    """Slowest transient of the period map, from the averaged generator."""
    try:
        op = LinearOperator((dim, dim), matvec=lu.solve, dtype=complex)
        mu = eigs(op, k=min(k, dim - 2), which="LM", return_eigenvectors=False, tol=1e-10)
    except (ArpackNoConvergence, ValueError):
        return complex("nan")
    # the border pushes the stationary mode away; the rest are T * (generator rates)
    rates = 1.0 / mu
    rates = rates[np.abs(rates) < 1.0]
    if not rates.size:
        return complex("nan")
    return complex(np.exp(rates[np.argmax(rates.real)]))


def _solve_gmres(fmap: FloquetMap, p, spectrum, d, k_bar, tol, maxiter):
    n = fmap.n
    dim = n * n
    border = _bordered(n)
    t_period = p.drive_period
    precond = (t_period * averaged_liouvillian(p, spectrum, d, n, k_bar) + border).tocsc()
    lu = spla.splu(precond)
    rhs = np.zeros(dim, dtype=complex)
    rhs[0] = 1.0

    def matvec(v):
        x = np.reshape(v, (n, n))
        return (fmap(x) - x).ravel() + border @ v

    op = LinearOperator((dim, dim), matvec=matvec, dtype=complex)
    minv = LinearOperator((dim, dim), matvec=lu.solve, dtype=complex)
    x0 = lu.solve(rhs)
    x, info = spla.gmres(op, rhs, x0=x0, rtol=tol, atol=0.0, restart=40,
                         maxiter=maxiter or 20, M=minv)
    gap = _gap_estimate(lu, dim)
    if info != 0:
        raise ConvergenceError(
            f"GMRES did not converge after {fmap.calls} map applications; "
            f"estimated second eigenvalue of the period map {gap:.6g}")
    return np.reshape(x, (n, n)), {"second_eigenvalue": gap}


def _solve_arnoldi(fmap: FloquetMap, d, tol, n_eigs, maxiter):
    n = fmap.n
    dim = n * n
    start = thermal_state(n, d.n_th).matrix.ravel().astype(complex)
    k = max(1, min(n_eigs, dim - 2))
    try:
        vals, vecs = eigs(fmap.as_linear_operator(), k=k, which="LM", v0=start, tol=tol,
                          ncv=min(dim, max(2 * k + 1, 20)), maxiter=maxiter)
    except ArpackNoConvergence as exc:
        found = np.sort(np.abs(exc.eigenvalues))[::-1]
        gap = found[1] if found.size > 1 else float("nan")
        raise ConvergenceError(
            f"Arnoldi did not converge after {fmap.calls} map applications; "
            f"second eigenvalue magnitude so far {gap:.6g}") from exc
    order = np.argsort(-np.abs(vals))
    vals, vecs = vals[order], vecs[:, order]
    lead = int(np.argmin(np.abs(vals - 1.0)))
    if abs(vals[lead] - 1.0) > 1e-6:
        raise ConvergenceError(f"no unit eigenvalue found; leading eigenvalues {vals}")
    others = np.delete(vals, lead)
    return vecs[:, lead].reshape(n, n), {
        "eigenvalues": vals, "unit_eigenvalue": complex(vals[lead]),
        "second_eigenvalue": complex(others[0]) if others.size else 0j}


def floquet_fixed_point(p: SystemParams, spectrum: FourierSpectrum, d: DissipationParams,
                        cutoff: int | None = None, steps_per_period: int | None = None,
                        method: str = "gmres", tol: float = 1e-12, n_eigs: int = 3,
                        maxiter: int | None = None) -> SteadyStateResult:
    """Periodic steady state as the fixed point of the one-period map.

    The map is applied matrix-free: one application propagates a density
    matrix through a drive period.

    ``method="gmres"`` (default) solves ``Phi(rho) - rho + |0><0| Tr(rho) = |0><0|``
    with GMRES, preconditioned by the period-averaged generator. This stays
    cheap when many map eigenvalues crowd the unit circle (weak damping, off
    resonance). ``method="arnoldi"`` finds the unit-eigenvalue eigenvector of
    the map with ARPACK and also reports its leading eigenvalues.

    ``extras["second_eigenvalue"]`` is the slowest transient of the map
    (estimated from the averaged generator for ``gmres``).

    Raises
    ------
    ConvergenceError
        If the iteration does not converge or the residual exceeds tolerance.
    CutoffLeakError
        If the top Fock level of the fixed point is populated above tolerance.
    """
    cutoff = int(cutoff or p.phonon_cutoff)
    if cutoff < 2:
        raise InvalidArgumentError("cutoff must be >= 2")
    if method not in ("gmres", "arnoldi"):
        raise InvalidArgumentError(f"method must be 'gmres' or 'arnoldi', got {method!r}")
    fmap = FloquetMap(p, spectrum, d, cutoff, steps_per_period)
    k_bar = select_k_bar(p.omega_b, p.omega_d)
    if method == "gmres":
        rho, info = _solve_gmres(fmap, p, spectrum, d, k_bar, tol, maxiter)
    else:
        rho, info = _solve_arnoldi(fmap, d, tol, n_eigs, maxiter)
    rho = rho / np.trace(rho)
    rho = 0.5 * (rho + rho.conj().T)
    residual = _trace_norm(fmap(rho) - rho)
    if residual > TOL.floquet_residual:
        raise ConvergenceError(f"fixed-point residual {residual:.2e} exceeds "
                               f"{TOL.floquet_residual:.0e}; second eigenvalue "
                               f"{info['second_eigenvalue']:.6g}")
    check_leak(rho, f" (cutoff {cutoff})")
    b, n = phonon_moments(rho)
    info.update({"map_applications": fmap.calls, "cutoff": cutoff, "method": method,
                 "min_eigenvalue": float(np.linalg.eigvalsh(rho)[0]), "rho": rho})
    return SteadyStateResult(b, n, "floquet", k_bar, k_bar * p.omega_d - p.omega_b,
                             residual, info)


def floquet_with_cutoff_growth(p: SystemParams, spectrum: FourierSpectrum,
                               d: DissipationParams, cutoff: int | None = None,
                               max_cutoff: int = 240, **kwargs) -> SteadyStateResult:
    """:func:`floquet_fixed_point`, doubling the cutoff on leakage."""
    cutoff = int(cutoff or p.phonon_cutoff)
    while True:
        try:
            return floquet_fixed_point(p, spectrum, d, cutoff, **kwargs)
        except CutoffLeakError:
            if 2 * cutoff > max_cutoff:
                raise
            cutoff *= 2
            log.info("phonon cutoff raised to %d", cutoff)


@dataclass(frozen=True)
class SweepPoint:
    axis: str
    value: float
    params: SystemParams
    dissipation: DissipationParams
    results: dict
    error: str | None = None


def _point_params(p: SystemParams, d: DissipationParams, axis: str, value: float,
                  k_bar: int):
    if axis == "drive_frequency":
        return p.with_(omega_d=value), d
    if axis == "detuning":
        return p.with_(omega_d=(p.omega_b + value) / k_bar), d
    if axis == "n_th":
        return p, d.with_(n_th=value)
    if axis == "gamma_b":
        return p, d.with_(gamma_b=value)
    if axis == "xi":
        return p.with_(xi=value), d
    if axis == "lambda":
        return p.with_(lambda0=value), d
    raise InvalidArgumentError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")


def _sweep_point(args):
    axis, value, p, d, spectrum, methods, k_bar, floquet_kwargs = args
    results = {}
    pp, dd = p, d
    try:
        pp, dd = _point_params(p, d, axis, value, k_bar)
        if spectrum is None or axis in ("xi", "lambda"):
            spectrum = pressure_spectrum(pp)
        spectrum = spectrum.with_omega_d(pp.omega_d)
        kb = k_bar if axis == "detuning" else None
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OffResonanceWarning)
            if "analytic" in methods:
                results["analytic"] = analytic_steady_state(spectrum, pp, dd, kb)
            if "moments" in methods:
                results["moments"] = moment_limit_cycle(pp, spectrum, dd)
        if "floquet" in methods:
            results["floquet"] = floquet_with_cutoff_growth(pp, spectrum, dd,
                                                            **floquet_kwargs)
        error = None
    except PhononPumpError as exc:
        error = f"{type(exc).__name__}: {exc}"
    return SweepPoint(axis, float(value), pp, dd, results, error)


def sweep(p: SystemParams, d: DissipationParams, axis: str, values,
          spectrum: FourierSpectrum | None = None,
          methods=("analytic", "floquet"), workers: int | None = None,
          **floquet_kwargs) -> list[SweepPoint]:
    """Steady state along one parameter axis.

    Axes: ``drive_frequency`` (``omega_d``), ``detuning`` (``omega_d`` set so
    that ``kbar omega_d - omega_b`` equals the value, ``kbar`` from the base
    parameters), ``n_th``, ``gamma_b``, ``xi`` and ``lambda`` (the latter two
    recompute the pressure spectrum). Errors are recorded per point and do
    not stop the sweep.
    """
    if axis not in SWEEP_AXES:
        raise InvalidArgumentError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    unknown = set(methods) - {"analytic", "moments", "floquet"}
    if unknown:
        raise InvalidArgumentError(f"unknown methods {sorted(unknown)}")
    k_bar = select_k_bar(p.omega_b, p.omega_d) if p.omega_d > 0 else 1
    if spectrum is None and axis not in ("xi", "lambda"):
        spectrum = pressure_spectrum(p)
    jobs = [(axis, float(v), p, d, spectrum, tuple(methods), k_bar, floquet_kwargs)
            for v in values]
    if workers and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_sweep_point, jobs))
    return [_sweep_point(job) for job in jobs]


def lorentzian_fit(detunings, excess, width: float) -> tuple[float, float]:
    """Least-squares amplitude of ``A / (1 + (2 Delta / width)^2)``.

    Returns ``(A, rms_relative_residual)``; the width is held fixed.
    """
    x = np.asarray(detunings, dtype=float)
    y = np.asarray(excess, dtype=float)
    shape = 1.0 / (1.0 + (2.0 * x / width) ** 2)
    amp = float(shape @ y / (shape @ shape))
    resid = y - amp * shape
    scale = max(float(np.max(np.abs(y))), np.finfo(float).tiny)
    return amp, float(np.sqrt(np.mean(resid ** 2)) / scale)

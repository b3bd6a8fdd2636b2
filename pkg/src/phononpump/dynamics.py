"""Time evolution of the full system and of the effective mirror model.

Closed tripartite runs use a Strang splitting between the cavity-matter and
free-phonon part (exponentiated exactly in the instantaneous eigenbasis) and
the optomechanical coupling (exponentiated exactly in its own eigenbasis).
Every step is unitary, so norm drift is set by rounding alone.

Open mirror dynamics are integrated in the interaction frame of
``omega_b b^dag b``; the dissipators are invariant under that frame change.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from . import _kernels
from .errors import AccuracyError, CutoffLeakError, InvalidArgumentError, OrderingError
from .hilbert import DensityMatrix, Operator, PureState, destroy
from .models import (DissipationParams, SystemParams, UscOperators, coupling, modulation,
                     usc_operators)
from .tolerances import TOL
from .vacuum import FourierSpectrum, ground_state_at

log = logging.getLogger(__name__)

OBSERVABLES = ("n_phonon", "b_mean", "N_of_t", "emission_X", "emission_S")

# bytes allowed for a cached period of half-step propagators
PROPAGATOR_CACHE_BYTES = 512 * 2**20


@dataclass(frozen=True)
class MomentState:
    """First and second phonon moments ``<b>`` and ``<b^dag b>``."""

    b_mean: complex = 0j
    n_mean: float = 0.0

    def __post_init__(self):
        if self.n_mean < abs(self.b_mean) ** 2 - 1e-9:
            raise InvalidArgumentError(
                f"n_mean={self.n_mean} < |b_mean|^2={abs(self.b_mean) ** 2}")


@dataclass
class Trajectory:
    """Observables sampled on a strictly increasing time grid (columnar)."""

    times: np.ndarray
    records: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise InvalidArgumentError("trajectory times must be strictly increasing")
        for name, values in self.records.items():
            values = np.asarray(values, dtype=complex)
            if values.shape != self.times.shape:
                raise InvalidArgumentError(f"observable {name!r} has wrong length")
            self.records[name] = values

    def __getitem__(self, name) -> np.ndarray:
        return self.records[name]

    @property
    def observables(self) -> tuple[str, ...]:
        return tuple(self.records)

    def real(self, name) -> np.ndarray:
        return self.records[name].real


def _time_grid(p: SystemParams, t_final: float, dt_max: float):
    """Uniform step ``dt <= dt_max``; divides the drive period when there is one."""
    if t_final < 0 or dt_max <= 0:
        raise InvalidArgumentError("need t_final >= 0 and dt_max > 0")
    if p.omega_d > 0:
        per_period = max(1, math.ceil(p.drive_period / dt_max))
        dt = p.drive_period / per_period
    else:
        per_period = 0
        dt = dt_max
    nsteps = int(round(t_final / dt))
    return dt, nsteps, per_period


def _snap(record_times, dt, nsteps):
    steps = np.unique(np.clip(np.rint(np.asarray(record_times) / dt), 0, nsteps).astype(np.int64))
    return steps


def _default_records(p: SystemParams, t_final: float, per_period_samples: int = 16):
    if p.omega_d > 0:
        n = max(2, int(round(t_final / p.drive_period * per_period_samples)) + 1)
    else:
        n = 101
    return np.linspace(0.0, t_final, n)


def _half_propagators(p: SystemParams, ops: UscOperators, mids: np.ndarray, dt: float,
                      chunk: int = 1024) -> np.ndarray:
    """``exp(-i H_usc(t) dt/2)`` for each midpoint time, via batched eigh."""
    hs, hm, hi = ops.hamiltonian_parts(p)
    du = hs.shape[0]
    out = np.empty((mids.size, du, du), dtype=complex)
    mod = np.array([modulation(p, t) for t in mids])
    cpl = np.array([coupling(p, t) for t in mids])
    for s in range(0, mids.size, chunk):
        sl = slice(s, s + chunk)
        h = hs[None] + mod[sl, None, None] * hm[None] + cpl[sl, None, None] * hi[None]
        energies, vecs = np.linalg.eigh(h)
        out[sl] = (vecs * np.exp(-0.5j * dt * energies)[:, None, :]) @ vecs.transpose(0, 2, 1)
    return out


def _propagate(psi, p, ops, dt, nsteps, per_period, record_steps, phonon_energies,
               y_eig, q_eig, g):
    """Run the split-step kernel, caching one period of propagators when it fits."""
    du, dp = psi.shape
    yv, wy = y_eig
    qv, wq = q_eig
    phonon_half = np.exp(-0.5j * dt * phonon_energies)
    eb = np.exp(-1j * dt * 0.5 * g * np.outer(yv, qv))
    bytes_per = du * du * 16
    if per_period and per_period * bytes_per <= PROPAGATOR_CACHE_BYTES:
        mids = (np.arange(per_period) + 0.5) * dt
        stack = _half_propagators(p, ops, mids, dt)
        index = np.arange(nsteps, dtype=np.int64) % per_period
        return _kernels.split_step(psi, stack, index, phonon_half, wy, wq, eb, record_steps)
    # chunked: propagators computed on the fly, no reuse
    chunk = max(1, min(nsteps, PROPAGATOR_CACHE_BYTES // bytes_per))
    snaps = np.empty((len(record_steps), du, dp), dtype=complex)
    record_steps = np.asarray(record_steps)
    state = psi
    for start in range(0, nsteps + 1, chunk):
        stop = min(start + chunk, nsteps)
        mids = (np.arange(start, stop) + 0.5) * dt
        stack = _half_propagators(p, ops, mids, dt) if stop > start else \
            np.zeros((1, du, du), complex)
        local = record_steps[(record_steps >= start) & (record_steps <= stop)] - start
        want = np.concatenate([local, [stop - start]])
        res = _kernels.split_step(state, stack, np.arange(stop - start, dtype=np.int64),
                                  phonon_half, wy, wq, eb, want)
        mask = (record_steps >= start) & (record_steps <= stop)
        snaps[mask] = res[:-1]
        state = res[-1]
        if stop == nsteps:
            break
    return snaps


@dataclass(frozen=True)
class _EmissionOps:
    x_plus: np.ndarray
    s_plus: np.ndarray


def _grouped_positive_part(op: np.ndarray, energies: np.ndarray, vecs: np.ndarray,
                           tol: float) -> np.ndarray:
    """Sum of ``P_G op P_H`` over eigenvalue groups ``E_G < E_H``."""
    m = vecs.T.conj() @ op @ vecs
    groups = np.zeros(energies.size, dtype=int)
    for i in range(1, energies.size):
        groups[i] = groups[i - 1] + (energies[i] - energies[i - 1] > tol)
    same = groups[:, None] == groups[None, :]
    intra = np.abs(np.where(same & ~np.eye(energies.size, dtype=bool), m, 0))
    if intra.size and intra.max() > 1e-10 * max(1.0, np.abs(m).max()):
        raise OrderingError(
            "near-degenerate eigenvalues are coupled by the operator; "
            "positive-frequency part is ambiguous")
    upper = np.where(groups[:, None] < groups[None, :], m, 0)
    return vecs @ upper @ vecs.T.conj()


def _dressed(p: SystemParams, ops: UscOperators, t: float) -> _EmissionOps:
    h = ops.hamiltonian(p, t).dense()
    energies, vecs = np.linalg.eigh(h)
    scale = p.omega_a if p.omega_a > 0 else 1.0
    tol = TOL.dressed_degeneracy * scale
    return _EmissionOps(
        _grouped_positive_part(ops.x_quadrature.dense(), energies, vecs, tol),
        _grouped_positive_part(ops.matter_quadrature.dense(), energies, vecs, tol))


def dressed_positive_operators(p: SystemParams, t: float) -> tuple[Operator, Operator]:
    """Positive-frequency parts ``(X^+, S^+)`` of the cavity and matter quadratures.

    Both are built on the instantaneous eigenbasis of the cavity-matter
    Hamiltonian and only lower the energy. Degenerate levels are treated as
    one group; if the quadrature couples levels inside a group the ordering
    is ambiguous and :class:`OrderingError` is raised.
    """
    ops = usc_operators(p)
    em = _dressed(p, ops, t)
    return Operator(ops.layout, em.x_plus), Operator(ops.layout, em.s_plus)


def _emission_weight(op_plus: np.ndarray, psi: np.ndarray) -> float:
    v = op_plus @ psi
    return float(np.vdot(v, v).real)


def product_ground_state(p: SystemParams, t: float = 0.0, phonon_level: int = 0) -> PureState:
    """``|psi_0(t)> (x) |n_b>`` on the tripartite layout."""
    usc, _, _ = ground_state_at(p, t)
    dp = int(p.phonon_cutoff)
    phonon = np.zeros(dp)
    phonon[phonon_level] = 1.0
    return PureState(p.full_layout(), np.kron(usc.amplitudes, phonon))


def _check_norm(norms, times, p, dt_max):
    drift = float(np.max(np.abs(norms - 1.0))) if norms.size else 0.0
    periods = max(1.0, times[-1] / p.drive_period) if p.omega_d > 0 else 1.0
    if drift / periods > TOL.norm_drift_per_period:
        raise AccuracyError(
            f"norm drift {drift:.2e} over {periods:.0f} periods exceeds "
            f"{TOL.norm_drift_per_period:.0e} per period; retry with dt_max <= {dt_max / 2:.3e}")
    return drift


def default_dt_max(p: SystemParams) -> float:
    """One fortieth of the fastest bare period."""
    fastest = max(p.omega_a, p.omega_sigma + p.delta_omega, p.omega_b, 1e-300)
    return 2 * math.pi / fastest / 40


def evolve_closed_full(p: SystemParams, t_final: float, dt_max: float | None = None,
                       initial: PureState | None = None, record_times=None,
                       displaced: bool = True, emission: bool = True) -> Trajectory:
    """Schrodinger evolution under the full tripartite Hamiltonian.

    Parameters
    ----------
    initial
        State on ``p.full_layout()``; defaults to ``|psi_0(0)> (x) |0_b>``.
    record_times
        Sampling times (snapped to the step grid); defaults to 16 per period.
    displaced
        Use the optomechanical coupling in the displaced mirror frame.
    emission
        Also record ``<X^- X^+>`` and ``<S^- S^+>`` (one diagonalization per
        record).
    """
    layout = p.full_layout()
    if initial is None:
        initial = product_ground_state(p)
    if initial.layout != layout:
        raise InvalidArgumentError("initial state must live on the tripartite layout")
    dt_max = dt_max or default_dt_max(p)
    dt, nsteps, per_period = _time_grid(p, t_final, dt_max)
    if record_times is None:
        record_times = _default_records(p, t_final)
    steps = _snap(record_times, dt, nsteps)

    ops = usc_operators(p)
    du = layout.dims[0] * layout.dims[1]
    dp = layout.dims[2]
    psi = initial.amplitudes.reshape(du, dp)
    y = ops.pressure.dense().real
    if not displaced:
        y = y + np.eye(du)
    b = destroy(dp, "phonon").dense().real
    snaps = _propagate(psi, p, ops, dt, nsteps, per_period, steps,
                       p.omega_b * np.arange(dp), np.linalg.eigh(y),
                       np.linalg.eigh(b + b.T), p.g)

    times = steps * dt
    y_pressure = ops.pressure.dense()
    nb = np.arange(dp)
    sq = np.sqrt(nb[1:])
    rec = {k: np.zeros(times.size, dtype=complex) for k in OBSERVABLES}
    norms = np.empty(times.size)
    for i, (t, s) in enumerate(zip(times, snaps)):
        norms[i] = np.linalg.norm(s)
        rec["n_phonon"][i] = np.sum(np.abs(s) ** 2 * nb[None, :])
        rec["b_mean"][i] = np.sum(s[:, :-1].conj() * s[:, 1:] * sq[None, :])
        rec["N_of_t"][i] = np.vdot(s, y_pressure @ s)
        if emission:
            em = _dressed(p, ops, t)
            rec["emission_X"][i] = _emission_weight(em.x_plus, s)
            rec["emission_S"][i] = _emission_weight(em.s_plus, s)
    drift = _check_norm(norms, times, p, dt_max)
    return Trajectory(times, rec, {"dt": dt, "steps": nsteps, "norm_drift": drift,
                                   "displaced": displaced})


def evolve_closed_usc(p: SystemParams, t_final: float, dt_max: float | None = None,
                      initial: PureState | None = None, record_times=None,
                      dissipation: DissipationParams | None = None,
                      dressed_dissipators: bool = False) -> Trajectory:
    """Evolve the cavity-matter subsystem alone.

    Closed by default. With ``dressed_dissipators=True`` the state is a density
    matrix and ``gamma_a D[X^+(t)] + gamma_sigma D[S^+(t)]`` act alongside the
    unitary part (first-order splitting per step).

    Records the emission weights, ``N(t)``, the energy ``<H(t)>`` and the
    fidelity with the instantaneous ground state.
    """
    ops = usc_operators(p)
    layout = ops.layout
    if initial is None:
        initial = ground_state_at(p, 0.0, ops)[0]
    if initial.layout != layout:
        raise InvalidArgumentError("initial state must live on the cavity-matter layout")
    dt_max = dt_max or default_dt_max(p)
    dt, nsteps, per_period = _time_grid(p, t_final, dt_max)
    if record_times is None:
        record_times = _default_records(p, t_final)
    steps = _snap(record_times, dt, nsteps)
    du = layout.dim
    times = steps * dt

    if not dressed_dissipators:
        psi = initial.amplitudes.reshape(du, 1)
        one = (np.zeros(1), np.eye(1))
        snaps = _propagate(psi, p, ops, dt, nsteps, per_period, steps, np.zeros(1),
                           (np.zeros(du), np.eye(du)), one, 0.0)
        states = [s[:, 0] for s in snaps]
        rhos = None
    else:
        d = dissipation or DissipationParams()
        rhos = _evolve_usc_dressed(p, ops, initial, dt, nsteps, steps, d)
        states = None

    rec = {k: np.zeros(times.size, dtype=complex) for k in
           ("N_of_t", "emission_X", "emission_S", "energy", "ground_fidelity")}
    pressure = ops.pressure.dense()
    norms = np.empty(times.size)
    for i, t in enumerate(times):
        h = ops.hamiltonian(p, t).dense()
        energies, vecs = np.linalg.eigh(h)
        tol = TOL.dressed_degeneracy * (p.omega_a or 1.0)
        xp = _grouped_positive_part(ops.x_quadrature.dense(), energies, vecs, tol)
        sp_ = _grouped_positive_part(ops.matter_quadrature.dense(), energies, vecs, tol)
        g0 = vecs[:, 0]
        if states is not None:
            s = states[i]
            norms[i] = np.linalg.norm(s)
            rec["N_of_t"][i] = np.vdot(s, pressure @ s)
            rec["emission_X"][i] = _emission_weight(xp, s)
            rec["emission_S"][i] = _emission_weight(sp_, s)
            rec["energy"][i] = np.vdot(s, h @ s)
            rec["ground_fidelity"][i] = abs(np.vdot(g0, s)) ** 2
        else:
            r = rhos[i]
            norms[i] = np.trace(r).real
            rec["N_of_t"][i] = np.trace(pressure @ r)
            rec["emission_X"][i] = np.trace(xp.conj().T @ xp @ r).real
            rec["emission_S"][i] = np.trace(sp_.conj().T @ sp_ @ r).real
            rec["energy"][i] = np.trace(h @ r)
            rec["ground_fidelity"][i] = np.vdot(g0, r @ g0).real
    drift = _check_norm(norms, times, p, dt_max)
    return Trajectory(times, rec, {"dt": dt, "steps": nsteps, "norm_drift": drift})


def _evolve_usc_dressed(p, ops, initial, dt, nsteps, record_steps, d):
    rho = np.outer(initial.amplitudes, initial.amplitudes.conj())
    out = []
    record_steps = list(record_steps)
    hs, hm, hi = ops.hamiltonian_parts(p)
    x = ops.x_quadrature.dense()
    s = ops.matter_quadrature.dense()
    tol = TOL.dressed_degeneracy * (p.omega_a or 1.0)
    r = 0
    for j in range(nsteps + 1):
        while r < len(record_steps) and record_steps[r] == j:
            out.append(rho.copy())
            r += 1
        if j == nsteps:
            break
        t = (j + 0.5) * dt
        h = hs + modulation(p, t) * hm + coupling(p, t) * hi
        energies, vecs = np.linalg.eigh(h)
        u = (vecs * np.exp(-1j * dt * energies)) @ vecs.T
        rho = u @ rho @ u.conj().T
        for rate, op in ((d.gamma_a, x), (d.gamma_sigma, s)):
            if rate:
                lp = _grouped_positive_part(op, energies, vecs, tol)
                lpd = lp.conj().T
                dn = lpd @ lp
                # midpoint step of the dissipator
                def dis(m):
                    return rate * (lp @ m @ lpd - 0.5 * (dn @ m + m @ dn))
                rho = rho + dt * dis(rho + 0.5 * dt * dis(rho))
    return out


def _moment_rhs(p: SystemParams, spectrum: FourierSpectrum, d: DissipationParams):
    half_g = 0.5 * p.g
    decay = 0.5 * (d.gamma_b + d.gamma_D)
    wb = p.omega_b
    ks = spectrum.ks * p.omega_d
    coeffs = spectrum.coefficients

    def rhs(t, y):
        b = y[0] + 1j * y[1]
        n_t = float(np.real(np.exp(1j * ks * t) @ coeffs))
        db = -1j * wb * b - 1j * half_g * n_t - decay * b
        dn = (-1j * half_g * n_t * (np.conj(b) - b)).real - d.gamma_b * y[2] \
            + d.n_th * d.gamma_b
        return [db.real, db.imag, dn]

    return rhs


def evolve_effective_moments(p: SystemParams, spectrum: FourierSpectrum,
                             d: DissipationParams, t_final: float,
                             initial: MomentState = MomentState(), record_times=None,
                             rtol: float = 1e-11, atol: float = 1e-13) -> Trajectory:
    """Integrate the closed equations for ``<b>`` and ``<b^dag b>``.

    The full periodic ``N(t)`` (no rotating-wave approximation) drives the
    mirror. The moment hierarchy closes exactly for this linear model.
    """
    spectrum = spectrum.with_omega_d(p.omega_d)
    if record_times is None:
        record_times = _default_records(p, t_final)
    record_times = np.asarray(record_times, dtype=float)
    y0 = [initial.b_mean.real, initial.b_mean.imag, initial.n_mean]
    t_end = max(t_final, float(record_times.max(initial=0.0)))
    if t_end > 0:
        sol = solve_ivp(_moment_rhs(p, spectrum, d), (0.0, t_end), y0,
                        method="DOP853", t_eval=record_times, rtol=rtol, atol=atol)
        if not sol.success:
            raise AccuracyError(f"moment integration failed: {sol.message}")
        ys = sol.y
    else:
        ys = np.array(y0, dtype=float)[:, None] * np.ones(record_times.size)
    rec = {
        "n_phonon": ys[2].astype(complex),
        "b_mean": ys[0] + 1j * ys[1],
        "N_of_t": spectrum.evaluate(record_times).astype(complex),
        "emission_X": np.zeros(record_times.size, dtype=complex),
        "emission_S": np.zeros(record_times.size, dtype=complex),
    }
    return Trajectory(record_times, rec, {"model": "moments"})


def drive_nodes(p: SystemParams, spectrum: FourierSpectrum, t0: float, dt: float,
                nsteps: int) -> np.ndarray:
    """Interaction-frame drive ``(g/2) N(t) exp(i omega_b t)`` at RK4 nodes."""
    t = t0 + 0.5 * dt * np.arange(2 * nsteps + 1)
    return 0.5 * p.g * spectrum.evaluate(t) * np.exp(1j * p.omega_b * t)


def bath_rates(d: DissipationParams) -> tuple[float, float, float]:
    """``(loss, gain, dephasing)`` rates of the phonon bath."""
    return (1.0 + d.n_th) * d.gamma_b, d.n_th * d.gamma_b, d.gamma_D


def check_leak(rho: np.ndarray, where: str = ""):
    top = rho[-1, -1].real
    if top > TOL.cutoff_leak:
        raise CutoffLeakError(
            f"top Fock level population {top:.2e} exceeds {TOL.cutoff_leak:.0e}{where}; "
            "increase the phonon cutoff")


def frame_rotation(n: int, omega_b: float, t: float) -> np.ndarray:
    """Elementwise phases taking an interaction-frame matrix to the lab frame."""
    m = np.arange(n)
    return np.exp(-1j * omega_b * (m[:, None] - m[None, :]) * t)


def phonon_moments(rho: np.ndarray) -> tuple[complex, float]:
    n = rho.shape[0]
    sq = np.sqrt(np.arange(1, n))
    b = complex(np.sum(sq * np.diagonal(rho, -1)))
    return b, float(np.sum(np.arange(n) * np.diagonal(rho).real))


def default_steps_per_period(p: SystemParams, spectrum: FourierSpectrum,
                             minimum: int = 128, per_cycle: int = 16) -> int:
    """RK4 steps per drive period resolving the fastest interaction-frame tone."""
    if p.omega_d <= 0:
        return minimum
    fastest = spectrum.K * p.omega_d + p.omega_b
    return max(minimum, per_cycle * math.ceil(fastest / p.omega_d))


def evolve_lindblad(p: SystemParams, spectrum: FourierSpectrum, d: DissipationParams,
                    t_final: float, initial: DensityMatrix, record_times=None,
                    steps_per_period: int | None = None) -> Trajectory:
    """Master equation of the driven, damped mirror in the displaced frame.

    ``H_b(t) = omega_b b^dag b + (g/2) N(t) (b + b^dag)`` with thermal loss,
    gain and dephasing. Integration runs with fixed RK4 steps in the
    interaction frame; observables are reported in the lab frame.
    """
    if initial.layout.labels != ("phonon",):
        raise InvalidArgumentError("evolve_lindblad works on a phonon-only layout")
    spectrum = spectrum.with_omega_d(p.omega_d)
    n = initial.layout.dim
    steps_per_period = steps_per_period or default_steps_per_period(p, spectrum)
    if p.omega_d > 0:
        dt = p.drive_period / steps_per_period
    else:
        dt = 2 * math.pi / max(p.omega_b, 1e-300) / steps_per_period
    nsteps = int(round(t_final / dt))
    if record_times is None:
        record_times = _default_records(p, t_final)
    steps = _snap(record_times, dt, nsteps)
    g_down, g_up, g_deph = bath_rates(d)
    rho = np.array(initial.matrix)
    rec = {k: np.zeros(steps.size, dtype=complex) for k in OBSERVABLES}
    rec["trace"] = np.zeros(steps.size, dtype=complex)
    rec["min_eigenvalue"] = np.zeros(steps.size, dtype=complex)
    current = 0
    times = steps * dt
    for i, s in enumerate(steps):
        if s > current:
            nodes = drive_nodes(p, spectrum, current * dt, dt, int(s - current))
            rho = _kernels.lindblad_rk4(rho, nodes, dt, g_down, g_up, g_deph)
            current = int(s)
        t = current * dt
        check_leak(rho, f" at t={t:.6g}")
        lab = rho * frame_rotation(n, p.omega_b, t)
        b, nm = phonon_moments(lab)
        rec["n_phonon"][i] = nm
        rec["b_mean"][i] = b
        rec["N_of_t"][i] = spectrum.evaluate(t)
        rec["trace"][i] = np.trace(lab)
        rec["min_eigenvalue"][i] = np.linalg.eigvalsh(0.5 * (lab + lab.conj().T))[0]
    return Trajectory(times, rec, {"model": "lindblad", "dt": dt, "cutoff": n})

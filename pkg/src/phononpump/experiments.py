"""Experiment pipelines behind the command line.

Each pipeline turns an :class:`ExperimentConfig` into a :class:`RunRecord`
holding a columnar payload. Cutoffs are doubled until the target observable
moves less than ``numerics.convergence_tol`` (relative).
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .dynamics import (MomentState, default_dt_max, evolve_closed_full,
                       evolve_effective_moments, evolve_lindblad)
from .errors import ConvergenceError
from .hilbert import thermal_state
from .models import MatterKind, SystemParams
from .steadystate import analytic_steady_state, select_k_bar, sweep
from .vacuum import pressure_spectrum

log = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = ("n_phonon", "b_mean", "N_of_t", "emission_X", "emission_S")


@dataclass
class RunRecord:
    """Outcome of one experiment; ``payload`` maps column names to arrays."""

    config: dict
    version: str
    walltime_s: float
    convergence: list
    payload: dict
    summary: dict = field(default_factory=dict)


def _relative_change(old, new) -> float:
    old = np.asarray(old)
    new = np.asarray(new)
    scale = float(np.max(np.abs(new))) if new.size else 0.0
    if scale == 0.0:
        return float(np.max(np.abs(new - old))) if new.size else 0.0
    return float(np.max(np.abs(new - old)) / scale)


def _cutoff_fields(p: SystemParams, with_phonon: bool) -> tuple[str, ...]:
    names = ["cavity_cutoff"]
    if p.matter_kind is not MatterKind.QUBIT:
        names.append("matter_cutoff")
    if with_phonon:
        names.append("phonon_cutoff")
    return tuple(names)


def converge_cutoffs(cfg: ExperimentConfig, compute, observable, with_phonon=False):
    """Run ``compute(p)`` and double the cutoffs until ``observable`` settles.

    Returns ``(result, params, report)`` for the finest run.
    """
    p = cfg.params
    names = _cutoff_fields(p, with_phonon)
    result = compute(p)
    report = [{"cutoffs": {n: int(getattr(p, n)) for n in names}, "delta": None}]
    if not cfg.numerics["converge"]:
        return result, p, report
    tol = cfg.numerics["convergence_tol"]
    for _ in range(cfg.numerics["max_doublings"]):
        finer = p.with_(**{n: 2 * int(getattr(p, n)) for n in names})
        new = compute(finer)
        delta = _relative_change(observable(result), observable(new))
        report.append({"cutoffs": {n: int(getattr(finer, n)) for n in names},
                       "delta": delta})
        log.info("cutoffs %s: relative change %.3e", report[-1]["cutoffs"], delta)
        result, p = new, finer
        if delta < tol:
            return result, p, report
    if cfg.numerics["max_doublings"] == 0:
        return result, p, report
    raise ConvergenceError(
        f"cutoffs did not converge to {tol:g} after {cfg.numerics['max_doublings']} "
        f"doublings (last change {report[-1]['delta']:.3e})")


def _spectrum_fn(cfg: ExperimentConfig, workers):
    K, M = cfg.numerics["K"], cfg.numerics["M"]
    return lambda p: pressure_spectrum(p, K=K, M=M, workers=workers)


def _run_pressure(cfg, workers):
    spectrum, p, report = converge_cutoffs(cfg, _spectrum_fn(cfg, workers),
                                           lambda s: s.coefficients)
    ks = spectrum.ks
    payload = {"k": ks, "N_k": spectrum.coefficients, "abs_N_k": np.abs(spectrum.coefficients)}
    summary = {"reconstruction_error": spectrum.reconstruction_error,
               "max_abs_N_t": float(np.max(np.abs(spectrum.evaluate(
                   p.drive_period * np.arange(512) / 512))))}
    return payload, report, summary


def _record_times(cfg):
    p = cfg.params
    t_final = cfg.t_final
    n = max(2, int(round(t_final / p.drive_period * cfg.numerics["records_per_period"])) + 1)
    return np.linspace(0.0, t_final, n)


def _trajectory_payload(traj):
    out = {"t": traj.times}
    for name in TRAJECTORY_COLUMNS:
        out[name] = traj[name]
    return out


def _run_evolve_full(cfg, workers):
    times = _record_times(cfg)
    dt_max = cfg.numerics["dt_max"]

    def compute(p):
        return evolve_closed_full(p, cfg.t_final, dt_max or default_dt_max(p),
                                  record_times=times)

    traj, p, report = converge_cutoffs(cfg, compute, lambda t: t.real("n_phonon"),
                                       with_phonon=True)
    return _trajectory_payload(traj), report, {"norm_drift": traj.meta["norm_drift"],
                                               "dt": traj.meta["dt"]}


def _run_evolve_effective(cfg, workers):
    spectrum, p, report = converge_cutoffs(cfg, _spectrum_fn(cfg, workers),
                                           lambda s: s.coefficients)
    d = cfg.dissipation
    times = _record_times(cfg)
    if cfg.numerics["model"] == "moments":
        traj = evolve_effective_moments(p, spectrum, d, cfg.t_final,
                                        MomentState(0j, d.n_th), record_times=times)
    else:
        rho = thermal_state(int(p.phonon_cutoff), d.n_th)
        traj = evolve_lindblad(p, spectrum, d, cfg.t_final, rho, record_times=times,
                               steps_per_period=cfg.numerics["steps_per_period"])
    return _trajectory_payload(traj), report, {"model": cfg.numerics["model"]}


def _run_steady_sweep(cfg, workers):
    spectrum, p, report = converge_cutoffs(cfg, _spectrum_fn(cfg, workers),
                                           lambda s: s.coefficients)
    methods = tuple(cfg.numerics["methods"])
    kwargs = {"max_cutoff": cfg.numerics["max_phonon_cutoff"]}
    if cfg.numerics["steps_per_period"]:
        kwargs["steps_per_period"] = cfg.numerics["steps_per_period"]
    points = sweep(p, cfg.dissipation, cfg.sweep_axis, cfg.sweep_values, spectrum=spectrum,
                   methods=methods, workers=workers, **kwargs)
    n = len(points)
    payload = {"value": np.array([pt.value for pt in points], dtype=float),
               "omega_d": np.array([pt.params.omega_d for pt in points], dtype=float),
               "n_th": np.array([pt.dissipation.n_th for pt in points], dtype=float)}
    k_bar = np.full(n, -1, dtype=np.int64)
    detuning = np.full(n, np.nan)
    for i, pt in enumerate(points):
        for res in pt.results.values():
            k_bar[i], detuning[i] = res.k_bar, res.detuning
    payload["k_bar"] = k_bar
    payload["detuning"] = detuning
    for m in methods:
        b = np.full(n, np.nan + 0j)
        nn = np.full(n, np.nan)
        resid = np.full(n, np.nan)
        for i, pt in enumerate(points):
            if m in pt.results:
                res = pt.results[m]
                b[i], nn[i], resid[i] = res.b_ss, res.n_ss, res.residual
        payload[f"n_ss_{m}"] = nn
        payload[f"b_ss_{m}"] = b
        if m != "analytic":
            payload[f"residual_{m}"] = resid
    payload["error"] = [pt.error or "" for pt in points]
    failed = sum(1 for pt in points if pt.error)
    return payload, report, {"points": n, "failed_points": failed}


def _run_device_prediction(cfg, workers):
    spectrum, p, report = converge_cutoffs(cfg, _spectrum_fn(cfg, workers),
                                           lambda s: s.coefficients)
    d = cfg.dissipation
    k_bar = select_k_bar(p.omega_b, p.omega_d)
    res = analytic_steady_state(spectrum, p, d, k_bar)
    payload = {"k_bar": np.array([k_bar]),
               "N_kbar": np.array([spectrum.coefficient(k_bar)]),
               "b_ss": np.array([res.b_ss]),
               "abs_b_ss": np.array([abs(res.b_ss)]),
               "n_ss": np.array([res.n_ss]),
               "n_th": np.array([d.n_th]),
               "n_minus_nth": np.array([res.n_ss - d.n_th])}
    return payload, report, {}


def _run_crt_scan(cfg, workers):
    dt_max = cfg.numerics["dt_max"]
    grid = cfg.params.drive_period * np.arange(512) / 512
    K, M = cfg.numerics["K"], cfg.numerics["M"]

    def compute(p):
        finals, peaks = [], []
        for xi in cfg.sweep_values:
            px = p.with_(xi=xi)
            spectrum = pressure_spectrum(px, K=K, M=M, workers=workers)
            peaks.append(float(np.max(np.abs(spectrum.evaluate(grid)))))
            traj = evolve_closed_full(px, cfg.t_final, dt_max or default_dt_max(px),
                                      record_times=[0.0, cfg.t_final], emission=False)
            finals.append(float(traj.real("n_phonon")[-1]))
        return np.array(finals), np.array(peaks)

    (finals, peaks), p, report = converge_cutoffs(cfg, compute, lambda r: r[0],
                                                  with_phonon=True)
    payload = {"xi": np.array(cfg.sweep_values, dtype=float), "n_phonon_final": finals,
               "max_abs_N_t": peaks}
    return payload, report, {"periods": cfg.t_final / cfg.params.drive_period}


PIPELINES = {
    "pressure": _run_pressure,
    "evolve_full": _run_evolve_full,
    "evolve_effective": _run_evolve_effective,
    "steady_sweep": _run_steady_sweep,
    "device_prediction": _run_device_prediction,
    "crt_scan": _run_crt_scan,
}


def run(cfg: ExperimentConfig, workers: int | None = None) -> RunRecord:
    """Dispatch ``cfg`` to its pipeline and collect the run record."""
    start = time.perf_counter()
    payload, report, summary = PIPELINES[cfg.experiment](cfg, workers)
    return RunRecord(config=cfg.raw, version=__version__,
                     walltime_s=time.perf_counter() - start, convergence=report,
                     payload=payload, summary=summary)

import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from phononpump.dynamics import MomentState, evolve_effective_moments
from phononpump.errors import DivergenceError, InvalidArgumentError
from phononpump.hilbert import thermal_state
from phononpump.models import DissipationParams, SystemParams
from phononpump.steadystate import (OffResonanceWarning, ResonanceTieWarning,
                                    analytic_steady_state, floquet_fixed_point,
                                    lorentzian_fit, moment_limit_cycle, select_k_bar, sweep)
from phononpump.vacuum import FourierSpectrum

# resonant n_ss at the desk fixture (g = 0.0025, Gamma = 1e-4, n_th = 0)
DESK_RESONANT_NSS = 2.0351355068308457


@pytest.fixture
def toy():
    """Mirror with a synthetic two-harmonic drive and strong damping."""
    p = SystemParams(omega_b=1.0, omega_d=1.0, g=0.02)
    spectrum = FourierSpectrum.from_harmonics(1.0, {0: 0.3, 1: 0.05 - 0.02j, 2: 0.004j})
    d = DissipationParams(gamma_b=0.02, gamma_D=0.01)
    return p, spectrum, d


@pytest.mark.parametrize("ratio, expected", [(1.0, 1), (2.2, 2), (2.7, 3), (0.9, 1),
                                             (4.0, 4)])
def test_select_k_bar(ratio, expected):
    assert select_k_bar(ratio, 1.0) == expected


def test_half_integer_tie_goes_low():
    with pytest.warns(ResonanceTieWarning):
        assert select_k_bar(2.5, 1.0) == 2
    with pytest.raises(InvalidArgumentError):
        select_k_bar(1.0, 0.0)


def test_analytic_at_resonance(toy):
    p, spectrum, d = toy
    res = analytic_steady_state(spectrum, p, d)
    gamma = d.gamma_b + d.gamma_D
    assert abs(res.b_ss) == pytest.approx(p.g * abs(spectrum.coefficient(1)) / gamma,
                                          rel=1e-14)
    assert res.n_ss == pytest.approx(gamma / d.gamma_b * abs(res.b_ss) ** 2, rel=1e-14)
    assert res.k_bar == 1 and res.detuning == 0.0


def test_analytic_without_drive(toy):
    p, _, d = toy
    res = analytic_steady_state(FourierSpectrum.from_harmonics(1.0, {0: 0.3}), p,
                                d.with_(n_th=3.0))
    assert res.b_ss == 0 and res.n_ss == 3.0


def test_analytic_needs_loss(toy):
    p, spectrum, d = toy
    with pytest.raises(DivergenceError):
        analytic_steady_state(spectrum, p, d.with_(gamma_b=0.0))
    with pytest.raises(DivergenceError):
        moment_limit_cycle(p, spectrum, d.with_(gamma_b=0.0))


def test_analytic_warns_off_resonance(toy):
    p, spectrum, d = toy
    with pytest.warns(OffResonanceWarning):
        analytic_steady_state(spectrum, p.with_(omega_d=1.3), d, k_bar=1)


def test_desk_resonance_oracle(desk, desk_spectrum, desk_damping):
    res = analytic_steady_state(desk_spectrum, desk, desk_damping)
    assert res.n_ss == pytest.approx(DESK_RESONANT_NSS, rel=1e-9)


@given(st.floats(0.0, 50.0))
def test_thermal_shift_is_exact_in_analytic_path(n_th):
    p = SystemParams(omega_b=1.0, omega_d=1.0, g=0.02)
    spectrum = FourierSpectrum.from_harmonics(1.0, {1: 0.05})
    d = DissipationParams(gamma_b=0.02, gamma_D=0.01)
    base = analytic_steady_state(spectrum, p, d).n_ss
    shifted = analytic_steady_state(spectrum, p, d.with_(n_th=n_th)).n_ss
    assert shifted - base == pytest.approx(n_th, abs=4 * np.spacing(shifted))


def test_limit_cycle_matches_long_integration(toy):
    p, spectrum, d = toy
    cycle = moment_limit_cycle(p, spectrum, d)
    assert cycle.residual < 1e-10
    t = 300 * p.drive_period
    traj = evolve_effective_moments(p, spectrum, d, t, MomentState(), record_times=[t])
    assert abs(traj["b_mean"][-1] - cycle.b_ss) < 1e-8
    assert abs(traj.real("n_phonon")[-1] - cycle.n_ss) < 1e-8


def test_thermal_floquet_fixed_point():
    p = SystemParams(omega_b=1.0, omega_d=1.0, g=0.0)
    spectrum = FourierSpectrum.from_harmonics(1.0, {1: 0.1})
    d = DissipationParams(gamma_b=0.05, gamma_D=0.02, n_th=2.0)
    res = floquet_fixed_point(p, spectrum, d, cutoff=60)
    truncated = np.diag(thermal_state(60, 2.0).matrix).real @ np.arange(60)
    assert abs(truncated - 2.0) < 1e-8
    assert res.n_ss == pytest.approx(truncated, abs=1e-12)
    assert res.residual < 1e-10
    assert abs(res.b_ss) < 1e-10


def test_floquet_matches_limit_cycle(toy):
    p, spectrum, d = toy
    floq = floquet_fixed_point(p, spectrum, d, cutoff=20)
    cycle = moment_limit_cycle(p, spectrum, d)
    assert abs(floq.b_ss - cycle.b_ss) < 1e-8
    assert floq.n_ss == pytest.approx(cycle.n_ss, rel=1e-7)
    assert floq.extras["min_eigenvalue"] > -1e-8


def test_gmres_and_arnoldi_agree(toy):
    p, spectrum, d = toy
    gm = floquet_fixed_point(p, spectrum, d, cutoff=16)
    ar = floquet_fixed_point(p, spectrum, d, cutoff=16, method="arnoldi")
    assert abs(gm.b_ss - ar.b_ss) < 1e-9
    assert gm.n_ss == pytest.approx(ar.n_ss, rel=1e-9)
    assert abs(ar.extras["unit_eigenvalue"] - 1) < 1e-10
    gamma = d.gamma_b + d.gamma_D
    expected = math.exp(-min(d.gamma_b, gamma / 2) * p.drive_period)
    assert abs(ar.extras["second_eigenvalue"]) == pytest.approx(expected, rel=1e-3)
    assert abs(gm.extras["second_eigenvalue"]) == pytest.approx(expected, rel=1e-3)


def test_floquet_rejects_bad_arguments(toy):
    p, spectrum, d = toy
    with pytest.raises(InvalidArgumentError):
        floquet_fixed_point(p, spectrum, d, method="power")
    with pytest.raises(InvalidArgumentError):
        floquet_fixed_point(p, spectrum, d, cutoff=1)


@pytest.mark.parametrize("factor", [1e-3, 37.0])
def test_steady_state_is_scale_invariant(toy, factor):
    p, spectrum, d = toy
    ps, ss, ds = p.scaled(factor), spectrum.scaled(factor), d.scaled(factor)
    pairs = [(analytic_steady_state(spectrum, p, d), analytic_steady_state(ss, ps, ds)),
             (floquet_fixed_point(p, spectrum, d, cutoff=16),
              floquet_fixed_point(ps, ss, ds, cutoff=16))]
    for base, scaled in pairs:
        assert abs(abs(base.b_ss) - abs(scaled.b_ss)) < 1e-9
        assert abs(base.n_ss - scaled.n_ss) < 1e-9
    cycle, cycle_s = moment_limit_cycle(p, spectrum, d), moment_limit_cycle(ps, ss, ds)
    assert abs(cycle.n_ss - cycle_s.n_ss) < 1e-9


def test_sweep_collects_point_errors(toy):
    p, spectrum, d = toy
    points = sweep(p, d, "gamma_b", [0.02, 0.0], spectrum=spectrum,
                   methods=("analytic", "moments"))
    assert points[0].error is None and set(points[0].results) == {"analytic", "moments"}
    assert points[1].error.startswith("DivergenceError")


def test_sweep_detuning_axis_keeps_harmonic(toy):
    p, spectrum, d = toy
    p2 = p.with_(omega_d=0.5)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        points = sweep(p2, d, "detuning", [-0.01, 0.0, 0.01], spectrum=spectrum,
                       methods=("analytic",))
    for pt, delta in zip(points, (-0.01, 0.0, 0.01)):
        res = pt.results["analytic"]
        assert res.k_bar == 2
        assert res.detuning == pytest.approx(delta, abs=1e-15)


def test_sweep_rejects_unknown_axis_and_method(toy):
    p, spectrum, d = toy
    with pytest.raises(InvalidArgumentError):
        sweep(p, d, "temperature", [1.0], spectrum=spectrum)
    with pytest.raises(InvalidArgumentError):
        sweep(p, d, "n_th", [1.0], spectrum=spectrum, methods=("exact",))


def test_parallel_sweep_matches_serial(toy):
    p, spectrum, d = toy
    values = [0.0, 1.0, 2.0]
    serial = sweep(p, d, "n_th", values, spectrum=spectrum, methods=("analytic", "moments"))
    parallel = sweep(p, d, "n_th", values, spectrum=spectrum,
                     methods=("analytic", "moments"), workers=2)
    for a, b in zip(serial, parallel):
        assert a.results["moments"].n_ss == b.results["moments"].n_ss


def test_lorentzian_fit_recovers_amplitude():
    x = np.linspace(-5, 5, 11)
    y = 3.0 / (1 + (2 * x / 1.5) ** 2)
    amp, resid = lorentzian_fit(x, y, 1.5)
    assert amp == pytest.approx(3.0, rel=1e-14)
    assert resid < 1e-14
    _, bad = lorentzian_fit(x, np.ones_like(x), 1.5)
    assert bad > 0.1

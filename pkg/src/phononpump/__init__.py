"""Phonon pumping by a modulated ultrastrong-coupling vacuum.

Simulation engine for a cavity in ultrastrong coupling with a qubit or a
second resonator, plus a mechanical mirror driven by the cavity's virtual
photons when the matter frequency is modulated.
"""

from ._kernels import active_backend, available_backends, use_backend
from .dynamics import (MomentState, Trajectory, dressed_positive_operators,
                       evolve_closed_full, evolve_closed_usc, evolve_effective_moments,
                       evolve_lindblad, product_ground_state)
from .errors import (AccuracyError, ConfigError, ConvergenceError, CutoffLeakError,
                     DegenerateGroundStateError, DivergenceError, InvalidArgumentError,
                     OrderingError, PhononPumpError)
from .hilbert import (DensityMatrix, Operator, PureState, SpaceLayout, destroy, embed,
                      expectation, fock_state, thermal_state)
from .models import (CircuitParams, DissipationParams, MatterKind, ModulationShape,
                     SystemParams, build_full_hamiltonian, build_optomech_hamiltonian,
                     build_usc_hamiltonian, displacement_beta, lambda_from_capacitances,
                     nth_from_temperature, pressure_operator)
from .steadystate import (SteadyStateResult, analytic_steady_state, floquet_fixed_point,
                          moment_limit_cycle, sweep)
from .tolerances import TOL
from .vacuum import (FourierSpectrum, fourier_components, ground_state_at,
                     pressure_spectrum, radiation_pressure, track_ground_state)

__version__ = "0.1.0"

"""Hamiltonians of the cavity-matter-mirror system.

All frequencies are angular frequencies in one arbitrary inverse-time unit;
nothing in this module assumes Hz, GHz or seconds. The only SI-aware helper
is :func:`nth_from_temperature`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields, replace

import numpy as np
from scipy import constants

from .errors import InvalidArgumentError
from .hilbert import Operator, SpaceLayout, destroy, embed, identity, pauli_lowering


class MatterKind(str, enum.Enum):
    QUBIT = "qubit"
    BOSON = "boson"
    KERR_BOSON = "kerr_boson"


class ModulationShape(str, enum.Enum):
    RAISED_COSINE = "raised_cosine"
    SINE = "sine"


FREQUENCY_FIELDS = ("omega_a", "omega_sigma", "omega_b", "omega_d", "lambda0", "g",
                    "delta_omega", "chi")


@dataclass(frozen=True)
class SystemParams:
    """Frequencies, couplings and model selectors of the tripartite system.

    ``lambda0`` is the light-matter coupling (its value at zero modulation
    when ``time_dependent_lambda`` is set). ``xi`` weights the counter-rotating
    terms: 1 is the Rabi model, 0 the Jaynes-Cummings model.
    """

    omega_a: float = 1.0
    omega_sigma: float = 1.0
    omega_b: float = 1e-3
    omega_d: float = 1e-3
    lambda0: float = 0.5
    g: float = 0.0
    delta_omega: float = 0.0
    chi: float = 0.0
    xi: float = 1.0
    matter_kind: MatterKind = MatterKind.QUBIT
    modulation_shape: ModulationShape = ModulationShape.RAISED_COSINE
    time_dependent_lambda: bool = False
    cavity_cutoff: int = 15
    matter_cutoff: int = 10
    phonon_cutoff: int = 30

    def __post_init__(self):
        object.__setattr__(self, "matter_kind", MatterKind(self.matter_kind))
        object.__setattr__(self, "modulation_shape",
                           ModulationShape(self.modulation_shape))
        for name in FREQUENCY_FIELDS:
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise InvalidArgumentError(f"{name} must be finite and >= 0, got {value}")
        if not 0.0 <= self.xi <= 1.0:
            raise InvalidArgumentError(f"xi must lie in [0, 1], got {self.xi}")
        if self.time_dependent_lambda:
            if self.modulation_shape is not ModulationShape.SINE:
                raise InvalidArgumentError(
                    "time_dependent_lambda requires modulation_shape='sine'")
            if self.matter_kind is MatterKind.QUBIT:
                raise InvalidArgumentError(
                    "time_dependent_lambda requires a bosonic matter mode")
        for name in ("cavity_cutoff", "matter_cutoff", "phonon_cutoff"):
            if int(getattr(self, name)) < 2:
                raise InvalidArgumentError(f"{name} must be >= 2")

    def with_(self, **changes) -> "SystemParams":
        return replace(self, **changes)

    def scaled(self, factor: float) -> "SystemParams":
        """Multiply every frequency-valued field by ``factor``."""
        return replace(self, **{k: getattr(self, k) * factor for k in FREQUENCY_FIELDS})

    @property
    def matter_dim(self) -> int:
        return 2 if self.matter_kind is MatterKind.QUBIT else int(self.matter_cutoff)

    @property
    def drive_period(self) -> float:
        if self.omega_d <= 0:
            raise InvalidArgumentError("omega_d must be > 0 for a periodic drive")
        return 2 * math.pi / self.omega_d

    def usc_layout(self) -> SpaceLayout:
        return SpaceLayout((("cavity", int(self.cavity_cutoff)),
                            ("matter", self.matter_dim)))

    def full_layout(self) -> SpaceLayout:
        return SpaceLayout((("cavity", int(self.cavity_cutoff)),
                            ("matter", self.matter_dim),
                            ("phonon", int(self.phonon_cutoff))))


@dataclass(frozen=True)
class DissipationParams:
    """Phonon bath rates and the optional dressed USC loss rates."""

    gamma_b: float = 0.0
    gamma_D: float = 0.0
    n_th: float = 0.0
    gamma_a: float = 0.0
    gamma_sigma: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not math.isfinite(value) or value < 0:
                raise InvalidArgumentError(f"{f.name} must be finite and >= 0, got {value}")

    def with_(self, **changes) -> "DissipationParams":
        return replace(self, **changes)

    def scaled(self, factor: float) -> "DissipationParams":
        return replace(self, gamma_b=self.gamma_b * factor, gamma_D=self.gamma_D * factor,
                       gamma_a=self.gamma_a * factor,
                       gamma_sigma=self.gamma_sigma * factor)


@dataclass(frozen=True)
class CircuitParams:
    C_a: float
    C_sigma: float
    C_c: float
    omega_a: float
    omega_sigma: float


def modulation(p: SystemParams, t: float) -> float:
    """Shift of the matter frequency at time ``t`` (``Omega_sigma(t)``)."""
    if p.modulation_shape is ModulationShape.RAISED_COSINE:
        return 0.5 * p.delta_omega * (1.0 + math.cos(p.omega_d * t))
    return p.delta_omega * math.sin(p.omega_d * t)


def coupling(p: SystemParams, t: float) -> float:
    """Light-matter coupling at time ``t``."""
    if not p.time_dependent_lambda:
        return p.lambda0
    if p.omega_sigma <= 0:
        raise InvalidArgumentError("time-dependent coupling needs omega_sigma > 0")
    arg = 1.0 + p.delta_omega * math.sin(p.omega_d * t) / p.omega_sigma
    if arg < 0:
        raise InvalidArgumentError(
            f"modulation too deep: 1 + delta_omega sin(omega_d t)/omega_sigma = {arg:.3g} < 0")
    return p.lambda0 * math.sqrt(arg)


def _matter_lowering(p: SystemParams) -> Operator:
    if p.matter_kind is MatterKind.QUBIT:
        return pauli_lowering("matter")
    return destroy(p.matter_dim, "matter")


@dataclass(frozen=True)
class UscOperators:
    """Time-independent pieces of the cavity-matter Hamiltonian.

    ``H(t) = static + modulation(t) * matter_number + coupling(t) * interaction``
    where ``static`` already holds ``omega_sigma * matter_number`` and the Kerr
    term.
    """

    layout: SpaceLayout
    a: Operator
    c: Operator
    static: Operator
    matter_number: Operator
    rotating: Operator
    counter_rotating: Operator
    interaction: Operator
    pressure: Operator
    x_quadrature: Operator
    matter_quadrature: Operator

    def hamiltonian(self, p: SystemParams, t: float) -> Operator:
        return (self.static + self.matter_number * modulation(p, t)
                + self.interaction * coupling(p, t))

    def hamiltonian_parts(self, p: SystemParams):
        """Real dense matrices ``(static, matter_number, interaction)``."""
        return (self.static.dense().real, self.matter_number.dense().real,
                self.interaction.dense().real)


def usc_operators(p: SystemParams) -> UscOperators:
    layout = p.usc_layout()
    a = embed(destroy(int(p.cavity_cutoff), "cavity"), layout, "cavity")
    c = embed(_matter_lowering(p), layout, "matter")
    ad, cd = a.dag(), c.dag()
    nc = cd @ c
    static = (ad @ a) * p.omega_a + nc * p.omega_sigma
    if p.matter_kind is MatterKind.KERR_BOSON:
        static = static + (cd @ cd @ c @ c) * p.chi
    rotating = a @ cd + ad @ c
    counter = a @ c + ad @ cd
    return UscOperators(
        layout=layout, a=a, c=c, static=static, matter_number=nc,
        rotating=rotating, counter_rotating=counter,
        interaction=rotating + counter * p.xi,
        pressure=(ad @ a) * 2.0 + a @ a + ad @ ad,
        x_quadrature=a + ad, matter_quadrature=c + cd)


def build_usc_hamiltonian(p: SystemParams, t: float) -> Operator:
    """Cavity-matter Hamiltonian ``H_R + H_M(t)`` at time ``t``.

    ``omega_a a^dag a + [omega_sigma + Omega_sigma(t)] c^dag c
    + lambda(t) [(a c^dag + a^dag c) + xi (a c + a^dag c^dag)]``, plus
    ``chi c^dag c^dag c c`` for a Kerr matter mode. ``c`` is the qubit
    lowering operator for ``matter_kind='qubit'``.
    """
    return usc_operators(p).hamiltonian(p, t)


def pressure_operator(p: SystemParams) -> Operator:
    """``2 a^dag a + a^2 + a^dag^2`` on the cavity-matter layout."""
    return usc_operators(p).pressure


def parity_operator(p: SystemParams) -> Operator:
    """``exp[i pi (a^dag a + c^dag c)]`` on the cavity-matter layout."""
    layout = p.usc_layout()
    na = np.arange(layout.dims[0])
    nm = np.arange(layout.dims[1])
    signs = np.where((na[:, None] + nm[None, :]) % 2 == 0, 1.0, -1.0).ravel()
    return Operator(layout, np.diag(signs))


def build_optomech_hamiltonian(p: SystemParams, displaced: bool = True) -> Operator:
    """Mirror Hamiltonian on the cavity-matter-phonon layout.

    Without displacement: ``omega_b b^dag b + (g/2)(a + a^dag)^2 (b + b^dag)``.
    With ``displaced=True`` the static ``(g/2)(b + b^dag)`` term is removed by
    the mirror displacement ``beta = g / (2 omega_b)`` and the O(g^2)
    remainders are dropped.
    """
    layout = p.full_layout()
    a = embed(destroy(int(p.cavity_cutoff), "cavity"), layout, "cavity")
    b = embed(destroy(int(p.phonon_cutoff), "phonon"), layout, "phonon")
    ad, bd = a.dag(), b.dag()
    photon_part = (ad @ a) * 2.0 + a @ a + ad @ ad
    if not displaced:
        photon_part = photon_part + identity(layout)
    return (bd @ b) * p.omega_b + (photon_part @ (b + bd)) * (0.5 * p.g)


def build_full_hamiltonian(p: SystemParams, t: float, displaced: bool = True) -> Operator:
    """``H_R + H_M(t) + H_opt`` on the tripartite layout."""
    layout = p.full_layout()
    h_usc = build_usc_hamiltonian(p, t)
    dp = int(p.phonon_cutoff)
    mat = np.kron(h_usc.dense(), np.eye(dp))
    return Operator(layout, mat) + build_optomech_hamiltonian(p, displaced)


def displacement_beta(p: SystemParams) -> float:
    """Static mirror displacement ``g / (2 omega_b)``."""
    if p.omega_b <= 0:
        raise InvalidArgumentError("omega_b must be > 0")
    return p.g / (2.0 * p.omega_b)


def lambda_from_capacitances(c: CircuitParams) -> float:
    """Capacitive coupling of two resonators at zero modulation."""
    for name in ("C_a", "C_sigma", "C_c"):
        if not getattr(c, name) > 0:
            raise InvalidArgumentError(f"{name} must be > 0")
    if c.omega_a < 0 or c.omega_sigma < 0:
        raise InvalidArgumentError("frequencies must be >= 0")
    return (math.sqrt(c.omega_a * c.omega_sigma) * c.C_c
            / (2.0 * math.sqrt((c.C_a + c.C_c) * (c.C_sigma + c.C_c))))


def nth_from_temperature(omega: float, T: float) -> float:
    """Bose-Einstein occupation of a mode of angular frequency ``omega`` (rad/s)
    at temperature ``T`` (K)."""
    if not T > 0:
        raise InvalidArgumentError(f"temperature must be > 0, got {T}")
    if not omega > 0:
        raise InvalidArgumentError(f"omega must be > 0, got {omega}")
    x = constants.hbar * omega / (constants.k * T)
    return 1.0 / math.expm1(x)

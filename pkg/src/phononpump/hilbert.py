"""Composite Hilbert spaces of truncated bosonic modes and a qubit.

Basis ordering follows the Kronecker convention: the leftmost subsystem of a
:class:`SpaceLayout` is the slowest-varying index of the flattened vector.
For the tripartite system ``[cavity, matter, phonon]`` the flat index of
``|n_a, m, n_b>`` is ``(n_a * d_m + m) * d_b + n_b``.

The qubit basis is ``(g, e)``: index 0 is the ground state, so the qubit
lowering operator coincides with ``destroy(2)``.

Matrices are dense numpy arrays up to ``TOL.dense_dimension_limit`` and
``scipy.sparse`` CSR matrices above it.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgumentError
from .tolerances import TOL

LABELS = ("cavity", "matter", "phonon")


@dataclass(frozen=True)
class SpaceLayout:
    """Ordered list of ``(label, dimension)`` subsystems."""

    subsystems: tuple[tuple[str, int], ...]

    def __post_init__(self):
        subs = tuple((str(lab), int(dim)) for lab, dim in self.subsystems)
        object.__setattr__(self, "subsystems", subs)
        labels = [lab for lab, _ in subs]
        if not subs:
            raise InvalidArgumentError("layout needs at least one subsystem")
        if len(set(labels)) != len(labels):
            raise InvalidArgumentError(f"duplicate subsystem labels: {labels}")
        for lab, dim in subs:
            if lab not in LABELS:
                raise InvalidArgumentError(f"unknown subsystem label {lab!r}")
            if dim < 1:
                raise InvalidArgumentError(f"subsystem {lab!r} has dimension {dim}")

    @classmethod
    def of(cls, **dims: int) -> "SpaceLayout":
        """Build a layout from keyword arguments, preserving their order."""
        return cls(tuple(dims.items()))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lab for lab, _ in self.subsystems)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.subsystems)

    @property
    def dim(self) -> int:
        return prod(self.dims)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise InvalidArgumentError(
                f"label {label!r} not in layout {self.labels}") from None

    def dim_of(self, label: str) -> int:
        return self.dims[self.index(label)]


def _freeze(matrix):
    if sp.issparse(matrix):
        return matrix.tocsr()
    arr = np.array(matrix, dtype=complex)
    arr.setflags(write=False)
    return arr


def _as_dense(matrix) -> np.ndarray:
    return matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix)


class Operator:
    """A square complex matrix acting on a :class:`SpaceLayout`.

    Instances are immutable; arithmetic returns new operators.
    """

    __slots__ = ("layout", "matrix")

    def __init__(self, layout: SpaceLayout, matrix, hermitian: bool = False):
        n = layout.dim
        if matrix.shape != (n, n):
            raise InvalidArgumentError(
                f"matrix shape {matrix.shape} does not match layout dimension {n}")
        if not sp.issparse(matrix) and n > TOL.dense_dimension_limit:
            matrix = sp.csr_matrix(matrix)
        object.__setattr__(self, "layout", layout)
        object.__setattr__(self, "matrix", _freeze(matrix))
        if hermitian:
            err = self.hermiticity_error()
            if err > TOL.hermitian:
                raise InvalidArgumentError(
                    f"operator flagged Hermitian but max|M - M^dag| = {err:.3e}")

    def __setattr__(self, name, value):
        raise AttributeError("Operator is immutable")

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.matrix)

    def dense(self) -> np.ndarray:
        return _as_dense(self.matrix)

    def dag(self) -> "Operator":
        return Operator(self.layout, self.matrix.conj().T)

    def hermiticity_error(self) -> float:
        diff = self.matrix - self.matrix.conj().T
        if sp.issparse(diff):
            return float(abs(diff).max()) if diff.nnz else 0.0
        return float(np.max(np.abs(diff))) if diff.size else 0.0

    def _check(self, other: "Operator"):
        if self.layout != other.layout:
            raise InvalidArgumentError("operators live on different layouts")

    def __add__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.layout, self.matrix + other.matrix)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.layout, self.matrix - other.matrix)
        return NotImplemented

    def __neg__(self):
        return Operator(self.layout, -self.matrix)

    def __mul__(self, scalar):
        if np.isscalar(scalar):
            return Operator(self.layout, self.matrix * scalar)
        return NotImplemented

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.layout, self.matrix @ other.matrix)
        return NotImplemented

    def __repr__(self):
        kind = "sparse" if self.is_sparse else "dense"
        return f"Operator({self.layout.labels}, dim={self.layout.dim}, {kind})"


def commutator(x: Operator, y: Operator) -> Operator:
    return x @ y - y @ x


def single_layout(label: str, dim: int) -> SpaceLayout:
    return SpaceLayout(((label, dim),))


def destroy(cutoff: int, label: str = "cavity") -> Operator:
    """Bosonic annihilation operator truncated to ``cutoff`` Fock levels."""
    if int(cutoff) != cutoff or cutoff < 2:
        raise InvalidArgumentError(f"cutoff must be an integer >= 2, got {cutoff}")
    cutoff = int(cutoff)
    mat = np.diag(np.sqrt(np.arange(1, cutoff, dtype=float)), 1)
    return Operator(single_layout(label, cutoff), mat)


def pauli_lowering(label: str = "matter") -> Operator:
    """Qubit lowering operator in the ``(g, e)`` basis: ``[[0, 1], [0, 0]]``."""
    return Operator(single_layout(label, 2), np.array([[0.0, 1.0], [0.0, 0.0]]))


def identity(layout: SpaceLayout) -> Operator:
    n = layout.dim
    mat = sp.identity(n, dtype=complex, format="csr") if n > TOL.dense_dimension_limit \
        else np.eye(n)
    return Operator(layout, mat)


def embed(op: Operator, layout: SpaceLayout, target: str) -> Operator:
    """Kronecker embedding ``I x ... x op x ... x I`` into ``layout``."""
    if len(op.layout.subsystems) != 1:
        raise InvalidArgumentError("embed expects a single-subsystem operator")
    pos = layout.index(target)
    d_target = layout.dims[pos]
    if op.layout.dim != d_target:
        raise InvalidArgumentError(
            f"operator dimension {op.layout.dim} does not match "
            f"subsystem {target!r} of dimension {d_target}")
    left = prod(layout.dims[:pos])
    right = prod(layout.dims[pos + 1:])
    if layout.dim > TOL.dense_dimension_limit:
        mat = sp.kron(sp.kron(sp.identity(left), sp.csr_matrix(op.matrix)),
                      sp.identity(right), format="csr")
    else:
        mat = np.kron(np.kron(np.eye(left), op.dense()), np.eye(right))
    return Operator(layout, mat)


@dataclass(frozen=True)
class PureState:
    layout: SpaceLayout
    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.array(self.amplitudes, dtype=complex).ravel()
        if amp.shape != (self.layout.dim,):
            raise InvalidArgumentError(
                f"amplitude length {amp.size} does not match layout dimension "
                f"{self.layout.dim}")
        norm = np.linalg.norm(amp)
        if abs(norm - 1.0) > TOL.state_norm:
            raise InvalidArgumentError(f"state norm {norm!r} differs from 1")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @classmethod
    def normalized(cls, layout: SpaceLayout, amplitudes) -> "PureState":
        amp = np.asarray(amplitudes, dtype=complex)
        return cls(layout, amp / np.linalg.norm(amp))

    def to_density(self) -> "DensityMatrix":
        return DensityMatrix(self.layout, np.outer(self.amplitudes,
                                                   self.amplitudes.conj()))


@dataclass(frozen=True)
class DensityMatrix:
    layout: SpaceLayout
    matrix: np.ndarray

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=complex)
        n = self.layout.dim
        if mat.shape != (n, n):
            raise InvalidArgumentError(f"density matrix shape {mat.shape} != {(n, n)}")
        herm = np.max(np.abs(mat - mat.conj().T))
        if herm > TOL.density_hermitian:
            raise InvalidArgumentError(f"density matrix not Hermitian ({herm:.2e})")
        tr = np.trace(mat).real
        if abs(tr - 1.0) > TOL.density_trace:
            raise InvalidArgumentError(f"density matrix trace {tr!r} differs from 1")
        lo = np.linalg.eigvalsh(0.5 * (mat + mat.conj().T))[0]
        if lo < -TOL.density_positivity:
            raise InvalidArgumentError(f"density matrix has eigenvalue {lo:.3e} < 0")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)


def fock_state(layout: SpaceLayout, occupations: Sequence[int]) -> PureState:
    """Product Fock state ``|n_1, n_2, ...>`` in layout order."""
    if len(occupations) != len(layout.dims):
        raise InvalidArgumentError("one occupation per subsystem required")
    for n, d in zip(occupations, layout.dims):
        if not 0 <= n < d:
            raise InvalidArgumentError(f"occupation {n} outside [0, {d})")
    amp = np.zeros(layout.dim, dtype=complex)
    amp[np.ravel_multi_index(tuple(occupations), layout.dims)] = 1.0
    return PureState(layout, amp)


def thermal_state(cutoff: int, n_th: float, label: str = "phonon") -> DensityMatrix:
    """Bose-Einstein state truncated to ``cutoff`` levels and renormalized."""
    if n_th < 0:
        raise InvalidArgumentError("n_th must be non-negative")
    probs = np.zeros(cutoff)
    if n_th == 0:
        probs[0] = 1.0
    else:
        ratio = n_th / (1.0 + n_th)
        probs = ratio ** np.arange(cutoff)
        probs /= probs.sum()
    return DensityMatrix(single_layout(label, cutoff), np.diag(probs))


def expectation(op: Operator, state: PureState | DensityMatrix) -> complex:
    """``<psi|O|psi>`` for pure states and ``Tr[O rho]`` for density matrices."""
    if op.layout != state.layout:
        raise InvalidArgumentError("operator and state live on different layouts")
    if isinstance(state, PureState):
        psi = state.amplitudes
        return complex(np.vdot(psi, op.matrix @ psi))
    if isinstance(state, DensityMatrix):
        if op.is_sparse:
            return complex((op.matrix.multiply(state.matrix.T)).sum())
        return complex(np.sum(op.matrix * state.matrix.T))
    raise InvalidArgumentError(f"unsupported state type {type(state).__name__}")

"""Labeled tensor-product registers for the discrete degrees of freedom.

The protocol's discrete space is ``S_F (2) x M (3) x E (3) x A (2)``, extended
by the emitted qubits ``Q1 (2) x Q2 (2)`` once the friend opens her channel.
Basis conventions:

* spins and qubits: index 0 = ``|+>``, 1 = ``|->`` (sigma_z eigenstates)
* apparatus pointer ``M``: 0 = m0 (ready), 1 = m+, 2 = m-
* environment ``E``: 0 = eps0 (no record), 1 = eps+, 2 = eps-
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import qmath
from .errors import DomainError, LayoutError, NormalizationError, ProtocolOrderError

READY, REC_PLUS, REC_MINUS = 0, 1, 2

LAB_LAYOUT = (("S_F", 2), ("M", 3), ("E", 3), ("A", 2))
EMITTED = (("Q1", 2), ("Q2", 2))

NORM_TOL = 1e-12
SUPPORT_TOL = 1e-14


@dataclass(frozen=True)
class RegisterLayout:
    registers: tuple[tuple[str, int], ...]

    def __post_init__(self):
        regs = tuple((str(n), int(d)) for n, d in self.registers)
        names = [n for n, _ in regs]
        if len(set(names)) != len(names):
            raise LayoutError(f"duplicate register names in {names}")
        if any(d < 2 for _, d in regs):
            raise LayoutError("register dimensions must be >= 2")
        object.__setattr__(self, "registers", regs)

    @cached_property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.registers)

    @cached_property
    def dims(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.registers)

    @cached_property
    def strides(self) -> tuple[int, ...]:
        """Flat-index stride of each register (row-major)."""
        return tuple(int(np.prod(self.dims[i + 1 :])) for i in range(len(self.dims)))

    @cached_property
    def size(self) -> int:
        return int(np.prod(self.dims))

    def position(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise LayoutError(f"unknown register {name!r}; layout has {self.names}") from None

    def dim(self, name: str) -> int:
        return self.dims[self.position(name)]

    def extended(self, *registers) -> "RegisterLayout":
        return RegisterLayout(self.registers + tuple(registers))

    def unravel(self, index) -> tuple:
        return np.unravel_index(index, self.dims)

    def __str__(self):
        return "[" + ", ".join(f"{n}:{d}" for n, d in self.registers) + "]"


@dataclass(frozen=True)
class DiscreteState:
    """Immutable pure state over a register layout.

    ``normalized=False`` marks an unnormalized branch (e.g. a projection that
    has not been renormalized); every other state has unit norm.
    """

    layout: RegisterLayout
    amplitudes: np.ndarray = field(repr=False)
    normalized: bool = True

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).ravel()
        if amps.size != self.layout.size:
            raise LayoutError(f"{amps.size} amplitudes for layout {self.layout} of size {self.layout.size}")
        if self.normalized and abs(np.vdot(amps, amps).real - 1.0) > NORM_TOL:
            raise NormalizationError(f"state norm^2 = {np.vdot(amps, amps).real!r}")
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    @property
    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.layout.dims)

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def normalize(self) -> "DiscreteState":
        return DiscreteState(self.layout, self.amplitudes / np.sqrt(self.norm_squared()))

    def support(self, tol: float = SUPPORT_TOL) -> np.ndarray:
        return np.flatnonzero(np.abs(self.amplitudes) > tol)

    def density_matrix(self) -> np.ndarray:
        return qmath.ket_to_dm(self.amplitudes)

    def __str__(self):
        terms = []
        for i in self.support():
            labels = ",".join(str(v) for v in self.layout.unravel(i))
            terms.append(f"{self.amplitudes[i]:.4g}|{labels}>")
        return f"{self.layout}: " + " + ".join(terms)


@dataclass(frozen=True)
class MeasurementOutcome:
    register: str
    basis: str
    index: int
    probability: float

    @property
    def value(self) -> int:
        return +1 if self.index == 0 else -1


def basis_state(layout: RegisterLayout, **values) -> DiscreteState:
    """Computational basis state; registers not named default to index 0."""
    idx = tuple(int(values.pop(n, 0)) for n in layout.names)
    if values:
        raise LayoutError(f"unknown registers {sorted(values)}")
    amps = np.zeros(layout.dims, dtype=complex)
    amps[idx] = 1.0
    return DiscreteState(layout, amps)


def prepare_initial(alpha: complex, beta: complex) -> DiscreteState:
    """alpha|+, m0, eps0, +> + beta|-, m0, eps0, -> on [S_F, M, E, A]."""
    if abs(abs(alpha) ** 2 + abs(beta) ** 2 - 1.0) > NORM_TOL:
        raise NormalizationError(f"|alpha|^2 + |beta|^2 = {abs(alpha) ** 2 + abs(beta) ** 2!r}, expected 1")
    layout = RegisterLayout(LAB_LAYOUT)
    amps = np.zeros(layout.dims, dtype=complex)
    amps[0, READY, READY, 0] = alpha
    amps[1, READY, READY, 1] = beta
    return DiscreteState(layout, amps)


def _moved(state: DiscreteState, names) -> tuple[np.ndarray, list[int]]:
    pos = [state.layout.position(n) for n in names]
    return np.moveaxis(state.tensor, pos, list(range(len(pos)))), pos


def friend_measure_and_reset(state: DiscreteState, s0: np.ndarray = qmath.KET_PLUS) -> DiscreteState:
    """Friend's z measurement followed by the reset of spin and apparatus.

    Applies the partial isometry |+-, m0, eps0> -> |s0, m0, eps+-> on
    S_F x M x E. The environment keeps the record; nothing is collapsed.
    """
    s0 = np.asarray(s0, dtype=complex)
    if not qmath.is_normalized(s0):
        raise NormalizationError("reset state s0 must be normalized")
    t, pos = _moved(state, ("S_F", "M", "E"))
    outside = t.copy()
    outside[:, READY, READY] = 0
    if np.max(np.abs(outside), initial=0.0) > SUPPORT_TOL:
        raise DomainError("friend measurement needs M in m0 and E in eps0 on every branch")
    out = np.zeros_like(t)
    for spin, record in ((0, REC_PLUS), (1, REC_MINUS)):
        out[:, READY, record] = s0.reshape((2,) + (1,) * (t.ndim - 3)) * t[spin, READY, READY]
    out = np.moveaxis(out, list(range(3)), pos)
    return DiscreteState(state.layout, out, normalized=state.normalized)


def project(state: DiscreteState, register: str, vector: np.ndarray) -> DiscreteState:
    """Unnormalized (|v><v| on ``register``) applied to ``state``."""
    v = np.asarray(vector, dtype=complex)
    t, pos = _moved(state, (register,))
    if v.shape != (t.shape[0],):
        raise LayoutError(f"vector of length {v.size} for register {register!r} of dim {t.shape[0]}")
    coeff = np.tensordot(v.conj(), t, axes=(0, 0))
    out = np.moveaxis(np.multiply.outer(v, coeff), 0, pos[0])
    return DiscreteState(state.layout, out, normalized=False)


def measurement_branches(state: DiscreteState, register: str, basis) -> list[tuple[float, DiscreteState]]:
    """Born probabilities and normalized post-measurement states, in basis order.

    Outcomes with zero probability are returned with ``None`` as the state.
    """
    b = qmath.check_basis(basis, state.layout.dim(register))
    total = state.norm_squared()
    out = []
    for k in range(b.shape[1]):
        branch = project(state, register, b[:, k])
        p = branch.norm_squared() / total
        out.append((p, branch.normalize() if p > 0 else None))
    return out


def choose(probabilities, u: float) -> int:
    """Cumulative-probability inversion; ties go to the lower basis index."""
    cum = np.cumsum(probabilities)
    k = int(np.searchsorted(cum, u * cum[-1], side="right"))
    return min(k, len(cum) - 1)


def measure_projective(state: DiscreteState, register: str, basis, rng, basis_label: str = "custom"):
    """Sample a projective measurement of ``register`` in ``basis``.

    ``rng`` is anything with a ``random()`` method returning a float in [0, 1).
    Returns ``(MeasurementOutcome, post_state)``.
    """
    branches = measurement_branches(state, register, basis)
    probs = [p for p, _ in branches]
    k = choose(probs, rng.random())
    outcome = MeasurementOutcome(register, basis_label, k, probs[k])
    return outcome, branches[k][1]


def append_qubits(state: DiscreteState, q1: np.ndarray, q2: np.ndarray) -> DiscreteState:
    """Tensor two fresh qubits onto the state as registers Q1 and Q2."""
    _check_unemitted(state)
    q1 = np.asarray(q1, dtype=complex)
    q2 = np.asarray(q2, dtype=complex)
    if not (qmath.is_normalized(q1) and qmath.is_normalized(q2)):
        raise NormalizationError("emitted qubit states must be normalized")
    layout = state.layout.extended(*EMITTED)
    return DiscreteState(layout, np.kron(state.amplitudes, np.kron(q1, q2)), normalized=state.normalized)


def _check_unemitted(state: DiscreteState):
    if "Q1" in state.layout.names or "Q2" in state.layout.names:
        raise LayoutError("qubits have already been emitted")


def _check_record_support(state: DiscreteState, error=DomainError):
    t, _ = _moved(state, ("E",))
    if np.max(np.abs(t[READY])) > SUPPORT_TOL:
        raise error("environment still has support on eps0; the friend has not measured yet")


def controlled_emit(state: DiscreteState) -> DiscreteState:
    """Append Q1, Q2 copying the environment record: eps+- -> eps+- |+-,+->."""
    _check_unemitted(state)
    _check_record_support(state)
    t, pos = _moved(state, ("E",))
    out = np.zeros(t.shape + (2, 2), dtype=complex)
    out[REC_PLUS, ..., 0, 0] = t[REC_PLUS]
    out[REC_MINUS, ..., 1, 1] = t[REC_MINUS]
    out = np.moveaxis(out, 0, pos[0])
    layout = state.layout.extended(*EMITTED)
    return DiscreteState(layout, out, normalized=state.normalized)


def reduced_dm(state: DiscreteState, names) -> np.ndarray:
    """Density matrix on the named registers (ordered as in the layout)."""
    names = list(names)
    if not names:
        raise LayoutError("need at least one register to keep")
    keep = [state.layout.position(n) for n in names]
    rho = qmath.pure_partial_trace(state.amplitudes, state.layout.dims, keep)
    return rho / np.trace(rho).real


def record_vector(state: DiscreteState):
    """The friend's definite record a|eps+> + b|eps-> as (a, b), or ``None`` if mixed.

    Raises ``ProtocolOrderError`` while the environment still holds eps0.
    """
    _check_record_support(state, error=ProtocolOrderError)
    rho = reduced_dm(state, ["E"])[1:, 1:]
    rho = rho / np.trace(rho).real
    # rho is a reduced state by construction; skip the density-matrix checks of qmath.purity
    if np.sum(np.abs(rho) ** 2) <= 1 - 1e-9:
        return None
    return qmath.leading_eigenvector(rho)[1]

"""Gaussian pointers for the weak measurement of the emitted qubits.

A pointer wavefunction is phi_a(x) = (2 pi w^2)^(-1/4) exp(-(x - a)^2 / (4 w^2)),
so |phi_a|^2 is a normal density with mean a and standard deviation w. A
:class:`HybridState` is a finite superposition of discrete basis states, each
carrying a product of two such Gaussians. Two identities make everything
closed-form:

    <phi_a|phi_b>   = exp(-(a - b)^2 / (8 w^2))
    <phi_a|X|phi_b> = (a + b) / 2 * <phi_a|phi_b>

and the product phi_a(x) phi_b(x) equals <phi_a|phi_b> times a normal
density centred at (a + b) / 2 with standard deviation w.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import ndtr, ndtri

from . import qmath
from .errors import LayoutError, SingularPostSelectionError, WignerFramesError
from .registers import DiscreteState, RegisterLayout

SINGULAR_TOL = 1e-14
MERGE_DECIMALS = 12
# Duplicate terms are harmless in every sum; merging only bounds growth.
MERGE_ABOVE = 32


def gaussian_overlap(a, b, w):
    return np.exp(-((np.asarray(a) - np.asarray(b)) ** 2) / (8.0 * w**2))


def gaussian_position_element(a, b, w):
    return 0.5 * (np.asarray(a) + np.asarray(b)) * gaussian_overlap(a, b, w)


def gaussian_wavefunction(x, a, w):
    return (2 * np.pi * w**2) ** -0.25 * np.exp(-((np.asarray(x) - a) ** 2) / (4.0 * w**2))


def weak_value(pre: np.ndarray, post: np.ndarray, observable: np.ndarray) -> complex:
    """<post|O|pre> / <post|pre>."""
    pre = np.asarray(pre, dtype=complex)
    post = np.asarray(post, dtype=complex)
    overlap = np.vdot(post, pre)
    if abs(overlap) <= 1e-12:
        raise SingularPostSelectionError("pre- and post-selected states are orthogonal")
    return complex(np.vdot(post, np.asarray(observable) @ pre) / overlap)


@dataclass(frozen=True)
class GaussianTerm:
    amp: complex
    shift1: float
    shift2: float


@dataclass(frozen=True)
class PostSelection:
    theta1: float
    theta2: float
    direction: int = +1

    def __post_init__(self):
        for th in (self.theta1, self.theta2):
            if not 0.0 <= th <= np.pi:
                raise ValueError(f"post-selection angle {th!r} outside [0, pi]")
        if self.direction != +1:
            raise ValueError("only the positive outcome is filtered")


@dataclass(frozen=True)
class HybridState:
    """Discrete registers tensored with two Gaussian pointers.

    Term ``t`` is ``amp[t] |index[t]> phi_{shift1[t]} phi_{shift2[t]}``.
    States may be unnormalized (post-selected branches); norms and moments
    always use the Gaussian-overlap inner product.
    """

    layout: RegisterLayout
    index: np.ndarray = field(repr=False)
    amp: np.ndarray = field(repr=False)
    shift1: np.ndarray = field(repr=False)
    shift2: np.ndarray = field(repr=False)
    width: float = 1.0

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError(f"pointer width must be positive, got {self.width!r}")
        n = None
        for name, dtype in (("index", np.int64), ("amp", complex), ("shift1", float), ("shift2", float)):
            arr = getattr(self, name)
            if not (isinstance(arr, np.ndarray) and arr.dtype == dtype and arr.ndim == 1):
                arr = np.asarray(arr, dtype=dtype).ravel()
            if n is not None and arr.size != n:
                raise LayoutError("term arrays must have equal length")
            n = arr.size
            object.__setattr__(self, name, arr)

    @classmethod
    def _trusted(cls, layout, index, amp, shift1, shift2, width) -> "HybridState":
        """Build from arrays already in canonical form, skipping validation."""
        h = object.__new__(cls)
        for name, value in zip(
            ("layout", "index", "amp", "shift1", "shift2", "width"), (layout, index, amp, shift1, shift2, width)
        ):
            object.__setattr__(h, name, value)
        return h

    @property
    def n_terms(self) -> int:
        return self.index.size

    def terms(self):
        for t in range(self.n_terms):
            yield int(self.index[t]), GaussianTerm(complex(self.amp[t]), float(self.shift1[t]), float(self.shift2[t]))

    def _pair_weights(self) -> np.ndarray:
        same = self.index[:, None] == self.index[None, :]
        return np.conj(self.amp)[:, None] * self.amp[None, :] * same

    @cached_property
    def _gram(self) -> np.ndarray:
        d1 = self.shift1[:, None] - self.shift1[None, :]
        d2 = self.shift2[:, None] - self.shift2[None, :]
        g = self._pair_weights() * np.exp(-(d1 * d1 + d2 * d2) / (8.0 * self.width**2))
        g.flags.writeable = False
        return g

    def gram(self) -> np.ndarray:
        """Weighted pointer overlaps of every term pair (read-only, cached)."""
        return self._gram

    @cached_property
    def _norm2(self) -> float:
        return float(np.sum(self._gram).real)

    def norm_squared(self) -> float:
        return self._norm2

    def scaled(self, factor: complex) -> "HybridState":
        return HybridState._trusted(self.layout, self.index, self.amp * factor, self.shift1, self.shift2, self.width)

    def normalize(self) -> "HybridState":
        n2 = self.norm_squared()
        if n2 <= SINGULAR_TOL:
            raise SingularPostSelectionError(f"branch norm^2 {n2:.3e} too small to normalize")
        return self.scaled(1 / np.sqrt(n2))


def _merged(layout, index, amp, s1, s2, width) -> HybridState:
    """Combine terms sharing a discrete index and both shifts; drop zero amplitudes."""
    acc: dict = {}
    keys = zip(index.tolist(), np.round(s1, MERGE_DECIMALS).tolist(), np.round(s2, MERGE_DECIMALS).tolist())
    for t, key in enumerate(keys):
        if key in acc:
            acc[key][0] += amp[t]
        else:
            acc[key] = [amp[t], s1[t], s2[t]]
    items = [(k[0], *v) for k, v in acc.items() if v[0] != 0]
    if not items:
        empty = np.zeros(0)
        return HybridState(layout, empty.astype(np.int64), empty, empty, empty, width)
    idx, a, x1, x2 = zip(*items)
    return HybridState(layout, idx, a, x1, x2, width)


def attach_pointers(state: DiscreteState, w: float) -> HybridState:
    """Give every nonzero discrete amplitude a pair of unshifted pointers."""
    if not w > 0:
        raise ValueError(f"pointer width must be positive, got {w!r}")
    idx = np.flatnonzero(state.amplitudes)
    zeros = np.zeros(idx.size)
    return HybridState(state.layout, idx, state.amplitudes[idx], zeros, zeros, float(w))


def _register_values(h: HybridState, register: str) -> np.ndarray:
    return np.asarray(h.layout.unravel(h.index)[h.layout.position(register)])


def couple(h: HybridState, qubit: str, pointer: int, g: float) -> HybridState:
    """Apply exp(-i g sigma_z P) between ``qubit`` and pointer 1 or 2.

    sigma_z is diagonal in the stored basis, so the coupling translates the
    pointer by +g on |+> components and -g on |-> components. Exact for any g.
    """
    if h.layout.dim(qubit) != 2:
        raise LayoutError(f"register {qubit!r} is not a qubit")
    eig = np.where(_register_values(h, qubit) == 0, 1.0, -1.0)
    if pointer == 1:
        return HybridState._trusted(h.layout, h.index, h.amp, h.shift1 + g * eig, h.shift2, h.width)
    if pointer == 2:
        return HybridState._trusted(h.layout, h.index, h.amp, h.shift1, h.shift2 + g * eig, h.width)
    raise ValueError(f"pointer must be 1 or 2, got {pointer!r}")


def project_register(h: HybridState, register: str, vector: np.ndarray) -> HybridState:
    """Apply |v><v| on one discrete register; the result is unnormalized."""
    v = np.asarray(vector, dtype=complex)
    pos = h.layout.position(register)
    dim = h.layout.dims[pos]
    if v.shape != (dim,):
        raise LayoutError(f"vector of length {v.size} for register {register!r} of dim {dim}")
    stride = h.layout.strides[pos]
    old = (h.index // stride) % dim
    base = h.index - old * stride
    coeff = h.amp * v.conj()[old]
    rs = [r for r in range(dim) if v[r] != 0]
    idx = np.concatenate([base + r * stride for r in rs])
    amp = np.concatenate([coeff * v[r] for r in rs])
    s1 = np.concatenate([h.shift1] * len(rs))
    s2 = np.concatenate([h.shift2] * len(rs))
    if idx.size > MERGE_ABOVE:
        return _merged(h.layout, idx, amp, s1, s2, h.width)
    return HybridState._trusted(h.layout, idx, amp, s1, s2, h.width)


def measurement_branches(h: HybridState, register: str, basis) -> list[tuple[float, HybridState]]:
    """Born probabilities and normalized branches for a discrete register measurement."""
    b = qmath.check_basis(basis, h.layout.dim(register))
    total = h.norm_squared()
    out = []
    for k in range(b.shape[1]):
        branch = project_register(h, register, b[:, k])
        p = branch.norm_squared() / total
        out.append((p, branch.scaled(1 / np.sqrt(p * total)) if p > 0 else None))
    return out


def postselect_qubits(h: HybridState, ps: PostSelection) -> tuple[HybridState, float]:
    """Filter the +theta outcomes on Q1 and Q2; returns the branch and its weight."""
    branch = project_register(h, "Q1", qmath.theta_ket(ps.theta1))
    branch = project_register(branch, "Q2", qmath.theta_ket(ps.theta2))
    return branch, branch.norm_squared() / h.norm_squared()


def joint_position_moment(h: HybridState) -> float:
    """<psi|X1 X2|psi> with no renormalization (success-weighted for a post-selected branch)."""
    mid1 = 0.5 * (h.shift1[:, None] + h.shift1[None, :])
    mid2 = 0.5 * (h.shift2[:, None] + h.shift2[None, :])
    return float(np.sum(h.gram() * mid1 * mid2).real)


def position_moment(h: HybridState, pointer: int) -> float:
    """<psi|X_i|psi> for one pointer, unnormalized."""
    w = h.width
    s, other = (h.shift1, h.shift2) if pointer == 1 else (h.shift2, h.shift1)
    m = (
        h._pair_weights()
        * gaussian_position_element(s[:, None], s[None, :], w)
        * gaussian_overlap(other[:, None], other[None, :], w)
    )
    return float(np.sum(m).real)


def normalized_position_moment(h: HybridState, success_prob: float | None = None) -> float:
    """Conditional <X1 X2> given post-selection success."""
    p = h.norm_squared() if success_prob is None else success_prob
    if p < SINGULAR_TOL:
        raise SingularPostSelectionError(f"post-selection probability {p:.3e} is too small")
    return joint_position_moment(h) / p


def _components(h: HybridState):
    """Joint position density as sum_j K_j N(x1; m_j, w) N(x2; n_j, w)."""
    w = h.width
    k = (
        h._pair_weights()
        * gaussian_overlap(h.shift1[:, None], h.shift1[None, :], w)
        * gaussian_overlap(h.shift2[:, None], h.shift2[None, :], w)
    ).real.ravel()
    m = (0.5 * (h.shift1[:, None] + h.shift1[None, :])).ravel()
    n = (0.5 * (h.shift2[:, None] + h.shift2[None, :])).ravel()
    keys = np.stack([np.round(m, MERGE_DECIMALS), np.round(n, MERGE_DECIMALS)], axis=1)
    uniq, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    weights = np.zeros(len(uniq))
    np.add.at(weights, inverse.ravel(), k)
    return weights, m[first], n[first]


def position_density(h: HybridState, x1, x2) -> np.ndarray:
    """|psi(x1, x2)|^2 summed over discrete indices (unnormalized)."""
    amps = condition_amplitudes(h, x1, x2)
    return np.sum(np.abs(amps) ** 2, axis=-1)


def _normal_pdf(z):
    return np.exp(-0.5 * z * z) / np.sqrt(2 * np.pi)


def _invert_mixture_cdf(weights, means, w, u, tol=1e-13, max_iter=200):
    """Solve sum_j W_j Phi((x - m_j)/w) = u sum_j W_j for x, row by row.

    ``weights`` is (J,) or (S, J); the mixture is a nonnegative density even
    though individual weights may be negative (interference terms). Uses
    Newton steps kept inside a shrinking bisection bracket.
    """
    u = np.asarray(u, dtype=float)
    weights = np.broadcast_to(np.asarray(weights, dtype=float), u.shape + (len(means),))
    total = weights.sum(axis=-1)
    if np.any(total <= 0):
        raise SingularPostSelectionError("pointer density has no mass")
    wn = weights / total[:, None]
    lo = np.full(u.shape, means.min() - 40 * w)
    hi = np.full(u.shape, means.max() + 40 * w)
    centre = wn @ means if wn.ndim == 1 else np.einsum("sj,j->s", wn, means)
    x = np.clip(centre + w * ndtri(u), lo, hi)
    active = np.ones(u.shape, dtype=bool)
    for _ in range(max_iter):
        xa = x[active]
        z = (xa[:, None] - means[None, :]) / w
        wa = wn[active]
        f = np.sum(wa * ndtr(z), axis=1) - u[active]
        dens = np.sum(wa * _normal_pdf(z), axis=1) / w
        la, ha = lo[active], hi[active]
        la = np.where(f < 0, xa, la)
        ha = np.where(f > 0, xa, ha)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            step = np.where(dens > 0, f / dens, np.inf)
        xn = xa - step
        bad = ~np.isfinite(xn) | (xn <= la) | (xn >= ha)
        xn = np.where(bad, 0.5 * (la + ha), xn)
        done = (np.abs(xn - xa) <= tol * w) | (ha - la <= tol * w) | (f == 0)
        lo[active], hi[active], x[active] = la, ha, np.where(f == 0, xa, xn)
        idx = np.flatnonzero(active)
        active[idx[done]] = False
        if not active.any():
            return x
    raise WignerFramesError("pointer sampling did not converge")


def sample_positions_batch(h: HybridState, u1, u2) -> tuple[np.ndarray, np.ndarray]:
    """Inverse-CDF sampling of (x1, x2) from |psi(x1, x2)|^2, interference included.

    x1 is drawn from its exact marginal, then x2 from the exact conditional
    given x1. Both CDFs are finite sums of normal CDFs. Deterministic in
    (u1, u2).
    """
    u1 = np.atleast_1d(np.asarray(u1, dtype=float))
    u2 = np.atleast_1d(np.asarray(u2, dtype=float))
    weights, m, n = _components(h)
    if weights.sum() <= SINGULAR_TOL:
        raise SingularPostSelectionError("cannot sample positions from a zero-norm branch")
    w = h.width
    x1 = _invert_mixture_cdf(weights, m, w, u1)
    cond = weights[None, :] * _normal_pdf((x1[:, None] - m[None, :]) / w)
    x2 = _invert_mixture_cdf(cond, n, w, u2)
    return x1, x2


def sample_positions(h: HybridState, rng) -> tuple[float, float]:
    """One (x1, x2) draw; ``rng`` provides ``random()``."""
    u1, u2 = rng.random(), rng.random()
    x1, x2 = sample_positions_batch(h, [u1], [u2])
    return float(x1[0]), float(x2[0])


def condition_amplitudes(h: HybridState, x1, x2):
    """Discrete amplitudes left after reading the pointers at (x1, x2).

    Returns (S, U) complex amplitudes over ``unique_indices(h)``, unnormalized.
    """
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    w = h.width
    terms = (
        h.amp[None, :]
        * gaussian_wavefunction(x1[:, None], h.shift1[None, :], w)
        * gaussian_wavefunction(x2[:, None], h.shift2[None, :], w)
    )
    uniq, inverse = np.unique(h.index, return_inverse=True)
    gather = np.zeros((h.n_terms, uniq.size))
    gather[np.arange(h.n_terms), inverse.ravel()] = 1.0
    return terms @ gather


def unique_indices(h: HybridState) -> np.ndarray:
    return np.unique(h.index)


def condition_on_positions(h: HybridState, x1: float, x2: float) -> DiscreteState:
    """Collapse the pointers at the read positions, leaving a normalized discrete state."""
    amps = condition_amplitudes(h, [x1], [x2])[0]
    full = np.zeros(h.layout.size, dtype=complex)
    full[unique_indices(h)] = amps
    n2 = np.vdot(full, full).real
    if n2 <= 0:
        raise SingularPostSelectionError("read positions have zero probability density")
    return DiscreteState(h.layout, full / np.sqrt(n2))

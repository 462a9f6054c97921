"""Dense complex linear algebra used by the simulator.

Vectors are 1-D complex ``ndarray``; operators and density matrices are 2-D.
The single-qubit basis is z-computational with ``|+>`` at index 0.
"""

from __future__ import annotations

from functools import reduce
from string import ascii_letters

import numpy as np

from .errors import BasisError, ContractError, LayoutError, NormalizationError

ALGEBRA_TOL = 1e-12
EIGEN_TOL = 1e-10

I2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)

KET_PLUS = np.array([1, 0], dtype=complex)
KET_MINUS = np.array([0, 1], dtype=complex)
KET_PLUS_X = np.array([1, 1], dtype=complex) / np.sqrt(2)
KET_MINUS_X = np.array([1, -1], dtype=complex) / np.sqrt(2)


def theta_ket(theta: float, sign: int = +1) -> np.ndarray:
    """Eigenvector of ``sigma_theta`` (n in the xz plane at angle theta from z).

    ``sign=+1`` gives cos(theta/2)|+> + sin(theta/2)|->, ``sign=-1`` the
    orthogonal partner -sin(theta/2)|+> + cos(theta/2)|->.
    """
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    if sign > 0:
        return np.array([c, s], dtype=complex)
    return np.array([-s, c], dtype=complex)


def theta_basis(theta: float) -> list[np.ndarray]:
    return [theta_ket(theta, +1), theta_ket(theta, -1)]


def sigma_theta(theta: float) -> np.ndarray:
    return np.cos(theta) * SIGMA_Z + np.sin(theta) * SIGMA_X


def kron(*factors):
    """Kronecker product of any number of vectors or matrices."""
    if not factors:
        raise ValueError("kron needs at least one operand")
    arrs = [np.asarray(f, dtype=complex) for f in factors]
    if any(a.size == 0 for a in arrs):
        raise ValueError("kron operands must be nonempty")
    return reduce(np.kron, arrs)


def dag(a: np.ndarray) -> np.ndarray:
    return np.conj(np.asarray(a)).T


def norm(v: np.ndarray) -> float:
    return float(np.linalg.norm(v))


def is_normalized(v: np.ndarray, tol: float = ALGEBRA_TOL) -> bool:
    return abs(np.vdot(v, v).real - 1.0) <= tol


def is_unitary(u: np.ndarray, tol: float = ALGEBRA_TOL) -> bool:
    u = np.asarray(u)
    return bool(np.max(np.abs(dag(u) @ u - np.eye(u.shape[1]))) <= tol)


def density_violations(rho: np.ndarray) -> list[str]:
    """Return the list of density-matrix invariants that ``rho`` breaks."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return ["not square"]
    problems = []
    if np.max(np.abs(rho - dag(rho))) > ALGEBRA_TOL:
        problems.append("not Hermitian")
    if abs(np.trace(rho) - 1.0) > ALGEBRA_TOL:
        problems.append(f"trace {np.trace(rho).real:.3e} != 1")
    herm = (rho + dag(rho)) / 2
    if np.min(np.linalg.eigvalsh(herm)) < -EIGEN_TOL:
        problems.append("not positive semidefinite")
    return problems


def is_density(rho: np.ndarray) -> bool:
    return not density_violations(rho)


def check_density(rho: np.ndarray) -> np.ndarray:
    problems = density_violations(rho)
    if problems:
        raise ContractError("not a density matrix: " + ", ".join(problems))
    return rho


def ket_to_dm(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    return np.outer(v, v.conj())


def projector(v: np.ndarray) -> np.ndarray:
    """|v><v| for a normalized ``v``."""
    v = np.asarray(v, dtype=complex)
    if not is_normalized(v):
        raise NormalizationError(f"projector needs a unit vector, |v|^2 = {np.vdot(v, v).real!r}")
    return ket_to_dm(v)


def expectation(op: np.ndarray, state: np.ndarray) -> complex:
    """<psi|op|psi> for a ket, Tr(rho op) for a density matrix."""
    state = np.asarray(state)
    if state.ndim == 1:
        return complex(np.vdot(state, op @ state))
    return complex(np.trace(state @ op))


def purity(rho: np.ndarray) -> float:
    check_density(rho)
    return float(np.sum(np.abs(rho) ** 2))


def partial_trace(rho: np.ndarray, layout, keep) -> np.ndarray:
    """Reduced density matrix on the factors ``keep`` of a product space.

    ``layout`` lists the factor dimensions; ``keep`` is an iterable of factor
    positions, returned in ascending order.
    """
    dims = [int(d) for d in layout]
    rho = np.asarray(rho, dtype=complex)
    total = int(np.prod(dims))
    if rho.shape != (total, total):
        raise LayoutError(f"rho has shape {rho.shape}, layout {dims} needs ({total}, {total})")
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise LayoutError(f"keep indices {keep} out of range for {len(dims)} factors")
    n = len(dims)
    if 2 * n > len(ascii_letters):
        raise LayoutError("too many factors")
    row = list(ascii_letters[:n])
    col = [row[i] if i not in keep else ascii_letters[n + i] for i in range(n)]
    out = [row[i] for i in keep] + [col[i] for i in keep]
    subscripts = "".join(row) + "".join(col) + "->" + "".join(out)
    reduced = np.einsum(subscripts, rho.reshape(dims + dims))
    d = int(np.prod([dims[i] for i in keep])) if keep else 1
    return reduced.reshape(d, d)


def pure_partial_trace(psi: np.ndarray, layout, keep) -> np.ndarray:
    """Reduced density matrix of a pure state without forming |psi><psi|."""
    dims = [int(d) for d in layout]
    psi = np.asarray(psi, dtype=complex)
    if psi.size != int(np.prod(dims)):
        raise LayoutError(f"state of size {psi.size} does not match layout {dims}")
    keep = sorted(set(int(k) for k in keep))
    rest = [i for i in range(len(dims)) if i not in keep]
    t = np.transpose(psi.reshape(dims), keep + rest)
    d = int(np.prod([dims[i] for i in keep])) if keep else 1
    m = t.reshape(d, -1)
    return m @ m.conj().T


def leading_eigenvector(rho: np.ndarray) -> tuple[float, np.ndarray]:
    """Largest eigenvalue of a Hermitian matrix and its eigenvector with a fixed phase.

    The phase is chosen so the largest-magnitude component is real positive.
    """
    vals, vecs = np.linalg.eigh((rho + dag(rho)) / 2)
    v = vecs[:, -1]
    k = int(np.argmax(np.abs(v)))
    v = v * (abs(v[k]) / v[k])
    return float(vals[-1]), v


def check_basis(basis, dim: int) -> np.ndarray:
    """Stack ``basis`` as columns after checking orthonormality and completeness."""
    vecs = [np.asarray(b, dtype=complex) for b in basis]
    if len(vecs) != dim or any(v.shape != (dim,) for v in vecs):
        raise BasisError(f"basis must contain {dim} vectors of length {dim}")
    b = np.stack(vecs, axis=1)
    if np.max(np.abs(dag(b) @ b - np.eye(dim))) > ALGEBRA_TOL:
        raise BasisError("basis vectors are not orthonormal")
    return b

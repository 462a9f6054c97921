"""Reference computations written without the package, used to freeze expected values.

Nothing here imports ``wignerframes``. The pointer oracle discretizes the
Gaussian wavefunctions on a grid and integrates with the trapezoid rule, so it
does not rely on any closed-form Gaussian identity.
"""

import itertools
import math

import numpy as np

GRID_POINTS = 4096
GRID_MARGIN = 8.0  # in units of w, beyond the extreme shifts


def brute_partial_trace(rho, dims, keep):
    """Partial trace by explicit summation over all index tuples."""
    dims = list(dims)
    keep = sorted(keep)
    drop = [i for i in range(len(dims)) if i not in keep]
    kd = [dims[i] for i in keep]
    out = np.zeros((int(np.prod(kd)),) * 2, dtype=complex)
    strides = [int(np.prod(dims[i + 1 :])) for i in range(len(dims))]

    def flat(idx):
        return sum(i * s for i, s in zip(idx, strides))

    kstr = [int(np.prod(kd[i + 1 :])) for i in range(len(kd))]
    for a in itertools.product(*[range(d) for d in kd]):
        for b in itertools.product(*[range(d) for d in kd]):
            total = 0j
            for e in itertools.product(*[range(dims[i]) for i in drop]):
                ia = [0] * len(dims)
                ib = [0] * len(dims)
                for pos, v in zip(keep, a):
                    ia[pos] = v
                for pos, v in zip(keep, b):
                    ib[pos] = v
                for pos, v in zip(drop, e):
                    ia[pos] = v
                    ib[pos] = v
                total += rho[flat(ia), flat(ib)]
            out[sum(x * s for x, s in zip(a, kstr)), sum(x * s for x, s in zip(b, kstr))] = total
    return out


def plus_theta(theta):
    """cos(theta/2)|+> + sin(theta/2)|->, components in the sigma_z basis."""
    return np.array([math.cos(theta / 2), math.sin(theta / 2)])


def grid(shifts, w, n=GRID_POINTS):
    return np.linspace(min(shifts) - GRID_MARGIN * w, max(shifts) + GRID_MARGIN * w, n)


def pointer(x, center, w):
    return (2 * math.pi * w * w) ** -0.25 * np.exp(-((x - center) ** 2) / (4 * w * w))


def postselected_pointer(qubit, theta, g, w, x):
    """<+theta| applied after exp(-i g sigma_z P): the pointer moves by +g on |+>, -g on |->."""
    post = plus_theta(theta)
    return post[0] * qubit[0] * pointer(x, g, w) + post[1] * qubit[1] * pointer(x, -g, w)


def _trap(y, x):
    return float(np.sum((y[1:] + y[:-1]) * np.diff(x)) / 2)


def product_mixture_moment(components, theta1, theta2, g, w):
    """Unnormalized <Pi Pi X1 X2> for a mixture of product two-qubit states.

    ``components`` is a list of ``(weight, qubit1, qubit2)``. Each pointer only
    sees its own qubit, so the integral factorizes per component.
    """
    total = 0.0
    for p, q1, q2 in components:
        x = grid([-g, g], w)
        f1 = postselected_pointer(np.asarray(q1, dtype=complex), theta1, g, w, x)
        f2 = postselected_pointer(np.asarray(q2, dtype=complex), theta2, g, w, x)
        total += p * _trap(np.abs(f1) ** 2 * x, x) * _trap(np.abs(f2) ** 2 * x, x)
    return total


def product_mixture_success(components, theta1, theta2, g, w):
    total = 0.0
    for p, q1, q2 in components:
        x = grid([-g, g], w)
        f1 = postselected_pointer(np.asarray(q1, dtype=complex), theta1, g, w, x)
        f2 = postselected_pointer(np.asarray(q2, dtype=complex), theta2, g, w, x)
        total += p * _trap(np.abs(f1) ** 2, x) * _trap(np.abs(f2) ** 2, x)
    return total


KET_P = np.array([1.0, 0.0])
KET_M = np.array([0.0, 1.0])
KET_PX = np.array([1.0, 1.0]) / math.sqrt(2)
KET_MX = np.array([1.0, -1.0]) / math.sqrt(2)


def emitted_mixture(frame):
    """Reduced state of the emitted pair for equal amplitudes, as a product mixture.

    ``"R"``: the pair copies the friend's z record, which is entangled with
    Alice's spin, so W sees |++> or |--> with weight 1/2 each.
    ``"R'"``: Alice measured x first; the friend's record is then +x or -x and
    the pair is |+x +x> or |-x -x>.
    """
    if frame == "R":
        return [(0.5, KET_P, KET_P), (0.5, KET_M, KET_M)]
    if frame == "R'":
        return [(0.5, KET_PX, KET_PX), (0.5, KET_MX, KET_MX)]
    raise ValueError(frame)


def grid_hybrid_moment(index, amp, shift1, shift2, w, n=GRID_POINTS):
    """<X1 X2> and norm^2 of sum_t amp_t |index_t> phi_{s1_t} phi_{s2_t} by quadrature.

    Terms with different discrete indices are orthogonal; within one index the
    pointer integrals are done on a grid, pair by pair.
    """
    s = list(shift1) + list(shift2)
    x = grid(s, w, n)
    norm2 = 0.0
    moment = 0.0
    idx = np.asarray(index)
    for key in np.unique(idx):
        sel = np.flatnonzero(idx == key)
        f1 = [pointer(x, shift1[t], w) for t in sel]
        f2 = [pointer(x, shift2[t], w) for t in sel]
        for i, ti in enumerate(sel):
            for j, tj in enumerate(sel):
                c = np.conj(amp[ti]) * amp[tj]
                o1, o2 = _trap(f1[i] * f1[j], x), _trap(f2[i] * f2[j], x)
                m1, m2 = _trap(f1[i] * f1[j] * x, x), _trap(f2[i] * f2[j] * x, x)
                norm2 += (c * o1 * o2).real
                moment += (c * m1 * m2).real
    return moment, norm2


def single_qubit_pointer_mean(qubit, theta, g, w):
    """Normalized post-selected pointer mean for one qubit, by quadrature."""
    x = grid([-g, g], w)
    f = postselected_pointer(np.asarray(qubit, dtype=complex), theta, g, w, x)
    d = np.abs(f) ** 2
    return _trap(d * x, x) / _trap(d, x)

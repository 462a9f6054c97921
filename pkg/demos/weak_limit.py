"""Single-qubit pointer shift against g times the weak value.

Run from the repository root::

    python3 demos/weak_limit.py

A qubit prepared in |+x> couples to one Gaussian pointer with strength g and
is post-selected on |+theta>. The post-selected pointer mean approaches
g * Re(weak value) with an error that shrinks like g^3.
"""

import math

import numpy as np

from wignerframes import qmath, weakmeas
from wignerframes.registers import DiscreteState, RegisterLayout
from wignerframes.weakmeas import PostSelection, attach_pointers, couple, postselect_qubits, weak_value


def pointer_mean(pre, theta, g, w=1.0):
    lay = RegisterLayout((("Q1", 2), ("Q2", 2)))
    h = attach_pointers(DiscreteState(lay, np.kron(pre, qmath.KET_PLUS)), w)
    branch, p = postselect_qubits(couple(h, "Q1", 1, g), PostSelection(theta, 0.0))
    return weakmeas.position_moment(branch, 1) / branch.norm_squared(), p


def main():
    theta = math.pi / 3
    pre = qmath.KET_PLUS_X
    wv = weak_value(pre, qmath.theta_ket(theta), qmath.SIGMA_Z)
    print(f"weak value of sigma_z: {wv.real:.6f}{wv.imag:+.6f}j")
    print(f"{'g':>8} {'mean':>14} {'g Re(wv)':>14} {'error':>12} {'ratio':>8} {'P(post)':>9}")
    prev = None
    for g in 0.4 / 2 ** np.arange(6):
        mean, p = pointer_mean(pre, theta, g)
        err = abs(mean - g * wv.real)
        ratio = "" if prev is None else f"{prev / err:8.3f}"
        print(f"{g:8.4f} {mean:14.6e} {g * wv.real:14.6e} {err:12.3e} {ratio:>8} {p:9.5f}")
        prev = err


if __name__ == "__main__":
    main()

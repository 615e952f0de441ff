"""
Cylindrical Bessel functions of integer order and real positive argument.

J_l is computed by Miller's downward recurrence normalised with the
identity J_0 + 2 sum J_2k = 1.  Y_0 and Y_1 follow from the Neumann
expansions over the same J values, and higher Y_l from the (stable)
upward recurrence.  Derivatives use f_l' = f_{l-1} - (l/x) f_l.

The compiled kernels are shared with the forward solver; the public
functions below wrap them into small record types.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

EULER_GAMMA = 0.57721566490153286061
#: |Y_l| above this is reported as saturated.
Y_SATURATION = 1e250
_RESCALE = 1e250


class BesselDomainError(ValueError):
    """Raised for a non-positive argument or negative order."""


@nb.njit(cache=True)
def _miller_start(order_max, x):
    top = max(order_max, int(x) + 1)
    start = top + 30 + int(math.sqrt(40.0 * top))
    if start % 2 == 1:
        start += 1
    return start


@nb.njit(cache=True)
def _jy_kernel(order_max, x, J, Jp, Y, Yp):
    """Fill J, Jp, Y, Yp (length order_max + 1) at a single x > 0.

    Returns True when some |Y_l| exceeded the saturation threshold; the
    affected entries (and all higher orders) are set to -inf.
    """
    start = _miller_start(order_max, x)
    work = np.zeros(start + 2)
    jp1 = 0.0
    j = 1.0
    work[start] = j
    for k in range(start, 0, -1):
        jm1 = (2.0 * k / x) * j - jp1
        jp1 = j
        j = jm1
        work[k - 1] = j
        if abs(j) > _RESCALE:
            for i in range(k - 1, start + 1):
                work[i] /= _RESCALE
            j /= _RESCALE
            jp1 /= _RESCALE

    norm = work[0]
    for k in range(2, start + 1, 2):
        norm += 2.0 * work[k]
    for k in range(start + 1):
        work[k] /= norm

    # Neumann series for Y_0 and Y_1 over the normalised J values
    lg = math.log(0.5 * x) + EULER_GAMMA
    s0 = 0.0
    s1 = 0.0
    sign = -1.0
    for k in range(1, start // 2):
        s0 += sign * work[2 * k] / k
        s1 += sign * (work[2 * k - 1] - work[2 * k + 1]) / k
        sign = -sign
    y0 = (2.0 / math.pi) * (lg * work[0] - 2.0 * s0)
    y1 = (2.0 / math.pi) * (lg * work[1] - work[0] / x + s1)

    for l in range(order_max + 1):
        J[l] = work[l]

    saturated = False
    Y[0] = y0
    if order_max >= 1:
        Y[1] = y1
    for l in range(1, order_max):
        if saturated:
            Y[l + 1] = -np.inf
            continue
        nxt = (2.0 * l / x) * Y[l] - Y[l - 1]
        if abs(nxt) > Y_SATURATION or not math.isfinite(nxt):
            saturated = True
            Y[l + 1] = -np.inf
        else:
            Y[l + 1] = nxt

    Jp[0] = -work[1]
    Yp[0] = -y1
    for l in range(1, order_max + 1):
        Jp[l] = J[l - 1] - (l / x) * J[l]
        Yp[l] = Y[l - 1] - (l / x) * Y[l]
    return saturated


@nb.njit(cache=True)
def jy_table(order_max, xs):
    """Tables J, J', Y, Y' of shape (len(xs), order_max + 1) and a
    per-argument saturation flag."""
    n = xs.shape[0]
    J = np.empty((n, order_max + 1))
    Jp = np.empty((n, order_max + 1))
    Y = np.empty((n, order_max + 1))
    Yp = np.empty((n, order_max + 1))
    sat = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        sat[i] = _jy_kernel(order_max, xs[i], J[i], Jp[i], Y[i], Yp[i])
    return J, Jp, Y, Yp, sat


@dataclass(frozen=True)
class CylinderFunctions:
    order: int
    argument: float
    j: float
    jprime: float
    y: float
    yprime: float
    saturated: bool = False

    def signed(self, order: int) -> "CylinderFunctions":
        """Values for order -l from J_{-l} = (-1)^l J_l, Y_{-l} = (-1)^l Y_l."""
        if abs(order) != self.order:
            raise ValueError("order must be +/- the stored order")
        s = 1.0 if order >= 0 or self.order % 2 == 0 else -1.0
        return CylinderFunctions(order, self.argument, s * self.j, s * self.jprime,
                                 s * self.y, s * self.yprime, self.saturated)


def _check(order_max: int, x: float) -> None:
    if order_max < 0:
        raise BesselDomainError(f"order_max must be >= 0, got {order_max}")
    if not (x > 0.0) or not math.isfinite(x):
        raise BesselDomainError(f"argument must be positive and finite, got {x}")


def bessel_jy(order_max: int, x: float) -> list[CylinderFunctions]:
    """J_l, Y_l and their derivatives at ``x`` for l = 0..order_max.

    Entries past a saturated Y_l carry ``saturated=True`` and Y = -inf.
    """
    _check(order_max, x)
    J, Jp, Y, Yp, _ = jy_table(order_max, np.array([float(x)]))
    out = []
    for l in range(order_max + 1):
        sat = not math.isfinite(Y[0, l]) or not math.isfinite(Yp[0, l])
        out.append(CylinderFunctions(l, float(x), float(J[0, l]), float(Jp[0, l]),
                                     float(Y[0, l]), float(Yp[0, l]), sat))
    return out


def hankel1(order_max: int, x: float) -> list[tuple[complex, complex]]:
    """(H_l^(1)(x), H_l^(1)'(x)) for l = 0..order_max."""
    return [(complex(f.j, f.y), complex(f.jprime, f.yprime))
            for f in bessel_jy(order_max, x)]


def wronskian_residual(f: CylinderFunctions) -> float:
    """|J Y' - J' Y - 2/(pi x)| scaled by pi x / 2."""
    x = f.argument
    return abs(f.j * f.yprime - f.jprime * f.y - 2.0 / (math.pi * x)) * (math.pi * x / 2.0)

"""
Direct transmission problem for a concentric layered cylinder.

The total field is expanded in cylindrical harmonics e^{il theta}.  Inside
the core it is a_1 J_l(k_1 r), in annulus m it is a_m J_l(k_m r) +
b_m Y_l(k_m r), and outside the last interface it is the incident plane wave
sum i^l J_l(k_0 r) plus A_l H_l^(1)(k_0 r).  Continuity of the field and of
its radial derivative at every interface gives a 2N x 2N system per mode,
solved by an outward transfer of (u, du/dr) rather than a dense factorization.

The scatterer is rotationally symmetric and the incident direction is
fixed to (1, 0), so the radial factor of mode -l equals that of mode l and
the field on the observation circle is a cosine series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .specfun import Y_SATURATION, jy_table

#: cancellation ratio of the exterior match beyond which a mode is flagged
COND_LIMIT = 1e14


class ModeError(RuntimeError):
    """A mode system could not be solved reliably."""

    def __init__(self, mode: int, reason: str):
        super().__init__(f"mode {mode}: {reason}")
        self.mode = mode
        self.reason = reason


@dataclass(frozen=True)
class LayerConfig:
    """Radii r_1 <= ... <= r_M and indices n_1..n_M inside a circle of radius R.

    Layer m fills r_{m-1} < |x| < r_m with r_0 = 0; the medium beyond r_M has
    index 1.  ``indices`` are the values n_m with k_m^2 = k_0^2 n_m.
    """

    radii: tuple[float, ...]
    indices: tuple[float, ...]
    R: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "radii", tuple(float(r) for r in self.radii))
        object.__setattr__(self, "indices", tuple(float(n) for n in self.indices))
        if len(self.radii) != len(self.indices):
            raise ValueError("radii and indices must have the same length")
        if any(b < a for a, b in zip(self.radii, self.radii[1:])):
            raise ValueError(f"radii must be nondecreasing: {self.radii}")
        if self.radii and (self.radii[0] < 0.0 or self.radii[-1] > self.R):
            raise ValueError(f"radii must lie in [0, R={self.R}]: {self.radii}")
        if any(n <= 0.0 for n in self.indices):
            raise ValueError("indices must be positive")

    @property
    def n_layers(self) -> int:
        return len(self.radii)

    @classmethod
    def from_flat(cls, q, R: float = 1.0) -> "LayerConfig":
        """Build from Q = (r_1..r_M, n_1..n_M)."""
        q = [float(v) for v in q]
        if len(q) % 2:
            raise ValueError("flat configuration needs an even number of entries")
        m = len(q) // 2
        return cls(tuple(q[:m]), tuple(q[m:]), R)

    def flat(self) -> tuple[float, ...]:
        return self.radii + self.indices

    def index_at(self, r: float) -> float:
        for rm, nm in zip(self.radii, self.indices):
            if r < rm:
                return nm
        return 1.0


@dataclass
class ModeSystem:
    """One mode's linear system and its solution.

    Unknowns are ordered a_1, (a_2, b_2), ..., (a_N, b_N), A_l.  Rows come
    in (value, radial derivative) pairs per interface.
    """

    mode: int
    matrix: np.ndarray
    rhs: np.ndarray
    coefficients: np.ndarray
    flagged: bool = False

    @property
    def scattering(self) -> complex:
        return complex(self.coefficients[-1]) if self.coefficients.size else 0j


@dataclass
class BoundaryField:
    k0: float
    angles: np.ndarray
    values: np.ndarray
    degraded: bool = False
    flagged_modes: list[int] = field(default_factory=list)

    def __post_init__(self):
        if len(self.values) != len(self.angles):
            raise ValueError("values and angles differ in length")


def sanitize(config: LayerConfig, tol_width: float | None = None) -> LayerConfig:
    """Drop zero-width layers and merge neighbours with equal indices.

    An outermost layer with index exactly 1 merges into the background.
    The returned configuration produces the same field.
    """
    if tol_width is None:
        tol_width = 1e-9 * config.R
    radii: list[float] = []
    indices: list[float] = []
    prev = 0.0
    for r, n in zip(config.radii, config.indices):
        if r - prev <= tol_width:
            continue
        if indices and indices[-1] == n:
            radii[-1] = r
        else:
            radii.append(r)
            indices.append(n)
        prev = r
    while indices and indices[-1] == 1.0:
        radii.pop()
        indices.pop()
    return LayerConfig(tuple(radii), tuple(indices), config.R)


def default_lmax(k0: float, R: float) -> int:
    kr = k0 * R
    return int(math.ceil(kr + 4.0 * kr ** (1.0 / 3.0) + 12.0))


@nb.njit(cache=True)
def _arguments(radii, ks, k0):
    """Bessel arguments used by the mode systems.

    Layout: [k_1 r_1, (k_m r_{m-1}, k_m r_m) for m = 2..N, k_0 r_N].
    """
    N = radii.shape[0]
    xs = np.empty(2 * N)
    xs[0] = ks[0] * radii[0]
    for m in range(1, N):
        xs[2 * m - 1] = ks[m] * radii[m - 1]
        xs[2 * m] = ks[m] * radii[m]
    xs[2 * N - 1] = k0 * radii[N - 1]
    return xs


@nb.njit(cache=True)
def _assemble_into(mat, rhs, l, ks, k0, J, Jp, Y, Yp):
    """Write the mode-l matrix and right-hand side into ``mat``/``rhs``."""
    N = ks.shape[0]
    n = 2 * N
    mat[:, :] = 0.0
    rhs[:] = 0.0
    q = l % 4
    il = 1.0 + 0j if q == 0 else (1j if q == 1 else (-1.0 + 0j if q == 2 else -1j))
    for m in range(N):
        rv = 2 * m
        rd = 2 * m + 1
        # inner side of interface m: layer m
        if m == 0:
            mat[rv, 0] = J[0, l]
            mat[rd, 0] = ks[0] * Jp[0, l]
        else:
            x = 2 * m
            mat[rv, 2 * m - 1] = J[x, l]
            mat[rv, 2 * m] = Y[x, l]
            mat[rd, 2 * m - 1] = ks[m] * Jp[x, l]
            mat[rd, 2 * m] = ks[m] * Yp[x, l]
        # outer side: layer m + 1 or the exterior
        if m < N - 1:
            x = 2 * m + 1
            mat[rv, 2 * m + 1] = -J[x, l]
            mat[rv, 2 * m + 2] = -Y[x, l]
            mat[rd, 2 * m + 1] = -ks[m + 1] * Jp[x, l]
            mat[rd, 2 * m + 2] = -ks[m + 1] * Yp[x, l]
        else:
            x = 2 * N - 1
            mat[rv, n - 1] = -(J[x, l] + 1j * Y[x, l])
            mat[rd, n - 1] = -k0 * (Jp[x, l] + 1j * Yp[x, l])
            rhs[rv] = il * J[x, l]
            rhs[rd] = il * k0 * Jp[x, l]


@nb.njit(cache=True)
def _assemble(l, ks, k0, J, Jp, Y, Yp):
    """Mode-l matrix and right-hand side from the argument tables."""
    n = 2 * ks.shape[0]
    mat = np.zeros((n, n), dtype=np.complex128)
    rhs = np.zeros(n, dtype=np.complex128)
    _assemble_into(mat, rhs, l, ks, k0, J, Jp, Y, Yp)
    return mat, rhs


@nb.njit(cache=True)
def _mode_coefficients(radii, indices, k0, lmax, cond_limit):
    """Coefficients (lmax + 1, 2N) and per-mode failure flags.

    The mode system is not factored directly.  The pair (u, du/dr) is
    carried outward from the core: in each annulus the coefficients that
    reproduce the pair at the inner interface follow in closed form from
    the Wronskian J Y' - J' Y = 2 / (pi x), and the pair is then evaluated
    at the outer interface.  One 2 x 2 match against the exterior fixes the
    overall amplitude and A_l.  Continuity therefore holds by construction,
    and the interior coefficients keep full relative accuracy even when the
    dense system is hopelessly ill conditioned (tiny cores, evanescent
    modes).  The pair is renormalized at every interface and the scales
    are kept as logarithms, so nothing overflows on the way out.

    A mode is flagged when a Y_l value saturates, when the exterior match
    has a cancellation ratio beyond ``cond_limit``, or when a result is
    not finite.
    """
    N = radii.shape[0]
    n = 2 * N
    ks = k0 * np.sqrt(indices)
    xs = _arguments(radii, ks, k0)
    J, Jp, Y, Yp, _ = jy_table(lmax, xs)
    coeffs = np.zeros((lmax + 1, n), dtype=np.complex128)
    flags = np.zeros(lmax + 1, dtype=np.bool_)
    alpha = np.empty(N)
    beta = np.empty(N)
    logs = np.empty(N)
    xe = xs[n - 1]
    for l in range(lmax + 1):
        bad = False
        for i in range(1, n):
            if not (abs(Y[i, l]) <= Y_SATURATION and abs(Yp[i, l]) <= Y_SATURATION):
                bad = True
        if bad:
            flags[l] = True
            continue
        # all interior quantities are real
        alpha[0] = 1.0
        beta[0] = 0.0
        logs[0] = 0.0
        wu = J[0, l]
        wd = ks[0] * Jp[0, l]
        L = 0.0
        for m in range(1, N):
            g = max(abs(wu), abs(wd))
            if not (g > 0.0 and math.isfinite(g)):
                bad = True
                break
            wu /= g
            wd /= g
            L += math.log(g)
            x0 = 2 * m - 1
            x1 = 2 * m
            k = ks[m]
            w = 2.0 / (math.pi * xs[x0])
            a = (wu * Yp[x0, l] - wd / k * Y[x0, l]) / w
            b = (J[x0, l] * wd / k - Jp[x0, l] * wu) / w
            alpha[m] = a
            beta[m] = b
            logs[m] = L
            wu = a * J[x1, l] + b * Y[x1, l]
            wd = k * (a * Jp[x1, l] + b * Yp[x1, l])
        g = max(abs(wu), abs(wd))
        if bad or not (g > 0.0 and math.isfinite(g)):
            flags[l] = True
            continue
        wu /= g
        wd /= g
        L += math.log(g)
        q = l % 4
        il = 1.0 + 0j if q == 0 else (1j if q == 1 else (-1.0 + 0j if q == 2 else -1j))
        H = J[n - 1, l] + 1j * Y[n - 1, l]
        Hp = Jp[n - 1, l] + 1j * Yp[n - 1, l]
        # t wu - A H = i^l J,  t wd - A k0 H' = i^l k0 J'
        t1 = -k0 * Hp * wu
        t2 = H * wd
        det = t1 + t2
        if abs(det) * cond_limit < abs(t1) + abs(t2) or det == 0:
            flags[l] = True
            continue
        t = il * k0 * (-2j / (math.pi * xe)) / det
        A = il * (wu * k0 * Jp[n - 1, l] - wd * J[n - 1, l]) / det
        ok = math.isfinite(A.real) and math.isfinite(A.imag)
        for m in range(N):
            s = t * math.exp(logs[m] - L)
            if m == 0:
                coeffs[l, 0] = s * alpha[0]
            else:
                coeffs[l, 2 * m - 1] = s * alpha[m]
                coeffs[l, 2 * m] = s * beta[m]
        coeffs[l, n - 1] = A
        for j in range(n):
            if not (math.isfinite(coeffs[l, j].real) and math.isfinite(coeffs[l, j].imag)):
                ok = False
        if not ok:
            coeffs[l] = 0.0
            flags[l] = True
    return coeffs, flags


@nb.njit(cache=True)
def _scattered_modes(radii, indices, k0, R, lmax, cond_limit):
    """A_l H_l(k_0 R) for l = 0..lmax and per-mode flags."""
    out = np.zeros(lmax + 1, dtype=np.complex128)
    if radii.shape[0] == 0:
        return out, np.zeros(lmax + 1, dtype=np.bool_)
    coeffs, flags = _mode_coefficients(radii, indices, k0, lmax, cond_limit)
    J, Jp, Y, Yp, _ = jy_table(lmax, np.array([k0 * R]))
    n = coeffs.shape[1]
    for l in range(lmax + 1):
        out[l] = coeffs[l, n - 1] * (J[0, l] + 1j * Y[0, l])
    return out, flags


def _as_arrays(config: LayerConfig) -> tuple[np.ndarray, np.ndarray]:
    return (np.asarray(config.radii, dtype=float),
            np.asarray(config.indices, dtype=float))


def solve_modes(config: LayerConfig, k0: float, l_max: int | None = None,
                strict: bool = False) -> list[ModeSystem]:
    """Mode systems and their solutions for l = 0..l_max.

    ``config`` should already be sanitized.  Flagged modes carry zero
    coefficients; with ``strict=True`` the first one raises ModeError.
    """
    if k0 <= 0:
        raise ValueError("k0 must be positive")
    if l_max is None:
        l_max = default_lmax(k0, config.R)
    radii, indices = _as_arrays(config)
    N = radii.size
    if N == 0:
        return [ModeSystem(l, np.zeros((0, 0), complex), np.zeros(0, complex),
                           np.zeros(0, complex)) for l in range(l_max + 1)]
    coeffs, flags = _mode_coefficients(radii, indices, float(k0), int(l_max), COND_LIMIT)
    ks = k0 * np.sqrt(indices)
    J, Jp, Y, Yp, _ = jy_table(l_max, _arguments(radii, ks, float(k0)))
    systems = []
    for l in range(l_max + 1):
        if flags[l] and strict:
            raise ModeError(l, "singular or saturated mode system")
        mat, rhs = _assemble(l, ks, float(k0), J, Jp, Y, Yp)
        systems.append(ModeSystem(l, mat, rhs, coeffs[l].copy(), bool(flags[l])))
    return systems


def cosine_table(lmax: int, angles: np.ndarray) -> np.ndarray:
    """Rows eps_l cos(l theta) with eps_0 = 1 and eps_l = 2 otherwise."""
    l = np.arange(lmax + 1)[:, None]
    tab = np.cos(l * np.asarray(angles, dtype=float)[None, :])
    tab[1:] *= 2.0
    return tab


def default_angles(count: int = 120) -> np.ndarray:
    """theta_l = 2 pi l / count for l = 1..count, wrapped into [0, 2 pi)."""
    return np.sort(np.mod(2.0 * np.pi * np.arange(1, count + 1) / count, 2.0 * np.pi))


def scattered_on_S(config: LayerConfig, k0: float, angles, l_max: int | None = None,
                   table: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Scattered field on |x| = R and the per-mode flag vector."""
    cfg = sanitize(config)
    if l_max is None:
        l_max = default_lmax(k0, cfg.R)
    radii, indices = _as_arrays(cfg)
    modes, flags = _scattered_modes(radii, indices, float(k0), float(cfg.R), int(l_max),
                                    COND_LIMIT)
    if table is None:
        table = cosine_table(l_max, angles)
    return modes @ table, flags


def field_on_S(config: LayerConfig, k0: float, angles=None,
               l_max: int | None = None) -> BoundaryField:
    """Total field u(R, theta) for the incident direction (1, 0)."""
    if k0 <= 0:
        raise ValueError("k0 must be positive")
    angles = default_angles() if angles is None else np.asarray(angles, dtype=float)
    scat, flags = scattered_on_S(config, k0, angles, l_max)
    values = np.exp(1j * k0 * config.R * np.cos(angles)) + scat
    flagged = [int(l) for l in np.flatnonzero(flags)]
    return BoundaryField(float(k0), angles, values, bool(flagged), flagged)

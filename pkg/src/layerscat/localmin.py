"""
Derivative-free local minimization over the admissible layer configurations.

Coordinates are scaled: radii stay as they are, indices enter through
s_m = sqrt(n_m).  Line searches advance in steps of ``d_min`` ("turtle"
steps) and refine each step with Brent's method; the basic method sweeps
the coordinate directions in order of their trial improvement and adds one
search along the overall displacement.  The reduction procedure merges
adjacent layers whose index unification barely changes the objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .forward import LayerConfig, sanitize
from .objective import AdmissibleSet, ObjectiveSpec, phi

GOLDEN = 0.5 * (3.0 - math.sqrt(5.0))
_SQRT_EPS = math.sqrt(np.finfo(float).eps)
#: Phi below this is round-off in the fields (relative misfit ~1e-12)
PHI_FLOOR = 1e-24


@dataclass(frozen=True)
class SearchSpace:
    admissible: AdmissibleSet = field(default_factory=AdmissibleSet)
    d_min_fraction: float = 0.02
    brent_tol: float = 1e-4
    brent_maxiter: int = 100
    max_cycles: int = 20
    rel_improvement: float = 1e-6
    eps_r: float = 0.1
    #: when False the reduction accepts merges that raise Phi by < eps_r Phi
    monotone_reduction: bool = True

    @property
    def s_low(self) -> float:
        return math.sqrt(self.admissible.n_low)

    @property
    def s_high(self) -> float:
        return math.sqrt(self.admissible.n_high)

    @property
    def diameter(self) -> float:
        a = self.admissible
        return math.sqrt(a.M * a.R ** 2 + a.M * (self.s_high - self.s_low) ** 2)

    @property
    def d_min(self) -> float:
        return self.d_min_fraction * self.diameter

    def bounds(self, m: int) -> tuple[np.ndarray, np.ndarray]:
        lo = np.concatenate([np.zeros(m), np.full(m, self.s_low)])
        hi = np.concatenate([np.full(m, self.admissible.R), np.full(m, self.s_high)])
        return lo, hi

    def to_vector(self, config: LayerConfig) -> np.ndarray:
        return np.concatenate([np.asarray(config.radii, dtype=float),
                               np.sqrt(np.asarray(config.indices, dtype=float))])

    def clean(self, x: np.ndarray) -> np.ndarray:
        """Remove rounding-level violations of the box and the radius ordering."""
        m = x.size // 2
        lo, hi = self.bounds(m)
        x = np.clip(x, lo, hi)
        x[:m] = np.maximum.accumulate(x[:m])
        return x

    def to_config(self, x: np.ndarray) -> LayerConfig:
        m = x.size // 2
        a = self.admissible
        n = np.clip(x[m:] ** 2, a.n_low, a.n_high)
        return LayerConfig(tuple(x[:m]), tuple(n), a.R)

    def max_step(self, x: np.ndarray, u: np.ndarray) -> float:
        """Largest t >= 0 keeping x + t u inside the box with ordered radii."""
        m = x.size // 2
        lo, hi = self.bounds(m)
        t = math.inf
        for j in range(x.size):
            if u[j] > 0.0:
                t = min(t, (hi[j] - x[j]) / u[j])
            elif u[j] < 0.0:
                t = min(t, (lo[j] - x[j]) / u[j])
        for i in range(m - 1):
            rate = u[i + 1] - u[i]
            if rate < 0.0:
                t = min(t, (x[i + 1] - x[i]) / -rate)
        return max(t, 0.0)


@dataclass
class LocalMinResult:
    config: LayerConfig
    phi_value: float
    evaluations: int
    cycles: int
    reduced_layers: int
    start_layers: int = 0
    #: Phi of the accepted iterate after every move, starting point first
    trace: list[float] = field(default_factory=list)

    @property
    def increases(self) -> int:
        return sum(1 for a, b in zip(self.trace, self.trace[1:]) if b > a)


class _Counted:
    """Vector-coordinate objective with an evaluation counter."""

    def __init__(self, space: SearchSpace, f: Callable[[LayerConfig], float]):
        self.space = space
        self.f = f
        self.evaluations = 0

    def __call__(self, x: np.ndarray) -> float:
        self.evaluations += 1
        return float(self.f(self.space.to_config(x)))


def brent_line_min(f: Callable[[float], float], a: float, b: float, tol: float = 1e-4,
                   maxiter: int = 100, fa: float | None = None,
                   fb: float | None = None) -> tuple[float, float]:
    """Minimize ``f`` on [a, b] by golden sections and parabolic steps.

    The endpoints are compared with the interior estimate, so a boundary
    minimum is returned exactly.  ``fa``/``fb`` may pass known endpoint values.
    """
    if not a < b:
        raise ValueError("need a < b")
    lo, hi = a, b
    x = w = v = lo + GOLDEN * (hi - lo)
    fx = fw = fv = f(x)
    d = e = 0.0
    for _ in range(maxiter):
        xm = 0.5 * (lo + hi)
        tol1 = _SQRT_EPS * abs(x) + tol / 3.0
        tol2 = 2.0 * tol1
        if abs(x - xm) <= tol2 - 0.5 * (hi - lo):
            break
        parabolic = False
        if abs(e) > tol1:
            r = (x - w) * (fx - fv)
            q = (x - v) * (fx - fw)
            p = (x - v) * q - (x - w) * r
            q = 2.0 * (q - r)
            if q > 0.0:
                p = -p
            q = abs(q)
            e_prev = e
            e = d
            if abs(p) < abs(0.5 * q * e_prev) and q * (lo - x) < p < q * (hi - x):
                d = p / q
                u = x + d
                if u - lo < tol2 or hi - u < tol2:
                    d = tol1 if xm >= x else -tol1
                parabolic = True
        if not parabolic:
            e = (lo - x) if x >= xm else (hi - x)
            d = GOLDEN * e
        u = x + (d if abs(d) >= tol1 else math.copysign(tol1, d if d != 0 else 1.0))
        u = min(max(u, a), b)
        fu = f(u)
        if fu <= fx:
            if u >= x:
                lo = x
            else:
                hi = x
            v, fv = w, fw
            w, fw = x, fx
            x, fx = u, fu
        else:
            if u < x:
                lo = u
            else:
                hi = u
            if fu <= fw or w == x:
                v, fv = w, fw
                w, fw = u, fu
            elif fu <= fv or v == x or v == w:
                v, fv = u, fu
    best_t, best_f = x, fx
    if fa is None:
        fa = f(a)
    if fb is None:
        fb = f(b)
    if fb <= best_f:
        best_t, best_f = b, fb
    if fa <= best_f:
        best_t, best_f = a, fa
    return best_t, best_f


def _near_descent(along, f0: float, t1: float, space: SearchSpace):
    """Look for a minimum closer to the base point than Brent resolved.

    Brent on a long segment may settle on a farther basin.  One probe at
    ``brent_tol`` detects descent; the bracket then grows geometrically
    until the value rises and is refined by Brent.
    """
    h = space.brent_tol
    if h >= t1:
        return None
    fh = along(h)
    if not fh < f0:
        return None
    lo, mid, fmid = 0.0, h, fh
    while True:
        hi = min(2.0 * mid, t1)
        fhi = along(hi)
        if fhi >= fmid or hi >= t1:
            break
        lo, mid, fmid = mid, hi, fhi
    if fhi < fmid:
        return hi, fhi
    t, ft = brent_line_min(along, lo, hi, space.brent_tol, space.brent_maxiter, fb=fhi)
    if ft > fmid:
        return mid, fmid
    return t, ft


def turtle_search(start: np.ndarray, direction: np.ndarray, space: SearchSpace,
                  f: Callable[[np.ndarray], float],
                  f_start: float | None = None) -> tuple[np.ndarray, float]:
    """Stepwise line minimization from ``start`` along ``direction``.

    Each step covers at most ``d_min`` (less at the feasible boundary) and is
    refined by Brent's method.  An interior minimum stops the search, a
    minimum at the far end advances the base point, and a minimum at the
    base point reverses the direction once if no step was taken yet.
    """
    norm = float(np.linalg.norm(direction))
    if norm == 0.0:
        raise ValueError("zero search direction")
    u = np.asarray(direction, dtype=float) / norm
    x0 = np.array(start, dtype=float)
    f0 = f(x0) if f_start is None else f_start
    reversed_once = False
    advanced = False
    while True:
        t1 = min(space.d_min, space.max_step(x0, u))
        if t1 <= 1e-15:
            if advanced or reversed_once:
                return x0, f0
            u = -u
            reversed_once = True
            continue
        x1 = space.clean(x0 + t1 * u)
        f1 = f(x1)

        def along(t, x0=x0, u=u):
            return f(space.clean(x0 + t * u))

        t, ft = brent_line_min(along, 0.0, t1, space.brent_tol, space.brent_maxiter,
                               fa=f0, fb=f1)
        if t == 0.0:
            near = _near_descent(along, f0, t1, space)
            if near is not None:
                t, ft = near
                return space.clean(x0 + t * u), ft
        if t == 0.0:
            if advanced or reversed_once:
                return x0, f0
            u = -u
            reversed_once = True
        elif t == t1:
            x0, f0 = x1, f1
            advanced = True
        else:
            return space.clean(x0 + t * u), ft


def _minimize_vector(x: np.ndarray, fx: float, space: SearchSpace, F,
                     trace: list[float]) -> tuple[np.ndarray, float, int]:
    n = x.size
    cycles = 0
    if n == 0:
        return x, fx, cycles
    basis = np.eye(n)
    while cycles < space.max_cycles:
        cycles += 1
        f_old = fx
        probes = [turtle_search(x, basis[i], space, F, fx) for i in range(n)]
        order = sorted(range(n), key=lambda i: probes[i][1])
        y, fy = probes[order[0]]
        trace.append(fy)
        for i in order[1:]:
            y, fy = turtle_search(y, basis[i], space, F, fy)
            trace.append(fy)
        v = y - x
        if np.linalg.norm(v) > 0.0:
            y, fy = turtle_search(y, v, space, F, fy)
            trace.append(fy)
        x, fx = y, fy
        if fx <= PHI_FLOOR or f_old - fx < space.rel_improvement * abs(f_old):
            break
    return x, fx, cycles


def basic_local_min(start: LayerConfig, space: SearchSpace,
                    f: Callable[[LayerConfig], float]) -> LocalMinResult:
    """Conjugate-direction style search over the 2M coordinates of ``start``."""
    F = _Counted(space, f)
    x = space.to_vector(start)
    fx = F(x)
    trace = [fx]
    x, fx, cycles = _minimize_vector(x, fx, space, F, trace)
    cfg = space.to_config(x)
    return LocalMinResult(cfg, fx, F.evaluations, cycles, cfg.n_layers, start.n_layers, trace)


def _merge_candidates(config: LayerConfig) -> list[LayerConfig]:
    """All single merges: "down" (inner layer takes the outer index, the
    outermost layer may join the background) then "up" (outer layer takes
    the inner index)."""
    r, n, R = list(config.radii), list(config.indices), config.R
    M = len(r)
    out = []
    for i in range(1, M + 1):
        # down: layer i takes the index of layer i + 1 (background beyond M)
        out.append(LayerConfig(tuple(r[:i - 1] + r[i:]), tuple(n[:i - 1] + n[i:]), R))
    for i in range(1, M):
        # up: layer i + 1 takes the index of layer i
        out.append(LayerConfig(tuple(r[:i - 1] + r[i:]), tuple(n[:i] + n[i + 1:]), R))
    return out


def reduce(config: LayerConfig, spec: ObjectiveSpec, eps_r: float = 0.1,
           monotone: bool = True, f: Callable[[LayerConfig], float] | None = None,
           trace: list[float] | None = None) -> LayerConfig:
    """Merge adjacent layers until no single merge qualifies.

    With ``monotone=False`` a merge qualifies when |Phi(Q0) - Phi(Q_i)| is
    the smallest such change and below ``eps_r * Phi(Q0)``.  With
    ``monotone=True`` every merge that does not increase Phi qualifies and
    the one with the lowest Phi is taken.
    """
    if eps_r <= 0:
        raise ValueError("eps_r must be positive")
    if f is None:
        def f(c):
            return phi(c, spec)
    cur = config
    fcur = f(cur)
    while cur.n_layers > 0 and fcur > PHI_FLOOR:
        best = None
        for cand in _merge_candidates(cur):
            fc = f(cand)
            if monotone:
                if fc <= fcur and (best is None or fc < best[0]):
                    best = (fc, cand, fc)
            else:
                c = abs(fcur - fc)
                if c < eps_r * fcur and (best is None or c < best[0]):
                    best = (c, cand, fc)
        if best is None:
            break
        _, cur, fcur = best
        if trace is not None:
            trace.append(fcur)
    return cur


def lmm(start: LayerConfig, spec: ObjectiveSpec, space: SearchSpace) -> LocalMinResult:
    """Reduce, minimize in the reduced subspace, reduce again."""
    count = [0]

    def f(c: LayerConfig) -> float:
        count[0] += 1
        return phi(c, spec)

    f0 = f(start)
    trace = [f0]
    if f0 <= PHI_FLOOR:
        return LocalMinResult(start, f0, count[0], 0, start.n_layers, start.n_layers, trace)
    q0 = reduce(start, spec, space.eps_r, space.monotone_reduction, f, trace)
    F = _Counted(space, f)
    x = space.to_vector(q0)
    fx = trace[-1]
    x, fx, cycles = _minimize_vector(x, fx, space, F, trace)
    q1 = space.to_config(x)
    q1r = reduce(q1, spec, space.eps_r, space.monotone_reduction, f, trace)
    final = sanitize(q1r)
    value = phi(final, spec)
    return LocalMinResult(final, value, count[0], cycles, final.n_layers,
                          start.n_layers, trace)

"""
Best-fit-to-data functional, synthetic data and identification error.

Measured data are total fields g^(p)(theta) on the observation circle.
The misfit compares scattered parts, i.e. both the simulated and the
measured field with the incident plane wave removed:

    Phi(Q) = 1/P sum_p ||w_s^(p) - g_s^(p)||^2 / ||g_s^(p)||^2

with ||w||^2 = sum_l |w(theta_l)|^2.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numba as nb
import numpy as np

from .forward import (COND_LIMIT, LayerConfig, _scattered_modes, cosine_table,
                      default_angles, default_lmax, field_on_S, sanitize)

DEFAULT_WAVENUMBERS = (3.0, 6.5, 10.0)
PENALTY = 1e6


class ConstraintError(ValueError):
    """Configuration outside the admissible set."""


@dataclass(frozen=True)
class AdmissibleSet:
    R: float = 1.0
    n_low: float = 0.04
    n_high: float = 30.25
    M: int = 4

    def __post_init__(self):
        if not (0 < self.n_low < self.n_high):
            raise ValueError("need 0 < n_low < n_high")
        if self.R <= 0 or self.M < 1:
            raise ValueError("need R > 0 and M >= 1")

    def violation(self, config: LayerConfig) -> str | None:
        if config.R != self.R:
            return f"R={config.R} differs from admissible R={self.R}"
        if config.n_layers > self.M:
            return f"{config.n_layers} layers exceed M={self.M}"
        for r in config.radii:
            if not 0.0 <= r <= self.R:
                return f"radius {r} outside [0, {self.R}]"
        if any(b < a for a, b in zip(config.radii, config.radii[1:])):
            return "radii not ordered"
        for n in config.indices:
            if not self.n_low <= n <= self.n_high:
                return f"index {n} outside [{self.n_low}, {self.n_high}]"
        return None

    def contains(self, config: LayerConfig) -> bool:
        return self.violation(config) is None

    def check(self, config: LayerConfig) -> None:
        why = self.violation(config)
        if why is not None:
            raise ConstraintError(why)


@dataclass(frozen=True)
class ProbeSet:
    wavenumbers: tuple[float, ...] = DEFAULT_WAVENUMBERS
    angles: np.ndarray = field(default_factory=default_angles)

    def __post_init__(self):
        object.__setattr__(self, "wavenumbers", tuple(float(k) for k in self.wavenumbers))
        angles = np.asarray(self.angles, dtype=float)
        object.__setattr__(self, "angles", angles)
        if not self.wavenumbers or any(k <= 0 for k in self.wavenumbers):
            raise ValueError("need at least one positive wavenumber")
        if angles.size == 0 or np.any(np.diff(angles) <= 0):
            raise ValueError("angles must be strictly increasing")
        if angles[0] < 0 or angles[-1] >= 2 * np.pi:
            raise ValueError("angles must lie in [0, 2 pi)")

    @classmethod
    def uniform(cls, wavenumbers=DEFAULT_WAVENUMBERS, count: int = 120) -> "ProbeSet":
        return cls(tuple(wavenumbers), default_angles(count))

    @property
    def P(self) -> int:
        return len(self.wavenumbers)


def incident(k0: float, R: float, angles: np.ndarray) -> np.ndarray:
    return np.exp(1j * k0 * R * np.cos(angles))


@dataclass
class ScatterDataset:
    """Total fields ``data[p, l]`` at wavenumber p and angle l."""

    probe: ProbeSet
    data: np.ndarray
    noise_level: float = 0.0
    seed: int | None = None
    R: float = 1.0
    noise_norm: str = "max"

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        if self.data.shape != (self.probe.P, self.probe.angles.size):
            raise ValueError(f"data shape {self.data.shape} does not match probe set")

    def scattered(self) -> np.ndarray:
        inc = np.array([incident(k, self.R, self.probe.angles) for k in self.probe.wavenumbers])
        return self.data - inc

    def to_csv(self, path=None) -> str:
        """CSV text (p, k0, theta, re_g, im_g) after one metadata comment line."""
        buf = io.StringIO()
        seed = "" if self.seed is None else str(self.seed)
        buf.write(f"# delta={_fmt(self.noise_level)} seed={seed} R={_fmt(self.R)} "
                  f"noise_norm={self.noise_norm}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["p", "k0", "theta", "re_g", "im_g"])
        for p, k0 in enumerate(self.probe.wavenumbers):
            for th, g in zip(self.probe.angles, self.data[p]):
                w.writerow([p, _fmt(k0), _fmt(th), _fmt(g.real), _fmt(g.imag)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path) -> "ScatterDataset":
        return cls.from_csv_text(Path(path).read_text())

    @classmethod
    def from_csv_text(cls, text: str) -> "ScatterDataset":
        lines = text.splitlines()
        meta = {}
        if lines and lines[0].startswith("#"):
            for item in lines[0][1:].split():
                key, _, val = item.partition("=")
                meta[key] = val
            lines = lines[1:]
        rows = list(csv.DictReader(lines))
        if not rows:
            raise ValueError("dataset has no rows")
        ps = sorted({int(r["p"]) for r in rows})
        ks = {}
        per_p: dict[int, list[tuple[float, complex]]] = {p: [] for p in ps}
        for r in rows:
            p = int(r["p"])
            ks[p] = float(r["k0"])
            per_p[p].append((float(r["theta"]), complex(float(r["re_g"]), float(r["im_g"]))))
        angles = np.array([t for t, _ in per_p[ps[0]]])
        data = np.array([[g for _, g in per_p[p]] for p in ps])
        probe = ProbeSet(tuple(ks[p] for p in ps), angles)
        seed = meta.get("seed") or None
        return cls(probe, data, float(meta.get("delta", 0.0)),
                   None if seed is None else int(seed), float(meta.get("R", 1.0)),
                   meta.get("noise_norm", "max"))


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@nb.njit(cache=True)
def _phi_kernel(radii, indices, ks0, R, lmaxs, tables, gs, gnorm2, cond_limit):
    P = ks0.shape[0]
    L = gs.shape[1]
    total = 0.0
    degraded = False
    for p in range(P):
        lmax = lmaxs[p]
        if radii.shape[0] == 0:
            modes = np.zeros(lmax + 1, dtype=np.complex128)
        else:
            modes, flags = _scattered_modes(radii, indices, ks0[p], R, lmax, cond_limit)
            for l in range(lmax + 1):
                if flags[l]:
                    degraded = True
        s = 0.0
        for t in range(L):
            w = 0j
            for l in range(lmax + 1):
                w += modes[l] * tables[p, l, t]
            d = w - gs[p, t]
            s += d.real * d.real + d.imag * d.imag
        total += s / gnorm2[p]
    return total / P, degraded


class ObjectiveSpec:
    """Dataset plus admissible set, with the per-wavenumber tables cached."""

    def __init__(self, dataset: ScatterDataset, admissible: AdmissibleSet | None = None,
                 penalty_value: float = PENALTY):
        self.dataset = dataset
        self.admissible = admissible or AdmissibleSet(R=dataset.R)
        if self.admissible.R != dataset.R:
            raise ValueError("admissible R differs from dataset R")
        self.penalty_value = float(penalty_value)
        probe = dataset.probe
        self._ks = np.array(probe.wavenumbers)
        self._lmaxs = np.array([default_lmax(k, dataset.R) for k in probe.wavenumbers],
                               dtype=np.int64)
        top = int(self._lmaxs.max())
        self._tables = np.zeros((probe.P, top + 1, probe.angles.size))
        for p, lm in enumerate(self._lmaxs):
            self._tables[p, :lm + 1] = cosine_table(int(lm), probe.angles)
        self._gs = np.ascontiguousarray(dataset.scattered())
        self._gnorm2 = np.array([norm2(g) ** 2 for g in self._gs])

    @property
    def R(self) -> float:
        return self.dataset.R

    def evaluate(self, config: LayerConfig) -> tuple[float, bool]:
        """(Phi, degraded) without the admissibility check or penalty."""
        cfg = sanitize(config)
        value, degraded = _phi_kernel(np.asarray(cfg.radii, dtype=float),
                                      np.asarray(cfg.indices, dtype=float),
                                      self._ks, float(cfg.R), self._lmaxs, self._tables,
                                      self._gs, self._gnorm2, COND_LIMIT)
        return value, degraded

    def __call__(self, config: LayerConfig) -> float:
        return phi(config, self)


def norm2(values) -> float:
    """Discrete 2-norm (sum |w_l|^2)^(1/2)."""
    w = np.asarray(values)
    if w.size == 0:
        raise ValueError("norm2 of an empty vector")
    return float(np.sqrt(np.sum(w.real ** 2 + w.imag ** 2)))


def phi(config: LayerConfig, spec: ObjectiveSpec) -> float:
    """Best-fit functional; degraded forward solves map to the penalty value."""
    spec.admissible.check(config)
    value, degraded = spec.evaluate(config)
    if degraded or not math.isfinite(value):
        return spec.penalty_value
    return value


def noise_scale(g: np.ndarray, norm: str = "max") -> float:
    """Reference amplitude ||g|| in the noise model."""
    if norm == "max":
        return float(np.max(np.abs(g)))
    if norm == "rms":
        return norm2(g) / math.sqrt(g.size)
    if norm == "l2":
        return norm2(g)
    raise ValueError(f"unknown noise norm {norm!r}")


def synthesize(config: LayerConfig, probe: ProbeSet, delta: float = 0.0, seed: int = 0,
               noise_norm: str = "max") -> ScatterDataset:
    """Simulated data g + delta ||g|| (2z - 1)(1 + i), one z ~ U[0, 1] per angle."""
    if delta < 0:
        raise ValueError("noise level must be nonnegative")
    rng = np.random.default_rng(seed)
    rows = []
    for k0 in probe.wavenumbers:
        g = field_on_S(config, k0, probe.angles).values
        if delta > 0:
            z = rng.uniform(0.0, 1.0, size=g.size)
            g = g + delta * noise_scale(g, noise_norm) * (2.0 * z - 1.0) * (1.0 + 1.0j)
        rows.append(g)
    return ScatterDataset(probe, np.array(rows), float(delta), seed, config.R, noise_norm)


def _profile_breaks(config: LayerConfig) -> list[float]:
    return list(config.radii)


def epsilon_err(candidate: LayerConfig, truth: LayerConfig) -> float:
    """Area-weighted relative L1 distance between index profiles over the disk."""
    if candidate.R != truth.R:
        raise ValueError("configurations have different R")
    R = truth.R
    breaks = sorted(set([0.0, R] + _profile_breaks(candidate) + _profile_breaks(truth)))
    num = 0.0
    den = 0.0
    for a, b in zip(breaks, breaks[1:]):
        if b <= a:
            continue
        area = math.pi * (b * b - a * a)
        mid = 0.5 * (a + b)
        nt = truth.index_at(mid)
        num += area * abs(candidate.index_at(mid) - nt)
        den += area * nt
    return num / den

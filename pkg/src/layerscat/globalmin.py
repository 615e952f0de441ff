"""
Multilevel single-linkage global search and the reduced-sample random search.

Every iteration draws a batch of uniform admissible configurations, keeps
the best fraction of all points drawn so far, and starts a local search
from each kept point that has no better kept point within the critical
distance d_j.  Termination uses the Bayesian estimate of the total number
of minima, W_tot = W (K - 1) / (K - W - 2).

The local search is deterministic, so repeated launches from a sample
point already searched reuse the stored result; they still count in K.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .forward import LayerConfig, sanitize
from .localmin import LocalMinResult, SearchSpace, lmm
from .objective import ObjectiveSpec, phi

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MslmParams:
    L: int = 200
    gamma: float = 0.01
    sigma: float = 1.0
    eps_tot: float = 0.03
    max_iterations: int = 75
    seed: int = 0
    clustering: bool = True
    #: scaled distance and relative Phi gap under which two minima coincide
    identity_tol: float = 1e-3
    identity_phi_tol: float = 1e-6
    budget_seconds: float | None = None

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        if self.L < 1 or self.sigma <= 0 or self.eps_tot < 0:
            raise ValueError("need L >= 1, sigma > 0, eps_tot >= 0")


@dataclass
class IterationRecord:
    j: int
    jL: int
    d_j: float
    K: int
    W: int
    W_tot: float
    best_phi: float
    launched: int
    new_searches: int


@dataclass
class MslmState:
    M: int
    rng: np.random.Generator
    j: int = 0
    samples: np.ndarray = None
    values: np.ndarray = None
    reduced: np.ndarray = None
    minima: list[LocalMinResult] = field(default_factory=list)
    K: int = 0
    W: int = 0
    d_j: float = math.inf
    #: sample index -> index into ``minima`` of the search started there
    searched: dict[int, int] = field(default_factory=dict)
    launched: list[int] = field(default_factory=list)
    records: list[IterationRecord] = field(default_factory=list)
    evaluations: int = 0
    local_searches: int = 0
    #: Phi increases summed over the traces of every local search
    increases: int = 0

    def __post_init__(self):
        if self.samples is None:
            self.samples = np.empty((0, 2 * self.M))
            self.values = np.empty(0)
            self.reduced = np.empty(0, dtype=int)

    @classmethod
    def initial(cls, space: SearchSpace, seed: int) -> "MslmState":
        return cls(space.admissible.M, np.random.default_rng(seed))


@dataclass
class SearchOutcome:
    best: LocalMinResult
    minima: list[LocalMinResult]
    K: int
    W: int
    W_tot: float
    iterations: int
    evaluations: int
    local_searches: int
    converged: bool
    wall_seconds: float
    records: list[IterationRecord] = field(default_factory=list)
    increases: int = 0


def critical_distance(j: int, params: MslmParams, space: SearchSpace) -> float:
    """d_j combining the radius part and the sqrt-index part."""
    n = j * params.L
    if n < 2:
        raise ValueError("critical distance needs jL >= 2")
    M = space.admissible.M
    base = math.gamma(1.0 + M / 2.0) * params.sigma * math.log(n) / n
    d_r = (base * space.admissible.R ** M) ** (1.0 / M) / math.sqrt(math.pi)
    d_n = (base * (space.s_high - space.s_low) ** M) ** (1.0 / M) / math.sqrt(math.pi)
    return math.hypot(d_r, d_n)


def stopping(K: int, W: int, eps_tot: float) -> tuple[float, bool]:
    """(W_tot, stop) for the relaxed rule W_tot < W + 0.5 or W_tot < (1 + eps_tot) W."""
    if K <= W + 2:
        return math.inf, False
    w_tot = W * (K - 1) / (K - W - 2)
    return w_tot, (w_tot < W + 0.5 or w_tot < (1.0 + eps_tot) * W)


def sample_batch(rng: np.random.Generator, count: int, space: SearchSpace) -> np.ndarray:
    """Uniform points of the admissible set in scaled coordinates.

    Sorted i.i.d. radii are uniform on the ordered region.
    """
    M = space.admissible.M
    radii = np.sort(rng.uniform(0.0, space.admissible.R, size=(count, M)), axis=1)
    s = rng.uniform(space.s_low, space.s_high, size=(count, M))
    return np.hstack([radii, s])


def reduced_size(count: int, gamma: float) -> int:
    return max(1, math.floor(gamma * count + 1e-9))


def cluster_heads(points: np.ndarray, d: float) -> list[int]:
    """Positions i (in the given order) with no earlier point within ``d``."""
    heads = []
    for i in range(points.shape[0]):
        if i == 0:
            heads.append(0)
            continue
        dist = np.sqrt(np.sum((points[:i] - points[i]) ** 2, axis=1))
        if not np.any(dist <= d):
            heads.append(i)
    return heads


def same_minimum(a: LocalMinResult, b: LocalMinResult, space: SearchSpace,
                 tol: float = 1e-3, phi_tol: float = 1e-6) -> bool:
    ca, cb = sanitize(a.config), sanitize(b.config)
    if ca.n_layers != cb.n_layers:
        return False
    if abs(a.phi_value - b.phi_value) >= phi_tol * (1.0 + min(a.phi_value, b.phi_value)):
        return False
    dist = np.linalg.norm(space.to_vector(ca) - space.to_vector(cb))
    return bool(dist < tol)


def _register(result: LocalMinResult, minima: list[LocalMinResult], space: SearchSpace,
              params: MslmParams) -> int:
    for k, known in enumerate(minima):
        if same_minimum(result, known, space, params.identity_tol, params.identity_phi_tol):
            return k
    minima.append(result)
    return len(minima) - 1


def _evaluate_batch(points: np.ndarray, spec: ObjectiveSpec, space: SearchSpace) -> np.ndarray:
    return np.array([phi(space.to_config(space.clean(x)), spec) for x in points])


def mslm_iterate(state: MslmState, spec: ObjectiveSpec, params: MslmParams,
                 space: SearchSpace) -> MslmState:
    """One MSLM iteration: sample, reduce, cluster, search, update K and W."""
    state.j += 1
    batch = sample_batch(state.rng, params.L, space)
    vals = _evaluate_batch(batch, spec, space)
    state.evaluations += batch.shape[0]
    state.samples = np.vstack([state.samples, batch])
    state.values = np.concatenate([state.values, vals])
    n = state.samples.shape[0]
    order = np.argsort(state.values, kind="stable")
    state.reduced = order[:reduced_size(n, params.gamma)]
    state.d_j = critical_distance(state.j, params, space) if n >= 2 else math.inf
    d = state.d_j if params.clustering else 0.0
    pts = state.samples[state.reduced]
    heads = cluster_heads(pts, d) if params.clustering else list(range(len(pts)))
    new_searches = 0
    state.launched = []
    for pos in heads:
        idx = int(state.reduced[pos])
        state.launched.append(idx)
        state.K += 1
        if idx in state.searched:
            continue
        start = space.to_config(space.clean(state.samples[idx]))
        result = lmm(start, spec, space)
        state.evaluations += result.evaluations
        state.local_searches += 1
        state.increases += result.increases
        new_searches += 1
        state.searched[idx] = _register(result, state.minima, space, params)
    state.W = len(state.minima)
    w_tot, _ = stopping(state.K, state.W, params.eps_tot)
    best = min((m.phi_value for m in state.minima), default=math.inf)
    state.records.append(IterationRecord(state.j, n, state.d_j, state.K, state.W, w_tot,
                                         best, len(heads), new_searches))
    log.debug("j=%d K=%d W=%d W_tot=%.3f best=%.6g", state.j, state.K, state.W, w_tot, best)
    return state


def _best(minima: list[LocalMinResult]) -> LocalMinResult:
    return min(minima, key=lambda m: m.phi_value)


def mslm_run(spec: ObjectiveSpec, params: MslmParams | None = None,
             space: SearchSpace | None = None) -> SearchOutcome:
    """Iterate until the relaxed Bayesian rule fires or the limits are hit."""
    params = params or MslmParams()
    space = space or SearchSpace(spec.admissible)
    t0 = time.perf_counter()
    state = MslmState.initial(space, params.seed)
    converged = False
    for _ in range(params.max_iterations):
        mslm_iterate(state, spec, params, space)
        if stopping(state.K, state.W, params.eps_tot)[1]:
            converged = True
            break
        if params.budget_seconds is not None and \
                time.perf_counter() - t0 > params.budget_seconds:
            log.warning("MSLM budget of %.0f s exhausted at iteration %d",
                        params.budget_seconds, state.j)
            break
    w_tot, _ = stopping(state.K, state.W, params.eps_tot)
    return SearchOutcome(_best(state.minima), list(state.minima), state.K, state.W, w_tot,
                         state.j, state.evaluations, state.local_searches, converged,
                         time.perf_counter() - t0, state.records, state.increases)


def reduced_random_search(spec: ObjectiveSpec, L_total: int, gamma: float = 0.01,
                          seed: int = 0, space: SearchSpace | None = None,
                          params: MslmParams | None = None) -> SearchOutcome:
    """One batch of ``L_total`` points, local searches from the best fraction."""
    if L_total < 1:
        raise ValueError("L_total must be >= 1")
    space = space or SearchSpace(spec.admissible)
    params = params or MslmParams(L=L_total, gamma=gamma, seed=seed)
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    pts = sample_batch(rng, L_total, space)
    vals = _evaluate_batch(pts, spec, space)
    evaluations = L_total
    order = np.argsort(vals, kind="stable")[:reduced_size(L_total, gamma)]
    minima: list[LocalMinResult] = []
    increases = 0
    for idx in order:
        result = lmm(space.to_config(space.clean(pts[idx])), spec, space)
        evaluations += result.evaluations
        increases += result.increases
        _register(result, minima, space, params)
    K, W = len(order), len(minima)
    best = _best(minima)
    record = IterationRecord(1, L_total, 0.0, K, W, stopping(K, W, params.eps_tot)[0],
                             best.phi_value, K, K)
    return SearchOutcome(best, minima, K, W, record.W_tot, 1, evaluations, K, False,
                         time.perf_counter() - t0, [record], increases)

"""
Command line runner: forward traces, Phi profiles, synthetic data and
identification campaigns.

Experiments are described by an INI file.  Sections and keys (all optional
except the truth) ::

    [truth]        radii = 0.4, 0.6      indices = 0.49, 9.0      R = 1.0
    [probe]        wavenumbers = 3, 6.5, 10      angles = 120
    [noise]        delta = 0.0      norm = max
    [search]       method = mslm   M = 4   n_low = 0.04   n_high = 30.25
                   L = 200   gamma = 0.01   sigma = 1.0   eps_tot = 0.03
                   eps_r = 0.1   max_iterations = 75   d_min_fraction = 0.02
                   brent_tol = 1e-4   monotone_reduction = true   L_total = 15000
    [campaign]     runs = 10   base_seed = 0   budget_seconds = 600   jobs = 1
    [forward]      wavenumbers = 3   angles = 360   field = total
    [profile]      base = 0.4, 0.6, 0.49, 9.0   parameter = 0
                   start = 0.10   stop = 0.60   step = 0.005

Run i of a campaign uses seed base_seed + i for both the noise draw and
the global search.  CSV outputs never contain wall-clock times; those go
to the log and to a separate timing file.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .forward import LayerConfig, default_angles, field_on_S
from .globalmin import MslmParams, SearchOutcome, mslm_run, reduced_random_search
from .localmin import SearchSpace
from .objective import (AdmissibleSet, ObjectiveSpec, ProbeSet, ScatterDataset,
                        epsilon_err, phi, synthesize)

log = logging.getLogger("layerscat")

METHODS = ("mslm", "rrs")


class UsageError(Exception):
    """Bad command line or configuration file."""


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _floats(text: str) -> tuple[float, ...]:
    parts = [p for p in text.replace(";", ",").split(",") if p.strip()]
    return tuple(float(p) for p in parts)


@dataclass(frozen=True)
class ForwardOptions:
    wavenumbers: tuple[float, ...] | None = None
    angles: int = 360
    field: str = "total"


@dataclass(frozen=True)
class ProfileOptions:
    base: tuple[float, ...] = (0.4, 0.6, 0.49, 9.0)
    parameter: int = 0
    start: float = 0.10
    stop: float = 0.60
    step: float = 0.005

    def grid(self) -> np.ndarray:
        count = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return np.round(self.start + self.step * np.arange(count), 12)


@dataclass(frozen=True)
class ExperimentConfig:
    truth: LayerConfig
    probe: ProbeSet = field(default_factory=ProbeSet.uniform)
    delta: float = 0.0
    noise_norm: str = "max"
    M: int = 4
    n_low: float = 0.04
    n_high: float = 30.25
    method: str = "mslm"
    params: MslmParams = field(default_factory=MslmParams)
    eps_r: float = 0.1
    d_min_fraction: float = 0.02
    brent_tol: float = 1e-4
    monotone_reduction: bool = True
    L_total: int = 15000
    runs: int = 1
    base_seed: int = 0
    budget_seconds: float | None = 600.0
    jobs: int = 1
    forward: ForwardOptions = field(default_factory=ForwardOptions)
    profile: ProfileOptions = field(default_factory=ProfileOptions)

    def __post_init__(self):
        if self.M < self.truth.n_layers:
            raise UsageError(f"M={self.M} is below the truth layer count {self.truth.n_layers}")
        if self.runs < 1:
            raise UsageError("runs must be >= 1")
        if self.method not in METHODS:
            raise UsageError(f"method must be one of {METHODS}")
        if self.delta < 0:
            raise UsageError("delta must be nonnegative")

    @property
    def admissible(self) -> AdmissibleSet:
        return AdmissibleSet(self.truth.R, self.n_low, self.n_high, self.M)

    @property
    def space(self) -> SearchSpace:
        return SearchSpace(self.admissible, d_min_fraction=self.d_min_fraction,
                           brent_tol=self.brent_tol, eps_r=self.eps_r,
                           monotone_reduction=self.monotone_reduction)

    @property
    def thresholds(self) -> tuple[float, float]:
        # the three-layer table reports its coarse level at 0.2
        return (0.01, 0.2) if self.truth.n_layers >= 3 else (0.01, 0.1)


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file not found: {p}")
    return parse_config(p.read_text())


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise UsageError(f"malformed config: {exc}") from exc
    if not cp.has_section("truth"):
        raise UsageError("config needs a [truth] section")
    try:
        return _build(cp)
    except (ValueError, KeyError) as exc:
        raise UsageError(f"invalid config: {exc}") from exc


def _build(cp: configparser.ConfigParser) -> ExperimentConfig:
    t = cp["truth"]
    R = t.getfloat("R", 1.0)
    truth = LayerConfig(_floats(t.get("radii", "")), _floats(t.get("indices", "")), R)

    sec = cp["probe"] if cp.has_section("probe") else {}
    ks = _floats(sec.get("wavenumbers", "3, 6.5, 10"))
    probe = ProbeSet.uniform(ks, int(sec.get("angles", 120)))

    nz = cp["noise"] if cp.has_section("noise") else cp["DEFAULT"]
    s = cp["search"] if cp.has_section("search") else cp["DEFAULT"]
    c = cp["campaign"] if cp.has_section("campaign") else cp["DEFAULT"]
    budget = c.get("budget_seconds", "600").strip().lower()
    params = MslmParams(L=s.getint("L", 200), gamma=s.getfloat("gamma", 0.01),
                        sigma=s.getfloat("sigma", 1.0), eps_tot=s.getfloat("eps_tot", 0.03),
                        max_iterations=s.getint("max_iterations", 75))

    fw = cp["forward"] if cp.has_section("forward") else None
    forward = ForwardOptions()
    if fw is not None:
        fks = fw.get("wavenumbers")
        forward = ForwardOptions(_floats(fks) if fks else None, fw.getint("angles", 360),
                                 fw.get("field", "total"))
        if forward.field not in ("total", "scattered"):
            raise ValueError("forward field must be total or scattered")

    pr = cp["profile"] if cp.has_section("profile") else None
    profile = ProfileOptions()
    if pr is not None:
        profile = ProfileOptions(_floats(pr.get("base", "0.4, 0.6, 0.49, 9.0")),
                                 pr.getint("parameter", 0), pr.getfloat("start", 0.10),
                                 pr.getfloat("stop", 0.60), pr.getfloat("step", 0.005))
        if not 0 <= profile.parameter < len(profile.base) or profile.step <= 0:
            raise ValueError("profile parameter or step out of range")

    return ExperimentConfig(
        truth=truth, probe=probe, delta=nz.getfloat("delta", 0.0),
        noise_norm=nz.get("norm", "max"), M=s.getint("M", 4),
        n_low=s.getfloat("n_low", 0.04), n_high=s.getfloat("n_high", 30.25),
        method=s.get("method", "mslm"), params=params, eps_r=s.getfloat("eps_r", 0.1),
        d_min_fraction=s.getfloat("d_min_fraction", 0.02),
        brent_tol=s.getfloat("brent_tol", 1e-4),
        monotone_reduction=s.getboolean("monotone_reduction", True),
        L_total=s.getint("L_total", 15000), runs=c.getint("runs", 1),
        base_seed=c.getint("base_seed", 0),
        budget_seconds=None if budget in ("", "none") else float(budget),
        jobs=c.getint("jobs", 1), forward=forward, profile=profile)


# ----------------------------------------------------------------- commands

def forward_trace(cfg: ExperimentConfig) -> str:
    """CSV of the field on the observation circle, one block per wavenumber."""
    ks = cfg.forward.wavenumbers or cfg.probe.wavenumbers
    angles = default_angles(cfg.forward.angles)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k0", "theta", "re_u", "im_u"])
    for k0 in ks:
        bf = field_on_S(cfg.truth, k0, angles)
        vals = bf.values
        if cfg.forward.field == "scattered":
            vals = vals - np.exp(1j * k0 * cfg.truth.R * np.cos(angles))
        if bf.degraded:
            log.warning("k0=%g: modes %s flagged as ill-conditioned", k0, bf.flagged_modes)
        for th, u in zip(angles, vals):
            w.writerow([_fmt(k0), _fmt(th), _fmt(u.real), _fmt(u.imag)])
    return buf.getvalue()


def profile_values(cfg: ExperimentConfig, dataset: ScatterDataset | None = None
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Phi along one coordinate of ``profile.base`` against the truth data."""
    if dataset is None:
        dataset = synthesize(cfg.truth, cfg.probe, cfg.delta, cfg.base_seed, cfg.noise_norm)
    spec = ObjectiveSpec(dataset, cfg.admissible)
    grid = cfg.profile.grid()
    base = list(cfg.profile.base)
    vals = np.empty(grid.size)
    for i, x in enumerate(grid):
        q = list(base)
        q[cfg.profile.parameter] = float(x)
        vals[i] = phi(LayerConfig.from_flat(q, cfg.truth.R), spec)
    return grid, vals


def local_minima(values: np.ndarray) -> list[int]:
    """Interior strict-left, weak-right local minima of a sampled profile."""
    v = np.asarray(values)
    return [i for i in range(1, v.size - 1) if v[i] < v[i - 1] and v[i] <= v[i + 1]]


def profile_csv(grid: np.ndarray, values: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "phi"])
    for x, v in zip(grid, values):
        w.writerow([_fmt(x), _fmt(v)])
    return buf.getvalue()


def synth_dataset(cfg: ExperimentConfig, seed: int | None = None) -> ScatterDataset:
    seed = cfg.base_seed if seed is None else seed
    return synthesize(cfg.truth, cfg.probe, cfg.delta, seed, cfg.noise_norm)


@dataclass
class RunRecord:
    run: int
    seed: int
    config: LayerConfig
    phi: float
    eps_err: float
    K: int
    W: int
    W_tot: float
    iterations: int
    evaluations: int
    local_searches: int
    converged: bool
    timed_out: bool
    increases: int
    wall_seconds: float
    successes: tuple[bool, bool]
    outcome: SearchOutcome | None = None


def identify_once(cfg: ExperimentConfig, run: int) -> RunRecord:
    seed = cfg.base_seed + run
    dataset = synth_dataset(cfg, seed)
    spec = ObjectiveSpec(dataset, cfg.admissible)
    params = replace(cfg.params, seed=seed, budget_seconds=cfg.budget_seconds)
    if cfg.method == "mslm":
        out = mslm_run(spec, params, cfg.space)
    else:
        out = reduced_random_search(spec, cfg.L_total, params.gamma, seed, cfg.space, params)
    timed_out = (cfg.budget_seconds is not None and cfg.method == "mslm"
                 and not out.converged and out.iterations < params.max_iterations)
    best = out.best
    err = epsilon_err(best.config, cfg.truth)
    ok = tuple(bool(err < t and not timed_out) for t in cfg.thresholds)
    log.info("run %d seed %d: phi=%.6g eps_err=%.5f K=%d W=%d (%.1f s)", run, seed,
             best.phi_value, err, out.K, out.W, out.wall_seconds)
    return RunRecord(run, seed, best.config, best.phi_value, err, out.K, out.W, out.W_tot,
                     out.iterations, out.evaluations, out.local_searches, out.converged,
                     timed_out, out.increases, out.wall_seconds,
                     ok, out)


def _identify_job(args):
    cfg, run = args
    return identify_once(cfg, run)


def identify_campaign(cfg: ExperimentConfig) -> list[RunRecord]:
    jobs = [(cfg, i) for i in range(cfg.runs)]
    if cfg.jobs > 1 and cfg.runs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            records = list(pool.map(_identify_job, jobs))
    else:
        records = [_identify_job(j) for j in jobs]
    return sorted(records, key=lambda r: r.run)


def summarize(cfg: ExperimentConfig, records: list[RunRecord]) -> dict:
    lo, hi = cfg.thresholds
    return {
        "runs": len(records),
        f"success_{_fmt(lo)}": sum(r.successes[0] for r in records),
        f"success_{_fmt(hi)}": sum(r.successes[1] for r in records),
        "smallest_phi": min(r.phi for r in records),
        "mean_phi": float(np.mean([r.phi for r in records])),
        "mean_K": float(np.mean([r.K for r in records])),
        "mean_W": float(np.mean([r.W for r in records])),
        "timed_out": sum(r.timed_out for r in records),
        "phi_increases": sum(r.increases for r in records),
    }


def _join(values) -> str:
    return ";".join(_fmt(v) for v in values)


def report_files(cfg: ExperimentConfig, records: list[RunRecord]) -> dict[str, str]:
    """Deterministic CSV texts keyed by file name (timing kept separate)."""
    lo, hi = cfg.thresholds
    runs = io.StringIO()
    w = csv.writer(runs, lineterminator="\n")
    w.writerow(["run", "seed", "layers", "radii", "indices", "phi", "eps_err", "K", "W",
                "W_tot", "iterations", "evaluations", "local_searches", "converged",
                "timed_out", f"success_{_fmt(lo)}", f"success_{_fmt(hi)}"])
    for r in records:
        w.writerow([r.run, r.seed, r.config.n_layers, _join(r.config.radii),
                    _join(r.config.indices), _fmt(r.phi), _fmt(r.eps_err), r.K, r.W,
                    _fmt(r.W_tot), r.iterations, r.evaluations, r.local_searches,
                    _fmt(r.converged), _fmt(r.timed_out), _fmt(r.successes[0]),
                    _fmt(r.successes[1])])

    summary = io.StringIO()
    w = csv.writer(summary, lineterminator="\n")
    w.writerow(["key", "value"])
    for k, v in summarize(cfg, records).items():
        w.writerow([k, _fmt(v)])

    trace = io.StringIO()
    w = csv.writer(trace, lineterminator="\n")
    w.writerow(["run", "j", "jL", "d_j", "K", "W", "W_tot", "best_phi", "launched",
                "new_searches"])
    minima = io.StringIO()
    wm = csv.writer(minima, lineterminator="\n")
    wm.writerow(["run", "rank", "layers", "radii", "indices", "phi", "eps_err",
                 "evaluations", "cycles"])
    for r in records:
        if r.outcome is None:
            continue
        for rec in r.outcome.records:
            w.writerow([r.run, rec.j, rec.jL, _fmt(rec.d_j), rec.K, rec.W, _fmt(rec.W_tot),
                        _fmt(rec.best_phi), rec.launched, rec.new_searches])
        ranked = sorted(r.outcome.minima, key=lambda m: m.phi_value)
        for rank, m in enumerate(ranked):
            wm.writerow([r.run, rank, m.config.n_layers, _join(m.config.radii),
                         _join(m.config.indices), _fmt(m.phi_value),
                         _fmt(epsilon_err(m.config, cfg.truth)), m.evaluations, m.cycles])

    return {"runs.csv": runs.getvalue(), "summary.csv": summary.getvalue(),
            "trace.csv": trace.getvalue(), "minima.csv": minima.getvalue()}


def timing_csv(records: list[RunRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["run", "wall_seconds"])
    for r in records:
        w.writerow([r.run, f"{r.wall_seconds:.3f}"])
    return buf.getvalue()


# ---------------------------------------------------------------------- CLI

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="layerscat",
                     description="Identify layered cylinders from boundary field data.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, text in [("forward", "field trace on the observation circle"),
                       ("profile", "Phi along one coordinate"),
                       ("synth", "synthetic dataset"),
                       ("identify", "identification campaign")]:
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="INI experiment file")
        p.add_argument("--seed", type=int, help="override base_seed")
        p.add_argument("--out", help="output file (identify: directory)")
        if name == "identify":
            p.add_argument("--runs", type=int)
            p.add_argument("--method", choices=METHODS)
            p.add_argument("--budget-seconds", type=int)
    return parser


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, base_seed=args.seed)
        if args.command == "identify":
            if args.runs is not None:
                cfg = replace(cfg, runs=args.runs)
            if args.method is not None:
                cfg = replace(cfg, method=args.method)
            if args.budget_seconds is not None:
                cfg = replace(cfg, budget_seconds=float(args.budget_seconds))
    except UsageError as exc:
        print(f"layerscat: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    t0 = time.perf_counter()
    try:
        if args.command == "forward":
            _emit(forward_trace(cfg), args.out)
        elif args.command == "profile":
            grid, vals = profile_values(cfg)
            _emit(profile_csv(grid, vals), args.out)
            i = int(np.argmin(vals))
            log.info("argmin %.6g (phi=%.6g), %d interior local minima", grid[i], vals[i],
                     len(local_minima(vals)))
        elif args.command == "synth":
            _emit(synth_dataset(cfg).to_csv(), args.out)
        else:
            records = identify_campaign(cfg)
            files = report_files(cfg, records)
            if args.out is None:
                sys.stdout.write(files["runs.csv"])
                sys.stdout.write(files["summary.csv"])
            else:
                out = Path(args.out)
                out.mkdir(parents=True, exist_ok=True)
                for name, text in files.items():
                    (out / name).write_text(text)
                (out / "timing.csv").write_text(timing_csv(records))
            for k, v in summarize(cfg, records).items():
                log.info("%s = %s", k, _fmt(v))
    except UsageError as exc:
        print(f"layerscat: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - reported as runtime failure
        log.error("%s failed: %s", args.command, exc)
        return 2
    log.info("%s done in %.1f s", args.command, time.perf_counter() - t0)
    return 0


def main() -> None:
    sys.exit(run())

"""Sweep runner: dispatch a config to the numerical modules and persist the rows."""
from __future__ import annotations

import itertools
import json
import os
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy

from .. import __version__
from ..dynamics import TorusPoint, orbit_closed_form
from ..ergodic import WeylRecord, case_index, hit_counts, weyl_bound, weyl_sums_box
from ..errors import InvalidArgument, ResourceLimit
from ..operator import OperatorSpec, sample_random_spec
from ..spectral import (GreenThresholds, bad_set_sweep, localization_table, observed_energy_grid,
                        paste_check, resonance_distance, sample_points)
from ..specio import load_spec
from .config import ExperimentConfig
from .io import write_rows

THREADS_ENV = "SKEWLOC_THREADS"


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        t = int(raw)
    except ValueError:
        raise InvalidArgument(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if t < 1:
        raise InvalidArgument(f"{THREADS_ENV} must be >= 1")
    return t


@dataclass
class RunManifest:
    config: dict
    tool_version: str
    seed: int
    stages: list = field(default_factory=list)  # {name, wall_time_s, rows}
    outputs: list = field(default_factory=list)
    partial: bool = False
    failures: list = field(default_factory=list)
    environment: dict = field(default_factory=dict)

    def stage(self, name: str, started: float, rows: int) -> None:
        self.stages.append({"name": name, "wall_time_s": round(time.perf_counter() - started, 6), "rows": rows})

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"


def build_spec(cfg: ExperimentConfig, gamma: float | None = None) -> OperatorSpec:
    if "path" in cfg.spec:
        return load_spec(cfg.spec["path"])
    params = dict(cfg.spec)
    params.setdefault("seed", cfg.seed)
    if gamma is not None:
        params["gamma"] = gamma
    return sample_random_spec(**params)


def _ordered_map(fn: Callable, jobs: list, threads: int) -> list:
    """Results in job order whatever the completion order."""
    if threads <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(fn, jobs))


def _guarded(fn: Callable, failures: list) -> Callable:
    def wrapped(job):
        try:
            return fn(job)
        except ResourceLimit as exc:
            failures.append({"job": repr(job), "error": "resource-limit", "message": str(exc)})
            return []
    return wrapped


def _sample_pair(d: int, seed: int, i: int) -> tuple[TorusPoint, TorusPoint]:
    rng = np.random.default_rng([seed, i])
    return TorusPoint.random(rng, d), TorusPoint.from_floats(rng.random(d))


def _orbit_rows(cfg, spec, threads, failures):
    def job(n):
        y = orbit_closed_form(spec.x0, n, spec.omega)
        row = {"n": n}
        row.update({f"x{i + 1}": v for i, v in enumerate(y.values().tolist())})
        if y.is_fixed:
            row.update({f"x{i + 1}_hex": h for i, h in enumerate(y.hex())})
        return [row]
    return _ordered_map(_guarded(job, failures), list(cfg.n), threads)


def _hits_rows(cfg, spec, threads, failures):
    def job(i):
        x, a = _sample_pair(spec.d, cfg.seed, i)
        rows = []
        for L in cfg.L:
            for h in hit_counts(x, a, cfg.epsilon, L, spec.omega):
                rows.append({"sample": i, "L": L, "epsilon": h.epsilon, "count": h.count,
                             "bound_ratio": h.bound_ratio})
        return rows
    return _ordered_map(_guarded(job, failures), list(range(cfg.samples)), threads)


def _weyl_rows(cfg, spec, threads, failures):
    K, d = cfg.K, spec.d
    ks = [k for k in itertools.product(range(-K, K + 1), repeat=d) if any(k)]

    def job(L):
        box = weyl_sums_box(spec.x0, K, L, spec.omega)
        return [WeylRecord(k, L, float(box[tuple(np.add(k, K))]), case_index(k),
                           weyl_bound(k, L)).to_row() for k in ks]
    return _ordered_map(_guarded(job, failures), list(cfg.L), threads)


def _thresholds(cfg) -> GreenThresholds:
    return GreenThresholds(rate_floor=cfg.rate_floor, norm_exponent=cfg.norm_exponent)


def _energies(cfg, spec) -> list[float]:
    return [float(e) for e in cfg.E] if cfg.E is not None else observed_energy_grid(spec)


def _badset_rows(cfg, spec, threads, failures):
    out = []
    for g in cfg.gamma or [None]:
        s = spec if g is None else build_spec(cfg, g)
        energies = _energies(cfg, s)

        def job(N, s=s, energies=energies, g=g):
            ests = bad_set_sweep(s, energies, N, cfg.samples, cfg.seed, _thresholds(cfg), threads)
            return [{"gamma": s.gamma, **e.to_json()} for e in ests]
        out += [_guarded(job, failures)(N) for N in cfg.N]
    return out


def _paste_rows(cfg, spec, threads, failures):
    energies = _energies(cfg, spec)
    pts = sample_points(spec.d, cfg.samples, cfg.seed)
    jobs = [(N, E, i) for N in cfg.N for E in energies for i in range(cfg.samples)]

    def job(j):
        N, E, i = j
        r = paste_check(spec, pts[i], E, N, cfg.M, cfg.c0, cfg.slack, cfg.norm_exponent)
        return [{"N": N, "E": E, "sample": i, "M": cfg.M, "hypotheses_hold": r.hypotheses_hold,
                 "conclusion_holds": r.conclusion_holds}]
    return _ordered_map(_guarded(job, failures), jobs, threads)


def _localize_rows(cfg, spec, threads, failures):
    def job(N):
        return [{"N": N, **r.to_row()} for r in localization_table(spec, N)]
    return _ordered_map(_guarded(job, failures), list(cfg.N), threads)


def _resonance_rows(cfg, spec, threads, failures):
    jobs = [(E, N1) for E in _energies(cfg, spec) for N1 in cfg.N1]

    def job(j):
        E, N1 = j
        r = resonance_distance(spec, E, N1)
        return [{"E": E, "N1": N1, "min_dist": r.min_dist, "j": r.j}]
    return _ordered_map(_guarded(job, failures), jobs, threads)


DISPATCH = {
    "orbit": _orbit_rows, "hits": _hits_rows, "weyl": _weyl_rows, "badset": _badset_rows,
    "paste": _paste_rows, "localize": _localize_rows, "resonance": _resonance_rows,
}


def run(cfg: ExperimentConfig, threads: int | None = None) -> RunManifest:
    """Run one experiment; writes ``<out>/<kind>.<format>`` and ``<out>/manifest.json``.

    Jobs that hit a resource limit are skipped; the manifest lists them and
    sets ``partial``.
    """
    cfg.validate()
    threads = default_threads() if threads is None else threads
    if threads < 1:
        raise InvalidArgument("threads must be >= 1")
    manifest = RunManifest(config=cfg.to_dict(), tool_version=__version__, seed=cfg.seed,
                           environment={"python": platform.python_version(), "numpy": np.__version__,
                                        "scipy": scipy.__version__, "threads": threads})
    t = time.perf_counter()
    spec = build_spec(cfg)
    manifest.stage("spec", t, 0)

    t = time.perf_counter()
    rows = [r for chunk in DISPATCH[cfg.kind](cfg, spec, threads, manifest.failures) for r in chunk]
    manifest.partial = bool(manifest.failures)
    manifest.stage(cfg.kind, t, len(rows))

    t = time.perf_counter()
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = write_rows(rows, out_dir / f"{cfg.kind}.{cfg.format}", cfg.format)
    manifest.outputs.append(str(path))
    manifest.stage("write", t, len(rows))
    (out_dir / "manifest.json").write_text(manifest.to_json(), encoding="utf-8")
    return manifest

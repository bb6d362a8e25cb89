"""Sweep driver: paired trials, worker pool, averaged CSV rows.

Trial ``i`` of every sweep value draws its scenario and cache from the seed
sequence addressed by (master seed, i), and one job runs every requested
algorithm on that draw, so algorithm comparisons are paired.  Per-trial
records are kept; the means are computed from them after all jobs finish,
which makes the output independent of worker scheduling.
"""

from __future__ import annotations

import csv
import logging
import math
import os
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from ..baselines import solve_fullcoop_unicast, solve_nearest_association, solve_uncoded_unicast
from ..caching import fcd_place, probc_place
from ..network import make_scenario, seed_sequence
from ..optimizer import InitPolicy, run_bcu, run_gbsc
from .config import ExperimentConfig

log = logging.getLogger(__name__)

THREADS_ENV = "MDSDELIVERY_THREADS"


@dataclass
class TrialRecord:
    parameter: str
    value: float
    algorithm: str
    caching: str
    trial: int
    seed: int
    total: float
    T_E: float
    T_F: float
    runtime: float
    ok: bool = True
    error: str = ""


@dataclass
class ResultRow:
    parameter: str
    value: float
    algorithm: str
    caching: str
    capacity: float
    mean_total: float
    mean_T_E: float
    mean_T_F: float
    trials: int
    failed: int
    seed: int
    runtime: float


RESULT_FIELDS = [f.name for f in fields(ResultRow)]
TRIAL_FIELDS = [f.name for f in fields(TrialRecord)]


@dataclass
class ExperimentResult:
    rows: list[ResultRow]
    records: list[TrialRecord]

    @property
    def failures(self) -> list[TrialRecord]:
        return [r for r in self.records if not r.ok]

    def row(self, value, algorithm) -> ResultRow:
        for r in self.rows:
            if r.value == value and r.algorithm == algorithm:
                return r
        raise KeyError((value, algorithm))


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "")
    try:
        return max(1, int(raw)) if raw else 1
    except ValueError:
        log.warning("ignoring non-integer %s=%r", THREADS_ENV, raw)
        return 1


def trial_inputs(cfg: ExperimentConfig, trial: int):
    """Scenario and cache of one trial; depends only on (config point, master seed, trial)."""
    ss = seed_sequence(cfg.experiment.seed, trial)
    params = cfg.radio_params()
    lib = cfg.library_params()
    g = cfg.geometry
    scenario = make_scenario(params, lib, seed=ss, area_half_width=g.area_half_width,
                             exclusion_radius=g.exclusion_radius, shadowing_db=g.shadowing_db,
                             antenna_gain_dbi=g.antenna_gain_dbi)
    place = probc_place if cfg.cache.strategy == "probc" else fcd_place
    cache = place(lib, params.num_sbs, cfg.cache.capacity, seed=ss)
    return scenario, cache


def run_trial(cfg: ExperimentConfig, value: float, trial: int, algorithms=None) -> list[TrialRecord]:
    """``algorithms`` (default: all configured) on trial ``trial`` of ``cfg``, already set to ``value``."""
    algs = tuple(cfg.experiment.algorithms if algorithms is None else algorithms)
    opts = dict(schedule=cfg.penalty, init=InitPolicy(seed=seed_sequence(cfg.experiment.seed, trial)),
                stop=cfg.stop, engine=cfg.solver.engine, tol=cfg.solver.tol)
    out = []
    base = dict(parameter=cfg.sweep.parameter, value=value, caching=cfg.cache.strategy, trial=trial,
                seed=cfg.experiment.seed)
    try:
        scenario, cache = trial_inputs(cfg, trial)
    except Exception as exc:  # noqa: BLE001 - a failed draw is recorded, not fatal
        return [TrialRecord(algorithm=a, total=math.nan, T_E=math.nan, T_F=math.nan, runtime=0.0, ok=False,
                            error=f"{type(exc).__name__}: {exc}", **base) for a in algs]
    bcu = None
    for alg in algs:
        t0 = time.perf_counter()
        try:
            if alg in ("mds-bcu", "mds-gbsc"):
                if bcu is None:
                    bcu = run_bcu(scenario, cache, **opts)
                res = bcu
                if alg == "mds-gbsc":
                    res = run_gbsc(bcu.plan, scenario, cache, cfg.stop, unicast=False,
                                   engine=cfg.solver.engine, tol=cfg.solver.tol)
            elif alg == "uncoded1":
                res = solve_uncoded_unicast(scenario, cache, **opts)
            elif alg == "uncoded2":
                res = solve_fullcoop_unicast(scenario, cache, **opts)
            else:
                res = solve_nearest_association(scenario, cache, **opts)
            rep = res.report
            out.append(TrialRecord(algorithm=alg, total=rep.total, T_E=rep.T_E, T_F=rep.T_F,
                                   runtime=time.perf_counter() - t0, **base))
        except Exception as exc:  # noqa: BLE001 - a failed run is recorded, not fatal
            log.warning("trial %d (%s=%s, %s) failed: %s", trial, cfg.sweep.parameter, value, alg, exc)
            log.debug("%s", traceback.format_exc())
            out.append(TrialRecord(algorithm=alg, total=math.nan, T_E=math.nan, T_F=math.nan,
                                   runtime=time.perf_counter() - t0, ok=False,
                                   error=f"{type(exc).__name__}: {exc}", **base))
    return out


def _job(args):
    cfg, value, trial, algs = args
    return run_trial(cfg.at(value), value, trial, algs)


def aggregate(cfg: ExperimentConfig, records: list[TrialRecord]) -> list[ResultRow]:
    rows = []
    for value in cfg.sweep.values:
        point = cfg.at(value)
        for alg in cfg.experiment.algorithms:
            recs = sorted((r for r in records if r.value == value and r.algorithm == alg), key=lambda r: r.trial)
            good = [r for r in recs if r.ok]
            n = len(good)

            def mean(attr):
                return math.fsum(getattr(r, attr) for r in good) / n if n else math.nan

            rows.append(ResultRow(cfg.sweep.parameter, value, alg, cfg.cache.strategy, point.cache.capacity,
                                  mean("total"), mean("T_E"), mean("T_F"), n, len(recs) - n,
                                  cfg.experiment.seed, math.fsum(r.runtime for r in recs)))
    return rows


def _append_csv(path: Path, fieldnames: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fresh = not path.exists() or path.stat().st_size == 0
    with path.open("a", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fieldnames)
        if fresh:
            w.writeheader()
        for r in rows:
            w.writerow(asdict(r))


def trials_path(output) -> Path:
    p = Path(output)
    return p.with_name(p.stem + ".trials" + p.suffix)


def run_experiment(cfg: ExperimentConfig, threads: int | None = None, output: str | os.PathLike | None = "config",
                   memo: dict | None = None) -> ExperimentResult:
    """Run every (sweep value, trial) job and write the averaged rows.

    ``output="config"`` writes to the configured path and ``None`` skips
    writing.  The per-trial records go to a sibling ``.trials`` CSV.
    ``memo`` maps (config point, trial, algorithm) to finished records, so
    sweeps that share a point reuse its trials.
    """
    threads = default_threads() if threads is None else max(1, int(threads))
    records: list[TrialRecord] = []
    todo = []
    for v in cfg.sweep.values:
        for trial in range(cfg.experiment.trials):
            missing = []
            for alg in cfg.experiment.algorithms:
                hit = None if memo is None else memo.get(_memo_key(cfg, v, trial, alg))
                if hit is None:
                    missing.append(alg)
                else:
                    records.append(TrialRecord(**{**asdict(hit), "parameter": cfg.sweep.parameter, "value": v}))
            if missing:
                todo.append((cfg, v, trial, tuple(missing)))
    if threads > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            done = list(pool.map(_job, todo))
    else:
        done = [_job(j) for j in todo]
    for (_, v, trial, _), recs in zip(todo, done):
        for r in recs:
            if memo is not None:
                memo[_memo_key(cfg, v, trial, r.algorithm)] = r
            records.append(r)
    rows = aggregate(cfg, records)
    if output is not None:
        out = Path(cfg.experiment.output if output == "config" else output)
        _append_csv(out, RESULT_FIELDS, rows)
        _append_csv(trials_path(out), TRIAL_FIELDS,
                    sorted(records, key=lambda r: (cfg.sweep.values.index(r.value), r.algorithm, r.trial)))
    return ExperimentResult(rows, records)


def _memo_key(cfg: ExperimentConfig, value, trial, algorithm):
    point = cfg.at(value)
    # the sweep section and the output path do not change a trial's outcome
    return (point.radio, point.library, point.cache, point.geometry, point.experiment.seed,
            point.penalty, point.stop, point.solver, trial, algorithm)

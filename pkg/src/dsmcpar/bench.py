"""Timing harness: parent-process wall time, alpha estimation, speedup tables."""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass, field

from . import gas, parallel, perf
from .errors import ConfigError


@dataclass(frozen=True)
class Timing:
    samples: tuple

    @property
    def repeats(self) -> int:
        return len(self.samples)

    @property
    def median(self) -> float:
        return statistics.median(self.samples)

    @property
    def min(self) -> float:
        return min(self.samples)

    @property
    def cv(self) -> float:
        if len(self.samples) < 2 or self.median == 0:
            return 0.0
        return statistics.stdev(self.samples) / statistics.fmean(self.samples)

    @property
    def noisy(self) -> bool:
        return self.cv > 0.10


def measure_parent_time(task, repeats: int = 3) -> Timing:
    """Wall time of ``task()`` as seen by the calling (parent) process:
    from before any worker is spawned until after the final merge."""
    if repeats < 1:
        raise ConfigError("repeats must be >= 1")
    out = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        task()
        out.append(time.perf_counter() - t0)
    return Timing(tuple(out))


def estimate_psir_alpha(problem, n: int, master_seed: int = 0, backend=None) -> tuple[float, dict]:
    """Parallel fraction of the sequential ensemble: the run loop is the
    parallel part, everything the parent does around it is serial."""
    t0 = time.perf_counter()
    runs = []
    t_runs = 0.0
    for r in range(n):
        a = time.perf_counter()
        runs.append(gas.run_unsteady(problem, r, master_seed, backend=backend))
        t_runs += time.perf_counter() - a
    parallel.merge_ensemble(runs)
    total = time.perf_counter() - t0
    prof = {"parallel": t_runs, "serial": max(total - t_runs, 0.0)}
    return perf.estimate_alpha(prof), prof


def estimate_dp_alpha(problem, master_seed: int = 0, backend=None) -> tuple[float, dict]:
    """Parallel fraction inside one run (stage 1 and stage 2 vs the index rebuild)."""
    r = gas.run_unsteady(problem, 0, master_seed, backend=backend)
    prof = {"parallel": r.profile["parallel"], "serial": r.profile["serial"]}
    return perf.estimate_alpha(prof), prof


@dataclass
class BenchReport:
    config: dict
    physical_cores: int
    rows: list = field(default_factory=list)
    alpha: dict = field(default_factory=dict)
    paths: list = field(default_factory=list)

    def valid_rows(self) -> list:
        return [r for r in self.rows if not r["excluded"]]


def run_bench(problem, strategy: str, n: int, p_list, master_seed: int = 0, repeats: int = 3,
              backend=None, mode: str = "process") -> BenchReport:
    """Time ``strategy`` at every worker count in ``p_list`` against the
    sequential reference ``T1`` and put measured and predicted speedups side
    by side.  Worker counts above the physical core count are marked
    excluded: they say nothing about the model."""
    if strategy not in ("psir", "dp"):
        raise ConfigError("bench supports psir and dp")
    cores = parallel.physical_cores()
    if strategy == "psir":
        alpha, prof = estimate_psir_alpha(problem, n, master_seed, backend)

        def task(p):
            if p == 1:
                return lambda: parallel.sequential_execute(problem, n, master_seed, backend)
            return lambda: parallel.psir_execute(problem, n, p, master_seed, backend, mode)
    else:
        alpha, prof = estimate_dp_alpha(problem, master_seed, backend)

        def task(p):
            return lambda: parallel.dp_execute(problem, 0, p, master_seed, backend)

    t1 = measure_parent_time(task(1), repeats)
    report = BenchReport(
        {"problem": problem.name, "strategy": strategy, "n": n, "p": list(p_list),
         "master_seed": master_seed, "repeats": repeats},
        cores, alpha={"alpha": alpha, "profile": prof},
    )
    for p in p_list:
        tm = t1 if p == 1 else measure_parent_time(task(p), repeats)
        sp = t1.median / tm.median
        report.rows.append({
            "strategy": strategy, "p": p, "repeats": tm.repeats,
            "median_s": tm.median, "min_s": tm.min, "cv": tm.cv, "cv_flag": tm.noisy,
            "speedup": sp, "efficiency": sp / p,
            "alpha": alpha, "predicted_speedup": perf.amdahl_speedup(alpha, p),
            "predicted_efficiency": perf.amdahl_efficiency(alpha, p),
            "physical_cores": cores, "excluded": p > cores,
        })
    return report

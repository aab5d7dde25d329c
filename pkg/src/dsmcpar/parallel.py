"""Parallel execution strategies over the gas kernel.

``sequential``  the plain outer loop over runs.
``psir``        parallel statistically independent runs: whole runs are
                dealt to ``p`` worker processes in static blocks.
``dp``          data parallelism inside one run: ``p2`` threads take every
                ``p2``-th particle, then every ``p2``-th cell, with one
                thread rebuilding the cell index in between.
``tlp``         ``p1`` leader processes, each driving a static DP team of
                ``p2`` threads (``p = p1 * p2``).
``tlpdpr``      ``p1`` leaders borrow helper threads from a shared heap of
                ``p - p1`` workers for every parallel phase.

Strategies change how long things take, never the answer: every strategy
returns results bit-identical to the sequential loop for the same seed.
"""

from __future__ import annotations

import math
import multiprocessing as mp
import os
import threading
import time
import traceback
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import psutil

from . import gas, kernels
from .errors import ConfigError, MergeError

STRATEGIES = ("sequential", "psir", "dp", "tlp", "tlpdpr")

_FORK = mp.get_context("fork")


def physical_cores() -> int:
    return psutil.cpu_count(logical=False) or os.cpu_count() or 1


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def static_team_size(p: int, p1: int) -> int:
    """Static second-level team size ``floor((p - p1) / p1) + 1``."""
    return (p - p1) // p1 + 1


def requested_team_size(p: int, p1: int, pri: float) -> int:
    """Team a TLPDPR leader asks for: ``(1 + pri) * p2`` rounded half up."""
    return round_half_up((1.0 + pri) * static_team_size(p, p1))


def block_assignment(n: int, p: int) -> list[list[int]]:
    """Static blocks of ``n // p`` consecutive runs per worker; the remaining
    ``n % p`` runs go one each to the lowest-id workers."""
    base, rem = divmod(n, p)
    blocks = [list(range(m * base, (m + 1) * base)) for m in range(p)]
    for r in range(rem):
        blocks[r].append(base * p + r)
    return blocks


@dataclass
class StrategyConfig:
    strategy: str = "sequential"
    n: int = 1
    p: int = 1
    p1: int = 1
    p2: int = 1
    pri: float = 0.0
    master_seed: int = 0

    def validate(self) -> list[str]:
        """Raise on hard violations; return (and emit) soft warnings."""
        s = self.strategy
        if s not in STRATEGIES:
            raise ConfigError(f"unknown strategy {s!r}; choose from {', '.join(STRATEGIES)}")
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        for name in ("p", "p1", "p2"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.pri < 0:
            raise ConfigError("pri must be >= 0")
        msgs = []
        if s == "psir" and self.p > self.n:
            msgs.append(f"psir with p={self.p} > n={self.n}: {self.p - self.n} workers stay idle")
        if s in ("tlp", "tlpdpr") and self.n % self.p1:
            msgs.append(f"n={self.n} is not a multiple of p1={self.p1}: leaders carry unequal loads")
        if s == "tlpdpr" and self.p1 > self.p:
            raise ConfigError("tlpdpr requires p1 <= p")
        if s == "dp" and self.n != 1:
            msgs.append("dp executes a single run; n is ignored")
        for m in msgs:
            warnings.warn(m, stacklevel=2)
        return msgs

    @property
    def workers(self) -> int:
        return {
            "sequential": 1,
            "psir": self.p,
            "dp": self.p2,
            "tlp": self.p1 * self.p2,
            "tlpdpr": self.p,
        }[self.strategy]


# -- synchronisation primitives --------------------------------------------

class CountingBarrier:
    """``threading.Barrier`` that counts completed episodes."""

    def __init__(self, parties: int):
        self._barrier = threading.Barrier(parties)
        self.episodes = 0

    def wait(self):
        if self._barrier.wait() == 0:
            self.episodes += 1

    def abort(self):
        self._barrier.abort()


@dataclass(frozen=True)
class AllocationEvent:
    seq: int
    time_ns: int
    leader: int
    run_id: int
    requested: int
    granted: int
    released: int
    available: int


class HeapError(RuntimeError):
    pass


def grant_size(requested: int, available: int) -> int:
    """Allocation rule shared with the scheduler simulator: partial grants,
    possibly zero, never more than what is idle."""
    return max(0, min(requested, available))


class ProcessorHeap:
    """Counted pool of ``capacity`` helper workers shared by all leaders.

    Requests are served first come, first served, and partially: a leader
    gets ``min(requested, available)`` helpers, possibly none.  The counter
    lives in shared memory so forked leader processes see one heap; each
    process keeps its own part of the allocation log.
    """

    def __init__(self, capacity: int):
        if capacity < 0:
            raise ConfigError("heap capacity must be >= 0")
        self.capacity = capacity
        self._lock = _FORK.Lock()
        self._available = _FORK.Value("q", capacity, lock=False)
        self._seq = _FORK.Value("q", 0, lock=False)
        self.log: list[AllocationEvent] = []

    @property
    def available(self) -> int:
        return self._available.value

    def _record(self, leader, run_id, requested, granted, released):
        self._seq.value += 1
        self.log.append(AllocationEvent(self._seq.value, time.monotonic_ns(), leader, run_id,
                                        requested, granted, released, self._available.value))

    def acquire(self, leader: int, requested: int, run_id: int = -1) -> int:
        with self._lock:
            granted = grant_size(requested, self._available.value)
            self._available.value -= granted
            self._record(leader, run_id, requested, granted, 0)
        return granted

    def release(self, leader: int, count: int, run_id: int = -1):
        with self._lock:
            if self._available.value + count > self.capacity:
                raise HeapError(f"leader {leader} released {count} helpers it does not hold")
            self._available.value += count
            self._record(leader, run_id, 0, 0, count)


def check_allocation_log(log: list[AllocationEvent], capacity: int):
    """Assert the heap invariants over a log ordered by ``seq``."""
    outstanding: dict[int, int] = {}
    for e in sorted(log, key=lambda e: e.seq):
        if e.granted > e.requested:
            raise HeapError(f"grant {e.granted} exceeds request {e.requested}")
        if e.released:
            if outstanding.get(e.leader, 0) < e.released:
                raise HeapError(f"leader {e.leader} releases more than it holds")
            outstanding[e.leader] -= e.released
        else:
            outstanding[e.leader] = outstanding.get(e.leader, 0) + e.granted
        if not 0 <= e.available <= capacity:
            raise HeapError(f"available={e.available} outside [0, {capacity}]")
        if sum(outstanding.values()) + e.available != capacity:
            raise HeapError(f"outstanding + available != capacity at seq {e.seq}")


# -- results ----------------------------------------------------------------

@dataclass
class MergedFields:
    """Ensemble sums per sampling instant, folded in ascending run id order."""

    times: list
    accumulators: list
    n_runs: int

    def equals(self, other: "MergedFields") -> bool:
        return (
            self.times == other.times
            and self.n_runs == other.n_runs
            and len(self.accumulators) == len(other.accumulators)
            and all(a.equals(b) for a, b in zip(self.accumulators, other.accumulators))
        )

    def derived(self, problem: gas.FlowProblem) -> list[dict]:
        vol = problem.geometry.cell_volumes()
        return [acc.derived(problem.collision.weight, vol) for acc in self.accumulators]


def merge_ensemble(results: list[gas.RunResult]) -> MergedFields:
    """Fold per-run accumulators in ascending ``run_id`` order."""
    if not results:
        raise MergeError("nothing to merge")
    ordered = sorted(results, key=lambda r: r.run_id)
    times = ordered[0].times
    n_cells = ordered[0].snapshots[0].sum_n.size if ordered[0].snapshots else None
    for r in ordered[1:]:
        if r.times != times:
            raise MergeError(f"run {r.run_id} has a different snapshot schedule")
        if r.snapshots and r.snapshots[0].sum_n.size != n_cells:
            raise MergeError(f"run {r.run_id} has a different cell count")
    merged = [acc.copy() for acc in ordered[0].snapshots]
    for r in ordered[1:]:
        for m, acc in zip(merged, r.snapshots):
            m.add(acc)
    return MergedFields(list(times), merged, len(ordered))


@dataclass
class EnsembleResult:
    runs: list
    merged: MergedFields
    config: StrategyConfig
    timing: dict = field(default_factory=dict)
    assignment: list = field(default_factory=list)
    sync: dict = field(default_factory=dict)
    allocation_log: list = field(default_factory=list)

    @property
    def collision_count(self) -> int:
        return sum(r.collision_count for r in self.runs)


# -- leaders (level one) ----------------------------------------------------

def _leader_entry(queue, leader, fn, args):
    try:
        queue.put(("ok", leader, fn(leader, *args)))
    except BaseException:  # noqa: BLE001 - shipped to the parent
        queue.put(("err", leader, traceback.format_exc()))


def run_leaders(fn, args_per_leader: list, mode: str = "process") -> list:
    """Run ``fn(leader, *args)`` for every leader concurrently; results by leader id.

    ``mode='process'`` forks one process per leader (PSIR's independent
    address spaces); ``'thread'`` keeps leaders in this process.
    """
    p = len(args_per_leader)
    if p == 1 or mode == "inline":
        return [fn(m, *a) for m, a in enumerate(args_per_leader)]
    out: list = [None] * p
    if mode == "thread":
        errors = []

        def target(m, a):
            try:
                out[m] = fn(m, *a)
            except BaseException:  # noqa: BLE001
                errors.append(traceback.format_exc())

        threads = [threading.Thread(target=target, args=(m, a)) for m, a in enumerate(args_per_leader)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        if errors:
            raise RuntimeError("leader failed:\n" + errors[0])
        return out
    if mode != "process":
        raise ValueError(f"unknown leader mode {mode!r}")
    queue = _FORK.Queue()
    procs = [_FORK.Process(target=_leader_entry, args=(queue, m, fn, a), daemon=True)
             for m, a in enumerate(args_per_leader)]
    for pr in procs:
        pr.start()
    failure = None
    for _ in range(p):
        status, m, payload = queue.get()
        if status == "err" and failure is None:
            failure = f"leader {m} failed:\n{payload}"
        out[m] = payload
    for pr in procs:
        pr.join()
    if failure:
        raise RuntimeError(failure)
    return out


def _backend_name(backend) -> str:
    return (backend or kernels.default).NAME


def _seq_block(leader, problem, run_ids, seed, backend_name):
    be = kernels.get_backend(backend_name)
    return [(leader, gas.run_unsteady(problem, r, seed, backend=be)) for r in run_ids]


def _dp_block(leader, problem, run_ids, seed, p2, backend_name):
    be = kernels.get_backend(backend_name)
    return [(leader, dp_execute(problem, r, p2, seed, backend=be)) for r in run_ids]


# -- strategies -------------------------------------------------------------

def _finish(results, cfg, t0, assignment, sync=None, log=None) -> EnsembleResult:
    runs = sorted(results, key=lambda r: r.run_id)
    merged = merge_ensemble(runs)
    wall = time.perf_counter() - t0
    cores = physical_cores()
    timing = {
        "wall_time": wall,
        "physical_cores": cores,
        "workers": cfg.workers,
        "oversubscription": cfg.workers / cores,
        "oversubscribed": cfg.workers > cores,
    }
    return EnsembleResult(runs, merged, cfg, timing, assignment, sync or {}, log or [])


def sequential_execute(problem, n: int, master_seed: int = 0, backend=None) -> EnsembleResult:
    t0 = time.perf_counter()
    cfg = StrategyConfig("sequential", n=n, master_seed=master_seed)
    runs = [gas.run_unsteady(problem, r, master_seed, backend=backend) for r in range(n)]
    return _finish(runs, cfg, t0, [list(range(n))])


def psir_execute(problem, n: int, p: int, master_seed: int = 0, backend=None,
                 mode: str = "process") -> EnsembleResult:
    """Runs ``0..n-1`` dealt in static blocks to ``p`` workers; single-context merge."""
    t0 = time.perf_counter()
    cfg = StrategyConfig("psir", n=n, p=p, master_seed=master_seed)
    cfg.validate()
    problem.validate()
    blocks = block_assignment(n, p)
    name = _backend_name(backend)
    out = run_leaders(_seq_block, [(problem, b, master_seed, name) for b in blocks], mode)
    executed = [[] for _ in range(p)]
    runs = []
    for part in out:
        for leader, r in part:
            executed[leader].append(r.run_id)
            runs.append(r)
    return _finish(runs, cfg, t0, executed)


def dp_execute(problem, run_id: int = 0, p2: int = 1, master_seed: int = 0, backend=None) -> gas.RunResult:
    """One run with a static team of ``p2`` threads.

    Per step: stage 1 over particles ``m::p2`` (worker 0 also generates);
    barrier; worker 0 rebuilds the index; barrier; stage 2 over cells
    ``m::p2``; barrier.  One more barrier follows the time loop.
    """
    if p2 < 1:
        raise ConfigError("p2 must be >= 1")
    problem.validate()
    state = gas.KernelState(problem, run_id, master_seed, backend)
    result = gas.new_result(state)
    n_steps = problem.clock.n_steps
    barrier = CountingBarrier(p2)
    coll = [0] * p2
    errors: list[BaseException] = []
    prof = {"parallel": 0.0, "serial": 0.0}

    def worker(m: int):
        try:
            for k in range(n_steps):
                t0 = time.perf_counter()
                gas.stage_particles(state, m, p2, k)
                barrier.wait()
                t1 = time.perf_counter()
                if m == 0:
                    gas.stage_serial(state, k)
                barrier.wait()
                t2 = time.perf_counter()
                coll[m] = gas.stage_cells(state, m, p2, k)
                barrier.wait()
                if m == 0:
                    t3 = time.perf_counter()
                    prof["parallel"] += (t1 - t0) + (t3 - t2)
                    prof["serial"] += t2 - t1
                    gas.finish_step(state, sum(coll), result)
            barrier.wait()
        except threading.BrokenBarrierError:
            pass
        except BaseException as exc:  # noqa: BLE001 - re-raised by the leader
            errors.append(exc)
            barrier.abort()

    helpers = [threading.Thread(target=worker, args=(m,), daemon=True) for m in range(1, p2)]
    for h in helpers:
        h.start()
    worker(0)
    for h in helpers:
        h.join()
    if errors:
        raise errors[0]
    result = gas.close_result(state, result)
    result.profile = dict(prof, barriers=barrier.episodes, p2=p2)
    return result


def tlp_execute(problem, n: int, p1: int, p2: int, master_seed: int = 0, backend=None,
                mode: str = "process") -> EnsembleResult:
    """PSIR over ``p1`` leaders, each running its runs with a DP team of ``p2``."""
    t0 = time.perf_counter()
    cfg = StrategyConfig("tlp", n=n, p=p1 * p2, p1=p1, p2=p2, master_seed=master_seed)
    cfg.validate()
    problem.validate()
    blocks = block_assignment(n, p1)
    name = _backend_name(backend)
    out = run_leaders(_dp_block, [(problem, b, master_seed, p2, name) for b in blocks], mode)
    executed = [[] for _ in range(p1)]
    runs = []
    for part in out:
        for leader, r in part:
            executed[leader].append(r.run_id)
            runs.append(r)
    # the final cross-run synchronisation is the join of all leaders above
    sync = {"per_run": {r.run_id: r.profile["barriers"] for r in runs}, "final": 1}
    return _finish(runs, cfg, t0, executed, sync)


def _team_phase(pool, fn, state, team, k):
    futures = [pool.submit(fn, state, m, team, k) for m in range(1, team)]
    total = fn(state, 0, team, k)
    for f in futures:
        total += f.result()
    return total


def _dpr_block(leader, problem, run_ids, seed, heap, want, backend_name):
    be = kernels.get_backend(backend_name)
    results = []
    with ThreadPoolExecutor(max_workers=max(1, heap.capacity)) as pool:

        def phase(fn, state, k, run_id, phases):
            g = heap.acquire(leader, want - 1, run_id)
            t0 = time.perf_counter()
            try:
                out = _team_phase(pool, fn, state, 1 + g, k)
            finally:
                phases.append(("parallel", time.perf_counter() - t0, 1 + g))
                heap.release(leader, g, run_id)
            return out

        for run_id in run_ids:
            state = gas.KernelState(problem, run_id, seed, be)
            result = gas.new_result(state)
            phases: list = []
            for k in range(problem.clock.n_steps):
                phase(gas.stage_particles, state, k, run_id, phases)
                t0 = time.perf_counter()
                gas.stage_serial(state, k)
                phases.append(("serial", time.perf_counter() - t0, 1))
                coll = phase(gas.stage_cells, state, k, run_id, phases)
                t0 = time.perf_counter()
                gas.finish_step(state, coll, result)
                phases.append(("serial", time.perf_counter() - t0, 1))
            result = gas.close_result(state, result)
            result.profile = {"phases": phases}
            results.append((leader, result))
    return results, [e for e in heap.log if e.leader == leader]


def tlpdpr_execute(problem, n: int, p1: int, p: int, pri: float = 0.0, master_seed: int = 0,
                   backend=None, mode: str = "process") -> EnsembleResult:
    """TLP with dynamic processor reallocation from a heap of ``p - p1`` helpers.

    Before each parallel phase a leader asks for ``p2' - 1`` helpers, where
    ``p2' = round((1 + pri) * p2)`` and ``p2`` is the static team size; it
    proceeds with whatever is granted and returns the helpers afterwards.
    """
    t0 = time.perf_counter()
    cfg = StrategyConfig("tlpdpr", n=n, p=p, p1=p1, p2=static_team_size(p, p1), pri=pri,
                         master_seed=master_seed)
    cfg.validate()
    problem.validate()
    heap = ProcessorHeap(p - p1)
    want = requested_team_size(p, p1, pri)
    blocks = block_assignment(n, p1)
    name = _backend_name(backend)
    out = run_leaders(_dpr_block, [(problem, b, master_seed, heap, want, name) for b in blocks], mode)
    executed = [[] for _ in range(p1)]
    runs, log = [], []
    for part, entries in out:
        log.extend(entries)
        for leader, r in part:
            executed[leader].append(r.run_id)
            runs.append(r)
    log.sort(key=lambda e: e.seq)
    res = _finish(runs, cfg, t0, executed, {"final": 1}, log)
    res.timing["requested_team"] = want
    return res


def execute(problem, cfg: StrategyConfig, backend=None, mode: str = "process") -> EnsembleResult:
    """Dispatch on ``cfg.strategy``."""
    cfg.validate()
    s = cfg.strategy
    if s == "sequential":
        return sequential_execute(problem, cfg.n, cfg.master_seed, backend)
    if s == "psir":
        return psir_execute(problem, cfg.n, cfg.p, cfg.master_seed, backend, mode)
    if s == "dp":
        t0 = time.perf_counter()
        r = dp_execute(problem, 0, cfg.p2, cfg.master_seed, backend)
        return _finish([r], cfg, t0, [[0]], {"per_run": {0: r.profile["barriers"]}})
    if s == "tlp":
        return tlp_execute(problem, cfg.n, cfg.p1, cfg.p2, cfg.master_seed, backend, mode)
    return tlpdpr_execute(problem, cfg.n, cfg.p1, cfg.p, cfg.pri, cfg.master_seed, backend, mode)


def allocation_log_rows(log: list[AllocationEvent]) -> list[dict]:
    t_ref = log[0].time_ns if log else 0
    return [
        {"time_ns": e.time_ns - t_ref, "leader": e.leader, "run_id": e.run_id, "requested": e.requested,
         "granted": e.granted, "released": e.released, "available": e.available}
        for e in log
    ]


def merged_equal(a: EnsembleResult, b: EnsembleResult) -> bool:
    return a.merged.equals(b.merged) and len(a.runs) == len(b.runs) and all(
        x.same_science(y) for x, y in zip(a.runs, b.runs)
    )


__all__ = [
    "STRATEGIES", "StrategyConfig", "CountingBarrier", "ProcessorHeap", "AllocationEvent", "HeapError",
    "MergedFields", "EnsembleResult", "merge_ensemble", "block_assignment", "static_team_size",
    "requested_team_size", "round_half_up", "sequential_execute", "psir_execute", "dp_execute",
    "tlp_execute", "tlpdpr_execute", "execute", "check_allocation_log", "allocation_log_rows",
    "merged_equal", "physical_cores", "run_leaders", "grant_size",
]

_ = np  # numpy is part of the public result types

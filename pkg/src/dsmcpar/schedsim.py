"""Discrete-event simulation of TLP / TLPDPR scheduling.

Each run is a list of ``(seq, work)`` phase pairs.  A leader spends
``seq`` alone, then asks the heap for ``p2' - 1`` helpers, gets
``min(request, available)`` of them, and finishes ``work`` in
``work / (1 + granted)``.  Helpers return to the heap at the end of the
phase and are handed out again at once.  Leaders take their runs in the
same static blocks as the real executor.

Events at the same instant: releases first, then requests in leader-id
order.
"""

from __future__ import annotations

import csv
import heapq
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import perf
from .errors import ParameterError
from .parallel import block_assignment, grant_size, requested_team_size, static_team_size

_RELEASE, _REQUEST, _SEQ = 0, 1, 2


@dataclass(frozen=True)
class RunProfile:
    phases: tuple  # per run: tuple of (seq, work) pairs
    p1: int = 1
    p: int = 1
    pri: float = 0.0
    offsets: tuple | None = None  # start time per leader

    def __post_init__(self):
        if not self.phases:
            raise ParameterError("profile needs at least one run")
        if self.p1 < 1 or self.p < self.p1:
            raise ParameterError("need 1 <= p1 <= p")
        if self.pri < 0:
            raise ParameterError("pri must be >= 0")
        for run in self.phases:
            for s, w in run:
                if s < 0 or w < 0:
                    raise ParameterError("phase durations must be >= 0")
        if self.offsets is not None and len(self.offsets) != self.p1:
            raise ParameterError("need one offset per leader")

    @property
    def n(self) -> int:
        return len(self.phases)

    @property
    def p2(self) -> int:
        return static_team_size(self.p, self.p1)

    @property
    def request(self) -> int:
        return requested_team_size(self.p, self.p1, self.pri) - 1

    def totals(self) -> tuple[float, float]:
        seq = math.fsum(s for run in self.phases for s, _ in run)
        par = math.fsum(w for run in self.phases for _, w in run)
        return seq, par

    @property
    def beta(self) -> float:
        seq, par = self.totals()
        return seq / (seq + par)

    def with_(self, **kw) -> "RunProfile":
        return replace(self, **kw)


def _split(beta: float, cycles: int):
    if not 0 <= beta <= 1:
        raise ParameterError("beta must lie in [0, 1]")
    if cycles < 1:
        raise ParameterError("cycles must be >= 1")
    return beta / cycles, (1.0 - beta) / cycles


def even_profile(beta: float, n: int, p1: int, p: int, pri: float = 0.0, cycles: int = 20) -> RunProfile:
    """Identical runs of unit work, leaders staggered evenly over one cycle.

    The cycle is measured with the requested team, so with pri at or below
    the threshold the parallel phases of different leaders do not pile up.
    """
    s, w = _split(beta, cycles)
    prof = RunProfile(tuple(((s, w),) * cycles for _ in range(n)), p1, p, pri)
    period = s + w / (prof.request + 1)
    return prof.with_(offsets=tuple(i * period / p1 for i in range(p1)))


def random_profile(beta: float, n: int, p1: int, p: int, pri: float = 0.0, cycles: int = 20,
                   jitter: float = 0.5, seed: int = 0) -> RunProfile:
    """Runs of unit work whose sequential phases are jittered by
    ``U(1 - jitter, 1 + jitter)`` and rescaled so every run keeps ``beta``
    exactly; leader start offsets are uniform over one nominal cycle."""
    s, w = _split(beta, cycles)
    rs = np.random.default_rng(seed)
    runs = []
    for _ in range(n):
        seq = s * rs.uniform(1 - jitter, 1 + jitter, cycles)
        seq *= beta / seq.sum()
        par = w * rs.uniform(1 - jitter, 1 + jitter, cycles)
        par *= (1.0 - beta) / par.sum()
        runs.append(tuple(zip(seq.tolist(), par.tolist())))
    offsets = tuple((rs.uniform(0, s + w) for _ in range(p1)))
    return RunProfile(tuple(runs), p1, p, pri, tuple(float(o) for o in offsets))


@dataclass
class HeapEvent:
    time: float
    leader: int
    run_id: int
    requested: int
    granted: int
    released: int
    available: int


@dataclass
class SimOutcome:
    makespan: float
    timelines: dict  # run_id -> list of (kind, start, end, team)
    run_spans: dict  # run_id -> (start, end)
    speedup: float  # vs one worker doing everything
    s_p2: float  # second-level speedup: run work / run duration, pooled
    heap_trace: list = field(default_factory=list)
    busy_time: float = 0.0
    total_work: float = 0.0
    contended: int = 0  # requests granted less than asked


def simulate(profile: RunProfile) -> SimOutcome:
    p1, cap = profile.p1, profile.p - profile.p1
    want = profile.request
    blocks = block_assignment(profile.n, p1)
    offsets = profile.offsets or (0.0,) * p1
    available = cap
    trace: list[HeapEvent] = []
    timelines = {r: [] for r in range(profile.n)}
    spans: dict = {}
    busy = 0.0
    contended = 0
    # per leader cursor: (position in block, phase index)
    cursor = [[0, 0] for _ in range(p1)]
    events: list = []
    for m in range(p1):
        if blocks[m]:
            heapq.heappush(events, (offsets[m], _SEQ, m, 0))
    end_time = 0.0

    def run_of(m):
        return blocks[m][cursor[m][0]]

    while events:
        t, kind, m, held = heapq.heappop(events)
        rid = run_of(m)
        if kind == _SEQ:
            if cursor[m][1] == 0:
                spans[rid] = (t, None)
            s, _ = profile.phases[rid][cursor[m][1]]
            timelines[rid].append(("seq", t, t + s, 1))
            busy += s
            heapq.heappush(events, (t + s, _REQUEST, m, 0))
        elif kind == _REQUEST:
            _, w = profile.phases[rid][cursor[m][1]]
            g = grant_size(want, available)
            contended += g < want
            available -= g
            trace.append(HeapEvent(t, m, rid, want, g, 0, available))
            d = w / (1 + g)
            timelines[rid].append(("par", t, t + d, 1 + g))
            busy += (1 + g) * d
            heapq.heappush(events, (t + d, _RELEASE, m, g))
        else:
            available += held
            trace.append(HeapEvent(t, m, rid, 0, 0, held, available))
            cursor[m][1] += 1
            if cursor[m][1] == len(profile.phases[rid]):
                spans[rid] = (spans[rid][0], t)
                end_time = max(end_time, t)
                cursor[m] = [cursor[m][0] + 1, 0]
                if cursor[m][0] == len(blocks[m]):
                    continue
            heapq.heappush(events, (t, _SEQ, m, 0))

    seq, par = profile.totals()
    total = seq + par
    start = min(offsets[m] for m in range(p1) if blocks[m])
    makespan = end_time - start
    run_time = math.fsum(e - b for b, e in spans.values())
    return SimOutcome(makespan, timelines, spans, total / makespan if makespan > 0 else 1.0,
                      total / run_time if run_time > 0 else 1.0, trace, busy, total, contended)


def check_trace(trace: list[HeapEvent], capacity: int):
    """Heap invariants at every simulated allocation event."""
    held: dict = {}
    for e in trace:
        if e.granted > e.requested:
            raise AssertionError("grant exceeds request")
        if e.released:
            held[e.leader] = held.get(e.leader, 0) - e.released
            if held[e.leader] < 0:
                raise AssertionError("double release")
        else:
            held[e.leader] = held.get(e.leader, 0) + e.granted
        if not 0 <= e.available <= capacity or sum(held.values()) + e.available != capacity:
            raise AssertionError(f"heap accounting broken at t={e.time}")


def sweep_pri(base: RunProfile, grid, builder=None) -> list[dict]:
    """Simulated and predicted second-level speedup for every ``pri`` in ``grid``.

    ``builder(pri)`` may rebuild the profile per point (e.g. to re-stagger);
    by default only ``pri`` changes.
    """
    grid = list(grid)
    if not grid:
        raise ParameterError("empty pri grid")
    rows = []
    beta = base.beta
    for pri in grid:
        prof = builder(pri) if builder else base.with_(pri=pri)
        out = simulate(prof)
        rows.append({"pri": pri, "simulated": out.s_p2, "predicted": perf.s_p2_with_pri(beta, base.p2, pri),
                     "makespan": out.makespan, "contended": out.contended})
    return rows


def compare_tlp_vs_tlpdpr(beta: float, p1: int, p2_grid, n: int | None = None, cycles: int = 20) -> list[dict]:
    """Per ``p2`` (with ``p = p1 p2``): model and simulated speedups of TLP
    (pri = 0) and TLPDPR (pri at its threshold), next to ``1/beta``."""
    rows = []
    n = n or p1
    for p2 in p2_grid:
        p = p1 * p2
        ps = perf.pri_star(beta, p2)
        sim_tlp = simulate(even_profile(beta, n, p1, p, 0.0, cycles)).s_p2
        sim_dpr = simulate(even_profile(beta, n, p1, p, ps, cycles)).s_p2
        rows.append({
            "p2": p2, "tlp": perf.s_p2_with_pri(beta, p2, 0.0), "tlpdpr": perf.s_p2_with_pri(beta, p2, ps),
            "max": perf.max_second_level_speedup(beta), "pri_star": ps,
            "sim_tlp": sim_tlp, "sim_tlpdpr": sim_dpr,
        })
    return rows


def profile_from_ensemble(ensemble) -> RunProfile:
    """Rebuild a profile from the phase timings of a TLPDPR execution.

    A parallel phase contributes ``duration * team`` of work.
    """
    runs = []
    for r in sorted(ensemble.runs, key=lambda r: r.run_id):
        pairs, seq = [], 0.0
        for kind, d, team in r.profile["phases"]:
            if kind == "serial":
                seq += d
            else:
                pairs.append((seq, d * team))
                seq = 0.0
        if seq:
            pairs.append((seq, 0.0))
        runs.append(tuple(pairs))
    cfg = ensemble.config
    return RunProfile(tuple(runs), cfg.p1, cfg.p, cfg.pri)


def rows_to_csv(rows: list[dict], header: str = "") -> str:
    buf = io.StringIO()
    if header:
        buf.write(f"# {header}\n")
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]))
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.10g}" if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()

"""Acceptance criteria AC1-AC6.

Each test prints one ``ACn <name>: PASS|FAIL|SKIP - detail`` line.  Run
directly (``python tests/test_acceptance.py``) to get just the lines.
"""

import math
import sys
import time
from fractions import Fraction as F

import numpy as np
import pytest

from dsmcpar import bench, config, gas, parallel, perf, schedsim
from dsmcpar.grid import CellGrid, Geometry
from dsmcpar.kernels import BACKENDS

PROBLEMS = ("box", "expansion", "body")


def _amdahl(alpha: F, p: int) -> F:
    return p / (p - alpha * (p - 1))


# -- AC1 ---------------------------------------------------------------------

def check_ac1():
    t0 = time.perf_counter()
    a, a1, a2, b = F("0.998"), F("0.998"), F("0.97"), F("0.437")
    oracle = {
        "S(0.998,6)": (perf.amdahl_speedup(0.998, 6), _amdahl(a, 6)),
        "E(0.998,6)": (perf.amdahl_efficiency(0.998, 6), _amdahl(a, 6) / 6),
        "S_tlp(0.998,0.97,6,6)": (perf.tlp_speedup(0.998, 0.97, 6, 6), _amdahl(a1, 6) * _amdahl(a2, 6)),
        "beta*(0.437,6)": (perf.beta_star(0.437, 6), b / (b + (1 - b) / 6)),
        "PRI*(0.437,6)": (perf.pri_star(0.437, 6), b / (1 - b) * 5),
    }
    worst = max(abs(got - float(ex)) / float(ex) for got, ex in oracle.values())
    ms = (time.perf_counter() - t0) * 1e3
    vals = ", ".join(f"{k}={got:.6f}" for k, (got, _) in oracle.items())
    return worst < 1e-6, f"{vals}; worst rel err {worst:.1e} vs exact evaluation; {ms:.1f} ms"


# -- AC2 ---------------------------------------------------------------------

def check_ac2():
    beta = 0.437
    mx = perf.max_second_level_speedup(beta)
    tlp = perf.s_p2_with_pri(beta, 6, 0.0) / mx
    dpr = perf.s_p2_with_pri(beta, 6, perf.pri_star(beta, 6)) / mx
    ok = round(mx, 1) == 2.3 and abs(tlp * 100 - 80) <= 3 and dpr >= 0.93
    return ok, f"1/beta={mx:.4f} (~2.3), TLP={tlp:.1%} of max (80% +/- 3pp), model S_p2 at PRI*={dpr:.1%} (>= 93%)"


# -- AC3 ---------------------------------------------------------------------

def check_ac3():
    t0 = time.perf_counter()
    beta, p1, p = 0.437, 6, 36
    ps = perf.pri_star(beta, 6)
    grid = [ps * i / 10 for i in range(11)]
    rows = schedsim.sweep_pri(schedsim.even_profile(beta, 12, p1, p), grid,
                              lambda pri: schedsim.even_profile(beta, 12, p1, p, pri))
    worst = max(abs(r["simulated"] / r["predicted"] - 1) for r in rows)
    declines = []
    for seed in range(5):
        at, beyond = schedsim.sweep_pri(
            schedsim.random_profile(beta, 12, p1, p, seed=seed), [ps, 2 * ps],
            lambda pri, s=seed: schedsim.random_profile(beta, 12, p1, p, pri, seed=s))
        declines.append(beyond["simulated"] < at["simulated"])
    secs = time.perf_counter() - t0
    ok = worst < 0.05 and all(declines) and secs < 60
    return ok, (f"max |sim/model - 1| for PRI<=PRI* = {worst:.2%} (< 5%); strict decline at 2*PRI* "
                f"in {sum(declines)}/{len(declines)} staggered profiles; {secs:.2f} s")


# -- AC4 ---------------------------------------------------------------------

def _ensembles(problem, n, seed, backend):
    """Every (strategy, worker count) combination with at most 4 workers."""
    yield "psir", [parallel.psir_execute(problem, n, p, seed, backend) for p in (1, 2, 3, 4)]
    dp = []
    for p2 in (1, 2, 3, 4):
        runs = [parallel.dp_execute(problem, r, p2, seed, backend) for r in range(n)]
        dp.append(parallel.EnsembleResult(runs, parallel.merge_ensemble(runs), parallel.StrategyConfig("dp")))
    yield "dp", dp
    yield "tlp", [parallel.tlp_execute(problem, n, p1, p2, seed, backend)
                  for p1, p2 in ((1, 1), (2, 1), (1, 2), (2, 2), (1, 3), (1, 4), (4, 1))]
    yield "tlpdpr", [parallel.tlpdpr_execute(problem, n, p1, p, pri, seed, backend)
                     for p1, p in ((1, 1), (1, 2), (2, 2), (2, 3), (2, 4), (1, 4), (3, 4), (4, 4))
                     for pri in (0.0, 1.0, 3.881)]


def check_ac4():
    import warnings

    t0 = time.perf_counter()
    n, seed = 4, 20240
    checked, bad = 0, []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for bname, be in sorted(BACKENDS.items()):
            for name in PROBLEMS:
                problem = config.load_problem(name)
                ref = parallel.sequential_execute(problem, n, seed, be)
                for strat, results in _ensembles(problem, n, seed, be):
                    for r in results:
                        checked += 1
                        if not parallel.merged_equal(r, ref):
                            bad.append(f"{bname}/{name}/{strat}")
    secs = time.perf_counter() - t0
    ok = not bad and secs < 600
    detail = f"{checked} ensembles ({', '.join(sorted(BACKENDS))} backends x {len(PROBLEMS)} problems) " \
             f"bit-identical to sequential; {secs:.1f} s"
    return ok, detail if not bad else f"mismatch in {sorted(set(bad))}"


# -- AC5 ---------------------------------------------------------------------

def _box(n, d, counts, clock):
    g = CellGrid((0.0, 0.0), (1.0, 1.0), counts)
    return gas.FlowProblem(Geometry(g), gas.SimulationClock(*clock), gas.CollisionParams(d),
                           initial_fill=gas.GasState(n, 1.0), name="ac5_box")


def _conservation():
    rs = np.random.default_rng(5)
    nc = 20000
    g = CellGrid((0.0,), (float(nc),), (nc,))
    st = gas.ParticleStore(1)
    vel = rs.normal(size=(2 * nc, 3)) * rs.uniform(0.1, 10, (2 * nc, 1))
    st.append(np.repeat(np.arange(nc) + 0.5, 2)[:, None], vel)
    idx = gas.enumerate_and_index(st, g)
    n = gas.collide_cells(st, idx, np.full(nc, 1.0), np.ones(nc), gas.CollisionParams(2.0), 1.0, 4242)
    v0, v1 = vel.reshape(nc, 2, 3), st.live_vel().reshape(nc, 2, 3)
    dp = (np.linalg.norm(v1.sum(1) - v0.sum(1), axis=1) / np.linalg.norm(v0, axis=2).sum(1)).max()
    e0 = (v0 ** 2).sum((1, 2))
    de = (abs((v1 ** 2).sum((1, 2)) - e0) / e0).max()
    return n > 0 and dp < 1e-12 and de < 1e-12, f"{n} pairs, max rel dP={dp:.1e}, dE={de:.1e}"


def _rate_count_moments():
    d, steps = 0.02, 1000
    prob = _box(4000.0, d, (8, 8), (0.01, 0.01, 10.0))
    st = gas.KernelState(prob, 0, 11)
    N = st.store.n
    v0 = st.store.live_vel().copy()
    T = float(((v0 - v0.mean(0)) ** 2).sum() / (3 * N))
    m1, m2 = v0.mean(0), (v0 ** 2).mean(0)
    count_ok = moments_ok = True
    worst = 0.0
    for k in range(1, steps + 1):
        gas.step(st)
        count_ok &= st.store.n == N
        if k % 100 == 0:
            v = st.store.live_vel()
            z1 = abs(v.mean(0) - m1) / math.sqrt(2 * T / N)
            z2 = abs((v ** 2).mean(0) - m2) / math.sqrt(4 * T * T / N)
            worst = max(worst, z1.max(), z2.max())
    moments_ok = worst < 3
    expected = 0.5 * N * math.sqrt(2) * math.pi * d * d * N * math.sqrt(8 * T / math.pi) * prob.clock.dt * steps
    z = (st.collisions - expected) / math.sqrt(expected)
    return (count_ok, f"N={N} constant over {steps} steps"), \
        (abs(z) < 3, f"{st.collisions} collisions vs {expected:.0f} expected ({z:+.2f} sigma)"), \
        (moments_ok, f"worst moment drift {worst:.2f} sigma")


def _se_scaling():
    prob = _box(300.0, 0.05, (8, 8), (0.02, 0.1, 0.6))

    def spread(n, seed):
        ens = parallel.sequential_execute(prob, n, seed)
        return float(np.std(np.concatenate([d["temperature"] for d in ens.merged.derived(prob)]), ddof=1))

    ratio = spread(4, 100) / spread(16, 200)
    return abs(ratio / 2 - 1) < 0.30, f"SE(4)/SE(16)={ratio:.3f} (2 +/- 30%)"


def check_ac5():
    t0 = time.perf_counter()
    parts = [_conservation(), *_rate_count_moments(), _se_scaling()]
    secs = time.perf_counter() - t0
    ok = all(p[0] for p in parts) and secs < 900
    return ok, "; ".join(p[1] for p in parts) + f"; {secs:.1f} s"


# -- AC6 ---------------------------------------------------------------------

def check_ac6():
    cores = parallel.physical_cores()
    if cores < 4:
        return None, f"machine has {cores} physical core(s); criterion applies to >= 4"
    rep = bench.run_bench(config.load_problem("box"), "psir", 8, [1, 2, 4], repeats=3)
    rows = [r for r in rep.valid_rows() if r["p"] in (2, 4)]
    devs = [abs(r["speedup"] / r["predicted_speedup"] - 1) for r in rows]
    ok = len(rows) == 2 and max(devs) < 0.20
    return ok, ", ".join(f"p={r['p']}: S={r['speedup']:.2f} vs Amdahl {r['predicted_speedup']:.2f}" for r in rows) \
        + f" (alpha={rep.alpha['alpha']:.4f})"


CHECKS = [
    ("AC1 formula fidelity", check_ac1),
    ("AC2 reference operating points", check_ac2),
    ("AC3 scheduler-model agreement", check_ac3),
    ("AC4 result invariance under parallelism", check_ac4),
    ("AC5 physics properties", check_ac5),
    ("AC6 measured-speedup sanity", check_ac6),
]


def _line(name, ok, detail):
    status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
    return f"{name}: {status} - {detail}"


@pytest.mark.parametrize("name,check", CHECKS, ids=[c[0].split()[0] for c in CHECKS])
def test_acceptance(name, check, capsys):
    ok, detail = check()
    line = _line(name, ok, detail)
    with capsys.disabled():
        print("\n" + line)
    if ok is None:
        pytest.skip(line)
    assert ok, line


if __name__ == "__main__":
    results = [(n, *c()) for n, c in CHECKS]
    for n, ok, detail in results:
        print(_line(n, ok, detail))
    sys.exit(0 if all(ok is not False for _, ok, _ in results) else 1)

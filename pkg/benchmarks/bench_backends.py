"""Compare the compiled and numpy kernel backends on the shipped problems.

    python benchmarks/bench_backends.py [--repeats 3] [--problems box,body]

Both backends must agree bit for bit; the table reports median wall time
per run and the ratio.
"""

import argparse
import statistics
import time

from dsmcpar import config, gas
from dsmcpar.kernels import BACKENDS


def time_run(problem, backend, repeats):
    out, res = [], None
    for _ in range(repeats):
        t0 = time.perf_counter()
        res = gas.run_unsteady(problem, 0, 1, backend=backend)
        out.append(time.perf_counter() - t0)
    return statistics.median(out), res


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--problems", default="box,expansion,body")
    a = ap.parse_args()
    if "cython" not in BACKENDS:
        print("compiled backend not built; only the numpy fallback is available")
    print(f"{'problem':<10} {'backend':<8} {'median_s':>10} {'ratio':>8} same")
    for name in a.problems.split(","):
        problem = config.load_problem(name)
        ref_t, ref = time_run(problem, BACKENDS["python"], a.repeats)
        print(f"{name:<10} {'python':<8} {ref_t:10.4f} {1.0:8.2f}")
        if "cython" in BACKENDS:
            t, r = time_run(problem, BACKENDS["cython"], a.repeats)
            print(f"{name:<10} {'cython':<8} {t:10.4f} {ref_t / t:8.2f} {r.same_science(ref)}")


if __name__ == "__main__":
    main()

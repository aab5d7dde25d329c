"""Command line: ``dsmcpar {simulate,bench,model,sweep,sim}``."""

from __future__ import annotations

import argparse
import sys

from . import bench, config, output, parallel, perf, schedsim
from .errors import ConfigError, MergeError, ParameterError


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _fmt(v) -> str:
    return f"{v:.6g}" if isinstance(v, float) else str(v)


def _emit(text: str, path, stdout):
    if path:
        p = output.write(path, text)
        print(f"wrote {p}", file=sys.stderr)
    else:
        stdout.write(text)


# -- simulate ---------------------------------------------------------------

def cmd_simulate(a, out):
    problem, strat = config.load(a.problem)
    for k in ("strategy", "n", "p", "p1", "p2", "pri"):
        v = getattr(a, k)
        if v is not None:
            setattr(strat, k, v)
    if a.seed is not None:
        strat.master_seed = a.seed
    backend = config_backend(a.backend)
    res = parallel.execute(problem, strat, backend, a.leaders)
    path = a.out or output.output_dir() / f"{problem.name}_{strat.strategy}_snapshots.csv"
    output.write(path, output.snapshot_csv(problem, res, a.per_run))
    print(f"wrote {path}", file=sys.stderr)
    if res.allocation_log:
        lp = a.alloc_log or output.output_dir() / f"{problem.name}_allocation.csv"
        output.write(lp, output.allocation_csv(parallel.allocation_log_rows(res.allocation_log), strat.master_seed))
        print(f"wrote {lp}", file=sys.stderr)
    t = res.timing
    out.write(f"strategy={strat.strategy} runs={len(res.runs)} collisions={res.collision_count} "
              f"wall={t['wall_time']:.3f}s workers={t['workers']} cores={t['physical_cores']}"
              f"{' OVERSUBSCRIBED' if t['oversubscribed'] else ''}\n")
    return 0


def config_backend(name):
    if name is None:
        return None
    from .kernels import get_backend

    try:
        return get_backend(name)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


# -- bench ------------------------------------------------------------------

def cmd_bench(a, out):
    problem, strat = config.load(a.problem)
    seed = a.seed if a.seed is not None else strat.master_seed
    rep = bench.run_bench(problem, a.strategy, a.n, a.p, seed, a.repeats, config_backend(a.backend))
    text = output.dict_rows_csv(rep.rows, seed, units="units: times=seconds of parent wall time",
                                kind="bench", problem=problem.name)
    path = a.out or output.output_dir() / f"bench_{problem.name}_{a.strategy}.csv"
    output.write(path, text)
    out.write(text)
    for r in rep.rows:
        if r["excluded"]:
            out.write(f"# p={r['p']} exceeds {rep.physical_cores} physical cores: excluded from model validation\n")
        if r["cv_flag"]:
            out.write(f"# p={r['p']}: coefficient of variation {r['cv']:.1%} > 10%\n")
    return 0


# -- model ------------------------------------------------------------------

_MODEL = {
    "amdahl": (perf.amdahl_speedup, ("alpha", "p")),
    "efficiency": (perf.amdahl_efficiency, ("alpha", "p")),
    "time": (perf.parallel_time, ("t1", "alpha", "p")),
    "limit": (perf.speedup_limit, ("alpha",)),
    "tlp": (perf.tlp_speedup, ("alpha1", "alpha2", "p1", "p2")),
    "tlp-efficiency": (perf.tlp_efficiency, ("alpha1", "alpha2", "p1", "p2")),
    "beta-star": (perf.beta_star, ("beta", "p2")),
    "sp2": (perf.s_p2_with_pri, ("beta", "p2", "pri")),
    "pri-star": (perf.pri_star, ("beta", "p2")),
    "residual": (perf.pri_condition_check, ("beta", "p", "p1", "p2", "pri")),
}


def cmd_model(a, out):
    fn, names = _MODEL[a.formula]
    missing = [n for n in names if getattr(a, n) is None]
    if missing:
        raise ParameterError(f"model {a.formula} needs --{' --'.join(missing)}")
    out.write(_fmt(fn(*(getattr(a, n) for n in names))) + "\n")
    return 0


# -- sweep ------------------------------------------------------------------

def cmd_sweep(a, out):
    rows = []
    if a.kind == "amdahl":
        for alpha in a.alpha:
            for p in range(1, a.pmax + 1):
                rows.append({"alpha": alpha, "p": p, "speedup": perf.amdahl_speedup(alpha, p),
                             "efficiency": perf.amdahl_efficiency(alpha, p)})
    else:
        for beta in a.beta:
            for p2 in range(1, a.pmax + 1):
                ps = perf.pri_star(beta, p2)
                rows.append({"beta": beta, "p2": p2, "tlp": perf.s_p2_with_pri(beta, p2, 0.0),
                             "tlpdpr": perf.s_p2_with_pri(beta, p2, ps), "max": perf.max_second_level_speedup(beta)})
    _emit(output.dict_rows_csv(rows, None, kind=f"sweep_{a.kind}"), a.out, out)
    return 0


# -- sim --------------------------------------------------------------------

def cmd_sim(a, out):
    if a.kind == "compare":
        rows = schedsim.compare_tlp_vs_tlpdpr(a.beta, a.p1, a.p2 or list(range(1, 11)), cycles=a.cycles)
        _emit(output.dict_rows_csv(rows, a.seed, units="units: speedups dimensionless",
                                    kind="sim_compare", beta=a.beta, p1=a.p1), a.out, out)
        return 0
    grid = a.grid
    if grid is None:
        ps = perf.pri_star(a.beta, parallel.static_team_size(a.p, a.p1))
        grid = [2 * ps * i / 16 for i in range(17)]

    def build(pri):
        if a.stagger == "even":
            return schedsim.even_profile(a.beta, a.n, a.p1, a.p, pri, a.cycles)
        return schedsim.random_profile(a.beta, a.n, a.p1, a.p, pri, a.cycles, seed=a.seed)

    rows = schedsim.sweep_pri(build(0.0), grid, build)
    _emit(output.dict_rows_csv(rows, a.seed, units="units: makespan=unit work per run",
                                kind="sim_sweep", beta=a.beta, p1=a.p1, p=a.p, stagger=a.stagger),
          a.out, out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dsmcpar", description="Parallel DSMC of unsteady flows")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a problem under a strategy and write snapshot CSV")
    s.add_argument("--problem", default="box", help="INI file or shipped problem name")
    s.add_argument("--strategy", choices=parallel.STRATEGIES)
    for k in ("n", "p", "p1", "p2"):
        s.add_argument(f"--{k}", type=int)
    s.add_argument("--pri", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--backend", choices=("python", "cython"))
    s.add_argument("--leaders", choices=("process", "thread"), default="process")
    s.add_argument("--per-run", action="store_true", help="also write every run's own fields")
    s.add_argument("--out")
    s.add_argument("--alloc-log")
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("bench", help="time a strategy over worker counts")
    b.add_argument("--problem", default="box")
    b.add_argument("--strategy", choices=("psir", "dp"), default="psir")
    b.add_argument("--n", type=int, default=8)
    b.add_argument("--p", type=_ints, default=[1, 2, 4])
    b.add_argument("--repeats", type=int, default=3)
    b.add_argument("--seed", type=int)
    b.add_argument("--backend", choices=("python", "cython"))
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)

    m = sub.add_parser("model", help="evaluate one model formula")
    m.add_argument("formula", choices=sorted(_MODEL))
    for k in ("alpha", "alpha1", "alpha2", "beta", "pri", "t1"):
        m.add_argument(f"--{k}", type=float)
    for k in ("p", "p1", "p2"):
        m.add_argument(f"--{k}", type=int)
    m.set_defaults(func=cmd_model)

    w = sub.add_parser("sweep", help="model curves as CSV")
    w.add_argument("kind", choices=("amdahl", "sp2"))
    w.add_argument("--alpha", type=_floats, default=[0.9, 0.99, 0.998])
    w.add_argument("--beta", type=_floats, default=[0.437])
    w.add_argument("--pmax", type=int, default=36)
    w.add_argument("--out")
    w.set_defaults(func=cmd_sweep)

    x = sub.add_parser("sim", help="scheduler simulation")
    x.add_argument("kind", choices=("sweep", "compare"))
    x.add_argument("--beta", type=float, default=0.437)
    x.add_argument("--p1", type=int, default=6)
    x.add_argument("--p", type=int, default=36)
    x.add_argument("--p2", type=_ints)
    x.add_argument("--n", type=int, default=12)
    x.add_argument("--cycles", type=int, default=20)
    x.add_argument("--grid", type=_floats)
    x.add_argument("--stagger", choices=("even", "random"), default="random")
    x.add_argument("--seed", type=int, default=0)
    x.add_argument("--out")
    x.set_defaults(func=cmd_sim)
    return ap


def main(argv=None, stdout=None) -> int:
    out = stdout or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except (ConfigError, ParameterError, MergeError) as exc:
        print(f"dsmcpar: validation error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

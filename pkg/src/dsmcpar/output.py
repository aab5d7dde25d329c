"""CSV writers.  Every file starts with a ``#`` line naming units and the seed."""

from __future__ import annotations

import csv
import io
import os
from pathlib import Path

import numpy as np

UNITS = "units: length=domain, velocity=sqrt(kT_ref/m), temperature=variance of one velocity component"


def output_dir(default: str = "out") -> Path:
    return Path(os.environ.get("DSMCPAR_OUTPUT_DIR", default))


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return "nan" if np.isnan(x) else repr(float(x))
    return str(x)


def header_line(master_seed, units: str = UNITS, **meta) -> str:
    extra = "".join(f" {k}={v}" for k, v in meta.items())
    return f"# dsmcpar master_seed={master_seed}{extra} {units}\n"


def snapshot_rows(problem, times, accumulators, run_id: int):
    vol = problem.geometry.cell_volumes()
    dim = problem.grid.dim
    for t, acc in zip(times, accumulators):
        d = acc.derived(problem.collision.weight, vol)
        for c in range(acc.sum_n.size):
            row = [run_id, t, c, int(acc.sample_count[c]), d["density"][c], d["velocity"][c, 0]]
            if dim == 2:
                row.append(d["velocity"][c, 1])
            row.append(d["temperature"][c])
            yield row


def snapshot_csv(problem, ensemble, per_run: bool = False) -> str:
    """Merged fields (``run_id = -1``) and optionally every run's own fields."""
    buf = io.StringIO()
    cfg = ensemble.config
    buf.write(header_line(cfg.master_seed, problem=problem.name, strategy=cfg.strategy, n=cfg.n))
    cols = ["run_id", "t", "cell_id", "n_samples", "density", "vx"]
    if problem.grid.dim == 2:
        cols.append("vy")
    cols.append("temperature")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    m = ensemble.merged
    for row in snapshot_rows(problem, m.times, m.accumulators, -1):
        w.writerow([_fmt(x) for x in row])
    if per_run:
        for r in ensemble.runs:
            for row in snapshot_rows(problem, r.times, r.snapshots, r.run_id):
                w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def allocation_csv(rows: list[dict], master_seed) -> str:
    buf = io.StringIO()
    buf.write(header_line(master_seed, "units: time_ns=nanoseconds since first event, counts=workers",
                          kind="allocation_log"))
    cols = ["time_ns", "leader", "requested", "granted", "released", "run_id", "available"]
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: r[k] for k in cols})
    return buf.getvalue()


def dict_rows_csv(rows: list[dict], master_seed=None, units: str = "units: dimensionless", **meta) -> str:
    buf = io.StringIO()
    buf.write(header_line(master_seed if master_seed is not None else "n/a", units, **meta))
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.10g}" if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def write(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path

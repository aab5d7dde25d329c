"""Pure numpy implementation of the hot gas-kernel loops.

Used when the compiled ``_ckernels`` extension is unavailable or disabled.
Work over particles is vectorised; the per-cell collision loop is vectorised
across cells one candidate round at a time, which keeps the sequential
ordering inside each cell.  All arithmetic is element-wise, so any strided
partition of particles or cells gives bit-identical results.
"""

from __future__ import annotations

import numpy as np

from .errors import IndexingFault
from .rng import derive_many, uniform_at

NAME = "python"

MAX_WALL_EVENTS = 64
_TWO_PI = 2.0 * np.pi
_FIVE = np.arange(5, dtype=np.uint64)


def index_cells(pos, n, dim, lo, hi, dx, nx, ny):
    """Counting sort of live particles by cell.

    Returns ``(cell_of, starts, perm)`` where ``perm`` lists particle ids
    grouped by cell, stable with respect to store order.
    """
    n_cells = nx * ny
    if n == 0:
        return np.zeros(0, np.int64), np.zeros(n_cells + 1, np.int64), np.zeros(0, np.int64)
    p = pos[:n]
    bad = np.zeros(n, dtype=bool)
    for a in range(dim):
        bad |= ~((p[:, a] >= lo[a]) & (p[:, a] <= hi[a]))
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise IndexingFault(f"particle {k} at {p[k].tolist()} lies outside the domain")
    cell = np.minimum(np.floor((p[:, 0] - lo[0]) / dx[0]).astype(np.int64), nx - 1)
    if dim == 2:
        iy = np.minimum(np.floor((p[:, 1] - lo[1]) / dx[1]).astype(np.int64), ny - 1)
        cell = iy * nx + cell
    counts = np.bincount(cell, minlength=n_cells)
    starts = np.zeros(n_cells + 1, np.int64)
    np.cumsum(counts, out=starts[1:])
    perm = np.argsort(cell, kind="stable").astype(np.int64)
    return cell, starts, perm


def _diffuse(v, axis, sign, temp, u0, u1, u2):
    """Resample velocities ``v`` (rows) leaving a diffuse wall."""
    vn = np.sqrt(-2.0 * temp * np.log1p(-u0))
    r = np.sqrt(-2.0 * np.log1p(-u1))
    th = _TWO_PI * u2
    st = np.sqrt(temp)
    t1, t2 = (1, 2) if axis == 0 else (0, 2)
    v[:, axis] = sign * vn
    v[:, t1] = st * (r * np.cos(th))
    v[:, t2] = st * (r * np.sin(th))


def move(pos, vel, removed, start, stop, stride, dt, dts, geom, key_base):
    """Ballistic motion with wall interaction for particles
    ``start, start+stride, ... < stop``.

    ``dts`` (optional, indexed like the particles) overrides the scalar
    ``dt``.  Particles leaving through an open face get ``removed[i] = 1``.
    Returns the number removed.
    """
    idx = np.arange(start, stop, stride, dtype=np.int64)
    if idx.size == 0:
        return 0
    dim = geom["dim"]
    lo, hi = geom["lo"], geom["hi"]
    kind, ftemp = geom["face_kind"], geom["face_temp"]
    rem = np.full(idx.size, float(dt)) if dts is None else np.array(dts[idx], dtype=np.float64)
    nev = np.zeros(idx.size, np.int64)
    keys = derive_many(np.uint64(key_base), idx)
    active = np.arange(idx.size)
    n_removed = 0
    body = geom["body"] if geom["has_body"] else None

    for _ in range(MAX_WALL_EVENTS):
        if active.size == 0:
            break
        gi = idx[active]
        x = pos[gi]
        v = vel[gi]
        r = rem[active]
        tbest = r.copy()
        face = np.full(active.size, -1, np.int64)
        with np.errstate(divide="ignore", invalid="ignore"):
            for a in range(dim):
                va = v[:, a]
                th = np.where(va > 0, (hi[a] - x[:, a]) / va, np.inf)
                th = np.maximum(th, 0.0)
                s = th < tbest
                tbest[s] = th[s]
                face[s] = 2 * a + 1
                tl = np.where(va < 0, (lo[a] - x[:, a]) / va, np.inf)
                tl = np.maximum(tl, 0.0)
                s = tl < tbest
                tbest[s] = tl[s]
                face[s] = 2 * a
            if body is not None:
                bx0, bx1, by0, by1 = body
                for f, (a, o, plane, approach) in enumerate(
                    ((0, 1, bx0, 1.0), (0, 1, bx1, -1.0), (1, 0, by0, 1.0), (1, 0, by1, -1.0))
                ):
                    va = v[:, a]
                    if approach > 0:
                        ok = (x[:, a] <= plane) & (va > 0)
                    else:
                        ok = (x[:, a] >= plane) & (va < 0)
                    tb = np.where(ok, (plane - x[:, a]) / va, np.inf)
                    tb = np.maximum(tb, 0.0)
                    other = x[:, o] + v[:, o] * tb
                    olo, ohi = (by0, by1) if o == 1 else (bx0, bx1)
                    ok = ok & (other >= olo) & (other <= ohi)
                    tb = np.where(ok, tb, np.inf)
                    s = tb < tbest
                    tbest[s] = tb[s]
                    face[s] = 4 + f

        hit = face >= 0
        free = ~hit
        if free.any():
            g = gi[free]
            pos[g, :dim] = x[free, :dim] + v[free, :dim] * r[free, None]
        if not hit.any():
            break
        h = np.flatnonzero(hit)
        g = gi[h]
        th_ = tbest[h]
        xh = x[h, :dim] + v[h, :dim] * th_[:, None]
        vh = v[h].copy()
        fh = face[h]
        keep_going = np.ones(h.size, dtype=bool)
        for f in np.unique(fh):
            s = fh == f
            if f < 4:
                a, side = divmod(int(f), 2)
                xh[s, a] = hi[a] if side else lo[a]
                k = int(kind[f])
                temp = float(ftemp[f])
                sign = -1.0 if side else 1.0
            else:
                bf = int(f) - 4
                a = bf // 2
                xh[s, a] = body[bf]
                k = int(geom["body_kind"])
                temp = float(geom["body_temp"])
                sign = 1.0 if bf % 2 else -1.0
            if k == 0:
                keep_going[s] = False
                removed[g[s]] = 1
                n_removed += int(s.sum())
            elif k == 1:
                vh[s, a] = -vh[s, a]
            else:
                ai = active[h[s]]
                c = 3 * nev[ai]
                kk = keys[ai]
                sub = vh[s]
                _diffuse(sub, a, sign, temp,
                         uniform_at(kk, c), uniform_at(kk, c + 1), uniform_at(kk, c + 2))
                vh[s] = sub
                nev[ai] += 1
        pos[g, :dim] = xh
        vel[g] = vh
        rem[active[h]] = r[h] - th_
        active = active[h[keep_going]]
    return n_removed


def collide(vel, perm, starts, start, stride, crmax, inv_vol, coef, key_base):
    """No-time-counter hard-sphere collisions in cells ``start::stride``.

    ``coef`` is ``weight * sigma * dt``.  Returns accepted collisions.
    """
    n_cells = starts.size - 1
    cells = np.arange(start, n_cells, stride, dtype=np.int64)
    cnt = starts[cells + 1] - starts[cells]
    sel = cnt >= 2
    cells = cells[sel]
    if cells.size == 0:
        return 0
    cnt = cnt[sel]
    keys = derive_many(np.uint64(key_base), cells)
    u0 = uniform_at(keys, 0)
    fcnt = cnt.astype(np.float64)
    expect = 0.5 * fcnt * (fcnt - 1.0) * coef * crmax[cells] * inv_vol[cells]
    ncand = np.floor(expect + u0).astype(np.int64)
    accepted = 0
    rounds = int(ncand.max()) if ncand.size else 0
    for r in range(rounds):
        act = ncand > r
        c = cells[act]
        k = keys[act]
        nf = fcnt[act]
        base = 1 + 5 * r
        u = uniform_at(k[:, None], base + _FIVE)
        u1, u2, u3, u4, u5 = u.T
        i = np.minimum(np.floor(u1 * nf), nf - 1.0).astype(np.int64)
        j = np.minimum(np.floor(u2 * (nf - 1.0)), nf - 2.0).astype(np.int64)
        j = j + (j >= i)
        s = starts[c]
        pi = perm[s + i]
        pj = perm[s + j]
        vi = vel[pi]
        vj = vel[pj]
        g0 = vi[:, 0] - vj[:, 0]
        g1 = vi[:, 1] - vj[:, 1]
        g2 = vi[:, 2] - vj[:, 2]
        cr = np.sqrt(g0 * g0 + g1 * g1 + g2 * g2)
        cm = crmax[c]
        up = cr > cm
        if up.any():
            crmax[c[up]] = cr[up]
            cm = np.where(up, cr, cm)
        acc = u3 * cm < cr
        if not acc.any():
            continue
        accepted += int(acc.sum())
        vi = vi[acc]
        vj = vj[acc]
        cr = cr[acc]
        cos_t = 2.0 * u4[acc] - 1.0
        sin_t = np.sqrt(1.0 - cos_t * cos_t)
        phi = _TWO_PI * u5[acc]
        h0 = 0.5 * cr * sin_t * np.cos(phi)
        h1 = 0.5 * cr * sin_t * np.sin(phi)
        h2 = 0.5 * cr * cos_t
        m0 = 0.5 * (vi[:, 0] + vj[:, 0])
        m1 = 0.5 * (vi[:, 1] + vj[:, 1])
        m2 = 0.5 * (vi[:, 2] + vj[:, 2])
        a, b = pi[acc], pj[acc]
        vel[a, 0] = m0 + h0
        vel[a, 1] = m1 + h1
        vel[a, 2] = m2 + h2
        vel[b, 0] = m0 - h0
        vel[b, 1] = m1 - h1
        vel[b, 2] = m2 - h2
    return accepted


def sample(vel, perm, starts, cell_sorted, start, stride, sum_n, sum_v, sum_v2):
    """Add particle count, velocity and squared-speed sums for cells
    ``start::stride``.  Accumulation within a cell follows ``perm`` order.
    """
    n_cells = starts.size - 1
    if perm.size == 0:
        return
    if stride == 1 and start == 0:
        take = slice(None)
    else:
        take = (cell_sorted % stride) == start
    pid = perm[take]
    cid = cell_sorted[take]
    v = vel[pid]
    sum_n[start::stride] += np.bincount(cid, minlength=n_cells)[start::stride]
    for a in range(3):
        sum_v[start::stride, a] += np.bincount(cid, weights=v[:, a], minlength=n_cells)[start::stride]
    sq = v[:, 0] * v[:, 0] + v[:, 1] * v[:, 1] + v[:, 2] * v[:, 2]
    sum_v2[start::stride] += np.bincount(cid, weights=sq, minlength=n_cells)[start::stride]

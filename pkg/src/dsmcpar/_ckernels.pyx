# cython: language_level=3
"""Compiled gas-kernel loops.

Same contracts and random-number layout as ``_pykernels``; every loop runs
without the GIL so data-parallel worker threads execute concurrently.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log1p, floor, cos, sin, INFINITY
from libc.stdint cimport uint64_t, int64_t, int32_t, uint8_t

from .errors import IndexingFault

cnp.import_array()

NAME = "cython"

cdef int MAX_WALL_EVENTS = 64
cdef double TWO_PI = 6.283185307179586
cdef double INV53 = 1.0 / 9007199254740992.0
cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t fmix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 33)) * 0xFF51AFD7ED558CCDULL
    z = (z ^ (z >> 33)) * 0xC4CEB9FE1A85EC53ULL
    return z ^ (z >> 33)


cdef inline uint64_t derive(uint64_t key, uint64_t value) noexcept nogil:
    return fmix64(key ^ mix64((value + 1) * GOLDEN))


cdef inline double uni(uint64_t key, uint64_t counter) noexcept nogil:
    return <double>(mix64(key ^ mix64((counter + 1) * GOLDEN)) >> 11) * INV53


def uniform_at(keys, counters):
    """Scalar-loop twin of :func:`dsmcpar.rng.uniform_at` (parity checks)."""
    cdef cnp.ndarray[uint64_t, ndim=1] k = np.ascontiguousarray(np.broadcast_to(np.asarray(keys, np.uint64), np.broadcast(keys, counters).shape).ravel())
    cdef cnp.ndarray[uint64_t, ndim=1] c = np.ascontiguousarray(np.broadcast_to(np.asarray(counters, np.uint64), np.broadcast(keys, counters).shape).ravel())
    cdef Py_ssize_t i, n = k.shape[0]
    out = np.empty(n, np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = uni(k[i], c[i])
    return out


def index_cells(double[:, ::1] pos, Py_ssize_t n, int dim, double[::1] lo, double[::1] hi,
                double[::1] dx, Py_ssize_t nx, Py_ssize_t ny):
    """Two-pass counting sort of live particles by cell id."""
    cdef Py_ssize_t n_cells = nx * ny
    cell_a = np.empty(n, np.int64)
    starts_a = np.zeros(n_cells + 1, np.int64)
    perm_a = np.empty(n, np.int64)
    cdef int64_t[::1] cell = cell_a
    cdef int64_t[::1] starts = starts_a
    cdef int64_t[::1] perm = perm_a
    cdef int64_t[::1] fill = np.empty(n_cells, np.int64)
    cdef Py_ssize_t i, c, bad = -1
    cdef int64_t ix, iy
    cdef double x
    with nogil:
        for i in range(n):
            x = pos[i, 0]
            if not (x >= lo[0] and x <= hi[0]):
                bad = i
                break
            ix = <int64_t>floor((x - lo[0]) / dx[0])
            if ix > nx - 1:
                ix = nx - 1
            if dim == 2:
                x = pos[i, 1]
                if not (x >= lo[1] and x <= hi[1]):
                    bad = i
                    break
                iy = <int64_t>floor((x - lo[1]) / dx[1])
                if iy > ny - 1:
                    iy = ny - 1
                ix = iy * nx + ix
            cell[i] = ix
            starts[ix + 1] += 1
        if bad < 0:
            for c in range(n_cells):
                starts[c + 1] += starts[c]
                fill[c] = starts[c]
            for i in range(n):
                c = cell[i]
                perm[fill[c]] = i
                fill[c] += 1
    if bad >= 0:
        raise IndexingFault(f"particle {bad} at {np.asarray(pos[bad]).tolist()} lies outside the domain")
    return cell_a, starts_a, perm_a


cdef inline void diffuse(double* v, int axis, double sign, double temp,
                         uint64_t key, uint64_t c) noexcept nogil:
    cdef double vn = sqrt(-2.0 * temp * log1p(-uni(key, c)))
    cdef double r = sqrt(-2.0 * log1p(-uni(key, c + 1)))
    cdef double th = TWO_PI * uni(key, c + 2)
    cdef double st = sqrt(temp)
    cdef int t1 = 1, t2 = 2
    if axis == 1:
        t1 = 0
    v[axis] = sign * vn
    v[t1] = st * (r * cos(th))
    v[t2] = st * (r * sin(th))


def move(double[:, ::1] pos, double[:, ::1] vel, uint8_t[::1] removed,
         Py_ssize_t start, Py_ssize_t stop, Py_ssize_t stride, double dt, dts, dict geom,
         uint64_t key_base):
    """Ballistic motion with wall interaction; see ``_pykernels.move``."""
    cdef int dim = geom["dim"]
    cdef double[::1] lo = geom["lo"]
    cdef double[::1] hi = geom["hi"]
    cdef int32_t[::1] kind = geom["face_kind"]
    cdef double[::1] ftemp = geom["face_temp"]
    cdef int has_body = geom["has_body"]
    cdef double[::1] body = geom["body"]
    cdef int body_kind = geom["body_kind"]
    cdef double body_temp = geom["body_temp"]
    cdef double[::1] dtv
    cdef int use_dts = dts is not None
    if use_dts:
        dtv = np.ascontiguousarray(dts, dtype=np.float64)
    cdef Py_ssize_t i, n_removed = 0
    cdef int a, o, f, bf, ev, face, k, side, it
    cdef uint64_t key
    cdef double x[2]
    cdef double v[3]
    cdef double rem, tbest, t, other, olo, ohi, plane, temp, sign
    cdef int approach_ok
    with nogil:
        i = start
        while i < stop:
            rem = dtv[i] if use_dts else dt
            key = derive(key_base, <uint64_t>i)
            x[0] = pos[i, 0]
            x[1] = pos[i, 1] if dim == 2 else 0.0
            v[0] = vel[i, 0]
            v[1] = vel[i, 1]
            v[2] = vel[i, 2]
            ev = 0
            for it in range(MAX_WALL_EVENTS):
                tbest = rem
                face = -1
                for a in range(dim):
                    if v[a] > 0:
                        t = (hi[a] - x[a]) / v[a]
                        if t < 0:
                            t = 0.0
                        if t < tbest:
                            tbest = t
                            face = 2 * a + 1
                    if v[a] < 0:
                        t = (lo[a] - x[a]) / v[a]
                        if t < 0:
                            t = 0.0
                        if t < tbest:
                            tbest = t
                            face = 2 * a
                if has_body:
                    for f in range(4):
                        a = f // 2
                        o = 1 - a
                        plane = body[f]
                        if f % 2 == 0:
                            approach_ok = x[a] <= plane and v[a] > 0
                        else:
                            approach_ok = x[a] >= plane and v[a] < 0
                        if not approach_ok:
                            continue
                        t = (plane - x[a]) / v[a]
                        if t < 0:
                            t = 0.0
                        other = x[o] + v[o] * t
                        if o == 1:
                            olo = body[2]
                            ohi = body[3]
                        else:
                            olo = body[0]
                            ohi = body[1]
                        if other >= olo and other <= ohi and t < tbest:
                            tbest = t
                            face = 4 + f
                if face < 0:
                    for a in range(dim):
                        x[a] = x[a] + v[a] * rem
                    break
                for a in range(dim):
                    x[a] = x[a] + v[a] * tbest
                if face < 4:
                    a = face // 2
                    side = face % 2
                    x[a] = hi[a] if side else lo[a]
                    k = kind[face]
                    temp = ftemp[face]
                    sign = -1.0 if side else 1.0
                else:
                    bf = face - 4
                    a = bf // 2
                    x[a] = body[bf]
                    k = body_kind
                    temp = body_temp
                    sign = 1.0 if bf % 2 else -1.0
                rem = rem - tbest
                if k == 0:
                    removed[i] = 1
                    n_removed += 1
                    break
                elif k == 1:
                    v[a] = -v[a]
                else:
                    diffuse(v, a, sign, temp, key, <uint64_t>(3 * ev))
                    ev += 1
            pos[i, 0] = x[0]
            if dim == 2:
                pos[i, 1] = x[1]
            vel[i, 0] = v[0]
            vel[i, 1] = v[1]
            vel[i, 2] = v[2]
            i += stride
    return n_removed


def collide(double[:, ::1] vel, int64_t[::1] perm, int64_t[::1] starts, Py_ssize_t start,
            Py_ssize_t stride, double[::1] crmax, double[::1] inv_vol, double coef,
            uint64_t key_base):
    """No-time-counter hard-sphere collisions in cells ``start::stride``."""
    cdef Py_ssize_t n_cells = starts.shape[0] - 1
    cdef Py_ssize_t c, s, r, ncand, pi, pj, i, j
    cdef int64_t accepted = 0
    cdef uint64_t key, base
    cdef double nf, cm, g0, g1, g2, cr, cos_t, sin_t, phi, h0, h1, h2, m0, m1, m2
    cdef double u3
    with nogil:
        c = start
        while c < n_cells:
            s = starts[c]
            nf = <double>(starts[c + 1] - s)
            if nf >= 2:
                key = derive(key_base, <uint64_t>c)
                ncand = <Py_ssize_t>floor(0.5 * nf * (nf - 1.0) * coef * crmax[c] * inv_vol[c] + uni(key, 0))
                for r in range(ncand):
                    base = 1 + 5 * r
                    i = <Py_ssize_t>floor(uni(key, base) * nf)
                    if i > <Py_ssize_t>nf - 1:
                        i = <Py_ssize_t>nf - 1
                    j = <Py_ssize_t>floor(uni(key, base + 1) * (nf - 1.0))
                    if j > <Py_ssize_t>nf - 2:
                        j = <Py_ssize_t>nf - 2
                    if j >= i:
                        j += 1
                    pi = perm[s + i]
                    pj = perm[s + j]
                    g0 = vel[pi, 0] - vel[pj, 0]
                    g1 = vel[pi, 1] - vel[pj, 1]
                    g2 = vel[pi, 2] - vel[pj, 2]
                    cr = sqrt(g0 * g0 + g1 * g1 + g2 * g2)
                    cm = crmax[c]
                    if cr > cm:
                        crmax[c] = cr
                        cm = cr
                    u3 = uni(key, base + 2)
                    if not (u3 * cm < cr):
                        continue
                    accepted += 1
                    cos_t = 2.0 * uni(key, base + 3) - 1.0
                    sin_t = sqrt(1.0 - cos_t * cos_t)
                    phi = TWO_PI * uni(key, base + 4)
                    h0 = 0.5 * cr * sin_t * cos(phi)
                    h1 = 0.5 * cr * sin_t * sin(phi)
                    h2 = 0.5 * cr * cos_t
                    m0 = 0.5 * (vel[pi, 0] + vel[pj, 0])
                    m1 = 0.5 * (vel[pi, 1] + vel[pj, 1])
                    m2 = 0.5 * (vel[pi, 2] + vel[pj, 2])
                    vel[pi, 0] = m0 + h0
                    vel[pi, 1] = m1 + h1
                    vel[pi, 2] = m2 + h2
                    vel[pj, 0] = m0 - h0
                    vel[pj, 1] = m1 - h1
                    vel[pj, 2] = m2 - h2
            c += stride
    return accepted


def sample(double[:, ::1] vel, int64_t[::1] perm, int64_t[::1] starts, cell_sorted,
           Py_ssize_t start, Py_ssize_t stride, int64_t[::1] sum_n, double[:, ::1] sum_v,
           double[::1] sum_v2):
    """Per-cell count, velocity and squared-speed sums in ``perm`` order."""
    cdef Py_ssize_t n_cells = starts.shape[0] - 1
    cdef Py_ssize_t c, k, p
    cdef double a0, a1, a2, q, w0, w1, w2
    with nogil:
        c = start
        while c < n_cells:
            a0 = 0.0
            a1 = 0.0
            a2 = 0.0
            q = 0.0
            for k in range(starts[c], starts[c + 1]):
                p = perm[k]
                w0 = vel[p, 0]
                w1 = vel[p, 1]
                w2 = vel[p, 2]
                a0 = a0 + w0
                a1 = a1 + w1
                a2 = a2 + w2
                q = q + (w0 * w0 + w1 * w1 + w2 * w2)
            sum_n[c] += starts[c + 1] - starts[c]
            sum_v[c, 0] += a0
            sum_v[c, 1] += a1
            sum_v[c, 2] += a2
            sum_v2[c] += q
            c += stride

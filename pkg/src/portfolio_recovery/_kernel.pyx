# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled trajectory kernel; mirrors ``_kernel_py.simulate_returns`` exactly."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, log1p, expm1, ceil
from libc.stdlib cimport malloc, free as cfree
from libc.stdint cimport uint64_t, int64_t
from scipy.special.cython_special cimport ndtr, ndtri

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t M1 = 0xBF58476D1CE4E5B9ULL
cdef uint64_t M2 = 0x94D049BB133111EBULL
cdef double INV53 = 1.0 / 9007199254740992.0
cdef double ONE_MINUS = 1.0 - 1.0 / 9007199254740992.0
cdef uint64_t TAG_DURATION = 1
cdef uint64_t TAG_PICK = 2

cdef enum:
    DETERMINISTIC = 0
    LOGNORMAL = 1
    EXPONENTIAL = 2

cdef enum:
    RANDOM = 1


cdef inline uint64_t mix64(uint64_t z) nogil:
    z = z + GOLDEN
    z = (z ^ (z >> 30)) * M1
    z = (z ^ (z >> 27)) * M2
    return z ^ (z >> 31)


cdef inline double u4(uint64_t key, uint64_t a, uint64_t b, uint64_t c) nogil:
    cdef uint64_t h = mix64(key ^ a)
    h = mix64(h ^ b)
    h = mix64(h ^ c)
    return (<double>(h >> 11) + 0.5) * INV53


cdef struct Durations:
    const int64_t* kind
    const double* pa
    const double* pb
    const int64_t* doff
    const int64_t* dlen
    const int64_t* ddays
    const double* dcdf


cdef inline int64_t draw(Durations* D, int64_t b, double u, int64_t spent) nogil:
    cdef int64_t k = D.kind[b]
    cdef double a = D.pa[b], bb = D.pb[b], f = 0.0, v, x
    cdef int64_t d, j, o, n
    if k == DETERMINISTIC:
        d = <int64_t>a
        return d if d > spent + 1 else spent + 1
    if spent > 0:
        if k == LOGNORMAL:
            f = ndtr((log(<double>spent) - a) / bb)
        elif k == EXPONENTIAL:
            f = -expm1(-(<double>spent) / a)
        else:
            o = D.doff[b]
            n = D.dlen[b]
            for j in range(n):
                if D.ddays[o + j] > spent:
                    break
                f = D.dcdf[o + j]
    v = f + u * (1.0 - f)
    if v > ONE_MINUS:
        v = ONE_MINUS
    if k == LOGNORMAL:
        x = exp(a + bb * ndtri(v))
        d = <int64_t>ceil(x)
    elif k == EXPONENTIAL:
        d = <int64_t>ceil(-a * log1p(-v))
    else:
        o = D.doff[b]
        n = D.dlen[b]
        d = D.ddays[o + n - 1]
        for j in range(n):
            if D.dcdf[o + j] > v:
                d = D.ddays[o + j]
                break
    if d < spent + 1:
        d = spent + 1
    return d if d > 1 else 1


cdef inline bint less(int64_t da, int64_t ba, int64_t db, int64_t bb) nogil:
    return da < db or (da == db and ba < bb)


cdef inline void heap_push(int64_t* hd, int64_t* hb, int64_t* size, int64_t d, int64_t b) nogil:
    cdef int64_t i = size[0], p
    size[0] += 1
    while i > 0:
        p = (i - 1) >> 1
        if less(d, b, hd[p], hb[p]):
            hd[i] = hd[p]
            hb[i] = hb[p]
            i = p
        else:
            break
    hd[i] = d
    hb[i] = b


cdef inline int64_t heap_pop(int64_t* hd, int64_t* hb, int64_t* size) nogil:
    cdef int64_t top = hb[0]
    cdef int64_t n = size[0] - 1
    cdef int64_t d = hd[n], b = hb[n], i = 0, c
    size[0] = n
    while True:
        c = 2 * i + 1
        if c >= n:
            break
        if c + 1 < n and less(hd[c + 1], hb[c + 1], hd[c], hb[c]):
            c += 1
        if less(hd[c], hb[c], d, b):
            hd[i] = hd[c]
            hb[i] = hb[c]
            i = c
        else:
            break
    if n > 0:
        hd[i] = d
        hb[i] = b
    return top


def simulate_returns(
    const int64_t[::1] cell_of, const int64_t[::1] people,
    const int64_t[::1] kind, const double[::1] pa, const double[::1] pb,
    const int64_t[::1] doff, const int64_t[::1] dlen,
    const int64_t[::1] ddays, const double[::1] dcdf,
    const int64_t[::1] order_ptr, const int64_t[::1] order_ids,
    const int64_t[::1] started, int64_t elapsed, const int64_t[::1] free,
    const int64_t[::1] first_ids, const int64_t[::1] inprog_ids,
    int policy, double gamma, int64_t horizon, int cumulative,
    key, int64_t i0, int64_t n_traj,
):
    cdef Py_ssize_t n = cell_of.shape[0]
    cdef Py_ssize_t n_cells = free.shape[0]
    cdef uint64_t ukey = <uint64_t>key
    cdef cnp.ndarray[cnp.float64_t, ndim=1] result = np.empty(n_traj, dtype=np.float64)
    cdef double[::1] out = result
    cdef Durations D
    D.kind = &kind[0] if kind.shape[0] else NULL
    D.pa = &pa[0] if pa.shape[0] else NULL
    D.pb = &pb[0] if pb.shape[0] else NULL
    D.doff = &doff[0] if doff.shape[0] else NULL
    D.dlen = &dlen[0] if dlen.shape[0] else NULL
    D.ddays = &ddays[0] if ddays.shape[0] else NULL
    D.dcdf = &dcdf[0] if dcdf.shape[0] else NULL

    cdef int64_t* stamp = <int64_t*>malloc((n + 1) * sizeof(int64_t))
    cdef int64_t* hd = <int64_t*>malloc((n + 1) * sizeof(int64_t))
    cdef int64_t* hb = <int64_t*>malloc((n + 1) * sizeof(int64_t))
    cdef int64_t* free_l = <int64_t*>malloc((n_cells + 1) * sizeof(int64_t))
    cdef int64_t* ptr = <int64_t*>malloc((n_cells + 1) * sizeof(int64_t))
    cdef int64_t* avail = <int64_t*>malloc((n + 1) * sizeof(int64_t))
    if not stamp or not hd or not hb or not free_l or not ptr or not avail:
        cfree(stamp); cfree(hd); cfree(hb); cfree(free_l); cfree(ptr); cfree(avail)
        raise MemoryError()

    cdef Py_ssize_t t, j, g
    cdef int64_t i, b, s, size, t1, r, now, k, end, m, picks, mark, denom
    cdef double total, disc, u
    try:
        with nogil:
            for j in range(n):
                stamp[j] = 0
            for t in range(n_traj):
                i = i0 + t
                mark = t + 1
                size = 0
                picks = 0
                for g in range(n_cells):
                    free_l[g] = free[g]
                    ptr[g] = order_ptr[g]
                for j in range(inprog_ids.shape[0]):
                    b = inprog_ids[j]
                    s = started[b]
                    heap_push(hd, hb, &size, s + draw(&D, b, u4(ukey, <uint64_t>i, TAG_DURATION, <uint64_t>b), elapsed - s), b)
                for j in range(first_ids.shape[0]):
                    b = first_ids[j]
                    stamp[b] = mark
                    free_l[cell_of[b]] -= 1
                    heap_push(hd, hb, &size, elapsed + draw(&D, b, u4(ukey, <uint64_t>i, TAG_DURATION, <uint64_t>b), 0), b)
                now = elapsed
                total = 0.0
                disc = 1.0
                k = -1
                while True:
                    # base policy fills idle crews at the current epoch
                    for g in range(n_cells):
                        while free_l[g] > 0:
                            end = order_ptr[g + 1]
                            while ptr[g] < end and stamp[order_ids[ptr[g]]] == mark:
                                ptr[g] += 1
                            if ptr[g] >= end:
                                break
                            if policy == RANDOM:
                                m = 0
                                for j in range(ptr[g], end):
                                    if stamp[order_ids[j]] != mark:
                                        avail[m] = order_ids[j]
                                        m += 1
                                u = u4(ukey, <uint64_t>i, TAG_PICK, <uint64_t>picks)
                                picks += 1
                                j = <Py_ssize_t>(u * m)
                                if j > m - 1:
                                    j = m - 1
                                b = avail[j]
                            else:
                                b = order_ids[ptr[g]]
                            stamp[b] = mark
                            free_l[g] -= 1
                            heap_push(hd, hb, &size, now + draw(&D, b, u4(ukey, <uint64_t>i, TAG_DURATION, <uint64_t>b), 0), b)
                    k += 1
                    if k > horizon or size == 0:
                        break
                    t1 = hd[0]
                    r = 0
                    while size > 0 and hd[0] == t1:
                        b = heap_pop(hd, hb, &size)
                        r += people[b]
                        free_l[cell_of[b]] += 1
                    denom = t1 if cumulative else t1 - now
                    total += disc * (<double>r / <double>denom)
                    disc *= gamma
                    now = t1
                    if k == horizon:
                        break
                out[t] = total
    finally:
        cfree(stamp); cfree(hd); cfree(hb); cfree(free_l); cfree(ptr); cfree(avail)
    return result

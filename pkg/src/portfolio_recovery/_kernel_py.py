"""Pure-Python trajectory kernel (reference and fallback for the compiled one).

Both kernels must return bit-identical results; see tests/test_kernel.py.
"""
from __future__ import annotations

import heapq

import numpy as np

from .damage import draw_days
from .rng import hash_words, u01

TAG_DURATION = 1
TAG_PICK = 2
GREEDY, RANDOM, FIXED_ORDER = 0, 1, 2


def simulate_returns(
    cell_of, people, kind, pa, pb, doff, dlen, ddays, dcdf,
    order_ptr, order_ids, started, elapsed, free, first_ids, inprog_ids,
    policy, gamma, horizon, cumulative, key, i0, n_traj,
):
    """Discounted returns of ``n_traj`` simulated trajectories.

    Each trajectory starts the buildings in ``first_ids`` at day ``elapsed``,
    lets the base policy fill the remaining idle crews, then follows the base
    policy for up to ``horizon`` further transitions.
    """
    cell_of = cell_of.tolist()
    people = people.tolist()
    kind = kind.tolist()
    pa = pa.tolist()
    pb = pb.tolist()
    doff = doff.tolist()
    dlen = dlen.tolist()
    ddays = ddays.tolist()
    dcdf = dcdf.tolist()
    order_ptr = order_ptr.tolist()
    order_ids = order_ids.tolist()
    started = started.tolist()
    free0 = free.tolist()
    first_ids = first_ids.tolist()
    inprog_ids = inprog_ids.tolist()
    n_cells = len(free0)
    out = np.empty(n_traj, dtype=np.float64)

    for t in range(n_traj):
        i = i0 + t
        taken = set()
        free_l = list(free0)
        ptr = order_ptr[:-1]
        heap = []
        picks = 0

        def days(b, spent):
            o = doff[b]
            return draw_days(
                kind[b], pa[b], pb[b], ddays[o:o + dlen[b]], dcdf[o:o + dlen[b]],
                u01(hash_words(key, i, TAG_DURATION, b)), spent,
            )

        def next_target(g):
            nonlocal picks
            end = order_ptr[g + 1]
            while ptr[g] < end and order_ids[ptr[g]] in taken:
                ptr[g] += 1
            if ptr[g] >= end:
                return -1
            if policy != RANDOM:
                return order_ids[ptr[g]]
            avail = [b for b in order_ids[ptr[g]:end] if b not in taken]
            u = u01(hash_words(key, i, TAG_PICK, picks))
            picks += 1
            j = int(u * len(avail))
            return avail[min(j, len(avail) - 1)]

        def fill(now):
            for g in range(n_cells):
                while free_l[g] > 0:
                    b = next_target(g)
                    if b < 0:
                        break
                    taken.add(b)
                    free_l[g] -= 1
                    heapq.heappush(heap, (now + days(b, 0), b))

        for b in inprog_ids:
            s = started[b]
            heapq.heappush(heap, (s + days(b, elapsed - s), b))
        for b in first_ids:
            taken.add(b)
            free_l[cell_of[b]] -= 1
            heapq.heappush(heap, (elapsed + days(b, 0), b))
        now = elapsed
        fill(now)

        total = 0.0
        disc = 1.0
        for k in range(horizon + 1):
            if not heap:
                break
            t1 = heap[0][0]
            r = 0
            while heap and heap[0][0] == t1:
                _, b = heapq.heappop(heap)
                r += people[b]
                free_l[cell_of[b]] += 1
            denom = t1 if cumulative else t1 - now
            total += disc * (r / denom)
            disc *= gamma
            now = t1
            if k == horizon:
                break
            fill(now)
        out[t] = total
    return out

"""Compiled helpers for the explorer: packed-state hash set and graph sweeps."""
from __future__ import annotations

import numpy as np
from numba import njit

EMPTY = -1


# ---- packed states -----------------------------------------------------------------

@njit(cache=True)
def pack_rows(rows, word, shift, nwords):
    m = rows.shape[0]
    out = np.zeros((m, nwords), dtype=np.uint64)
    for r in range(m):
        for k in range(rows.shape[1]):
            out[r, word[k]] |= np.uint64(rows[r, k]) << np.uint64(shift[k])
    return out


@njit(cache=True)
def unpack_rows(keys, word, shift, mask):
    m = keys.shape[0]
    f = word.shape[0]
    out = np.empty((m, f), dtype=np.int64)
    for r in range(m):
        for k in range(f):
            out[r, k] = np.int64((keys[r, word[k]] >> np.uint64(shift[k])) & np.uint64(mask[k]))
    return out


@njit(cache=True)
def _hash(keys, r):
    h = np.uint64(0x9E3779B97F4A7C15)
    for w in range(keys.shape[1]):
        x = keys[r, w] ^ h
        x ^= x >> np.uint64(30)
        x *= np.uint64(0xBF58476D1CE4E5B9)
        x ^= x >> np.uint64(27)
        x *= np.uint64(0x94D049BB133111EB)
        x ^= x >> np.uint64(31)
        h = x + np.uint64(w + 1)
    return h


@njit(cache=True)
def _same(a, i, b, j):
    for w in range(a.shape[1]):
        if a[i, w] != b[j, w]:
            return False
    return True


@njit(cache=True)
def rehash(states, n, cap):
    table = np.full(cap, EMPTY, dtype=np.int32)
    mask = np.uint64(cap - 1)
    for k in range(n):
        slot = _hash(states, k) & mask
        while table[slot] != EMPTY:
            slot = (slot + np.uint64(1)) & mask
        table[slot] = k
    return table


@njit(cache=True)
def insert_batch(table, states, n, keys, src, lab, parent, parent_label, limit):
    """Look up every key, appending unseen ones in order; returns (dst, new n).

    ``dst[r]`` is -1 for keys that would exceed ``limit`` states.
    """
    mask = np.uint64(table.shape[0] - 1)
    dst = np.empty(keys.shape[0], dtype=np.int32)
    for r in range(keys.shape[0]):
        slot = _hash(keys, r) & mask
        found = -1
        while True:
            k = table[slot]
            if k == EMPTY:
                break
            if _same(states, k, keys, r):
                found = k
                break
            slot = (slot + np.uint64(1)) & mask
        if found < 0 and n < limit:
            for w in range(keys.shape[1]):
                states[n, w] = keys[r, w]
            table[slot] = n
            parent[n] = src[r]
            parent_label[n] = lab[r]
            found = n
            n += 1
        dst[r] = found
    return dst, n


# ---- graph sweeps --------------------------------------------------------------------

@njit(cache=True)
def reverse_csr(indptr, adj, n, with_edges):
    counts = np.zeros(n + 1, dtype=np.int64)
    for e in range(adj.shape[0]):
        counts[adj[e] + 1] += 1
    for v in range(n):
        counts[v + 1] += counts[v]
    rptr = counts.copy()
    radj = np.empty(adj.shape[0], dtype=np.int32)
    rlab_edge = np.empty(adj.shape[0] if with_edges else 0, dtype=np.int32)
    fill = counts[:n].copy()
    for v in range(n):
        for e in range(indptr[v], indptr[v + 1]):
            w = adj[e]
            radj[fill[w]] = v
            if with_edges:
                rlab_edge[fill[w]] = e
            fill[w] += 1
    return rptr, radj, rlab_edge


@njit(cache=True)
def sweep(indptr, adj, edge_ok, seeds, n):
    """Nodes reachable from ``seeds`` through edges ``e`` with ``edge_ok[e]``."""
    seen = np.zeros(n, dtype=np.bool_)
    stack = np.empty(n, dtype=np.int32)
    top = 0
    for s in seeds:
        if not seen[s]:
            seen[s] = True
            stack[top] = s
            top += 1
    while top > 0:
        top -= 1
        v = stack[top]
        for e in range(indptr[v], indptr[v + 1]):
            if edge_ok[e]:
                w = adj[e]
                if not seen[w]:
                    seen[w] = True
                    stack[top] = w
                    top += 1
    return seen


@njit(cache=True)
def closure(indptr, adj, seeds, n):
    """Nodes reachable from ``seeds`` along any edge."""
    seen = np.zeros(n, dtype=np.bool_)
    stack = np.empty(n, dtype=np.int32)
    top = 0
    for s in seeds:
        if not seen[s]:
            seen[s] = True
            stack[top] = s
            top += 1
    while top > 0:
        top -= 1
        v = stack[top]
        for e in range(indptr[v], indptr[v + 1]):
            w = adj[e]
            if not seen[w]:
                seen[w] = True
                stack[top] = w
                top += 1
    return seen


@njit(cache=True)
def sweep_reverse(rptr, radj, redge, edge_ok, seeds, n):
    seen = np.zeros(n, dtype=np.bool_)
    stack = np.empty(n, dtype=np.int32)
    top = 0
    for s in seeds:
        if not seen[s]:
            seen[s] = True
            stack[top] = s
            top += 1
    while top > 0:
        top -= 1
        v = stack[top]
        for k in range(rptr[v], rptr[v + 1]):
            if edge_ok[redge[k]]:
                w = radj[k]
                if not seen[w]:
                    seen[w] = True
                    stack[top] = w
                    top += 1
    return seen


@njit(cache=True)
def greatest_fixpoint(indptr, adj, edge_ok, rptr, radj, redge, n):
    """Largest set X where every member has an ``edge_ok`` edge into X."""
    deg = np.zeros(n, dtype=np.int64)
    for v in range(n):
        for e in range(indptr[v], indptr[v + 1]):
            if edge_ok[e]:
                deg[v] += 1
    alive = np.ones(n, dtype=np.bool_)
    queue = np.empty(n, dtype=np.int32)
    head = 0
    tail = 0
    for v in range(n):
        if deg[v] == 0:
            alive[v] = False
            queue[tail] = v
            tail += 1
    while head < tail:
        v = queue[head]
        head += 1
        for k in range(rptr[v], rptr[v + 1]):
            if edge_ok[redge[k]]:
                u = radj[k]
                if alive[u]:
                    deg[u] -= 1
                    if deg[u] == 0:
                        alive[u] = False
                        queue[tail] = u
                        tail += 1
    return alive


@njit(cache=True)
def bfs_path(indptr, adj, edge_ok, start, target, n):
    """Edge indices of a shortest ``edge_ok`` path from ``start`` into ``target``."""
    prev_edge = np.full(n, -1, dtype=np.int64)
    seen = np.zeros(n, dtype=np.bool_)
    queue = np.empty(n, dtype=np.int32)
    seen[start] = True
    queue[0] = start
    head, tail = 0, 1
    hit = -1
    if target[start]:
        hit = start
    while head < tail and hit < 0:
        v = queue[head]
        head += 1
        for e in range(indptr[v], indptr[v + 1]):
            if edge_ok[e]:
                w = adj[e]
                if not seen[w]:
                    seen[w] = True
                    prev_edge[w] = e
                    if target[w]:
                        hit = w
                        break
                    queue[tail] = w
                    tail += 1
    if hit < 0:
        return np.empty(0, dtype=np.int64), False
    count = 0
    w = hit
    while w != start:
        count += 1
        e = prev_edge[w]
        # walk back: find the source of e by binary search on indptr
        lo, hi = 0, n
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if indptr[mid] <= e:
                lo = mid
            else:
                hi = mid
        w = lo
    out = np.empty(count, dtype=np.int64)
    w = hit
    k = count
    while w != start:
        k -= 1
        e = prev_edge[w]
        out[k] = e
        lo, hi = 0, n
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if indptr[mid] <= e:
                lo = mid
            else:
                hi = mid
        w = lo
    return out, True


@njit(cache=True)
def depths(parent, n):
    d = np.zeros(n, dtype=np.int64)
    for k in range(1, n):
        d[k] = d[parent[k]] + 1
    return d

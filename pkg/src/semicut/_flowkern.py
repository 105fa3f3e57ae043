"""Compiled kernels for integral max-flow and flow decomposition.

The network is stored as a CSR arc list: arcs of node ``u`` occupy
``start[u]:start[u+1]``; ``rev[a]`` is the paired reverse arc.  Capacities are
int64 residuals that are modified in place.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _bfs_levels(start, head, cap, s, t, level, queue):
    level[:] = -1
    level[s] = 0
    qh = 0
    qt = 0
    queue[qt] = s
    qt += 1
    while qh < qt:
        u = queue[qh]
        qh += 1
        for a in range(start[u], start[u + 1]):
            v = head[a]
            if cap[a] > 0 and level[v] < 0:
                level[v] = level[u] + 1
                queue[qt] = v
                qt += 1
    return level[t] >= 0


@njit(cache=True)
def dinic(start, head, tail, cap, rev, s, t):
    """Maximum s-t flow by blocking flows on level graphs.

    Returns the flow value; ``cap`` holds the final residual capacities.
    """
    n_nodes = start.shape[0] - 1
    level = np.empty(n_nodes, np.int64)
    queue = np.empty(n_nodes, np.int64)
    it = np.empty(n_nodes, np.int64)
    path = np.empty(n_nodes, np.int64)
    total = 0
    while _bfs_levels(start, head, cap, s, t, level, queue):
        for u in range(n_nodes):
            it[u] = start[u]
        depth = 0
        u = s
        while True:
            if u == t:
                b = cap[path[0]]
                for k in range(1, depth):
                    if cap[path[k]] < b:
                        b = cap[path[k]]
                for k in range(depth):
                    a = path[k]
                    cap[a] -= b
                    cap[rev[a]] += b
                total += b
                depth = 0
                u = s
                continue
            advanced = False
            while it[u] < start[u + 1]:
                a = it[u]
                v = head[a]
                if cap[a] > 0 and level[v] == level[u] + 1:
                    path[depth] = a
                    depth += 1
                    u = v
                    advanced = True
                    break
                it[u] += 1
            if not advanced:
                if depth == 0:
                    break
                level[u] = -1
                depth -= 1
                u = tail[path[depth]]
                it[u] += 1
    return total


@njit(cache=True)
def residual_reach(start, head, cap, rev, s, forward):
    """Vertices reachable from ``s`` in the residual graph.

    With ``forward=False`` the search runs on reversed residual arcs, giving the
    set of nodes that can still reach ``s``.
    """
    n_nodes = start.shape[0] - 1
    seen = np.zeros(n_nodes, np.bool_)
    stack = np.empty(n_nodes, np.int64)
    sp = 0
    stack[sp] = s
    sp += 1
    seen[s] = True
    while sp > 0:
        sp -= 1
        u = stack[sp]
        for a in range(start[u], start[u + 1]):
            v = head[a]
            if seen[v]:
                continue
            ok = cap[a] > 0 if forward else cap[rev[a]] > 0
            if ok:
                seen[v] = True
                stack[sp] = v
                sp += 1
    return seen


@njit(cache=True)
def decompose(start, head, amount, s, t):
    """Split a flow on a directed arc set into s-t paths.

    ``amount`` is consumed in place.  Flow cycles met during the walk are
    cancelled.  Returns (path_nodes, path_ptr, path_amount).
    """
    n_nodes = start.shape[0] - 1
    ptr = np.empty(n_nodes, np.int64)
    for u in range(n_nodes):
        ptr[u] = start[u]
    pos = np.full(n_nodes, -1, np.int64)
    walk = np.empty(n_nodes + 1, np.int64)
    warc = np.empty(n_nodes + 1, np.int64)

    cap_nodes = 1024
    nodes = np.empty(cap_nodes, np.int64)
    n_used = 0
    cap_paths = 64
    pptr = np.zeros(cap_paths + 1, np.int64)
    pamt = np.empty(cap_paths, np.int64)
    n_paths = 0

    while True:
        # find an arc out of s with flow left
        while ptr[s] < start[s + 1] and amount[ptr[s]] <= 0:
            ptr[s] += 1
        if ptr[s] >= start[s + 1]:
            break
        depth = 0
        walk[0] = s
        pos[s] = 0
        u = s
        while u != t:
            while ptr[u] < start[u + 1] and amount[ptr[u]] <= 0:
                ptr[u] += 1
            a = ptr[u]
            if a >= start[u + 1]:
                # conservation guarantees this does not happen for valid flows
                depth = -1
                break
            v = head[a]
            warc[depth] = a
            depth += 1
            if pos[v] >= 0:
                # cycle from pos[v] .. depth-1: cancel its bottleneck
                k0 = pos[v]
                b = amount[warc[k0]]
                for k in range(k0 + 1, depth):
                    if amount[warc[k]] < b:
                        b = amount[warc[k]]
                for k in range(k0, depth):
                    amount[warc[k]] -= b
                for k in range(k0 + 1, depth):
                    pos[walk[k]] = -1
                depth = k0
                u = v
                continue
            walk[depth] = v
            pos[v] = depth
            u = v
        for k in range(depth + 1):
            pos[walk[k]] = -1
        if depth < 0:
            break
        b = amount[warc[0]]
        for k in range(1, depth):
            if amount[warc[k]] < b:
                b = amount[warc[k]]
        for k in range(depth):
            amount[warc[k]] -= b
        # store interior nodes walk[1..depth-1]
        length = depth - 1
        if n_used + length > cap_nodes:
            while n_used + length > cap_nodes:
                cap_nodes *= 2
            grown = np.empty(cap_nodes, np.int64)
            grown[:n_used] = nodes[:n_used]
            nodes = grown
        for k in range(1, depth):
            nodes[n_used] = walk[k]
            n_used += 1
        if n_paths == cap_paths:
            cap_paths *= 2
            gp = np.zeros(cap_paths + 1, np.int64)
            gp[: n_paths + 1] = pptr[: n_paths + 1]
            pptr = gp
            ga = np.empty(cap_paths, np.int64)
            ga[:n_paths] = pamt[:n_paths]
            pamt = ga
        pamt[n_paths] = b
        n_paths += 1
        pptr[n_paths] = n_used
    return nodes[:n_used].copy(), pptr[: n_paths + 1].copy(), pamt[:n_paths].copy()

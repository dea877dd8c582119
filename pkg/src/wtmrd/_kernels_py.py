"""Pure numpy implementations of the hot kernels.

These mirror ``_kernels.pyx`` operation for operation so both backends give
bit-identical results on IEEE-754 doubles.
"""

from __future__ import annotations

import numpy as np


def move_toward(x, y, wx, wy, speed, dt):
    """Advance every node toward its waypoint in place.

    Returns a boolean mask of nodes that reached their waypoint this step.
    """
    dx = wx - x
    dy = wy - y
    dist = np.sqrt(dx * dx + dy * dy)
    step = speed * dt
    arrived = dist <= step
    moving = ~arrived
    frac = np.zeros_like(dist)
    frac[moving] = step[moving] / dist[moving]
    x[moving] += dx[moving] * frac[moving]
    y[moving] += dy[moving] * frac[moving]
    x[arrived] = wx[arrived]
    y[arrived] = wy[arrived]
    return arrived


def neighbor_csr(x, y, radio_range):
    """Adjacency of the unit-disk graph in CSR form.

    Returns ``(indptr, indices)``; neighbours of node ``i`` are
    ``indices[indptr[i]:indptr[i + 1]]`` in ascending order.
    """
    n = x.shape[0]
    dx = x[:, None] - x[None, :]
    dy = y[:, None] - y[None, :]
    within = dx * dx + dy * dy <= radio_range * radio_range
    np.fill_diagonal(within, False)
    rows, cols = np.nonzero(within)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
    return indptr, cols.astype(np.int32)


def active_weight_sums(weights, bits):
    """Row-wise sum of weights over active bits (``bits`` is 2-D uint8)."""
    return bits.astype(np.float64) @ weights


def rreq_targets(nbrs, eligible, trace):
    """Neighbours that may hear a forwarded RREQ: eligible and not on its trace."""
    keep = eligible[nbrs].astype(bool) & ~np.isin(nbrs, trace)
    return nbrs[keep]


def rreq_admit(receivers, trace, destination, eligible, count, prevs, limit):
    """Admission filter for one landed RREQ broadcast.

    ``count[v]`` and ``prevs[v, :count[v]]`` hold the previous hops node ``v``
    has already accepted this request from; they are updated in place.
    Returns ``(admitted, discards)`` where ``admitted`` keeps receiver order
    and includes the destination whenever it is eligible and off the trace.
    Receivers must be distinct.
    """
    prev = trace[-1]
    live = eligible[receivers].astype(bool) & ~np.isin(receivers, trace)
    at_dest = live & (receivers == destination)
    cand = live & ~at_dest
    c = count[receivers].astype(np.int64)
    seen = (prevs[receivers] == prev).any(axis=1)
    ok = cand & (c < limit) & ~seen
    hit = receivers[ok]
    prevs[hit, c[ok]] = prev
    count[hit] += 1
    taken = ok | at_dest
    return receivers[taken], int(receivers.shape[0] - np.count_nonzero(taken))

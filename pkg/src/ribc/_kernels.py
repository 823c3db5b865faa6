"""Compiled array kernels for the averaging step.

Loop order is fixed and there is no fastmath, so results are reproducible
bit for bit.  Two rows with the same membership run the same instruction
sequence on the same inputs and therefore produce identical outputs.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def pair_distances(x):
    n, d = x.shape
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            # scale by the largest component so tiny gaps do not underflow to 0
            m = 0.0
            for c in range(d):
                m = max(m, abs(x[i, c] - x[j, c]))
            if m == 0.0:
                continue
            s = 0.0
            for c in range(d):
                diff = (x[i, c] - x[j, c]) / m
                s += diff * diff
            out[i, j] = out[j, i] = m * np.sqrt(s)
    return out


@njit(cache=True)
def admissible(x, r, adj):
    dist = pair_distances(x)
    n = x.shape[0]
    out = np.zeros((n, n), dtype=np.bool_)
    for i in range(n):
        for j in range(n):
            out[i, j] = adj[i, j] and dist[i, j] <= r[i]
    return out


@njit(cache=True)
def average_rows(x, members):
    # anchored mean x_a + sum_j (x_j - x_a) / k, a = first member
    n, d = x.shape
    out = np.empty_like(x)
    for i in range(n):
        a = -1
        k = 0
        for j in range(n):
            if members[i, j]:
                if a < 0:
                    a = j
                k += 1
        for c in range(d):
            s = 0.0
            for j in range(n):
                if members[i, j]:
                    s += x[j, c] - x[a, c]
            out[i, c] = x[a, c] + s / k
    return out


@njit(cache=True)
def update(x, r, adj):
    members = admissible(x, r, adj)
    for i in range(x.shape[0]):
        members[i, i] = True
    return average_rows(x, members)


@njit(cache=True)
def absorbed(x, r, eps):
    dist = pair_distances(x)
    n = x.shape[0]
    for i in range(n):
        for j in range(i + 1, n):
            dij = dist[i, j]
            if dij > eps and dij <= max(r[i], r[j]):
                return False
    return True

"""
Exact transportation problem by successive shortest paths.

Supply nodes ``0 .. S-1``, demand nodes ``S .. S+D-1``, sink ``S+D`` and
source ``S+D+1``. Forward edges supply -> demand have unbounded capacity,
backward edges carry the current flow with negated cost. Dijkstra runs on
reduced costs, node potentials keep them non-negative.
"""
from __future__ import division, print_function

import numba as nb
import numpy as np

MASS_EPSILON = 1e-15


@nb.njit()
def _shortest_paths(cost, flow, supply, demand, potential, dist, prev, done):
    n_supply, n_demand = cost.shape
    n_nodes = n_supply + n_demand + 2
    sink = n_supply + n_demand
    source = sink + 1

    for v in range(n_nodes):
        dist[v] = np.inf
        prev[v] = -1
        done[v] = False
    dist[source] = 0.0

    for _ in range(n_nodes):
        u = -1
        best = np.inf
        for v in range(n_nodes):
            if not done[v] and dist[v] < best:
                best = dist[v]
                u = v
        if u == -1:
            break
        done[u] = True
        if u == sink:
            break
        if u == source:
            for i in range(n_supply):
                if supply[i] > MASS_EPSILON and not done[i]:
                    d = dist[u] + potential[u] - potential[i]
                    if d < dist[i]:
                        dist[i] = d
                        prev[i] = u
        elif u < n_supply:
            for j in range(n_demand):
                v = n_supply + j
                if not done[v]:
                    d = dist[u] + cost[u, j] + potential[u] - potential[v]
                    if d < dist[v]:
                        dist[v] = d
                        prev[v] = u
        else:
            j = u - n_supply
            if demand[j] > MASS_EPSILON and not done[sink]:
                d = dist[u] + potential[u] - potential[sink]
                if d < dist[sink]:
                    dist[sink] = d
                    prev[sink] = u
            for i in range(n_supply):
                if flow[i, j] > 0.0 and not done[i]:
                    d = dist[u] - cost[i, j] + potential[u] - potential[i]
                    if d < dist[i]:
                        dist[i] = d
                        prev[i] = u
    return dist[sink]


@nb.njit()
def transport_cost(supply: nb.float64[:], demand: nb.float64[:], cost: nb.float64[:, :]) -> nb.float64:
    """Minimal cost of moving ``supply`` onto ``demand`` given the pairwise ``cost`` matrix."""
    n_supply, n_demand = cost.shape
    n_nodes = n_supply + n_demand + 2
    sink = n_supply + n_demand
    source = sink + 1

    flow = np.zeros((n_supply, n_demand))
    supply = supply.copy()
    demand = demand.copy()
    potential = np.zeros(n_nodes)
    dist = np.empty(n_nodes)
    prev = np.empty(n_nodes, dtype=np.int64)
    done = np.empty(n_nodes, dtype=np.bool_)

    remaining = supply.sum()
    while remaining > MASS_EPSILON:
        dist_sink = _shortest_paths(cost, flow, supply, demand, potential, dist, prev, done)
        if dist_sink == np.inf:
            break
        for v in range(n_nodes):
            potential[v] += min(dist[v], dist_sink)

        bottleneck = np.inf
        v = sink
        while v != source:
            u = prev[v]
            if v == sink:
                bottleneck = min(bottleneck, demand[u - n_supply])
            elif u == source:
                bottleneck = min(bottleneck, supply[v])
            elif u >= n_supply:
                bottleneck = min(bottleneck, flow[v, u - n_supply])
            v = u

        v = sink
        while v != source:
            u = prev[v]
            if v == sink:
                demand[u - n_supply] -= bottleneck
            elif u == source:
                supply[v] -= bottleneck
            elif u < n_supply:
                flow[u, v - n_supply] += bottleneck
            else:
                flow[v, u - n_supply] -= bottleneck
            v = u
        remaining -= bottleneck

    total = 0.0
    for i in range(n_supply):
        for j in range(n_demand):
            total += flow[i, j] * cost[i, j]
    return total

"""Pure-Python edge-betweenness kernel.

Fallback twin of the compiled kernel in ``_betweenness_cy.pyx``; both must
produce bit-identical output (same operations in the same order). The graph
arrives in CSR form so the two implementations stay structurally parallel.
"""

from __future__ import annotations

import numpy as np


def edge_betweenness_kernel(
    n_nodes: int,
    indptr: np.ndarray,
    indices: np.ndarray,
    edge_ids: np.ndarray,
    n_edges: int,
    sources: np.ndarray,
    is_target: np.ndarray,
) -> np.ndarray:
    """Accumulate shortest-path edge betweenness over source/sink pairs.

    Runs one BFS plus a reverse dependency pass per source. Only pairs
    (s, t) with both endpoints flagged in ``is_target`` contribute; each
    unordered pair is visited from both ends, so the total is halved.
    Distances are unweighted hop counts.
    """
    bc = np.zeros(n_edges, dtype=np.float64)
    dist = np.empty(n_nodes, dtype=np.int64)
    sigma = np.empty(n_nodes, dtype=np.float64)
    delta = np.empty(n_nodes, dtype=np.float64)
    order = np.empty(n_nodes, dtype=np.int64)

    for s in sources:
        dist[:] = -1
        sigma[:] = 0.0
        delta[:] = 0.0
        dist[s] = 0
        sigma[s] = 1.0
        order[0] = s
        head, tail = 0, 1
        while head < tail:
            v = order[head]
            head += 1
            dv = dist[v]
            for p in range(indptr[v], indptr[v + 1]):
                w = indices[p]
                if dist[w] < 0:
                    dist[w] = dv + 1
                    order[tail] = w
                    tail += 1
                if dist[w] == dv + 1:
                    sigma[w] += sigma[v]
        # Reverse pass: predecessors are re-derived from distances, so no
        # predecessor lists are stored.
        for k in range(tail - 1, -1, -1):
            w = order[k]
            if w == s:
                continue
            coeff_base = (float(is_target[w]) + delta[w]) / sigma[w]
            dw = dist[w]
            for p in range(indptr[w], indptr[w + 1]):
                v = indices[p]
                if dist[v] == dw - 1:
                    c = sigma[v] * coeff_base
                    bc[edge_ids[p]] += c
                    delta[v] += c

    bc *= 0.5
    return bc

# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled edge-betweenness kernel.

Structural twin of ``betweenness_py.edge_betweenness_kernel``; keep the two
in lockstep so the backends stay bit-identical.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def edge_betweenness_kernel(
    Py_ssize_t n_nodes,
    cnp.int64_t[::1] indptr,
    cnp.int64_t[::1] indices,
    cnp.int64_t[::1] edge_ids,
    Py_ssize_t n_edges,
    cnp.int64_t[::1] sources,
    cnp.uint8_t[::1] is_target,
):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] bc_arr = np.zeros(n_edges, dtype=np.float64)
    cdef cnp.float64_t[::1] bc = bc_arr
    cdef cnp.int64_t[::1] dist = np.empty(n_nodes, dtype=np.int64)
    cdef cnp.float64_t[::1] sigma = np.empty(n_nodes, dtype=np.float64)
    cdef cnp.float64_t[::1] delta = np.empty(n_nodes, dtype=np.float64)
    cdef cnp.int64_t[::1] order = np.empty(n_nodes, dtype=np.int64)

    cdef Py_ssize_t si, head, tail, k
    cdef cnp.int64_t s, v, w, p, dv, dw
    cdef double coeff_base, c

    for si in range(sources.shape[0]):
        s = sources[si]
        for k in range(n_nodes):
            dist[k] = -1
            sigma[k] = 0.0
            delta[k] = 0.0
        dist[s] = 0
        sigma[s] = 1.0
        order[0] = s
        head = 0
        tail = 1
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
        for k in range(tail - 1, -1, -1):
            w = order[k]
            if w == s:
                continue
            coeff_base = (<double> is_target[w] + delta[w]) / sigma[w]
            dw = dist[w]
            for p in range(indptr[w], indptr[w + 1]):
                v = indices[p]
                if dist[v] == dw - 1:
                    c = sigma[v] * coeff_base
                    bc[edge_ids[p]] += c
                    delta[v] += c

    for k in range(n_edges):
        bc[k] *= 0.5
    return bc_arr

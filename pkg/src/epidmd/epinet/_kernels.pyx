# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled bit-matrix kernels; same contracts as ``_kernels_py``."""

from libc.stdint cimport uint64_t, int32_t, uint8_t

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


def count_infected_neighbors(const uint64_t[:, ::1] adj, const uint64_t[::1] mask,
                             const Py_ssize_t[::1] rows, int32_t[::1] out):
    cdef Py_ssize_t k, j, r
    cdef Py_ssize_t n_words = adj.shape[1]
    cdef int32_t acc
    with nogil:
        for k in range(rows.shape[0]):
            r = rows[k]
            acc = 0
            for j in range(n_words):
                acc += __builtin_popcountll(adj[r, j] & mask[j])
            out[k] = acc
    return out


def set_slot_edges(uint64_t[:, ::1] adj, Py_ssize_t slot, const uint8_t[::1] bits):
    cdef Py_ssize_t n = adj.shape[0]
    cdef Py_ssize_t n_words = adj.shape[1]
    cdef Py_ssize_t m = bits.shape[0]
    cdef Py_ssize_t j, word = slot >> 6
    cdef uint64_t bit = (<uint64_t>1) << (slot & 63)
    cdef uint64_t b
    with nogil:
        for j in range(n_words):
            adj[slot, j] = 0
        for j in range(n):
            b = 1 if (j < m and j != slot and bits[j]) else 0
            if b:
                adj[slot, j >> 6] |= (<uint64_t>1) << (j & 63)
                adj[j, word] |= bit
            else:
                adj[j, word] &= ~bit
    return None

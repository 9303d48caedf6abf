"""Pure-numpy implementations of the bit-matrix kernels."""

import numpy as np

_ONE = np.uint64(1)


def count_infected_neighbors(adj, mask, rows, out):
    """``out[k] = popcount(adj[rows[k]] & mask)``; returns ``out``."""
    if len(rows):
        np.sum(np.bitwise_count(adj[rows] & mask), axis=1, out=out, dtype=np.int32)
    return out


def set_slot_edges(adj, slot, bits):
    """Overwrite row and column ``slot`` of the symmetric bit matrix from bool ``bits``."""
    n_words = adj.shape[1]
    padded = np.zeros(n_words * 64, dtype=bool)
    padded[: bits.shape[0]] = bits
    padded[slot] = False
    adj[slot] = np.packbits(padded, bitorder="little").view(np.uint64)
    word, bit = divmod(int(slot), 64)
    col = padded[: adj.shape[0]].astype(np.uint64) << np.uint64(bit)
    adj[:, word] = (adj[:, word] & ~(_ONE << np.uint64(bit))) | col

"""Synthetic linear systems with known spectra."""

import numpy as np


def stable_operator(rng, d, r_lo=0.5, r_hi=0.95):
    """Real ``d x d`` operator ``Q B Q^T`` with ``B`` block diagonal; returns (A, eigenvalues)."""
    blocks, eigs = [], []
    k = 0
    while k < d:
        rad = rng.uniform(r_lo, r_hi)
        if d - k >= 2 and rng.random() < 0.5:
            ang = rng.uniform(0.2, 2.9)
            c, s = rad * np.cos(ang), rad * np.sin(ang)
            blocks.append(np.array([[c, -s], [s, c]]))
            eigs += [rad * np.exp(1j * ang), rad * np.exp(-1j * ang)]
            k += 2
        else:
            sign = 1.0 if rng.random() < 0.7 else -1.0
            blocks.append(np.array([[sign * rad]]))
            eigs.append(sign * rad + 0j)
            k += 1
    b = np.zeros((d, d))
    k = 0
    for blk in blocks:
        n = blk.shape[0]
        b[k : k + n, k : k + n] = blk
        k += n
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    return q @ b @ q.T, np.array(eigs)


def trajectory(a, x0, n):
    """``n`` snapshots as a (n, d) time-major array."""
    out = np.empty((n, a.shape[0]))
    out[0] = x0
    for k in range(1, n):
        out[k] = a @ out[k - 1]
    return out


def match_error(found, expected):
    """Largest relative error after optimally pairing two eigenvalue multisets."""
    from scipy.optimize import linear_sum_assignment

    found = np.asarray(found, dtype=complex)
    expected = np.asarray(expected, dtype=complex)
    cost = np.abs(found[:, None] - expected[None, :])
    rows, cols = linear_sum_assignment(cost)
    if len(rows) != len(expected) or len(found) != len(expected):
        return np.inf
    return float(np.max(cost[rows, cols] / np.abs(expected[cols])))

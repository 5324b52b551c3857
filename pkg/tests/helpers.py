"""Shared test helpers: column matching and brute-force oracles."""

import itertools

import numpy as np
from scipy.optimize import linear_sum_assignment


def match_columns(a_hat: np.ndarray, a_true: np.ndarray) -> np.ndarray:
    """Permutation aligning recovered columns to true columns (min total distance)."""
    cost = np.linalg.norm(
        a_hat[:, :, None] - a_true[:, None, :], axis=0
    )
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(a_true.shape[1], dtype=int)
    perm[cols] = rows
    return perm


def matched_component_error(a_hat: np.ndarray, a_true: np.ndarray) -> float:
    """Max column L2 error after permutation matching."""
    perm = match_columns(a_hat, a_true)
    return float(np.linalg.norm(a_hat[:, perm] - a_true, axis=0).max())


def matched_weight_error(
    w_hat: np.ndarray, a_hat: np.ndarray, w_true: np.ndarray, a_true: np.ndarray
) -> float:
    """Max weight error after matching components by column distance."""
    perm = match_columns(a_hat, a_true)
    return float(np.abs(w_hat[perm] - w_true).max())


def multilinear3_bruteforce(t, v1, v2, v3):
    """Naive quadruple-loop oracle for the multilinear map."""
    d = t.shape[0]
    k1, k2, k3 = v1.shape[1], v2.shape[1], v3.shape[1]
    out = np.zeros((k1, k2, k3))
    for a in range(k1):
        for b in range(k2):
            for c in range(k3):
                acc = 0.0
                for i in range(d):
                    for j in range(d):
                        for k in range(d):
                            acc += t[i, j, k] * v1[i, a] * v2[j, b] * v3[k, c]
                out[a, b, c] = acc
    return out


def enumerate_canonical_triples(dim: int) -> list[tuple[int, int, int]]:
    """All index triples with i <= j <= k < dim, by brute force."""
    return [
        (i, j, k)
        for (i, j, k) in itertools.product(range(dim), repeat=3)
        if i <= j <= k
    ]

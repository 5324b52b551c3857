"""Dense symmetric matrices/tensors and the multilinear algebra built on them.

All tensors are plain ``numpy`` arrays in row-major (C) order.  Symmetric
third-order tensors are represented densely; exact symmetry is obtained by
constructing them from their unique-entry vector (see
:func:`sym_tensor_from_unique`).  Sizes here are desk scale (D up to ~100),
so O(D^3) storage is acceptable.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

__all__ = [
    "outer3",
    "multilinear3",
    "apply_Iuu",
    "tensor_norm",
    "vectorize",
    "d_sym",
    "sym_canonical_indices",
    "sym_index_rank",
    "sym_tensor_from_unique",
    "unique_from_sym",
    "symmetrize_matrix",
    "symmetrize3",
    "is_symmetric_matrix",
    "is_symmetric3",
    "top_k_eigs",
]


def outer3(u: np.ndarray, v: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Rank-one third-order outer product: result[i,j,k] = u[i] v[j] w[k]."""
    u, v, w = (np.asarray(x, dtype=float) for x in (u, v, w))
    if u.ndim != 1 or u.shape != v.shape or v.shape != w.shape:
        raise ValueError(
            f"outer3 needs three equal-length vectors, got shapes "
            f"{u.shape}, {v.shape}, {w.shape}"
        )
    return np.einsum("i,j,k->ijk", u, v, w)


def multilinear3(
    t: np.ndarray, v1: np.ndarray, v2: np.ndarray, v3: np.ndarray
) -> np.ndarray:
    """Multilinear map of a cubic tensor by one matrix per mode.

    result[a,b,c] = sum_{ijk} t[i,j,k] v1[i,a] v2[j,b] v3[k,c], so a
    D x D x D tensor mapped by three D x K matrices becomes K x K x K.
    """
    t = np.asarray(t, dtype=float)
    if t.ndim != 3 or len(set(t.shape)) != 1:
        raise ValueError(f"expected a cubic 3-way tensor, got shape {t.shape}")
    d = t.shape[0]
    mats = []
    for m, v in enumerate((v1, v2, v3), start=1):
        v = np.asarray(v, dtype=float)
        if v.ndim != 2 or v.shape[0] != d:
            raise ValueError(
                f"mode-{m} matrix must have {d} rows, got shape {v.shape}"
            )
        mats.append(v)
    return np.einsum("ijk,ia,jb,kc->abc", t, *mats, optimize=True)


def apply_Iuu(t: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Contract the last two modes of a cubic tensor with the same vector.

    result[i] = sum_{jk} t[i,j,k] u[j] u[k].  This is the map iterated by
    the tensor power method.
    """
    t = np.asarray(t, dtype=float)
    u = np.asarray(u, dtype=float)
    if t.ndim != 3 or u.ndim != 1 or t.shape != (u.size,) * 3:
        raise ValueError(
            f"dimension mismatch: tensor {t.shape} vs vector {u.shape}"
        )
    return np.einsum("ijk,j,k->i", t, u, u)


def tensor_norm(t: np.ndarray) -> float:
    """Frobenius-type norm: the L2 norm of the vectorized tensor."""
    return float(np.linalg.norm(np.ravel(t)))


def vectorize(t: np.ndarray) -> np.ndarray:
    """Flatten a tensor to a vector in row-major (C) entry order."""
    return np.ravel(np.asarray(t, dtype=float)).copy()


def d_sym(dim: int, order: int = 3) -> int:
    """Number of unique entries of a symmetric order-M tensor of side ``dim``.

    Equals binomial(dim + order - 1, order).
    """
    if dim < 1:
        raise ValueError(f"dimension must be >= 1, got {dim}")
    return math.comb(dim + order - 1, order)


@lru_cache(maxsize=64)
def sym_canonical_indices(dim: int) -> np.ndarray:
    """Canonical index triples (i <= j <= k) in colexicographic order.

    Returns a read-only (d_sym(dim), 3) integer array.  Colex order sorts by
    k, then j, then i, which makes the rank of (i, j, k) equal to
    C(k+2, 3) + C(j+1, 2) + i.
    """
    triples = [
        (i, j, k)
        for k in range(dim)
        for j in range(k + 1)
        for i in range(j + 1)
    ]
    idx = np.array(triples, dtype=np.intp)
    idx.setflags(write=False)
    return idx


def sym_index_rank(i: int, j: int, k: int) -> int:
    """Rank of a canonical triple (i <= j <= k) in colexicographic order."""
    if not 0 <= i <= j <= k:
        raise ValueError(f"indices must satisfy 0 <= i <= j <= k, got {(i, j, k)}")
    return math.comb(k + 2, 3) + math.comb(j + 1, 2) + i


def sym_tensor_from_unique(dim: int, b: np.ndarray) -> np.ndarray:
    """Expand a unique-entry vector into an exactly symmetric cubic tensor.

    ``b`` lists the entries at canonical triples (i <= j <= k) in the order of
    :func:`sym_canonical_indices`; every permutation of a canonical index gets
    the same value, so the result is symmetric by construction.
    """
    b = np.asarray(b, dtype=float)
    n = d_sym(dim)
    if b.shape != (n,):
        raise ValueError(
            f"unique-entry vector must have length {n} for dim {dim}, "
            f"got shape {b.shape}"
        )
    idx = sym_canonical_indices(dim)
    t = np.zeros((dim, dim, dim))
    for p in itertools.permutations(range(3)):
        t[idx[:, p[0]], idx[:, p[1]], idx[:, p[2]]] = b
    return t


def unique_from_sym(t: np.ndarray) -> np.ndarray:
    """Extract the canonical unique-entry vector of a cubic tensor."""
    t = np.asarray(t, dtype=float)
    if t.ndim != 3 or len(set(t.shape)) != 1:
        raise ValueError(f"expected a cubic 3-way tensor, got shape {t.shape}")
    idx = sym_canonical_indices(t.shape[0])
    return t[idx[:, 0], idx[:, 1], idx[:, 2]].copy()


def symmetrize_matrix(a: np.ndarray) -> np.ndarray:
    """Exactly symmetric part (a + a.T) / 2 of a square matrix."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return (a + a.T) / 2.0


def symmetrize3(t: np.ndarray) -> np.ndarray:
    """Average a cubic tensor over all 6 index permutations, exactly symmetric.

    The permutation average is rebuilt from its canonical entries so the
    output passes the bitwise symmetry check regardless of float rounding.
    """
    t = np.asarray(t, dtype=float)
    if t.ndim != 3 or len(set(t.shape)) != 1:
        raise ValueError(f"expected a cubic 3-way tensor, got shape {t.shape}")
    acc = np.zeros_like(t)
    for p in itertools.permutations(range(3)):
        acc += np.transpose(t, p)
    acc /= 6.0
    return sym_tensor_from_unique(t.shape[0], unique_from_sym(acc))


def is_symmetric_matrix(a: np.ndarray) -> bool:
    a = np.asarray(a)
    return a.ndim == 2 and a.shape[0] == a.shape[1] and np.array_equal(a, a.T)


def is_symmetric3(t: np.ndarray) -> bool:
    """Exact (bitwise) symmetry check over all 6 index permutations."""
    t = np.asarray(t)
    if t.ndim != 3 or len(set(t.shape)) != 1:
        return False
    return all(
        np.array_equal(t, np.transpose(t, p))
        for p in itertools.permutations(range(3))
    )


def top_k_eigs(a: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Top-k eigenpairs of the symmetrized input, sorted by descending value.

    Eigenvalues are ordered algebraically (negative values, possible after
    noise addition, keep their sign).  Each eigenvector column is flipped so
    its largest-magnitude entry is positive, ties broken by lowest index,
    making cross-run comparisons deterministic.

    Returns:
        (eigenvalues, eigenvectors): shapes (k,) and (D, k); the columns are
        orthonormal.

    Raises:
        numpy.linalg.LinAlgError: if the eigensolver fails to converge.
    """
    a = symmetrize_matrix(a)
    d = a.shape[0]
    if not 1 <= k <= d:
        raise ValueError(f"k must be in [1, {d}], got {k}")
    vals, vecs = np.linalg.eigh(a)
    vals = vals[::-1][:k].copy()
    vecs = vecs[:, ::-1][:, :k].copy()
    for c in range(k):
        col = vecs[:, c]
        if col[np.argmax(np.abs(col))] < 0:
            vecs[:, c] = -col
    return vals, vecs

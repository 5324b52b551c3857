"""Seeded synthetic data for the three experiment families, plus exact moments.

PCA data: zero-mean Gaussians with a decaying top-K covariance spectrum over
a random orthogonal basis, preprocessed and split across sites.  MOG data:
spherical Gaussian mixtures with norm-bounded component means.  STM data:
single-topic documents encoded as word-index triples.  Ground-truth
parameters are always returned alongside samples so oracle metrics can score
recovered decompositions.
"""

from __future__ import annotations

import numpy as np

from .dp import Model, _as_generator
from .otd import LatentModel, MomentPair
from .pca import SiteDataset, preprocess, split_sites
from .tensors import outer3, symmetrize3, symmetrize_matrix

__all__ = [
    "make_covariance",
    "gen_pca_sites",
    "mog_model",
    "stm_model",
    "gen_mog",
    "gen_stm",
    "exact_moments",
    "save_samples_csv",
]

_SPECTRUM_DECAY = 0.9
_SPECTRUM_TAIL = 0.01
_MIN_ANGLE_DEG = 5.0


def make_covariance(dim: int, k: int, rng, decay: float = _SPECTRUM_DECAY, tail: float = _SPECTRUM_TAIL) -> np.ndarray:
    """Covariance with eigenvalues 1, decay, decay^2, ... then a flat tail.

    The eigenbasis is a random rotation, so the planted top-K subspace is
    nontrivial but clearly separated from the tail.
    """
    if not 1 <= k <= dim:
        raise ValueError(f"k must be in [1, {dim}], got {k}")
    gen = _as_generator(rng)
    spectrum = np.full(dim, tail)
    spectrum[:k] = decay ** np.arange(k)
    q, r = np.linalg.qr(gen.standard_normal((dim, dim)))
    q = q * np.sign(np.diag(r))
    return symmetrize_matrix(q @ np.diag(spectrum) @ q.T)


def gen_pca_sites(dim: int, k: int, n_sites: int, site_size: int, rng) -> list[SiteDataset]:
    """S * site_size zero-mean Gaussian samples, preprocessed and split evenly."""
    gen = _as_generator(rng)
    cov = make_covariance(dim, k, gen)
    chol = np.linalg.cholesky(cov + 1e-12 * np.eye(dim))
    raw = chol @ gen.standard_normal((dim, n_sites * site_size))
    return split_sites(preprocess(raw), n_sites)


def _well_spread(columns: np.ndarray) -> bool:
    norms = np.linalg.norm(columns, axis=0)
    unit = columns / norms
    gram = np.abs(unit.T @ unit)
    np.fill_diagonal(gram, 0.0)
    return gram.max(initial=0.0) <= np.cos(np.deg2rad(_MIN_ANGLE_DEG))


def _weights(k: int, gen: np.random.Generator) -> np.ndarray:
    # floor keeps every component visible so planted recovery is well posed
    w = gen.dirichlet(np.ones(k))
    w = np.maximum(w, 0.2 / k)
    return w / w.sum()


def mog_model(dim: int, k: int, rng, sigma_sq: float = 0.05) -> LatentModel:
    """Random mixture of spherical Gaussians with norm-bounded, well-spread means."""
    if not 1 <= k <= dim:
        raise ValueError(f"k must be in [1, {dim}], got {k}")
    gen = _as_generator(rng)
    while True:
        a = gen.standard_normal((dim, k))
        a /= np.linalg.norm(a, axis=0)
        a *= gen.uniform(0.7, 1.0, size=k)
        if k == 1 or _well_spread(a):
            break
    return LatentModel(
        kind=Model.MOG, weights=_weights(k, gen), components=a, sigma_sq=sigma_sq
    )


def stm_model(dim: int, k: int, rng, words_per_doc: int = 3) -> LatentModel:
    """Random single-topic model with Dirichlet(1) topic-word columns."""
    if not 1 <= k <= dim:
        raise ValueError(f"k must be in [1, {dim}], got {k}")
    gen = _as_generator(rng)
    while True:
        a = gen.dirichlet(np.ones(dim), size=k).T
        if k == 1 or _well_spread(a):
            break
    return LatentModel(
        kind=Model.STM,
        weights=_weights(k, gen),
        components=a,
        words_per_doc=words_per_doc,
    )


def gen_mog(model: LatentModel, n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Draw n mixture samples; returns (D x N matrix, component labels)."""
    if model.kind is not Model.MOG:
        raise ValueError("model must be a Gaussian mixture")
    gen = _as_generator(rng)
    labels = gen.choice(model.n_components, size=n, p=model.weights)
    samples = model.components[:, labels] + np.sqrt(model.sigma_sq) * gen.standard_normal(
        (model.dim, n)
    )
    return samples, labels


def gen_stm(model: LatentModel, n_docs: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Draw documents; returns ((N, 3) word-index triples, topic labels).

    Each document draws a topic, then ``words_per_doc`` i.i.d. words from the
    topic's word distribution; the first three words form the stored triple.
    """
    if model.kind is not Model.STM:
        raise ValueError("model must be a single topic model")
    gen = _as_generator(rng)
    topics = gen.choice(model.n_components, size=n_docs, p=model.weights)
    docs = np.empty((n_docs, 3), dtype=np.intp)
    for k in range(model.n_components):
        mask = topics == k
        count = int(mask.sum())
        if count == 0:
            continue
        words = gen.choice(
            model.dim, size=(count, model.words_per_doc), p=model.components[:, k]
        )
        docs[mask] = words[:, :3]
    return docs, topics


def exact_moments(model: LatentModel) -> MomentPair:
    """Population moments sum_k w_k a_k a_k^T and sum_k w_k a_k^{x3}."""
    w, a = model.weights, model.components
    m2 = symmetrize_matrix((a * w) @ a.T)
    m3 = np.zeros((model.dim,) * 3)
    for k in range(model.n_components):
        m3 += w[k] * outer3(a[:, k], a[:, k], a[:, k])
    return MomentPair(
        m2=m2,
        m3=symmetrize3(m3),
        n_samples=0,
        kind=model.kind,
        sigma_sq=model.sigma_sq,
    )


def save_samples_csv(samples: np.ndarray, path) -> None:
    """Persist a D x N sample matrix as CSV with samples as rows (replayable)."""
    np.savetxt(path, np.asarray(samples, dtype=float).T, delimiter=",", fmt="%.17g")

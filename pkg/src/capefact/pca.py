"""Distributed differentially private PCA with correlated noise, plus baselines.

The correlated-noise variant (``cape_pca``) aggregates per-site noisy
second-moment matrices so that the zero-sum shares cancel and only
pooled-level symmetric noise survives.  Baselines: the conventional scheme
(full local noise, no correlation), single-site DP-PCA, DP-PCA on pooled
data, and non-private pooled PCA.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dp import PrivacyLedger, PrivacySpec, RngStream, gaussian_std, sym_noise_matrix
from .protocol import AGGREGATOR, PUBLIC, ProtocolTranscript, cape_moment_round
from .tensors import symmetrize_matrix, top_k_eigs

__all__ = [
    "SiteDataset",
    "PcaResult",
    "preprocess",
    "split_sites",
    "second_moment",
    "pooled_second_moment",
    "cape_pca",
    "conv_pca",
    "local_pca",
    "pooled_dp_pca",
    "nonprivate_pca",
    "captured_energy",
    "principal_angle",
]

_NORM_SLACK = 1e-9


@dataclass(frozen=True)
class SiteDataset:
    """One site's samples as columns of a D x N_s matrix, norm-bounded."""

    data: np.ndarray
    site_id: int = 0

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        object.__setattr__(self, "data", data)
        if data.ndim != 2 or data.shape[1] == 0:
            raise ValueError(f"data must be a D x N matrix with N >= 1, got {data.shape}")
        norms = np.linalg.norm(data, axis=0)
        if norms.max() > 1.0 + _NORM_SLACK:
            raise ValueError(
                f"sample norms must be <= 1 (preprocess first); max is {norms.max():.6g}"
            )

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class PcaResult:
    """A recovered subspace with its method tag and captured energy."""

    subspace: np.ndarray
    eigenvalues: np.ndarray
    method: str
    captured_energy: float


def preprocess(raw: np.ndarray) -> np.ndarray:
    """Center columns and scale by the maximum column norm.

    After preprocessing the max sample norm is 1 (0 for the degenerate
    all-identical input), so the moment sensitivities apply.
    """
    x = np.asarray(raw, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-D sample matrix, got shape {x.shape}")
    x = x - x.mean(axis=1, keepdims=True)
    max_norm = np.linalg.norm(x, axis=0).max(initial=0.0)
    if max_norm > 0:
        x = x / max_norm
    return x


def split_sites(data: np.ndarray, n_sites: int) -> list[SiteDataset]:
    """Split preprocessed samples (columns) into S near-even disjoint sites."""
    data = np.asarray(data, dtype=float)
    if n_sites < 1 or data.shape[1] < n_sites:
        raise ValueError(
            f"cannot split {data.shape[1]} samples into {n_sites} sites"
        )
    blocks = np.array_split(data, n_sites, axis=1)
    return [SiteDataset(b, site_id=s) for s, b in enumerate(blocks)]


def _data_of(x) -> np.ndarray:
    return x.data if isinstance(x, SiteDataset) else np.asarray(x, dtype=float)


def second_moment(x) -> np.ndarray:
    """Sample second-moment matrix (1/N) X X^T, exactly symmetric."""
    data = _data_of(x)
    if data.ndim != 2 or data.shape[1] == 0:
        raise ValueError("need a D x N matrix with at least one sample")
    return symmetrize_matrix(data @ data.T / data.shape[1])


def pooled_second_moment(sites: list[SiteDataset]) -> np.ndarray:
    """Second moment of the union of all sites' samples."""
    total = sum(s.n_samples for s in sites)
    acc = np.zeros((sites[0].dim, sites[0].dim))
    for s in sites:
        acc += (s.n_samples / total) * second_moment(s)
    return symmetrize_matrix(acc)


def _site_taus(sites: list[SiteDataset], privacy: PrivacySpec | None, noiseless: bool) -> np.ndarray:
    if noiseless:
        return np.zeros(len(sites))
    if privacy is None:
        raise ValueError("a PrivacySpec is required unless noiseless=True")
    # second-moment sensitivity of norm-bounded samples is 1/N_s
    return np.array([gaussian_std(1.0 / s.n_samples, privacy) for s in sites])


def _finish(a_hat: np.ndarray, k: int, method: str, a_ref: np.ndarray) -> PcaResult:
    vals, vecs = top_k_eigs(a_hat, k)
    return PcaResult(
        subspace=vecs,
        eigenvalues=vals,
        method=method,
        captured_energy=captured_energy(vecs, a_ref),
    )


def cape_pca(
    sites: list[SiteDataset],
    privacy: PrivacySpec | None,
    k: int,
    rng: RngStream,
    *,
    noiseless: bool = False,
    trusted_sites: bool = False,
    ledger: PrivacyLedger | None = None,
) -> tuple[PcaResult, ProtocolTranscript]:
    """Correlated-noise distributed DP-PCA.

    Each site releases A_s + E_s + F_s + G_s, where the E_s are i.i.d.
    entrywise and zero-sum across sites, the F_s are i.i.d. draws the
    aggregator later subtracts, and G_s is the site's own symmetric noise.
    The aggregate (1/S) sum_s (release_s - F_s) equals
    (1/S) sum_s (A_s + G_s): its noise level matches DP-PCA on pooled data.
    Per-site noise is calibrated to each site's own sample count; aggregation
    weights stay uniform.

    Captured energy is reported against the non-private pooled second moment.
    """
    _check_sites(sites, k)
    tau = _site_taus(sites, privacy, noiseless)
    a_ref = pooled_second_moment(sites)
    transcript = ProtocolTranscript()
    a_hat = cape_moment_round(
        [second_moment(s) for s in sites],
        tau,
        rng,
        local_noise=sym_noise_matrix,
        transcript=transcript,
        round_id=0,
        trusted_sites=trusted_sites,
        kind="m2",
    )
    result = _finish(symmetrize_matrix(a_hat), k, "cape", a_ref)
    transcript.record(0, AGGREGATOR, PUBLIC, "subspace", result.subspace)
    if ledger is not None and not noiseless:
        ledger.spend("second-moment release", privacy.epsilon, privacy.delta)
    return result, transcript


def conv_pca(
    sites: list[SiteDataset],
    privacy: PrivacySpec | None,
    k: int,
    rng: RngStream,
    *,
    noiseless: bool = False,
) -> PcaResult:
    """Conventional distributed DP-PCA: full local noise, no correlation.

    The aggregate noise variance is S times the correlated scheme's.
    """
    _check_sites(sites, k)
    tau = _site_taus(sites, privacy, noiseless)
    gens = (
        [rng.child(f"site_{i}").generator() for i in range(len(sites))]
        if isinstance(rng, RngStream)
        else [rng] * len(sites)
    )
    a_ref = pooled_second_moment(sites)
    acc = np.zeros((sites[0].dim, sites[0].dim))
    for i, s in enumerate(sites):
        acc += second_moment(s) + sym_noise_matrix(s.dim, tau[i], gens[i])
    return _finish(acc / len(sites), k, "conv", a_ref)


def local_pca(
    site: SiteDataset,
    privacy: PrivacySpec | None,
    k: int,
    rng,
    *,
    noiseless: bool = False,
    a_ref: np.ndarray | None = None,
) -> PcaResult:
    """DP-PCA on a single site's data (noise at the local level tau_s)."""
    tau = 0.0 if noiseless else gaussian_std(1.0 / site.n_samples, privacy)
    a_hat = second_moment(site) + sym_noise_matrix(site.dim, tau, rng)
    ref = second_moment(site) if a_ref is None else a_ref
    return _finish(a_hat, k, "local", ref)


def pooled_dp_pca(
    sites: list[SiteDataset],
    privacy: PrivacySpec | None,
    k: int,
    rng,
    *,
    noiseless: bool = False,
) -> PcaResult:
    """DP-PCA with all data at one trusted curator (sensitivity 1/N)."""
    _check_sites(sites, k)
    total = sum(s.n_samples for s in sites)
    tau = 0.0 if noiseless else gaussian_std(1.0 / total, privacy)
    a_ref = pooled_second_moment(sites)
    a_hat = a_ref + sym_noise_matrix(sites[0].dim, tau, rng)
    return _finish(a_hat, k, "pooled-dp", a_ref)


def nonprivate_pca(sites: list[SiteDataset] | np.ndarray, k: int) -> PcaResult:
    """Plain PCA on the pooled second moment."""
    if isinstance(sites, list):
        a = pooled_second_moment(sites)
    else:
        a = second_moment(sites)
    if not 1 <= k <= a.shape[0]:
        raise ValueError(f"k must be in [1, {a.shape[0]}], got {k}")
    return _finish(a, k, "non-private", a)


def captured_energy(v: np.ndarray, a_ref: np.ndarray) -> float:
    """Energy of a_ref captured by the subspace: trace(V^T A V).

    Maximized by the top-K eigenvectors of a_ref, where it equals the sum of
    the top-K eigenvalues.  Warns (but still computes) if the columns are not
    orthonormal.
    """
    v = np.asarray(v, dtype=float)
    gram_err = np.linalg.norm(v.T @ v - np.eye(v.shape[1]))
    if gram_err > 1e-6:
        warnings.warn(
            f"captured_energy: columns deviate from orthonormal by {gram_err:.3g}",
            stacklevel=2,
        )
    return float(np.trace(v.T @ np.asarray(a_ref, dtype=float) @ v))


def principal_angle(v1: np.ndarray, v2: np.ndarray) -> float:
    """Largest principal angle between two orthonormal column spans, in [0, pi/2].

    Computed from sin(theta) = largest singular value of (I - V2 V2^T) V1,
    which stays accurate for tiny angles where the cosine formulation
    saturates.
    """
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    if v1.shape != v2.shape:
        raise ValueError(f"shape mismatch: {v1.shape} vs {v2.shape}")
    residual = v1 - v2 @ (v2.T @ v1)
    sigma = np.linalg.svd(residual, compute_uv=False)
    return float(np.arcsin(np.clip(sigma.max(), 0.0, 1.0)))


def _check_sites(sites: list[SiteDataset], k: int) -> None:
    if not sites:
        raise ValueError("need at least one site")
    dim = sites[0].dim
    if any(s.dim != dim for s in sites):
        raise ValueError("all sites must share one feature dimension")
    if not 1 <= k <= dim:
        raise ValueError(f"k must be in [1, {dim}], got {k}")

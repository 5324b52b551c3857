"""Orthogonal tensor decomposition of latent-variable moments, private and not.

Pipeline: estimate the second/third moments (single topic model or mixture
of spherical Gaussians), whiten with W = U D^{-1/2} from the second moment,
project the third moment to a K x K x K orthogonally decomposable tensor,
extract eigenpairs with the tensor power method plus deflation, and undo the
whitening to recover mixing weights and component vectors.

Private variants add calibrated noise to the moments before whitening: i.i.d.
Gaussian on the matrix, symmetric-from-unique-entries Gaussian or heavy-tailed
vector noise on the tensor.  The distributed variant runs two correlated-noise
rounds (matrix, then projected tensor) so the aggregate carries only
pooled-level noise while round-2 uploads are K^3 instead of D^3.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dp import (
    Model,
    PrivacyLedger,
    PrivacySpec,
    RngStream,
    _as_generator,
    avn_noise_tensor3,
    gaussian_std,
    sensitivity_m2,
    sensitivity_m3,
    sym_noise_matrix,
    sym_noise_tensor3,
)
from .protocol import (
    AGGREGATOR,
    PUBLIC,
    ProtocolTranscript,
    cape_moment_round,
    cape_plan,
    site_role,
    zero_sum_gaussian,
)
from .tensors import (
    apply_Iuu,
    multilinear3,
    outer3,
    symmetrize3,
    symmetrize_matrix,
    tensor_norm,
    top_k_eigs,
)

__all__ = [
    "RankDeficiencyError",
    "DecompositionError",
    "LatentModel",
    "MomentPair",
    "TensorEigenpairs",
    "OtdResult",
    "stm_moments",
    "mog_moments",
    "pool_moments",
    "whiten",
    "whiten_maps",
    "tensor_power_decompose",
    "recover_components",
    "decompose_projected",
    "nonprivate_otd",
    "agn",
    "avn",
    "conv_otd",
    "cape_agn",
    "q_comp",
    "stm_postprocess",
]


class DecompositionError(RuntimeError):
    """The decomposition pipeline cannot produce a valid result."""


class RankDeficiencyError(DecompositionError):
    """Fewer usable eigenvalues than requested components during whitening."""


@dataclass(frozen=True)
class LatentModel:
    """Ground-truth parameters of a planted latent variable model."""

    kind: Model
    weights: np.ndarray
    components: np.ndarray  # D x K, one column per component
    sigma_sq: float = 0.0  # spherical noise variance (MOG only)
    words_per_doc: int = 3  # document length (STM only)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        a = np.asarray(self.components, dtype=float)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "components", a)
        object.__setattr__(self, "kind", Model(self.kind))
        if w.ndim != 1 or a.ndim != 2 or a.shape[1] != w.size:
            raise ValueError("need weights (K,) and components (D, K)")
        if (w <= 0).any() or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be positive and sum to 1")
        if self.kind is Model.STM:
            if (a < -1e-12).any() or np.abs(a.sum(axis=0) - 1.0).max() > 1e-9:
                raise ValueError("topic columns must be probability vectors")
            if self.words_per_doc < 3:
                raise ValueError("documents must have at least 3 words")
        else:
            if np.linalg.norm(a, axis=0).max() > 1.0 + 1e-9:
                raise ValueError("component norms must be <= 1")
            if self.sigma_sq < 0:
                raise ValueError("sigma_sq must be nonnegative")

    @property
    def dim(self) -> int:
        return self.components.shape[0]

    @property
    def n_components(self) -> int:
        return self.components.shape[1]


@dataclass(frozen=True)
class MomentPair:
    """A second-moment matrix and third-moment tensor from one source."""

    m2: np.ndarray
    m3: np.ndarray
    n_samples: int
    kind: Model
    sigma_sq: float = 0.0  # carried along for MOG sensitivity calibration

    @property
    def dim(self) -> int:
        return self.m2.shape[0]


@dataclass(frozen=True)
class TensorEigenpairs:
    """Output of the tensor power method with deflation."""

    eigenvalues: np.ndarray
    vectors: np.ndarray  # columns are the extracted (near-)orthonormal vectors
    converged: bool
    residual_norm: float


@dataclass(frozen=True)
class OtdResult:
    """Recovered decomposition: weights, components, and diagnostics."""

    eigenvalues: np.ndarray
    whitened_vectors: np.ndarray
    weights: np.ndarray
    components: np.ndarray
    converged: bool
    q_comp: float | None = None


def stm_moments(docs, vocab_size: int) -> MomentPair:
    """Empirical moments of word-triple documents under one-hot encoding.

    ``docs`` is an (N, 3) array of word indices (the first three words of
    each document).  The second moment averages t1 t2^T and the third moment
    averages t1 x t2 x t3; both are symmetrized before storage, which is
    variance-reducing and consistent since documents are exchangeable.
    """
    docs = np.asarray(docs, dtype=np.intp)
    if docs.ndim != 2 or docs.shape[1] < 3 or docs.shape[0] == 0:
        raise ValueError("need a non-empty (N, >=3) array of word indices")
    docs = docs[:, :3]
    if docs.min() < 0 or docs.max() >= vocab_size:
        raise ValueError(
            f"word indices must lie in [0, {vocab_size}), got "
            f"[{docs.min()}, {docs.max()}]"
        )
    n = docs.shape[0]
    m2 = np.zeros((vocab_size, vocab_size))
    np.add.at(m2, (docs[:, 0], docs[:, 1]), 1.0 / n)
    m3 = np.zeros((vocab_size,) * 3)
    np.add.at(m3, (docs[:, 0], docs[:, 1], docs[:, 2]), 1.0 / n)
    return MomentPair(
        m2=symmetrize_matrix(m2),
        m3=symmetrize3(m3),
        n_samples=n,
        kind=Model.STM,
    )


def mog_moments(samples: np.ndarray, sigma_sq: float) -> MomentPair:
    """Empirical moments of spherical-Gaussian-mixture samples (columns).

    The second moment subtracts the spherical covariance sigma_sq * I; the
    third moment subtracts the matching correction built from the empirical
    mean, after which both are decomposable over the component vectors.
    """
    t = np.asarray(samples, dtype=float)
    if t.ndim != 2 or t.shape[1] == 0:
        raise ValueError("need a D x N sample matrix with N >= 1")
    if sigma_sq < 0:
        raise ValueError(f"sigma_sq must be nonnegative, got {sigma_sq}")
    d, n = t.shape
    m2 = t @ t.T / n - sigma_sq * np.eye(d)
    m3 = np.einsum("in,jn,kn->ijk", t, t, t, optimize=True) / n
    mean = t.mean(axis=1)
    correction = np.zeros((d, d, d))
    rng_d = np.arange(d)
    correction[:, rng_d, rng_d] += mean[:, None]  # mean x e_d x e_d
    correction[rng_d, :, rng_d] += mean[None, :]  # e_d x mean x e_d
    correction[rng_d, rng_d, :] += mean[None, :]  # e_d x e_d x mean
    m3 = m3 - sigma_sq * correction
    return MomentPair(
        m2=symmetrize_matrix(m2),
        m3=symmetrize3(m3),
        n_samples=n,
        kind=Model.MOG,
        sigma_sq=sigma_sq,
    )


def pool_moments(moments: list[MomentPair]) -> MomentPair:
    """Sample-size-weighted average of per-site moments (the pooled estimate)."""
    if not moments:
        raise ValueError("need at least one moment pair")
    total = sum(m.n_samples for m in moments)
    m2 = sum((m.n_samples / total) * m.m2 for m in moments)
    m3 = sum((m.n_samples / total) * m.m3 for m in moments)
    return MomentPair(
        m2=symmetrize_matrix(m2),
        m3=symmetrize3(m3),
        n_samples=total,
        kind=moments[0].kind,
        sigma_sq=moments[0].sigma_sq,
    )


_EIG_FLOOR = 1e-12


def whiten_maps(m2: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Whitening map W = U D^{-1/2} and its inverse map B = U D^{1/2}.

    W makes the latent components orthonormal (W^T M2 W = I_K when M2 is PSD
    of rank >= K); B undoes the projection when recovering components.

    Raises:
        RankDeficiencyError: if fewer than k eigenvalues exceed the relative
            floor.  Negative eigenvalues among the top k (possible after
            noise) fail rather than being silently clamped, since D^{-1/2}
            is undefined there.
    """
    m2 = np.asarray(m2, dtype=float)
    d = m2.shape[0]
    if not 1 <= k <= d:
        raise ValueError(f"k must be in [1, {d}], got {k}")
    vals, vecs = top_k_eigs(m2, k)
    floor = _EIG_FLOOR * max(vals[0], 0.0)
    if vals[0] <= 0.0 or (vals <= floor).any():
        raise RankDeficiencyError(
            f"need {k} eigenvalues above {floor:.3g}; smallest of top-{k} is "
            f"{vals[-1]:.3g}"
        )
    root = np.sqrt(vals)
    return vecs / root, vecs * root


def whiten(m2: np.ndarray, k: int) -> np.ndarray:
    """Whitening map only; see :func:`whiten_maps`."""
    return whiten_maps(m2, k)[0]


def tensor_power_decompose(
    t: np.ndarray,
    k: int,
    rng,
    *,
    restarts: int = 20,
    max_iter: int = 100,
    tol: float = 1e-10,
) -> TensorEigenpairs:
    """Extract k eigenpairs of a (near-)orthogonally decomposable tensor.

    Repeats the fixed-point iteration u -> T(I,u,u) / ||T(I,u,u)|| from
    ``restarts`` random unit starts, keeps the restart with the largest
    eigenvalue T(u,u,u), deflates T - lambda u^{x3}, and repeats k times.
    Eigenvalues come back sorted descending; the extracted vectors are
    orthonormal to iteration tolerance when the input is decomposable.

    Non-convergence (no restart reaching ``tol`` within ``max_iter``) is
    reported through the ``converged`` flag; the best iterate is returned.
    """
    t = np.asarray(t, dtype=float).copy()
    d = t.shape[0]
    if t.shape != (d, d, d):
        raise ValueError(f"expected a cubic tensor, got shape {t.shape}")
    if not 1 <= k <= d:
        raise ValueError(f"k must be in [1, {d}], got {k}")
    gen = _as_generator(rng)
    lams = np.zeros(k)
    vecs = np.zeros((d, k))
    all_converged = True
    for comp in range(k):
        best_lam = -np.inf
        best_u = None
        best_conv = False
        for _ in range(restarts):
            u = gen.standard_normal(d)
            u /= np.linalg.norm(u)
            conv = False
            for _ in range(max_iter):
                image = apply_Iuu(t, u)
                norm = np.linalg.norm(image)
                if norm == 0.0:
                    break
                nxt = image / norm
                if np.linalg.norm(nxt - u) < tol:
                    u = nxt
                    conv = True
                    break
                u = nxt
            lam = float(u @ apply_Iuu(t, u))
            if lam > best_lam:
                best_lam, best_u, best_conv = lam, u, conv
        lams[comp] = best_lam
        vecs[:, comp] = best_u
        all_converged = all_converged and best_conv
        t -= best_lam * outer3(best_u, best_u, best_u)
    order = np.argsort(-lams, kind="stable")
    return TensorEigenpairs(
        eigenvalues=lams[order],
        vectors=vecs[:, order],
        converged=all_converged,
        residual_norm=tensor_norm(t),
    )


def recover_components(
    eigenvalues: np.ndarray,
    vectors: np.ndarray,
    w_map: np.ndarray,
    m2: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Undo the whitening: weights 1/lambda_k^2, components lambda_k * B v_k.

    The inverse map B is U D^{1/2} from the eigendecomposition behind
    ``w_map``; it is rebuilt from ``m2`` when given, otherwise taken as the
    pseudo-inverse of W^T (identical in exact arithmetic).
    """
    lams = np.asarray(eigenvalues, dtype=float)
    if (lams <= 0).any():
        raise DecompositionError(
            f"non-positive tensor eigenvalue {lams.min():.3g}: weights 1/lambda^2 undefined"
        )
    if m2 is not None:
        _, b = whiten_maps(m2, w_map.shape[1])
    else:
        b = np.linalg.pinv(w_map.T)
    weights = 1.0 / lams**2
    components = b @ np.asarray(vectors, dtype=float) * lams
    return weights, components


def decompose_projected(
    t_proj: np.ndarray,
    w_map: np.ndarray,
    rng,
    *,
    restarts: int = 20,
    max_iter: int = 100,
    tol: float = 1e-10,
) -> OtdResult:
    """Power-method decomposition of a whitened tensor plus component recovery."""
    k = w_map.shape[1]
    pairs = tensor_power_decompose(
        t_proj, k, rng, restarts=restarts, max_iter=max_iter, tol=tol
    )
    weights, components = recover_components(
        pairs.eigenvalues, pairs.vectors, w_map
    )
    return OtdResult(
        eigenvalues=pairs.eigenvalues,
        whitened_vectors=pairs.vectors,
        weights=weights,
        components=components,
        converged=pairs.converged,
    )


def nonprivate_otd(moments: MomentPair, k: int, rng, **power_kwargs) -> OtdResult:
    """Whiten, project, and decompose exact or empirical moments, no noise."""
    w = whiten(moments.m2, k)
    t_proj = multilinear3(moments.m3, w, w, w)
    return decompose_projected(t_proj, w, rng, **power_kwargs)


def _stage_taus(
    moments: MomentPair, spec1: PrivacySpec | None, spec2: PrivacySpec | None, noiseless: bool
) -> tuple[float, float]:
    if noiseless:
        return 0.0, 0.0
    if spec1 is None or spec2 is None:
        raise ValueError("privacy specs are required unless noiseless=True")
    d2 = sensitivity_m2(moments.kind, moments.n_samples)
    d3 = sensitivity_m3(
        moments.kind, moments.n_samples, moments.dim, moments.sigma_sq
    )
    return gaussian_std(d2, spec1), gaussian_std(d3, spec2)


def agn(
    moments: MomentPair,
    spec1: PrivacySpec | None,
    spec2: PrivacySpec | None,
    k: int,
    rng,
    *,
    noiseless: bool = False,
    ledger: PrivacyLedger | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Centralized private OTD with Gaussian noise on both moments.

    Adds a symmetric Gaussian matrix at the stage-1 scale to the second
    moment, whitens, adds a symmetric Gaussian tensor (unique entries i.i.d.)
    at the stage-2 scale to the third moment, and projects.  Returns the
    orthogonally decomposable K^3 tensor and the whitening map.
    """
    tau1, tau2 = _stage_taus(moments, spec1, spec2, noiseless)
    gen = _as_generator(rng)
    m2_hat = moments.m2 + sym_noise_matrix(moments.dim, tau1, gen)
    w = whiten(m2_hat, k)
    m3_hat = moments.m3 + sym_noise_tensor3(moments.dim, tau2, gen)
    if ledger is not None and not noiseless:
        ledger.spend("second-moment release", spec1.epsilon, spec1.delta)
        ledger.spend("third-moment release", spec2.epsilon, spec2.delta)
    return multilinear3(m3_hat, w, w, w), w


def avn(
    moments: MomentPair,
    spec1: PrivacySpec | None,
    spec2: PrivacySpec | None,
    k: int,
    rng,
    *,
    noiseless: bool = False,
    ledger: PrivacyLedger | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Centralized private OTD with heavy-tailed vector noise on the tensor.

    The matrix stage reuses the Gaussian mechanism but calibrates against the
    combined failure probability delta_1 + delta_2; the tensor noise has
    density proportional to exp(-beta ||b||) with beta = epsilon_2 / Delta_3,
    making that stage a pure epsilon_2 release.
    """
    gen = _as_generator(rng)
    if noiseless:
        tau1, beta = 0.0, None
    else:
        if spec1 is None or spec2 is None:
            raise ValueError("privacy specs are required unless noiseless=True")
        combined = PrivacySpec(spec1.epsilon, min(spec1.delta + spec2.delta, 1 - 1e-12))
        tau1 = gaussian_std(sensitivity_m2(moments.kind, moments.n_samples), combined)
        d3 = sensitivity_m3(
            moments.kind, moments.n_samples, moments.dim, moments.sigma_sq
        )
        beta = spec2.epsilon / d3.value
    m2_hat = moments.m2 + sym_noise_matrix(moments.dim, tau1, gen)
    w = whiten(m2_hat, k)
    m3_hat = moments.m3
    if beta is not None:
        m3_hat = m3_hat + avn_noise_tensor3(moments.dim, beta, gen)
    if ledger is not None and not noiseless:
        ledger.spend("second-moment release", spec1.epsilon, spec1.delta + spec2.delta)
        ledger.spend("third-moment release", spec2.epsilon, 0.0)
    return multilinear3(m3_hat, w, w, w), w


def conv_otd(
    site_moments: list[MomentPair],
    spec1: PrivacySpec | None,
    spec2: PrivacySpec | None,
    k: int,
    rng: RngStream,
    *,
    noiseless: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Conventional distributed private OTD: full local noise, no correlation."""
    _check_site_moments(site_moments)
    s = len(site_moments)
    gens = (
        [rng.child(site_role(i)).generator() for i in range(s)]
        if isinstance(rng, RngStream)
        else [rng] * s
    )
    dim = site_moments[0].dim
    m2_acc = np.zeros((dim, dim))
    m3_acc = np.zeros((dim, dim, dim))
    for i, m in enumerate(site_moments):
        tau1, tau2 = _stage_taus(m, spec1, spec2, noiseless)
        m2_acc += m.m2 + sym_noise_matrix(dim, tau1, gens[i])
        m3_acc += m.m3 + sym_noise_tensor3(dim, tau2, gens[i])
    w = whiten(symmetrize_matrix(m2_acc / s), k)
    return multilinear3(m3_acc / s, w, w, w), w


def cape_agn(
    site_moments: list[MomentPair],
    spec1: PrivacySpec | None,
    spec2: PrivacySpec | None,
    k: int,
    rng: RngStream,
    *,
    noiseless: bool = False,
    trusted_sites: bool = False,
    ledger: PrivacyLedger | None = None,
) -> tuple[np.ndarray, np.ndarray, ProtocolTranscript]:
    """Distributed private OTD with correlated noise, in two rounds.

    Round 1 aggregates noisy second moments exactly like the PCA protocol and
    broadcasts the whitening map W.  In round 2 each site perturbs its third
    moment (zero-sum e-tensor, aggregator f-tensor, own symmetric g-tensor),
    projects by (W, W, W), and uploads only the K^3 result; the aggregator
    subtracts its own projected f-tensors and averages.  By linearity of the
    projection and the zero-sum property, the final tensor equals the pooled
    moments-plus-g expression projected by W, with pooled-level noise.

    Returns (orthogonally decomposable tensor, whitening map, transcript).
    """
    _check_site_moments(site_moments)
    s = len(site_moments)
    dim = site_moments[0].dim
    if noiseless:
        tau2 = np.zeros(s)
        tau3 = np.zeros(s)
    else:
        if spec1 is None or spec2 is None:
            raise ValueError("privacy specs are required unless noiseless=True")
        tau2 = np.array(
            [gaussian_std(sensitivity_m2(m.kind, m.n_samples), spec1) for m in site_moments]
        )
        tau3 = np.array(
            [
                gaussian_std(
                    sensitivity_m3(m.kind, m.n_samples, m.dim, m.sigma_sq), spec2
                )
                for m in site_moments
            ]
        )
    transcript = ProtocolTranscript()
    rng_r1 = rng.child("round1") if isinstance(rng, RngStream) else rng
    m2_hat = cape_moment_round(
        [m.m2 for m in site_moments],
        tau2,
        rng_r1,
        local_noise=sym_noise_matrix,
        transcript=transcript,
        round_id=1,
        trusted_sites=trusted_sites,
        kind="m2",
    )
    w = whiten(symmetrize_matrix(m2_hat), k)
    for i in range(s):
        transcript.record(1, AGGREGATOR, site_role(i), "w-broadcast", w)

    rng_r2 = rng.child("round2") if isinstance(rng, RngStream) else rng
    if isinstance(rng_r2, RngStream):
        gen_ng = rng_r2.child("noise_generator").generator()
        gen_ag = rng_r2.child("aggregator").generator()
        gen_sites = [rng_r2.child(site_role(i)).generator() for i in range(s)]
    else:
        gen_ng = gen_ag = rng_r2
        gen_sites = [rng_r2] * s
    plan3 = cape_plan(tau3, s)
    e3 = zero_sum_gaussian(plan3.tau_e_sq, gen_ng, (dim, dim, dim))
    if trusted_sites:
        f3 = np.zeros((s, dim, dim, dim))
    else:
        f3 = gen_ag.normal(0.0, 1.0, size=(s, dim, dim, dim)) * np.sqrt(
            plan3.tau_f_sq
        ).reshape(s, 1, 1, 1)
    uploads = []
    for i, m in enumerate(site_moments):
        g3 = sym_noise_tensor3(dim, float(np.sqrt(plan3.tau_g_sq[i])), gen_sites[i])
        m3_hat = m.m3 + e3[i] + f3[i] + g3
        t_proj = multilinear3(m3_hat, w, w, w)
        uploads.append(t_proj)
        transcript.record(2, "noise_generator", site_role(i), "m3-e-share", e3[i])
        transcript.record(2, AGGREGATOR, site_role(i), "m3-f-share", f3[i])
        transcript.record(2, site_role(i), site_role(i), "m3-g-noise", g3)
        transcript.record(2, site_role(i), AGGREGATOR, "m3-projected", t_proj)
    t_agg = np.zeros((k, k, k))
    for i in range(s):
        t_agg += uploads[i] - multilinear3(f3[i], w, w, w)
    t_agg /= s
    transcript.record(2, AGGREGATOR, PUBLIC, "decomposable-tensor", t_agg)
    if ledger is not None and not noiseless:
        ledger.spend("whitening-map release", spec1.epsilon, spec1.delta)
        ledger.spend("projected-tensor release", spec2.epsilon, spec2.delta)
    return t_agg, w, transcript


def q_comp(a_hat: np.ndarray, a_true: np.ndarray) -> float:
    """Mean nearest-true-column distance of the recovered component vectors."""
    a_hat = np.asarray(a_hat, dtype=float)
    a_true = np.asarray(a_true, dtype=float)
    if a_hat.shape != a_true.shape:
        raise ValueError(f"shape mismatch: {a_hat.shape} vs {a_true.shape}")
    diffs = a_hat[:, :, None] - a_true[:, None, :]
    dists = np.linalg.norm(diffs, axis=0)
    return float(dists.min(axis=1).mean())


def stm_postprocess(a_hat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Zero out negative entries and renormalize columns to sum 1.

    Recovered topics need not be valid probability vectors; this projects
    them back.  Columns that clamp to all zeros stay zero and are flagged in
    the boolean mask returned alongside.
    """
    a = np.maximum(np.asarray(a_hat, dtype=float), 0.0)
    sums = a.sum(axis=0)
    degenerate = sums == 0.0
    safe = np.where(degenerate, 1.0, sums)
    return a / safe, degenerate


def _check_site_moments(site_moments: list[MomentPair]) -> None:
    if not site_moments:
        raise ValueError("need at least one site")
    dim = site_moments[0].dim
    if any(m.dim != dim for m in site_moments):
        raise ValueError("all sites must share one dimension")

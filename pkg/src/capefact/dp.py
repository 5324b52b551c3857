"""Differential privacy primitives.

Gaussian-mechanism calibration, L2 sensitivities of the second- and
third-order moments for the single-topic and mixture-of-Gaussians models,
seeded noise generators for symmetric matrices/tensors, and the heavy-tailed
vector-noise sampler used by the pure-epsilon tensor release.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .tensors import d_sym, sym_tensor_from_unique

__all__ = [
    "Model",
    "PrivacySpec",
    "Sensitivity",
    "RngStream",
    "PrivacyLedger",
    "gaussian_std",
    "sensitivity_m2",
    "sensitivity_m3",
    "sym_noise_matrix",
    "iid_noise_matrix",
    "iid_noise_tensor3",
    "sym_noise_tensor3",
    "avn_noise_vector",
    "avn_noise_tensor3",
]


class Model(str, Enum):
    """Latent variable model family the moments come from."""

    STM = "stm"
    MOG = "mog"


@dataclass(frozen=True)
class PrivacySpec:
    """An (epsilon, delta) differential privacy requirement."""

    epsilon: float
    delta: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")

    def split(self, fraction: float = 0.5) -> tuple["PrivacySpec", "PrivacySpec"]:
        """Split the budget into two stages; default is equal halves."""
        if not 0 < fraction < 1:
            raise ValueError(f"fraction must be in (0, 1), got {fraction}")
        first = PrivacySpec(self.epsilon * fraction, self.delta * fraction)
        second = PrivacySpec(
            self.epsilon - first.epsilon, self.delta - first.delta
        )
        return first, second


@dataclass(frozen=True)
class Sensitivity:
    """L2 sensitivity of a moment statistic under one-sample replacement."""

    value: float
    model: Model
    order: int

    def __post_init__(self):
        if self.value < 0:
            raise ValueError(f"sensitivity must be nonnegative, got {self.value}")
        if self.order not in (2, 3):
            raise ValueError(f"order must be 2 or 3, got {self.order}")


def gaussian_std(sensitivity, spec: PrivacySpec) -> float:
    """Gaussian-mechanism noise standard deviation for a given sensitivity.

    Returns (sensitivity / epsilon) * sqrt(2 ln(1.25 / delta)); the log is the
    natural logarithm, following the standard analysis of the mechanism.
    """
    value = sensitivity.value if isinstance(sensitivity, Sensitivity) else float(sensitivity)
    if value < 0:
        raise ValueError(f"sensitivity must be nonnegative, got {value}")
    return (value / spec.epsilon) * math.sqrt(2.0 * math.log(1.25 / spec.delta))


def sensitivity_m2(model: Model, n: int) -> Sensitivity:
    """Sensitivity of the second-moment estimate from n samples.

    sqrt(2)/n for the single topic model, 1/n for the Gaussian mixture.
    """
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    model = Model(model)
    value = math.sqrt(2.0) / n if model is Model.STM else 1.0 / n
    return Sensitivity(value, model, order=2)


def sensitivity_m3(
    model: Model, n: int, dim: int | None = None, sigma_sq: float | None = None
) -> Sensitivity:
    """Sensitivity of the third-moment estimate from n samples.

    sqrt(2)/n for the single topic model.  For the Gaussian mixture the
    spherical-noise correction contributes as well: 2/n + 6*dim*sigma_sq/n.
    """
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    model = Model(model)
    if model is Model.STM:
        return Sensitivity(math.sqrt(2.0) / n, model, order=3)
    if dim is None or sigma_sq is None:
        raise ValueError("MOG third-moment sensitivity needs dim and sigma_sq")
    if dim < 1 or sigma_sq < 0:
        raise ValueError(f"need dim >= 1 and sigma_sq >= 0, got {dim}, {sigma_sq}")
    return Sensitivity((2.0 + 6.0 * dim * sigma_sq) / n, model, order=3)


_MAX_SEED = 2**63


@dataclass(frozen=True)
class RngStream:
    """A reproducible, labeled random stream.

    The same (seed, stream_id) pair always yields an identical generator, so
    protocol roles and rounds get independent streams that can be replayed in
    tests.  Labels hash through SHA-256, which keeps the derivation stable
    across platforms and Python processes (unlike the built-in ``hash``).
    """

    seed: int
    stream_id: str = "root"

    def __post_init__(self):
        if not 0 <= self.seed < _MAX_SEED:
            raise ValueError(f"seed must be in [0, 2^63), got {self.seed}")

    def child(self, label: str) -> "RngStream":
        return RngStream(self.seed, f"{self.stream_id}/{label}")

    def _entropy_words(self) -> list[int]:
        digest = hashlib.sha256(self.stream_id.encode("utf-8")).digest()
        return [int.from_bytes(digest[i : i + 4], "big") for i in range(0, 16, 4)]

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        seq = np.random.SeedSequence([self.seed, *self._entropy_words()])
        return np.random.default_rng(seq)

    @property
    def derived_seed(self) -> int:
        """A stable 63-bit integer identifying this stream (for reporting)."""
        digest = hashlib.sha256(
            f"{self.seed}/{self.stream_id}".encode("utf-8")
        ).digest()
        return int.from_bytes(digest[:8], "big") % _MAX_SEED


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng)!r}")


@dataclass
class PrivacyLedger:
    """Running account of (epsilon, delta) spent across algorithm stages."""

    entries: list[tuple[str, float, float]] = field(default_factory=list)

    def spend(self, label: str, epsilon: float, delta: float) -> None:
        self.entries.append((label, float(epsilon), float(delta)))

    def total(self) -> tuple[float, float]:
        return (
            sum(e for _, e, _ in self.entries),
            sum(d for _, _, d in self.entries),
        )


def sym_noise_matrix(dim: int, tau: float, rng) -> np.ndarray:
    """Symmetric Gaussian noise matrix.

    Upper triangle and diagonal drawn i.i.d. N(0, tau^2), lower triangle
    mirrored, so the result is exactly symmetric.
    """
    if tau < 0:
        raise ValueError(f"tau must be nonnegative, got {tau}")
    gen = _as_generator(rng)
    iu = np.triu_indices(dim)
    a = np.zeros((dim, dim))
    a[iu] = gen.normal(0.0, tau, size=len(iu[0]))
    a += np.triu(a, 1).T
    return a


def iid_noise_matrix(dim: int, tau: float, rng) -> np.ndarray:
    """Full matrix of i.i.d. N(0, tau^2) entries (no symmetrization)."""
    if tau < 0:
        raise ValueError(f"tau must be nonnegative, got {tau}")
    return _as_generator(rng).normal(0.0, tau, size=(dim, dim))


def iid_noise_tensor3(dim: int, tau: float, rng) -> np.ndarray:
    """Cubic tensor of i.i.d. N(0, tau^2) entries (no symmetrization)."""
    if tau < 0:
        raise ValueError(f"tau must be nonnegative, got {tau}")
    return _as_generator(rng).normal(0.0, tau, size=(dim, dim, dim))


def sym_noise_tensor3(dim: int, tau: float, rng) -> np.ndarray:
    """Symmetric Gaussian noise tensor from d_sym(dim) unique draws.

    Every entry has variance tau^2 regardless of its index multiplicity,
    because tied positions share a single draw.
    """
    if tau < 0:
        raise ValueError(f"tau must be nonnegative, got {tau}")
    b = _as_generator(rng).normal(0.0, tau, size=d_sym(dim))
    return sym_tensor_from_unique(dim, b)


def avn_noise_vector(n: int, beta: float, rng) -> np.ndarray:
    """Sample from the density proportional to exp(-beta * ||b||_2) on R^n.

    Direction is uniform (a normalized standard Gaussian); the radius is
    Erlang-distributed with shape n and rate beta, generated as a sum of n
    exponentials.  The density's normalizing constant is never needed.
    """
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    gen = _as_generator(rng)
    direction = gen.standard_normal(n)
    direction /= np.linalg.norm(direction)
    radius = gen.exponential(scale=1.0 / beta, size=n).sum()
    return radius * direction


def avn_noise_tensor3(dim: int, beta: float, rng) -> np.ndarray:
    """Symmetric noise tensor whose unique entries form one vector-noise draw."""
    b = avn_noise_vector(d_sym(dim), beta, rng)
    return sym_tensor_from_unique(dim, b)

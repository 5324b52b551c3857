"""Correlated-noise aggregation protocol (three roles, simulated in-process).

A trusted noise generator hands each site a share ``e_s`` of a zero-sum
Gaussian vector; the untrusted aggregator hands each site an i.i.d. Gaussian
``f_s`` that it remembers and later subtracts; each site adds its own local
Gaussian ``g_s``.  The site release ``value + e_s + f_s + g_s`` is protected
against either colluding party, while at the aggregator the e-shares cancel
exactly and the f-shares are subtracted, leaving only the averaged g noise:
the estimator variance matches what a single trusted curator would have
needed for the pooled data.

Everything runs single-process with explicit role streams so each round is
replayable; a :class:`ProtocolTranscript` records every message and noise
draw for audits and exactness tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .dp import RngStream, _as_generator

__all__ = [
    "InfeasiblePlanError",
    "InfeasibleNoiseError",
    "NoisePlan",
    "Message",
    "ProtocolTranscript",
    "NOISE_GENERATOR",
    "AGGREGATOR",
    "PUBLIC",
    "site_role",
    "cape_plan",
    "unequal_plan",
    "zero_sum_shares",
    "zero_sum_gaussian",
    "weighted_zero_sum_shares",
    "gain",
    "cape_average",
    "weighted_cape_average",
    "conv_average",
    "cape_moment_round",
]


class InfeasiblePlanError(ValueError):
    """The requested weight/privacy combination admits no equality solution."""


class InfeasibleNoiseError(ValueError):
    """No zero-sum Gaussian exists with the requested marginal variances."""


NOISE_GENERATOR = "noise_generator"
AGGREGATOR = "aggregator"
PUBLIC = "public"


def site_role(s: int) -> str:
    return f"site_{s}"


@dataclass(frozen=True)
class Message:
    round_id: int
    sender: str
    receiver: str
    kind: str
    payload: Any

    @property
    def nbytes(self) -> int:
        """Wire size of the payload (floats count as 8 bytes)."""
        p = np.asarray(self.payload)
        return int(p.size) * 8


@dataclass
class ProtocolTranscript:
    """Ordered record of every message exchanged in a protocol execution.

    The simulation is white-box: payloads hold the actual noise values, so
    tests can reconstruct aggregates exactly.  :meth:`redacted` restricts to
    what a single role legitimately observes, for honest-but-curious audits.
    """

    messages: list[Message] = field(default_factory=list)

    def record(self, round_id: int, sender: str, receiver: str, kind: str, payload) -> None:
        self.messages.append(Message(round_id, sender, receiver, kind, payload))

    def select(
        self,
        kind: str | None = None,
        sender: str | None = None,
        receiver: str | None = None,
        round_id: int | None = None,
    ) -> list[Message]:
        out = self.messages
        if kind is not None:
            out = [m for m in out if m.kind == kind]
        if sender is not None:
            out = [m for m in out if m.sender == sender]
        if receiver is not None:
            out = [m for m in out if m.receiver == receiver]
        if round_id is not None:
            out = [m for m in out if m.round_id == round_id]
        return out

    def redacted(self, role: str) -> list[Message]:
        """Messages visible to ``role``: those it sent or received, plus public ones."""
        return [
            m
            for m in self.messages
            if m.sender == role or m.receiver == role or m.receiver == PUBLIC
        ]


@dataclass(frozen=True)
class NoisePlan:
    """Per-site noise variances (tau_e^2, tau_f^2, tau_g^2) for one round.

    ``tau_s_sq`` holds the per-site target variances the plan must protect
    (what each site would need on its own); ``zero_sum`` names the e-share
    construction that realizes the stated marginals with an exactly zero
    (weighted) sum: "mean" subtracts the mean of i.i.d. draws, "tail" draws
    the first S-1 shares independently and lets the last absorb the sum.
    """

    tau_e_sq: np.ndarray
    tau_f_sq: np.ndarray
    tau_g_sq: np.ndarray
    tau_s_sq: np.ndarray
    zero_sum: str = "mean"

    def __post_init__(self):
        arrays = {}
        for name in ("tau_e_sq", "tau_f_sq", "tau_g_sq", "tau_s_sq"):
            a = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            arrays[name] = a
            object.__setattr__(self, name, a)
        sizes = {a.shape for a in arrays.values()}
        if len(sizes) != 1 or arrays["tau_e_sq"].ndim != 1:
            raise ValueError(f"plan arrays must share one 1-D shape, got {sizes}")
        if self.zero_sum not in ("mean", "tail"):
            raise ValueError(f"unknown zero_sum construction {self.zero_sum!r}")
        if any((a < -1e-12).any() for a in arrays.values()):
            raise InfeasiblePlanError("negative noise variance in plan")

    @property
    def n_sites(self) -> int:
        return self.tau_e_sq.shape[0]

    def validate(
        self,
        weights: np.ndarray | None = None,
        tau_c: float | None = None,
        tol: float = 1e-10,
    ) -> None:
        """Check the defining equalities; raise InfeasiblePlanError otherwise.

        Per site: tau_e^2 + tau_g^2 = tau_s^2 and tau_f^2 + tau_g^2 = tau_s^2
        (privacy against a colluding noise generator or aggregator).  With
        ``weights`` and ``tau_c``: sum_s mu_s^2 tau_gs^2 = tau_c^2, and the
        zero-sum construction must be consistent with the e-share marginals.
        """
        scale = max(1.0, float(self.tau_s_sq.max(initial=0.0)))
        eg = self.tau_e_sq + self.tau_g_sq - self.tau_s_sq
        fg = self.tau_f_sq + self.tau_g_sq - self.tau_s_sq
        if np.abs(eg).max() > tol * scale or np.abs(fg).max() > tol * scale:
            raise InfeasiblePlanError("per-site variance equalities violated")
        if weights is not None:
            mu = np.asarray(weights, dtype=float)
            if tau_c is not None:
                agg = float(mu**2 @ self.tau_g_sq)
                if abs(agg - tau_c**2) > tol * scale:
                    raise InfeasiblePlanError(
                        f"aggregate variance {agg} != tau_c^2 {tau_c ** 2}"
                    )
            if self.zero_sum == "tail" and self.n_sites >= 1:
                head = float(mu[:-1] ** 2 @ self.tau_e_sq[:-1])
                tail = float(mu[-1] ** 2 * self.tau_e_sq[-1])
                if abs(head - tail) > tol * scale:
                    raise InfeasiblePlanError("tail zero-sum bookkeeping violated")
            if self.zero_sum == "mean":
                if np.abs(mu - 1.0 / self.n_sites).max() > tol:
                    raise InfeasiblePlanError(
                        "mean zero-sum construction requires uniform weights"
                    )


def cape_plan(tau_s, n_sites: int) -> NoisePlan:
    """Equal-weight noise plan: tau_e^2 = tau_f^2 = (1 - 1/S) tau_s^2, tau_g^2 = tau_s^2 / S.

    ``tau_s`` may be a scalar (all sites identical) or a length-S vector of
    per-site standard deviations.  With a single site the correlated shares
    vanish and the plan degenerates to purely local noise.
    """
    if n_sites < 1:
        raise ValueError(f"site count must be >= 1, got {n_sites}")
    tau_s_sq = np.broadcast_to(
        np.asarray(tau_s, dtype=float) ** 2, (n_sites,)
    ).copy()
    if (tau_s_sq < 0).any() or np.isnan(tau_s_sq).any():
        raise ValueError("tau_s must be nonnegative")
    shared = (1.0 - 1.0 / n_sites) * tau_s_sq
    return NoisePlan(
        tau_e_sq=shared,
        tau_f_sq=shared.copy(),
        tau_g_sq=tau_s_sq / n_sites,
        tau_s_sq=tau_s_sq,
        zero_sum="mean",
    )


def unequal_plan(mu, tau, tau_c: float) -> NoisePlan:
    """Closed-form noise plan for per-site weights and privacy levels.

    Solves the equality version of the feasibility problem: per-site
    protections tau_es^2 + tau_gs^2 = tau_fs^2 + tau_gs^2 = tau_s^2, aggregate
    noise sum_s mu_s^2 tau_gs^2 = tau_c^2, and a weighted zero-sum e-share
    construction.  The last site's shares absorb the weighted sum of the
    others ("tail" construction), which pins mu_S^2 tau_eS^2 =
    sum_{s<S} mu_s^2 tau_es^2.

    The exactly-equal instance (uniform weights, identical tau, tau_c =
    tau/S) short-circuits to :func:`cape_plan`: the closed form below is one
    of many equality solutions and is itself infeasible there for S >= 4,
    while the standard plan solves the same constraints.

    Raises:
        InfeasiblePlanError: if any assigned variance comes out negative;
            variances are never clamped, since clamping would silently change
            the privacy guarantee.
    """
    mu = np.asarray(mu, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if mu.ndim != 1 or mu.shape != tau.shape:
        raise ValueError(
            f"weights and per-site tau must be equal-length vectors, got "
            f"{mu.shape} and {tau.shape}"
        )
    if (mu < 0).any() or abs(mu.sum() - 1.0) > 1e-12:
        raise ValueError("weights must be nonnegative and sum to 1")
    if (tau <= 0).any() or tau_c <= 0:
        raise ValueError("per-site tau and tau_c must be positive")
    s = mu.shape[0]

    tau_sq = tau**2
    if (
        np.abs(mu - 1.0 / s).max() <= 1e-12
        and np.abs(tau - tau[0]).max() <= 1e-12 * tau[0]
        and abs(tau_c - tau[0] / s) <= 1e-12 * tau[0]
    ):
        return cape_plan(tau[0], s)

    if mu[-1] == 0.0:
        raise InfeasiblePlanError("last site's weight must be positive")
    c = tau_c**2 - float(mu[:-1] ** 2 @ tau_sq[:-1])
    g_last = tau_sq[-1] / 2.0 + c / (2.0 * mu[-1] ** 2)
    e_last = tau_sq[-1] / 2.0 - c / (2.0 * mu[-1] ** 2)

    tau_e_sq = np.empty(s)
    tau_g_sq = np.empty(s)
    tau_e_sq[-1] = e_last
    tau_g_sq[-1] = g_last
    if s > 1:
        head_share = (mu[-1] ** 2 / 2.0) * tau_sq[-1] - c / 2.0
        tau_e_sq[:-1] = head_share / (mu[:-1] ** 2 * (s - 1))
        tau_g_sq[:-1] = tau_sq[:-1] - tau_e_sq[:-1]

    stacked = np.concatenate([tau_e_sq, tau_g_sq])
    if (stacked < -1e-12).any():
        raise InfeasiblePlanError(
            "no equality solution: a computed noise variance is negative "
            "(adjust weights, per-site privacy, or the aggregate target)"
        )
    tau_e_sq = np.maximum(tau_e_sq, 0.0)
    tau_g_sq = np.maximum(tau_g_sq, 0.0)
    plan = NoisePlan(
        tau_e_sq=tau_e_sq,
        tau_f_sq=tau_e_sq.copy(),
        tau_g_sq=tau_g_sq,
        tau_s_sq=tau_sq,
        zero_sum="tail",
    )
    plan.validate(weights=mu, tau_c=tau_c)
    return plan


def _polygon_vectors(sigma: np.ndarray) -> np.ndarray:
    """Vectors u_s in R^2 with ||u_s|| = sigma_s and sum_s u_s = 0.

    A zero-sum Gaussian with marginal standard deviations sigma exists iff
    the sigmas close into a polygon: 2 max_s sigma_s <= sum_s sigma_s.  The
    construction groups the sides into three bins (greedy, largest first,
    into the currently-smallest bin), whose sums then satisfy the triangle
    inequality exactly when the polygon condition holds; each share points
    along its bin's triangle side.
    """
    s = sigma.shape[0]
    order = np.argsort(-sigma, kind="stable")
    bins = [[], [], []]
    sums = np.zeros(3)
    for idx in order:
        b = int(np.argmin(sums))
        bins[b].append(idx)
        sums[b] += sigma[idx]
    a, b, c = sums
    if sums.max() > sums.sum() - sums.max() + 1e-12 * sigma.max():
        raise InfeasibleNoiseError(
            "marginal variances too unequal for a zero-sum Gaussian "
            "(one share's deviation exceeds the sum of the others)"
        )
    # triangle with side lengths (a, b, c): vertices (0,0), (a,0), (x2,y2)
    if a > 0:
        x2 = (a**2 + c**2 - b**2) / (2.0 * a)
        y2 = np.sqrt(max(c**2 - x2**2, 0.0))
    else:
        x2 = y2 = 0.0
    p = np.array([a, 0.0])
    q = np.array([x2 - a, y2])
    r = -(p + q)
    u = np.zeros((s, 2))
    for side, members, total in zip((p, q, r), bins, sums):
        norm = np.linalg.norm(side)
        if norm == 0.0 or total == 0.0:
            continue
        unit = side / norm
        for idx in members:
            u[idx] = sigma[idx] * unit
    return u


def zero_sum_gaussian(variances, rng, shape: tuple[int, ...] = ()) -> np.ndarray:
    """Zero-sum Gaussian shares with prescribed marginal variances.

    Returns an array of shape (S, *shape) whose slices sum to zero exactly
    (to float rounding) and whose s-th slice has i.i.d. N(0, variances[s])
    entries marginally.  Equal variances use the classic construction
    (i.i.d. draws minus their mean); unequal variances realize the shares as
    inner products with a closed polygon of vectors, which covers exactly
    the feasible set of marginals.

    Raises:
        InfeasibleNoiseError: if no zero-sum Gaussian has these marginals
            (one deviation exceeding the sum of the others, or a single
            nonzero share).
    """
    v = np.atleast_1d(np.asarray(variances, dtype=float))
    if (v < 0).any():
        raise ValueError("variances must be nonnegative")
    s = v.shape[0]
    vmax = float(v.max(initial=0.0))
    if vmax == 0.0:
        return np.zeros((s, *shape))
    if s == 1:
        raise InfeasibleNoiseError("a single share cannot be zero-sum with variance > 0")
    gen = _as_generator(rng)
    if np.abs(v - v[0]).max() <= 1e-14 * vmax:
        z = gen.normal(0.0, np.sqrt(v[0] * s / (s - 1.0)), size=(s, *shape))
        return z - z.mean(axis=0, keepdims=True)
    u = _polygon_vectors(np.sqrt(v))
    z = gen.normal(0.0, 1.0, size=(2, *shape))
    return np.tensordot(u, z, axes=(1, 0))


def zero_sum_shares(n_sites: int, tau_s: float, rng, shape: tuple[int, ...] = ()) -> np.ndarray:
    """Equal-variance zero-sum shares: i.i.d. N(0, tau_s^2) minus their mean.

    Marginal variance is (1 - 1/S) tau_s^2 per coordinate, matching the plan
    of :func:`cape_plan`, and the shares sum to zero exactly.
    """
    if n_sites < 1:
        raise ValueError(f"site count must be >= 1, got {n_sites}")
    if tau_s < 0:
        raise ValueError(f"tau_s must be nonnegative, got {tau_s}")
    factor = (1.0 - 1.0 / n_sites) * tau_s**2
    return zero_sum_gaussian(np.full(n_sites, factor), rng, shape)


def weighted_zero_sum_shares(mu, plan: NoisePlan, rng, shape: tuple[int, ...] = ()) -> np.ndarray:
    """E-shares with sum_s mu_s e_s = 0 and marginal variances plan.tau_e_sq.

    Uses the construction named by ``plan.zero_sum``: "mean" (uniform weights
    only) or "tail" (first S-1 independent, last absorbs the weighted sum;
    its marginal variance is correct by the plan's bookkeeping).
    """
    mu = np.asarray(mu, dtype=float)
    s = plan.n_sites
    if mu.shape != (s,):
        raise ValueError(f"weights shape {mu.shape} does not match plan size {s}")
    gen = _as_generator(rng)
    if plan.zero_sum == "mean":
        if np.abs(mu - 1.0 / s).max() > 1e-12:
            raise InfeasiblePlanError(
                "mean zero-sum construction requires uniform weights"
            )
        return zero_sum_gaussian(plan.tau_e_sq, gen, shape)
    if mu[-1] == 0.0:
        raise InfeasiblePlanError("last site's weight must be positive")
    shares = np.zeros((s, *shape))
    if s > 1:
        std = np.sqrt(plan.tau_e_sq[:-1]).reshape((s - 1,) + (1,) * len(shape))
        shares[:-1] = gen.normal(0.0, 1.0, size=(s - 1, *shape)) * std
        weighted = mu[:-1].reshape((s - 1,) + (1,) * len(shape)) * shares[:-1]
        shares[-1] = -weighted.sum(axis=0) / mu[-1]
    return shares


def gain(n) -> float:
    """Variance ratio of uncorrelated vs correlated aggregation, (N^2/S^2) sum 1/N_s^2.

    Minimized (= S) when all sites hold N/S samples; maximized when all but
    one site hold a single sample.
    """
    n = np.asarray(n, dtype=float)
    if n.ndim != 1 or n.size == 0:
        raise ValueError("need a non-empty vector of per-site sample counts")
    if (n < 1).any():
        raise ValueError("per-site sample counts must be >= 1")
    total = n.sum()
    s = n.size
    # summing (N / (S N_s))^2 keeps the equal-split case exactly S
    return float(np.sum((total / (s * n)) ** 2))


def _role_generators(rng, n_sites: int) -> tuple:
    """One generator per protocol role, derived from a stream or shared."""
    if isinstance(rng, RngStream):
        return (
            rng.child(NOISE_GENERATOR).generator(),
            rng.child(AGGREGATOR).generator(),
            [rng.child(site_role(s)).generator() for s in range(n_sites)],
        )
    gen = _as_generator(rng)
    return gen, gen, [gen] * n_sites


def cape_average(
    site_values,
    tau_s,
    plan: NoisePlan | None = None,
    rng=None,
    *,
    trusted_sites: bool = False,
    record: bool = True,
) -> tuple[float, ProtocolTranscript | None]:
    """One correlated-noise averaging round over scalar site outputs.

    Args:
        site_values: length-S vector of per-site function outputs.
        tau_s: per-site Gaussian-mechanism std (scalar or length-S).
        plan: noise plan; defaults to ``cape_plan(tau_s, S)``.
        rng: an RngStream (roles get independent child streams) or a
            Generator (roles draw sequentially from it).
        trusted_sites: with at least two non-colluding sites the aggregator
            shares are unnecessary; sets every f_s to zero.
        record: set False to skip transcript assembly (Monte Carlo loops).

    Returns:
        (estimate, transcript).  The estimate equals the true mean plus the
        average of the local g draws: e-shares cancel by their zero sum and
        f-shares are subtracted by the aggregator that issued them.
    """
    values = np.asarray(site_values, dtype=float)
    if values.ndim != 1 or values.size == 0:
        raise ValueError("site_values must be a non-empty vector")
    s = values.size
    if plan is None:
        plan = cape_plan(tau_s, s)
    if plan.n_sites != s:
        raise ValueError(f"plan is for {plan.n_sites} sites, got {s} values")
    if rng is None:
        raise ValueError("an rng (RngStream or Generator) is required")

    gen_ng, gen_ag, gen_sites = _role_generators(rng, s)
    e = zero_sum_gaussian(plan.tau_e_sq, gen_ng, ())
    if trusted_sites:
        f = np.zeros(s)
    else:
        f = gen_ag.normal(0.0, 1.0, size=s) * np.sqrt(plan.tau_f_sq)
    g = np.array(
        [gen_sites[i].normal(0.0, np.sqrt(plan.tau_g_sq[i])) for i in range(s)]
    )
    released = values + e + f + g
    estimate = float(np.mean(released - f))

    if not record:
        return estimate, None
    transcript = ProtocolTranscript()
    for i in range(s):
        transcript.record(0, NOISE_GENERATOR, site_role(i), "e-share", e[i])
        transcript.record(0, AGGREGATOR, site_role(i), "f-share", f[i])
    for i in range(s):
        transcript.record(0, site_role(i), site_role(i), "g-noise", g[i])
        transcript.record(0, site_role(i), AGGREGATOR, "site-output", released[i])
    transcript.record(0, AGGREGATOR, PUBLIC, "estimate", estimate)
    return estimate, transcript


def weighted_cape_average(
    site_values,
    mu,
    plan: NoisePlan,
    rng,
    *,
    record: bool = True,
) -> tuple[float, ProtocolTranscript | None]:
    """Weighted correlated-noise averaging round, estimate = sum_s mu_s (a_s - f_s + ...).

    The plan must come from :func:`unequal_plan` (or :func:`cape_plan` with
    uniform weights); the e-shares satisfy sum_s mu_s e_s = 0 exactly, so the
    estimate equals sum_s mu_s a_s + sum_s mu_s g_s.
    """
    values = np.asarray(site_values, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if values.ndim != 1 or values.shape != mu.shape:
        raise ValueError("site_values and mu must be equal-length vectors")
    s = values.size
    if plan.n_sites != s:
        raise ValueError(f"plan is for {plan.n_sites} sites, got {s} values")

    gen_ng, gen_ag, gen_sites = _role_generators(rng, s)
    e = weighted_zero_sum_shares(mu, plan, gen_ng, ())
    f = gen_ag.normal(0.0, 1.0, size=s) * np.sqrt(plan.tau_f_sq)
    g = np.array(
        [gen_sites[i].normal(0.0, np.sqrt(plan.tau_g_sq[i])) for i in range(s)]
    )
    released = values + e + f + g
    estimate = float(mu @ (released - f))

    if not record:
        return estimate, None
    transcript = ProtocolTranscript()
    for i in range(s):
        transcript.record(0, NOISE_GENERATOR, site_role(i), "e-share", e[i])
        transcript.record(0, AGGREGATOR, site_role(i), "f-share", f[i])
    for i in range(s):
        transcript.record(0, site_role(i), site_role(i), "g-noise", g[i])
        transcript.record(0, site_role(i), AGGREGATOR, "site-output", released[i])
    transcript.record(0, AGGREGATOR, PUBLIC, "estimate", estimate)
    return estimate, transcript


def conv_average(site_values, tau_s, rng) -> float:
    """Conventional scheme: each site adds full local noise, aggregator averages.

    Estimator variance is tau_s^2 / S, a factor S worse than the correlated
    scheme's tau_s^2 / S^2.
    """
    values = np.asarray(site_values, dtype=float)
    gen = _as_generator(rng)
    tau = np.broadcast_to(np.asarray(tau_s, dtype=float), values.shape)
    return float(np.mean(values + gen.normal(0.0, 1.0, size=values.shape) * tau))


def cape_moment_round(
    site_arrays: list[np.ndarray],
    tau_s,
    rng,
    *,
    local_noise: Callable[[int, float, np.random.Generator], np.ndarray],
    transcript: ProtocolTranscript | None = None,
    round_id: int = 0,
    trusted_sites: bool = False,
    kind: str = "moment",
) -> np.ndarray:
    """One correlated-noise aggregation round over equal-shaped site arrays.

    The e/f shares are i.i.d. over array entries (e zero-sum across sites per
    entry); the local share comes from ``local_noise(dim, tau_g, generator)``,
    which lets callers plug in the symmetric matrix or symmetric tensor
    samplers.  Returns the aggregator's average (1/S) sum_s (released_s - f_s),
    in which the e-shares have cancelled exactly.
    """
    if not site_arrays:
        raise ValueError("need at least one site array")
    shape = site_arrays[0].shape
    if any(a.shape != shape for a in site_arrays):
        raise ValueError("site arrays must share one shape")
    s = len(site_arrays)
    dim = shape[0]
    plan = cape_plan(tau_s, s)

    gen_ng, gen_ag, gen_sites = _role_generators(rng, s)
    e = zero_sum_gaussian(plan.tau_e_sq, gen_ng, shape)
    if trusted_sites:
        f = np.zeros((s, *shape))
    else:
        f = gen_ag.normal(0.0, 1.0, size=(s, *shape)) * np.sqrt(
            plan.tau_f_sq
        ).reshape((s,) + (1,) * len(shape))
    released = []
    for i, a in enumerate(site_arrays):
        g = local_noise(dim, float(np.sqrt(plan.tau_g_sq[i])), gen_sites[i])
        out = a + e[i] + f[i] + g
        released.append(out)
        if transcript is not None:
            transcript.record(round_id, NOISE_GENERATOR, site_role(i), f"{kind}-e-share", e[i])
            transcript.record(round_id, AGGREGATOR, site_role(i), f"{kind}-f-share", f[i])
            transcript.record(round_id, site_role(i), site_role(i), f"{kind}-g-noise", g)
            transcript.record(round_id, site_role(i), AGGREGATOR, f"{kind}-site-output", out)
    stacked = np.stack(released) - f
    return stacked.mean(axis=0)

"""Fast 2x2 superoperator paths for outcome distributions and the decoherence probe.

A Hubbard-Stratonovich transform turns the many-body Kraus chain into weighted
chains of quadratic 2x2 superoperator steps.  The single-time distribution is a
deterministic Fourier inversion over the twist field w; marginal distributions
with third-party measurements additionally average diagonal twists over
Gaussian auxiliary fields z_t, sampled in antithetic pairs with jackknife
errors.  The L1 disturbance probe compares the two.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import moments
from .algebra import ModelParams, build_isometry, hermitize, v_super, v_super_batch, kraus_twist

TAIL_BOUND = 1e-12


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Fourier grid: n_w twist-field points on [-w_max, w_max).

    The outcome axis follows by discrete Fourier duality: spacing pi/w_max,
    n_w points centred on zero.  Valid for a given gamma when the Gaussian
    tail at w_max is below 1e-12 and the outcome spacing resolves gamma/4.
    """

    n_w: int = 4096
    w_max: float = 0.0

    @classmethod
    def for_gamma(cls, gamma: float, n_w: int = 4096) -> "GridSpec":
        """Smallest default grid meeting both invariants at this gamma."""
        return cls(n_w=n_w, w_max=max(4 * math.pi / gamma, 40.0))

    def validate(self, gamma: float) -> None:
        if self.n_w < 16 or self.n_w & (self.n_w - 1):
            raise GridError(f"n_w must be a power of two >= 16, got {self.n_w}")
        if not self.w_max > 0:
            raise GridError(f"w_max must be positive, got {self.w_max}")
        tail = math.exp(-((gamma * self.w_max) ** 2) / 2.0)
        if tail >= TAIL_BOUND:
            raise GridError(f"Gaussian tail {tail:.2e} at w_max not negligible; need w_max >= 8/gamma")
        if self.dn > gamma / 4:
            raise GridError(f"outcome spacing {self.dn:.4g} exceeds gamma/4 = {gamma / 4:.4g}")

    @property
    def dw(self) -> float:
        return 2 * self.w_max / self.n_w

    @property
    def dn(self) -> float:
        return math.pi / self.w_max

    @property
    def w_axis(self) -> np.ndarray:
        return (np.arange(self.n_w) - self.n_w // 2) * self.dw

    @property
    def n_axis(self) -> np.ndarray:
        return (np.arange(self.n_w) - self.n_w // 2) * self.dn


def invert_characteristic(grid: GridSpec, values: np.ndarray) -> np.ndarray:
    """(1/2pi) int dw e^{-iwn} f(w) on the dual axis, for f sampled on w_axis.

    `values` has shape (n_w, ...); the transform acts on the first axis.
    """
    n = grid.n_w
    sign = (-1.0) ** np.arange(n)
    shape = (n,) + (1,) * (values.ndim - 1)
    f = np.fft.fft(values * sign.reshape(shape), axis=0)
    return grid.dw / (2 * math.pi) * sign.reshape(shape) * f


@dataclass
class DistributionTable:
    """Discretized outcome axis with density and non-normalized conditional operators."""

    n: np.ndarray
    q: np.ndarray  # (n_points, 2, 2), trace/2 = density
    density: np.ndarray
    stderr: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def integral(self) -> float:
        return float(np.trapezoid(self.density, self.n))

    def validate(self) -> None:
        floor = -1e-8 if self.stderr is None else -(1e-8 + 5.0 * float(self.stderr.max(initial=0.0)))
        if self.density.min() < floor:
            raise ValueError(f"density dips to {self.density.min():.3e}, below {floor:.3e}")
        err = 1e-4 if self.stderr is None else max(1e-4, 3.0 * float(np.trapezoid(self.stderr, self.n)))
        if abs(self.integral() - 1.0) > err:
            raise ValueError(f"density integrates to {self.integral():.6f}")
        if np.linalg.eigvalsh(hermitize(self.q)).min() < -1e-8:
            raise ValueError("conditional operators not PSD after symmetrization")

    def nearest_index(self, m: float) -> int:
        if not self.n[0] <= m <= self.n[-1]:
            raise ValueError(f"m = {m} outside the tabulated range")
        return int(np.argmin(np.abs(self.n - m)))

    def sample_outcomes(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Inverse-CDF draws from the tabulated density."""
        dn = self.n[1] - self.n[0]
        cdf = np.cumsum(np.clip(self.density, 0.0, None)) * dn
        cdf /= cdf[-1]
        u = rng.random(count)
        idx = np.searchsorted(cdf, u)
        return self.n[np.clip(idx, 0, len(self.n) - 1)]


@dataclass(frozen=True)
class HistoryKernelInput:
    """Auxiliary twist fields (u_t, v_t) for each step t in [tau, T]."""

    u_fields: np.ndarray
    v_fields: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u_fields", np.asarray(self.u_fields, dtype=complex))
        object.__setattr__(self, "v_fields", np.asarray(self.v_fields, dtype=complex))
        if self.u_fields.shape != self.v_fields.shape or self.u_fields.ndim != 1:
            raise ValueError("u_fields and v_fields must be equal-length vectors")


class ProbeResult(NamedTuple):
    l1: float
    stderr: float


def history_kernel(params: ModelParams, tau: int, t_final: int, fields: HistoryKernelInput) -> np.ndarray:
    """Backward twist/renormalize recursion, pushed all the way to the root qubit."""
    q = history_kernel_state(params, tau, t_final, fields)
    v = build_isometry(params)
    for _ in range(tau - 1):
        q = v_super(v, q)
    return q


def history_kernel_state(params: ModelParams, tau: int, t_final: int, fields: HistoryKernelInput) -> np.ndarray:
    """Per-site operator at depth tau - 1: Q_{t-1} = v[k^t_{u,v}[Q_t]], Q_T = I."""
    if not 1 <= tau <= t_final:
        raise ValueError(f"need 1 <= tau <= T, got tau={tau}, T={t_final}")
    if fields.u_fields.shape != (t_final - tau + 1,):
        raise ValueError(f"fields must cover [tau, T] = [{tau}, {t_final}]")
    v = build_isometry(params)
    q = np.eye(2, dtype=complex)
    for t in range(t_final, tau - 1, -1):
        idx = t - tau
        q = kraus_twist(q, fields.u_fields[idx], fields.v_fields[idx], moments.eta(params, t))
        q = v_super(v, q)
    return q


def _initial_twist(w_axis: np.ndarray, eta_t: float) -> np.ndarray:
    """Batch of e^{iwZ/eta} over the w axis, shape (len(w), 2, 2)."""
    q = np.zeros((len(w_axis), 2, 2), dtype=complex)
    phase = np.exp(1j * w_axis / eta_t)
    q[:, 0, 0] = phase
    q[:, 1, 1] = phase.conj()
    return q


def _apply_z_twist(q: np.ndarray, z: float, eta_t: float) -> None:
    """In-place diagonal twist with u = v = z/2: off-diagonals pick up e^{+-iz/eta}."""
    phase = np.exp(1j * z / eta_t)
    q[..., 0, 1] *= phase
    q[..., 1, 0] *= phase.conj()


def _chain(
    v: np.ndarray,
    q: np.ndarray,
    tau: int,
    t_final: int,
    z_fields: np.ndarray | None,
    etas: dict[int, float],
) -> np.ndarray:
    """Apply v (and diagonal twists at t in [tau, T-1]) down to the root."""
    for t in range(t_final - 1, tau - 1, -1):
        q = v_super_batch(v, q)
        if z_fields is not None:
            _apply_z_twist(q, z_fields[t - tau], etas[t])
    for _ in range(tau):
        q = v_super_batch(v, q)
    return q


def single_time_distribution(params: ModelParams, t_final: int, grid: GridSpec, gamma: float | None = None) -> DistributionTable:
    """Deterministic outcome distribution of a single measurement at depth t_final."""
    if t_final < 1:
        raise ValueError(f"t_final must be >= 1, got {t_final}")
    gamma = params.gamma if gamma is None else gamma
    grid.validate(gamma)
    v = build_isometry(params)
    q = _chain(v, _initial_twist(grid.w_axis, moments.eta(params, t_final)), t_final, t_final, None, {})
    weight = np.exp(-(gamma**2) * grid.w_axis**2 / 2.0)
    table = _table_from_characteristic(grid, weight[:, None, None] * q)
    table.meta = {"theta": params.theta, "T": t_final, "gamma": gamma, "kind": "single_time"}
    return table


def _table_from_characteristic(grid: GridSpec, values: np.ndarray) -> DistributionTable:
    q = invert_characteristic(grid, values)
    density = np.einsum("naa->n", q).real / 2.0
    return DistributionTable(n=grid.n_axis, q=q, density=density)


def _marginal_traces(
    params: ModelParams,
    tau: int,
    t_final: int,
    w_axis: np.ndarray,
    samples: int,
    seed: int,
    gammas: dict[int, float],
    collect_q: bool = True,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Antithetic-pair averages of the twist-field chains.

    Returns (per-pair trace/2 vectors over the w axis, mean of the full 2x2
    chains or None).  z_t is drawn from N(0, 1/gamma_t) per step; each pair
    evaluates (z, -z).  RNG streams depend only on (seed, pair index).
    """
    if samples < 2:
        raise ValueError(f"need at least 2 samples, got {samples}")
    if samples % 2:
        raise ValueError(f"samples must be even (antithetic pairs), got {samples}")
    v = build_isometry(params)
    etas = {t: moments.eta(params, t) for t in range(tau, t_final)}
    pairs = samples // 2
    traces = np.empty((pairs, len(w_axis)), dtype=complex)
    q_sum = np.zeros((len(w_axis), 2, 2), dtype=complex) if collect_q else None
    q0 = _initial_twist(w_axis, moments.eta(params, t_final))
    sigma = np.array([1.0 / gammas[t] for t in range(tau, t_final)])
    for j in range(pairs):
        rng = np.random.default_rng([seed, j])
        z = rng.normal(0.0, 1.0, size=t_final - tau) * sigma
        pair_mean = None
        for z_signed in (z, -z):
            q = _chain(v, q0.copy(), tau, t_final, z_signed, etas)
            pair_mean = q if pair_mean is None else (pair_mean + q) / 2.0
        traces[j] = np.einsum("naa->n", pair_mean) / 2.0
        if collect_q:
            q_sum += pair_mean
    return traces, (q_sum / pairs if collect_q else None)


def _jackknife_stderr(values: np.ndarray) -> np.ndarray:
    """Leave-one-out error of the mean along axis 0."""
    j = values.shape[0]
    total = values.sum(axis=0)
    loo = (total[None] - values) / (j - 1)
    return np.sqrt((j - 1) / j * ((loo - loo.mean(axis=0)) ** 2).sum(axis=0))


def marginal_distribution(
    params: ModelParams, tau: int, t_final: int, grid: GridSpec, samples: int, seed: int
) -> DistributionTable:
    """Outcome distribution at t_final in presence of measurements at [tau, T-1].

    Monte-Carlo over the auxiliary twist fields, with per-point jackknife
    standard errors.
    """
    if not 1 <= tau < t_final:
        raise ValueError(f"need 1 <= tau < T, got tau={tau}, T={t_final}")
    gamma = params.gamma
    grid.validate(gamma)
    gammas = {t: gamma for t in range(tau, t_final)}
    traces, q_mean = _marginal_traces(params, tau, t_final, grid.w_axis, samples, seed, gammas)
    weight = np.exp(-(gamma**2) * grid.w_axis**2 / 2.0)
    table = _table_from_characteristic(grid, weight[:, None, None] * q_mean)
    densities = invert_characteristic(grid, (weight[None, :] * traces).T).real.T
    table.stderr = _jackknife_stderr(densities)
    table.meta = {
        "theta": params.theta,
        "tau": tau,
        "T": t_final,
        "gamma": gamma,
        "seed": seed,
        "samples": samples,
        "kind": "marginal",
    }
    return table


def delta_probe(
    params: ModelParams, tau: int, t_final: int, grid: GridSpec, samples: int, seed: int
) -> ProbeResult:
    """L1 distance between the single-time distribution and its marginal.

    Vanishes when third-party measurements at [tau, T-1] do not disturb the
    final outcome, i.e. when histories decohere.
    """
    if not 1 <= tau < t_final:
        raise ValueError(f"need 1 <= tau < T, got tau={tau}, T={t_final}")
    gamma = params.gamma
    grid.validate(gamma)
    reference = single_time_distribution(params, t_final, grid).density
    gammas = {t: gamma for t in range(tau, t_final)}
    traces, _ = _marginal_traces(params, tau, t_final, grid.w_axis, samples, seed, gammas, collect_q=False)
    weight = np.exp(-(gamma**2) * grid.w_axis**2 / 2.0)
    densities = invert_characteristic(grid, (weight[None, :] * traces).T).real.T
    return _l1_jackknife(densities, reference, grid.n_axis)


def _l1_jackknife(densities: np.ndarray, reference: np.ndarray, n_axis: np.ndarray) -> ProbeResult:
    j = densities.shape[0]
    mean = densities.mean(axis=0)
    l1 = float(np.trapezoid(np.abs(mean - reference), n_axis))
    total = densities.sum(axis=0)
    loo = (total[None] - densities) / (j - 1)
    l1_loo = np.trapezoid(np.abs(loo - reference[None]), n_axis, axis=1)
    stderr = math.sqrt((j - 1) / j * ((l1_loo - l1_loo.mean()) ** 2).sum())
    return ProbeResult(l1, stderr)


MAX_LATTICE_DEPTH = 16


def fine_grained_probe(
    params: ModelParams,
    tau: int,
    t_final: int,
    gamma_absolute: float,
    grid: GridSpec | None,
    samples: int,
    seed: int,
) -> ProbeResult:
    """Disturbance probe at fixed absolute precision: gamma_t = gamma_absolute/eta_t.

    The final-time imprecision is then far below the magnetization lattice
    spacing 2/eta_T, so the outcome law is a comb of non-overlapping Gaussians
    and the L1 distance reduces to the l1 distance of exact lattice weights.
    Those are recovered by sampling the twist field on the dual lattice of
    2^T + 1 points, so `grid` is not used (accepted for interface parity).
    """
    del grid
    if not 1 <= tau < t_final:
        raise ValueError(f"need 1 <= tau < T, got tau={tau}, T={t_final}")
    if not gamma_absolute > 0:
        raise ValueError(f"gamma_absolute must be positive, got {gamma_absolute}")
    if t_final > MAX_LATTICE_DEPTH:
        raise ValueError(f"lattice route supports T <= {MAX_LATTICE_DEPTH}")
    eta_t = moments.eta(params, t_final)
    count = 2**t_final + 1
    w_axis = math.pi * eta_t * np.arange(count) / count
    v = build_isometry(params)
    single = _chain(v, _initial_twist(w_axis, eta_t), t_final, t_final, None, {})
    ref_weights = _lattice_weights(np.einsum("naa->n", single) / 2.0, t_final)
    gammas = {t: gamma_absolute / moments.eta(params, t) for t in range(tau, t_final)}
    traces, _ = _marginal_traces(params, tau, t_final, w_axis, samples, seed, gammas, collect_q=False)
    weights = np.stack([_lattice_weights(tr, t_final) for tr in traces])
    j = weights.shape[0]
    mean = weights.mean(axis=0)
    l1 = float(np.abs(mean - ref_weights).sum())
    loo = (weights.sum(axis=0)[None] - weights) / (j - 1)
    l1_loo = np.abs(loo - ref_weights[None]).sum(axis=1)
    stderr = math.sqrt((j - 1) / j * ((l1_loo - l1_loo.mean()) ** 2).sum())
    return ProbeResult(l1, stderr)


def _lattice_weights(phi: np.ndarray, t_final: int) -> np.ndarray:
    """Exact magnetization atom weights from dual-lattice characteristic samples."""
    count = 2**t_final + 1
    j = np.arange(count)
    shifted = phi * np.exp(2j * math.pi * j * 2 ** (t_final - 1) / count)
    return (np.fft.fft(shifted) / count).real


def two_time_distribution(
    params: ModelParams,
    t_first: int,
    t_second: int,
    grid: GridSpec,
    samples: int,
    seed: int,
    tau: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Joint outcome density of two measured times, marginal over the rest.

    All times in [tau, t_second] carry diagonal twist fields (Monte-Carlo);
    the two measured times additionally carry Fourier twist fields inverted on
    a 2-D grid.  Returns (outcome axis, density matrix p[n_first, n_second]).
    Joints with more than two kept times are reachable only through
    history_kernel and user-driven quadrature.
    """
    if not tau <= t_first < t_second:
        raise ValueError("need tau <= t_first < t_second")
    if samples < 2 or samples % 2:
        raise ValueError("samples must be an even number >= 2")
    gamma = params.gamma
    grid.validate(gamma)
    if grid.n_w > 1024:
        raise ValueError("two-time joints hold an n_w^2 grid; use n_w <= 1024")
    v = build_isometry(params)
    etas = {t: moments.eta(params, t) for t in range(tau, t_second + 1)}
    w = grid.w_axis
    n = grid.n_w
    q0 = np.zeros((n, 2, 2), dtype=complex)  # final-time twist, broadcast over w1 later
    phase = np.exp(1j * w / etas[t_second])
    q0[:, 0, 0] = phase
    q0[:, 1, 1] = phase.conj()
    mean = np.zeros((n, n), dtype=complex)
    pairs = samples // 2
    sigma = 1.0 / gamma
    w1_diag = np.exp(1j * w / etas[t_first])
    for jdx in range(pairs):
        rng = np.random.default_rng([seed, jdx])
        z = rng.normal(0.0, sigma, size=t_second - tau + 1)
        for z_signed in (z, -z):
            q = np.broadcast_to(q0[None, :], (n, n, 2, 2)).copy()  # (w1, w2, 2, 2)
            for t in range(t_second - 1, tau - 1, -1):
                q = v_super_batch(v, q)
                z_t = z_signed[t - tau]
                zp = np.exp(1j * z_t / etas[t])
                q[..., 0, 1] *= zp
                q[..., 1, 0] *= zp.conj()
                if t == t_first:
                    q[..., 0, 0] *= w1_diag[:, None]
                    q[..., 1, 1] *= w1_diag[:, None].conj()
            for _ in range(tau):
                q = v_super_batch(v, q)
            mean += np.einsum("abii->ab", q) / 2.0
    mean /= samples
    weight = np.exp(-(gamma**2) * w**2 / 2.0)
    mean *= weight[:, None] * weight[None, :]
    joint = invert_characteristic(grid, invert_characteristic(grid, mean).T).T
    return grid.n_axis, joint.real


def two_time_covariance(
    params: ModelParams,
    t_first: int,
    t_second: int,
    samples: int,
    seed: int,
    tau: int = 1,
    step: float = 0.25,
) -> tuple[float, float]:
    """Covariance of two history outcomes, from the joint characteristic function.

    Central finite differences in the two twist fields at zero, Richardson
    extrapolated over steps (h, h/2); all other times in [tau, t_second] are
    marginalized by Gaussian twist sampling.  Returns (covariance, jackknife
    stderr).  For t_first == t_second this is the outcome variance including
    the gamma^2 readout term.
    """
    if not tau <= t_first <= t_second:
        raise ValueError("need tau <= t_first <= t_second")
    if samples < 2 or samples % 2:
        raise ValueError("samples must be an even number >= 2")
    gamma = params.gamma
    v = build_isometry(params)
    etas = {t: moments.eta(params, t) for t in range(tau, t_second + 1)}
    equal = t_first == t_second

    def nodes(h: float) -> tuple[list[tuple[float, float]], np.ndarray]:
        if equal:
            return [(h, 0.0), (0.0, 0.0), (-h, 0.0)], np.array([1.0, -2.0, 1.0]) / h**2
        return [(h, h), (h, -h), (-h, h), (-h, -h)], np.array([1.0, -1.0, -1.0, 1.0]) / (4 * h**2)

    grids = [nodes(step), nodes(step / 2)]
    pairs = samples // 2
    estimates = np.empty(pairs)
    sigma = 1.0 / gamma
    for jdx in range(pairs):
        rng = np.random.default_rng([seed, jdx])
        z = rng.normal(0.0, sigma, size=t_second - tau + 1)
        by_step = np.zeros(2)
        for gidx, (w_pairs, fd_coeff) in enumerate(grids):
            values = np.zeros(len(w_pairs))
            for z_signed in (z, -z):
                for widx, (w1, w2) in enumerate(w_pairs):
                    q = np.eye(2, dtype=complex)
                    for t in range(t_second, tau - 1, -1):
                        w_t = (w1 if t == t_first else 0.0) + (w2 if t == t_second else 0.0)
                        z_t = z_signed[t - tau]
                        q = kraus_twist(q, (z_t + w_t) / 2.0, (z_t - w_t) / 2.0, etas[t])
                        q = v_super(v, q)
                    for _ in range(tau - 1):
                        q = v_super(v, q)
                    values[widx] += np.trace(q).real / 4.0  # half-trace, pair-averaged
            by_step[gidx] = -(fd_coeff * values).sum()
        estimates[jdx] = (4.0 * by_step[1] - by_step[0]) / 3.0
    cov = float(estimates.mean())
    if equal:
        cov += gamma**2
    stderr = float(estimates.std(ddof=1) / math.sqrt(pairs))
    return cov, stderr

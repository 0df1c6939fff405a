"""Linearized-flow analytics and closed-form history statistics in both phases.

At large depth the backward twist/renormalize recursion stays close to the
identity; tracking the identity and slow-operator coefficients (a_t, b_t)
gives the decay laws of the disturbance probe, an Ornstein-Uhlenbeck-like
Gaussian history law in the encoding phase, and a frozen non-Gaussian law in
the apparatus phase.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import moments
from .algebra import ModelParams, build_isometry, scaling_data, v_super_batch
from .histories import DistributionTable, GridSpec, _table_from_characteristic


@dataclass(frozen=True)
class LinearFlowState:
    """Identity coefficient a (units eta^2), slow-operator coefficient b (units eta)."""

    a: complex
    b: complex
    b_prime: complex


def linear_flow(params: ModelParams, tau: int, t_final: int, w_fields: np.ndarray) -> LinearFlowState:
    """Iterate the linearized backward recursion from (a, b) = (0, 0) at t_final.

    Each step applies the twist with field w_t and one renormalization:
        b' = b + i w cos(theta/2)/cos(theta)
        a  <- (eta_{t-1}^2/eta_t^2) (2a + 2 i w b cos(theta/2) + (b' cos theta)^2 - w^2)
        b  <- (eta_{t-1}/eta_t) 2 cos(theta) b'
    using exact finite-t eta values.  Returns the state at depth tau - 1.
    """
    w_fields = np.asarray(w_fields, dtype=complex)
    if not 1 <= tau <= t_final:
        raise ValueError(f"need 1 <= tau <= T, got tau={tau}, T={t_final}")
    if w_fields.shape != (t_final - tau + 1,):
        raise ValueError(f"w_fields must cover [tau, T] = [{tau}, {t_final}]")
    cos_t = math.cos(params.theta)
    cos_half = math.cos(params.theta / 2)
    c1 = cos_half / cos_t
    a = 0.0 + 0.0j
    b = 0.0 + 0.0j
    b_prime = 0.0 + 0.0j
    # depth 0 is the bare root qubit, <Z^2> = 1
    log2_eta2 = {
        t: (0.0 if t == 0 else moments.log2_eta_squared(params, t))
        for t in range(tau - 1, t_final + 1)
    }
    for t in range(t_final, tau - 1, -1):
        w = w_fields[t - tau]
        b_prime = b + 1j * w * c1
        ratio2 = 2.0 ** (log2_eta2[t - 1] - log2_eta2[t])
        a = ratio2 * (2 * a + 2j * w * b * cos_half + (b_prime * cos_t) ** 2 - w**2)
        b = math.sqrt(ratio2) * 2 * cos_t * b_prime
    return LinearFlowState(a=a, b=b, b_prime=b_prime)


def predict_delta_scaling(params: ModelParams, tau: int, window: int) -> float:
    """Predicted scale (unnormalized) of the L1 disturbance probe at (tau, L)."""
    x = params.x
    if x < 0.5:
        return 2.0 ** (-2 * tau * (1 - x))
    if x < 1.0:
        return 2.0 ** (-tau + window * (1 - 2 * x))
    return 2.0 ** (-tau - window)


def encoding_covariance(params: ModelParams, dt: int) -> float:
    """E[m_t m_{t+dt}] of the encoding-phase Gaussian history law (infinite window).

    The twist-field quadratic form gives, with lam = sqrt(2) cos(theta),
        C(dt) = [dt=0] + cos^2(theta/2) lam^dt / (1 - lam^2)
                + cos^2(theta/2)/cos(theta) [dt>0] lam^dt
    and E[m m'] = C(dt)/c + gamma^2 [dt=0].  Finite-window corrections are
    O(lam^{2(t - tau)}).
    """
    if params.x < 0.5:
        raise ValueError("encoding covariance requires the encoding phase (x > 1/2)")
    if dt < 0:
        raise ValueError(f"dt must be non-negative, got {dt}")
    lam = params.lam
    cos_half_sq = math.cos(params.theta / 2) ** 2
    cov = cos_half_sq * lam**dt / (1 - lam**2)
    if dt == 0:
        cov += 1.0
    else:
        cov += cos_half_sq / math.cos(params.theta) * lam**dt
    cov /= params.c
    if dt == 0:
        cov += params.gamma**2
    return cov


def encoding_covariance_matrix(params: ModelParams, length: int) -> np.ndarray:
    row = np.array([encoding_covariance(params, dt) for dt in range(length)])
    idx = np.abs(np.subtract.outer(np.arange(length), np.arange(length)))
    return row[idx]


def freezing_characteristic(params: ModelParams, w_axis: np.ndarray, s_max: int = 60, tol: float = 1e-8) -> np.ndarray:
    """Characteristic function of the frozen pointer value M.

    Evaluates tr(v^s[e^{i c1 o_x w / eta_s}])/2 with exact eta_s, increasing
    the depth s until the sup change on the grid falls below tol.  The
    identity direction of the quadratic map is expanding (perturbations
    double per step), so round-off grows as 2^s and caps the attainable
    change near 1e-7 in double precision; iteration stops at that floor,
    returning the best iterate, and only fails if the floor exceeds 1e-6.
    """
    if params.x > 0.5:
        raise ValueError("the freezing law exists only in the apparatus phase (x < 1/2)")
    v = build_isometry(params)
    o_x = scaling_data(params).o_x
    c1 = math.cos(params.theta / 2) / math.cos(params.theta)
    augmented = np.concatenate([w_axis, [0.0]])  # phi(0) = 1 normalizes away drift
    prev = None
    best = None
    best_change = math.inf
    rising = 0
    for s in range(1, s_max + 1):
        alpha = c1 * augmented / moments.eta(params, s)
        q = (
            np.cos(alpha)[:, None, None] * np.eye(2, dtype=complex)
            + 1j * np.sin(alpha)[:, None, None] * o_x
        )
        for _ in range(s):
            q = v_super_batch(v, q)
        phi = np.einsum("naa->n", q) / 2.0
        phi = phi[:-1] / phi[-1].real
        if prev is not None:
            change = float(np.abs(phi - prev).max())
            if change < tol:
                return phi
            if change < best_change:
                best_change, best = change, phi
                rising = 0
            elif best_change < 1e-5:  # past the transient; round-off now dominates
                rising += 1
            if rising >= 3:
                break
        prev = phi
    if best is not None and best_change < 1e-6:
        return best
    raise RuntimeError(f"freezing characteristic did not converge within s <= {s_max}")


def freezing_distribution(params: ModelParams, grid: GridSpec, s_max: int = 60, tol: float = 1e-8) -> DistributionTable:
    """Law of the frozen pointer value M, smoothed by the grid's gamma window.

    The returned density is that of M + gamma xi (one Gaussian readout), on the
    same footing as a single-time distribution at large depth; the raw law of M
    is recovered as gamma -> 0.
    """
    grid.validate(params.gamma)
    phi = freezing_characteristic(params, grid.w_axis, s_max=s_max, tol=tol)
    weight = np.exp(-(params.gamma**2) * grid.w_axis**2 / 2.0)
    values = weight * phi
    matrices = (
        values[:, None, None] * np.eye(2, dtype=complex)
    )  # trace carries the law; no conditional structure at this level
    table = _table_from_characteristic(grid, matrices)
    # the round-off floor of the characteristic function (~1e-7) leaks tiny
    # negative ripples into the far tails; zero them out
    ripple = (table.density < 0.0) & (table.density > -1e-6)
    table.density[ripple] = 0.0
    table.q[ripple] = 0.0
    table.meta = {"theta": params.theta, "gamma": params.gamma, "kind": "freezing"}
    return table


def sample_histories(params: ModelParams, length: int, count: int, seed: int) -> np.ndarray:
    """Sample `count` outcome sequences of the closed-form history law, shape (count, length).

    Apparatus phase: a frozen value M (inverse-CDF of the freezing law, drawn
    with a narrow smoothing window) plus i.i.d. gamma-scale Gaussian readout.
    Encoding phase: a zero-mean Gaussian vector with the closed-form Toeplitz
    covariance.
    """
    if length < 1 or count < 1:
        raise ValueError("length and count must be positive")
    rng = np.random.default_rng(seed)
    if moments.classify_phase(params) == "apparatus":
        smear = 0.02
        narrow = ModelParams(theta=params.theta, gamma=smear)
        table = freezing_distribution(narrow, GridSpec.for_gamma(smear, n_w=16384))
        frozen = table.sample_outcomes(count, rng)
        return frozen[:, None] + params.gamma * rng.standard_normal((count, length))
    cov = encoding_covariance_matrix(params, length)
    chol = np.linalg.cholesky(cov + 1e-12 * np.eye(length))
    return rng.standard_normal((count, length)) @ chol.T


def sample_history(params: ModelParams, length: int, seed: int) -> np.ndarray:
    """One sampled outcome sequence of the closed-form history law."""
    return sample_histories(params, length, 1, seed)[0]

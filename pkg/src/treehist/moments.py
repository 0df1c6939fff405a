"""Closed-form one- and two-point functions of the coarse-grained magnetization.

The extensive observable is the sum of Z over all (or a fraction of the)
qubits at depth t.  Its correlation with the measured qubit (mu) and its
second moment (eta^2) follow exact finite-t geometric sums; asymptotic
scaling forms are exposed separately as predictions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .algebra import Z, ModelParams, pair_expectation, scaling_data

FRACTION_MODES = ("full", "compact_subtree", "dilute")


@dataclass(frozen=True)
class FractionSpec:
    """Which fraction f = 2^-t0 of the depth-t register is summed over.

    compact_subtree: all leaves below one depth-t0 ancestor (a contiguous
    index range in depth-first order).  dilute: one leaf per depth-t0 block,
    uniformly spread.  t0 = 0 is the full register regardless of mode.
    """

    mode: str = "full"
    t0: int = 0

    def __post_init__(self):
        if self.mode not in FRACTION_MODES:
            raise ValueError(f"mode must be one of {FRACTION_MODES}, got {self.mode!r}")
        if self.t0 < 0:
            raise ValueError(f"t0 must be non-negative, got {self.t0}")
        if self.mode == "full" and self.t0 != 0:
            raise ValueError("full mode requires t0 = 0")

    @property
    def f(self) -> float:
        return 2.0 ** (-self.t0)


def _log2_pair_sum(params: ModelParams, r_lo: int, r_hi: int) -> float:
    """log2 of sum_{r=r_lo}^{r_hi} 2^{(1-2x) r}, computed without overflow."""
    if r_hi < r_lo:
        return -math.inf
    g = 1.0 - 2.0 * params.x  # log2 of the ratio 2 cos^2(theta)
    n = r_hi - r_lo + 1
    if abs(g) < 1e-15:  # excluded by ModelParams, kept for safety
        return math.log2(n)
    if g > 0:
        # 2^{g r_lo} (2^{g n} - 1)/(2^g - 1): pull out the large head term
        return g * r_lo + g * n + math.log2(1.0 - 2.0 ** (-g * n)) - math.log2(2.0**g - 1.0)
    return g * r_lo + math.log2((1.0 - 2.0 ** (g * n)) / (1.0 - 2.0**g))


def log2_eta_squared(params: ModelParams, t: int) -> float:
    """log2 of the exact second moment of the full-register magnetization."""
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    cos_half_sq = math.cos(params.theta / 2) ** 2
    log2_pairs = t + _log2_pair_sum(params, 0, t - 1) + math.log2(cos_half_sq)
    return float(np.logaddexp2(t, log2_pairs))


def eta_squared(params: ModelParams, t: int) -> float:
    """Exact eta_t^2 = 2^t + 2^t sum_{r<t} 2^{(1-2x)r} cos^2(theta/2)."""
    return float(2.0 ** log2_eta_squared(params, t))


def eta(params: ModelParams, t: int) -> float:
    return float(2.0 ** (0.5 * log2_eta_squared(params, t)))


def eta_squared_asymptotic(params: ModelParams, t: int) -> float:
    """Leading large-t behavior of eta_t^2 (prediction accessor)."""
    cos_half_sq = math.cos(params.theta / 2) ** 2
    if params.x < 0.5:
        return cos_half_sq / math.cos(2 * params.theta) * 2.0 ** (2 * t * (1 - params.x))
    return params.c * 2.0**t


def mu(params: ModelParams, t: int, probe: np.ndarray) -> float:
    """Exact correlation of a system-qubit probe with the magnetization at depth t."""
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    overlap = pair_expectation(probe, scaling_data(params).o_x)
    if abs(overlap.imag) > 1e-12 * max(1.0, abs(overlap.real)):
        raise ValueError("probe must give a real overlap with the scaling operator")
    c1 = math.cos(params.theta / 2) / math.cos(params.theta)
    return c1 * overlap.real * 2.0 ** (t * (1 - params.x))


def fraction_moments(
    params: ModelParams, t: int, frac: FractionSpec, probe: np.ndarray = Z
) -> tuple[float, float]:
    """Exact (mu, eta^2) when the magnetization runs over a fraction of the register.

    Compact subtrees reproduce the full-register sums at reduced depth t - t0;
    dilute fractions shift the pair-distance sum to r >= t0 with a 2^{-2 t0}
    prefactor.  The dilute case is only defined in the apparatus phase.
    """
    if frac.t0 == 0:
        return mu(params, t, probe), eta_squared(params, t)
    if t <= frac.t0:
        raise ValueError(f"need t > t0, got t={t}, t0={frac.t0}")
    mu_f = frac.f * mu(params, t, probe)
    if frac.mode == "compact_subtree":
        return mu_f, eta_squared(params, t - frac.t0)
    if params.x > 0.5:
        raise ValueError("dilute fractions are not supported in the encoding phase")
    cos_half_sq = math.cos(params.theta / 2) ** 2
    log2_pairs = t - 2 * frac.t0 + _log2_pair_sum(params, frac.t0, t - 1) + math.log2(cos_half_sq)
    eta2_f = float(2.0 ** np.logaddexp2(t - frac.t0, log2_pairs))
    return mu_f, eta2_f


def classify_phase(params: ModelParams) -> str:
    """'apparatus' (signal tracks noise, x < 1/2) or 'encoding' (noise wins)."""
    return "apparatus" if params.x < 0.5 else "encoding"


def signal_to_noise(params: ModelParams, t: int, probe: np.ndarray = Z) -> float:
    return mu(params, t, probe) / eta(params, t)

"""Pointer-state ensembles: conditional system states given a coarse outcome.

The non-normalized conditional operators of a DistributionTable turn into
Born-weighted system states; the probability-weighted ensemble average must
reproduce the unconditional reduced state I/2.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebra import X, Y, Z, ModelParams, hermitize
from .histories import DistributionTable, GridSpec, single_time_distribution


@dataclass(frozen=True)
class PointerSample:
    """One outcome m with its density, conditional state, and Bloch vector."""

    m: float
    p: float
    rho: np.ndarray
    bloch: tuple[float, float, float]
    clip: float = 0.0  # magnitude of the negative eigenvalue removed, if any

    @property
    def purity(self) -> float:
        return float(np.trace(self.rho @ self.rho).real)


def conditional_state(table: DistributionTable, m: float) -> PointerSample:
    """Conditional system state at the grid point nearest to m.

    The tabulated operator is transposed, symmetrized, eigenvalue-clipped at
    zero and renormalized; the clip magnitude is recorded on the sample.
    """
    idx = table.nearest_index(m)
    p = float(table.density[idx])
    if p <= 1e-12:
        raise ValueError(f"density at m = {m} is {p:.3e}; conditional state undefined")
    q = table.q[idx].T
    rho = hermitize(q / np.trace(q).real)
    evals, evecs = np.linalg.eigh(rho)
    clip = float(-min(evals.min(), 0.0))
    if clip > 0.0:
        evals = np.clip(evals, 0.0, None)
        rho = (evecs * evals) @ evecs.conj().T
        rho /= np.trace(rho).real
    bloch = tuple(float(np.trace(rho @ sigma).real) for sigma in (X, Y, Z))
    return PointerSample(m=float(table.n[idx]), p=p, rho=rho, bloch=bloch, clip=clip)


def ensemble_sample(
    params: ModelParams, t_final: int, grid: GridSpec, count: int, seed: int
) -> list[PointerSample]:
    """Pointer states at outcomes drawn uniformly with respect to the probability."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    table = single_time_distribution(params, t_final, grid)
    rng = np.random.default_rng(seed)
    outcomes = table.sample_outcomes(count, rng)
    return [conditional_state(table, m) for m in outcomes]


def max_deviation_from_center(table: DistributionTable, p_floor: float = 1e-6) -> float:
    """Largest max-norm distance of rho_m from I/2 over probability-typical outcomes.

    Outcomes with density below p_floor are excluded: conditioning on an
    all-but-impossible outcome yields a genuinely polarized state even when
    the typical ensemble has collapsed to I/2.  At the default floor the
    retained outcomes carry all but < 1e-6 of the probability.
    """
    dev = 0.0
    for idx in np.nonzero(table.density > p_floor)[0]:
        q = table.q[idx].T
        rho = hermitize(q / np.trace(q).real)
        dev = max(dev, float(np.abs(rho - np.eye(2) / 2.0).max()))
    return dev


def completeness_check(table: DistributionTable) -> float:
    """Max-norm residual of the decomposition of unity, int p(m) rho_m dm = I/2."""
    dn = table.n[1] - table.n[0]
    # p(m) rho_m = q(m)^T / 2; the transpose maps the register-side operator
    # to the system state
    total = np.trapezoid(table.q, dx=dn, axis=0).T / 2.0
    return float(np.abs(total - np.eye(2) / 2.0).max())


@dataclass
class LimitStudyReport:
    """Sup-norm distances between ensembles at successive depths and gammas."""

    depth_rows: list = field(default_factory=list)  # (t_a, t_b, gamma, distance)
    gamma_rows: list = field(default_factory=list)  # (gamma_a, gamma_b, t, distance)

    def monotone(self) -> bool:
        depth_ok = all(
            a[3] >= b[3] - 1e-12 for a, b in zip(self.depth_rows, self.depth_rows[1:])
        )
        gamma_ok = all(
            a[3] >= b[3] - 1e-12 for a, b in zip(self.gamma_rows, self.gamma_rows[1:])
        )
        return depth_ok and gamma_ok


def _ensemble_distance(a: DistributionTable, b: DistributionTable) -> float:
    """Sup over the shared outcome grid of the conditional-operator difference."""
    if len(a.n) != len(b.n) or abs(a.n[0] - b.n[0]) > 1e-12:
        raise ValueError("tables must share an outcome grid")
    return float(np.abs(a.q - b.q).max())


def limit_study(
    params: ModelParams, t_list: list[int], gamma_list: list[float], grid: GridSpec | None = None
) -> LimitStudyReport:
    """Convergence of the pointer ensemble towards its small-gamma, large-t limit."""
    if not t_list or not gamma_list:
        raise ValueError("t_list and gamma_list must be non-empty")
    if grid is None:
        grid = GridSpec.for_gamma(min(gamma_list))
    report = LimitStudyReport()
    gamma_ref = min(gamma_list)
    tables = {t: single_time_distribution(params, t, grid, gamma=gamma_ref) for t in t_list}
    for t_a, t_b in zip(t_list, t_list[1:]):
        report.depth_rows.append((t_a, t_b, gamma_ref, _ensemble_distance(tables[t_a], tables[t_b])))
    t_ref = max(t_list)
    by_gamma = {g: single_time_distribution(params, t_ref, grid, gamma=g) for g in gamma_list}
    ordered = sorted(gamma_list, reverse=True)
    for g_a, g_b in zip(ordered, ordered[1:]):
        report.gamma_rows.append((g_a, g_b, t_ref, _ensemble_distance(by_gamma[g_a], by_gamma[g_b])))
    return report

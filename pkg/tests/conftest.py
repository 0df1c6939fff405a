"""Shared oracle helpers for cross-validating the fast paths."""
from __future__ import annotations

import numpy as np

from treehist import oracle


def oracle_marginal_density(theta: float, gamma: float, n_axis: np.ndarray, m2_points: int = 512) -> np.ndarray:
    """Outcome density at depth 3 with a third-party measurement at depth 2,
    by brute-force quadrature over the intermediate outcome."""
    m2_axis = np.linspace(-6.0, 6.0, m2_points)
    v = oracle._isometry_matrix(theta)
    base = oracle.oracle_evolve(theta, 2)
    density = np.zeros_like(n_axis)
    for m2 in m2_axis:
        s2 = oracle.oracle_kraus(base, m2, gamma)
        s3 = oracle.OracleState(theta, 3, oracle._apply_layer(s2.amps, 4, v))
        density += oracle.single_time_density(s3, n_axis, gamma)
    return density * (m2_axis[1] - m2_axis[0])

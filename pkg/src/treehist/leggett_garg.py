"""Two-time Keldysh correlators of product involutions and the Leggett-Garg combination.

Product operators Q^{x 2^t} with Q^2 = I evaluate through the same quadratic
superoperator as everything else; the near-symmetry choice of Q makes the
Leggett-Garg inequality violable at arbitrarily late times.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .algebra import X, Y, Z, ModelParams, build_isometry, v_super


@dataclass(frozen=True)
class LGConfig:
    """Unit vector (a, b, c) tilted off the flip symmetry axis by epsilon.

    epsilon = max(sqrt(2), 2 cos theta)^{-t_m} places the violation window
    near depth t_m; computed in log space to survive large t_m.  The
    components (a, b, c) = (cos e, sin e cos(theta/2), sin e sin(theta/2))
    refer to the frame of the code basis e^{-iX theta/4}|k>; conjugating back
    to the lab frame collapses them to cos(e) X + sin(e) Y.  Read in the lab
    frame instead, the same triple fails to violate the inequality for
    theta > pi/4.
    """

    theta: float
    t_m: int
    epsilon: float
    abc: tuple[float, float, float]

    @classmethod
    def for_params(cls, params: ModelParams, t_m: int) -> "LGConfig":
        if t_m < 0:
            raise ValueError(f"t_m must be non-negative, got {t_m}")
        base = max(math.sqrt(2.0), 2.0 * math.cos(params.theta))
        eps = math.exp(-t_m * math.log(base))
        abc = (
            math.cos(eps),
            math.sin(eps) * math.cos(params.theta / 2),
            math.sin(eps) * math.sin(params.theta / 2),
        )
        return cls(theta=params.theta, t_m=t_m, epsilon=eps, abc=abc)

    def operator(self) -> np.ndarray:
        a, b, c = self.abc
        rot = math.cos(self.theta / 4) * np.eye(2, dtype=complex) - 1j * math.sin(self.theta / 4) * X
        return rot.conj().T @ (a * X + b * Y + c * Z) @ rot


def keldysh_correlator(params: ModelParams, s: int, t: int, q: np.ndarray) -> float:
    """Re tr(v^s[Q v^{t-s}[Q]])/2 for an involution Q (the /2 makes C_tt = 1)."""
    if not 0 <= s <= t:
        raise ValueError(f"need 0 <= s <= t, got s={s}, t={t}")
    if np.abs(q @ q - np.eye(2)).max() > 1e-10:
        raise ValueError("Q must square to the identity")
    v = build_isometry(params)
    inner = q.astype(complex)
    for _ in range(t - s):
        inner = v_super(v, inner)
    outer = q @ inner
    for _ in range(s):
        outer = v_super(v, outer)
    return float(np.trace(outer).real / 2.0)


def lg_value(params: ModelParams, times: tuple[int, int, int, int], q: np.ndarray) -> float:
    """C12 + C23 + C34 - C14; classically bounded by 2."""
    t1, t2, t3, t4 = times
    if not t1 < t2 < t3 < t4:
        raise ValueError(f"times must be strictly increasing, got {times}")
    c12 = keldysh_correlator(params, t1, t2, q)
    c23 = keldysh_correlator(params, t2, t3, q)
    c34 = keldysh_correlator(params, t3, t4, q)
    c14 = keldysh_correlator(params, t1, t4, q)
    return c12 + c23 + c34 - c14


def lg_scan(params: ModelParams, t_m: int, t_range: range, q: np.ndarray | None = None) -> list[dict]:
    """Evaluate the Leggett-Garg combination on windows (t, t+1, t+2, t+3).

    Uses the late-time violation operator for t_m unless an explicit
    involution q is given (e.g. Z, whose correlators are classical).
    """
    if q is None:
        q = LGConfig.for_params(params, t_m).operator()
    rows = []
    for t in t_range:
        times = (t, t + 1, t + 2, t + 3)
        c12 = keldysh_correlator(params, times[0], times[1], q)
        c23 = keldysh_correlator(params, times[1], times[2], q)
        c34 = keldysh_correlator(params, times[2], times[3], q)
        c14 = keldysh_correlator(params, times[0], times[3], q)
        rows.append(
            {"t": t, "C12": c12, "C23": c23, "C34": c34, "C14": c14, "LG": c12 + c23 + c34 - c14}
        )
    return rows

"""Exact 2x2 building blocks: the tree isometry, its superoperators, and scaling data.

Everything downstream (moments, outcome distributions, correlators) reduces to
the quadratic superoperator v[Q] = v^dag (Q x Q) v acting on 2x2 matrices,
together with diagonal measurement twists e^{iuZ/eta} Q e^{-ivZ/eta}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)

THETA_CRITICAL = math.pi / 4


@dataclass(frozen=True)
class ModelParams:
    """Tree angle theta plus the measurement imprecision gamma.

    theta = 0 is the repetition code; theta_c = pi/4 separates the apparatus
    phase (x < 1/2) from the encoding phase (x > 1/2).  theta = pi/4 itself
    (x = 1/2, logarithmic corrections) is rejected.
    """

    theta: float
    gamma: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.theta < math.pi / 2:
            raise ValueError(f"theta must lie in [0, pi/2), got {self.theta}")
        if abs(self.theta - THETA_CRITICAL) < 1e-12:
            raise ValueError("theta = pi/4 (x = 1/2) is not supported")
        if not self.gamma > 0.0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")

    @property
    def x(self) -> float:
        """Scaling dimension of the slow operator, -log2 cos(theta)."""
        return -math.log2(math.cos(self.theta))

    @property
    def theta_c(self) -> float:
        return THETA_CRITICAL

    @property
    def lam(self) -> float:
        """One-step decay factor sqrt(2) cos(theta) of the encoding-phase correlations."""
        return math.sqrt(2.0) * math.cos(self.theta)

    @property
    def c(self) -> float:
        """Encoding-phase variance constant 1 - cos^2(theta/2)/cos(2 theta)."""
        return 1.0 - math.cos(self.theta / 2) ** 2 / math.cos(2 * self.theta)

    @property
    def kappa(self) -> float:
        """Asymptotic correlation decay rate (x - 1/2) ln 2."""
        return (self.x - 0.5) * math.log(2.0)


def build_isometry(params: ModelParams) -> np.ndarray:
    """Return the one-to-two qubit isometry as an explicit 4x2 matrix.

    v sends |l> to sum_k (e^{-iX theta/4}|k>)^{x2} <k|e^{-iX theta/4}|l>; rows
    are indexed by the output pair (b, c) in row-major order.
    """
    theta = params.theta
    rot = math.cos(theta / 4) * I2 - 1j * math.sin(theta / 4) * X
    v = np.zeros((4, 2), dtype=complex)
    for k in range(2):
        col = rot[:, k]
        v += np.outer(np.kron(col, col), rot[k, :])
    return v


def v_super(v: np.ndarray, q: np.ndarray) -> np.ndarray:
    """One renormalization step v[Q] = v^dag (Q kron Q) v.  Unital: v[I] = I."""
    return v.conj().T @ np.kron(q, q) @ v


def v_super_batch(v: np.ndarray, q: np.ndarray) -> np.ndarray:
    """v_super applied to a batch of 2x2 matrices of shape (..., 2, 2)."""
    lead = q.shape[:-2]
    qq = np.einsum("...ij,...kl->...ikjl", q, q).reshape(*lead, 4, 4)
    return v.conj().T @ (qq @ v)


def kraus_twist(q: np.ndarray, u: float, v_field: float, eta: float) -> np.ndarray:
    """Diagonal twist e^{iuZ/eta} Q e^{-i v_field Z/eta} in closed form."""
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    pu = np.exp(1j * u / eta)
    pv = np.exp(-1j * v_field / eta)
    phases = np.array([[pu * pv, pu / pv], [pv / pu, 1 / (pu * pv)]])
    return q * phases


def pair_expectation(a: np.ndarray, b: np.ndarray) -> complex:
    """<A_S x B_A> in the maximally entangled pair, tr(A B^T)/2."""
    return complex((a * b).sum() / 2.0)


@dataclass(frozen=True)
class ScalingData:
    """Scaling operators of the isometry and their fusion coefficients.

    o_x is the unique operator with finite nonzero scaling dimension x; o_eps
    and o_iota renormalize to zero (infinite dimension) and only matter through
    fusions at adjacent sites.  `ope` collects the fusion coefficients of the
    infinite-dimension channels; fusions into traceless operators never reach
    a correlation function at graph distance > 0.
    """

    o_x: np.ndarray
    x: float
    c_xx_0: float
    o_eps: np.ndarray
    o_iota: np.ndarray
    ope: dict = field(default_factory=dict)


def scaling_data(params: ModelParams) -> ScalingData:
    half = params.theta / 2
    cos_t = math.cos(params.theta)
    return ScalingData(
        o_x=Z * math.cos(half) + Y * math.sin(half),
        x=params.x,
        c_xx_0=cos_t**2,
        o_eps=X.copy(),
        o_iota=Z * math.sin(half) + Y * math.cos(half),
        ope={
            "iota_iota_to_eps": -1.0,
            "iota_eps_to_iota": 1.0 / cos_t,
            "eps_eps_to_eps": 1.0,
            "x_x_to_eps": -math.sin(params.theta) ** 2,
            "x_iota_to_eps": -math.sin(params.theta),
            "iota_eps_to_x": -math.tan(params.theta),
        },
    )


def fusion_coefficients(params: ModelParams, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Expand v^dag (A x B) v in the operator basis (I, o_x, o_eps, o_iota)."""
    data = scaling_data(params)
    v = build_isometry(params)
    basis = np.stack([I2, data.o_x, data.o_eps, data.o_iota]).reshape(4, 4).T
    return np.linalg.solve(basis, v_super_like(v, a, b).reshape(4))


def v_super_like(v: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Two-site fusion v^dag (A kron B) v for distinct operators A, B."""
    return v.conj().T @ np.kron(a, b) @ v


def hermitize(m: np.ndarray) -> np.ndarray:
    """Symmetrize (M + M^dag)/2, batched over leading axes."""
    return (m + np.conj(np.swapaxes(m, -1, -2))) / 2.0


def is_hermitian(m: np.ndarray, tol: float = 1e-12) -> bool:
    return bool(np.abs(m - m.conj().T).max() <= tol)


def is_density(m: np.ndarray, tol: float = 1e-10) -> bool:
    """Hermitian, unit trace, eigenvalues >= -tol."""
    if not is_hermitian(m, 1e-12):
        return False
    if abs(np.trace(m).real - 1.0) > 1e-10 or abs(np.trace(m).imag) > 1e-12:
        return False
    return bool(np.linalg.eigvalsh(hermitize(m)).min() >= -tol)

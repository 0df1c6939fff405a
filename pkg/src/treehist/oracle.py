"""Brute-force statevector simulation of the full many-body model at depth <= 4.

Ground truth for every fast path.  The system qubit is the slowest index;
apparatus qubits are kept in depth-first tree order so that compact subtree
fractions are contiguous index ranges.  All expectation values here are
computed from amplitudes only, independently of the closed-form moments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_DEPTH = 4  # memory guard: at most 2**17 amplitudes


@dataclass
class OracleState:
    """Statevector over the system qubit and 2^t apparatus qubits."""

    theta: float
    t: int
    amps: np.ndarray  # shape (2, 2**n_apparatus), system index first

    @property
    def n_apparatus(self) -> int:
        return 2**self.t

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def copy(self) -> "OracleState":
        return OracleState(self.theta, self.t, self.amps.copy())


@lru_cache(maxsize=None)
def magnetization_values(n_qubits: int) -> np.ndarray:
    """Total Z of each computational basis configuration of n_qubits."""
    idx = np.arange(2**n_qubits, dtype=np.uint32)
    return n_qubits - 2.0 * np.bitwise_count(idx).astype(np.int64)


def _isometry_matrix(theta: float) -> np.ndarray:
    i2 = np.eye(2, dtype=complex)
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    rot = math.cos(theta / 4) * i2 - 1j * math.sin(theta / 4) * x
    v = np.zeros((4, 2), dtype=complex)
    for k in range(2):
        col = rot[:, k]
        v += np.outer(np.kron(col, col), rot[k, :])
    return v


def _apply_layer(amps: np.ndarray, n: int, v: np.ndarray) -> np.ndarray:
    """Apply v to every apparatus qubit; each qubit's two children stay in place."""
    psi = amps.reshape((2,) + (2,) * n)
    for j in range(n):
        axis = 1 + j
        psi = np.moveaxis(np.tensordot(psi, v, axes=([axis], [1])), -1, axis)
    # each axis of dimension 4 is the (left, right) child pair in row-major order
    return psi.reshape(2, 4**n).reshape(2, -1)


def oracle_evolve(theta: float, t_final: int) -> OracleState:
    """Evolve the Bell pair through t_final isometry layers."""
    if not 0 <= t_final <= MAX_DEPTH:
        raise ValueError(f"t_final must lie in [0, {MAX_DEPTH}], got {t_final}")
    amps = np.zeros((2, 2), dtype=complex)
    amps[0, 0] = amps[1, 1] = 1 / math.sqrt(2)
    v = _isometry_matrix(theta)
    n = 1
    for _ in range(t_final):
        amps = _apply_layer(amps, n, v)
        n *= 2
    state = OracleState(theta, t_final, amps)
    assert abs(state.norm - 1.0) < 1e-10, "statevector norm drifted"
    return state


@lru_cache(maxsize=None)
def eta_oracle(theta: float, t: int) -> float:
    """Magnetization uncertainty computed from the statevector itself."""
    state = oracle_evolve(theta, t)
    o = magnetization_values(state.n_apparatus)
    prob = np.abs(state.amps) ** 2
    return float(math.sqrt((prob.sum(axis=0) * o**2).sum()))


def oracle_kraus(state: OracleState, m: float, gamma: float, eta: float | None = None) -> OracleState:
    """Apply the smeared magnetization measurement; returns a non-normalized state.

    The squared norm of the result is the outcome density at m.
    """
    if eta is None:
        eta = eta_oracle(state.theta, state.t)
    o = magnetization_values(state.n_apparatus)
    w = (2 * math.pi * gamma**2) ** (-0.25) * np.exp(-((o / eta - m) ** 2) / (4 * gamma**2))
    return OracleState(state.theta, state.t, state.amps * w[None, :])


def oracle_history(
    theta: float, tau: int, t_final: int, gamma: float, m_sequence
) -> tuple[float, np.ndarray]:
    """Probability density of an outcome sequence on [tau, t_final] and the
    conditional system state.

    Layers and measurements alternate: evolve to depth tau, measure, then one
    layer and one measurement per step up to t_final.
    """
    m_sequence = np.asarray(m_sequence, dtype=float)
    if not 1 <= tau <= t_final <= MAX_DEPTH:
        raise ValueError(f"need 1 <= tau <= T <= {MAX_DEPTH}, got tau={tau}, T={t_final}")
    if m_sequence.shape != (t_final - tau + 1,):
        raise ValueError(f"m_sequence must have length {t_final - tau + 1}")
    state = oracle_evolve(theta, tau)
    state = oracle_kraus(state, m_sequence[0], gamma)
    v = _isometry_matrix(theta)
    for step, m in enumerate(m_sequence[1:], start=1):
        t = tau + step
        state.amps = _apply_layer(state.amps, 2 ** (t - 1), v)
        state.t = t
        state = oracle_kraus(state, m, gamma, eta=eta_oracle(theta, t))
    p = state.norm**2
    rho = state.amps @ state.amps.conj().T / p
    return p, rho


def z_histogram(state: OracleState) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Aggregate the state by total magnetization o.

    Returns (o values, probability weights P(o), system blocks R(o)) with
    R(o)[s, s'] = sum over configurations of amps[s] conj(amps[s']); summing R
    over o gives the reduced density matrix of the system.
    """
    n = state.n_apparatus
    k = np.bitwise_count(np.arange(2**n, dtype=np.uint32)).astype(np.intp)
    o_values = (n - 2 * np.arange(n + 1)).astype(np.float64)
    blocks = np.zeros((n + 1, 2, 2), dtype=complex)
    for s in range(2):
        for s2 in range(2):
            w = state.amps[s] * state.amps[s2].conj()
            blocks[:, s, s2] = np.bincount(k, weights=w.real, minlength=n + 1) + 1j * np.bincount(
                k, weights=w.imag, minlength=n + 1
            )
    weights = np.einsum("oss->o", blocks).real
    return o_values, weights, blocks


def single_time_density(state: OracleState, m_axis: np.ndarray, gamma: float, eta: float | None = None) -> np.ndarray:
    """Exact outcome density at depth state.t on a grid of m values."""
    if eta is None:
        eta = eta_oracle(state.theta, state.t)
    o, weights, _ = z_histogram(state)
    kernel = np.exp(-((m_axis[:, None] - o[None, :] / eta) ** 2) / (2 * gamma**2))
    return kernel @ weights / math.sqrt(2 * math.pi * gamma**2)


def conditional_states(state: OracleState, m_axis: np.ndarray, gamma: float, eta: float | None = None) -> np.ndarray:
    """Non-normalized conditional system states on a grid of m values.

    Entry [i] equals the partial trace of K_m |psi><psi| K_m at m_axis[i];
    its trace is the outcome density there.
    """
    if eta is None:
        eta = eta_oracle(state.theta, state.t)
    o, _, blocks = z_histogram(state)
    kernel = np.exp(-((m_axis[:, None] - o[None, :] / eta) ** 2) / (2 * gamma**2))
    return np.einsum("mo,oab->mab", kernel, blocks) / math.sqrt(2 * math.pi * gamma**2)


def magnetization_moments(state: OracleState) -> tuple[float, float]:
    """(<Z_S O>, <O^2>) for the full-register magnetization O."""
    o = magnetization_values(state.n_apparatus)
    prob = np.abs(state.amps) ** 2
    return float(((prob[0] - prob[1]) * o).sum()), float((prob.sum(axis=0) * o**2).sum())


def fraction_magnetization(t: int, qubits: np.ndarray) -> np.ndarray:
    """Magnetization of a qubit subset, per basis configuration at depth t."""
    n = 2**t
    idx = np.arange(2**n, dtype=np.uint64)
    mask = np.uint64(0)
    for j in qubits:
        mask |= np.uint64(1) << np.uint64(n - 1 - int(j))
    pop = np.bitwise_count(idx & mask).astype(np.float64)
    return len(qubits) - 2 * pop


def restricted_moments(state: OracleState, qubits: np.ndarray) -> tuple[float, float]:
    """(<Z_S O_F>, <O_F^2>) for the magnetization over the given qubits."""
    o = fraction_magnetization(state.t, qubits)
    prob = np.abs(state.amps) ** 2
    return float(((prob[0] - prob[1]) * o).sum()), float((prob.sum(axis=0) * o**2).sum())


def apply_to_all_apparatus(state: OracleState, op: np.ndarray) -> OracleState:
    """Apply a single-qubit operator to every apparatus qubit."""
    n = state.n_apparatus
    psi = state.amps.reshape((2,) + (2,) * n)
    for j in range(n):
        axis = 1 + j
        psi = np.moveaxis(np.tensordot(psi, op, axes=([axis], [1])), -1, axis)
    return OracleState(state.theta, state.t, psi.reshape(2, -1))


def keldysh_oracle(theta: float, s: int, t: int, op: np.ndarray) -> float:
    """Two-time correlator of the product operator op^{x 2^t}, by direct evolution."""
    if not 0 <= s <= t <= MAX_DEPTH:
        raise ValueError(f"need 0 <= s <= t <= {MAX_DEPTH}")
    v = _isometry_matrix(theta)
    left = apply_to_all_apparatus(oracle_evolve(theta, s), op)
    n = 2**s
    for step in range(t - s):
        left.amps = _apply_layer(left.amps, n, v)
        n *= 2
    left.t = t
    right = apply_to_all_apparatus(oracle_evolve(theta, t), op)
    return float(np.vdot(left.amps, right.amps).real)

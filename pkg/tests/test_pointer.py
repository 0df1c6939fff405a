import math

import numpy as np
import pytest

from treehist.algebra import ModelParams
from treehist.histories import GridSpec, single_time_distribution
from treehist.pointer import (
    completeness_check,
    conditional_state,
    ensemble_sample,
    limit_study,
    max_deviation_from_center,
)

GRID05 = GridSpec.for_gamma(0.05)


def test_repetition_code_pole():
    table = single_time_distribution(ModelParams(theta=0.0, gamma=0.05), 4, GRID05)
    sample = conditional_state(table, 1.0)
    assert np.abs(sample.rho - np.diag([1.0, 0.0])).max() < 1e-3
    assert sample.bloch[2] == pytest.approx(1.0, abs=1e-3)
    assert sample.purity == pytest.approx(1.0, abs=1e-3)


def test_undefined_state_error():
    table = single_time_distribution(ModelParams(theta=0.0, gamma=0.05), 4, GRID05)
    with pytest.raises(ValueError):
        conditional_state(table, 5.0)  # density ~ e^{-3200}


def test_sample_invariants():
    table = single_time_distribution(ModelParams(theta=0.15 * math.pi, gamma=0.05), 12, GRID05)
    for m in (-1.0, -0.3, 0.0, 0.4, 1.1):
        s = conditional_state(table, m)
        assert np.linalg.norm(s.bloch) <= 1 + 1e-8
        assert abs(np.trace(s.rho).real - 1) < 1e-12
        assert np.abs(s.rho - s.rho.conj().T).max() < 1e-12
        assert np.linalg.eigvalsh(s.rho).min() >= -1e-12
        assert s.clip < 1e-7


def test_superposition_survives_at_null_outcome():
    table = single_time_distribution(ModelParams(theta=0.15 * math.pi, gamma=0.05), 20, GRID05)
    sample = conditional_state(table, 0.0)
    assert sample.bloch[0] > 0.3
    assert abs(sample.bloch[1]) < 1e-8 and abs(sample.bloch[2]) < 1e-8


def test_encoding_phase_pointer_states_trivialize():
    table = single_time_distribution(ModelParams(theta=0.3 * math.pi, gamma=0.05), 20, GRID05)
    assert max_deviation_from_center(table) <= 0.05


def test_completeness():
    for theta, t_final, bound in ((0.0, 4, 1e-6), (0.05 * math.pi, 20, 1e-4), (0.15 * math.pi, 20, 1e-4), (0.3 * math.pi, 20, 1e-4)):
        table = single_time_distribution(ModelParams(theta=theta, gamma=0.05), t_final, GRID05)
        assert completeness_check(table) <= bound


def test_z2_ensemble_symmetry():
    # m -> -m together with bloch (x, y, z) -> (x, -y, -z), within grid tolerance
    table = single_time_distribution(ModelParams(theta=0.15 * math.pi, gamma=0.05), 12, GRID05)
    n = len(table.n)
    for idx in range(n // 2 + 5, n // 2 + 200, 37):
        mirror = n - idx
        plus = conditional_state(table, float(table.n[idx]))
        minus = conditional_state(table, float(table.n[mirror]))
        assert plus.m == pytest.approx(-minus.m, abs=1e-12)
        assert plus.p == pytest.approx(minus.p, rel=1e-6)
        bx, by, bz = plus.bloch
        cx, cy, cz = minus.bloch
        assert bx == pytest.approx(cx, abs=1e-5)
        assert by == pytest.approx(-cy, abs=1e-5)
        assert bz == pytest.approx(-cz, abs=1e-5)


class TestEnsemble:
    def test_near_repetition_concentrates_at_poles(self):
        samples = ensemble_sample(ModelParams(theta=0.05 * math.pi, gamma=0.05), 20, GRID05, 400, seed=9)
        bloch = np.array([s.bloch for s in samples])
        dist = np.minimum(
            np.linalg.norm(bloch - [0, 0, 1], axis=1), np.linalg.norm(bloch - [0, 0, -1], axis=1)
        )
        assert (dist < 0.2).mean() >= 0.9

    def test_repetition_code_two_states(self):
        samples = ensemble_sample(ModelParams(theta=0.0, gamma=0.05), 6, GRID05, 400, seed=9)
        z_values = np.array([s.bloch[2] for s in samples])
        assert set(np.sign(np.round(z_values, 6))) == {-1.0, 1.0}
        assert np.abs(np.abs(z_values) - 1.0).max() < 1e-6
        frac = (z_values > 0).mean()
        assert abs(frac - 0.5) < 4 * math.sqrt(0.25 / 400)

    def test_encoding_phase_collapses_to_center(self):
        samples = ensemble_sample(ModelParams(theta=0.3 * math.pi, gamma=0.05), 20, GRID05, 400, seed=9)
        bloch = np.array([s.bloch for s in samples])
        assert np.linalg.norm(bloch, axis=1).max() < 0.1

    def test_count_validation(self):
        with pytest.raises(ValueError):
            ensemble_sample(ModelParams(theta=0.1, gamma=0.05), 4, GRID05, 0, seed=1)


class TestLimitStudy:
    def test_converges_in_depth_and_gamma(self):
        report = limit_study(
            ModelParams(theta=0.15 * math.pi, gamma=0.05), [16, 18, 20], [0.05, 0.025]
        )
        (d1, d2) = report.depth_rows
        assert d2[3] < 1e-3  # t = 18 vs 20
        assert d2[3] <= d1[3] + 1e-12
        assert report.gamma_rows[0][3] < 1e-2  # gamma 0.05 vs 0.025 at t = 20
        assert report.monotone()

    def test_repetition_code_depth_independent(self):
        report = limit_study(ModelParams(theta=0.0, gamma=0.05), [2, 3, 4], [0.05])
        for row in report.depth_rows:
            assert row[3] < 1e-12

    def test_validation(self):
        with pytest.raises(ValueError):
            limit_study(ModelParams(theta=0.1, gamma=0.05), [], [0.05])

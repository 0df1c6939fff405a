import math

import numpy as np
import pytest

from treehist import moments
from treehist.algebra import ModelParams, scaling_data
from treehist.histories import GridSpec, HistoryKernelInput, history_kernel_state, single_time_distribution, two_time_covariance
from treehist.stats import (
    LinearFlowState,
    encoding_covariance,
    encoding_covariance_matrix,
    freezing_distribution,
    linear_flow,
    predict_delta_scaling,
    sample_histories,
    sample_history,
)


class TestLinearFlow:
    def test_zero_fields_stay_zero(self):
        state = linear_flow(ModelParams(theta=0.2 * math.pi), 3, 8, np.zeros(6))
        assert state.a == 0 and state.b == 0

    def test_single_final_field_closed_form(self):
        # unrolling the recursion for one field at the last time gives
        # b_{tau-1} = (2 cos theta)^{T-tau+1} (eta_{tau-1}/eta_T) i w c1
        p = ModelParams(theta=0.3 * math.pi)
        tau, t_final, w = 3, 7, 0.8
        fields = np.zeros(t_final - tau + 1)
        fields[-1] = w
        state = linear_flow(p, tau, t_final, fields)
        c1 = math.cos(p.theta / 2) / math.cos(p.theta)
        eta_ratio = moments.eta(p, tau - 1) / moments.eta(p, t_final)
        expect = (2 * math.cos(p.theta)) ** (t_final - tau + 1) * eta_ratio * 1j * w * c1
        assert state.b == pytest.approx(expect, rel=1e-12)

    def test_identity_coefficient_exact_at_one_step(self):
        # v[e^{iwZ/eta}] has identity part 1 - (1 + cos^2(theta/2)) w^2/eta^2 + O(w^4):
        # fixes the cos^2(theta) factor on the (b')^2 term of the update
        for theta in (0.15 * math.pi, 0.3 * math.pi, 0.42 * math.pi):
            p = ModelParams(theta=theta)
            w = 1e-3
            state = linear_flow(p, 1, 1, np.array([w]))
            expect = -(w**2) * (1 + math.cos(theta / 2) ** 2) / moments.eta_squared(p, 1)
            # a is reported in units of eta_{tau-1}^2 = 1 at depth 0
            assert state.a.real == pytest.approx(expect, rel=1e-5)
            assert abs(state.a.imag) < 1e-18
            kernel = history_kernel_state(p, 1, 1, HistoryKernelInput(u_fields=[w / 2], v_fields=[-w / 2]))
            assert np.trace(kernel).real / 2 - 1 == pytest.approx(expect, rel=1e-5)

    def test_reproduces_kernel_to_second_order(self):
        """Residual after removing the tracked coefficients shrinks at the
        predicted per-step rate: 2^{-2(1-x)} in the apparatus phase, 1/2 in
        the encoding phase (within 20%, at depths past the transient)."""
        rng = np.random.default_rng(99)
        window = 3
        w = rng.normal(0, 3.0, size=window + 1)
        cases = (
            (0.15 * math.pi, (6, 8, 10), None),
            (0.3 * math.pi, (12, 14, 16), 0.5),
        )
        for theta, taus, expect in cases:
            p = ModelParams(theta=theta)
            if expect is None:
                expect = 2.0 ** (-2 * (1 - p.x))
            o_x = scaling_data(p).o_x
            errors = []
            for tau in taus:
                t_final = tau + window
                fields = HistoryKernelInput(u_fields=w / 2, v_fields=-w / 2)
                kernel = history_kernel_state(p, tau, t_final, fields)
                state = linear_flow(p, tau, t_final, w)
                eta_ref = moments.eta(p, tau - 1)
                ansatz = np.eye(2, dtype=complex) + state.a * eta_ref**-2 * np.eye(2) + state.b * eta_ref**-1 * o_x
                errors.append(np.abs(kernel - ansatz).max())
            for lo, hi in zip(taus, taus[1:]):
                per_step = (errors[taus.index(hi)] / errors[taus.index(lo)]) ** (1.0 / (hi - lo))
                assert abs(per_step - expect) / expect < 0.20


class TestPredictDeltaScaling:
    def test_apparatus_tau_slope(self):
        p = ModelParams(theta=0.15 * math.pi)
        ratio = predict_delta_scaling(p, 7, 3) / predict_delta_scaling(p, 6, 3)
        assert math.log2(ratio) == pytest.approx(-2 * (1 - p.x), abs=1e-12)

    def test_intermediate_l_slope(self):
        p = ModelParams(theta=0.3 * math.pi)
        ratio = predict_delta_scaling(p, 6, 4) / predict_delta_scaling(p, 6, 3)
        assert math.log2(ratio) == pytest.approx(1 - 2 * p.x, abs=1e-12)
        tau_ratio = predict_delta_scaling(p, 7, 3) / predict_delta_scaling(p, 6, 3)
        assert math.log2(tau_ratio) == pytest.approx(-1.0, abs=1e-12)

    def test_steep_phase_l_slope(self):
        p = ModelParams(theta=0.45 * math.pi)
        assert p.x > 1
        ratio = predict_delta_scaling(p, 6, 4) / predict_delta_scaling(p, 6, 3)
        assert math.log2(ratio) == pytest.approx(-1.0, abs=1e-12)


class TestEncodingCovariance:
    def test_rejects_apparatus_phase(self):
        with pytest.raises(ValueError):
            encoding_covariance(ModelParams(theta=0.15 * math.pi), 1)

    def test_equal_time_value(self):
        p = ModelParams(theta=0.3 * math.pi, gamma=0.1)
        assert encoding_covariance(p, 0) == pytest.approx(1.0 + 0.01, abs=1e-12)

    def test_asymptotic_decay_rate(self):
        p = ModelParams(theta=0.3 * math.pi)
        for dt in (1, 4, 9):
            ratio = encoding_covariance(p, dt + 1) / encoding_covariance(p, dt)
            assert math.log2(ratio) == pytest.approx(-(p.x - 0.5), abs=1e-12)

    def test_correlation_time_diverges_near_threshold(self):
        near = ModelParams(theta=0.2501 * math.pi)
        far = ModelParams(theta=0.4 * math.pi)
        assert 1.0 / near.kappa > 100.0 / far.kappa

    def test_matches_finite_difference_path(self):
        """Independent check through the twist-field characteristic function."""
        for theta in (0.3 * math.pi, 0.45 * math.pi):
            p = ModelParams(theta=theta, gamma=0.1)
            for dt in (0, 1, 2):
                cov, se = two_time_covariance(p, 22, 22 + dt, samples=600, seed=3, tau=8, step=0.2)
                pred = encoding_covariance(p, dt)
                assert abs(cov - pred) < max(5 * se, 2e-3)

    def test_toeplitz_kernel_psd(self):
        for theta in (0.27 * math.pi, 0.3 * math.pi, 0.45 * math.pi):
            cov = encoding_covariance_matrix(ModelParams(theta=theta, gamma=0.1), 64)
            assert np.linalg.eigvalsh(cov).min() >= -1e-10


class TestFreezing:
    def test_rejects_encoding_phase(self):
        with pytest.raises(ValueError):
            freezing_distribution(ModelParams(theta=0.3 * math.pi, gamma=0.05), GridSpec.for_gamma(0.05))

    def test_normalization_and_symmetry(self):
        p = ModelParams(theta=0.15 * math.pi, gamma=0.05)
        table = freezing_distribution(p, GridSpec.for_gamma(0.05))
        assert table.integral() == pytest.approx(1.0, abs=1e-4)
        assert table.density.min() > -1e-8
        d = table.density
        assert np.abs(d[1:] - d[1:][::-1]).max() < 1e-6  # symmetric under m -> -m

    def test_second_moment(self):
        p = ModelParams(theta=0.15 * math.pi, gamma=0.05)
        table = freezing_distribution(p, GridSpec.for_gamma(0.05))
        second = np.trapezoid(table.n**2 * table.density, table.n)
        # law of M has unit second moment; the gamma window adds gamma^2
        assert second == pytest.approx(1.0 + 0.05**2, abs=2e-4)

    def test_near_repetition_code_two_point_masses(self):
        p = ModelParams(theta=0.01, gamma=0.05)
        table = freezing_distribution(p, GridSpec.for_gamma(0.05))
        positive = table.n > 0
        mass_plus = np.trapezoid(np.where(positive, table.density, 0.0), table.n)
        assert mass_plus == pytest.approx(0.5, abs=1e-3)
        peak = table.n[np.argmax(np.where(positive, table.density, 0.0))]
        assert abs(peak - 1.0) < 0.01
        mixture = 0.5 / math.sqrt(2 * math.pi * 0.05**2) * (
            np.exp(-((table.n - 1) ** 2) / (2 * 0.05**2)) + np.exp(-((table.n + 1) ** 2) / (2 * 0.05**2))
        )
        assert np.abs(table.density - mixture).max() < 0.02

    def test_matches_late_time_single_snapshot(self):
        for gamma in (0.05, 0.025):
            p = ModelParams(theta=0.15 * math.pi, gamma=gamma)
            grid = GridSpec.for_gamma(gamma)
            frozen = freezing_distribution(p, grid)
            snapshot = single_time_distribution(p, 30, grid)
            assert np.abs(frozen.density - snapshot.density).max() < 1e-3


class TestSampleHistory:
    def test_zero_noise_freezes(self):
        seq = sample_history(ModelParams(theta=0.05 * math.pi, gamma=1e-9), 6, seed=4)
        assert np.abs(seq - seq[0]).max() < 1e-6

    def test_near_repetition_means_cluster_at_poles(self):
        histories = sample_histories(ModelParams(theta=0.05 * math.pi, gamma=0.05), 8, 4000, seed=4)
        means = histories.mean(axis=1)
        frac_plus = (means > 0).mean()
        assert abs(frac_plus - 0.5) < 4 * math.sqrt(0.25 / 4000)
        assert (np.abs(np.abs(means) - 1.0) < 0.3).mean() > 0.9

    def test_apparatus_readout_noise_scale(self):
        histories = sample_histories(ModelParams(theta=0.15 * math.pi, gamma=0.1), 12, 4000, seed=4)
        residual = histories - histories.mean(axis=1, keepdims=True)
        assert np.std(residual) == pytest.approx(0.1 * math.sqrt(11.0 / 12.0), rel=0.05)

    def test_encoding_sample_covariance(self):
        p = ModelParams(theta=0.3 * math.pi, gamma=0.1)
        length = 10
        histories = sample_histories(p, length, 20000, seed=8)
        for dt in (0, 1, 3):
            emp = (histories[:, : length - dt] * histories[:, dt:]).mean()
            per_seq = (histories[:, : length - dt] * histories[:, dt:]).mean(axis=1)
            se = per_seq.std(ddof=1) / math.sqrt(len(per_seq))
            assert abs(emp - encoding_covariance(p, dt)) < 4 * se

    def test_validation(self):
        with pytest.raises(ValueError):
            sample_histories(ModelParams(theta=0.1), 0, 5, seed=1)

import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings, strategies as st

from steerkit import (
    DensityMatrix,
    NoiseParams,
    SourceParams,
    apply_loss_mode_a,
    apply_loss_single,
    beamsplit,
    loss_kraus,
    partial_trace,
    phase_jitter_average,
    source_state,
)
from conftest import random_density

JITTER_REF = np.deg2rad(3.9)


class TestNoiseParams:
    def test_combined_efficiency(self):
        noise = NoiseParams(eta_h=0.96, l_a=0.025)
        assert noise.eta_a == pytest.approx(0.96 * 0.975, abs=1e-15)

    def test_reference_value(self, reference_noise):
        assert reference_noise.eta_a == pytest.approx(0.936, abs=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            NoiseParams(eta_h=1.2)
        with pytest.raises(ValueError):
            NoiseParams(eta_h=0.9, delta_theta=-0.1)


class TestLossKraus:
    def test_lossless_is_identity(self):
        k0, k1, k2 = loss_kraus(1.0, 2)
        np.testing.assert_array_equal(k0, np.eye(3))
        assert np.abs(k1).max() == 0.0
        assert np.abs(k2).max() == 0.0

    def test_reference_efficiency_amplitudes(self):
        k0, k1, k2 = loss_kraus(0.936, 2)
        np.testing.assert_allclose(
            np.diag(k0).real, [1.0, np.sqrt(0.936), 0.936], atol=1e-15
        )
        assert k1[0, 1] == pytest.approx(np.sqrt(1 - 0.936))
        assert k1[1, 2] == pytest.approx(np.sqrt(2 * 0.936 * (1 - 0.936)))
        assert k2[0, 2] == pytest.approx(1 - 0.936)

    def test_dead_channel_sends_everything_to_vacuum(self):
        ks = loss_kraus(0.0, 2)
        np.testing.assert_array_equal(ks[0], np.diag([1.0, 0.0, 0.0]))
        rho = DensityMatrix(np.diag([0.0, 0.2, 0.8]).astype(complex))
        out = apply_loss_single(rho, 0.0)
        np.testing.assert_allclose(out.matrix, np.diag([1, 0, 0]), atol=1e-15)

    def test_completeness_on_an_eta_grid(self):
        for eta in np.linspace(0.0, 1.0, 11):
            for max_n in (2, 3):
                total = sum(k.conj().T @ k for k in loss_kraus(eta, max_n))
                assert np.abs(total - np.eye(max_n + 1)).max() <= 1e-12

    @hyp_settings(max_examples=50, deadline=None)
    @given(st.floats(min_value=0.0, max_value=1.0))
    def test_completeness_property(self, eta):
        total = sum(k.conj().T @ k for k in loss_kraus(eta, 3))
        assert np.abs(total - np.eye(4)).max() <= 1e-12

    def test_rejects_eta_outside_unit_interval(self):
        for bad in (-0.1, 1.0001):
            with pytest.raises(ValueError):
                loss_kraus(bad, 2)


class TestApplyLoss:
    def test_single_mode_binomial_examples(self):
        one = DensityMatrix(np.diag([0, 1, 0]).astype(complex))
        np.testing.assert_allclose(
            apply_loss_single(one, 0.9).matrix, np.diag([0.1, 0.9, 0]), atol=1e-15
        )
        two = DensityMatrix(np.diag([0, 0, 1]).astype(complex))
        np.testing.assert_allclose(
            apply_loss_single(two, 0.5).matrix, np.diag([0.25, 0.5, 0.25]), atol=1e-15
        )

    def test_identity_at_full_efficiency(self, rng):
        rho = DensityMatrix(random_density(rng, 4))
        np.testing.assert_array_equal(apply_loss_single(rho, 1.0).matrix, rho.matrix)

    def test_trace_and_positivity_preserved(self, rng):
        for _ in range(8):
            rho = DensityMatrix(random_density(rng, 4))
            out = apply_loss_single(rho, rng.uniform(0, 1))
            assert out.trace() == pytest.approx(1.0, abs=1e-12)
            assert np.linalg.eigvalsh(out.matrix).min() >= -1e-10

    def test_composition_multiplies_efficiencies(self, rng):
        rho = DensityMatrix(random_density(rng, 4))
        once = apply_loss_single(apply_loss_single(rho, 0.8), 0.65)
        direct = apply_loss_single(rho, 0.8 * 0.65)
        np.testing.assert_allclose(once.matrix, direct.matrix, atol=1e-10)

    def test_mode_a_loss_commutes_with_tracing_out_alice(self):
        joint = beamsplit(source_state(SourceParams(0, 1, 0), dim=3), 0.5)
        lossy = apply_loss_mode_a(joint, 0.5)
        bob = partial_trace(lossy, "B")
        np.testing.assert_allclose(
            np.diag(bob.matrix).real, [0.5, 0.5, 0.0], atol=1e-12
        )

    def test_mode_a_identity_at_unit_efficiency(self, reference_source):
        joint = beamsplit(source_state(reference_source), 0.38)
        assert apply_loss_mode_a(joint, 1.0) is joint

    def test_mode_a_preserves_trace(self, reference_source):
        joint = beamsplit(source_state(reference_source), 0.38)
        lossy = apply_loss_mode_a(joint, 0.936)
        assert np.trace(lossy.matrix).real == pytest.approx(1.0, abs=1e-12)


def coherence_statefn(theta_tilde):
    m = np.array(
        [[0.5, 0.5 * np.exp(-1j * theta_tilde)], [0.5 * np.exp(1j * theta_tilde), 0.5]]
    )
    return DensityMatrix(m)


class TestPhaseJitter:
    def test_zero_jitter_is_exact_passthrough(self):
        out = phase_jitter_average(coherence_statefn, 0.7, 0.0)
        np.testing.assert_array_equal(out.matrix, coherence_statefn(0.7).matrix)

    def test_damping_factor_matches_closed_form(self):
        out = phase_jitter_average(coherence_statefn, 0.3, JITTER_REF)
        damping = abs(out.matrix[1, 0]) / 0.5
        assert abs(damping - np.exp(-0.5 * JITTER_REF**2)) <= 1e-9
        assert damping == pytest.approx(0.99769, abs=1e-5)
        # phase of the averaged coherence is untouched
        assert np.angle(out.matrix[1, 0]) == pytest.approx(0.3, abs=1e-12)

    def test_strong_jitter_kills_the_coherence(self):
        out = phase_jitter_average(coherence_statefn, 0.0, 4.0)
        assert abs(out.matrix[1, 0]) < 1e-3
        assert abs(out.matrix[1, 0]) == pytest.approx(0.5 * np.exp(-8.0), rel=1e-3)

    def test_commutes_with_convex_mixing(self):
        def other(theta_tilde):
            m = np.array(
                [
                    [0.7, 0.2 * np.exp(-2j * theta_tilde)],
                    [0.2 * np.exp(2j * theta_tilde), 0.3],
                ]
            )
            return DensityMatrix(m)

        def mixed(theta_tilde):
            m = 0.4 * coherence_statefn(theta_tilde).matrix + 0.6 * other(theta_tilde).matrix
            return DensityMatrix(m)

        left = phase_jitter_average(mixed, 0.2, 0.05).matrix
        right = (
            0.4 * phase_jitter_average(coherence_statefn, 0.2, 0.05).matrix
            + 0.6 * phase_jitter_average(other, 0.2, 0.05).matrix
        )
        np.testing.assert_allclose(left, right, atol=1e-12)

    def test_non_convergent_integrand_raises(self):
        def jagged(theta_tilde):
            p = 1.0 if np.sin(60.0 * theta_tilde) > 0 else 0.0
            return DensityMatrix(np.diag([p, 1 - p]).astype(complex))

        with pytest.raises(RuntimeError, match="converge"):
            phase_jitter_average(jagged, 0.1, 0.5)

    def test_rejects_negative_width(self):
        with pytest.raises(ValueError):
            phase_jitter_average(coherence_statefn, 0.0, -0.1)

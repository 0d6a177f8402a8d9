import json

import numpy as np
import pytest

from steerkit import (
    DensityMatrix,
    SourceParams,
    TwoModeState,
    beamsplit,
    fidelity,
    partial_trace,
    restrict_qubit,
    source_state,
)
from conftest import random_density


def ket(dim, n):
    v = np.zeros(dim, dtype=complex)
    v[n] = 1.0
    return v


class TestDensityMatrix:
    def test_rejects_non_hermitian(self):
        m = np.array([[0.5, 0.1], [0.3, 0.5]], dtype=complex)
        with pytest.raises(ValueError, match="Hermitian"):
            DensityMatrix(m)

    def test_rejects_negative_eigenvalue(self):
        with pytest.raises(ValueError, match="positive semidefinite"):
            DensityMatrix(np.diag([1.2, -0.2]).astype(complex))

    def test_rejects_bad_trace_when_normalized(self):
        with pytest.raises(ValueError, match="unit trace"):
            DensityMatrix(np.diag([0.6, 0.6]).astype(complex))

    def test_unnormalized_flag_allows_partial_trace_mass(self):
        dm = DensityMatrix(np.diag([0.3, 0.2]).astype(complex), normalized=False)
        assert dm.trace() == pytest.approx(0.5)

    def test_json_round_trip_is_exact(self):
        rng = np.random.default_rng(7)
        dm = DensityMatrix(random_density(rng, 4))
        back = DensityMatrix.from_json_dict(json.loads(json.dumps(dm.to_json_dict())))
        assert back.dim == 4
        np.testing.assert_array_equal(back.matrix, dm.matrix)
        assert back.normalized

    def test_json_layout_is_row_major(self):
        m = np.array([[0.75, 0.1j], [-0.1j, 0.25]])
        payload = DensityMatrix(m).to_json_dict()
        assert payload["dim"] == 2
        assert payload["re"][0] == [0.75, 0.0]
        assert payload["im"][0][1] == 0.1


class TestSourceState:
    def test_reference_params_renormalize_over_their_sum(self, reference_source):
        rho = source_state(reference_source, dim=4)
        total = reference_source.total
        expected = np.array([0.120, 0.857, 0.02, 0.0]) / total
        np.testing.assert_allclose(np.diag(rho.matrix).real, expected, atol=1e-15)
        assert rho.trace() == pytest.approx(1.0, abs=1e-12)

    def test_pure_single_photon(self):
        rho = source_state(SourceParams(0.0, 1.0, 0.0), dim=3)
        np.testing.assert_allclose(rho.matrix, np.diag([0, 1, 0]).astype(complex))

    def test_pure_vacuum(self):
        rho = source_state(SourceParams(1.0, 0.0, 0.0), dim=3)
        np.testing.assert_allclose(rho.matrix, np.diag([1, 0, 0]).astype(complex))

    def test_rejects_dim_below_three(self):
        with pytest.raises(ValueError, match="dim >= 3"):
            source_state(SourceParams(0.0, 1.0, 0.0), dim=2)

    def test_rejects_negative_probability(self):
        with pytest.raises(ValueError):
            SourceParams(-0.1, 1.0, 0.1)

    def test_rejects_sum_above_one(self):
        with pytest.raises(ValueError):
            SourceParams(0.5, 0.6, 0.1)

    def test_ph_widens_the_allowed_deficit(self):
        SourceParams(0.120, 0.857, 0.02, p_h=0.004)  # sums to 0.997
        with pytest.raises(ValueError):
            SourceParams(0.120, 0.857, 0.02, p_h=0.0)

    def test_normalized_sums_to_one(self, reference_source):
        n = reference_source.normalized()
        assert n.total == pytest.approx(1.0, abs=1e-15)


class TestBeamsplit:
    def test_full_reflection_routes_to_bob(self):
        rho = source_state(SourceParams(0, 1, 0), dim=3)
        joint = beamsplit(rho, 1.0)
        expected = np.outer(ket(9, 1), ket(9, 1).conj())  # |0,1><0,1|
        np.testing.assert_allclose(joint.matrix, expected, atol=1e-15)

    def test_balanced_single_photon_is_the_odd_superposition(self):
        joint = beamsplit(source_state(SourceParams(0, 1, 0), dim=3), 0.5)
        vec = (ket(9, 1) - ket(9, 3)) / np.sqrt(2)  # (|0,1> - |1,0>)/sqrt(2)
        np.testing.assert_allclose(joint.matrix, np.outer(vec, vec.conj()), atol=1e-14)

    def test_two_photon_amplitudes(self):
        # oracle: expand (sqrt(R) b+ - sqrt(1-R) a+)^2 / sqrt(2) on vacuum
        R = 0.5
        joint = beamsplit(source_state(SourceParams(0, 0, 1), dim=3), R)
        vec = np.zeros(9, dtype=complex)
        vec[0 * 3 + 2] = R  # |0,2>
        vec[1 * 3 + 1] = -np.sqrt(2 * R * (1 - R))  # |1,1>
        vec[2 * 3 + 0] = 1 - R  # |2,0>
        np.testing.assert_allclose(joint.matrix, np.outer(vec, vec.conj()), atol=1e-14)

    def test_rejects_reflectivity_outside_unit_interval(self):
        rho = source_state(SourceParams(0, 1, 0), dim=3)
        for bad in (-0.1, 1.1):
            with pytest.raises(ValueError, match="reflectivity"):
                beamsplit(rho, bad)

    def test_preserves_trace_and_purity(self, reference_source):
        rho = source_state(reference_source, dim=4)
        joint = beamsplit(rho, 0.38)
        assert np.trace(joint.matrix).real == pytest.approx(1.0, abs=1e-10)
        assert np.trace(joint.matrix @ joint.matrix).real == pytest.approx(
            rho.purity(), abs=1e-10
        )

    def test_linearity(self, rng):
        a = DensityMatrix(random_density(rng, 4))
        b = DensityMatrix(random_density(rng, 4))
        mix = DensityMatrix(0.3 * a.matrix + 0.7 * b.matrix)
        left = beamsplit(mix, 0.42).matrix
        right = 0.3 * beamsplit(a, 0.42).matrix + 0.7 * beamsplit(b, 0.42).matrix
        np.testing.assert_allclose(left, right, atol=1e-12)


class TestPartialTrace:
    def test_bob_marginal_of_split_photon(self):
        for R in (0.0, 0.3, 1.0):
            joint = beamsplit(source_state(SourceParams(0, 1, 0), dim=3), R)
            bob = partial_trace(joint, "B")
            np.testing.assert_allclose(
                np.diag(bob.matrix).real[:2], [1 - R, R], atol=1e-12
            )
        # R = 0 puts vacuum on Bob exactly
        joint = beamsplit(source_state(SourceParams(0, 1, 0), dim=3), 0.0)
        np.testing.assert_array_equal(
            partial_trace(joint, "B").matrix, np.diag([1, 0, 0]).astype(complex)
        )

    def test_product_state_recovers_factors(self, rng):
        a = random_density(rng, 3)
        b = random_density(rng, 3)
        joint = TwoModeState(np.kron(a, b), dim_a=3, dim_b=3)
        np.testing.assert_allclose(partial_trace(joint, "B").matrix, b, atol=1e-12)
        np.testing.assert_allclose(partial_trace(joint, "A").matrix, a, atol=1e-12)

    def test_reference_vacuum_weight_after_qubit_restriction(self, reference_source):
        joint = beamsplit(source_state(reference_source, dim=4), 0.5)
        bob = partial_trace(joint, "B")
        p2 = reference_source.normalized().p2
        restricted = restrict_qubit(bob, 1.0 - p2 * 0.25)
        assert restricted.matrix[0, 0].real == pytest.approx(0.556, abs=0.005)

    def test_rejects_unknown_party(self):
        joint = beamsplit(source_state(SourceParams(0, 1, 0), dim=3), 0.5)
        with pytest.raises(ValueError, match="keep"):
            partial_trace(joint, "C")


class TestRestrictQubit:
    def test_plain_arithmetic(self):
        rho = DensityMatrix(np.diag([0.5, 0.3, 0.2]).astype(complex))
        out = restrict_qubit(rho, 0.8)
        np.testing.assert_allclose(out.matrix, np.diag([0.625, 0.375]), atol=1e-15)
        assert out.normalized

    def test_qubit_passthrough_with_unit_renorm(self, rng):
        rho = DensityMatrix(random_density(rng, 2))
        np.testing.assert_array_equal(restrict_qubit(rho, 1.0).matrix, rho.matrix)

    def test_rejects_nonpositive_renorm(self):
        rho = DensityMatrix(np.diag([0.5, 0.3, 0.2]).astype(complex))
        for bad in (0.0, -1.0):
            with pytest.raises(ValueError, match="renorm"):
                restrict_qubit(rho, bad)

    def test_retained_trace_renorm_gives_unit_trace_psd(self, rng):
        for _ in range(10):
            rho = DensityMatrix(random_density(rng, 4))
            block = float(np.real(rho.matrix[0, 0] + rho.matrix[1, 1]))
            out = restrict_qubit(rho, block)
            assert out.trace() == pytest.approx(1.0, abs=1e-12)
            assert np.linalg.eigvalsh(out.matrix).min() >= -1e-10


class TestFidelity:
    def test_self_fidelity_is_one(self, rng):
        rho = DensityMatrix(random_density(rng, 4))
        assert fidelity(rho, rho) == pytest.approx(1.0, abs=1e-10)

    def test_orthogonal_states(self):
        a = DensityMatrix(np.diag([1, 0]).astype(complex))
        b = DensityMatrix(np.diag([0, 1]).astype(complex))
        assert fidelity(a, b) == pytest.approx(0.0, abs=1e-12)

    def test_commuting_closed_form(self):
        a = DensityMatrix(np.diag([1, 0]).astype(complex))
        b = DensityMatrix(np.diag([0.5, 0.5]).astype(complex))
        assert fidelity(a, b) == pytest.approx(0.5, abs=1e-12)

    def test_dimension_mismatch(self):
        a = DensityMatrix(np.diag([1, 0]).astype(complex))
        b = DensityMatrix(np.diag([1, 0, 0]).astype(complex))
        with pytest.raises(ValueError, match="mismatch"):
            fidelity(a, b)

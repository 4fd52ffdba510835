import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from delayflock.errors import ConfigError
from delayflock.model import (
    ModelParams,
    PhaseState,
    PotentialSpec,
    baseline_row_weights,
    psi_eval,
    rhs,
    validate_normalization,
    weight_matrix,
)


def make_params(variant="main_delay", potential=None, n=3, d=2, lam=1.0):
    if potential is None:
        potential = PotentialSpec.cucker_smale(2.0)
    return ModelParams(n=n, d=d, lam=lam, variant=variant, potential=potential)


class TestPotential:
    def test_cucker_smale_at_zero(self):
        assert psi_eval(PotentialSpec.cucker_smale(2.0), 0.0) == 1.0

    def test_cucker_smale_at_one(self):
        assert psi_eval(PotentialSpec.cucker_smale(2.0), 1.0) == pytest.approx(0.25, abs=1e-15)

    def test_constant(self):
        assert psi_eval(PotentialSpec.constant(0.5), 7.3) == 0.5

    def test_zero_beta_is_identically_one(self):
        spec = PotentialSpec.cucker_smale(0.0)
        assert psi_eval(spec, 123.4) == 1.0

    def test_negative_distance_rejected(self):
        with pytest.raises(ValueError):
            psi_eval(PotentialSpec.cucker_smale(2.0), -0.1)

    def test_table_interpolates_and_clamps(self):
        spec = PotentialSpec.table([0.0, 1.0, 2.0], [1.0, 0.5, 0.25])
        assert psi_eval(spec, 0.5) == pytest.approx(0.75)
        assert psi_eval(spec, 10.0) == 0.25
        assert spec.psi_min == 0.25 and spec.psi_max == 1.0

    def test_constructor_rejects_out_of_range(self):
        with pytest.raises(ConfigError):
            PotentialSpec.constant(1.5)
        with pytest.raises(ConfigError):
            PotentialSpec.constant(0.0)
        with pytest.raises(ConfigError):
            PotentialSpec.cucker_smale(-1.0)
        with pytest.raises(ConfigError):
            PotentialSpec.table([0.0, 1.0], [0.5, 1.5])
        with pytest.raises(ConfigError):
            PotentialSpec.table([1.0, 0.5], [0.5, 0.5])

    @given(st.floats(min_value=0.0, max_value=1e6),
           st.floats(min_value=0.0, max_value=10.0))
    def test_values_in_unit_interval(self, s, beta):
        val = psi_eval(PotentialSpec.cucker_smale(beta), s)
        assert 0.0 < val <= 1.0

    @given(st.floats(min_value=0.0, max_value=100.0),
           st.floats(min_value=0.0, max_value=100.0))
    def test_cucker_smale_nonincreasing(self, s1, s2):
        lo, hi = sorted((s1, s2))
        spec = PotentialSpec.cucker_smale(1.7)
        assert psi_eval(spec, lo) >= psi_eval(spec, hi)


class TestWeightMatrix:
    def test_two_agents_at_unit_distance(self):
        params = make_params(n=2, d=1)
        w = weight_matrix(params, np.array([[0.0], [1.0]]))
        assert w[0, 1] == pytest.approx(0.25, abs=1e-15)
        assert w[0, 0] == 0.0 and w[1, 1] == 0.0

    def test_normalized_constant_gives_unit_entries(self):
        params = make_params("normalized_nonsymmetric", PotentialSpec.constant(0.5))
        w = weight_matrix(params, np.array([[0.0, 0.0], [3.0, 1.0], [-2.0, 5.0]]))
        off = w[~np.eye(3, dtype=bool)]
        assert np.allclose(off, 1.0)
        assert np.all(np.diag(w) == 0.0)

    def test_coincident_agents(self):
        params = make_params(n=2, d=2)
        w = weight_matrix(params, np.zeros((2, 2)))
        assert w[0, 1] == 1.0

    def test_nonfinite_positions_rejected(self):
        params = make_params()
        x = np.zeros((3, 2))
        x[1, 0] = np.nan
        with pytest.raises(ValueError):
            weight_matrix(params, x)

    @given(st.integers(0, 10_000))
    def test_symmetric_positive_bounded(self, seed):
        gen = np.random.default_rng(seed)
        params = make_params(n=5, d=3)
        w = weight_matrix(params, gen.normal(scale=3.0, size=(5, 3)))
        assert np.array_equal(w, w.T)
        off = w[~np.eye(5, dtype=bool)]
        assert np.all(off > 0.0) and np.all(off <= 1.0)

    @given(st.integers(0, 10_000))
    def test_normalized_rows_bounded(self, seed):
        gen = np.random.default_rng(seed)
        params = make_params("normalized_nonsymmetric", PotentialSpec.constant(0.3), n=4)
        w = weight_matrix(params, gen.normal(size=(4, 2)))
        sums = w.sum(axis=1)
        assert np.all(sums > 0.0) and np.all(sums < 4.0)
        ok, margin = validate_normalization(params, gen.normal(size=(4, 2)))
        assert ok and margin > 0.0

    def test_baseline_rows_stochastic(self, rng):
        params = make_params("full_sum_baseline")
        b = baseline_row_weights(params, rng.normal(size=(3, 2)))
        assert np.allclose(b.sum(axis=1), 1.0, atol=1e-14)
        assert np.all(b > 0.0)


class TestRhs:
    def test_two_agent_hand_value(self):
        params = make_params("main_delay", PotentialSpec.constant(1.0), n=2, d=1)
        state = PhaseState(np.zeros((2, 1)), np.array([[1.0], [0.0]]), 0.0)
        _, vdot = rhs(params, state, state)
        assert vdot[0, 0] == pytest.approx(-0.5, abs=1e-15)
        assert vdot[1, 0] == pytest.approx(0.5, abs=1e-15)

    @pytest.mark.parametrize("variant", ["main_delay", "full_sum_baseline",
                                         "normalized_nonsymmetric"])
    @given(seed=st.integers(0, 10_000))
    def test_consensus_is_equilibrium(self, variant, seed):
        gen = np.random.default_rng(seed)
        params = make_params(variant, PotentialSpec.constant(0.6), n=4)
        u = gen.normal(size=2)
        v = np.tile(u, (4, 1))
        now = PhaseState(gen.normal(size=(4, 2)), v, 0.0)
        delayed = PhaseState(gen.normal(size=(4, 2)), v.copy(), -0.5)
        xdot, vdot = rhs(params, now, delayed)
        assert np.max(np.abs(vdot)) == 0.0
        assert np.array_equal(xdot, v)

    @given(seed=st.integers(0, 10_000))
    def test_zero_delay_matches_classical_field(self, seed):
        gen = np.random.default_rng(seed)
        params = make_params(n=4, d=2)
        x = gen.normal(size=(4, 2))
        v = gen.normal(size=(4, 2))
        state = PhaseState(x, v, 0.0)
        _, vdot = rhs(params, state, state)
        # Independent elementwise evaluation of the undelayed field.
        expected = np.zeros_like(v)
        for i in range(4):
            for j in range(4):
                if i == j:
                    continue
                w = (1.0 + np.sum((x[i] - x[j]) ** 2)) ** -2.0
                expected[i] += (params.lam / 4) * w * (v[j] - v[i])
        assert np.allclose(vdot, expected, atol=1e-14)

    def test_shape_mismatch_rejected(self):
        params = make_params()
        good = PhaseState(np.zeros((3, 2)), np.zeros((3, 2)), 0.0)
        bad = PhaseState(np.zeros((2, 2)), np.zeros((2, 2)), 0.0)
        with pytest.raises(ValueError):
            rhs(params, good, bad)

    def test_baseline_uses_delayed_velocities(self):
        params = make_params("full_sum_baseline", PotentialSpec.constant(0.5), n=2, d=1)
        now = PhaseState(np.zeros((2, 1)), np.array([[0.0], [0.0]]), 0.0)
        delayed = PhaseState(np.zeros((2, 1)), np.array([[2.0], [2.0]]), -1.0)
        _, vdot = rhs(params, now, delayed)
        # Row-stochastic mixing of the delayed velocities minus lambda * v_now.
        assert np.allclose(vdot, 2.0)


class TestNormalization:
    def test_constant_half(self):
        params = make_params("main_delay", PotentialSpec.constant(0.5))
        ok, margin = validate_normalization(params, np.zeros((3, 2)))
        assert ok and margin == pytest.approx(2.0 / 3.0, abs=1e-14)

    def test_constant_one_boundary(self):
        params = make_params("main_delay", PotentialSpec.constant(1.0))
        ok, margin = validate_normalization(params, np.zeros((3, 2)))
        assert ok and margin == pytest.approx(1.0 / 3.0, abs=1e-14)

    def test_two_agents_margin(self, rng):
        params = make_params(n=2)
        ok, margin = validate_normalization(params, rng.normal(size=(2, 2)))
        assert ok and margin >= 0.5

    def test_normalized_variant_requires_floor(self):
        with pytest.raises(ConfigError):
            make_params("normalized_nonsymmetric", PotentialSpec.cucker_smale(2.0))

    def test_params_validation(self):
        with pytest.raises(ConfigError):
            make_params(n=1)
        with pytest.raises(ConfigError):
            make_params(lam=0.0)
        with pytest.raises(ConfigError):
            make_params(variant="nope")

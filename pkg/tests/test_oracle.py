"""Cumulant-oracle checks: closed-form limits, an independent statevector
route for the deterministic angles, and the bin-constant dual route against
the reconstruction matrix."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qns.filters import FrequencyGrid, build_reconstruction_system
from qns.noise import BandpassSpec, NoiseComponent, NoiseProcessSpec, OuSpec
from qns.oracle import (
    DecayExponents,
    SpectralModel,
    StaticAngles,
    StaticParams,
    decay_exponents,
    expected_observables,
    oracle_expectations,
    static_angles,
)
from qns.sequences import build_plan

T = 5e-6
M = 6
K = 8
TAU = T / 2 ** (M + 1)

ZERO_DECAY = DecayExponents(0.0, 0.0, 0.0, 0.0)


def reference_plan():
    return build_plan(K=K, m=M, tau_pi=TAU)


def statevector_expectations(setting, angles):
    """Noiseless expectations by direct 4x4 linear algebra."""
    kets = {"X": np.array([1.0, 1.0]) / np.sqrt(2), "Z": np.array([1.0, 0.0])}
    psi = np.kron(kets[setting.prep[0]], kets[setting.prep[1]])
    z = np.array([1.0, -1.0])
    z1 = np.kron(z, np.ones(2))
    z2 = np.kron(np.ones(2), z)
    phase = (angles.theta1 / 2 * z1 + angles.theta2 / 2 * z2
             + angles.theta12 / 2 * z1 * z2)
    psi = np.exp(-1j * phase) * psi
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    y = np.array([[0, -1j], [1j, 0]])
    eye = np.eye(2)
    ops = {"X1": np.kron(x, eye), "Y1": np.kron(y, eye),
           "X2": np.kron(eye, x), "Y2": np.kron(eye, y),
           "X1X2": np.kron(x, x), "Y1Y2": np.kron(y, y),
           "X1Y2": np.kron(x, y), "Y1X2": np.kron(y, x)}
    return {obs: float(np.real(np.conj(psi) @ (ops[obs] @ psi)))
            for obs in setting.observables}


class TestStaticAngles:
    def test_free_evolution_angles(self):
        plan = reference_plan()
        params = StaticParams(delta1=0.1 * np.pi / T, delta2=0.07 * np.pi / T,
                              j_zz=0.3 * np.pi / T)
        angles = static_angles(params, plan.setting(1, 0))
        assert angles.theta1 == pytest.approx(0.2 * np.pi, rel=1e-12)
        assert angles.theta2 == pytest.approx(0.14 * np.pi, rel=1e-12)
        assert angles.theta12 == pytest.approx(0.6 * np.pi, rel=1e-12)

    def test_balanced_sequences_null_the_detuning(self):
        plan = reference_plan()
        params = StaticParams(delta1=1e5, delta2=1e5, j_zz=1e5)
        for k in range(1, K):
            angles = static_angles(params, plan.setting(3, k))
            assert angles.theta1 == pytest.approx(0.0, abs=1e-12)
            assert angles.theta2 == pytest.approx(0.0, abs=1e-12)
            # identical sequences leave the ZZ term unrefocused
            assert angles.theta12 == pytest.approx(2e5 * T, rel=1e-12)

    def test_opposite_parity_refocuses_coupling(self):
        plan = reference_plan()
        params = StaticParams(j_zz=1e5)
        for k in range(1, K):
            angles = static_angles(params, plan.setting(4, k))
            assert angles.theta12 == pytest.approx(0.0, abs=1e-10)


class TestExpectedObservables:
    @settings(max_examples=60, deadline=None)
    @given(st.tuples(*[st.floats(-3.0, 3.0) for _ in range(3)]),
           st.sampled_from([(1, 0), (1, 2), (2, 1), (3, 0), (3, 4), (4, 3)]))
    def test_matches_statevector_without_noise(self, thetas, key):
        plan = reference_plan()
        setting = plan.setting(*key)
        angles = StaticAngles(*thetas)
        ours = expected_observables(setting, angles, ZERO_DECAY)
        ref = statevector_expectations(setting, angles)
        for obs in setting.observables:
            assert ours[obs] == pytest.approx(ref[obs], abs=1e-12)

    def test_factorizes_without_coupling(self):
        setting = reference_plan().setting(3, 2)
        angles = StaticAngles(theta1=0.4, theta2=-1.1, theta12=0.0)
        ex = DecayExponents(chi_11=0.2, chi_22=0.35, chi_1212=0.0, chi_12=0.0)
        vals = expected_observables(setting, angles, ex)
        assert vals["X1X2"] == pytest.approx(vals["X1"] * vals["X2"], rel=1e-12)
        assert vals["Y1X2"] == pytest.approx(vals["Y1"] * vals["X2"], rel=1e-12)

    def test_pair_combinations_expose_the_cumulants(self):
        setting = reference_plan().setting(4, 5)
        angles = StaticAngles(theta1=0.3, theta2=0.8, theta12=0.0)
        ex = DecayExponents(chi_11=0.25, chi_22=0.15, chi_1212=0.05,
                            chi_12=0.08)
        vals = expected_observables(setting, angles, ex)
        gamma1 = vals["X1X2"] + vals["Y1Y2"]
        gamma2 = vals["X1X2"] - vals["Y1Y2"]
        gamma3 = vals["X1Y2"] + vals["Y1X2"]
        gamma4 = vals["Y1X2"] - vals["X1Y2"]
        r_plus = gamma1**2 + gamma4**2
        r_minus = gamma2**2 + gamma3**2
        chi_sum = -(np.log(r_plus) + np.log(r_minus)) / 4
        chi_12 = (np.log(r_plus) - np.log(r_minus)) / 4
        assert chi_sum == pytest.approx(ex.chi_sum, rel=1e-12)
        assert chi_12 == pytest.approx(ex.chi_12, rel=1e-12)

    def test_values_bounded(self):
        plan = reference_plan()
        rng = np.random.default_rng(11)
        for setting in plan.settings:
            angles = StaticAngles(*rng.uniform(-3, 3, 3))
            ex = DecayExponents(*rng.uniform(0, 0.5, 3), rng.uniform(-0.2, 0.2))
            for val in expected_observables(setting, angles, ex).values():
                assert -1.0 <= val <= 1.0

    def test_unknown_observable_rejected(self):
        setting = reference_plan().setting(1, 0)
        bad = type(setting)(combo=1, k=0, prep=setting.prep,
                            seq1=setting.seq1, seq2=setting.seq2,
                            observables=("Z1Z2",))
        with pytest.raises(ValueError):
            expected_observables(bad, StaticAngles(0, 0, 0), ZERO_DECAY)


class TestDecayExponents:
    def test_flat_spectrum_gives_2st(self):
        # white dephasing: chi = 2 S0 T for every sequence (sum rule);
        # the finite cutoff leaves a sub-percent tail
        s0 = 2.5e-7
        zero = lambda w: np.zeros_like(w)
        model = SpectralModel(s11=lambda w: np.full_like(w, s0), s22=zero,
                              s1212=zero,
                              s12=lambda w: np.zeros_like(w, dtype=complex))
        plan = reference_plan()
        for key in [(1, 0), (1, 3), (3, 7)]:
            ex = decay_exponents(model, plan.setting(*key))
            assert ex.chi_11 == pytest.approx(2 * s0 * T, rel=1e-2)
            assert ex.chi_22 == 0.0
            assert ex.chi_12 == 0.0

    def test_linearity_in_the_spectra(self):
        plan = reference_plan()
        setting = plan.setting(4, 2)
        model = _ou_model()
        base = decay_exponents(model, setting)
        doubled = SpectralModel(
            s11=lambda w: 2 * model.s11(w), s22=lambda w: 2 * model.s22(w),
            s1212=lambda w: 2 * model.s1212(w),
            s12=lambda w: 2 * model.s12(w),
            breakpoints=model.breakpoints)
        twice = decay_exponents(doubled, setting)
        assert twice.chi_11 == pytest.approx(2 * base.chi_11, rel=1e-12)
        assert twice.chi_12 == pytest.approx(2 * base.chi_12, rel=1e-12)

    def test_cutoff_and_node_convergence(self):
        setting = reference_plan().setting(1, 2)
        model = _ou_model()
        base = decay_exponents(model, setting)
        wide = decay_exponents(model, setting, omega_max=1600 * np.pi / T)
        dense = decay_exponents(model, setting, nodes=48)
        assert wide.chi_11 == pytest.approx(base.chi_11, rel=1e-6)
        assert wide.chi_1212 == pytest.approx(base.chi_1212, rel=1e-6)
        assert dense.chi_11 == pytest.approx(base.chi_11, rel=1e-12)

    def test_derived_sums(self):
        ex = DecayExponents(chi_11=0.1, chi_22=0.2, chi_1212=0.05, chi_12=0.01)
        assert ex.chi1_zz == pytest.approx(0.15)
        assert ex.chi2_zz == pytest.approx(0.25)
        assert ex.chi_sum == pytest.approx(0.3)


class TestBinConstantRoute:
    def test_matches_reconstruction_matrix(self):
        # same physics through two code paths: piecewise-constant overlap
        # quadrature here, per-bin filter integrals in the system matrix
        plan = reference_plan()
        grid = FrequencyGrid.for_orders(K - 1, T)
        system = build_reconstruction_system(plan, grid)
        rng = np.random.default_rng(3)
        spectra = {
            "s11": rng.uniform(0.5, 2.0, K) * 1e-7,
            "s22": rng.uniform(0.5, 2.0, K) * 1e-7,
            "s1212": rng.uniform(0.1, 1.0, K) * 1e-7,
            "re_s12": rng.uniform(-0.5, 0.5, K) * 1e-7,
            "im_s12": np.r_[0.0, rng.uniform(-0.5, 0.5, K - 1)] * 1e-7,
        }
        model = SpectralModel.from_bins(grid, spectra)
        chi_vec = system.matrix @ system.spectra_to_unknowns(spectra)
        rows = {tag: i for i, tag in enumerate(system.row_tags)}
        for setting in plan.settings:
            ex = decay_exponents(model, setting)
            if setting.combo == 1:
                pairs = [(ex.chi1_zz, (1, setting.k, "self1_zz"))]
            elif setting.combo == 2:
                pairs = [(ex.chi2_zz, (2, setting.k, "self2_zz"))]
            else:
                pairs = [(ex.chi_sum, (setting.combo, setting.k, "self_sum")),
                         (ex.chi_12, (setting.combo, setting.k, "cross"))]
            for value, tag in pairs:
                target = chi_vec[rows[tag]]
                assert value == pytest.approx(target, rel=1e-10, abs=1e-18)

    def test_bin_model_evaluation(self):
        grid = FrequencyGrid.for_orders(3, T)
        spectra = {"s11": np.array([1.0, 2.0, 3.0, 4.0]),
                   "s22": np.zeros(4), "s1212": np.zeros(4),
                   "re_s12": np.array([0.5, 0.0, 0.0, 0.0]),
                   "im_s12": np.array([0.0, -0.5, 0.0, 0.0])}
        model = SpectralModel.from_bins(grid, spectra)
        w = np.array([0.5 * np.pi / T, 2 * np.pi / T, 100 * np.pi / T])
        np.testing.assert_allclose(model.s11(w), [1.0, 2.0, 0.0])
        np.testing.assert_allclose(model.s12(w), [0.5, -0.5j, 0.0])
        assert model.support_max == pytest.approx(7 * np.pi / T)


class TestOracleExpectations:
    def test_covers_every_setting(self):
        plan = build_plan(K=3, m=4, tau_pi=T / 32)
        params = StaticParams(delta1=0.1 * np.pi / T, delta2=0.1 * np.pi / T,
                              j_zz=0.3 * np.pi / T)
        table = oracle_expectations(plan, params, _ou_model())
        assert set(table) == {s.key for s in plan.settings}
        for setting in plan.settings:
            assert set(table[setting.key]) == set(setting.observables)


def _ou_model():
    q1 = NoiseProcessSpec("qubit1",
                          (NoiseComponent(OuSpec(sigma=1.05 / T,
                                                 theta=22.5 / T)),))
    q2 = NoiseProcessSpec("qubit2",
                          (NoiseComponent(OuSpec(sigma=0.99 / T,
                                                 theta=27.5 / T)),))
    ct = NoiseProcessSpec("crosstalk", (
        NoiseComponent(OuSpec(sigma=0.65 / T, theta=24.0 / T)),
        NoiseComponent(BandpassSpec(amplitude=0.0125 * T, omega_low=100 / T,
                                    omega_high=150 / T)),
    ))
    return SpectralModel.from_noise_specs([q1, q2, ct])

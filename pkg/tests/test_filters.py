"""Filter-function evaluation against independent quadrature and closed forms.

The segment-sum evaluator is cross-checked three ways: literal jump
formulas written out by hand for small sequences, adaptive quadrature of
the oscillatory integrand, and the Parseval sum rule.  The reconstruction
system is exercised with noiseless bin-constant round trips.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from qns.errors import DataError
from qns.filters import (
    FilterFunction,
    FrequencyGrid,
    bin_integrate,
    build_reconstruction_system,
    filter_function,
    fourier_segment_sum,
    parity_split,
    self_ff_integral,
)
from qns.sequences import (
    PlanSetting,
    build_plan,
    cosine_fttps,
    free_evolution,
    sine_fttps,
    switching_function,
)

T = 5e-6
M = 6
TAU = T / 2 ** (M + 1)


def quad_fourier(y, omega):
    """Independent adaptive-quadrature route for the Fourier integral."""
    pts = np.asarray(y.boundaries)
    re = quad(lambda t: y.sample(np.array([t]))[0] * np.cos(omega * t),
              0.0, y.duration, points=pts, limit=400)[0]
    im = quad(lambda t: y.sample(np.array([t]))[0] * np.sin(omega * t),
              0.0, y.duration, points=pts, limit=400)[0]
    return re + 1j * im


class TestFourierSegmentSum:
    def test_free_evolution_closed_form(self):
        y = switching_function(free_evolution(M, TAU))
        assert fourier_segment_sum(y, 0.0) == pytest.approx(T, rel=1e-14)
        w = np.array([0.3, 2.0, 17.0, 251.0]) / T
        expected = (np.exp(1j * w * T) - 1) / (1j * w)
        np.testing.assert_allclose(fourier_segment_sum(y, w), expected,
                                   rtol=1e-12)

    def test_single_echo_literal_formula(self):
        # cos order 1 at m=3 flips at slots 4 and 12 of 16
        seq = cosine_fttps(1, 3, TAU)
        assert seq.pulse_slots == (4, 12)
        y = switching_function(seq)
        w = np.array([0.7, 5.0, 33.0]) / y.duration
        t4, t12, t16 = 4 * TAU, 12 * TAU, 16 * TAU
        expected = (2 * np.exp(1j * w * t4) - 2 * np.exp(1j * w * t12)
                    + np.exp(1j * w * t16) - 1) / (1j * w)
        np.testing.assert_allclose(fourier_segment_sum(y, w), expected,
                                   rtol=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(3, 5), st.data())
    def test_matches_quadrature(self, m, data):
        kind = data.draw(st.sampled_from(["cosine", "sine", "free"]))
        if kind == "free":
            seq = free_evolution(m, TAU)
        else:
            k = data.draw(st.integers(1, 2**m - 1))
            maker = cosine_fttps if kind == "cosine" else sine_fttps
            seq = maker(k, m, TAU)
        y = switching_function(seq)
        w = data.draw(st.floats(0.05, 120.0)) / y.duration
        ours = fourier_segment_sum(y, w)
        ref = quad_fourier(y, w)
        # normalized by T: both branches hold well below the 1e-9 target
        assert abs(ours - ref) <= 1e-9 * y.duration

    def test_series_matches_closed_form_at_crossover(self):
        y = switching_function(cosine_fttps(3, M, TAU))
        w = 0.999e-2 / T  # the evaluator takes its series branch here
        series = fourier_segment_sum(y, w)
        b = np.asarray(y.boundaries)
        s = np.asarray(y.signs, dtype=float)
        phases = np.exp(1j * w * b)
        closed = np.dot(s, phases[1:] - phases[:-1]) / (1j * w)
        # the closed form itself carries ~n_slots * eps * T / (w T) of
        # cancellation noise here; branches must agree within that
        assert abs(series - closed) <= 1e-17

    def test_scalar_and_array_shapes(self):
        y = switching_function(sine_fttps(2, M, TAU))
        scalar = fourier_segment_sum(y, 1.0 / T)
        assert isinstance(scalar, complex)
        arr = fourier_segment_sum(y, np.array([[1.0, 2.0], [3.0, 4.0]]) / T)
        assert arr.shape == (2, 2)
        assert arr[0, 0] == scalar


class TestFilterFunction:
    def test_free_dc_value(self):
        y = switching_function(free_evolution(M, TAU))
        assert filter_function(y, y, 0.0) == pytest.approx(T**2, rel=1e-12)

    def test_self_filter_real_nonnegative(self):
        y = switching_function(cosine_fttps(5, M, TAU))
        w = np.linspace(0.0, 200.0, 401) / T
        g = FilterFunction(y, y)(w)
        assert np.all(g.imag == 0.0)
        assert np.all(g.real >= 0.0)

    def test_conjugate_on_swap(self):
        y1 = switching_function(cosine_fttps(3, M, TAU))
        y2 = switching_function(sine_fttps(3, M, TAU))
        w = np.array([0.5, 6.1, 40.0]) / T
        np.testing.assert_allclose(filter_function(y2, y1, w),
                                   np.conj(filter_function(y1, y2, w)),
                                   rtol=1e-13)

    def test_passband_falls_in_own_bin(self):
        grid = FrequencyGrid.for_orders(7, T)
        w = np.linspace(0.0, grid.edges[-1, 1], 4001)
        for k in range(1, 8):
            y = switching_function(cosine_fttps(k, M, TAU))
            g = FilterFunction(y, y)(w).real
            peak = w[np.argmax(g)]
            lo, hi = grid.edges[k]
            assert lo <= peak <= hi

    def test_duration_mismatch_rejected(self):
        y1 = switching_function(cosine_fttps(1, M, TAU))
        y2 = switching_function(cosine_fttps(1, M, 2 * TAU))
        with pytest.raises(ValueError):
            FilterFunction(y1, y2)


class TestParitySplit:
    def test_cosine_even_sine_odd_exact(self):
        for k in range(1, 2**5):
            even, odd = parity_split(cosine_fttps(k, 5, TAU))
            assert odd == 0.0
            assert even == pytest.approx(2**6 * TAU, rel=1e-12)
            even, odd = parity_split(sine_fttps(k, 5, TAU))
            assert even == 0.0
            assert odd == pytest.approx(2**6 * TAU, rel=1e-12)

    def test_free_evolution_is_even(self):
        even, odd = parity_split(free_evolution(M, TAU))
        assert odd == 0.0
        assert even == pytest.approx(T, rel=1e-12)


class TestFrequencyGrid:
    def test_centers_and_clipped_first_bin(self):
        grid = FrequencyGrid.for_orders(7, T)
        assert grid.n_bins == 8
        np.testing.assert_allclose(grid.centers,
                                   2 * np.pi * np.arange(8) / T)
        assert grid.edges[0, 0] == 0.0
        assert grid.edges[0, 1] == pytest.approx(np.pi / T)
        assert grid.edges[3, 0] == pytest.approx(5 * np.pi / T)
        assert grid.edges[3, 1] == pytest.approx(7 * np.pi / T)

    def test_validation(self):
        with pytest.raises(ValueError):
            FrequencyGrid(n_bins=0, T=T)
        with pytest.raises(ValueError):
            FrequencyGrid(n_bins=4, T=-1.0)


class TestBinIntegrate:
    def test_against_adaptive_quadrature(self):
        grid = FrequencyGrid.for_orders(3, T)
        y1 = switching_function(cosine_fttps(2, M, TAU))
        y2 = switching_function(sine_fttps(2, M, TAU))
        for ff, part in [(FilterFunction(y1, y1), "real"),
                         (FilterFunction(y1, y2), "imag")]:
            ours = bin_integrate(ff, grid, part)
            for j, (lo, hi) in enumerate(grid.edges):
                pick = (lambda w: ff(w).real) if part == "real" \
                    else (lambda w: ff(w).imag)
                ref = quad(pick, lo, hi, limit=600)[0]
                assert abs(ours[j] - ref) <= 1e-9 * T**3 / TAU

    def test_oversampled_panels_agree(self):
        grid = FrequencyGrid.for_orders(7, T)
        y = switching_function(cosine_fttps(5, M, TAU))
        ff = FilterFunction(y, y)
        coarse = bin_integrate(ff, grid)
        fine = bin_integrate(ff, grid, panels_per_bin=16)
        np.testing.assert_allclose(coarse, fine, rtol=1e-10, atol=1e-30)

    def test_identical_pair_imag_negligible(self):
        # two separately built but equal switching functions
        grid = FrequencyGrid.for_orders(7, T)
        ya = switching_function(cosine_fttps(4, M, TAU))
        yb = switching_function(cosine_fttps(4, M, TAU))
        re_bins = bin_integrate(FilterFunction(ya, yb), grid, "real")
        im_bins = bin_integrate(FilterFunction(ya, yb), grid, "imag")
        assert np.max(np.abs(im_bins)) <= 1e-3 * np.max(np.abs(re_bins))

    def test_tiled_sequence_resolved(self):
        from qns.sequences import repeat_sequence
        seq = repeat_sequence(cosine_fttps(3, M, TAU), 4)
        y = switching_function(seq)
        ff = FilterFunction(y, y)
        grid = FrequencyGrid.for_orders(7, T)
        default = bin_integrate(ff, grid)
        fine = bin_integrate(ff, grid, panels_per_bin=64)
        np.testing.assert_allclose(default, fine, rtol=1e-8, atol=1e-30)

    def test_part_validation(self):
        y = switching_function(free_evolution(M, TAU))
        with pytest.raises(ValueError):
            bin_integrate(FilterFunction(y, y), FrequencyGrid(1, T), "abs")


class TestParseval:
    def test_sum_rule(self):
        for seq in [free_evolution(M, TAU), cosine_fttps(1, M, TAU),
                    cosine_fttps(7, M, TAU), sine_fttps(3, M, TAU)]:
            total = self_ff_integral(switching_function(seq))
            assert total == pytest.approx(np.pi * T, rel=1e-4)

    def test_bins_bounded_by_total(self):
        grid = FrequencyGrid.for_orders(7, T)
        y = switching_function(cosine_fttps(4, M, TAU))
        bins = bin_integrate(FilterFunction(y, y), grid)
        assert np.all(bins >= 0.0)
        assert 0.5 * np.pi * T <= np.sum(bins) <= np.pi * T * (1 + 1e-12)


class TestReconstructionSystem:
    def _system(self, K=8):
        plan = build_plan(K=K, m=M, tau_pi=TAU)
        grid = FrequencyGrid.for_orders(K - 1, T)
        return build_reconstruction_system(plan, grid)

    def test_row_and_column_counts(self):
        sys_ = self._system(K=8)
        assert sys_.n_rows == 6 * 8 - 2
        assert sys_.matrix.shape[1] == 5 * 8 - 1
        assert len(set(sys_.row_tags)) == sys_.n_rows

    def test_condition_number_recorded(self):
        sys_ = self._system(K=8)
        assert np.isfinite(sys_.cond)
        assert sys_.cond < 100.0

    def test_bin_constant_round_trip(self):
        sys_ = self._system(K=8)
        rng = np.random.default_rng(7)
        spectra = {
            "s11": rng.uniform(0.5, 2.0, 8),
            "s22": rng.uniform(0.5, 2.0, 8),
            "s1212": rng.uniform(0.1, 1.0, 8),
            "re_s12": rng.uniform(-0.5, 0.5, 8),
            "im_s12": np.concatenate([[0.0], rng.uniform(-0.5, 0.5, 7)]),
        }
        chi = sys_.matrix @ sys_.spectra_to_unknowns(spectra)
        x_hat, *_ = np.linalg.lstsq(sys_.matrix, chi, rcond=None)
        recovered = sys_.unknowns_to_spectra(x_hat)
        for name, truth in spectra.items():
            scale = np.max(np.abs(truth))
            assert np.max(np.abs(recovered[name] - truth)) <= 1e-8 * scale

    def test_missing_combo_rejected(self):
        plan = build_plan(K=4, m=M, tau_pi=TAU)
        pruned = ExperimentPlanPruned(plan, drop_combo=3)
        grid = FrequencyGrid.for_orders(3, T)
        with pytest.raises(DataError):
            build_reconstruction_system(pruned, grid)

    def test_single_order_plan(self):
        sys_ = self._system(K=1)
        assert sys_.n_rows == 4
        assert sys_.matrix.shape[1] == 4
        assert sys_.blocks["im_s12"] == slice(4, 4)
        assert np.isfinite(sys_.cond)

    def test_pack_unpack_inverse(self):
        sys_ = self._system(K=4)
        x = np.arange(1.0, 5 * 4)
        spectra = sys_.unknowns_to_spectra(x)
        assert spectra["im_s12"][0] == 0.0
        np.testing.assert_array_equal(sys_.spectra_to_unknowns(spectra), x)
        spectra["im_s12"][0] = 0.1
        with pytest.raises(ValueError):
            sys_.spectra_to_unknowns(spectra)

    def test_cross_row_structure(self):
        sys_ = self._system(K=8)
        tags = {tag: i for i, tag in enumerate(sys_.row_tags)}
        re_block, im_block = sys_.blocks["re_s12"], sys_.blocks["im_s12"]
        row3 = sys_.matrix[tags[(3, 2, "cross")]]
        # identical sequences: purely real cross filter
        assert np.all(row3[im_block] == 0.0)
        assert row3[re_block][2] > 0.0
        row4 = sys_.matrix[tags[(4, 2, "cross")]]
        # cosine/sine pairing: purely imaginary cross filter
        assert np.max(np.abs(row4[re_block])) <= \
            1e-10 * np.max(np.abs(row4[im_block]))
        assert np.any(row4[im_block] != 0.0)


class ExperimentPlanPruned:
    """Plan stand-in with one combination removed."""

    def __init__(self, plan, drop_combo):
        self.K = plan.K
        self.settings = tuple(s for s in plan.settings
                              if s.combo != drop_combo)

"""
Unit tests for ampchannel/states.py.

Analytic distributions, Wigner sampling of coherent and thermal states,
moment extraction and photon histograms from ensembles. Statistical checks
use fixed seeds and 5 standard errors.
"""

import math

import numpy as np
import pytest

from ampchannel.states import (
    MomentSet,
    PhaseSpaceEnsemble,
    PhotonDistribution,
    coherent_moments,
    coherent_number_dist,
    default_n_max,
    fock_moments,
    fock_number_dist,
    gaussian_ensemble,
    heterodyne_efficiency,
    homodyne_efficiency,
    homodyne_marginal,
    moments_from_ensemble,
    moments_of,
    number_hist_from_ensemble,
    thermal_moments,
    thermal_number_dist,
    total_variation,
    total_variation_error,
    wigner_sample_coherent,
    wigner_sample_thermal,
)


# ── PhotonDistribution ───────────────────────────────────────────────

class TestPhotonDistribution:
    def test_properties(self):
        dist = PhotonDistribution(probs=[0.25, 0.5, 0.25])
        assert dist.n_max == 2
        assert dist.mean == pytest.approx(1.0)
        assert dist.variance == pytest.approx(0.5)
        assert dist.fano == pytest.approx(0.5)
        assert dist.truncation_mass == 0.0

    def test_negative_probability(self):
        with pytest.raises(ValueError, match="non-negative"):
            PhotonDistribution(probs=[1.1, -0.1])

    def test_mass_above_one(self):
        with pytest.raises(ValueError, match="sum to"):
            PhotonDistribution(probs=[0.7, 0.7])

    def test_errors_shape(self):
        with pytest.raises(ValueError, match="one entry per bin"):
            PhotonDistribution(probs=[0.5, 0.5], errors=[0.1])

    def test_from_counts_binomial_errors(self):
        dist = PhotonDistribution.from_counts(np.array([30, 70]), 100)
        np.testing.assert_allclose(dist.probs, [0.3, 0.7])
        np.testing.assert_allclose(dist.errors, [math.sqrt(0.21 / 100)] * 2)


class TestAnalyticDistributions:
    def test_coherent(self):
        dist = coherent_number_dist(9.0, 80)
        assert dist.mean == pytest.approx(9.0, rel=1e-12)
        assert dist.variance == pytest.approx(9.0, rel=1e-10)
        assert dist.flags == ()

    def test_thermal(self):
        dist = thermal_number_dist(2.0, 200)
        assert dist.probs[0] == pytest.approx(1.0 / 3.0)
        assert dist.mean == pytest.approx(2.0, rel=1e-10)
        assert dist.variance == pytest.approx(6.0, rel=1e-8)

    def test_fock(self):
        dist = fock_number_dist(3, 5)
        assert dist.mean == 3.0
        assert dist.variance == 0.0

    def test_fock_outside_cutoff(self):
        with pytest.raises(ValueError, match="outside"):
            fock_number_dist(6, 5)

    def test_truncation_flagged(self):
        dist = coherent_number_dist(25.0, 10)
        assert dist.truncation_mass > 0.9
        assert any("truncation mass" in flag for flag in dist.flags)

    def test_negative_means_rejected(self):
        with pytest.raises(ValueError):
            coherent_number_dist(-1.0, 5)
        with pytest.raises(ValueError):
            thermal_number_dist(-1.0, 5)

    def test_default_n_max(self):
        assert default_n_max(10.0, 4.0) == 30


class TestTotalVariation:
    def test_identical(self):
        dist = coherent_number_dist(4.0, 40)
        assert total_variation(dist, dist) == 0.0

    def test_disjoint(self):
        assert total_variation(fock_number_dist(0, 3), fock_number_dist(3, 3)) == pytest.approx(1.0)

    def test_pads_shorter_support(self):
        assert total_variation([1.0], [0.5, 0.5]) == pytest.approx(0.5)

    def test_error_sums_per_bin(self):
        p = PhotonDistribution(probs=[0.5, 0.5], errors=[0.03, 0.04])
        q = PhotonDistribution(probs=[0.5, 0.5], errors=[0.04, 0.03])
        assert total_variation_error(p, q) == pytest.approx(0.05)

    def test_error_of_analytic_pair_is_zero(self):
        dist = coherent_number_dist(1.0, 10)
        assert total_variation_error(dist, dist) == 0.0


# ── Moments ──────────────────────────────────────────────────────────

class TestMoments:
    def test_coherent(self):
        m = coherent_moments(2.0 + 1.0j)
        assert m.mean_photons == pytest.approx(5.0)
        assert m.photon_variance == pytest.approx(5.0)
        assert m.coherent_term == pytest.approx((2.0 + 1.0j) ** 2)
        assert m.fano == pytest.approx(1.0)

    def test_thermal(self):
        m = thermal_moments(3.0)
        assert m.photon_variance == pytest.approx(12.0)
        assert m.coherent_term == 0j

    def test_fock(self):
        assert fock_moments(4).fano == 0.0

    def test_vacuum_fano_undefined(self):
        assert math.isnan(MomentSet(mean_amplitude=0j, mean_photons=0.0, photon_variance=0.0).fano)

    def test_moments_of_distribution(self):
        m = moments_of(thermal_number_dist(1.5, 300))
        assert m.mean_photons == pytest.approx(1.5, rel=1e-9)
        assert m.photon_variance == pytest.approx(1.5 ** 2 + 1.5, rel=1e-8)


# ── Phase-space ensembles ────────────────────────────────────────────

class TestEnsembleBasics:
    def test_rejects_empty(self):
        with pytest.raises(ValueError, match="at least one"):
            PhaseSpaceEnsemble(samples=np.array([]), n_s=1.0)

    def test_rejects_bad_n_s(self):
        with pytest.raises(ValueError, match="n_s"):
            PhaseSpaceEnsemble(samples=np.ones(3), n_s=0.0)

    def test_rotation_keeps_photons(self):
        e = wigner_sample_coherent(2.0, 10.0, 100, seed=1)
        np.testing.assert_allclose(e.rotated(0.7).photons, e.photons)

    def test_efficiencies(self):
        assert heterodyne_efficiency(-1.0) == pytest.approx(1.0)
        assert homodyne_efficiency(0.0) == pytest.approx(1.0)
        assert heterodyne_efficiency(0.0) == pytest.approx(2.0)


class TestWignerSampling:
    def test_deterministic_and_thread_independent(self):
        a = wigner_sample_coherent(1.0, 5.0, 10000, seed=3, threads=1)
        b = wigner_sample_coherent(1.0, 5.0, 10000, seed=3, threads=4)
        np.testing.assert_array_equal(a.samples, b.samples)

    def test_count_must_be_positive(self):
        with pytest.raises(ValueError, match="count"):
            wigner_sample_coherent(1.0, 5.0, 0, seed=3)

    @pytest.mark.parametrize("alpha", [0.0, 2.0, 3.95])
    def test_coherent_moments(self, alpha):
        e = wigner_sample_coherent(alpha, 55.0, 200000, seed=17)
        m = moments_from_ensemble(e)
        n = alpha ** 2
        assert abs(m.mean_photons - n) < 5 * m.mean_photons_se
        assert abs(m.photon_variance - n) < 5 * m.photon_variance_se
        assert abs(m.mean_amplitude - alpha) < 5 * math.sqrt(0.5 / e.count)

    def test_thermal_moments(self):
        e = wigner_sample_thermal(2.0, 1.0, 200000, seed=5)
        m = moments_from_ensemble(e)
        assert abs(m.mean_photons - 2.0) < 5 * m.mean_photons_se
        assert abs(m.photon_variance - 6.0) < 5 * m.photon_variance_se

    def test_thermal_negative_mean_rejected(self):
        with pytest.raises(ValueError):
            wigner_sample_thermal(-0.5, 1.0, 10, seed=0)

    def test_gaussian_ensemble_total_variance(self):
        e = gaussian_ensemble(0j, 3.0, 2.0, 100000, seed=8)
        spread = np.mean(np.abs(e.samples) ** 2)
        assert spread == pytest.approx(1.5, rel=0.02)

    def test_vacuum_quadrature_variance(self):
        marginal = homodyne_marginal(wigner_sample_coherent(0.0, 1.0, 100000, seed=2))
        assert marginal.variance == pytest.approx(0.25, rel=0.02)
        assert abs(marginal.mean) < 5 * marginal.mean_se
        assert marginal.density.size == 64

    @pytest.mark.parametrize("alpha", [0.0, 2.0, 3.95])
    def test_homodyne_marginal_tracks_amplitude(self, alpha):
        marginal = homodyne_marginal(wigner_sample_coherent(alpha, 55.0, 100000, seed=6))
        assert abs(marginal.mean - alpha) < 5 * marginal.mean_se
        # quadrature noise stays at the vacuum level ¼ whatever the amplitude
        assert marginal.variance == pytest.approx(0.25, rel=0.02)

    def test_coherent_counts_close_to_poisson(self):
        alpha_sq = 15.6
        e = wigner_sample_coherent(math.sqrt(alpha_sq), 55.0, 100000, seed=14)
        hist = number_hist_from_ensemble(e, 60)
        assert total_variation(hist, coherent_number_dist(alpha_sq, 60)) <= 0.08


class TestEnsembleFlags:
    def test_negative_mean_flagged(self):
        e = PhaseSpaceEnsemble(samples=np.zeros(100, dtype=complex), n_s=1.0)
        m = moments_from_ensemble(e)
        assert m.mean_photons == pytest.approx(-0.5)
        assert any("negative photon mean" in flag for flag in m.flags)


class TestNumberHistogram:
    def test_vacuum_zero_bin(self):
        # rint(n_s|u|² − ½) = 0 iff the Wigner intensity is below 1: probability 1 − e^{−2}
        e = wigner_sample_coherent(0.0, 55.0, 100000, seed=21)
        hist = number_hist_from_ensemble(e, 20)
        expected = 1.0 - math.exp(-2.0)
        assert abs(hist.probs[0] - expected) < 5 * hist.errors[0]
        assert hist.mean < 0.2

    def test_normalized(self):
        hist = number_hist_from_ensemble(wigner_sample_coherent(3.0, 10.0, 5000, seed=4), 60)
        assert hist.probs.sum() == pytest.approx(1.0)
        assert hist.n_max == 60

    def test_clamped_samples_flagged(self):
        hist = number_hist_from_ensemble(wigner_sample_coherent(10.0, 10.0, 1000, seed=4), 10)
        assert any("clamped" in flag for flag in hist.flags)
        assert hist.probs[10] > 0.9

    @pytest.mark.parametrize("make_ensemble", [
        lambda: wigner_sample_coherent(0.0, 55.0, 100000, seed=25),
        lambda: wigner_sample_coherent(math.sqrt(15.6), 55.0, 100000, seed=26),
        lambda: wigner_sample_thermal(2.0, 55.0, 100000, seed=27),
    ], ids=["vacuum", "coherent", "thermal"])
    def test_mean_agrees_with_moments(self, make_ensemble):
        e = make_ensemble()
        hist = number_hist_from_ensemble(e, 80)
        m = moments_from_ensemble(e)
        assert abs(hist.mean - m.mean_photons) < 0.5 + 5 * m.mean_photons_se

"""
Unit tests for ampchannel/laser_fpe.py.

Covers parameter validation, the atom-field rate mapping, drift and diffusion
coefficients, the Euler–Maruyama step, validity margins and the ensemble
engines.
"""

import math

import numpy as np
import pytest

from ampchannel.channel_report import to_db
from ampchannel.laser_fpe import (
    AtomFieldRates,
    ConstantCoefficientModel,
    DriftDiffusion,
    LaserParams,
    NonDiffusiveRegion,
    ThresholdSingularityError,
    ValidityError,
    above_threshold,
    diffusion_at,
    drift_at,
    em_step,
    evolve_ensemble,
    linear_equivalent_pia,
    linear_idler_photons,
    measure_small_signal_gain,
    quoted_linear_gain,
    real_diffusion_matrix,
    refine_step,
    small_signal_gain,
    stationary_histogram,
    validity_check,
)
from ampchannel.states import gaussian_ensemble, moments_from_ensemble, wigner_sample_coherent

FIG3 = LaserParams(C=4.5, sigma0=1.0, N=55, gamma=1.0, f=0.01, n_s=55.0)
LINEAR = LaserParams(C=4.5, sigma0=1.0, N=1000, gamma=1.0, f=0.01, n_s=1e4)
ONE_ATOM = LaserParams(C=30.0, sigma0=0.05, N=1, gamma=1.0, f=1.0, n_s=15.0)


class FixedCoefficients:
    """Position-independent coefficients with an arbitrary D_uu."""

    def __init__(self, d_uu, d_uustar, q_u=0j):
        self.dd = DriftDiffusion(q_u=q_u, d_uu=d_uu, d_uustar=d_uustar)

    def coefficients(self, u):
        shape = np.shape(u)
        return DriftDiffusion(
            q_u=np.full(shape, self.dd.q_u, dtype=complex),
            d_uu=np.full(shape, self.dd.d_uu, dtype=complex),
            d_uustar=np.full(shape, self.dd.d_uustar, dtype=float),
        )


# ── Parameters ───────────────────────────────────────────────────────

class TestLaserParams:
    @pytest.mark.parametrize("field, value, match", [
        ("C", 0.0, "C must be positive"),
        ("sigma0", 1.5, "sigma0"),
        ("N", 0, "N must be"),
        ("N", 2.5, "N must be"),
        ("gamma", -1.0, "gamma"),
        ("f", 0.0, "f must be positive"),
        ("n_s", 0.0, "n_s"),
    ])
    def test_rejects(self, field, value, match):
        kwargs = dict(C=1.0, sigma0=0.5, N=1, gamma=1.0, f=1.0, n_s=10.0)
        kwargs[field] = value
        with pytest.raises(ValueError, match=match):
            LaserParams(**kwargs)

    def test_integral_float_atom_count(self):
        assert LaserParams(C=1.0, sigma0=0.5, N=3.0, gamma=1.0, f=1.0, n_s=10.0).N == 3


class TestAtomFieldRates:
    def test_one_atom_point(self):
        rates = AtomFieldRates.from_laser(ONE_ATOM)
        assert rates.gamma_perp == pytest.approx(900.0)
        assert rates.gamma_par == pytest.approx(1800.0)
        assert rates.g == pytest.approx(900.0 / math.sqrt(30.0))

    @pytest.mark.parametrize("params", [FIG3, LINEAR, ONE_ATOM], ids=["fig3", "linear", "one_atom"])
    def test_round_trip(self, params):
        back = AtomFieldRates.from_laser(params).to_laser(params.sigma0)
        for name in ("C", "f", "n_s", "gamma"):
            assert getattr(back, name) == pytest.approx(getattr(params, name), rel=1e-12)
        assert back.N == params.N

    def test_no_coupling(self):
        rates = AtomFieldRates(gamma_par=1.0, gamma_perp=1.0, g=0.0, gamma=1.0)
        with pytest.raises(ValueError, match="g = 0"):
            rates.to_laser(0.5)


# ── Coefficients ─────────────────────────────────────────────────────

class TestCoefficients:
    def test_origin(self):
        dd = diffusion_at(0j, FIG3)
        assert dd.d_uu == 0
        assert dd.d_uustar == pytest.approx((1.0 + 2.0 * FIG3.C) / (4.0 * FIG3.n_s))

    def test_large_saturation_limit(self):
        p = LaserParams(C=2.0, sigma0=0.8, N=10, gamma=1.0, f=0.5, n_s=1e12)
        assert drift_at(0j, p).real == pytest.approx(0.5 * (1.0 - 2.0 * 0.8 * 2.0), rel=1e-9)

    def test_vectorised_matches_scalar(self):
        points = np.array([0.1 + 0.2j, -0.5j, 1.3])
        vector = diffusion_at(points, FIG3)
        for i, u in enumerate(points):
            scalar = diffusion_at(complex(u), FIG3)
            assert vector.d_uu[i] == pytest.approx(scalar.d_uu)
            assert vector.d_uustar[i] == pytest.approx(scalar.d_uustar)
            assert vector.q_u[i] == pytest.approx(scalar.q_u)

    def test_drift_depends_on_modulus_only(self):
        assert drift_at(0.6 + 0j, FIG3) == pytest.approx(drift_at(0.6j, FIG3))


class TestRealDiffusion:
    def test_isotropic(self):
        M = real_diffusion_matrix(DriftDiffusion(q_u=0j, d_uu=0j, d_uustar=0.8))
        np.testing.assert_allclose(M, [[0.4, 0.0], [0.0, 0.4]])

    def test_non_diffusive(self):
        with pytest.raises(NonDiffusiveRegion, match="not positive semidefinite") as exc:
            real_diffusion_matrix(DriftDiffusion(q_u=0j, d_uu=2.0, d_uustar=1.0), u=0.5)
        assert exc.value.eigenvalues[0] == pytest.approx(-0.5)

    @pytest.mark.parametrize("d_uu", [0j, 0.3 + 0.2j, -0.5j, 0.9])
    def test_noise_factor_reproduces_covariance(self, d_uu):
        model = FixedCoefficients(d_uu=d_uu, d_uustar=1.0)
        col_x = em_step(0j, model, 1.0, [1.0, 0.0])
        col_y = em_step(0j, model, 1.0, [0.0, 1.0])
        B = np.array([[col_x.real, col_y.real], [col_x.imag, col_y.imag]])
        M = real_diffusion_matrix(model.dd)
        np.testing.assert_allclose(B @ B.T, 2.0 * M, atol=1e-12)


# ── Euler–Maruyama ───────────────────────────────────────────────────

class TestEmStep:
    def test_deterministic_drift(self):
        model = ConstantCoefficientModel(Q=1.0, D=0.0)
        assert em_step(1.0 + 0j, model, 0.1, [0.0, 0.0]) == pytest.approx(0.9)

    def test_unit_noise(self):
        model = ConstantCoefficientModel(Q=0.0, D=1.0)
        assert em_step(0j, model, 0.04, [1.0, -1.0]) == pytest.approx(0.2 - 0.2j)

    def test_rejects_non_positive_dt(self):
        with pytest.raises(ValueError, match="dt"):
            em_step(0j, ConstantCoefficientModel(0.0, 1.0), 0.0, [0.0, 0.0])

    def test_reports_failing_trajectory(self):
        model = FixedCoefficients(d_uu=3.0, d_uustar=1.0)
        with pytest.raises(NonDiffusiveRegion) as exc:
            em_step(np.zeros(3, dtype=complex), model, 0.1, np.zeros((3, 2)), offset=10, time=0.5)
        assert exc.value.trajectory == 10
        assert exc.value.time == 0.5


class TestEvolveEnsemble:
    def test_zero_time_copies(self):
        e = wigner_sample_coherent(1.0, 10.0, 100, seed=1)
        out = evolve_ensemble(e, ConstantCoefficientModel(1.0, 1.0), 0.0)
        np.testing.assert_array_equal(out.samples, e.samples)
        assert out.samples is not e.samples

    def test_negative_time(self):
        e = wigner_sample_coherent(1.0, 10.0, 10, seed=1)
        with pytest.raises(ValueError, match="non-negative"):
            evolve_ensemble(e, ConstantCoefficientModel(1.0, 1.0), -1.0)

    def test_independent_of_threads(self):
        e = wigner_sample_coherent(2.0, LINEAR.n_s, 9000, seed=3)
        one = evolve_ensemble(e, LINEAR, 0.3, dt=1e-2, seed=3, threads=1)
        three = evolve_ensemble(e, LINEAR, 0.3, dt=1e-2, seed=3, threads=3)
        np.testing.assert_array_equal(one.samples, three.samples)

    def test_seed_changes_noise(self):
        e = wigner_sample_coherent(2.0, LINEAR.n_s, 100, seed=3)
        a = evolve_ensemble(e, LINEAR, 0.3, dt=1e-2, seed=3)
        b = evolve_ensemble(e, LINEAR, 0.3, dt=1e-2, seed=4)
        assert not np.array_equal(a.samples, b.samples)

    def test_phase_covariant(self):
        e = wigner_sample_coherent(2.0, LINEAR.n_s, 20000, seed=8)
        out = evolve_ensemble(e, LINEAR, 0.3, dt=1e-2, seed=8)
        turned = evolve_ensemble(e.rotated(math.pi / 2), LINEAR, 0.3, dt=1e-2, seed=9)
        m, m_turned = moments_from_ensemble(out), moments_from_ensemble(turned)

        spread = math.sqrt(LINEAR.n_s * np.mean(np.abs(out.samples - out.samples.mean()) ** 2) / out.count)
        assert abs(m_turned.mean_amplitude - 1j * m.mean_amplitude) < 5 * math.sqrt(2) * spread
        mean_se = math.hypot(m.mean_photons_se, m_turned.mean_photons_se)
        assert abs(m_turned.mean_photons - m.mean_photons) < 5 * mean_se
        variance_se = math.hypot(m.photon_variance_se, m_turned.photon_variance_se)
        assert abs(m_turned.photon_variance - m.photon_variance) < 5 * variance_se

    def test_invalid_parameters_refused(self):
        e = wigner_sample_coherent(3.95, FIG3.n_s, 50, seed=1)
        with pytest.raises(ValidityError, match="trace_time_inversion"):
            evolve_ensemble(e, FIG3, 0.2, dt=1e-3, seed=1)

    def test_invalid_parameters_with_override(self):
        e = wigner_sample_coherent(3.95, FIG3.n_s, 50, seed=1)
        out = evolve_ensemble(e, FIG3, 0.2, dt=1e-3, seed=1, allow_invalid=True)
        assert out.count == 50


class TestRefineStep:
    def test_smooth_model_converges(self):
        e = gaussian_ensemble(1.0, 0.5, 1.0, 5000, seed=2)
        result = refine_step(e, ConstantCoefficientModel(Q=1.0, D=0.5), 1.0, dt=5e-3, seed=2)
        assert result.converged
        assert result.halvings == 0
        assert len(result.shifts_in_se) == 1


# ── Validity and gain ────────────────────────────────────────────────

class TestValidity:
    def test_fig3_fails_trace_time_only(self):
        report = validity_check(FIG3, 0.2)
        assert report.adiabatic_ok
        assert report.saturation_ok
        assert not report.trace_time_ok
        assert not report.passed
        assert report.failures() == ["trace_time_inversion"]
        assert report.margins["trace_time_inversion"] == pytest.approx(3.6)

    def test_linear_regime_passes(self):
        assert validity_check(LINEAR, 0.3).passed

    def test_strictness(self):
        assert validity_check(FIG3, 0.2, strictness=1.0).passed

    def test_needs_positive_time(self):
        with pytest.raises(ValueError, match="positive"):
            validity_check(FIG3, 0.0)


class TestGain:
    def test_fig3_small_signal_gain(self):
        assert to_db(small_signal_gain(FIG3, 0.2)) == pytest.approx(6.77, abs=0.01)
        assert abs(to_db(small_signal_gain(FIG3, 0.2)) - 6.873) < 0.3

    def test_quoted_linear_gain(self):
        assert quoted_linear_gain(FIG3, 0.2) == pytest.approx(math.exp(0.4 * (1 - 9.0)))

    def test_above_threshold(self):
        assert above_threshold(FIG3)
        assert not above_threshold(LaserParams(C=0.4, sigma0=1.0, N=1, gamma=1.0, f=1.0, n_s=10.0))

    def test_idler_photons(self):
        assert linear_idler_photons(FIG3) == pytest.approx(1.0 / 8.0)

    def test_threshold_singularity(self):
        p = LaserParams(C=0.5, sigma0=1.0, N=1, gamma=1.0, f=1.0, n_s=10.0)
        with pytest.raises(ThresholdSingularityError, match="threshold"):
            linear_idler_photons(p)

    def test_measured_gain_matches_drift(self):
        measured = measure_small_signal_gain(LINEAR, 0.3, count=2000, dt=1e-3, seed=5, probe_photons=0.1)
        assert measured.gain == pytest.approx(small_signal_gain(LINEAR, 0.3), rel=1e-2)
        assert measured.probe_photons == 0.1

    def test_linear_equivalent(self):
        pia = linear_equivalent_pia(LINEAR, 0.3, count=1000, dt=1e-3, seed=5)
        assert pia.idler_photons == pytest.approx(0.125)
        assert pia.gain_n > 1.0


class TestStationaryHistogram:
    def test_snapshots_and_normalisation(self):
        hist = stationary_histogram(ONE_ATOM, n_max=80, burn_in=1.0, t_avg=1.0, count=200,
                                    dt=1e-3, seed=2)
        assert hist.snapshots == 10
        assert hist.distribution.probs.sum() == pytest.approx(1.0)
        assert hist.distribution.errors.shape == (81,)
        assert hist.mean_photons == pytest.approx(hist.distribution.mean)

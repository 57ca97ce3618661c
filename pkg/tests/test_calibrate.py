import numpy as np
import pytest

from roomir.calibrate import (
    CalibrationError,
    CalibrationResult,
    CalibrationSetup,
    arc_receiver_positions,
    calibrate_both,
    calibrate_fdtd,
    calibrate_ga,
    combined_eta,
    eta_from_energies,
)
from roomir.fdtd import FdtdConfig, band_limited_impulse
from roomir.ga import GaConfig

DESK_FDTD = FdtdConfig(f_max=350.0)


class TestEtaFromEnergies:
    def test_identity_receiver(self):
        # recording equal to the source signal: eta contribution 1, error 0 dB
        pulse = band_limited_impulse(255.0, 8000.0)
        e_s = float(np.sum(pulse**2))
        eta, errors = eta_from_energies(e_s, [e_s, e_s, e_s])
        assert eta == pytest.approx(1.0, rel=1e-12)
        np.testing.assert_allclose(errors, 0.0, atol=1e-12)

    def test_half_amplitude_recordings(self):
        # recordings at half amplitude: per-receiver eta 2, uniform -> 0 dB error
        pulse = band_limited_impulse(255.0, 8000.0)
        e_s = float(np.sum(pulse**2))
        e_r = 0.25 * e_s
        eta, errors = eta_from_energies(e_s, [e_r] * 5)
        assert eta == pytest.approx(2.0, rel=1e-12)
        np.testing.assert_allclose(errors, 0.0, atol=1e-12)

    def test_spread_gives_signed_errors(self):
        eta, errors = eta_from_energies(1.0, [0.25, 1.0])
        # per-receiver etas 2 and 1, mean 1.5: errors 20log10(1.5/2), 20log10(1.5)
        assert eta == pytest.approx(1.5)
        assert errors[0] == pytest.approx(20 * np.log10(1.5 / 2.0))
        assert errors[1] == pytest.approx(20 * np.log10(1.5))

    def test_empty_window_rejected(self):
        with pytest.raises(CalibrationError):
            eta_from_energies(1.0, [0.5, 0.0])


@pytest.fixture(scope="module")
def result():
    return calibrate_fdtd(CalibrationSetup(receiver_count=12), DESK_FDTD)


class TestFdtdCalibration:
    def test_error_bounds(self, result):
        assert result.mean_error_db <= 1.0
        assert result.max_error_db <= 2.0

    def test_mean_le_max(self, result):
        assert result.mean_error_db <= result.max_error_db

    def test_unit_energy_contract(self, result):
        # after calibration a receiver at ~1 m carries the source energy
        for e_r in result.e_receiver:
            calibrated = result.eta_w**2 * e_r
            db = 10 * np.log10(calibrated / result.e_source)
            assert abs(db) <= 2.0

    def test_snapped_distances_near_request(self, result):
        d = np.asarray(result.receiver_distances)
        assert np.all(np.abs(d - 1.0) < 0.1)

    def test_scaling_invariance(self):
        # scaling the raw wave output by k scales eta_w by 1/k and leaves
        # calibrated recordings unchanged
        setup = CalibrationSetup(receiver_count=4)
        base = calibrate_fdtd(setup, DESK_FDTD, output_gain=1.0)
        for k in (0.1, 10.0):
            scaled = calibrate_fdtd(setup, DESK_FDTD, output_gain=k)
            assert scaled.eta_w == pytest.approx(base.eta_w / k, rel=1e-9)
            for rec_b, rec_s in zip(base.recordings, scaled.recordings):
                cal_b = base.eta_w * rec_b
                cal_s = scaled.eta_w * rec_s
                scale = np.max(np.abs(cal_b))
                assert np.max(np.abs(cal_b - cal_s)) <= 1e-9 * scale

    def test_deterministic(self):
        setup = CalibrationSetup(receiver_count=3)
        a = calibrate_fdtd(setup, DESK_FDTD)
        b = calibrate_fdtd(setup, DESK_FDTD)
        assert a.eta_w == b.eta_w
        assert a.per_receiver_error_db == b.per_receiver_error_db


class TestGaCalibration:
    def test_eta_matches_analytic_direct_term(self):
        # direct amplitude k/r with k = 1/sqrt(4 pi): eta_g = sqrt(4 pi) at 1 m
        eta = calibrate_ga(CalibrationSetup(receiver_count=5), GaConfig())
        assert eta == pytest.approx(np.sqrt(4 * np.pi), rel=1e-9)

    def test_independent_of_ray_count(self):
        setup = CalibrationSetup(receiver_count=3)
        a = calibrate_ga(setup, GaConfig(ray_count=100))
        b = calibrate_ga(setup, GaConfig(ray_count=20_000))
        assert a == pytest.approx(b, rel=1e-12)

    def test_inverse_square_energy(self):
        # E_r falls as 1/r^2 for the analytic direct term
        e = {}
        for r in (1.0, 2.0):
            eta = calibrate_ga(CalibrationSetup(distance=r, receiver_count=2), GaConfig())
            e[r] = 1.0 / eta**2  # eta = 1/sqrt(E_direct)
        assert e[2.0] / e[1.0] == pytest.approx(0.25, abs=1e-9)


class TestCombinedEta:
    def test_quotients(self):
        assert combined_eta(2.0, 2.0) == pytest.approx(1.0)
        assert combined_eta(3.0, 1.5) == pytest.approx(2.0)

    def test_nonpositive_rejected(self):
        with pytest.raises(CalibrationError):
            combined_eta(0.0, 1.0)
        with pytest.raises(CalibrationError):
            combined_eta(1.0, -2.0)


class TestCalibrationResult:
    def test_json_roundtrip(self, tmp_path):
        result = CalibrationResult(
            eta_w=44.0,
            eta_g=3.54,
            eta_combined=44.0 / 3.54,
            per_receiver_error_db=[0.1, -0.2],
            mean_error_db=0.15,
            max_error_db=0.2,
            e_source=0.01,
            e_receiver=[1e-5, 2e-5],
        )
        path = tmp_path / "cal.json"
        result.to_json(path)
        loaded = CalibrationResult.from_json(path)
        assert loaded == result

    def test_mean_above_max_rejected(self):
        with pytest.raises(CalibrationError):
            CalibrationResult(
                eta_w=1.0,
                eta_g=1.0,
                eta_combined=1.0,
                per_receiver_error_db=[0.0],
                mean_error_db=0.5,
                max_error_db=0.1,
                e_source=1.0,
                e_receiver=[1.0],
            )

    def test_arc_geometry(self):
        setup = CalibrationSetup(receiver_count=90, arc_degrees=90.0)
        pos = arc_receiver_positions(setup, np.zeros(3))
        assert pos.shape == (90, 3)
        d = np.linalg.norm(pos, axis=1)
        np.testing.assert_allclose(d, 1.0, rtol=1e-12)
        angles = np.degrees(np.arctan2(pos[:, 1], pos[:, 0]))
        assert angles[0] == pytest.approx(0.0, abs=1e-9)
        assert angles[-1] == pytest.approx(90.0, abs=1e-9)


def test_calibrate_both_combines():
    setup = CalibrationSetup(receiver_count=4)
    result = calibrate_both(setup, DESK_FDTD, GaConfig())
    assert result.eta_combined == pytest.approx(result.eta_w / result.eta_g, rel=1e-12)
    assert result.eta_g == pytest.approx(np.sqrt(4 * np.pi), rel=1e-9)

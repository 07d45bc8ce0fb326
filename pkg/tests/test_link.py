import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from coexqkd import bb84, detection
from coexqkd.errors import InfeasibleCalibration
from coexqkd.link import (BACK_TO_BACK, CLASSICAL, QUANTUM, FiberSpec, RamanModel, WdmSpec,
                          calibrate_isolation, calibrate_raman, classical_launch_power,
                          leakage_noise_rate, link_transmittance, raman_noise_rate)
from coexqkd.photonics import FlatTopFilter, PowerLevel, Wavelength, photon_energy

CLEANUP = FlatTopFilter.from_ghz(Wavelength.from_nm(1550.12), 200.0, out_of_band_isolation_db=40.0)
SPAD = detection.SpadSpec()


def qber_of_noise(mu_arrival=2.2e-4, e_opt=0.0):
    def fn(noise_rate):
        r = detection.expected_window_rates(mu_arrival, SPAD, 1e8, 0.5, noise_rate)
        return bb84.qber_analytic(r.signal, r.dark, r.noise, e_opt)
    return fn


class TestTransmittance:
    def test_lossless(self):
        w = WdmSpec(0.0, 0.0, 0.0, 0.0)
        assert link_transmittance(BACK_TO_BACK, w, QUANTUM) == 1.0

    def test_one_km(self):
        w = WdmSpec(mux_insertion_loss_quantum_db=1.0)
        assert link_transmittance(FiberSpec(1.0), w, QUANTUM) == pytest.approx(10 ** -0.121, rel=1e-12)
        assert 10 ** -0.121 == pytest.approx(0.757, abs=5e-4)

    @given(st.floats(0, 100))
    def test_length_doubles_loss(self, km):
        a = FiberSpec(km).loss_db(CLASSICAL)
        assert FiberSpec(2 * km).loss_db(CLASSICAL) == pytest.approx(2 * a)

    def test_launch_from_rop(self):
        rop = PowerLevel.from_dbm(-28.4)
        launch = classical_launch_power(rop, FiberSpec(1.0), WdmSpec())
        assert launch.dbm == pytest.approx(-28.4 + 2.2 + 1.0, abs=1e-12)

    def test_invalid_specs(self):
        with pytest.raises(ValueError):
            FiberSpec(-1.0)
        with pytest.raises(ValueError):
            WdmSpec(mux_insertion_loss_quantum_db=-0.1)
        with pytest.raises(ValueError):
            RamanModel(-1.0)


class TestNoiseRates:
    def test_raman_zero_length(self):
        assert raman_noise_rate(RamanModel(1e5), PowerLevel(1e-3), BACK_TO_BACK, 1.6) == 0.0

    def test_raman_formula(self):
        assert raman_noise_rate(RamanModel(2.0), PowerLevel(5e-3), FiberSpec(3.0), 0.5) == pytest.approx(15.0)

    @given(st.floats(0, 1e6), st.floats(0, 1e-2), st.floats(0, 50), st.floats(0, 10))
    def test_raman_linear(self, beta, p, km, bw):
        r = RamanModel(beta)
        one = raman_noise_rate(r, PowerLevel(p), FiberSpec(km), bw)
        assert raman_noise_rate(r, PowerLevel(2 * p), FiberSpec(km), bw) == pytest.approx(2 * one)
        assert raman_noise_rate(r, PowerLevel(p), FiberSpec(km / 2), bw) == pytest.approx(one / 2)

    def test_leakage_formula(self):
        w = WdmSpec(classical_to_quantum_isolation_db=60.0)
        rop = PowerLevel(1e-6)
        expected = 1e-6 * 10 ** (-(60 + 40) / 10) / photon_energy(Wavelength.from_nm(852.0))
        assert leakage_noise_rate(w, rop, CLEANUP) == pytest.approx(expected, rel=1e-12)

    def test_leakage_ten_db(self):
        rop = PowerLevel(1e-6)
        a = leakage_noise_rate(WdmSpec(classical_to_quantum_isolation_db=50.0), rop, CLEANUP)
        b = leakage_noise_rate(WdmSpec(classical_to_quantum_isolation_db=60.0), rop, CLEANUP)
        assert b / a == pytest.approx(0.1, rel=1e-12)

    def test_leakage_infinite_isolation(self):
        w = WdmSpec(classical_to_quantum_isolation_db=math.inf)
        assert leakage_noise_rate(w, PowerLevel(1e-3), CLEANUP) == 0.0


class TestCalibrateIsolation:
    def test_hits_target(self):
        fn = qber_of_noise()
        rop = PowerLevel.from_dbm(-23.5)
        iso = calibrate_isolation(fn, WdmSpec(), rop, CLEANUP)
        leak = leakage_noise_rate(WdmSpec(classical_to_quantum_isolation_db=iso), rop, CLEANUP)
        assert abs(fn(leak) - 0.11) < 1e-6
        assert 0 < iso < math.inf

    def test_ten_db_lower_rop(self):
        fn = qber_of_noise()
        a = calibrate_isolation(fn, WdmSpec(), PowerLevel.from_dbm(-23.5), CLEANUP)
        b = calibrate_isolation(fn, WdmSpec(), PowerLevel.from_dbm(-33.5), CLEANUP)
        assert a - b == pytest.approx(10.0, abs=1e-6)

    def test_baseline_above_threshold(self):
        with pytest.raises(InfeasibleCalibration):
            calibrate_isolation(qber_of_noise(e_opt=0.12), WdmSpec(), PowerLevel(1e-6), CLEANUP)


class TestCalibrateRaman:
    def test_hits_target(self):
        fn = qber_of_noise()
        launch = PowerLevel.from_dbm(-25.2)
        r = calibrate_raman(fn, 50.0, launch, FiberSpec(1.0), 1.6)
        rate = 50.0 + raman_noise_rate(r, launch, FiberSpec(1.0), 1.6)
        assert abs(fn(rate) - 0.11) < 1e-6
        assert r.beta > 0

    def test_leakage_alone_crossing_is_infeasible(self):
        fn = qber_of_noise()
        with pytest.raises(InfeasibleCalibration) as err:
            calibrate_raman(fn, 1e7, PowerLevel(1e-6), FiberSpec(1.0), 1.6)
        assert err.value.step == "raman"

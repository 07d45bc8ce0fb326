import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from coexqkd.emitter import (EmitterSpec, EmitterVLI, TxBudget, calibrate_tx_loss,
                             mu_at_modulator_output, mu_headroom_db, mu_to_power, output_power)
from coexqkd.errors import InfeasibleCalibration, OutOfRangeError
from coexqkd.photonics import Wavelength

H, C = 6.62607015e-34, 299_792_458.0


def uw_emitter():
    # the 32 uW table quoted for the device
    return EmitterSpec(EmitterVLI((0.0, 20.0), (0.0, 32e-6)))


class TestVli:
    def test_default_knot(self):
        assert output_power(EmitterSpec(), 20.0).watts == 32e-12
        assert output_power(uw_emitter(), 20.0).watts == pytest.approx(32e-6)

    def test_knot_identity_and_midpoint(self):
        e = EmitterSpec(EmitterVLI((0.0, 10.0, 20.0), (0.0, 10e-6, 20e-6)))
        assert output_power(e, 10.0).watts == 10e-6
        assert output_power(e, 15.0).watts == pytest.approx(15e-6)

    @pytest.mark.parametrize("i_f", [-0.1, 20.01, 100.0])
    def test_no_extrapolation(self, i_f):
        with pytest.raises(OutOfRangeError):
            output_power(EmitterSpec(), i_f)

    def test_table_validation(self):
        with pytest.raises(ValueError):
            EmitterVLI((0.0, 0.0), (0.0, 1.0))
        with pytest.raises(ValueError):
            EmitterVLI((0.0, 1.0), (0.0, -1.0))

    @given(st.floats(0, 20), st.floats(0, 20))
    def test_monotone(self, a, b):
        lo, hi = sorted((a, b))
        e = EmitterSpec()
        assert output_power(e, lo).watts <= output_power(e, hi).watts


class TestMuBudget:
    def test_power_for_anchor_mu(self):
        p = mu_to_power(0.0148, Wavelength.from_nm(1550.12), 1e8)
        assert p.watts == pytest.approx(0.0148 * H * C / 1550.12e-9 * 1e8, rel=1e-12)
        assert p.watts == pytest.approx(1.897e-13, rel=1e-3)
        assert p.dbm == pytest.approx(-97.2, abs=0.05)

    def test_calibration_round_trip(self):
        e, b = EmitterSpec(), TxBudget()
        loss = calibrate_tx_loss(e, b, 0.0148, 20.0)
        mu = mu_at_modulator_output(e, TxBudget(modulator_insertion_loss_db=loss), 20.0)
        assert mu == pytest.approx(0.0148, rel=1e-9)
        assert abs(mu - 0.0148) < 1e-6

    def test_microwatt_source_loss(self):
        # hand budget: 10 log10(32 uW * slice / P(mu)); the slice is the erf mass in
        # the passband plus the 40 dB out-of-band floor on the remainder
        loss = calibrate_tx_loss(uw_emitter(), TxBudget(), 0.0148, 20.0)
        sigma = 58.0 / (2 * math.sqrt(2 * math.log(2)))
        half = (1550.12e-9) ** 2 * 200e9 / C * 1e9 / 2
        z = lambda x: (x - 1548.0) / (sigma * math.sqrt(2))
        inside = (math.erf(z(1550.12 + half)) - math.erf(z(1550.12 - half))) / 2
        slice_frac = inside + 1e-4 * (1 - inside)
        p_mu = 0.0148 * H * C / 1550.12e-9 * 1e8
        assert loss == pytest.approx(10 * math.log10(32e-6 * slice_frac / p_mu), abs=1e-6)
        assert loss == pytest.approx(66.4, abs=0.05)

    def test_three_db_more_loss_halves_mu(self):
        e = EmitterSpec()
        mu0 = mu_at_modulator_output(e, TxBudget(modulator_insertion_loss_db=2.0), 20.0)
        mu3 = mu_at_modulator_output(e, TxBudget(modulator_insertion_loss_db=5.0), 20.0)
        assert mu3 / mu0 == pytest.approx(0.5012, abs=1e-4)

    @given(st.floats(0, 30), st.floats(0, 10))
    def test_loss_is_multiplicative(self, base, extra):
        e = EmitterSpec()
        a = mu_at_modulator_output(e, TxBudget(modulator_insertion_loss_db=base), 20.0)
        b = mu_at_modulator_output(e, TxBudget(modulator_insertion_loss_db=base + extra), 20.0)
        assert b == pytest.approx(a * 10 ** (-extra / 10), rel=1e-12)

    @given(st.floats(1e-13, 1e-3))
    def test_linear_in_output_power(self, p):
        a = mu_at_modulator_output(EmitterSpec(EmitterVLI((0.0, 20.0), (0.0, p))), TxBudget(), 20.0)
        b = mu_at_modulator_output(EmitterSpec(EmitterVLI((0.0, 20.0), (0.0, 2 * p))), TxBudget(), 20.0)
        assert b == pytest.approx(2 * a, rel=1e-12)

    def test_zero_loss_fixed_point(self):
        e, b = EmitterSpec(), TxBudget()
        mu_max = mu_at_modulator_output(e, b, 20.0)
        assert calibrate_tx_loss(e, b, mu_max, 20.0) == pytest.approx(0.0, abs=1e-12)

    def test_unreachable_mu_is_infeasible(self):
        e, b = EmitterSpec(), TxBudget()
        with pytest.raises(InfeasibleCalibration) as err:
            calibrate_tx_loss(e, b, 0.1, 20.0)
        assert err.value.step == "tx_loss"
        # the shortfall from the calibrated level is the headroom
        mu_max = mu_at_modulator_output(e, b, 20.0)
        loss = calibrate_tx_loss(e, b, 0.0148, 20.0)
        assert loss - mu_headroom_db(0.0148, 0.1) < 0
        assert mu_headroom_db(mu_max, 0.1) == pytest.approx(mu_headroom_db(0.0148, 0.1) - loss)


class TestHeadroom:
    def test_values(self):
        assert mu_headroom_db(0.0148, 0.1) == pytest.approx(8.298, abs=1e-3)
        assert mu_headroom_db(0.05, 0.1) == pytest.approx(3.0103, abs=1e-4)

    @given(st.floats(1e-6, 10))
    def test_identity(self, x):
        assert mu_headroom_db(x, x) == 0.0

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            mu_headroom_db(0.0, 0.1)

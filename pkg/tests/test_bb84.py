import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from coexqkd.bb84 import (PAPER_FIXED_FRACTION, Basis, DistillationModel, PolState, QberReport,
                          aes_secured_capacity, binary_entropy, measure, qber_analytic,
                          secure_fraction, secure_key_rate)
from coexqkd.errors import UndefinedQBER

IDEAL = DistillationModel.ideal_asymptotic()
MODELS = [IDEAL, DistillationModel.ec_efficiency(1.16), DistillationModel.fixed_fraction()]


def h2(p):
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


class TestStates:
    def test_basis_and_bit(self):
        assert [s.basis for s in PolState] == [Basis.CIRCULAR, Basis.CIRCULAR,
                                               Basis.DIAGONAL, Basis.DIAGONAL]
        assert [s.bit for s in PolState] == [0, 1, 0, 1]
        assert PolState.of(Basis.DIAGONAL, 1) is PolState.A

    def test_parse(self):
        assert Basis.parse("diagonal") is Basis.DIAGONAL
        assert Basis.parse("circular").conjugate is Basis.DIAGONAL
        with pytest.raises(ValueError):
            Basis.parse("rectilinear")


class TestMeasure:
    def test_matched_noiseless(self):
        u = np.random.default_rng(0).random(1000)
        assert np.all(measure(np.full(1000, PolState.R), Basis.CIRCULAR, 0.0, u) == 0)

    def test_error_probability(self):
        u = np.random.default_rng(1).random(200_000)
        out = measure(np.full(u.size, PolState.L), Basis.CIRCULAR, 0.05, u)
        assert out.mean() == pytest.approx(0.95, abs=4 * math.sqrt(0.05 * 0.95 / u.size))

    def test_scalar(self):
        assert measure(PolState.D, Basis.DIAGONAL, 0.0, 0.3) == 0
        assert measure(PolState.A, Basis.DIAGONAL, 0.1, 0.05) == 0

    @pytest.mark.parametrize("state", [PolState.D, PolState.A])
    def test_conjugate_uniform_chi2(self, state):
        u = np.random.default_rng(int(state)).random(200_000)
        out = measure(np.full(u.size, state), Basis.CIRCULAR, 0.07, u)
        counts = np.bincount(out, minlength=2)
        assert stats.chisquare(counts).pvalue > 0.001


class TestEntropy:
    def test_values(self):
        assert binary_entropy(0.5) == 1.0
        assert binary_entropy(0.0) == 0.0 and binary_entropy(1.0) == 0.0
        assert binary_entropy(0.11) == pytest.approx(0.49991, abs=1e-5)
        assert binary_entropy(0.088) == pytest.approx(0.42977, abs=2e-5)

    @given(st.floats(1e-9, 1 - 1e-9))
    def test_against_formula(self, p):
        assert binary_entropy(p) == pytest.approx(h2(p), rel=1e-12, abs=1e-15)

    @pytest.mark.parametrize("p", [-0.1, 1.1, float("nan")])
    def test_rejects(self, p):
        with pytest.raises(ValueError):
            binary_entropy(p)


class TestSecureFraction:
    def test_ideal_at_anchor(self):
        assert secure_fraction(0.088, IDEAL) == pytest.approx(1 - 2 * h2(0.088), rel=1e-12)
        assert secure_fraction(0.088, IDEAL) == pytest.approx(0.1405, abs=1e-4)

    def test_zero_qber(self):
        assert secure_fraction(0.0, IDEAL) == 1.0
        assert secure_fraction(0.0, MODELS[1]) == 1.0
        assert secure_fraction(0.0, MODELS[2]) == PAPER_FIXED_FRACTION

    def test_threshold(self):
        assert secure_fraction(0.11, IDEAL) < 1e-3
        assert secure_fraction(0.109, IDEAL) > 0
        assert secure_fraction(0.111, IDEAL) == 0.0
        assert secure_fraction(0.11, MODELS[2]) == 0.0

    @pytest.mark.parametrize("model", MODELS, ids=lambda m: m.variant)
    def test_monotone(self, model):
        q = np.linspace(0, 0.5, 2001)
        f = secure_fraction(q, model)
        assert np.all(np.diff(f) <= 0)
        assert np.all((f >= 0) & (f <= 1))

    @given(st.floats(0.1101, 0.5))
    def test_ideal_zero_above_threshold(self, q):
        assert secure_fraction(q, IDEAL) <= 2e-4

    def test_rejects_bad_qber(self):
        with pytest.raises(ValueError):
            secure_fraction(0.6, IDEAL)

    def test_model_validation(self):
        with pytest.raises(ValueError):
            DistillationModel.ec_efficiency(0.9)
        with pytest.raises(ValueError):
            DistillationModel.fixed_fraction(1.5)
        with pytest.raises(ValueError):
            DistillationModel("cascade", 1.0)


class TestRates:
    def test_ideal_rate(self):
        assert secure_key_rate(1330, 0.088, IDEAL) == pytest.approx(1330 * 0.14046, abs=0.05)
        assert secure_key_rate(1330, 0.088, IDEAL) == pytest.approx(186.9, abs=0.1)

    def test_fixed_fraction_rate(self):
        assert secure_key_rate(1330, 0.088, MODELS[2]) == pytest.approx(372.0, rel=1e-3)

    def test_above_threshold(self):
        assert secure_key_rate(5000.0, 0.2, IDEAL) == 0.0

    def test_aes_capacity(self):
        assert aes_secured_capacity(372.5) == pytest.approx(745e9, rel=1e-3)
        assert aes_secured_capacity(121.5) == pytest.approx(243e9, rel=1e-3)
        assert aes_secured_capacity(0.0) == 0.0

    @given(st.floats(0, 1e6))
    def test_aes_linear(self, s):
        assert aes_secured_capacity(2 * s) == pytest.approx(2 * aes_secured_capacity(s))


class TestQberAnalytic:
    def test_hand_value(self):
        assert qber_analytic(1088, 242, 0, 0.0) == pytest.approx(121 / 1330, rel=1e-12)
        assert qber_analytic(1088, 242, 0, 0.0) == pytest.approx(0.0910, abs=1e-4)

    def test_noise_free(self):
        assert qber_analytic(1000, 0, 0, 0.03) == 0.03

    def test_noise_limit(self):
        assert qber_analytic(1000, 0, 1e15, 0.0) == pytest.approx(0.5, abs=1e-9)

    def test_zero_total(self):
        with pytest.raises(UndefinedQBER):
            qber_analytic(0, 0, 0)

    @given(st.floats(1, 1e6), st.floats(0, 1e6), st.floats(0, 1e6), st.floats(0, 1e6),
           st.floats(0, 0.5))
    def test_bounded_and_monotone(self, s, d, n1, n2, e):
        lo, hi = sorted((n1, n2))
        a, b = qber_analytic(s, d, lo, e), qber_analytic(s, d, hi, e)
        assert e - 1e-12 <= a <= 0.5 + 1e-12
        assert a <= b + 1e-12


class TestQberReport:
    def test_counts_define_qber(self):
        r = QberReport(1000.0, 0.0, 100.0, counts_total=1000, counts_error=90)
        assert r.qber == 0.09

    def test_secure_cannot_exceed_raw(self):
        with pytest.raises(ValueError):
            QberReport(100.0, 0.05, 200.0)

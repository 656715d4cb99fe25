import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from psi_lab.physics import RB87
from psi_lab.systematics import (
    ZeemanScenario,
    differential_shift,
    second_order_shift,
    zeeman_force,
    zeeman_phase_error,
    zeeman_report,
)

H = 6.62607015e-34
MU = 2.0 * 1.3996e6  # g_S mu_B / h, Hz / G
HFS = 6.8347e9


def oracle_shift(B):
    return (MU * B) ** 2 / (4 * HFS)


class TestShift:
    def test_matches_oracle(self):
        for B in (0.0, 0.1, 1.0, 3.0, 3.01, 50.0):
            assert second_order_shift(B) == pytest.approx(oracle_shift(B), rel=1e-12, abs=1e-15)

    def test_rb87_coefficient(self):
        # quadratic clock shift of 87Rb is about 575 Hz / G^2 (here with g_S = 2)
        assert second_order_shift(1.0) == pytest.approx(286.6, rel=2e-3)
        assert differential_shift(1.0) == pytest.approx(573.2, rel=2e-3)

    @given(st.floats(0, 100), st.floats(0, 100))
    def test_monotone(self, a, b):
        lo, hi = sorted((a, b))
        assert second_order_shift(lo) <= second_order_shift(hi)

    @given(st.floats(0, 1e3))
    def test_quadratic_law(self, B):
        assert second_order_shift(2 * B) == pytest.approx(4 * second_order_shift(B), rel=1e-15)

    def test_negative_field(self):
        with pytest.raises(ValueError):
            second_order_shift(-1.0)


class TestScenario:
    SCN = ZeemanScenario(3.0, 3.01, 1.0, 0.02)

    def test_step_values(self):
        dnu = 2 * (oracle_shift(3.01) - oracle_shift(3.0))
        assert dnu == pytest.approx(34.45, abs=0.01)
        assert zeeman_phase_error(self.SCN) == pytest.approx(2 * math.pi * dnu * 0.02, rel=1e-12)
        assert zeeman_phase_error(self.SCN) / math.pi == pytest.approx(1.378, abs=1e-3)

    def test_no_step_no_phase(self):
        assert zeeman_phase_error(ZeemanScenario(3.0, 3.0, 1.0, 0.02)) == 0.0

    def test_force(self):
        want = H * MU**2 * 3.0 / (2 * HFS) * 100.0
        fz = zeeman_force(3.0, 1.0)
        assert fz.force == pytest.approx(want, rel=1e-9)
        assert fz.force_dyn == pytest.approx(1.139e-23, rel=1e-3)
        assert fz.acceleration_in_g * 1e6 == pytest.approx(80.5, abs=0.1)

    @given(st.floats(0.01, 100), st.floats(0.01, 100), st.floats(0.1, 10))
    def test_force_bilinear(self, B, grad, s):
        f = zeeman_force(B, grad).force
        assert zeeman_force(s * B, grad).force == pytest.approx(s * f, rel=1e-12)
        assert zeeman_force(B, s * grad).force == pytest.approx(s * f, rel=1e-12)

    @given(st.floats(0, 10), st.floats(0, 10))
    def test_phase_sign_swap(self, b1, b2):
        fwd = zeeman_phase_error(ZeemanScenario(b1, b2, 1.0, 0.02))
        back = zeeman_phase_error(ZeemanScenario(b2, b1, 1.0, 0.02))
        assert back == pytest.approx(-fwd, abs=1e-12)

    def test_force_zero_gradient(self):
        assert zeeman_force(3.0, 0.0).force == 0.0

    def test_report(self):
        r = zeeman_report(self.SCN, RB87, phase_budget=0.1)
        assert r["within_budget"] is False
        assert r["differential_shift_change_Hz"] == pytest.approx(34.45, abs=0.01)
        assert "validity_note" in r
        assert "within_budget" not in zeeman_report(self.SCN)

    def test_report_within_budget(self):
        r = zeeman_report(ZeemanScenario(3.0, 3.0001, 1.0, 0.02), phase_budget=0.1)
        assert r["within_budget"] is True

    @pytest.mark.parametrize("kw", [{"b_first_half": -1.0}, {"gradient": -1.0}, {"T": 0.0}])
    def test_rejects(self, kw):
        base = dict(b_first_half=3.0, b_second_half=3.01, gradient=1.0, T=0.02)
        base.update(kw)
        with pytest.raises(ValueError):
            ZeemanScenario(**base)

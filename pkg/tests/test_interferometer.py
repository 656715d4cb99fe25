import json
import warnings

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from psi_lab.errors import ConfigError
from psi_lab.interferometer import (
    HALF_PI,
    PI,
    PulseSequence,
    acceleration_phase,
    build_sequence,
    fringe_wavevector,
    phase_observables,
    raman_resonances,
    resonance_separation_ok,
    rotation_phase,
    vco_schedule,
)
from psi_lab.physics import RB87, default_extra_intervals, k_eff
from oracles import brute_force_acceleration_phase, brute_force_rotation_phase, pulse_table

K = k_eff(RB87)


@st.composite
def nested(draw, max_order=6):
    n = draw(st.integers(0, max_order))
    big_t = draw(st.floats(1e-3, 0.2))
    fracs = draw(st.lists(st.floats(0.02, 0.98), min_size=n, max_size=n, unique=True))
    fracs = sorted(fracs, reverse=True)
    assume(all(a - b > 1e-3 for a, b in zip(fracs, fracs[1:])))
    return n, big_t, tuple(f * big_t for f in fracs)


class TestLayout:
    def test_order_zero_is_mach_zehnder(self):
        seq = build_sequence(0, 0.02, ())
        assert [p.label for p in seq.pulses] == ["A_0", "B_0", "C_0"]
        assert [p.time for p in seq.pulses] == [0.0, 0.02, 0.04]
        assert [p.kind for p in seq.pulses] == [HALF_PI, PI, HALF_PI]

    def test_order_two_times(self):
        T, T1, T2 = 1.0, 0.6, 0.2
        seq = build_sequence(2, T, (T1, T2))
        got = {p.label: (p.time, p.direction) for p in seq.pulses}
        assert got == {
            "A_0": (0.0, 1),
            "A_1": (0.2, -1),
            "A_2": (0.4, 1),
            "B_2": (0.6, 1),
            "B_1": (0.8, -1),
            "B_0": (1.0, 1),
            "B_-1": (1.2, -1),
            "B_-2": (1.4, 1),
            "C_-2": (1.6, 1),
            "C_-1": (1.8, -1),
            "C_0": (2.0, 1),
        }

    @given(nested())
    def test_invariants(self, case):
        n, T, iv = case
        seq = build_sequence(n, T, iv)
        assert len(seq.pulses) == 4 * n + 3
        assert seq.validate() == []
        times = [p.time for p in seq.pulses]
        assert all(b > a for a, b in zip(times, times[1:]))
        assert seq.span == pytest.approx(2 * T)
        ref = pulse_table(n, T, iv)
        assert [(p.kind, p.direction) for p in seq.pulses] == [(r[1], r[2]) for r in ref]
        np.testing.assert_allclose(times, [r[0] for r in ref], rtol=0, atol=1e-15)

    @given(nested())
    def test_json_round_trip(self, case):
        seq = build_sequence(*case)
        assert PulseSequence.from_json(seq.to_json()) == seq
        assert json.loads(seq.to_json())["order"] == case[0]

    def test_equal_intervals_rejected(self):
        with pytest.raises(ConfigError) as exc:
            build_sequence(2, 1.0, (0.5, 0.5))
        assert exc.value.field == "extra_intervals"
        assert "T > T_1 > T_2" in str(exc.value)

    def test_interval_longer_than_T_rejected(self):
        with pytest.raises(ConfigError):
            build_sequence(1, 1.0, (1.2,))

    def test_interval_count_checked(self):
        with pytest.raises(ConfigError, match="expected 2 intervals"):
            build_sequence(2, 1.0, (0.5,))

    def test_non_positive_interval_named(self):
        with pytest.raises(ConfigError) as exc:
            build_sequence(2, 1.0, (0.5, -0.1))
        assert exc.value.field == "extra_intervals[2]"

    def test_validate_reports_tampering(self):
        seq = build_sequence(1, 1.0, (0.5,))
        pulses = list(seq.pulses)
        p = pulses[1]
        pulses[1] = type(p)(p.label, p.time + 0.01, p.kind, p.direction)
        broken = PulseSequence(seq.order, seq.big_t, seq.extra_intervals, tuple(pulses))
        assert broken.validate()


class TestAccelerationPhase:
    def test_mach_zehnder(self):
        seq = build_sequence(0, 0.1, ())
        assert acceleration_phase(seq, 9.8, K) == pytest.approx(K * 9.8 * 0.01, rel=1e-15)

    def test_closed_form_order_two(self):
        seq = build_sequence(2, 1.0, (0.6, 0.2))
        assert acceleration_phase(seq, 1.0, 1.0) == pytest.approx(1.0 * (1.0 + 2 * 0.8))

    def test_equal_interval_example(self):
        # T_j = T/2 each gives T (T + 2 n T/2); with a valid nested pair summing to T/2
        seq = build_sequence(2, 1.0, (0.3, 0.2))
        assert seq.acceleration_scale == pytest.approx(2.0)

    @given(nested(), st.floats(-20, 20))
    def test_brute_force_oracle(self, case, a):
        n, T, iv = case
        seq = build_sequence(n, T, iv)
        got = acceleration_phase(seq, a, K)
        want = brute_force_acceleration_phase(n, T, iv, a, K)
        assert got == pytest.approx(want, rel=1e-9, abs=1e-9 * K * T * T)

    @given(nested(), st.floats(0.1, 10))
    def test_linear_in_a(self, case, a):
        seq = build_sequence(*case)
        assert acceleration_phase(seq, 2 * a, K) == pytest.approx(2 * acceleration_phase(seq, a, K), rel=1e-14)

    def test_longer_default_intervals_scale(self):
        for n in range(6):
            seq = build_sequence(n, 1.0, default_extra_intervals(n, 1.0))
            assert seq.acceleration_scale == pytest.approx(1.0 + n)


class TestPhaseProperties:
    @given(st.integers(0, 10), st.floats(0.01, 0.2), st.data())
    def test_lmt_ratio(self, n, T, data):
        fr = sorted(data.draw(st.lists(st.floats(0.02, 0.98), min_size=n, max_size=n, unique=True)), reverse=True)
        assume(all(a - b > 1e-3 for a, b in zip(fr, fr[1:])))
        iv = tuple(f * T for f in fr)
        ratio = acceleration_phase(build_sequence(n, T, iv), 1.0, K) / acceleration_phase(build_sequence(0, T, ()), 1.0, K)
        assert ratio == pytest.approx(1 + 2 * sum(iv) / T, rel=1e-13)

    @given(
        st.lists(st.floats(-1e-3, 1e-3), min_size=3, max_size=3),
        st.lists(st.floats(-1e-2, 1e-2), min_size=3, max_size=3),
        st.floats(-3, 3),
    )
    def test_rotation_linear(self, omega, r, s):
        seq = build_sequence(1, 0.02, (0.01,))
        k = [0.0, 0.0, K]
        base = rotation_phase(seq, omega, r, k)
        tol = 1e-12 * (abs(base) + K * 1e-3 * 1e-2 * 0.04)
        assert rotation_phase(seq, np.multiply(s, omega), r, k) == pytest.approx(s * base, abs=tol * (1 + abs(s)))
        assert rotation_phase(seq, omega, np.multiply(s, r), k) == pytest.approx(s * base, abs=tol * (1 + abs(s)))

    @given(nested())
    def test_vco_schedule_shape(self, case):
        seq = build_sequence(*case)
        sched = vco_schedule(seq, 1.0, RB87)
        assert len(sched) == 4 * case[0] + 3
        times = [t for t, _ in sched]
        assert times == sorted(times)


class TestRotation:
    @given(
        nested(max_order=4),
        st.lists(st.floats(-1e-3, 1e-3), min_size=3, max_size=3),
        st.lists(st.floats(-0.5, 0.5), min_size=2, max_size=2),
    )
    def test_brute_force_oracle(self, case, omega, vxy):
        n, T, iv = case
        seq = build_sequence(n, T, iv)
        k0 = np.array([0.0, 0.0, K])
        v0 = np.array([vxy[0], vxy[1], 0.01])
        r = 2 * T * v0
        want = brute_force_rotation_phase(n, T, iv, omega, k0, v0)
        scale = np.linalg.norm(np.cross(k0, omega)) * np.linalg.norm(r) * (T + 2 * sum(iv))
        # relative error is meaningless where the phase cancels by accident
        assume(np.linalg.norm(omega) > 1e-6 and abs(want) > 1e-2 * scale)
        got = rotation_phase(seq, omega, r, k0)
        # 1e-10 rad floor: time rounding shared by both sides leaves ~1e-12 rad of noise
        assert got == pytest.approx(want, rel=1e-10, abs=1e-10)

    def test_fringe_wavevector_perpendicular(self):
        seq = build_sequence(2, 0.02, (0.012, 0.006))
        k_vec = np.array([0.0, 0.0, K])
        kw = fringe_wavevector(seq, [1e-3, 2e-3, 5e-4], k_vec)
        assert kw.k_omega.shape == (3,)
        assert abs(np.dot(kw.k_omega, k_vec)) < 1e-6 * np.linalg.norm(kw.k_omega) * K
        ratio = np.linalg.norm(kw.k_omega_full) / np.linalg.norm(kw.k_omega)
        assert ratio == pytest.approx((0.02 + 2 * 0.018) / (0.02 + 0.018))

    def test_earth_rate_magnitude(self):
        seq = build_sequence(0, 0.02, ())
        kw = fringe_wavevector(seq, [7.292e-5, 0, 0], [0, 0, K])
        assert np.linalg.norm(kw.k_omega) == pytest.approx(K * 7.292e-5 * 0.02)

    def test_large_rotation_warns(self):
        seq = build_sequence(0, 0.1, ())
        with pytest.warns(UserWarning, match="exceeds 0.1"):
            rotation_phase(seq, [2.0, 0, 0], [0, 0, 0], [0, 0, K])

    def test_small_rotation_silent(self):
        seq = build_sequence(0, 0.1, ())
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            rotation_phase(seq, [0.1, 0, 0], [1e-3, 0, 0], [0, 0, K])

    def test_phase_observables(self):
        seq = build_sequence(1, 0.02, (0.01,))
        obs = phase_observables(seq, [0, 0, K], [1e-3, 0, 0], [0, 0, -9.8])
        assert obs.phi_a == pytest.approx(acceleration_phase(seq, -9.8, K))
        np.testing.assert_allclose(obs.k_omega, fringe_wavevector(seq, [1e-3, 0, 0], [0, 0, K]).k_omega)


class TestRaman:
    def test_recoil_frequency(self):
        # two-photon recoil for 87Rb D2 is about 15.08 kHz
        assert raman_resonances(0.0, RB87).recoil == pytest.approx(15.08e3, rel=2e-3)

    def test_symmetric_split(self):
        r = raman_resonances(0.3, RB87)
        assert r.up - r.co == pytest.approx(r.co - r.down)
        assert r.doppler == pytest.approx(K * 0.3 / (2 * np.pi))

    def test_negative_velocity_rejected(self):
        with pytest.raises(ValueError):
            raman_resonances(-1.0, RB87)

    def test_separation(self):
        ok = resonance_separation_ok(1.0, 6e-6, RB87)
        assert ok.ok and ok.ratio > 10
        slow = resonance_separation_ok(0.05, 6e-6, RB87)
        assert not slow.ok

    def test_vco_follows_direction(self):
        seq = build_sequence(2, 0.02, (0.012, 0.006))
        r = raman_resonances(1.0, RB87)
        for (t, f), p in zip(vco_schedule(seq, 1.0, RB87), seq.pulses):
            assert t == p.time
            assert f == (r.up if p.direction > 0 else r.down)

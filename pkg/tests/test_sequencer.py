import dataclasses
import json
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from psi_lab.errors import SequencerError
from psi_lab.interferometer import build_sequence, raman_resonances
from psi_lab.physics import ExperimentConfig, default_extra_intervals
from psi_lab.sequencer import (
    CHANNELS,
    MOLASSES_DETUNING,
    MOT_CHANNEL,
    MOT_DETUNING,
    Event,
    FrequencyPlan,
    SequencerSettings,
    Timeline,
    build_axis_cycle,
    build_imu_cycle,
    launch_aom_shift,
    validate_timeline,
)

# launch table transcribed independently of the package
LAUNCH = {
    "PSI-1": {"MOT 2'", "MOT 3'"},
    "PSI-2": {"MOT 1'", "MOT 2'", "MOT 3"},
    "PSI-3": {"MOT 1", "MOT 2'", "MOT 3"},
}
BEAM_OF = {v: k for k, v in MOT_CHANNEL.items()}


def cfg_n(n, big_t=0.02):
    return ExperimentConfig(lmt_order=n, big_t=big_t, extra_intervals=default_extra_intervals(n, big_t))


@st.composite
def configs(draw):
    n = draw(st.integers(0, 5))
    big_t = draw(st.floats(1e-3, 0.045))
    v = draw(st.floats(0.2, 3.0))
    load = draw(st.floats(0.05, 2.0))
    return ExperimentConfig(
        lmt_order=n,
        big_t=big_t,
        extra_intervals=default_extra_intervals(n, big_t),
        bias_velocity=v,
        mot_load_time=load,
    )


class TestFrequencyPlan:
    def test_detuning_identities(self):
        plan = FrequencyPlan()
        assert plan.mot_detuning == MOT_DETUNING == -12e6
        assert plan.molasses_detuning == MOLASSES_DETUNING == -92e6
        assert plan.imaging_detuning == 0.0
        assert plan.repump_detuning_change == -80e6


class TestTimeline:
    def test_n2_valid(self):
        cfg = cfg_n(2)
        tl = build_imu_cycle(cfg)
        assert validate_timeline(tl, FrequencyPlan(), cfg) == []
        assert tl.axis_order == ("PSI-1", "PSI-2", "PSI-3")
        assert len(tl.segments) == 3

    def test_launch_sets_match_table(self):
        tl = build_imu_cycle(cfg_n(2))
        plan = FrequencyPlan()
        for seg in tl.segments:
            reduced = {
                BEAM_OF[e.channel]
                for e in tl.events
                if e.label.startswith(seg.axis + ":")
                and e.channel in BEAM_OF
                and e.action == "set_frequency"
                and e.value < plan.molasses_aom
            }
            assert reduced == LAUNCH[seg.axis]

    def test_raman_values_are_resonances(self):
        cfg = cfg_n(2)
        res = raman_resonances(cfg.bias_velocity, cfg.species)
        tl = build_imu_cycle(cfg)
        eom = [e.value for e in tl.events if e.channel == "RAMAN_EOM"]
        assert eom and all(v in (res.up, res.down) for v in eom)
        # 4n + 3 pulses plus the state-selection pulse per axis
        assert len(eom) == 3 * (4 * 2 + 3 + 1)

    def test_events_ordered_and_known(self):
        tl = build_imu_cycle(cfg_n(1))
        times = [e.t_start for e in tl.events]
        assert times == sorted(times)
        assert {e.channel for e in tl.events} <= set(CHANNELS)

    def test_bandwidth_below_mot_limit(self):
        tl = build_imu_cycle(cfg_n(2))
        assert tl.bandwidth < 1 / 3
        assert tl.bandwidth == pytest.approx(1 / tl.total_duration)

    @given(configs())
    def test_any_config_valid_and_round_trips(self, cfg):
        tl = build_imu_cycle(cfg)
        assert validate_timeline(tl, FrequencyPlan(), cfg) == []
        back = Timeline.from_dict(json.loads(tl.to_json()))
        assert back == tl
        assert back.to_json() == tl.to_json()

    def test_byte_deterministic(self):
        a = build_imu_cycle(cfg_n(3)).to_json()
        b = build_imu_cycle(cfg_n(3)).to_json()
        assert a == b
        assert build_imu_cycle(cfg_n(3)).to_csv() == build_imu_cycle(cfg_n(3)).to_csv()

    def test_axis_order(self):
        tl = build_imu_cycle(cfg_n(0), axis_order=("PSI-3", "PSI-1", "PSI-2"))
        assert [s.axis for s in tl.segments] == ["PSI-3", "PSI-1", "PSI-2"]
        assert validate_timeline(tl) == []
        with pytest.raises(SequencerError):
            build_imu_cycle(cfg_n(0), axis_order=("PSI-1", "PSI-1", "PSI-2"))

    def test_csv_header(self):
        text = build_imu_cycle(cfg_n(0)).to_csv()
        assert text.splitlines()[0] == "t_start_s,duration_s,channel,action,value"

    def test_summary(self):
        s = build_imu_cycle(cfg_n(0)).summary()
        assert "implied bandwidth" in s and "PSI-3" in s


class TestViolations:
    def test_wrong_mot_aom(self):
        plan = FrequencyPlan(mot_aom=94e6)
        tl = build_imu_cycle(cfg_n(2), plan)
        msgs = validate_timeline(tl, plan)
        assert any("MOT detuning" in m for m in msgs)

    def test_wrong_molasses_aom(self):
        plan = FrequencyPlan(molasses_aom=50e6)
        msgs = validate_timeline(build_imu_cycle(cfg_n(0), plan), plan)
        assert any("molasses detuning" in m for m in msgs)

    def test_shuffled_events(self):
        tl = build_imu_cycle(cfg_n(1))
        ev = list(tl.events)
        random.Random(0).shuffle(ev)
        bad = dataclasses.replace(tl, events=tuple(ev))
        assert any("out of time order" in m for m in validate_timeline(bad))

    def test_extra_launch_beam(self):
        tl = build_imu_cycle(cfg_n(0))
        first = tl.segments[0]
        extra = Event(first.t_start + 1e-3, 0.0, "MOT_AOM_1", "set_frequency", 1e6, "PSI-1: tampered")
        bad = dataclasses.replace(tl, events=tuple(sorted(tl.events + (extra,), key=lambda e: e.t_start)))
        assert any("launch reduces" in m for m in validate_timeline(bad))

    def test_wrong_vco(self):
        cfg = cfg_n(1)
        tl = build_imu_cycle(cfg)
        ev = [
            dataclasses.replace(e, value=e.value + 1e3) if e.channel == "RAMAN_EOM" and "B_0" in e.label else e
            for e in tl.events
        ]
        bad = dataclasses.replace(tl, events=tuple(ev))
        assert validate_timeline(bad, FrequencyPlan(), cfg)

    def test_unknown_channel(self):
        tl = build_imu_cycle(cfg_n(0))
        ev = list(tl.events)
        ev[0] = dataclasses.replace(ev[0], channel="LASER_X")
        assert any("unknown channel" in m for m in validate_timeline(dataclasses.replace(tl, events=tuple(ev))))

    def test_missing_camera(self):
        tl = build_imu_cycle(cfg_n(0))
        ev = tuple(e for e in tl.events if not (e.channel == "CAMERA" and e.label.startswith("PSI-2")))
        assert any("imaging window" in m for m in validate_timeline(dataclasses.replace(tl, events=ev)))


class TestAxisCycle:
    def test_unknown_axis(self):
        cfg = cfg_n(0)
        with pytest.raises(SequencerError):
            build_axis_cycle("PSI-9", cfg, build_sequence(0, cfg.big_t, ()))

    def test_train_over_budget(self):
        cfg = cfg_n(0, big_t=0.08)
        with pytest.raises(SequencerError, match="free-flight"):
            build_axis_cycle("PSI-1", cfg, build_sequence(0, 0.08, ()))

    def test_settings_rejects_negative(self):
        with pytest.raises(ValueError):
            SequencerSettings(molasses=-1.0)

    def test_launch_shift(self):
        # 1 m/s split over two beam axes at 780 nm
        assert launch_aom_shift(1.0, 2, 780e-9) == pytest.approx(1 / (2**0.5 * 780e-9))

"""Compile a three-axis IMU measurement cycle into a hardware event timeline.

Each axis segment runs: MOT load, molasses, moving-molasses launch, beams
off and bias coil on, state selection (Raman pi pulse then blow-away with
the imaging beam), the LMT Raman train with its VCO schedule, and imaging.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

from .errors import SequencerError
from .interferometer import PulseSequence, build_sequence, raman_resonances, vco_schedule
from .kinematics import AXES, BEAMS, launch_plan
from .physics import ExperimentConfig

__all__ = [
    "CHANNELS",
    "ACTIONS",
    "FrequencyPlan",
    "SequencerSettings",
    "Event",
    "Timeline",
    "build_axis_cycle",
    "build_imu_cycle",
    "validate_timeline",
]

MOT_CHANNEL = {beam: f"MOT_AOM_{i}" for i, beam in enumerate(BEAMS, start=1)}
CHANNELS = (
    *MOT_CHANNEL.values(),
    "REPUMP_EOM",
    "RAMAN_AOM",
    "RAMAN_EOM",
    "IMAGING_AOM",
    "VR_1",
    "VR_2",
    "VR_3",
    "VR_4",
    "MOT_COILS",
    "BIAS_COIL",
    "CAMERA",
)
ACTIONS = ("set_frequency", "gate_on", "gate_off", "set_state")

# variable retarders route one beam to one of three fibre ports:
# the first retarder picks port 1 or the rest, the second picks port 2 or 3
ROUTING = {"PSI-1": ("off", "off"), "PSI-2": ("on", "off"), "PSI-3": ("on", "on")}

MOT_DETUNING = -12e6
MOLASSES_DETUNING = -92e6


@dataclass(frozen=True)
class FrequencyPlan:
    """Laser and modulator frequencies in Hz.

    Detunings are from S1/2 F=2 -> P3/2 F'=3. The MOT and molasses AOMs are
    double-passed, so each adds twice its drive frequency.
    """

    lock_offset: float = -212e6
    mot_aom: float = 100e6
    molasses_aom: float = 60e6
    repump_eom: float = 6.623e9
    raman_aom: float = -500e6
    raman_eom: float = 6.8347e9
    imaging_offset: float = 212e6

    @property
    def mot_detuning(self) -> float:
        return self.lock_offset + 2.0 * self.mot_aom

    @property
    def molasses_detuning(self) -> float:
        return self.lock_offset + 2.0 * self.molasses_aom

    @property
    def imaging_detuning(self) -> float:
        return self.lock_offset + self.imaging_offset

    @property
    def repump_detuning_change(self) -> float:
        """Extra repump detuning in molasses, carried by the AOM change (-80 MHz by default)."""
        return 2.0 * (self.molasses_aom - self.mot_aom)

    def to_dict(self):
        return {
            "lock_offset_Hz": self.lock_offset,
            "mot_aom_Hz": self.mot_aom,
            "molasses_aom_Hz": self.molasses_aom,
            "repump_eom_Hz": self.repump_eom,
            "raman_aom_Hz": self.raman_aom,
            "raman_eom_Hz": self.raman_eom,
            "imaging_offset_Hz": self.imaging_offset,
        }


@dataclass(frozen=True)
class SequencerSettings:
    """Phase durations (s) and limits. All are assumptions, overridable."""

    molasses: float = 10e-3
    launch: float = 1e-3
    state_selection: float = 100e-6
    blow_away: float = 50e-6
    imaging: float = 100e-6
    raman_pulse: float = 10e-6
    free_flight_budget: float = 0.1
    dead_time: float = 0.0

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {value!r}")

    def to_dict(self):
        return {f"{k}_s": v for k, v in self.__dict__.items()}


@dataclass(frozen=True)
class Event:
    t_start: float
    duration: float
    channel: str
    action: str
    value: object = None
    label: str = ""

    def to_dict(self):
        return {
            "t_start_s": self.t_start,
            "duration_s": self.duration,
            "channel": self.channel,
            "action": self.action,
            "value": self.value,
            "label": self.label,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["t_start_s"]), float(d["duration_s"]), d["channel"], d["action"], d.get("value"), d.get("label", ""))


@dataclass(frozen=True)
class Segment:
    axis: str
    t_start: float
    t_end: float


@dataclass(frozen=True)
class Timeline:
    events: tuple
    axis_order: tuple
    total_duration: float
    segments: tuple = ()
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def bandwidth(self) -> float:
        return 1.0 / self.total_duration

    def to_dict(self):
        return {
            "axis_order": list(self.axis_order),
            "total_duration_s": self.total_duration,
            "bandwidth_Hz": self.bandwidth,
            "segments": [{"axis": s.axis, "t_start_s": s.t_start, "t_end_s": s.t_end} for s in self.segments],
            "metadata": self.metadata,
            "events": [e.to_dict() for e in self.events],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d) -> Timeline:
        return cls(
            tuple(Event.from_dict(e) for e in d["events"]),
            tuple(d["axis_order"]),
            float(d["total_duration_s"]),
            tuple(Segment(s["axis"], float(s["t_start_s"]), float(s["t_end_s"])) for s in d.get("segments", [])),
            dict(d.get("metadata", {})),
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t_start_s", "duration_s", "channel", "action", "value"])
        for e in self.events:
            value = "" if e.value is None else (repr(float(e.value)) if isinstance(e.value, (int, float)) else e.value)
            w.writerow([repr(e.t_start), repr(e.duration), e.channel, e.action, value])
        return buf.getvalue()

    def summary(self) -> str:
        lines = [
            f"axes: {', '.join(self.axis_order)}",
            f"events: {len(self.events)}",
            f"total duration: {self.total_duration:.6f} s",
            f"implied bandwidth: {self.bandwidth:.4f} Hz",
        ]
        for s in self.segments:
            lines.append(f"  {s.axis}: {s.t_start:.6f} s to {s.t_end:.6f} s")
        return "\n".join(lines) + "\n"


def launch_aom_shift(v_bias: float, n_beams: int, wavelength: float) -> float:
    """AOM drive reduction for a moving molasses at ``v_bias`` along the diagonal of ``n_beams`` beam axes.

    Each beam axis carries v / sqrt(n_beams); a counter-propagating pair
    detuned by delta moves at lambda delta / 2, and the double pass doubles
    the AOM shift.
    """
    u = v_bias / math.sqrt(n_beams)
    return u / wavelength


def build_axis_cycle(
    axis: str,
    cfg: ExperimentConfig,
    seq: PulseSequence,
    plan: FrequencyPlan = FrequencyPlan(),
    settings: SequencerSettings = SequencerSettings(),
    t0: float = 0.0,
) -> tuple[list[Event], Segment]:
    """Events for one axis starting at ``t0`` and the segment they span.

    Raises
    ------
    SequencerError
        Unknown axis, or a Raman train longer than the free-flight budget.
    """
    if axis not in AXES:
        raise SequencerError(f"unknown axis {axis!r}; expected one of {', '.join(AXES)}")
    if seq.span > settings.free_flight_budget:
        raise SequencerError(
            f"Raman train span {seq.span:.6g} s exceeds the free-flight budget {settings.free_flight_budget:.6g} s"
        )
    s = settings
    ev: list[Event] = []

    def add(t, d, ch, act, val=None, label=""):
        ev.append(Event(float(t), float(d), ch, act, val, f"{axis}: {label}" if label else axis))

    lp = launch_plan(axis)
    vr_raman, vr_img = ROUTING[axis], ROUTING[axis]
    res = raman_resonances(cfg.bias_velocity, cfg.species)

    # MOT load
    t = t0
    for ch, state in zip(("VR_1", "VR_2", "VR_3", "VR_4"), (*vr_raman, *vr_img)):
        add(t, 0.0, ch, "set_state", state, "route Raman and imaging beams")
    add(t, cfg.mot_load_time, "MOT_COILS", "set_state", "on", "MOT load")
    add(t, 0.0, "REPUMP_EOM", "set_frequency", plan.repump_eom, "repump sideband")
    for beam in BEAMS:
        add(t, 0.0, MOT_CHANNEL[beam], "set_frequency", plan.mot_aom, "MOT")
        add(t, cfg.mot_load_time + s.molasses + s.launch, MOT_CHANNEL[beam], "gate_on", None, "cooling beam")
    # molasses: field off first
    t = t0 + cfg.mot_load_time
    add(t, 0.0, "MOT_COILS", "set_state", "off", "MOT field off")
    for beam in BEAMS:
        add(t, s.molasses, MOT_CHANNEL[beam], "set_frequency", plan.molasses_aom, "molasses")
    add(
        t,
        0.0,
        "REPUMP_EOM",
        "set_frequency",
        plan.repump_eom,
        f"repump detuning {abs(plan.repump_detuning_change) / 1e6:g} MHz via AOM shift",
    )
    # launch
    t += s.molasses
    shift = launch_aom_shift(cfg.bias_velocity, len(lp.reduced_beams), cfg.species.wavelength)
    for beam in lp.ordered_beams():
        add(t, s.launch, MOT_CHANNEL[beam], "set_frequency", plan.molasses_aom - shift, "moving-molasses launch")
    # beams off, bias on
    t += s.launch
    for beam in BEAMS:
        add(t, 0.0, MOT_CHANNEL[beam], "gate_off", None, "cooling beams off")
    t_train = t + s.state_selection + s.blow_away
    t_img = t_train + seq.span + s.raman_pulse
    add(t, t_img + s.imaging - t, "BIAS_COIL", "set_state", "on", "bias field")
    # state selection
    add(t, 0.0, "RAMAN_AOM", "set_frequency", abs(plan.raman_aom), "Raman AOM down-shift")
    add(t, 0.0, "RAMAN_EOM", "set_frequency", res.up, "state-selection pi pulse")
    add(t, s.state_selection, "RAMAN_AOM", "gate_on", None, "state-selection pi pulse")
    t += s.state_selection
    add(t, 0.0, "IMAGING_AOM", "set_frequency", plan.imaging_offset, "blow-away")
    add(t, s.blow_away, "IMAGING_AOM", "gate_on", None, "blow-away")
    # LMT train
    for pulse, (_, freq) in zip(seq.pulses, vco_schedule(seq, cfg.bias_velocity, cfg.species)):
        tp = t_train + pulse.time
        add(tp, 0.0, "RAMAN_EOM", "set_frequency", freq, f"VCO {pulse.label}")
        add(tp, s.raman_pulse, "RAMAN_AOM", "gate_on", None, f"{pulse.kind} {pulse.label}")
    # imaging
    add(t_img, s.imaging, "IMAGING_AOM", "gate_on", None, "imaging")
    add(t_img, s.imaging, "CAMERA", "gate_on", None, "camera exposure")
    t_end = t_img + s.imaging + s.dead_time
    return ev, Segment(axis, float(t0), float(t_end))


def _sorted(events):
    return tuple(sorted(events, key=lambda e: e.t_start))


def build_imu_cycle(
    cfg: ExperimentConfig,
    plan: FrequencyPlan = FrequencyPlan(),
    settings: SequencerSettings = SequencerSettings(),
    axis_order=AXES,
) -> Timeline:
    """Three sequential axis segments; implied bandwidth is 1 / total duration."""
    axis_order = tuple(axis_order)
    if sorted(axis_order) != sorted(AXES):
        raise SequencerError(f"axis_order must be a permutation of {AXES}, got {axis_order}")
    seq = build_sequence(cfg.lmt_order, cfg.big_t, cfg.extra_intervals)
    events, segments, t = [], [], 0.0
    for axis in axis_order:
        ev, seg = build_axis_cycle(axis, cfg, seq, plan, settings, t)
        events += ev
        segments.append(seg)
        t = seg.t_end
    ordered = _sorted(events)
    total = max(t, max(e.t_start + e.duration for e in ordered))
    meta = {
        "assumptions": {
            **settings.to_dict(),
            "mot_load_time_s": cfg.mot_load_time,
            "launch_model": "per-beam velocity v/sqrt(n_beams); AOM shift = that velocity / wavelength (double pass)",
            "vr_routing": {a: list(r) for a, r in ROUTING.items()},
        },
        "frequency_plan": plan.to_dict(),
        "lmt_order": cfg.lmt_order,
        "per_axis_overhead_s": (total / 3.0) - cfg.mot_load_time,
        "imaging_offset_note": "imaging uses +212 MHz from the lock point; a 92 MHz AOM value also appears and is unresolved",
    }
    return Timeline(ordered, axis_order, float(total), tuple(segments), meta)


def _close(a, b, rtol=1e-12):
    return abs(a - b) <= rtol * max(abs(a), abs(b), 1.0)


def validate_timeline(t: Timeline, plan: FrequencyPlan = FrequencyPlan(), cfg: ExperimentConfig | None = None) -> list[str]:
    """Return violated timeline constraints as messages (empty when valid).

    With ``cfg`` the Raman EOM values are also checked against the
    resonance frequencies and the VCO schedule of its pulse sequence.
    """
    out = []
    if plan.mot_detuning != MOT_DETUNING:
        out.append(f"MOT detuning {plan.mot_detuning / 1e6:g} MHz != {MOT_DETUNING / 1e6:g} MHz (lock + 2 x MOT AOM)")
    if plan.molasses_detuning != MOLASSES_DETUNING:
        out.append(
            f"molasses detuning {plan.molasses_detuning / 1e6:g} MHz != {MOLASSES_DETUNING / 1e6:g} MHz (lock + 2 x molasses AOM)"
        )
    if plan.imaging_detuning != 0.0:
        out.append(f"imaging beam detuned by {plan.imaging_detuning / 1e6:g} MHz from F=2 -> F'=3")

    for i, e in enumerate(t.events):
        if e.channel not in CHANNELS:
            out.append(f"event {i}: unknown channel {e.channel!r}")
        if e.action not in ACTIONS:
            out.append(f"event {i}: unknown action {e.action!r}")
        if not (math.isfinite(e.duration) and e.duration >= 0):
            out.append(f"event {i}: negative or non-finite duration {e.duration!r}")
        if e.action == "set_frequency" and not (isinstance(e.value, (int, float)) and e.value > 0):
            out.append(f"event {i}: frequency on {e.channel} must be positive, got {e.value!r}")
    for i, (a, b) in enumerate(zip(t.events, t.events[1:])):
        if b.t_start < a.t_start:
            out.append(f"events {i} and {i + 1} out of time order ({a.t_start!r} s > {b.t_start!r} s)")
    if t.events:
        end = max(e.t_start + e.duration for e in t.events)
        seg_end = max((s.t_end for s in t.segments), default=end)
        if not _close(t.total_duration, max(end, seg_end)):
            out.append(f"total_duration {t.total_duration!r} s != end of last event {max(end, seg_end)!r} s")
    if sorted(t.axis_order) != sorted(AXES) or len(t.segments) != 3:
        out.append(f"expected one segment per axis {AXES}, got {[s.axis for s in t.segments]}")

    if cfg is not None:
        res = raman_resonances(cfg.bias_velocity, cfg.species)
        seq = build_sequence(cfg.lmt_order, cfg.big_t, cfg.extra_intervals)
        schedule = [f for _, f in vco_schedule(seq, cfg.bias_velocity, cfg.species)]
    for seg in t.segments:
        ev = [e for e in t.events if e.label == seg.axis or e.label.startswith(seg.axis + ":")]
        cams = [e for e in ev if e.channel == "CAMERA" and e.action == "gate_on"]
        if len(cams) != 1:
            out.append(f"{seg.axis}: expected one imaging window, found {len(cams)}")
        coil_off = [i for i, e in enumerate(ev) if e.channel == "MOT_COILS" and e.value == "off"]
        mol = [i for i, e in enumerate(ev) if e.channel in MOT_CHANNEL.values() and e.action == "set_frequency" and e.value == plan.molasses_aom]
        if not coil_off or not mol or coil_off[0] > mol[0] or ev[coil_off[0]].t_start > ev[mol[0]].t_start:
            out.append(f"{seg.axis}: MOT field must be switched off before molasses")
        reduced = {
            e.channel
            for e in ev
            if e.channel in MOT_CHANNEL.values() and e.action == "set_frequency" and e.value < plan.molasses_aom
        }
        want = {MOT_CHANNEL[b] for b in launch_plan(seg.axis).reduced_beams}
        if reduced != want:
            out.append(f"{seg.axis}: launch reduces {sorted(reduced)}, the launch table requires {sorted(want)}")
        eom = [e.value for e in ev if e.channel == "RAMAN_EOM" and e.action == "set_frequency"]
        if cfg is not None:
            bad = [v for v in eom if not (_close(v, res.up) or _close(v, res.down))]
            if bad:
                out.append(f"{seg.axis}: Raman EOM values {bad} are not Raman resonances")
            if len(eom) != len(schedule) + 1 or not all(_close(a, b) for a, b in zip(eom[1:], schedule)):
                out.append(f"{seg.axis}: Raman EOM values do not follow the VCO schedule")
        for e in ev:
            if not (seg.t_start <= e.t_start <= seg.t_end):
                out.append(f"{seg.axis}: event {e.label!r} at {e.t_start!r} s outside its segment")
                break
    return out

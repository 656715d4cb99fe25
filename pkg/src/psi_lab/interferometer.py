"""LMT-augmented Raman pulse sequence and its phase observables.

Pulse layout for order n (times measured from A_0, all pulses zero length)::

    A_0   at 0              half_pi  +
    A_j   at T/2 - T_j/2    pi       (-1)**j
    B_j   at T/2 + T_j/2    pi       (-1)**j
    B_0   at T              pi       +
    B_-j  at 3T/2 - T_j/2   pi       (-1)**j
    C_-j  at 3T/2 + T_j/2   pi       (-1)**j
    C_0   at 2T             half_pi  +

Each (A_j, B_j) pair is centred on T/2 and its mirror (B_-j, C_-j) on 3T/2,
so the pulse train is symmetric about B_0 and time-ordered only when
T > T_1 > T_2 > ... > T_n > 0.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError
from .physics import HBAR, K_B, SpeciesData, k_eff

HALF_PI = "half_pi"
PI = "pi"


@dataclass(frozen=True)
class Pulse:
    label: str
    time: float
    kind: str
    direction: int

    def to_dict(self):
        return {"label": self.label, "time_s": self.time, "kind": self.kind, "direction": self.direction}


@dataclass(frozen=True)
class PulseSequence:
    order: int
    big_t: float
    extra_intervals: tuple
    pulses: tuple

    @property
    def span(self) -> float:
        return self.pulses[-1].time - self.pulses[0].time

    @property
    def lmt_sum(self) -> float:
        return float(sum(self.extra_intervals))

    @property
    def acceleration_scale(self) -> float:
        """T (T + 2 sum T_j): multiplies k_eff * a in the acceleration phase."""
        return self.big_t * (self.big_t + 2.0 * self.lmt_sum)

    def validate(self) -> list[str]:
        """Return the list of violated sequence invariants (empty when valid)."""
        problems = []
        n = self.order
        if len(self.pulses) != 4 * n + 3:
            problems.append(f"expected {4 * n + 3} pulses for order {n}, found {len(self.pulses)}")
            return problems
        times = [p.time for p in self.pulses]
        for a, b in zip(self.pulses, self.pulses[1:]):
            if not b.time > a.time:
                problems.append(f"pulse times not increasing: {a.label} at {a.time!r} s, {b.label} at {b.time!r} s")
        t0, t_end = times[0], times[-1]
        scale = max(abs(t_end), 1e-300)
        for p, q in zip(self.pulses, reversed(self.pulses)):
            if abs((p.time - t0) - (t_end - q.time)) > 1e-12 * scale:
                problems.append(f"not symmetric about B_0: {p.label} / {q.label}")
            if p.direction != q.direction:
                problems.append(f"direction of {p.label} does not mirror {q.label}")
        for p in self.pulses:
            want = HALF_PI if p.label in ("A_0", "C_0") else PI
            if p.kind != want:
                problems.append(f"{p.label} must be {want}, got {p.kind}")
            if p.direction not in (1, -1):
                problems.append(f"{p.label} direction must be +1 or -1")
        expected = _layout(n, self.big_t, self.extra_intervals)
        for p, (label, t, kind, d) in zip(self.pulses, expected):
            if p.label != label:
                problems.append(f"pulse {label} expected, found {p.label}")
            elif p.direction != d:
                problems.append(f"{label} direction must be {d:+d}")
            elif abs(p.time - t) > 1e-12 * scale:
                problems.append(f"{label} time {p.time!r} s inconsistent with T and T_j ({t!r} s)")
        return problems

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "big_t_s": self.big_t,
            "extra_intervals_s": list(self.extra_intervals),
            "pulses": [p.to_dict() for p in self.pulses],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> PulseSequence:
        pulses = tuple(Pulse(p["label"], float(p["time_s"]), p["kind"], int(p["direction"])) for p in d["pulses"])
        return cls(int(d["order"]), float(d["big_t_s"]), tuple(float(t) for t in d["extra_intervals_s"]), pulses)

    @classmethod
    def from_json(cls, text: str) -> PulseSequence:
        return cls.from_dict(json.loads(text))


def _layout(n, big_t, intervals):
    rows = [("A_0", 0.0, HALF_PI, 1)]
    rows += [(f"A_{j}", 0.5 * (big_t - intervals[j - 1]), PI, (-1) ** j) for j in range(1, n + 1)]
    rows += [(f"B_{j}", 0.5 * (big_t + intervals[j - 1]), PI, (-1) ** j) for j in range(n, 0, -1)]
    rows.append(("B_0", big_t, PI, 1))
    rows += [(f"B_-{j}", 1.5 * big_t - 0.5 * intervals[j - 1], PI, (-1) ** j) for j in range(1, n + 1)]
    rows += [(f"C_-{j}", 1.5 * big_t + 0.5 * intervals[j - 1], PI, (-1) ** j) for j in range(n, 0, -1)]
    rows.append(("C_0", 2.0 * big_t, HALF_PI, 1))
    return rows


def build_sequence(n: int, big_t: float, intervals) -> PulseSequence:
    """Build the 4n + 3 pulse LMT sequence for order ``n``.

    Raises
    ------
    ConfigError
        If ``len(intervals) != n``, any interval is non-positive, or the
        resulting pulse times are not strictly increasing.
    """
    intervals = tuple(float(t) for t in intervals)
    if n < 0:
        raise ConfigError(f"must be >= 0, got {n}", field="lmt_order")
    if len(intervals) != n:
        raise ConfigError(f"expected {n} intervals, got {len(intervals)}", field="extra_intervals")
    if not big_t > 0:
        raise ConfigError(f"must be positive, got {big_t!r}", field="big_t")
    for j, t in enumerate(intervals, start=1):
        if not t > 0:
            raise ConfigError(f"must be positive, got {t!r}", field=f"extra_intervals[{j}]")
    seq = PulseSequence(n, float(big_t), intervals, tuple(Pulse(*row) for row in _layout(n, big_t, intervals)))
    problems = seq.validate()
    if problems:
        raise ConfigError(
            "; ".join(problems) + " (nested LMT pulses need T > T_1 > T_2 > ... > T_n)",
            field="extra_intervals",
        )
    return seq


def acceleration_phase(seq: PulseSequence, a: float, k_eff: float) -> float:
    """k_eff a T (T + 2 sum T_j), signed by the direction of A_0."""
    return seq.pulses[0].direction * k_eff * a * seq.acceleration_scale


def rotation_phase(seq: PulseSequence, omega, r, k_eff_vec) -> float:
    """(k_eff x Omega) . r (T + 2 sum T_j) for displacement ``r`` from A_0 to C_0.

    First order in |Omega| T; a warning is issued above 0.1.
    """
    omega = np.asarray(omega, dtype=float)
    _check_small_rotation(seq, omega)
    w = np.cross(np.asarray(k_eff_vec, dtype=float), omega)
    return float(np.dot(w, np.asarray(r, dtype=float)) * (seq.big_t + 2.0 * seq.lmt_sum))


def _check_small_rotation(seq, omega):
    if np.linalg.norm(omega) * seq.big_t > 0.1:
        warnings.warn(
            f"|Omega| T = {np.linalg.norm(omega) * seq.big_t:.3g} exceeds 0.1; first-order rotation phase is inaccurate",
            stacklevel=3,
        )


class FringeWavevector(NamedTuple):
    k_omega: np.ndarray
    k_omega_full: np.ndarray


@dataclass(frozen=True)
class PhaseObservables:
    phi_a: float
    k_omega: np.ndarray
    k_omega_full: np.ndarray


def fringe_wavevector(seq: PulseSequence, omega, k_eff_vec) -> FringeWavevector:
    """Rotation-induced fringe wavevector, both forms.

    ``k_omega`` uses (T + sum T_j), the form the signal model is written
    with; ``k_omega_full`` uses (T + 2 sum T_j), matching the rotation
    phase. Both are 3-vectors perpendicular to ``k_eff_vec``.
    """
    omega = np.asarray(omega, dtype=float)
    _check_small_rotation(seq, omega)
    w = np.cross(np.asarray(k_eff_vec, dtype=float), omega)
    return FringeWavevector(w * (seq.big_t + seq.lmt_sum), w * (seq.big_t + 2.0 * seq.lmt_sum))


def phase_observables(seq: PulseSequence, k_eff_vec, omega, accel) -> PhaseObservables:
    k_vec = np.asarray(k_eff_vec, dtype=float)
    a_par = float(np.dot(k_vec, np.asarray(accel, dtype=float)) / np.linalg.norm(k_vec))
    kw = fringe_wavevector(seq, omega, k_vec)
    return PhaseObservables(acceleration_phase(seq, a_par, float(np.linalg.norm(k_vec))), kw.k_omega, kw.k_omega_full)


class RamanResonances(NamedTuple):
    co: float
    up: float
    down: float
    doppler: float
    recoil: float


def raman_resonances(v: float, species: SpeciesData) -> RamanResonances:
    """Co-propagating and the two counter-propagating resonance frequencies in Hz.

    The shift is (k_eff v + hbar k_eff^2 / 2m) / 2 pi with k_eff = 2k.
    """
    if v < 0:
        raise ValueError(f"bias velocity must be >= 0, got {v!r}")
    ke = k_eff(species)
    doppler = ke * v / (2.0 * math.pi)
    recoil = HBAR * ke**2 / (2.0 * species.mass) / (2.0 * math.pi)
    f0 = species.hyperfine_splitting
    return RamanResonances(f0, f0 + doppler + recoil, f0 - doppler - recoil, doppler, recoil)


class SeparationCheck(NamedTuple):
    ok: bool
    ratio: float
    margin: float


def resonance_separation_ok(v: float, temperature: float, species: SpeciesData, margin: float = 10.0) -> SeparationCheck:
    """Whether the Doppler splitting 2kv exceeds ``margin`` thermal Doppler widths."""
    v_rms = math.sqrt(K_B * temperature / species.mass)
    ok = v >= margin * v_rms and v > 0
    return SeparationCheck(ok, v / v_rms, margin)


def vco_schedule(seq: PulseSequence, v: float, species: SpeciesData) -> list[tuple[float, float]]:
    """Raman difference frequency for each pulse: f_up for +1 pulses, f_down for -1."""
    res = raman_resonances(v, species)
    return [(p.time, res.up if p.direction > 0 else res.down) for p in seq.pulses]

"""Cloud expansion, finite-source fringe broadening, launch geometry and
free-flight kinematics."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Callable, Iterable

from .errors import DomainError
from .physics import G_STANDARD, RB87, SpeciesData, expanded_radius

__all__ = [
    "BroadeningResult",
    "broadening",
    "sensitivity_ratio_curve",
    "ratio_table_csv",
    "LaunchPlan",
    "launch_plan",
    "AXES",
    "BEAMS",
    "flight_kinematics",
]

LENGTH_SCALE_NOTE = (
    "contrast-loss exponent evaluated as (k_omega * L)^2 b (1 - b); "
    "L is a modelling choice (default sigma_0)"
)


@dataclass(frozen=True)
class BroadeningResult:
    b: float
    k_omega_observed: float
    contrast_observed: float
    sensitivity_ratio: float
    length_scale: float
    note: str = LENGTH_SCALE_NOTE

    def to_dict(self):
        return {
            "b": self.b,
            "k_omega_observed": self.k_omega_observed,
            "contrast_observed": self.contrast_observed,
            "sensitivity_ratio": self.sensitivity_ratio,
            "length_scale_m": self.length_scale,
            "note": self.note,
        }


def broadening(sigma_0: float, sigma_f: float, k_omega: float, c: float, length_scale: float | None = None) -> BroadeningResult:
    """Fringe broadening factor b = 1 - sigma_0^2 / sigma_f^2 and its effects.

    The observed wavevector is b k_omega, the contrast is reduced by
    exp[-(k_omega L)^2 b (1 - b)] and the sensitivity ratio is b times that
    factor. ``length_scale`` L defaults to ``sigma_0``.
    """
    if sigma_0 < 0 or sigma_f <= 0:
        raise DomainError(f"need sigma_0 >= 0 and sigma_f > 0, got {sigma_0!r}, {sigma_f!r}")
    if sigma_0 > sigma_f:
        raise DomainError(f"sigma_0 ({sigma_0!r} m) exceeds sigma_f ({sigma_f!r} m)")
    L = sigma_0 if length_scale is None else float(length_scale)
    b = 1.0 - (sigma_0 / sigma_f) ** 2
    loss = math.exp(-((k_omega * L) ** 2) * b * (1.0 - b))
    return BroadeningResult(b, b * k_omega, c * loss, b * loss, L)


def sensitivity_ratio_curve(
    sigma_0: float,
    temperature: float,
    k_omega_of_T: Callable[[float], float],
    T_values: Iterable[float],
    species: SpeciesData = RB87,
    length_scale: float | None = None,
) -> list[tuple[float, float]]:
    """Sensitivity ratio versus T, with sigma_f taken at expansion time 2T."""
    T_values = [float(t) for t in T_values]
    if any(b <= a for a, b in zip(T_values, T_values[1:])):
        raise ValueError("T values must be strictly increasing")
    rows = []
    for T in T_values:
        sf = expanded_radius(sigma_0, temperature, 2.0 * T, species)
        res = broadening(sigma_0, sf, k_omega_of_T(T), 1.0, length_scale)
        rows.append((T, res.sensitivity_ratio))
    return rows


def ratio_table_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["T_s", "ratio"])
    for T, r in rows:
        w.writerow([repr(float(T)), repr(float(r))])
    return buf.getvalue()


BEAMS = ("MOT 1", "MOT 1'", "MOT 2", "MOT 2'", "MOT 3", "MOT 3'")
AXES = ("PSI-1", "PSI-2", "PSI-3")

# moving-molasses launch: beams whose frequencies are reduced, per PSI axis
_LAUNCH_TABLE = {
    "PSI-1": ("MOT 2'", "MOT 3'"),
    "PSI-2": ("MOT 1'", "MOT 2'", "MOT 3"),
    "PSI-3": ("MOT 1", "MOT 2'", "MOT 3"),
}


@dataclass(frozen=True)
class LaunchPlan:
    axis: str
    reduced_beams: frozenset

    def ordered_beams(self) -> list[str]:
        return [b for b in BEAMS if b in self.reduced_beams]

    def to_json(self) -> str:
        return json.dumps({"axis": self.axis, "reduced_beams": self.ordered_beams()})


def launch_plan(axis: str) -> LaunchPlan:
    try:
        beams = _LAUNCH_TABLE[axis]
    except KeyError:
        raise ValueError(f"unknown PSI axis {axis!r}; expected one of {', '.join(AXES)}") from None
    return LaunchPlan(axis, frozenset(beams))


def flight_kinematics(v_bias: float, sequence_span: float, transverse_g: float = G_STANDARD) -> tuple[float, float]:
    """Distance travelled along the launch axis and transverse sag over the span."""
    if v_bias < 0 or sequence_span < 0 or transverse_g < 0:
        raise ValueError("flight kinematics inputs must be non-negative")
    return v_bias * sequence_span, 0.5 * transverse_g * sequence_span**2

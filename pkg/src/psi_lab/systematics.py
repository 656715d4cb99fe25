"""Second-order Zeeman systematics of the m_F = 0 clock transition.

Only the quadratic term of the Breit-Rabi expansion is kept,
Delta_Z = (g_S mu_B B / h)^2 / (4 Delta_HFS), valid for
g_S mu_B B / h << Delta_HFS (B << 2 kG for 87Rb).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .physics import G_STANDARD, H_PLANCK, RB87, SpeciesData

__all__ = [
    "ZeemanScenario",
    "second_order_shift",
    "differential_shift",
    "zeeman_phase_error",
    "ZeemanForce",
    "zeeman_force",
    "zeeman_report",
]

DYN_PER_NEWTON = 1e5
TESLA_PER_GAUSS = 1e-4
GAUSS_PER_CM_TO_GAUSS_PER_M = 100.0


@dataclass(frozen=True)
class ZeemanScenario:
    """Field step at mid-sequence: ``b_first_half`` then ``b_second_half`` (G)."""

    b_first_half: float
    b_second_half: float
    gradient: float
    T: float

    def __post_init__(self):
        for name in ("b_first_half", "b_second_half", "gradient"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and non-negative, got {v!r}")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T!r}")


def second_order_shift(B: float, species: SpeciesData = RB87) -> float:
    """Delta_Z in Hz for field ``B`` in gauss."""
    if B < 0:
        raise ValueError(f"B must be >= 0, got {B!r}")
    return (species.electron_g_factor * species.bohr_magneton_over_h * B) ** 2 / (4.0 * species.hyperfine_splitting)


def differential_shift(B: float, species: SpeciesData = RB87) -> float:
    """Clock-state splitting change 2 Delta_Z in Hz."""
    return 2.0 * second_order_shift(B, species)


def zeeman_phase_error(scn: ZeemanScenario, species: SpeciesData = RB87) -> float:
    """2 pi [2 Delta_Z(B2) - 2 Delta_Z(B1)] T, rad."""
    dnu = differential_shift(scn.b_second_half, species) - differential_shift(scn.b_first_half, species)
    return 2.0 * math.pi * dnu * scn.T


@dataclass(frozen=True)
class ZeemanForce:
    force: float  # N
    acceleration: float  # m s^-2
    acceleration_in_g: float

    @property
    def force_dyn(self) -> float:
        return self.force * DYN_PER_NEWTON


def zeeman_force(B: float, dBdz: float, species: SpeciesData = RB87) -> ZeemanForce:
    """Gradient force h (dDelta_Z/dB)(dB/dz) on a clock state.

    ``B`` in G, ``dBdz`` in G/cm.
    """
    if B < 0 or dBdz < 0:
        raise ValueError("B and dB/dz must be non-negative")
    mu = species.electron_g_factor * species.bohr_magneton_over_h
    d_shift_dB = mu**2 * B / (2.0 * species.hyperfine_splitting)  # Hz / G
    force = H_PLANCK * d_shift_dB * dBdz * GAUSS_PER_CM_TO_GAUSS_PER_M
    acc = force / species.mass
    return ZeemanForce(force, acc, acc / G_STANDARD)


def zeeman_report(scn: ZeemanScenario, species: SpeciesData = RB87, phase_budget: float | None = None) -> dict:
    """All three quantities for a scenario, with an optional phase budget check (rad)."""
    dnu = differential_shift(scn.b_second_half, species) - differential_shift(scn.b_first_half, species)
    phase = zeeman_phase_error(scn, species)
    fz = zeeman_force(scn.b_first_half, scn.gradient, species)
    out = {
        "scenario": {
            "b_first_half_G": scn.b_first_half,
            "b_second_half_G": scn.b_second_half,
            "gradient_G_per_cm": scn.gradient,
            "T_s": scn.T,
        },
        "delta_z_first_half_Hz": second_order_shift(scn.b_first_half, species),
        "delta_z_second_half_Hz": second_order_shift(scn.b_second_half, species),
        "differential_shift_change_Hz": dnu,
        "phase_error_rad": phase,
        "phase_error_over_pi": phase / math.pi,
        "force_N": fz.force,
        "force_dyn": fz.force_dyn,
        "acceleration_m_s2": fz.acceleration,
        "acceleration_micro_g": fz.acceleration_in_g * 1e6,
        "validity_note": "quadratic Breit-Rabi term only; requires g_S mu_B B / h << Delta_HFS",
    }
    if phase_budget is not None:
        out["phase_budget_rad"] = float(phase_budget)
        out["within_budget"] = abs(phase) <= phase_budget
    return out

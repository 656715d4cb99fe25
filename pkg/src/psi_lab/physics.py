"""Physical constants, species data and the shared experiment configuration.

All quantities are SI internally. Configuration documents may carry unit
suffixes ("20 ms", "6 uK", "0.2 mm"); they are converted by
:func:`psi_lab.config.load_config`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from scipy import constants as const

from .errors import ConfigError

HBAR = const.hbar
H_PLANCK = const.h
K_B = const.k
G_STANDARD = const.g

__all__ = [
    "SpeciesData",
    "RB87",
    "ExperimentConfig",
    "k_eff",
    "momentum_transfer_wavenumber",
    "sigma_f",
    "expanded_radius",
    "thermal_velocity",
    "default_extra_intervals",
]


def _require_positive(name, value):
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise ConfigError(f"must be a finite positive number, got {value!r}", field=name)


@dataclass(frozen=True)
class SpeciesData:
    """Atomic species parameters used by the interferometer model.

    Attributes
    ----------
    mass : float
        Atomic mass in kg.
    wavelength : float
        D2-line wavelength in m.
    hyperfine_splitting : float
        Ground-state hyperfine splitting in Hz.
    saturation_intensity : float
        Saturation intensity in W m^-2.
    electron_g_factor : float
        Electron spin g-factor g_S.
    bohr_magneton_over_h : float
        mu_B / h in Hz per gauss.
    """

    name: str
    mass: float
    wavelength: float
    hyperfine_splitting: float
    saturation_intensity: float
    electron_g_factor: float
    bohr_magneton_over_h: float

    def __post_init__(self):
        for name in (
            "mass",
            "wavelength",
            "hyperfine_splitting",
            "saturation_intensity",
            "electron_g_factor",
            "bohr_magneton_over_h",
        ):
            _require_positive(name, getattr(self, name))

    @property
    def wavenumber(self) -> float:
        """Single-photon wavenumber 2*pi/lambda in rad/m."""
        return 2.0 * math.pi / self.wavelength

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "mass": self.mass,
            "wavelength": self.wavelength,
            "hyperfine_splitting": self.hyperfine_splitting,
            "saturation_intensity": self.saturation_intensity,
            "electron_g_factor": self.electron_g_factor,
            "bohr_magneton_over_h": self.bohr_magneton_over_h,
        }


RB87 = SpeciesData(
    name="87Rb",
    mass=1.44316e-25,
    wavelength=780.241e-9,
    hyperfine_splitting=6.8347e9,
    saturation_intensity=50.1,  # 5.01 mW/cm^2
    electron_g_factor=2.0,
    bohr_magneton_over_h=1.3996e6,
)


def k_eff(species: SpeciesData) -> float:
    """Two-photon wavenumber of a counter-propagating Raman pair, 2k."""
    return 2.0 * species.wavenumber


def thermal_velocity(temperature: float, species: SpeciesData) -> float:
    """One-dimensional rms velocity sqrt(k_B T / m) in m/s."""
    return math.sqrt(K_B * temperature / species.mass)


def default_extra_intervals(order: int, big_t: float) -> tuple[float, ...]:
    """Evenly nested LMT intervals T_j = T (n + 1 - j) / (n + 1).

    Strictly decreasing and below T, as the nested pulse layout requires.
    """
    return tuple(big_t * (order + 1 - j) / (order + 1) for j in range(1, order + 1))


@dataclass(frozen=True)
class ExperimentConfig:
    """One PSI axis: LMT sequence, cloud, camera and cycle timing.

    ``extra_intervals`` holds T_1..T_n. ``grid_size`` is (nx, ny).
    """

    species: SpeciesData = RB87
    lmt_order: int = 0
    big_t: float = 20e-3
    extra_intervals: tuple = ()
    contrast: float = 0.5
    atom_number: int = 1_000_000
    sigma_0: float = 0.2e-3
    temperature: float = 6e-6
    bias_velocity: float = 1.0
    expansion_time: float = 40e-3
    cycle_time: float = 1.0
    mot_load_time: float = 1.0
    pixel_pitch: float = 30e-6
    grid_size: tuple = (256, 64)
    extras: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "extra_intervals", tuple(float(t) for t in self.extra_intervals))
        object.__setattr__(self, "grid_size", tuple(int(v) for v in self.grid_size))
        if isinstance(self.lmt_order, bool) or not isinstance(self.lmt_order, int) or self.lmt_order < 0:
            raise ConfigError(f"must be an integer >= 0, got {self.lmt_order!r}", field="lmt_order")
        if len(self.extra_intervals) != self.lmt_order:
            raise ConfigError(
                f"expected {self.lmt_order} entries (one per LMT order), got {len(self.extra_intervals)}",
                field="extra_intervals",
            )
        for j, t in enumerate(self.extra_intervals, start=1):
            _require_positive(f"extra_intervals[{j}]", t)
        for name in (
            "big_t",
            "sigma_0",
            "temperature",
            "bias_velocity",
            "expansion_time",
            "cycle_time",
            "mot_load_time",
            "pixel_pitch",
        ):
            _require_positive(name, getattr(self, name))
        if not (0.0 < self.contrast <= 1.0):
            raise ConfigError(f"must lie in (0, 1], got {self.contrast!r}", field="contrast")
        if isinstance(self.atom_number, bool) or int(self.atom_number) != self.atom_number or self.atom_number < 1:
            raise ConfigError(f"must be a positive integer, got {self.atom_number!r}", field="atom_number")
        object.__setattr__(self, "atom_number", int(self.atom_number))
        if len(self.grid_size) != 2 or min(self.grid_size) < 1:
            raise ConfigError(f"must be two integers >= 1, got {self.grid_size!r}", field="grid_size")

    @property
    def sigma_f(self) -> float:
        return sigma_f(self)

    @property
    def k_eff(self) -> float:
        return k_eff(self.species)

    @property
    def k_t(self) -> float:
        return momentum_transfer_wavenumber(self)


def momentum_transfer_wavenumber(cfg: ExperimentConfig) -> float:
    """k_t = (n + 1) k_eff for LMT order n."""
    return (cfg.lmt_order + 1) * k_eff(cfg.species)


def expanded_radius(sigma_0: float, temperature: float, time: float, species: SpeciesData = RB87) -> float:
    """rms radius sqrt(sigma_0^2 + (k_B T / m) t^2) of a thermal cloud after free expansion."""
    v2 = K_B * temperature / species.mass
    return math.sqrt(sigma_0**2 + v2 * time**2)


def sigma_f(cfg: ExperimentConfig) -> float:
    """Final rms cloud radius after ballistic expansion for ``expansion_time``."""
    return expanded_radius(cfg.sigma_0, cfg.temperature, cfg.expansion_time, cfg.species)

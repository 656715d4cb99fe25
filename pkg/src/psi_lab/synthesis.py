"""Synthetic PSI detection images with binomial atom shot noise.

Fringes run along +x. Each pixel holds a fixed integer number of atoms (the
trial count) and the detected-state count is binomial with success
probability (1 + c cos(k_omega x + phi_a)) / 2.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import erf

from . import kernels
from ._io import atomic_write_text

__all__ = [
    "PixelGrid",
    "Truth",
    "FringeImage",
    "cloud_profile",
    "allocate_atoms",
    "expected_counts",
    "sample_image",
    "synthesize",
    "integrate_y",
    "write_image",
    "read_image",
]


@dataclass(frozen=True)
class PixelGrid:
    """Camera grid centred on the cloud; ``origin`` is the grid centre in cloud coordinates."""

    nx: int
    ny: int
    pitch: float
    origin: tuple = (0.0, 0.0)

    def __post_init__(self):
        if int(self.nx) < 1 or int(self.ny) < 1:
            raise ValueError(f"grid needs nx, ny >= 1, got {self.nx}, {self.ny}")
        if not self.pitch > 0:
            raise ValueError(f"pixel pitch must be positive, got {self.pitch!r}")
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def x(self) -> np.ndarray:
        return self.origin[0] + (np.arange(self.nx) - 0.5 * (self.nx - 1)) * self.pitch

    @property
    def y(self) -> np.ndarray:
        return self.origin[1] + (np.arange(self.ny) - 0.5 * (self.ny - 1)) * self.pitch

    def to_dict(self):
        return {"nx": self.nx, "ny": self.ny, "pitch_m": self.pitch, "origin_m": list(self.origin)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["nx"], d["ny"], d["pitch_m"], tuple(d.get("origin_m", (0.0, 0.0))))


@dataclass(frozen=True)
class Truth:
    k_omega: float
    phi_a: float
    contrast: float
    atom_number: int
    sigma_f: float


@dataclass(frozen=True)
class FringeImage:
    grid: PixelGrid
    counts: np.ndarray
    atoms: np.ndarray | None = None
    truth: Truth | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.shape != (self.grid.nx, self.grid.ny):
            raise ValueError(f"counts shape {counts.shape} does not match grid ({self.grid.nx}, {self.grid.ny})")
        if np.any(counts < 0):
            raise ValueError("pixel counts must be non-negative")

    @property
    def profile_1d(self) -> np.ndarray:
        return integrate_y(self)

    @property
    def atoms_1d(self) -> np.ndarray | None:
        return None if self.atoms is None else np.asarray(self.atoms).sum(axis=1)


def _pixel_masses(centres, pitch, sigma):
    edges = np.append(centres - 0.5 * pitch, centres[-1] + 0.5 * pitch)
    cdf = 0.5 * (1.0 + erf(edges / (math.sqrt(2.0) * sigma)))
    return np.diff(cdf)


def cloud_profile(N: float, sigma_f: float, grid: PixelGrid) -> np.ndarray:
    """Expected atoms per pixel for an isotropic Gaussian cloud, summing to N.

    Pixel values are exact integrals of the Gaussian over each pixel,
    renormalised for the part of the cloud that falls outside the grid.
    """
    if not N > 0:
        raise ValueError(f"atom number must be positive, got {N!r}")
    if sigma_f < grid.pitch / 10:
        warnings.warn(
            f"sigma_f = {sigma_f:.3g} m is below a tenth of the pixel pitch; the cloud is under-resolved",
            stacklevel=2,
        )
    mx = _pixel_masses(grid.x, grid.pitch, sigma_f)
    my = _pixel_masses(grid.y, grid.pitch, sigma_f)
    mx /= mx.sum()
    my /= my.sum()
    return N * np.outer(mx, my)


def _largest_remainder(values, total):
    base = np.floor(values)
    short = int(total - base.sum())
    frac = values - base
    if short > 0:
        # stable ordering keeps ties deterministic
        idx = np.argsort(-frac, kind="stable")[:short]
        base[idx] += 1
    return base.astype(np.int64)


def allocate_atoms(f: np.ndarray) -> np.ndarray:
    """Deterministic integer atom counts per pixel from expected counts ``f``.

    Column totals are rounded by the largest-remainder rule so the
    y-integrated profile stays within one atom of ``f`` summed over y and the
    grand total equals round(sum f); rows are then apportioned the same way.
    """
    f = np.asarray(f, dtype=float)
    if f.ndim == 1:
        return allocate_atoms(f[:, None])[:, 0]
    col = f.sum(axis=1)
    n_col = _largest_remainder(col, int(round(col.sum())))
    out = np.zeros(f.shape, dtype=np.int64)
    for i in range(f.shape[0]):
        if n_col[i] == 0:
            continue
        scaled = f[i] * (n_col[i] / col[i])
        out[i] = _largest_remainder(scaled, n_col[i])
    return out


def expected_counts(f, x, k_omega: float, phi_a: float, c: float):
    """Mean and variance of the detected-state count per pixel.

    ``f`` may be 1D over x or 2D (x, y); ``x`` are the pixel x coordinates.
    """
    if not 0.0 <= c <= 1.0:
        raise ValueError(f"contrast must lie in [0, 1], got {c!r}")
    f = np.asarray(f, dtype=float)
    cos_phi = np.cos(k_omega * np.asarray(x, dtype=float) + phi_a)
    if f.ndim == 2:
        cos_phi = cos_phi[:, None]
    mean = 0.5 * (1.0 + c * cos_phi) * f
    var = 0.25 * (1.0 - c**2 * cos_phi**2) * f
    return mean, var


def sample_image(grid: PixelGrid, f, k_omega: float, phi_a: float, c: float, seed: int, truth: Truth | None = None) -> FringeImage:
    """Draw one detection image.

    Trial counts come from :func:`allocate_atoms`; every pixel draws from its
    own Philox stream keyed on ``seed`` and the pixel index, so the result
    does not depend on evaluation order or on the kernel backend.
    """
    f = np.asarray(f, dtype=float).reshape(grid.nx, grid.ny)
    atoms = allocate_atoms(f)
    prob = 0.5 * (1.0 + c * np.cos(k_omega * grid.x + phi_a))
    prob = np.clip(prob, 0.0, 1.0)
    prob2d = np.broadcast_to(prob[:, None], f.shape)
    counts = kernels.binomial_counts(atoms.ravel(), np.ascontiguousarray(prob2d).ravel(), int(seed) & (2**64 - 1))
    return FringeImage(grid, counts.reshape(f.shape), atoms, truth, {"seed": int(seed)})


def synthesize(grid: PixelGrid, atom_number: int, sigma_f: float, k_omega: float, phi_a: float, c: float, seed: int) -> FringeImage:
    """Cloud profile plus one shot-noise image, with the truth recorded."""
    f = cloud_profile(atom_number, sigma_f, grid)
    truth = Truth(float(k_omega), float(phi_a), float(c), int(atom_number), float(sigma_f))
    return sample_image(grid, f, k_omega, phi_a, c, seed, truth)


def integrate_y(image: FringeImage) -> np.ndarray:
    """Column sums of the image (fringes assumed along x)."""
    return np.asarray(image.counts).sum(axis=1)


def sidecar_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".json")


def write_image(image: FringeImage, path, extra: dict | None = None) -> tuple[Path, Path]:
    """Write counts as CSV (one line per pixel row, y outer) plus a JSON sidecar."""
    path = Path(path)
    lines = [",".join(str(int(v)) for v in row) for row in np.asarray(image.counts).T]
    atomic_write_text(path, "\n".join(lines) + "\n")
    side = {"grid": image.grid.to_dict()}
    if image.truth is not None:
        side["truth"] = asdict(image.truth)
    side.update(extra or {})
    sp = sidecar_path(path)
    atomic_write_text(sp, json.dumps(side, indent=2, sort_keys=True) + "\n")
    return path, sp


def read_image(path) -> FringeImage:
    """Read an image CSV and, when present, its JSON sidecar.

    Without a sidecar the grid uses unit pitch (pixel coordinates).
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [[int(float(v)) for v in row] for row in csv.reader(fh) if row]
    if not rows:
        raise ValueError(f"{path}: empty image")
    counts = np.array(rows, dtype=np.int64).T
    sp = sidecar_path(path)
    meta = {}
    truth = None
    if sp.exists():
        meta = json.loads(sp.read_text())
        grid = PixelGrid.from_dict(meta["grid"])
        if "truth" in meta:
            truth = Truth(**meta["truth"])
    else:
        grid = PixelGrid(counts.shape[0], counts.shape[1], 1.0)
    return FringeImage(grid, counts, None, truth, meta)

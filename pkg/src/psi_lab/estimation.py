"""Fringe parameter estimation from a y-integrated profile.

Two estimators share :class:`FringeEstimate`:

* :func:`fourier_estimate` locates the +k side peak of the spectrum and reads
  the fringe phase from it. Cheap and robust, used to initialise the fit.
* :func:`wls_fit` minimises sum_l (p_l - <p_l>)^2 / f_l over (k, phi, c) by
  damped Gauss-Newton, weights taken from the known cloud profile ``f``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import AmbiguityError, FringesUnresolvedError, UnidentifiableError
from .interferometer import PulseSequence

__all__ = [
    "FringeEstimate",
    "wrap_phase",
    "fourier_estimate",
    "wls_fit",
    "estimate_cloud",
    "unwrap_acceleration",
]

DEGENERACY_RTOL = 1e-12


@dataclass(frozen=True)
class FringeEstimate:
    k_omega_hat: float
    phi_a_hat: float
    contrast_hat: float
    method: str
    converged: bool = True
    iterations: int = 0
    normal_residual: float = float("nan")
    n_pixels: int = 0

    def to_dict(self):
        return {
            "method": self.method,
            "k_omega_hat": self.k_omega_hat,
            "phi_a_hat": self.phi_a_hat,
            "contrast_hat": self.contrast_hat,
            "converged": self.converged,
            "iterations": self.iterations,
            "normal_residual": None if math.isnan(self.normal_residual) else self.normal_residual,
            "n_pixels": self.n_pixels,
        }


def wrap_phase(phi):
    """Wrap into (-pi, pi]."""
    out = math.pi - np.mod(math.pi - np.asarray(phi, dtype=float), 2.0 * math.pi)
    return float(out) if out.ndim == 0 else out


def _uniform_pitch(x):
    x = np.asarray(x, dtype=float)
    d = np.diff(x)
    if np.any(d <= 0) or not np.allclose(d, d[0], rtol=1e-9, atol=0):
        raise ValueError("pixel coordinates must be uniformly spaced and increasing")
    return float(d[0])


def fourier_estimate(profile, x, min_contrast: float = 1e-3, floor_ratio: float = 4.0) -> FringeEstimate:
    """Side-peak estimate of (k, phi, c) from the real spectrum of ``profile``.

    The zero-frequency lobe is excluded by walking outward from DC to the
    first local minimum of the magnitude. The peak bin is refined by
    quadratic interpolation of the log magnitude over three bins, and the
    phase is that of the transform sum_l p_l exp(-i k x_l) evaluated at the
    refined k, so it refers to x = 0.

    Raises
    ------
    FringesUnresolvedError
        If the peak is below ``floor_ratio`` times the median off-peak
        magnitude, or the implied contrast is below ``min_contrast``.
    """
    p = np.asarray(profile, dtype=float)
    x = np.asarray(x, dtype=float)
    n = p.size
    if n < 8:
        raise ValueError(f"profile needs at least 8 pixels, got {n}")
    if x.shape != p.shape:
        raise ValueError("profile and x must have the same length")
    dx = _uniform_pitch(x)
    total = p.sum()
    if not total > 0:
        raise FringesUnresolvedError("empty profile")
    mag = np.abs(np.fft.rfft(p))
    m_lo = 1
    while m_lo + 1 < mag.size and mag[m_lo + 1] <= mag[m_lo]:
        m_lo += 1
    if m_lo >= mag.size - 1:
        raise FringesUnresolvedError("no spectral content outside the central lobe")
    m = m_lo + int(np.argmax(mag[m_lo:]))
    off = np.ones(mag.size, dtype=bool)
    off[:m_lo] = False
    off[max(m - 2, 0) : m + 3] = False
    floor = float(np.median(mag[off])) if off.any() else 0.0
    if mag[m] < floor_ratio * floor:
        raise FringesUnresolvedError(
            f"side peak {mag[m]:.3g} below {floor_ratio:g}x the off-peak median {floor:.3g}"
        )
    delta = 0.0
    if 0 < m < mag.size - 1 and min(mag[m - 1], mag[m + 1]) > 0:
        la, lb, lc = np.log(mag[m - 1 : m + 2])
        den = la - 2.0 * lb + lc
        if den < 0:
            delta = float(np.clip(0.5 * (la - lc) / den, -0.5, 0.5))
    k_hat = 2.0 * math.pi * (m + delta) / (n * dx)
    s = np.sum(p * np.exp(-1j * k_hat * x))
    c_hat = 2.0 * abs(s) / total
    if c_hat < min_contrast:
        raise FringesUnresolvedError(f"side-peak contrast {c_hat:.3g} below {min_contrast:g}")
    return FringeEstimate(k_hat, wrap_phase(float(np.angle(s))), float(c_hat), "fourier", True, 0, float("nan"), n)


def _canonical(k, phi, c):
    if c < 0:
        c, phi = -c, phi + math.pi
    if k < 0:
        k, phi = -k, -phi
    return k, wrap_phase(phi), c


def _check_identifiable(A):
    alpha, beta, gamma = A[0, 0], A[0, 1], A[1, 1]
    if not (alpha > 0 and gamma > 0) or alpha * gamma - beta**2 <= DEGENERACY_RTOL * alpha * gamma:
        raise UnidentifiableError(
            f"(k, phi) normal matrix is degenerate: alpha={alpha:.3g}, beta={beta:.3g}, gamma={gamma:.3g}"
        )


def wls_fit(
    profile,
    f,
    x,
    init: FringeEstimate | tuple | None = None,
    floor: float = 1e-3,
    max_iter: int = 200,
    tol: float = 1e-8,
) -> FringeEstimate:
    """Weighted least-squares fringe fit.

    Parameters
    ----------
    profile : array_like
        Detected-state counts per column.
    f : array_like
        Expected (or allocated) atoms per column; pixels with
        ``f < floor * max(f)`` are dropped.
    x : array_like
        Column coordinates, m.
    init : FringeEstimate or (k, phi, c), optional
        Starting point; defaults to :func:`fourier_estimate`.

    Returns
    -------
    FringeEstimate
        ``converged`` is False when ``max_iter`` steps did not reach a
        relative step below ``tol``; the best iterate is returned.

    Raises
    ------
    UnidentifiableError
        If alpha gamma - beta^2 <= 1e-12 alpha gamma at the start or end.
    """
    p = np.asarray(profile, dtype=float)
    f = np.asarray(f, dtype=float)
    x = np.asarray(x, dtype=float)
    if not (p.shape == f.shape == x.shape):
        raise ValueError("profile, f and x must have the same length")
    if not np.any(f > 0):
        raise ValueError("cloud profile f has no positive entries")
    if init is None:
        init = fourier_estimate(p, x)
    keep = (f >= floor * f.max()) & (f > 0)
    p, f, x = p[keep], f[keep], x[keep]
    if isinstance(init, FringeEstimate):
        theta = np.array([init.k_omega_hat, init.phi_a_hat, init.contrast_hat], dtype=float)
    else:
        theta = np.array(init, dtype=float)

    # k is scaled by the cloud's rms width so all three parameters are O(1)
    scale = math.sqrt(float(np.sum(f * x**2) / np.sum(f))) or 1.0
    D = np.array([1.0 / scale, 1.0, 1.0])

    A, g, chi2 = kernels.fringe_normal_equations(x, f, p, *theta)
    _check_identifiable(A)
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        As = A * np.outer(D, D)
        gs = g * D
        try:
            step_s = np.linalg.solve(As, gs)
        except np.linalg.LinAlgError:
            step_s = np.linalg.lstsq(As, gs, rcond=None)[0]
        step = step_s * D
        rel = np.abs(step_s) / np.maximum(np.abs(theta / D), 1.0)
        if np.max(rel) < tol:
            theta = theta + step
            A, g, chi2 = kernels.fringe_normal_equations(x, f, p, *theta)
            converged = True
            break
        t = 1.0
        accepted = False
        for _ in range(40):
            trial = theta + t * step
            A_t, g_t, chi2_t = kernels.fringe_normal_equations(x, f, p, *trial)
            if chi2_t <= chi2:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            # no descent along the GN direction: at the minimum to rounding
            converged = bool(np.max(rel) < math.sqrt(tol))
            break
        theta, A, g, chi2 = trial, A_t, g_t, chi2_t
    _check_identifiable(A)
    diag = np.diag(A)
    # gradient over its Cauchy-Schwarz bound; n_used keeps noiseless fits finite
    denom = np.sqrt(np.maximum(diag, 0.0) * (chi2 + p.size))
    resid = float(np.max(np.abs(g) / np.where(denom > 0, denom, 1.0)))
    k, phi, c = _canonical(*theta)
    return FringeEstimate(float(k), float(phi), float(c), "wls", converged, it, resid, int(p.size))


def estimate_cloud(profile, x) -> np.ndarray:
    """Gaussian cloud profile inferred from the data by moments.

    For images without a known cloud: the atom number is taken as twice the
    detected total and the width from the second moment.
    """
    p = np.asarray(profile, dtype=float)
    x = np.asarray(x, dtype=float)
    total = p.sum()
    if not total > 0:
        raise FringesUnresolvedError("empty profile")
    mu = float(np.sum(p * x) / total)
    sigma = math.sqrt(float(np.sum(p * (x - mu) ** 2) / total))
    w = np.exp(-0.5 * ((x - mu) / sigma) ** 2)
    return 2.0 * total * w / w.sum()


def unwrap_acceleration(phi_a_hat: float, seq: PulseSequence, k_eff: float, a_coarse: float, a_coarse_sigma: float) -> float:
    """Resolve the 2 pi ambiguity of the fringe phase with a coarse accelerometer.

    Returns (phi + 2 pi m) / S with S the phase scale factor of ``seq`` and m
    the integer that lands closest to ``a_coarse``.

    Raises
    ------
    AmbiguityError
        If ``a_coarse_sigma * |S| >= pi / 3``.
    """
    scale = seq.pulses[0].direction * k_eff * seq.acceleration_scale
    if not a_coarse_sigma >= 0:
        raise ValueError(f"coarse sigma must be >= 0, got {a_coarse_sigma!r}")
    bound = math.pi / (3.0 * abs(scale))
    if a_coarse_sigma >= bound:
        raise AmbiguityError(
            f"coarse accelerometer sigma {a_coarse_sigma:.3g} m/s^2 too large; need < {bound:.3g} m/s^2"
        )
    m = round((a_coarse * scale - phi_a_hat) / (2.0 * math.pi))
    return (phi_a_hat + 2.0 * math.pi * m) / scale

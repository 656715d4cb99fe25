"""Shot-noise variance of the fringe observables, sensitivity limits,
Monte Carlo validation, LMT order optimisation and IMU bandwidth."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import EstimationError, UnidentifiableError
from .estimation import DEGENERACY_RTOL, fourier_estimate, wls_fit, wrap_phase
from .physics import G_STANDARD, ExperimentConfig, momentum_transfer_wavenumber
from .synthesis import PixelGrid, allocate_atoms, cloud_profile

__all__ = [
    "VariancePrediction",
    "numeric_variances",
    "closed_form_variances",
    "SensitivityReport",
    "sensitivity",
    "SimulationSetup",
    "MonteCarloReport",
    "monte_carlo_validate",
    "LmtOptimum",
    "lmt_optimize",
    "imu_bandwidth",
]

GENERAL_NUMERIC = "general_numeric"
SEPARATED_CLOSED_FORM = "separated_closed_form"


@dataclass(frozen=True)
class VariancePrediction:
    var_k_omega: float
    var_phi_a: float
    regime: str

    def __post_init__(self):
        for name in ("var_k_omega", "var_phi_a"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")

    @property
    def std_k_omega(self) -> float:
        return math.sqrt(self.var_k_omega)

    @property
    def std_phi_a(self) -> float:
        return math.sqrt(self.var_phi_a)

    def to_dict(self):
        return {
            "regime": self.regime,
            "var_k_omega": self.var_k_omega,
            "var_phi_a": self.var_phi_a,
            "std_k_omega": self.std_k_omega,
            "std_phi_a": self.std_phi_a,
        }


def numeric_variances(f, x, k_omega: float, phi_a: float, c: float, return_coefficients: bool = False):
    """Exact first-order propagation of binomial pixel noise into (k, phi).

    Uses the actual pixel phases: alpha, beta, gamma are the weighted sums of
    squared model derivatives, each pixel's influence on the estimates
    follows from the 2x2 normal system, and the per-pixel variance is
    (1 - c^2 cos^2 phi_l) f_l / 4.

    Raises
    ------
    UnidentifiableError
        If alpha gamma - beta^2 <= 1e-12 alpha gamma.
    """
    f = np.asarray(f, dtype=float)
    x = np.asarray(x, dtype=float)
    keep = f > 0
    f, x = f[keep], x[keep]
    ph = k_omega * x + phi_a
    s = np.sin(ph)
    dphi = -0.5 * c * s * f  # d<p_l>/d phi_a
    dk = dphi * x  # d<p_l>/d k_omega
    alpha = float(np.sum(dk * dk / f))
    beta = float(np.sum(dk * dphi / f))
    gamma = float(np.sum(dphi * dphi / f))
    det = alpha * gamma - beta**2
    if not (alpha > 0 and gamma > 0) or det <= DEGENERACY_RTOL * alpha * gamma:
        raise UnidentifiableError(
            f"unidentifiable geometry: alpha={alpha:.3g}, beta={beta:.3g}, gamma={gamma:.3g}"
        )
    # influence of p_l: solve [[a, b], [b, g]] [dk/dp, dphi/dp] = [dk, dphi] / f
    gk = dk / f
    gp = dphi / f
    infl_k = (gamma * gk - beta * gp) / det
    infl_p = (alpha * gp - beta * gk) / det
    var_p = 0.25 * (1.0 - (c * np.cos(ph)) ** 2) * f
    pred = VariancePrediction(float(np.sum(infl_k**2 * var_p)), float(np.sum(infl_p**2 * var_p)), GENERAL_NUMERIC)
    if return_coefficients:
        return pred, (alpha, beta, gamma)
    return pred


def closed_form_variances(N: float, c: float, sigma_f: float) -> VariancePrediction:
    """Separated-peak limit: var(phi) = (4 - c^2) / (2 N c^2), var(k) = var(phi) / sigma_f^2."""
    if not N >= 1:
        raise ValueError(f"N must be >= 1, got {N!r}")
    if not 0.0 < c <= 1.0:
        raise ValueError(f"contrast must lie in (0, 1], got {c!r}")
    if not sigma_f > 0:
        raise ValueError(f"sigma_f must be positive, got {sigma_f!r}")
    var_phi = (4.0 - c * c) / (2.0 * N * c * c)
    return VariancePrediction(var_phi / sigma_f**2, var_phi, SEPARATED_CLOSED_FORM)


@dataclass(frozen=True)
class SensitivityReport:
    """Acceleration and rotation sensitivity.

    ``*_shot`` are single-shot limits, ``*_tau`` the limits after averaging
    for ``tau`` and ``*_asd`` the amplitude spectral densities (value times
    sqrt(tau)), in m s^-2 Hz^-1/2 and rad s^-1 Hz^-1/2. ``*_exact_asd`` use
    c sqrt(2N / (4 - c^2)) in place of c sqrt(N / 2).
    """

    delta_a_shot: float
    delta_omega_shot: float
    delta_a_tau: float
    delta_omega_tau: float
    delta_a_asd: float
    delta_omega_asd: float
    delta_a_exact_asd: float
    delta_omega_exact_asd: float
    tau: float
    parameters: dict

    @property
    def delta_a_asd_nano_g(self) -> float:
        return self.delta_a_asd / G_STANDARD * 1e9

    @property
    def delta_omega_asd_urad(self) -> float:
        return self.delta_omega_asd * 1e6

    def to_dict(self):
        return {
            "delta_a_shot_m_s2": self.delta_a_shot,
            "delta_omega_shot_rad_s": self.delta_omega_shot,
            "delta_a_tau_m_s2": self.delta_a_tau,
            "delta_omega_tau_rad_s": self.delta_omega_tau,
            "delta_a_asd_m_s2_per_rtHz": self.delta_a_asd,
            "delta_omega_asd_rad_s_per_rtHz": self.delta_omega_asd,
            "delta_a_asd_nano_g_per_rtHz": self.delta_a_asd_nano_g,
            "delta_omega_asd_urad_s_per_rtHz": self.delta_omega_asd_urad,
            "delta_a_exact_asd_m_s2_per_rtHz": self.delta_a_exact_asd,
            "delta_omega_exact_asd_rad_s_per_rtHz": self.delta_omega_exact_asd,
            "tau_s": self.tau,
            "parameters": dict(self.parameters),
        }


def sensitivity(cfg: ExperimentConfig, tau: float = 1.0, sigma_f: float | None = None) -> SensitivityReport:
    """Shot-noise limits Delta a = 1 / (k_t T^2 c sqrt(N tau / 2 tau0)) and
    Delta Omega = 1 / (k_t T c sigma_f sqrt(N tau / 2 tau0)).

    ``sigma_f`` overrides the expansion-derived cloud radius; a
    ``"sigma_f"`` entry in ``cfg.extras`` does the same.
    """
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau!r}")
    if sigma_f is None:
        sigma_f = cfg.extras.get("sigma_f", cfg.sigma_f)
    k_t = momentum_transfer_wavenumber(cfg)
    T, c, N, tau0 = cfg.big_t, cfg.contrast, cfg.atom_number, cfg.cycle_time
    root_n = math.sqrt(N / 2.0)
    root_n_exact = math.sqrt(2.0 * N / (4.0 - c * c))
    da = 1.0 / (k_t * T**2 * c * root_n)
    dw = 1.0 / (k_t * T * c * sigma_f * root_n)
    avg = math.sqrt(tau / tau0)
    asd = math.sqrt(tau0)
    return SensitivityReport(
        da,
        dw,
        da / avg,
        dw / avg,
        da * asd,
        dw * asd,
        asd / (k_t * T**2 * c * root_n_exact),
        asd / (k_t * T * c * sigma_f * root_n_exact),
        float(tau),
        {
            "k_t_rad_m": k_t,
            "lmt_order": cfg.lmt_order,
            "big_t_s": T,
            "contrast": c,
            "atom_number": N,
            "cycle_time_s": tau0,
            "sigma_f_m": sigma_f,
        },
    )


@dataclass(frozen=True)
class SimulationSetup:
    """One simulated shot: grid, cloud and fringe truth."""

    grid: PixelGrid
    atom_number: int
    sigma_f: float
    k_omega: float
    phi_a: float
    contrast: float

    @classmethod
    def from_config(cls, cfg: ExperimentConfig) -> SimulationSetup:
        """Truth from ``cfg.extras``.

        k_omega comes from ``k_omega``, else ``rotation_rate`` (perpendicular
        to the Raman axis), else ``k_omega_sigma_f`` (default 20) over
        sigma_f. phi_a comes from ``phi_a``, else the wrapped acceleration
        phase of ``acceleration``, else 0.
        """
        ex = cfg.extras
        sf = ex.get("sigma_f", cfg.sigma_f)
        lmt_sum = sum(cfg.extra_intervals)
        if "k_omega" in ex:
            k_omega = ex["k_omega"]
        elif "rotation_rate" in ex:
            k_omega = abs(cfg.k_eff * ex["rotation_rate"]) * (cfg.big_t + lmt_sum)
        else:
            k_omega = ex.get("k_omega_sigma_f", 20.0) / sf
        if "phi_a" in ex:
            phi_a = ex["phi_a"]
        elif "acceleration" in ex:
            phi_a = wrap_phase(cfg.k_eff * ex["acceleration"] * cfg.big_t * (cfg.big_t + 2.0 * lmt_sum))
        else:
            phi_a = 0.0
        nx, ny = cfg.grid_size
        return cls(PixelGrid(nx, ny, cfg.pixel_pitch), cfg.atom_number, sf, float(k_omega), float(phi_a), cfg.contrast)


@dataclass(frozen=True)
class MonteCarloReport:
    trials: int
    failures: int
    seed: int
    empirical_std_phi_a: float
    empirical_std_k_omega: float
    mean_error_phi_a: float
    mean_error_k_omega: float
    closed_form: VariancePrediction
    numeric: VariancePrediction | None
    sampling_band: float

    @property
    def failure_rate(self) -> float:
        return self.failures / self.trials

    @property
    def flagged(self) -> bool:
        return self.failure_rate > 0.01

    @property
    def ratio_phi_a(self) -> float:
        return self.empirical_std_phi_a / self.closed_form.std_phi_a

    @property
    def ratio_k_omega(self) -> float:
        return self.empirical_std_k_omega / self.closed_form.std_k_omega

    def to_dict(self):
        out = {
            "trials": self.trials,
            "failures": self.failures,
            "failure_rate": self.failure_rate,
            "flagged": self.flagged,
            "seed": self.seed,
            "empirical_std_phi_a": self.empirical_std_phi_a,
            "empirical_std_k_omega": self.empirical_std_k_omega,
            "mean_error_phi_a": self.mean_error_phi_a,
            "mean_error_k_omega": self.mean_error_k_omega,
            "closed_form": self.closed_form.to_dict(),
            "ratio_phi_a_closed_form": self.ratio_phi_a,
            "ratio_k_omega_closed_form": self.ratio_k_omega,
            "sampling_band_relative": self.sampling_band,
        }
        if self.numeric is not None:
            out["numeric"] = self.numeric.to_dict()
            out["ratio_phi_a_numeric"] = self.empirical_std_phi_a / self.numeric.std_phi_a
            out["ratio_k_omega_numeric"] = self.empirical_std_k_omega / self.numeric.std_k_omega
        return out


def trial_seeds(seed: int, trials: int) -> np.ndarray:
    """Independent 64-bit seeds for each trial, derived from one root seed."""
    ss = np.random.SeedSequence(int(seed))
    return np.array([child.generate_state(1, np.uint64)[0] for child in ss.spawn(trials)], dtype=np.uint64)


def _thread_count(threads):
    if threads is None:
        env = os.environ.get("PSI_LAB_THREADS", "").strip()
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


def monte_carlo_validate(setup: SimulationSetup, trials: int, seed: int, threads: int | None = None) -> MonteCarloReport:
    """Repeated simulate -> Fourier init -> WLS fit on independent seeds.

    Trial seeds come from :func:`trial_seeds`, results are gathered in trial
    order, so the report is identical for any thread count. Failed fits are
    counted; the report is flagged when more than 1% fail.
    """
    if trials < 100:
        raise ValueError(f"need at least 100 trials, got {trials}")
    g = setup.grid
    f2 = cloud_profile(setup.atom_number, setup.sigma_f, g)
    atoms = allocate_atoms(f2)
    f1 = atoms.sum(axis=1).astype(float)
    x = g.x
    prob = 0.5 * (1.0 + setup.contrast * np.cos(setup.k_omega * x + setup.phi_a))
    prob_flat = np.ascontiguousarray(np.broadcast_to(prob[:, None], atoms.shape)).ravel()
    atoms_flat = atoms.ravel()
    seeds = trial_seeds(seed, trials)

    def one(s):
        counts = kernels.binomial_counts(atoms_flat, prob_flat, int(s)).reshape(atoms.shape)
        profile = counts.sum(axis=1)
        try:
            est = wls_fit(profile, f1, x, fourier_estimate(profile, x))
        except EstimationError:
            return None
        if not est.converged:
            return None
        return est.k_omega_hat, est.phi_a_hat

    with ThreadPoolExecutor(max_workers=_thread_count(threads)) as pool:
        results = list(pool.map(one, seeds))
    ok = [r for r in results if r is not None]
    failures = trials - len(ok)
    if len(ok) < 2:
        raise EstimationError(f"{failures} of {trials} fits failed")
    k_hat = np.array([r[0] for r in ok])
    dphi = wrap_phase(np.array([r[1] for r in ok]) - setup.phi_a)
    closed = closed_form_variances(setup.atom_number, setup.contrast, setup.sigma_f)
    try:
        numeric = numeric_variances(f1, x, setup.k_omega, setup.phi_a, setup.contrast)
    except UnidentifiableError:
        numeric = None
    return MonteCarloReport(
        trials,
        failures,
        int(seed),
        float(np.std(dphi, ddof=1)),
        float(np.std(k_hat, ddof=1)),
        float(np.mean(dphi)),
        float(np.mean(k_hat) - setup.k_omega),
        closed,
        numeric,
        math.sqrt(1.0 / (2.0 * trials)),
    )


@dataclass(frozen=True)
class LmtOptimum:
    n_star: int
    enhancement: float
    contrast_at_n_star: float

    def to_dict(self):
        return {"n_star": self.n_star, "enhancement": self.enhancement, "contrast_at_n_star": self.contrast_at_n_star}


def lmt_enhancement(n: int, eta_per_pulse: float) -> float:
    """(n + 1) eta^(4n): momentum gain times contrast kept after 4n extra pulses."""
    return (n + 1) * eta_per_pulse ** (4 * n)


def lmt_optimize(eta_per_pulse: float, c0: float = 1.0, n_max: int = 20) -> LmtOptimum:
    """Best LMT order for per-pulse efficiency ``eta_per_pulse``; ties go to smaller n."""
    if not 0.0 < eta_per_pulse <= 1.0:
        raise ValueError(f"eta_per_pulse must lie in (0, 1], got {eta_per_pulse!r}")
    if not 0.0 < c0 <= 1.0:
        raise ValueError(f"c0 must lie in (0, 1], got {c0!r}")
    if n_max < 0:
        raise ValueError(f"n_max must be >= 0, got {n_max!r}")
    best_n, best_e = 0, 1.0
    for n in range(1, n_max + 1):
        e = lmt_enhancement(n, eta_per_pulse)
        if e > best_e:
            best_n, best_e = n, e
    return LmtOptimum(best_n, best_e, c0 * eta_per_pulse ** (4 * best_n))


def imu_bandwidth(tau_mot: float, overhead: float = 0.0) -> float:
    """1 / (3 (tau_MOT + overhead)) for three sequential axes."""
    if not tau_mot > 0:
        raise ValueError(f"tau_mot must be positive, got {tau_mot!r}")
    if overhead < 0:
        raise ValueError(f"overhead must be >= 0, got {overhead!r}")
    return 1.0 / (3.0 * (tau_mot + overhead))

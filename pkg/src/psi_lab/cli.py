"""psi-lab command line.

Exit codes: 0 success, 2 configuration error, 3 estimation failure,
4 validation violations.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as _dt
import glob
import io
import json
import math
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, kernels
from ._io import atomic_write_text
from .config import FIELDS, EXTRAS, config_from_dict, config_hash, config_to_dict, load_config, parse_quantity
from .errors import ConfigError, EstimationError, SequencerError
from .estimation import estimate_cloud, fourier_estimate, wls_fit
from .interferometer import build_sequence
from .kinematics import broadening, ratio_table_csv, sensitivity_ratio_curve
from .physics import default_extra_intervals
from .sensitivity import (
    SimulationSetup,
    imu_bandwidth,
    lmt_enhancement,
    lmt_optimize,
    monte_carlo_validate,
    numeric_variances,
    sensitivity,
)
from .sequencer import FrequencyPlan, SequencerSettings, build_imu_cycle, validate_timeline
from .synthesis import allocate_atoms, cloud_profile, read_image, synthesize, write_image
from .systematics import ZeemanScenario, zeeman_report

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ESTIMATION = 3
EXIT_VALIDATION = 4

EARTH_RATE = 7.292115e-5  # rad/s, default rotation for broadening curves
DEFAULT_SEED = 0


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


# -- manifest and output -----------------------------------------------------


@dataclasses.dataclass(frozen=True)
class RunManifest:
    config_hash: str
    seed: int
    tool_version: str
    subcommand: str
    timestamp: str

    def reference(self) -> dict:
        """Timestamp-free reference embedded in every JSON output."""
        return {
            "manifest": "manifest.json",
            "config_hash": self.config_hash,
            "seed": self.seed,
            "tool_version": self.tool_version,
            "subcommand": self.subcommand,
        }


def _manifest(args, cfg) -> RunManifest:
    return RunManifest(
        config_hash(cfg) if cfg is not None else "",
        int(args.seed),
        __version__,
        args.command if not getattr(args, "which", None) else f"{args.command} {args.which}",
        _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    )


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n"


def _default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


class Outputs:
    """Collects files written under ``out`` and records them in manifest.json."""

    def __init__(self, out, manifest: RunManifest):
        self.out = Path(out) if out is not None else None
        self.manifest = manifest
        self.files = []

    def write(self, name, text) -> Path | None:
        if self.out is None:
            sys.stdout.write(text)
            return None
        path = atomic_write_text(self.out / name, text)
        self.files.append(name)
        return path

    def finish(self):
        if self.out is None:
            return
        doc = dataclasses.asdict(self.manifest)
        doc["outputs"] = sorted(self.files)
        atomic_write_text(self.out / "manifest.json", _json(doc))


def _load(args):
    if args.config is None:
        text = resources.files("psi_lab").joinpath("data/demo.json").read_text()
        return config_from_dict(json.loads(text))
    return load_config(args.config)


# -- sweeps ------------------------------------------------------------------


def parse_sweep(text: str):
    """``PARAM=START:STOP:STEPS`` to (param, values); values are SI."""
    try:
        param, rng = text.split("=", 1)
        start, stop, steps = rng.split(":")
        steps = int(steps)
    except ValueError:
        raise ConfigError(f"expected PARAM=START:STOP:STEPS, got {text!r}", field="--sweep") from None
    param = param.strip()
    kind = FIELDS.get(param) or EXTRAS.get(param)
    if kind is None or param in ("grid_size", "extra_intervals"):
        raise ConfigError(f"cannot sweep {param!r}", field="--sweep")
    if steps < 1:
        raise ConfigError("STEPS must be >= 1", field="--sweep")
    if kind == "int":
        lo, hi = int(start), int(stop)
        values = sorted({int(round(v)) for v in np.linspace(lo, hi, steps)})
    else:
        lo, hi = parse_quantity(start, kind, param), parse_quantity(stop, kind, param)
        values = [float(v) for v in np.linspace(lo, hi, steps)]
    return param, values


def _with(cfg, param, value):
    doc = config_to_dict(cfg)
    doc[param] = value
    if param in ("lmt_order", "big_t"):
        doc["extra_intervals"] = list(default_extra_intervals(doc["lmt_order"], doc["big_t"]))
    return config_from_dict(doc)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


# -- reports -----------------------------------------------------------------


def _sensitivity_doc(cfg):
    return sensitivity(cfg, cfg.extras.get("tau", 1.0)).to_dict()


def _sensitivity_sweep(cfg, param, values):
    rows = []
    for v in values:
        r = sensitivity(_with(cfg, param, v), cfg.extras.get("tau", 1.0))
        rows.append((v, r.delta_a_asd, r.delta_omega_asd, r.delta_a_asd_nano_g, r.delta_omega_asd_urad))
    return _csv(
        [param, "delta_a_m_s2_per_rtHz", "delta_omega_rad_s_per_rtHz", "delta_a_nano_g_per_rtHz", "delta_omega_urad_s_per_rtHz"],
        rows,
    )


def _scenario(cfg, args=None):
    z = dict(cfg.extras.get("zeeman", {}))
    path = getattr(args, "scenario", None) if args is not None else None
    if path:
        try:
            doc = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read scenario file {str(path)!r}: {exc.strerror or exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc.msg}") from None
        z = config_from_dict({"zeeman": doc}).extras["zeeman"]
    z.setdefault("b_first_half", 3.0)
    z.setdefault("b_second_half", 3.01)
    z.setdefault("gradient", 1.0)
    z.setdefault("T", cfg.big_t)
    budget = z.pop("phase_budget", None)
    if args is not None and getattr(args, "budget", None) is not None:
        budget = args.budget
    try:
        scn = ZeemanScenario(**z)
    except ValueError as exc:
        raise ConfigError(str(exc), field="zeeman") from None
    return scn, budget


def _systematics_doc(cfg, args=None):
    scn, budget = _scenario(cfg, args)
    return zeeman_report(scn, cfg.species, budget)


def _bandwidth_doc(cfg):
    tl = build_imu_cycle(cfg)
    overhead = tl.total_duration / 3.0 - cfg.mot_load_time
    return {
        "mot_limited_bandwidth_Hz": imu_bandwidth(cfg.mot_load_time, 0.0),
        "cycle_bandwidth_Hz": tl.bandwidth,
        "cycle_duration_s": tl.total_duration,
        "per_axis_overhead_s": overhead,
        "mot_load_time_s": cfg.mot_load_time,
    }


def _lmt_doc(cfg):
    eta = cfg.extras.get("eta_per_pulse", 0.9)
    n_max = int(cfg.extras.get("n_max", 20))
    opt = lmt_optimize(eta, cfg.contrast, n_max)
    return {
        "eta_per_pulse": eta,
        "n_max": n_max,
        "optimum": opt.to_dict(),
        "enhancement_by_order": [lmt_enhancement(n, eta) for n in range(n_max + 1)],
        "model": "c(n) = c0 eta^(4n); enhancement (n + 1) c(n) / c0",
    }


def _k_omega_of_T(cfg):
    omega = cfg.extras.get("rotation_rate", EARTH_RATE)

    def k(T):
        n = cfg.lmt_order
        return abs(cfg.k_eff * omega) * (T + sum(default_extra_intervals(n, T)))

    return k


def _broadening_doc(cfg):
    sf = cfg.extras.get("sigma_f", cfg.sigma_f)
    k = cfg.extras.get("k_omega", _k_omega_of_T(cfg)(cfg.big_t))
    res = broadening(cfg.sigma_0, sf, k, cfg.contrast, cfg.extras.get("length_scale"))
    return res.to_dict()


def _broadening_csv(cfg, values):
    rows = sensitivity_ratio_curve(
        cfg.sigma_0, cfg.temperature, _k_omega_of_T(cfg), values, cfg.species, cfg.extras.get("length_scale")
    )
    return ratio_table_csv(rows)


# -- subcommands -------------------------------------------------------------


def cmd_simulate(args):
    cfg = _load(args)
    setup = SimulationSetup.from_config(cfg)
    img = synthesize(setup.grid, setup.atom_number, setup.sigma_f, setup.k_omega, setup.phi_a, setup.contrast, args.seed)
    m = _manifest(args, cfg)
    out = Outputs(args.out or ".", m)
    csv_path = out.out / "image.csv"
    write_image(img, csv_path, {"manifest": m.reference()})
    out.files += ["image.csv", "image.json"]
    out.finish()
    print(f"wrote {csv_path} and its sidecar")
    return EXIT_OK


def _fit_one(path, method):
    img = read_image(path)
    x = img.grid.x
    profile = img.profile_1d
    if img.truth is not None:
        f = allocate_atoms(cloud_profile(img.truth.atom_number, img.truth.sigma_f, img.grid)).sum(axis=1).astype(float)
        weights = "truth"
    else:
        f = estimate_cloud(profile, x)
        weights = "moments"
    rec = {"image": str(path), "weights": weights}
    fe = fourier_estimate(profile, x)
    if method in ("fourier", "both"):
        rec["fourier"] = fe.to_dict()
    if method in ("wls", "both"):
        w = wls_fit(profile, f, x, fe)
        rec["wls"] = w.to_dict()
        pred = numeric_variances(f, x, w.k_omega_hat, w.phi_a_hat, max(w.contrast_hat, 1e-6))
        rec["predicted_std"] = {"k_omega": pred.std_k_omega, "phi_a": pred.std_phi_a}
    if img.truth is not None:
        rec["truth"] = dataclasses.asdict(img.truth)
    return rec


def _expand(patterns):
    paths = []
    for p in patterns:
        hits = sorted(glob.glob(p))
        paths += hits if hits else [p]
    return paths


def cmd_fit(args):
    paths = _expand(args.images)
    m = _manifest(args, None)
    if len(paths) == 1:
        try:
            rec = _fit_one(paths[0], args.method)
        except OSError as exc:
            raise CliError(f"cannot read image {paths[0]!r}: {exc.strerror or exc}", EXIT_CONFIG) from None
        rec["manifest"] = m.reference()
        if args.out and not str(args.out).endswith(".json"):
            out = Outputs(args.out, m)
            out.write("estimate.json", _json(rec))
            out.finish()
        elif args.out:
            atomic_write_text(args.out, _json(rec))
        else:
            sys.stdout.write(_json(rec))
        return EXIT_OK
    rows, failed = [], 0
    method = "wls" if args.method == "both" else args.method
    for p in paths:
        try:
            rec = _fit_one(p, method)
            est = rec[method]
            rows.append((p, "ok", est["k_omega_hat"], est["phi_a_hat"], est["contrast_hat"], est["converged"], ""))
        except (EstimationError, ValueError, OSError) as exc:
            failed += 1
            rows.append((p, "error", "", "", "", "", str(exc)))
    text = _csv(["image", "status", "k_omega_hat", "phi_a_hat", "contrast_hat", "converged", "message"], rows)
    if args.out:
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    if failed:
        raise CliError(f"{failed} of {len(paths)} images failed to fit", EXIT_ESTIMATION)
    return EXIT_OK


def cmd_report(args):
    cfg = _load(args)
    m = _manifest(args, cfg)
    out = Outputs(args.out, m)
    which = args.which
    if args.sweep:
        param, values = parse_sweep(args.sweep)
        if which == "sensitivity":
            out.write(f"sensitivity_sweep_{param}.csv", _sensitivity_sweep(cfg, param, values))
        elif which == "broadening":
            if param != "big_t":
                raise ConfigError("broadening sweeps run over big_t", field="--sweep")
            out.write("broadening_curve.csv", _broadening_csv(cfg, values))
        else:
            raise ConfigError(f"no sweep for the {which} report", field="--sweep")
    else:
        doc = {
            "sensitivity": _sensitivity_doc,
            "systematics": _systematics_doc,
            "bandwidth": _bandwidth_doc,
            "lmt": _lmt_doc,
            "broadening": _broadening_doc,
        }[which](cfg)
        doc["manifest"] = m.reference()
        out.write(f"{which}.json", _json(doc))
    out.finish()
    return EXIT_OK


def cmd_sensitivity(args):
    cfg = _load(args)
    if args.tau is not None:
        cfg = dataclasses.replace(cfg, extras={**cfg.extras, "tau": args.tau})
    m = _manifest(args, cfg)
    out = Outputs(args.out, m)
    doc = _sensitivity_doc(cfg)
    doc["manifest"] = m.reference()
    out.write("sensitivity.json", _json(doc))
    if args.sweep:
        param, values = parse_sweep(args.sweep)
        out.write(f"sensitivity_sweep_{param}.csv", _sensitivity_sweep(cfg, param, values))
    out.finish()
    return EXIT_OK


def cmd_validate(args):
    cfg = _load(args)
    setup = SimulationSetup.from_config(cfg)
    rep = monte_carlo_validate(setup, args.trials, args.seed)
    m = _manifest(args, cfg)
    out = Outputs(args.out, m)
    doc = rep.to_dict()
    doc["manifest"] = m.reference()
    doc["backend"] = kernels.BACKEND
    out.write("validation.json", _json(doc))
    out.finish()
    if rep.flagged:
        raise CliError(f"fit failure rate {rep.failure_rate:.2%} exceeds 1%", EXIT_VALIDATION)
    return EXIT_OK


def cmd_systematics(args):
    cfg = _load(args)
    m = _manifest(args, cfg)
    out = Outputs(args.out, m)
    doc = _systematics_doc(cfg, args)
    doc["manifest"] = m.reference()
    out.write("systematics.json", _json(doc))
    out.finish()
    return EXIT_OK


def cmd_sequence(args):
    cfg = _load(args)
    plan = FrequencyPlan()
    try:
        tl = build_imu_cycle(cfg, plan, SequencerSettings())
    except SequencerError as exc:
        raise CliError(str(exc), EXIT_VALIDATION) from None
    violations = validate_timeline(tl, plan, cfg)
    m = _manifest(args, cfg)
    out = Outputs(args.out or ".", m)
    doc = tl.to_dict()
    doc["manifest"] = m.reference()
    out.write("timeline.json", _json(doc))
    out.write("timeline.csv", tl.to_csv())
    summary = tl.summary() + (f"violations: {len(violations)}\n" + "".join(f"  {v}\n" for v in violations))
    out.write("timeline_summary.txt", summary)
    out.finish()
    sys.stdout.write(summary)
    if violations:
        raise CliError(f"{len(violations)} timeline violations", EXIT_VALIDATION)
    return EXIT_OK


def cmd_demo(args):
    t0 = time.perf_counter()
    if args.config is None:
        text = resources.files("psi_lab").joinpath("data/reference.json").read_text()
        ref_cfg = config_from_dict(json.loads(text))
    else:
        ref_cfg = load_config(args.config)
    demo = config_from_dict(json.loads(resources.files("psi_lab").joinpath("data/demo.json").read_text()))
    outdir = Path(args.out or "psi_lab_demo")
    m = _manifest(args, ref_cfg)
    out = Outputs(outdir, m)
    ref = m.reference()

    sens = _sensitivity_doc(ref_cfg)
    sysr = _systematics_doc(ref_cfg)
    band = _bandwidth_doc(ref_cfg)
    lmt = _lmt_doc(ref_cfg)
    out.write("sensitivity.json", _json({**sens, "manifest": ref}))
    out.write("systematics.json", _json({**sysr, "manifest": ref}))
    out.write("bandwidth.json", _json({**band, "manifest": ref}))
    out.write("lmt.json", _json({**lmt, "manifest": ref}))
    out.write("broadening_curve.csv", _broadening_csv(ref_cfg, [i * 5e-3 for i in range(1, 11)]))

    setup = SimulationSetup.from_config(demo)
    img = synthesize(setup.grid, setup.atom_number, setup.sigma_f, setup.k_omega, setup.phi_a, setup.contrast, args.seed)
    write_image(img, outdir / "image.csv", {"manifest": ref})
    out.files += ["image.csv", "image.json"]
    fit = _fit_one(outdir / "image.csv", "both")
    out.write("estimate.json", _json({**fit, "manifest": ref}))
    mc = monte_carlo_validate(setup, args.trials, args.seed)
    out.write("validation.json", _json({**mc.to_dict(), "manifest": ref}))

    tl = build_imu_cycle(demo)
    violations = validate_timeline(tl, FrequencyPlan(), demo)
    out.write("timeline.json", _json({**tl.to_dict(), "manifest": ref}))
    out.write("timeline.csv", tl.to_csv())
    out.finish()

    w = fit["wls"]
    lines = [
        f"sensitivity: {sens['delta_omega_asd_urad_s_per_rtHz']:.3f} urad/s/rtHz, "
        f"{sens['delta_a_asd_nano_g_per_rtHz']:.3f} nano-g/rtHz",
        f"Zeeman: {sysr['differential_shift_change_Hz']:.1f} Hz, {sysr['phase_error_over_pi']:.2f} pi rad, "
        f"{sysr['force_dyn']:.3g} dyn, {sysr['acceleration_micro_g']:.1f} micro-g",
        f"bandwidth: {band['mot_limited_bandwidth_Hz']:.3f} Hz (MOT limited), {band['cycle_bandwidth_Hz']:.3f} Hz (compiled cycle)",
        f"LMT optimum at eta={lmt['eta_per_pulse']}: n*={lmt['optimum']['n_star']}, E={lmt['optimum']['enhancement']:.3f}",
        f"fit: k={w['k_omega_hat']:.2f} rad/m (truth {setup.k_omega:.2f}), phi={w['phi_a_hat']:.4f} rad (truth {setup.phi_a:.4f}), "
        f"predicted std {fit['predicted_std']['phi_a']:.4f} rad",
        f"Monte Carlo ({args.trials} trials): std(phi)/closed form = {mc.ratio_phi_a:.3f}, std(k)/closed form = {mc.ratio_k_omega:.3f}",
        f"timeline: {len(tl.events)} events, {len(violations)} violations",
        f"outputs in {outdir} ({time.perf_counter() - t0:.1f} s)",
    ]
    print("\n".join(lines))
    if violations:
        raise CliError(f"{len(violations)} timeline violations", EXIT_VALIDATION)
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def _u64(text):
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _trials(text):
    v = int(text)
    if v < 100:
        raise argparse.ArgumentTypeError("need at least 100 trials")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment configuration JSON (default: bundled demo config)")
    common.add_argument("--seed", type=_u64, default=DEFAULT_SEED, help="64-bit root seed (default 0)")
    common.add_argument("--out", help="output directory (stdout when omitted, where supported)")

    p = argparse.ArgumentParser(prog="psi-lab", description="Point-source atom interferometer simulation and analysis.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="synthesise one fringe image")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("fit", parents=[common], help="estimate fringe parameters from image CSVs")
    s.add_argument("images", nargs="+", help="image CSV paths or glob patterns")
    s.add_argument("--method", choices=("fourier", "wls", "both"), default="both")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("report", parents=[common], help="JSON report or CSV sweep")
    s.add_argument("which", choices=("sensitivity", "systematics", "bandwidth", "lmt", "broadening"))
    s.add_argument("--sweep", metavar="PARAM=START:STOP:STEPS")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("sensitivity", parents=[common], help="sensitivity report with optional sweep")
    s.add_argument("--tau", type=float, help="averaging time, s")
    s.add_argument("--sweep", metavar="PARAM=START:STOP:STEPS")
    s.set_defaults(func=cmd_sensitivity)

    s = sub.add_parser("validate", parents=[common], help="Monte Carlo check of the variance prediction")
    s.add_argument("--trials", type=_trials, default=2000)
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("systematics", parents=[common], help="second-order Zeeman report")
    s.add_argument("--scenario", help="scenario JSON with b_first_half, b_second_half, gradient, T")
    s.add_argument("--budget", type=float, help="phase-error budget, rad")
    s.set_defaults(func=cmd_systematics)

    s = sub.add_parser("sequence", parents=[common], help="compile and validate the 3-axis timeline")
    s.set_defaults(func=cmd_sequence)

    s = sub.add_parser("demo", parents=[common], help="end-to-end run with the worked-example parameters")
    s.add_argument("--trials", type=_trials, default=200)
    s.set_defaults(func=cmd_demo)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"psi-lab: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"psi-lab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EstimationError as exc:
        print(f"psi-lab: estimation failed: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except SequencerError as exc:
        print(f"psi-lab: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())

"""Subcommand CLI: simulate synthetic runs, fit ingested datasets, and emit
plot-ready tables plus structured fit reports.

Exit codes: 0 success, 2 validation error, 3 fit non-convergence, 4 I/O
error. All outputs are deterministic for fixed inputs, flags, and seed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, beam, charging, datasets, heating, simulate, thermometry
from .datasets import Dataset, DatasetError, _atomic_write, file_digest
from .fitting import FitConvergenceError, FitReport
from .units import TWO_PI, SPECIES_TABLE, ATOMIC_MASS_KG, ELEMENTARY_CHARGE, IonSpecies, get_species, make_trap_context


def _load_config(path):
    """Optional JSON config; may extend the species table."""
    if path is None:
        return dict(SPECIES_TABLE)
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetError(f"config parse failure: {exc}") from None
    table = dict(SPECIES_TABLE)
    for name, entry in cfg.get("species", {}).items():
        table[name] = IonSpecies(
            name=name,
            mass=float(entry["mass_u"]) * ATOMIC_MASS_KG,
            charge=float(entry.get("charge_e", 1)) * ELEMENTARY_CHARGE,
        )
    return table


def _provenance(args, input_path=None) -> dict[str, str]:
    prov = {"toolkit_version": __version__, "seed": str(getattr(args, "seed", ""))}
    if input_path is not None:
        prov["input_digest"] = file_digest(input_path)
        prov["input_file"] = Path(input_path).name
    return prov


def _emit(args, report: FitReport, table_rows, table_header, stem: str):
    """Write report + table artifacts and print the requested view."""
    table_lines = [",".join(table_header)]
    for row in table_rows:
        table_lines.append(",".join(repr(float(v)) for v in row))
    table_text = "\n".join(table_lines) + "\n"
    if args.out_dir is not None:
        out = Path(args.out_dir)
        _atomic_write(out / f"{stem}_report.json", report.to_json())
        _atomic_write(out / f"{stem}_table.csv", table_text)
    if args.format == "table":
        sys.stdout.write(table_text)
    else:
        sys.stdout.write(report.to_json())


# ---------------------------------------------------------------------------
# simulate


def _sim_config(args) -> simulate.SimConfig:
    shots = None if args.shots == 0 else args.shots
    kwargs = {"seed": args.seed, "shots_per_point": shots}
    if getattr(args, "rate", None) is not None:
        kwargs["heating_rate"] = args.rate
    if getattr(args, "initial_nbar", None) is not None:
        kwargs["initial_nbar"] = args.initial_nbar
    if getattr(args, "noise", None) is not None:
        kwargs["noise_floor"] = args.noise
    return simulate.SimConfig(**kwargs)


def cmd_simulate(args):
    cfg = _sim_config(args)
    if args.kind == "heating":
        waits = np.linspace(0.0, args.span, args.points)
        series = simulate.simulate_heating_series(cfg, waits.tolist())
        ds = datasets.from_heating_series(series, {"seed": str(args.seed)})
    elif args.kind == "charging":
        series = simulate.simulate_charging_series(
            cfg,
            sample_interval=args.interval,
            on_window=(args.on_start, args.on_start + args.on_duration),
            total=args.total,
        )
        ds = datasets.from_frequency_series(series, {"seed": str(args.seed)})
    elif args.kind == "sideband":
        obs = [
            (w, simulate.simulate_sideband_scan(cfg, w, index=i))
            for i, w in enumerate(np.linspace(0.0, args.span, args.points).tolist())
        ]
        ds = datasets.from_sideband_observations(obs)
        ds.metadata["seed"] = str(args.seed)
    else:  # position
        model = beam.GratingOutputModel(
            mode="two-beamlet",
            waist=args.beamlet_waist * 1e-6,
            beamlet_separation=args.separation * 1e-6,
            center=args.center * 1e-6,
        )
        positions = np.linspace(
            args.scan_start * 1e-6, args.scan_end * 1e-6, args.points
        )
        scan = simulate.simulate_position_scan(cfg, model, positions.tolist())
        ds = datasets.from_position_scan(scan, origin="grating", metadata={"seed": str(args.seed)})
    datasets.write_dataset(args.out, ds)
    print(f"wrote {args.out} ({ds.n_rows} rows)")
    return 0


# ---------------------------------------------------------------------------
# fits


def cmd_fit_heating(args):
    ds = datasets.load_dataset(args.input, "heating")
    series = datasets.to_heating_series(ds)
    result = heating.fit_heating_rate(series)
    report = FitReport(
        model="heating-linear",
        params={"ndot": result.ndot, "intercept": result.intercept},
        param_errs={"ndot": result.ndot_err, "intercept": 0.0},
        residual_rms=float(
            np.sqrt(
                np.mean(
                    (
                        np.asarray(series.nbar)
                        - (result.intercept + result.ndot * np.asarray(series.wait_times))
                    )
                    ** 2
                )
            )
        ),
        n_points=len(series.wait_times),
        extras={"ndot_q_per_ms": result.ndot / 1e3},
        provenance=_provenance(args, args.input),
    )
    t = np.asarray(series.wait_times)
    rows = zip(t, series.nbar, result.intercept + result.ndot * t)
    _emit(args, report, rows, ("time:s", "nbar", "model"), Path(args.input).stem + "_heating")
    return 0


def _t_on_from(args, series):
    if args.t_on is not None:
        return args.t_on
    if series.light_on_intervals:
        return series.light_on_intervals[0][0]
    raise DatasetError("no --t-on flag and no light_on metadata in the input")


def _t_off_from(args, series):
    if args.t_off is not None:
        return args.t_off
    if series.light_on_intervals:
        return series.light_on_intervals[0][1]
    raise DatasetError("no --t-off flag and no light_on metadata in the input")


def cmd_fit_charging(args):
    ds = datasets.load_dataset(args.input, "charging")
    series = datasets.to_frequency_series(ds)
    t_on = _t_on_from(args, series)
    t_end = series.light_on_intervals[0][1] if series.light_on_intervals else None
    params, report = charging.fit_charging(series, t_on, t_end=t_end, f0_mode=args.f0_mode)
    report.provenance = _provenance(args, args.input)
    t = np.asarray(series.times)
    mask = (t >= t_on) & (t <= (t_end if t_end is not None else t[-1]))
    rows = zip(t[mask], np.asarray(series.freqs)[mask], charging.charging_freq(t[mask], params))
    _emit(args, report, rows, ("time:s", "freq:Hz", "model:Hz"), Path(args.input).stem + "_charging")
    return 0


def cmd_fit_discharge(args):
    ds = datasets.load_dataset(args.input, "charging")
    series = datasets.to_frequency_series(ds)
    t_off = _t_off_from(args, series)
    params, report = charging.fit_discharge(series, t_off, f0_mode=args.f0_mode)
    report.provenance = _provenance(args, args.input)
    t = np.asarray(series.times)
    mask = t >= t_off
    rows = zip(t[mask], np.asarray(series.freqs)[mask], charging.discharge_freq(t[mask], params))
    _emit(args, report, rows, ("time:s", "freq:Hz", "model:Hz"), Path(args.input).stem + "_discharge")
    return 0


def cmd_thermometry(args):
    obs = thermometry.SidebandObservation(
        probe_time=0.0,
        p_red=args.p_red,
        p_blue=args.p_blue,
        shots=args.shots,
    )
    nbar, err = thermometry.nbar_with_uncertainty(obs)
    report = FitReport(
        model="sideband-asymmetry-thermometry",
        params={"nbar": nbar},
        param_errs={"nbar": err},
        residual_rms=0.0,
        n_points=1,
        extras={"ratio": args.p_red / args.p_blue},
        provenance=_provenance(args),
    )
    sys.stdout.write(report.to_json())
    return 0


def cmd_beam_profile(args):
    ds = datasets.load_dataset(args.input, "position-scan")
    scan = datasets.to_position_scan(ds)
    model, report = beam.fit_profile(scan, mode=args.mode)
    report.provenance = _provenance(args, args.input)
    x = np.asarray(scan.positions)
    scale = report.params["rabi_scale"]
    pred = scale * np.sqrt(np.asarray(beam.profile_intensity(x, model)) / model.peak_intensity)
    rows = zip(x, scan.rabi, pred)
    _emit(args, report, rows, ("pos:m", "rabi:rad/s", "model:rad/s"), Path(args.input).stem + "_profile")
    return 0


def cmd_normalize(args):
    table = _load_config(args.config)
    ctx = make_trap_context(
        args.species,
        TWO_PI * args.freq,
        TWO_PI * args.freq,
        args.distance * 1e-6,
        species_table=table,
    )
    result = heating.HeatingRateResult(ndot=args.rate, ndot_err=args.rate_err, intercept=0.0)
    ref = get_species(args.ref_species, table)
    norm = heating.normalize_rate(result, ctx, ref, TWO_PI * args.ref_freq)
    s_e = heating.spectral_density_from_rate(result, ctx)
    scale = norm / result.ndot if result.ndot else 0.0
    report = FitReport(
        model="rate-normalization",
        params={"ndot_normalized": norm, "spectral_density": s_e},
        param_errs={"ndot_normalized": args.rate_err * scale, "spectral_density": 0.0},
        residual_rms=0.0,
        n_points=1,
        extras={"ndot_input": args.rate},
        provenance=_provenance(args),
    )
    sys.stdout.write(report.to_json())
    return 0


def cmd_report(args):
    report = FitReport.from_json(Path(args.input).read_text(encoding="utf-8"))
    sys.stdout.write(report.to_json())
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trapkit",
        description="Surface ion trap characterization: thermometry, heating, charging, beam profiles",
    )
    parser.add_argument("--version", action="version", version=__version__)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--config", type=str, default=None)
    common.add_argument("--out-dir", type=str, default=None)
    common.add_argument("--format", choices=("table", "report"), default="report")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="generate a synthetic dataset")
    p.add_argument("kind", choices=("heating", "charging", "sideband", "position"))
    p.add_argument("--out", required=True)
    p.add_argument("--shots", type=int, default=500, help="shots per point; 0 for analytic mode")
    p.add_argument("--rate", type=float, default=None, help="heating rate, quanta/s")
    p.add_argument("--initial-nbar", type=float, default=None)
    p.add_argument("--points", type=int, default=7)
    p.add_argument("--span", type=float, default=2e-3, help="wait-time span, s")
    p.add_argument("--interval", type=float, default=15.0, help="charging cadence, s")
    p.add_argument("--on-start", type=float, default=400.0)
    p.add_argument("--on-duration", type=float, default=2000.0)
    p.add_argument("--total", type=float, default=5000.0)
    p.add_argument("--noise", type=float, default=None, help="charging noise floor, Hz")
    p.add_argument("--separation", type=float, default=1.8, help="beamlet separation, um")
    p.add_argument("--beamlet-waist", type=float, default=0.9, help="um")
    p.add_argument("--center", type=float, default=11.0, help="um")
    p.add_argument("--scan-start", type=float, default=6.0, help="um")
    p.add_argument("--scan-end", type=float, default=16.0, help="um")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit-heating", parents=[common], help="fit nbar(t) to a line")
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_fit_heating)

    p = sub.add_parser("fit-charging", parents=[common], help="fit the light-on charging model")
    p.add_argument("--input", required=True)
    p.add_argument("--t-on", type=float, default=None)
    p.add_argument("--f0-mode", choices=("fit", "baseline"), default="fit")
    p.set_defaults(func=cmd_fit_charging)

    p = sub.add_parser("fit-discharge", parents=[common], help="fit the light-off discharge model")
    p.add_argument("--input", required=True)
    p.add_argument("--t-off", type=float, default=None)
    p.add_argument("--f0-mode", choices=("fit", "baseline"), default="fit")
    p.set_defaults(func=cmd_fit_discharge)

    p = sub.add_parser("thermometry", parents=[common], help="nbar from one red/blue pair")
    p.add_argument("--p-red", type=float, required=True)
    p.add_argument("--p-blue", type=float, required=True)
    p.add_argument("--shots", type=int, default=None)
    p.set_defaults(func=cmd_thermometry)

    p = sub.add_parser("beam-profile", parents=[common], help="fit a Rabi position scan")
    p.add_argument("--input", required=True)
    p.add_argument("--mode", choices=beam.BEAM_MODES, default="two-beamlet")
    p.set_defaults(func=cmd_beam_profile)

    p = sub.add_parser("normalize", parents=[common], help="rescale a heating rate to a reference")
    p.add_argument("--rate", type=float, required=True, help="quanta/s")
    p.add_argument("--rate-err", type=float, default=0.0)
    p.add_argument("--species", default="Yb-171")
    p.add_argument("--freq", type=float, required=True, help="axial secular frequency, Hz")
    p.add_argument("--distance", type=float, default=20.0, help="ion-surface distance, um")
    p.add_argument("--ref-species", default="Ca-40")
    p.add_argument("--ref-freq", type=float, default=1e6, help="Hz")
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("report", parents=[common], help="reprint a stored fit report")
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FitConvergenceError as exc:
        record = {"error": "fit-non-convergence", "detail": str(exc)}
        if exc.best_cost is not None and math.isfinite(exc.best_cost):
            record["best_cost"] = exc.best_cost
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return 3
    except (DatasetError, ValueError) as exc:
        print(json.dumps({"error": "validation", "detail": str(exc)}, sort_keys=True), file=sys.stderr)
        return 2
    except OSError as exc:
        print(json.dumps({"error": "io", "detail": str(exc)}, sort_keys=True), file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())

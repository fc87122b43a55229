"""Command-line pipeline: fit / select / tune / calibrate / simulate / bifurcate / hazard.

Each stage reads text artifacts, writes text artifacts, and drops a
``run_config.txt`` provenance record (resolved options, input digests,
package version, kernel backend) next to its outputs, so any run can be
reproduced byte for byte from the record.  A key=value configuration
file can preset any option; explicit flags override it.

Exit codes: 0 success, 1 usage error, 2 data validation error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import sys
from pathlib import Path

import numpy as np

from . import _kernels, __version__
from .basis import MonomialBasis, full_basis
from .calibrate import bias_report, bin_equal_count, compute_residuals, fit_sigma
from .dynamics import EnvConditions, bifurcation_scan, find_fixed_points
from .enkf import TrainingSchedule, train
from .errors import NumericsError, TcsdeError, ValidationError
from .hazard import (
    CityRegion,
    attach_positions,
    gridded_pdi_climatology,
    landfall_distribution,
    lmi_distribution,
    return_periods,
    storm_maxima_in_region,
)
from .model import builtin_paper_model, load_model, save_model
from .select import cv_path
from .simulate import IntensitySeries, SimConfig, simulate
from .sindy import build_system, dump_system, least_squares, load_system
from .tracks import load_tracks
from .windows import horizon_steps


class UsageError(TcsdeError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt(x) -> str:
    return repr(float(x))


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_provenance(out_dir: Path, args, inputs: list[str]) -> None:
    lines = [
        f"command = {args.command}",
        f"tcsde_version = {__version__}",
        f"kernel_backend = {_kernels.BACKEND_NAME}",
    ]
    skip = {"func", "command", "config"}
    for key in sorted(vars(args)):
        if key in skip:
            continue
        lines.append(f"{key} = {getattr(args, key)}")
    for path in inputs:
        lines.append(f"sha256[{path}] = {_sha256(path)}")
    (out_dir / "run_config.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_term(text: str) -> tuple[int, ...]:
    return tuple(int(k) for k in text.split("."))


def _render_terms(terms) -> str:
    return ";".join(".".join(str(k) for k in t) for t in terms)


# ---------------------------------------------------------------- fit

def _cmd_fit(args) -> None:
    out = _out_dir(args)
    tracks = load_tracks(args.tracks)
    basis = full_basis(args.degree)
    system = build_system(tracks, basis, args.max_horizon_hours, stride=args.stride)
    coeffs, rss, rank = least_squares(system)
    dump_system(system, out / "system.csv")
    report = [
        f"rows = {system.n_rows}",
        f"columns = {len(basis)}",
        f"rank = {rank}",
        f"rss = {_fmt(rss)}",
        "term,coefficient_per_6h",
    ]
    report += [
        f"{basis.render_term(j)},{_fmt(c)}" for j, c in enumerate(coeffs)
    ]
    (out / "ols_report.txt").write_text("\n".join(report) + "\n", encoding="utf-8")
    _write_provenance(out, args, [args.tracks])
    print(f"fit: {system.n_rows} rows x {len(basis)} columns -> {out}")


# ---------------------------------------------------------------- select

def _parse_k_list(text: str) -> list[int]:
    ks: list[int] = []
    for part in text.split(","):
        if ":" in part:
            pieces = [int(x) for x in part.split(":")]
            lo, hi = pieces[0], pieces[1]
            step = pieces[2] if len(pieces) > 2 else 1
            ks.extend(range(lo, hi + 1, step))
        else:
            ks.append(int(part))
    return sorted(set(ks))


def _cmd_select(args) -> None:
    out = _out_dir(args)
    system = load_system(args.system)
    ks = _parse_k_list(args.k_list)
    path = cv_path(system, ks, folds=args.folds, seed=args.seed)
    with open(out / "path.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "train_loss", "cv_mean", "cv_se"])
        for e in path.entries:
            writer.writerow([e.k, _fmt(e.train_loss), _fmt(e.cv_mean), _fmt(e.cv_se)])
    with open(out / "supports.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "terms", "coefficients"])
        for e in path.entries:
            terms = [system.basis.terms[j] for j in e.support]
            writer.writerow([
                e.k, _render_terms(terms), ";".join(_fmt(c) for c in e.coefficients),
            ])
    suggestion = path.one_se_k()
    (out / "suggestion.txt").write_text(
        f"one_se_k = {suggestion}\n"
        "The support size is a user decision; inspect path.csv before fixing k.\n",
        encoding="utf-8",
    )
    _write_provenance(out, args, [args.system])
    print(f"select: path over k={ks[0]}..{ks[-1]}, one-SE suggestion k={suggestion} -> {out}")


# ---------------------------------------------------------------- tune

def _read_support(path, k: int):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["k", "terms", "coefficients"]:
            raise ValidationError(f"{path}: not a supports table")
        for row in reader:
            if int(row[0]) == k:
                terms = tuple(_parse_term(t) for t in row[1].split(";"))
                coeffs = np.array([float(c) for c in row[2].split(";")])
                return terms, coeffs
    raise ValidationError(f"{path}: no entry for k={k}")


def _cmd_tune(args) -> None:
    out = _out_dir(args)
    tracks = load_tracks(args.tracks)
    terms, init = _read_support(args.supports, args.k)
    basis = MonomialBasis(terms, max_degree=max(sum(t) for t in terms))
    horizons = tuple(_parse_k_list(args.horizons_hours))
    schedule = TrainingSchedule(
        horizons_hours=horizons, batch_size=args.batch_size,
        obs_noise_std=args.obs_noise_std,
    )
    model, logs = train(
        tracks, basis, init, schedule, seed=args.seed,
        ensemble_size=args.ensemble_size,
    )
    save_model(model, out / "model.json")
    with open(out / "training_log.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "epoch", "horizon_hours", "n_windows", "mean_abs_innovation_mps",
            "ensemble_spread",
        ])
        for log in logs:
            writer.writerow([
                log.epoch, log.horizon_hours, log.n_windows,
                _fmt(log.mean_abs_innovation), _fmt(log.ensemble_spread),
            ])
    _write_provenance(out, args, [args.tracks, args.supports])
    print(f"tune: {len(logs)} epochs on {len(tracks)} storms -> {out}")


# ---------------------------------------------------------------- calibrate

def _cmd_calibrate(args) -> None:
    out = _out_dir(args)
    tracks = load_tracks(args.tracks)
    model = load_model(args.model)
    v_init, resid = compute_residuals(model, tracks, args.horizon_hours)
    bins = bin_equal_count(v_init, resid, args.bins, args.bootstrap, args.seed)
    slope, intercept = fit_sigma(bins)
    calibrated = model.with_sigma(slope, intercept / model.scales.v)
    save_model(calibrated, out / "model.json")
    flags = bias_report(bins)
    with open(out / "calibration.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "v_low", "v_high", "v_center", "count", "mean_residual", "mean_se",
            "std_residual", "std_se", "bias_flagged",
        ])
        for b, flag in zip(bins, flags):
            writer.writerow([
                _fmt(b.v_low), _fmt(b.v_high), _fmt(b.v_center), b.count,
                _fmt(b.mean_residual), _fmt(b.mean_se), _fmt(b.std_residual),
                _fmt(b.std_se), str(flag.significant).lower(),
            ])
    (out / "sigma.txt").write_text(
        f"slope = {_fmt(slope)}\n"
        f"intercept_mps = {_fmt(intercept)}\n"
        f"intercept_nondim = {_fmt(intercept / model.scales.v)}\n"
        f"horizon_hours = {args.horizon_hours}\n",
        encoding="utf-8",
    )
    _write_provenance(out, args, [args.tracks, args.model])
    print(f"calibrate: sigma(v) = {slope:.4f} v + {intercept:.4f} m/s -> {out}")


# ---------------------------------------------------------------- simulate

def _cmd_simulate(args) -> None:
    out = _out_dir(args)
    tracks = load_tracks(args.tracks)
    model = load_model(args.model)
    config = SimConfig(
        dt_internal_hours=args.dt_internal_hours,
        stochastic=not args.deterministic,
        seed=args.seed,
        n_members=args.n_members,
        clamp_floor=None if args.no_clamp else args.clamp_floor,
        workers=args.workers,
    )
    with open(out / "trajectories.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["storm_id", "member_id", "time", "v_mps"])
        for series in tracks:
            v0 = series.points[0].v_obs if args.v0 is None else args.v0
            for member in simulate(model, series, v0, config):
                for t, v in zip(member.times, member.v):
                    writer.writerow([
                        member.storm_id, member.member_id,
                        np.datetime_as_string(t, unit="s"), _fmt(v),
                    ])
    _write_provenance(out, args, [args.tracks, args.model])
    print(f"simulate: {len(tracks)} storms x {args.n_members} members -> {out}")


# ---------------------------------------------------------------- bifurcate

def _env_from_args(args) -> EnvConditions:
    return EnvConditions(
        vp=args.vp, chi=args.chi, shear=args.shear, z=args.z,
        alpha_fixed=args.fixed_alpha,
    )


def _cmd_bifurcate(args) -> None:
    out = _out_dir(args)
    model = load_model(args.model) if args.model else builtin_paper_model()
    env = _env_from_args(args)
    base = find_fixed_points(model, env, v_max=args.v_max)
    with open(out / "fixed_points.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["v_mps", "stability"])
        for r in base.roots:
            writer.writerow([_fmt(r.v), "stable" if r.stable else "unstable"])
    scan = bifurcation_scan(
        model, env, args.param, (args.min, args.max), args.steps, v_max=args.v_max,
    )
    with open(out / "scan.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([args.param, "root_v_mps", "stability"])
        for val, fps in zip(scan.values, scan.sets):
            for r in fps.roots:
                writer.writerow([_fmt(val), _fmt(r.v), "stable" if r.stable else "unstable"])
    with open(out / "folds.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([args.param, "v_estimate_mps"])
        for fold in scan.folds:
            writer.writerow([_fmt(fold.parameter_value), _fmt(fold.v_estimate)])
    inputs = [args.model] if args.model else []
    _write_provenance(out, args, inputs)
    print(
        f"bifurcate: {len(scan.folds)} fold(s) over {args.param} in "
        f"[{args.min}, {args.max}] -> {out}"
    )


# ---------------------------------------------------------------- hazard

def _parse_city(text: str) -> CityRegion:
    parts = text.split(":")
    if len(parts) not in (3, 4):
        raise UsageError(f"city spec {text!r}; expected Name:lat:lon[:radius_km]")
    radius = float(parts[3]) if len(parts) == 4 else 150.0
    return CityRegion(name=parts[0], lat=float(parts[1]), lon=float(parts[2]),
                      radius_km=radius)


def _read_trajectories(path) -> list[IntensitySeries]:
    groups: dict[tuple[str, int], list[tuple[str, float]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["storm_id", "member_id", "time", "v_mps"]:
            raise ValidationError(f"{path}: not a trajectory file")
        for row in reader:
            groups.setdefault((row[0], int(row[1])), []).append((row[2], float(row[3])))
    out = []
    for (storm_id, member_id), rows in groups.items():
        times = np.array([np.datetime64(t, "s") for t, _ in rows])
        order = np.argsort(times)
        out.append(IntensitySeries(
            storm_id=storm_id, member_id=member_id,
            times=times[order], v=np.array([v for _, v in rows])[order],
        ))
    return out


def _cmd_hazard(args) -> None:
    out = _out_dir(args)
    tracks = {s.storm_id: s for s in load_tracks(args.tracks)}
    members = _read_trajectories(args.trajectories)
    positioned = []
    for m in members:
        if m.storm_id not in tracks:
            raise ValidationError(f"trajectory storm {m.storm_id} missing from tracks")
        positioned.append(attach_positions(m, tracks[m.storm_id]))

    grid = gridded_pdi_climatology(positioned, args.cell_deg, args.years)
    with open(out / "pdi_grid.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lat_cell_deg", "lon_cell_deg", "annual_mean_pdi"])
        for (ilat, ilon), val in sorted(grid.items()):
            writer.writerow([
                _fmt(ilat * args.cell_deg), _fmt(ilon * args.cell_deg), _fmt(val),
            ])

    dist = lmi_distribution(
        positioned, subsample_to=args.lmi_subsample, seed=args.seed,
    )
    with open(out / "lmi_hist.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        head = ["v_mps", "mass"] + (
            ["band_low", "band_high"] if dist.band_low is not None else []
        )
        writer.writerow(head)
        for i, center in enumerate(dist.bin_centers):
            row = [_fmt(center), _fmt(dist.masses[i])]
            if dist.band_low is not None:
                row += [_fmt(dist.band_low[i]), _fmt(dist.band_high[i])]
            writer.writerow(row)

    cities = [_parse_city(c) for c in (args.city or [])]
    summary_lines = [f"storm_members = {len(positioned)}", f"years = {args.years}"]
    with open(out / "return_periods.csv", "w", newline="", encoding="utf-8") as rp_fh, \
         open(out / "landfall.csv", "w", newline="", encoding="utf-8") as lf_fh:
        rp_writer = csv.writer(rp_fh)
        rp_writer.writerow(["city", "intensity_mps", "return_period_years"])
        lf_writer = csv.writer(lf_fh)
        lf_writer.writerow(["city", "v_mps"])
        for city in cities:
            maxima = storm_maxima_in_region(positioned, city)
            if maxima.size == 0:
                rp_writer.writerow([city.name, "no data", "no data"])
                lf_writer.writerow([city.name, "no data"])
                summary_lines.append(f"{city.name}: no data")
                continue
            for v, rp in return_periods(maxima, args.years):
                rp_writer.writerow([city.name, _fmt(v), _fmt(rp)])
            dens = landfall_distribution(positioned, city)
            for v in dens.samples:
                lf_writer.writerow([city.name, _fmt(v)])
            summary_lines.append(
                f"{city.name}: {maxima.size} storms in radius, "
                f"max {maxima.max():.1f} m/s"
            )
    (out / "summary.txt").write_text("\n".join(summary_lines) + "\n", encoding="utf-8")
    _write_provenance(out, args, [args.trajectories, args.tracks])
    print(f"hazard: {len(positioned)} member series, {len(cities)} cities -> {out}")


# ---------------------------------------------------------------- builtin export

def _cmd_builtin(args) -> None:
    out = _out_dir(args)
    save_model(builtin_paper_model(), out / "model.json")
    _write_provenance(out, args, [])
    print(f"builtin: published 10-term model -> {out / 'model.json'}")


# ---------------------------------------------------------------- parser

# options that must be present after merging flags with the config file
_REQUIRED = {
    "fit": ["out", "tracks"],
    "select": ["out", "system"],
    "tune": ["out", "tracks", "supports", "k"],
    "calibrate": ["out", "tracks", "model"],
    "simulate": ["out", "tracks", "model"],
    "bifurcate": ["out", "param", "min", "max"],
    "hazard": ["out", "trajectories", "tracks", "years"],
    "builtin": ["out"],
}


def _build_parser() -> _Parser:
    parser = _Parser(prog="tcsde", description=__doc__)
    parser.add_argument("--config", help="key=value file; explicit flags override it")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("fit", help="assemble the integral regression system")
    common(p)
    p.add_argument("--tracks")
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--max-horizon-hours", type=float, default=120.0)
    p.add_argument("--stride", type=int, default=1)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("select", help="cross-validated sparsity path")
    common(p)
    p.add_argument("--system", help="system.csv from fit")
    p.add_argument("--k-list", default="1:15", help="e.g. 1:15 or 2,5,10")
    p.add_argument("--folds", type=int, default=5)
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("tune", help="ensemble Kalman fine-tuning of a support")
    common(p)
    p.add_argument("--tracks")
    p.add_argument("--supports", help="supports.csv from select")
    p.add_argument("--k", type=int)
    p.add_argument("--horizons-hours", default="6:72:6")
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--obs-noise-std", type=float, default=2.57)
    p.add_argument("--ensemble-size", type=int, default=100)
    p.set_defaults(func=_cmd_tune)

    p = sub.add_parser("calibrate", help="fit the diffusion law from residuals")
    common(p)
    p.add_argument("--tracks")
    p.add_argument("--model")
    p.add_argument("--horizon-hours", type=float, default=6.0)
    p.add_argument("--bins", type=int, default=6)
    p.add_argument("--bootstrap", type=int, default=1000)
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("simulate", help="generate synthetic intensity trajectories")
    common(p)
    p.add_argument("--tracks")
    p.add_argument("--model")
    p.add_argument("--n-members", type=int, default=100)
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("--dt-internal-hours", type=float, default=0.75)
    p.add_argument("--clamp-floor", type=float, default=0.0)
    p.add_argument("--no-clamp", action="store_true")
    p.add_argument("--v0", type=float, default=None,
                   help="override the observed initial intensity (m/s)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("bifurcate", help="fixed points and a one-parameter scan")
    common(p)
    p.add_argument("--model", default=None, help="model.json; default: built-in model")
    p.add_argument("--param", choices=["z", "vp", "chi", "shear"])
    p.add_argument("--min", type=float)
    p.add_argument("--max", type=float)
    p.add_argument("--steps", type=int, default=121)
    p.add_argument("--z", type=float, default=100.0)
    p.add_argument("--vp", type=float, default=72.0)
    p.add_argument("--chi", type=float, default=1.0)
    p.add_argument("--shear", type=float, default=3.0)
    p.add_argument("--v-max", type=float, default=120.0)
    p.add_argument("--fixed-alpha", type=float, default=None)
    p.set_defaults(func=_cmd_bifurcate)

    p = sub.add_parser("hazard", help="climatology and hazard summaries")
    common(p)
    p.add_argument("--trajectories")
    p.add_argument("--tracks")
    p.add_argument("--years", type=float)
    p.add_argument("--cell-deg", type=float, default=6.0)
    p.add_argument("--city", action="append", help="Name:lat:lon[:radius_km]")
    p.add_argument("--lmi-subsample", type=int, default=None)
    p.set_defaults(func=_cmd_hazard)

    p = sub.add_parser("builtin", help="export the published model as model.json")
    common(p)
    p.set_defaults(func=_cmd_builtin)

    return parser


def _load_config(path) -> dict:
    values = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{line_no}: expected key=value")
        key, _, val = line.partition("=")
        values[key.strip().replace("-", "_")] = val.strip()
    return values


def _apply_config(parser: _Parser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        raw = _load_config(args.config)
        explicit = {
            a.lstrip("-").replace("-", "_").split("=")[0]
            for a in argv if a.startswith("--")
        }
        for key, val in raw.items():
            if key in explicit or not hasattr(args, key):
                continue
            current = getattr(args, key)
            if isinstance(current, bool):
                setattr(args, key, val.lower() in ("1", "true"))
            elif isinstance(current, int):
                setattr(args, key, int(val))
            elif isinstance(current, float):
                setattr(args, key, float(val))
            else:
                setattr(args, key, val)
    missing = [
        name for name in _REQUIRED.get(args.command, [])
        if getattr(args, name, None) is None
    ]
    if missing:
        raise UsageError(
            f"{args.command}: missing required option(s): "
            + ", ".join("--" + m.replace("_", "-") for m in missing)
        )
    return args


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        args = _apply_config(parser, argv)
        args.func(args)
        return 0
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except ValidationError as exc:
        print(f"data validation error: {exc}", file=sys.stderr)
        return 2
    except (NumericsError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

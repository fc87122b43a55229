"""Integral-formulation regression system for sparse drift identification.

For a window [t, t+T] the model implies that the observed nondimensional
intensity change equals the coefficient-weighted sum of time-integrated
features.  Each integral is approximated by a left-endpoint
piecewise-constant sum over the 6-hour observations (one observation per
tau), which averages out reporting noise; with the 6-hour step as the
time unit, each row entry is just a running sum of feature values.  One
row is produced for every storm, start index and horizon, so a short
corpus already yields a well-populated least-squares problem.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime

import numpy as np

from . import env
from .basis import MonomialBasis, evaluate_arrays
from .errors import ValidationError
from .tracks import TrackSeries, forcing_arrays
from .windows import horizon_steps


@dataclass
class RegressionSystem:
    """Stacked integral-regression rows: response = design @ coefficients."""

    design: np.ndarray        # (rows, n_terms), tau units
    response: np.ndarray      # (rows,), nondimensional intensity change
    storm_ids: np.ndarray     # (rows,) str
    start_times: np.ndarray   # (rows,) datetime64[s]
    horizons: np.ndarray      # (rows,) int, 6-hour steps
    basis: MonomialBasis

    def __post_init__(self):
        r = self.design.shape[0]
        if (self.response.shape[0] != r or self.storm_ids.shape[0] != r
                or self.start_times.shape[0] != r or self.horizons.shape[0] != r):
            raise ValidationError("row metadata does not match design rows")
        if self.design.shape[1] != len(self.basis):
            raise ValidationError("design columns do not match basis length")

    @property
    def n_rows(self) -> int:
        return self.design.shape[0]


def _feature_matrix(series: TrackSeries, basis: MonomialBasis, scales) -> np.ndarray:
    f = forcing_arrays(series)
    alpha = env.compute_alpha(f.z, f.v_obs)
    return evaluate_arrays(
        basis, f.v_obs / scales.v, np.atleast_1d(alpha),
        f.vp / scales.vp, f.chi / scales.chi, f.shear / scales.shear,
    )


def integrate_features(series: TrackSeries, basis: MonomialBasis,
                       start: int, horizon_hours: float, scales=None) -> np.ndarray:
    """One design row: left-endpoint quadrature of each feature over the window.

    ``start`` is the window's start index in the series; the window must
    lie inside the series with no cadence gap.
    """
    from .model import Scales

    scales = scales or Scales()
    n = horizon_steps(horizon_hours)
    if start < 0 or start + n >= len(series.points):
        raise ValidationError(
            f"window [{start}, {start + n}] exceeds series of {len(series.points)} points"
        )
    gaps = [p.gap_before for p in series.points[start + 1 : start + n + 1]]
    if any(gaps):
        raise ValidationError("window spans a cadence gap")
    feats = _feature_matrix(series, basis, scales)
    return feats[start : start + n].sum(axis=0)


def build_system(tracks: list[TrackSeries], basis: MonomialBasis,
                 max_horizon_hours: float = 120.0, stride: int = 1,
                 scales=None) -> RegressionSystem:
    """Assemble every (storm, start, horizon) row up to the horizon cap.

    ``stride`` thins start indices for memory-limited runs; the default
    enumerates every start.  Windows spanning flagged gaps are skipped.
    """
    from .model import Scales

    scales = scales or Scales()
    if not tracks:
        raise ValidationError("empty track list")
    h_max = horizon_steps(max_horizon_hours)
    design_parts, response_parts = [], []
    ids, starts_meta, horizons_meta = [], [], []
    for series in tracks:
        f = forcing_arrays(series)
        feats = _feature_matrix(series, basis, scales)
        prefix = np.vstack([np.zeros(len(basis)), np.cumsum(feats, axis=0)])
        v_nd = f.v_obs / scales.v
        n_pts = len(series.points)
        gap_cum = np.concatenate([[0], np.cumsum(f.gap_before.astype(int))])
        for h in range(1, min(h_max, n_pts - 1) + 1):
            starts = np.arange(0, n_pts - h, stride)
            # a window is gap-free iff no flagged point in (start, start+h]
            ok = (gap_cum[starts + h + 1] - gap_cum[starts + 1]) == 0
            starts = starts[ok]
            if starts.size == 0:
                continue
            design_parts.append(prefix[starts + h] - prefix[starts])
            response_parts.append(v_nd[starts + h] - v_nd[starts])
            ids.extend([series.storm_id] * starts.size)
            starts_meta.extend(f.times[starts])
            horizons_meta.extend([h] * starts.size)
    if not design_parts:
        raise ValidationError("no valid windows in the given tracks")
    return RegressionSystem(
        design=np.vstack(design_parts),
        response=np.concatenate(response_parts),
        storm_ids=np.array(ids, dtype=object),
        start_times=np.array(starts_meta),
        horizons=np.array(horizons_meta, dtype=np.int64),
        basis=basis,
    )


def least_squares(system: RegressionSystem, support=None):
    """Ordinary least squares on the (optionally support-restricted) system.

    Returns a full-length coefficient vector (zeros off support) and the
    residual sum of squares.  Solved by orthogonal factorization; a
    rank-deficient restricted design falls back to the minimum-norm
    solution and is reported via the returned rank.
    """
    if support is None:
        cols = np.arange(len(system.basis))
    else:
        cols = np.asarray(sorted(support), dtype=np.int64)
    D = system.design[:, cols]
    if D.shape[0] < cols.size:
        raise ValidationError(
            f"{D.shape[0]} rows for {cols.size} unknowns; need rows >= columns"
        )
    sol, _, rank, _ = np.linalg.lstsq(D, system.response, rcond=None)
    coeffs = np.zeros(len(system.basis))
    coeffs[cols] = sol
    resid = system.response - D @ sol
    rss = float(resid @ resid)
    return coeffs, rss, int(rank)


def dump_system(system: RegressionSystem, path) -> None:
    """Write the assembled system as CSV for external inspection or reuse."""
    term_cols = ["d_" + ".".join(str(k) for k in t) for t in system.basis.terms]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["storm_id", "t_start", "horizon_steps", "response"] + term_cols)
        for i in range(system.n_rows):
            t = np.datetime_as_string(system.start_times[i], unit="s")
            writer.writerow(
                [system.storm_ids[i], t, int(system.horizons[i]), repr(float(system.response[i]))]
                + [repr(float(x)) for x in system.design[i]]
            )


def load_system(path) -> RegressionSystem:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:4] != ["storm_id", "t_start", "horizon_steps", "response"]:
            raise ValidationError(f"{path}: not a system dump")
        terms = tuple(
            tuple(int(k) for k in col[2:].split(".")) for col in header[4:]
        )
        basis = MonomialBasis(terms, max_degree=max((sum(t) for t in terms), default=0))
        ids, starts, horizons, resp, rows = [], [], [], [], []
        for row in reader:
            ids.append(row[0])
            starts.append(np.datetime64(datetime.fromisoformat(row[1]), "s"))
            horizons.append(int(row[2]))
            resp.append(float(row[3]))
            rows.append([float(x) for x in row[4:]])
    return RegressionSystem(
        design=np.asarray(rows),
        response=np.asarray(resp),
        storm_ids=np.array(ids, dtype=object),
        start_times=np.array(starts),
        horizons=np.array(horizons, dtype=np.int64),
        basis=basis,
    )

"""Desk-scale synthetic track corpus for testing the learning pipeline.

Each storm gets smooth random environmental series inside observed
physical ranges, and an intensity series produced by integrating the
built-in published model along that environment, then quantizing to the
2.57 m/s reporting increment of best-track archives.  Storms are
truncated when they dissipate (below 6 m/s) so that every retained point
reflects live-storm dynamics; environments producing storms shorter than
16 points are redrawn from a fresh substream.

The mixed-layer depth column is back-solved (in the pre-scaled units the
heat-content law expects) so that the ocean parameter z lands in its
dynamically active range and the full compute-z path is exercised
downstream.
"""

from __future__ import annotations

from datetime import datetime, timedelta

import numpy as np

from . import _kernels
from .errors import ValidationError
from .model import builtin_paper_model
from .tracks import TrackPoint, TrackSeries

QUANTUM = 2.57            # m/s, 5-knot reporting increment
DISSIPATION_FLOOR = 6.0   # m/s; storms are truncated below this
MIN_POINTS = 16
GEN_SUBSTEPS = 8


def _smooth_series(rng: np.random.Generator, n: int, lo: float, hi: float,
                   amp_frac: float = 0.5) -> np.ndarray:
    """Random smooth signal in [lo, hi]: offset plus three sinusoids."""
    t = np.arange(n)
    base = rng.uniform(lo + 0.25 * (hi - lo), hi - 0.25 * (hi - lo))
    sig = np.full(n, base)
    for _ in range(3):
        period = rng.uniform(12, 70)
        amp = rng.uniform(0, amp_frac * (hi - lo) / 2)
        phase = rng.uniform(0, 2 * np.pi)
        sig += amp * np.sin(2 * np.pi * t / period + phase)
    return np.clip(sig, lo, hi)


def _try_storm(rng: np.random.Generator, duration_steps: int, stochastic: bool):
    n = duration_steps
    vp = _smooth_series(rng, n, 40.0, 88.0)
    chi = _smooth_series(rng, n, 0.1, 4.5)
    shear = _smooth_series(rng, n, 0.5, 18.0)
    z = _smooth_series(rng, n, 15.0, 140.0)
    gamma = _smooth_series(rng, n, 0.6, 4.0)
    u_t = _smooth_series(rng, n, 1.0, 9.0)
    v0 = rng.uniform(15.0, 40.0)

    model = builtin_paper_model()
    exps = model.basis.exponent_array()
    steps = n - 1
    noise = None
    if stochastic:
        noise = rng.standard_normal((1, steps * GEN_SUBSTEPS))
    traj = _kernels.rollout_stochastic(
        exps, model.coefficients, np.array([v0 / model.scales.v]),
        z[:steps], vp[:steps] / model.scales.vp, chi[:steps] / model.scales.chi,
        shear[:steps] / model.scales.shear, GEN_SUBSTEPS,
        model.sigma_slope, model.sigma_intercept, noise,
        v_scale=model.scales.v, clamp_lo=0.0,
    )[0] * model.scales.v

    alive = traj >= DISSIPATION_FLOOR
    length = int(np.argmin(alive)) if not alive.all() else n
    if length < MIN_POINTS:
        return None

    # translation-like positions: westward-northward drift with wobble
    lat = np.empty(n)
    lon = np.empty(n)
    lat[0] = rng.uniform(8.0, 28.0)
    lon[0] = rng.uniform(-85.0, -20.0)
    dlat = rng.normal(0.15, 0.05, size=n - 1)
    dlon = rng.normal(-0.45, 0.12, size=n - 1)
    lat[1:] = lat[0] + np.cumsum(dlat)
    lon[1:] = lon[0] + np.cumsum(dlon)

    # back-solve h_m so that compute_z reproduces the drawn z series
    h_m = z * vp / (0.01 * gamma ** (-0.4) * u_t)

    v_obs = np.round(traj[:length] / QUANTUM) * QUANTUM
    return v_obs, lat, lon, vp, chi, shear, h_m, gamma, u_t, length


def generate_synthetic_tracks(seed: int, n_storms: int, duration_steps: int,
                              start_time: datetime = datetime(2000, 1, 1),
                              stochastic: bool = False) -> list[TrackSeries]:
    """Deterministic synthetic corpus driven by the built-in model.

    ``duration_steps`` is the maximum storm length; storms that dissipate
    earlier are truncated.  With ``stochastic=True`` the generating
    integration includes the calibrated noise term; the default leaves
    quantization as the only observation noise.
    """
    if n_storms < 1 or duration_steps < 2:
        raise ValidationError("need n_storms >= 1 and duration_steps >= 2")
    out = []
    for i in range(n_storms):
        for attempt in range(64):
            rng = np.random.default_rng(
                np.random.SeedSequence(seed, spawn_key=(i, attempt))
            )
            made = _try_storm(rng, duration_steps, stochastic)
            if made is not None:
                break
        else:
            raise ValidationError("storm generation kept dissipating; widen parameters")
        v_obs, lat, lon, vp, chi, shear, h_m, gamma, u_t, length = made
        t0 = start_time + timedelta(days=7 * i)
        points = [
            TrackPoint(
                time=t0 + timedelta(hours=6 * k),
                lat=float(lat[k]), lon=float(lon[k]),
                v_obs=float(v_obs[k]), vp=float(vp[k]), chi=float(chi[k]),
                shear=float(shear[k]), h_m=float(h_m[k]), gamma=float(gamma[k]),
                u_t=float(u_t[k]),
            )
            for k in range(length)
        ]
        out.append(TrackSeries(storm_id=f"SYN{i:04d}", points=points))
    return out

"""Window enumeration and forcing-matrix assembly shared by the learning stages.

A window is (series index, start index, horizon in 6-hour steps).  Windows
never span a flagged cadence gap.  The forcing matrices returned here are
nondimensional and ready for the integration kernels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .tracks import Forcing, TrackSeries, forcing_arrays, valid_window_starts


@dataclass
class WindowBatch:
    """Kernel-ready arrays for a batch of equal-horizon windows."""

    v0_nd: np.ndarray     # (W,) nondimensional initial intensity
    v_end: np.ndarray     # (W,) observed intensity at window end, m/s
    z: np.ndarray         # (W, n) dimensionless ocean heat content
    vp_nd: np.ndarray     # (W, n)
    chi_nd: np.ndarray    # (W, n)
    s_nd: np.ndarray      # (W, n)

    def __len__(self) -> int:
        return self.v0_nd.shape[0]


def enumerate_windows(tracks: list[TrackSeries], n_steps: int) -> list[tuple[int, int]]:
    """All (series index, start index) pairs valid at the given horizon."""
    if n_steps < 1:
        raise ValidationError("horizon must be at least one 6-hour step")
    out = []
    for si, series in enumerate(tracks):
        for start in valid_window_starts(series, n_steps):
            out.append((si, int(start)))
    return out


def window_batch(forcings: list[Forcing], wins: list[tuple[int, int]],
                 n_steps: int, scales) -> WindowBatch:
    """Assemble forcing matrices for equal-horizon windows.

    ``forcings`` is the per-series array view (same order as the track
    list used to enumerate the windows).
    """
    W = len(wins)
    z = np.empty((W, n_steps))
    vp = np.empty((W, n_steps))
    chi = np.empty((W, n_steps))
    s = np.empty((W, n_steps))
    v0 = np.empty(W)
    v_end = np.empty(W)
    for w, (si, start) in enumerate(wins):
        f = forcings[si]
        stop = start + n_steps
        if stop >= len(f.v_obs) + 1:
            raise ValidationError(f"window [{start}, {stop}] exceeds series length")
        z[w] = f.z[start:stop]
        vp[w] = f.vp[start:stop]
        chi[w] = f.chi[start:stop]
        s[w] = f.shear[start:stop]
        v0[w] = f.v_obs[start]
        v_end[w] = f.v_obs[stop]
    return WindowBatch(
        v0_nd=v0 / scales.v,
        v_end=v_end,
        z=z,
        vp_nd=vp / scales.vp,
        chi_nd=chi / scales.chi,
        s_nd=s / scales.shear,
    )


def horizon_steps(horizon_hours: float) -> int:
    """Convert an hour horizon to 6-hour steps, enforcing the cadence."""
    steps = horizon_hours / 6.0
    if steps != int(steps) or steps < 1:
        raise ValidationError(f"horizon {horizon_hours} h is not a positive multiple of 6 h")
    return int(steps)

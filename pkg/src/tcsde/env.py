"""Ocean-coupling variables and nondimensionalization.

The intensity model runs on nondimensional variables: intensity and
potential intensity are divided by 50 m/s, entropy deficit by 2 J/(kg K),
and vertical wind shear by 10 m/s.  The ocean's damping effect enters
through the dimensionless heat-content parameter ``z`` and the bounded
damping factor ``alpha``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

V_SCALE = 50.0       # m/s
VP_SCALE = 50.0      # m/s
CHI_SCALE = 2.0      # J/(kg K)
SHEAR_SCALE = 10.0   # m/s

ALPHA_FLOOR = 0.13
ALPHA_CEIL = 1.0


@dataclass(frozen=True)
class NondimState:
    """Nondimensional model state: (v, alpha, vp, chi, s).

    ``v`` is intensity / 50 m/s, ``alpha`` the ocean damping factor in
    [0.13, 1], ``vp`` potential intensity / 50 m/s, ``chi`` entropy
    deficit / 2 J/(kg K), ``s`` shear / 10 m/s.
    """

    v: float
    alpha: float
    vp: float
    chi: float
    s: float

    def __post_init__(self):
        vals = (self.v, self.alpha, self.vp, self.chi, self.s)
        if not all(np.isfinite(vals)):
            raise ValidationError(f"non-finite state: {vals}")
        if self.v < 0:
            raise ValidationError(f"negative nondimensional intensity: {self.v}")
        if not (ALPHA_FLOOR - 1e-12 <= self.alpha <= ALPHA_CEIL + 1e-12):
            raise ValidationError(f"alpha outside [0.13, 1]: {self.alpha}")

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.v, self.alpha, self.vp, self.chi, self.s)


def compute_z(gamma, h_m, u_t, vp):
    """Dimensionless upper-ocean heat content: 0.01 * gamma^-0.4 * h_m * u_t / vp.

    ``gamma`` (sub-mixed-layer stratification) and ``h_m`` (mixed-layer
    depth) are taken as pre-scaled numerics in whatever convention the
    upstream feature pipeline supplies; when that convention is in doubt,
    supply ``z_override`` on the track points instead.  Accepts scalars or
    arrays.
    """
    gamma = np.asarray(gamma, dtype=float)
    h_m = np.asarray(h_m, dtype=float)
    u_t = np.asarray(u_t, dtype=float)
    vp = np.asarray(vp, dtype=float)
    if np.any(gamma <= 0) or np.any(h_m <= 0) or np.any(vp <= 0):
        raise ValidationError("compute_z requires gamma > 0, h_m > 0, vp > 0")
    if np.any(u_t < 0):
        raise ValidationError("compute_z requires u_t >= 0")
    z = 0.01 * gamma ** (-0.4) * h_m * u_t / vp
    return float(z) if z.ndim == 0 else z


def compute_alpha(z, v, dimensional_v: bool = True):
    """Ocean damping factor alpha = 1 - 0.87 exp(-z/v), clamped to [0.13, 1].

    ``v`` is the current intensity in m/s.  By default the damping law
    divides z by the dimensional intensity; ``dimensional_v=False``
    divides by the nondimensional intensity v/50 instead (with z values of
    order 10-100 that saturates alpha at 1 essentially everywhere, so the
    dimensional reading is the default).  At v <= 0 the floor value 0.13
    is returned (the conservative damping limit).  Accepts scalars or
    arrays.
    """
    z = np.asarray(z, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(np.isnan(z)) or np.any(np.isnan(v)):
        raise ValidationError("compute_alpha got NaN input")
    if np.any(z < 0):
        raise ValidationError("compute_alpha requires z >= 0")
    if not dimensional_v:
        v = v / V_SCALE
    with np.errstate(divide="ignore", over="ignore"):
        ratio = np.where(v > 0, z / np.where(v > 0, v, 1.0), np.inf)
        alpha = np.where(v > 0, 1.0 - 0.87 * np.exp(-ratio), ALPHA_FLOOR)
    alpha = np.clip(alpha, ALPHA_FLOOR, ALPHA_CEIL)
    return float(alpha) if alpha.ndim == 0 else alpha


def nondimensionalize(point, v: float, dimensional_alpha_v: bool = True) -> NondimState:
    """Build the nondimensional state at a track point for intensity ``v`` (m/s).

    ``alpha`` comes from ``z_override`` when the point carries one,
    otherwise from ``compute_z`` on (gamma, h_m, u_t, vp).
    """
    if v < 0:
        raise ValidationError(f"negative intensity: {v}")
    if point.z_override is not None:
        z = point.z_override
    else:
        z = compute_z(point.gamma, point.h_m, point.u_t, point.vp)
    alpha = compute_alpha(z, v, dimensional_v=dimensional_alpha_v)
    return NondimState(
        v=v / V_SCALE,
        alpha=float(alpha),
        vp=point.vp / VP_SCALE,
        chi=point.chi / CHI_SCALE,
        s=point.shear / SHEAR_SCALE,
    )

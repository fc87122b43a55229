"""Fixed points and bifurcations of the drift at a frozen environment.

At a fixed environment the drift is a function of intensity alone, but it
is not a polynomial in v: the ocean damping factor depends on v through
the damping law, so roots are located numerically on a dense grid with
bisection refinement rather than by cubic formulas.  A fixed-alpha mode
is available for analysis of the polynomial skeleton by itself.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import env as env_mod
from .basis import evaluate_arrays
from .errors import ValidationError
from .model import IntensityModel

GRID_POINTS = 2000
ROOT_TOL_MPS = 1e-4      # bisection width target, m/s
DRIFT_TOL = 1e-8         # |drift| at a reported root, per 6 h
V_EPS = 1e-9             # grids start here: the v -> 0+ limit of the damping law


@dataclass(frozen=True)
class EnvConditions:
    """Frozen environment for the intensity-only view of the drift.

    Supply either ``z`` directly or the (gamma, h_m, u_t) inputs of the
    heat-content law; ``alpha_fixed`` freezes the damping factor instead
    of letting it track intensity.
    """

    vp: float                      # m/s
    chi: float                     # J/(kg K)
    shear: float                   # m/s
    z: float | None = None
    gamma: float | None = None
    h_m: float | None = None
    u_t: float | None = None
    alpha_fixed: float | None = None
    dimensional_alpha_v: bool = True

    def z_value(self) -> float:
        if self.z is not None:
            return self.z
        if None in (self.gamma, self.h_m, self.u_t):
            raise ValidationError("EnvConditions needs z or (gamma, h_m, u_t)")
        return env_mod.compute_z(self.gamma, self.h_m, self.u_t, self.vp)


@dataclass(frozen=True)
class FixedPoint:
    v: float          # m/s
    stable: bool


@dataclass
class FixedPointSet:
    environment: EnvConditions
    roots: list[FixedPoint]      # ascending in v

    def stable_roots(self) -> list[float]:
        return [r.v for r in self.roots if r.stable]


def drift_curve(model: IntensityModel, env: EnvConditions, v_mps) -> np.ndarray:
    """Drift (per 6 h) as a function of dimensional intensity."""
    v = np.atleast_1d(np.asarray(v_mps, dtype=float))
    if env.alpha_fixed is not None:
        alpha = np.full_like(v, float(env.alpha_fixed))
    else:
        alpha = env_mod.compute_alpha(
            np.full_like(v, env.z_value()), v,
            dimensional_v=env.dimensional_alpha_v,
        )
        alpha = np.atleast_1d(alpha)
    s = model.scales
    feats = evaluate_arrays(
        model.basis, v / s.v, alpha,
        np.full_like(v, env.vp / s.vp),
        np.full_like(v, env.chi / s.chi),
        np.full_like(v, env.shear / s.shear),
    )
    return feats @ model.coefficients


def _bisect_root(model, env, lo, hi, f_lo):
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_mid = float(drift_curve(model, env, mid)[0])
        if f_mid == 0.0:
            return mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
        if hi - lo < 1e-12:
            break
    return 0.5 * (lo + hi)


def find_fixed_points(model: IntensityModel, env: EnvConditions,
                      v_max: float = 120.0,
                      n_grid: int = GRID_POINTS) -> FixedPointSet:
    """All drift roots on (0, v_max], with slope-sign stability labels.

    Sign changes on a dense grid are refined by bisection well below the
    0.0001 m/s target; an empty root list is a valid result.
    """
    if v_max <= 0:
        raise ValidationError("v_max must be positive")
    grid = np.linspace(V_EPS, v_max, n_grid)
    f = drift_curve(model, env, grid)
    roots = []
    for i in range(n_grid - 1):
        if f[i] == 0.0:
            roots.append(float(grid[i]))
        elif f[i] * f[i + 1] < 0:
            roots.append(_bisect_root(model, env, grid[i], grid[i + 1], f[i]))
    if f[-1] == 0.0:
        roots.append(float(grid[-1]))
    out = []
    delta = 1e-3
    for r in roots:
        slope = float(
            drift_curve(model, env, r + delta)[0] - drift_curve(model, env, r - delta)[0]
        ) / (2 * delta)
        out.append(FixedPoint(v=float(r), stable=slope < 0))
    out.sort(key=lambda fp: fp.v)
    return FixedPointSet(environment=env, roots=out)


def _with_parameter(env: EnvConditions, parameter: str, value: float) -> EnvConditions:
    if parameter == "z":
        return replace(env, z=float(value), gamma=None, h_m=None, u_t=None)
    if parameter in ("vp", "chi", "shear"):
        return replace(env, **{parameter: float(value)})
    raise ValidationError(f"unknown scan parameter {parameter!r}")


@dataclass(frozen=True)
class FoldPoint:
    parameter_value: float
    v_estimate: float     # where the merging pair met, m/s


@dataclass
class BifurcationScan:
    parameter: str
    values: np.ndarray
    sets: list[FixedPointSet]
    folds: list[FoldPoint]

    def stable_root_sequence(self) -> list[float | None]:
        """Largest stable root per scan value, None where none exists."""
        out = []
        for s in self.sets:
            stable = s.stable_roots()
            out.append(max(stable) if stable else None)
        return out


def bifurcation_scan(model: IntensityModel, env: EnvConditions, parameter: str,
                     p_range: tuple[float, float], n_steps: int,
                     v_max: float = 120.0,
                     fold_rel_tol: float = 1e-3) -> BifurcationScan:
    """Sweep one environmental parameter and locate saddle-node folds.

    A fold is flagged between consecutive scan values where the root
    count drops by at least two (a stable/unstable pair annihilating);
    its location is refined by bisection on the parameter to
    ``fold_rel_tol`` of the scanned range.
    """
    if n_steps < 2:
        raise ValidationError("n_steps must be >= 2")
    lo, hi = p_range
    if not hi > lo:
        raise ValidationError("empty parameter range")
    values = np.linspace(lo, hi, n_steps)
    sets = [
        find_fixed_points(model, _with_parameter(env, parameter, val), v_max)
        for val in values
    ]
    folds = []
    tol = fold_rel_tol * (hi - lo)
    for i in range(n_steps - 1):
        n_before, n_after = len(sets[i].roots), len(sets[i + 1].roots)
        if n_before - n_after >= 2:
            a, b = float(values[i]), float(values[i + 1])
            count_a = n_before
            while b - a > tol:
                mid = 0.5 * (a + b)
                n_mid = len(
                    find_fixed_points(model, _with_parameter(env, parameter, mid), v_max).roots
                )
                if n_mid >= count_a:
                    a = mid
                else:
                    b = mid
            last_set = find_fixed_points(model, _with_parameter(env, parameter, a), v_max)
            rs = [fp.v for fp in last_set.roots]
            if len(rs) >= 2:
                gaps = np.diff(rs)
                j = int(np.argmin(gaps))
                v_est = 0.5 * (rs[j] + rs[j + 1])
            else:
                v_est = rs[0] if rs else float("nan")
            folds.append(FoldPoint(parameter_value=0.5 * (a + b), v_estimate=float(v_est)))
    return BifurcationScan(parameter=parameter, values=values, sets=sets, folds=folds)


def monotone_drift_check(model: IntensityModel, env: EnvConditions,
                         v_range: tuple[float, float] = (0.0, 120.0),
                         n_grid: int = GRID_POINTS) -> bool:
    """True iff the drift never increases with intensity on a dense grid.

    Models admitting multiple fixed points necessarily fail this (their
    drift must rise somewhere between roots).
    """
    lo, hi = v_range
    grid = np.linspace(max(lo, V_EPS), hi, n_grid)
    f = drift_curve(model, env, grid)
    return bool(np.all(np.diff(f) <= 1e-12))

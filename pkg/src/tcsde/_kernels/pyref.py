"""Pure-numpy reference implementation of the integration kernels.

Semantics are shared with the compiled backend: state is nondimensional
intensity, forcings are held piecewise constant over each 6-hour step,
the ocean damping factor is re-evaluated from (z, dimensional v) at every
stage, and the state is clamped into [clamp_lo, clamp_hi] after each
internal substep.  The stochastic kernel consumes pre-drawn standard
normals so that results are a pure function of the caller's seed.
"""

from __future__ import annotations

import numpy as np

ALPHA_FLOOR = 0.13
SAFETY_CAP = 10.0  # nondimensional; 500 m/s


def _drift_batch(exps, coeffs, v, z, vp, chi, s, v_scale):
    """Drift for a batch of states; all batch inputs are (B,), coeffs (B, m)."""
    vdim = v * v_scale
    with np.errstate(divide="ignore", over="ignore"):
        alpha = np.where(
            vdim > 0.0,
            1.0 - 0.87 * np.exp(-z / np.where(vdim > 0.0, vdim, 1.0)),
            ALPHA_FLOOR,
        )
    alpha = np.clip(alpha, ALPHA_FLOOR, 1.0)
    cols = (v, alpha, vp, chi, s)
    kmax = int(exps.max(initial=0))
    feats = np.ones((v.shape[0], exps.shape[0]))
    for i, col in enumerate(cols):
        ptable = np.ones((kmax + 1, v.shape[0]))
        for k in range(1, kmax + 1):
            ptable[k] = ptable[k - 1] * col
        feats *= ptable[exps[:, i]].T
    return np.einsum("bm,bm->b", coeffs, feats)


def rollout_deterministic(exps, coeffs, v0, z, vp, chi, s, substeps,
                          v_scale=50.0, clamp_lo=0.0, clamp_hi=SAFETY_CAP):
    """Fixed-step RK4 rollout of the deterministic drift.

    Parameters
    ----------
    exps : (m, 5) int64 exponent tuples.
    coeffs : (B, m) per-rollout coefficients, 1/(6 h).
    v0 : (B,) nondimensional initial intensities.
    z, vp, chi, s : (B, n) per-step forcings (z dimensionless, the rest
        nondimensional).
    substeps : internal RK4 steps per 6-hour interval.

    Returns
    -------
    (B, n + 1) nondimensional trajectory at 6-hour boundaries.
    """
    exps = np.ascontiguousarray(exps, dtype=np.int64)
    coeffs = np.ascontiguousarray(coeffs, dtype=float)
    v = np.array(v0, dtype=float, copy=True)
    n = z.shape[1]
    out = np.empty((v.shape[0], n + 1))
    out[:, 0] = v
    h = 1.0 / substeps
    for k in range(n):
        zk, vpk, ck, sk = z[:, k], vp[:, k], chi[:, k], s[:, k]
        for _ in range(substeps):
            k1 = _drift_batch(exps, coeffs, v, zk, vpk, ck, sk, v_scale)
            k2 = _drift_batch(exps, coeffs, v + 0.5 * h * k1, zk, vpk, ck, sk, v_scale)
            k3 = _drift_batch(exps, coeffs, v + 0.5 * h * k2, zk, vpk, ck, sk, v_scale)
            k4 = _drift_batch(exps, coeffs, v + h * k3, zk, vpk, ck, sk, v_scale)
            v = v + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            v = np.clip(v, clamp_lo, clamp_hi)
        out[:, k + 1] = v
    return out


def rollout_stochastic(exps, coeffs, v0, z, vp, chi, s, substeps,
                       sigma_slope, sigma_intercept, noise,
                       v_scale=50.0, clamp_lo=0.0, clamp_hi=SAFETY_CAP):
    """Euler(-Maruyama) rollout of one model along one forcing series.

    Parameters
    ----------
    coeffs : (m,) shared coefficient vector.
    v0 : (B,) per-member nondimensional initial intensities.
    z, vp, chi, s : (n,) forcing series shared by all members.
    noise : (B, n * substeps) standard normals, or None for the
        deterministic (first-order Euler) mode.

    Returns
    -------
    (B, n + 1) nondimensional trajectories at 6-hour boundaries.
    """
    exps = np.ascontiguousarray(exps, dtype=np.int64)
    coeffs1 = np.ascontiguousarray(coeffs, dtype=float)
    v = np.array(v0, dtype=float, copy=True)
    B = v.shape[0]
    cmat = np.broadcast_to(coeffs1, (B, coeffs1.shape[0]))
    n = z.shape[0]
    out = np.empty((B, n + 1))
    out[:, 0] = v
    h = 1.0 / substeps
    sqh = np.sqrt(h)
    for k in range(n):
        zk = np.full(B, z[k])
        vpk = np.full(B, vp[k])
        ck = np.full(B, chi[k])
        sk = np.full(B, s[k])
        for j in range(substeps):
            f = _drift_batch(exps, cmat, v, zk, vpk, ck, sk, v_scale)
            if noise is None:
                v = v + h * f
            else:
                # drift and diffusion both evaluated at the pre-step state
                sig = np.maximum(sigma_slope * v + sigma_intercept, 0.0)
                v = v + h * f + sig * sqh * noise[:, k * substeps + j]
            v = np.clip(v, clamp_lo, clamp_hi)
        out[:, k + 1] = v
    return out

"""Ensemble Kalman fine-tuning of drift coefficients on a fixed support.

Each ensemble member is a coefficient vector; the observation operator
integrates the member's deterministic drift from an observed initial
intensity over a forecast window and returns the endpoint in m/s.  The
update is the stochastic (perturbed-observation) ensemble Kalman step:
every member sees the observation plus an independent draw of the
observation noise, which keeps posterior spread honest across epochs.
Training proceeds over epochs of growing rollout horizon so long-horizon
stability is learned after short-horizon fit.

The printed form of the gain in the source method omits the inverse on
the innovation covariance; the standard (dimensionally consistent)
inverse is used here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .basis import MonomialBasis
from .errors import NumericsError, ValidationError
from .model import IntensityModel, Scales
from .tracks import TrackSeries, forcing_arrays
from .windows import enumerate_windows, horizon_steps, window_batch

DEFAULT_ENSEMBLE_SIZE = 100
DEFAULT_SUBSTEPS = 8       # RK4 steps per 6 h during member integration
OBS_NOISE_STD = 2.57       # m/s, intensity reporting quantum


@dataclass
class EnsembleState:
    """Coefficient ensemble (rows are members) plus its initialization record."""

    members: np.ndarray      # (E, k)
    prior_mean: np.ndarray   # (k,)
    prior_cov: np.ndarray    # (k, k)

    def __post_init__(self):
        if self.members.ndim != 2 or self.members.shape[0] < 2:
            raise ValidationError("ensemble needs at least 2 members")
        if self.members.shape[1] != self.prior_mean.shape[0]:
            raise ValidationError("member dimension does not match prior mean")

    @property
    def size(self) -> int:
        return self.members.shape[0]

    def mean(self) -> np.ndarray:
        return self.members.mean(axis=0)

    def spread(self) -> float:
        """Mean per-coordinate standard deviation across members."""
        return float(self.members.std(axis=0, ddof=1).mean())


@dataclass
class TrainingSchedule:
    """Epoch horizons (hours), update batch size, and observation noise."""

    horizons_hours: tuple[int, ...]
    batch_size: int = 16
    obs_noise_std: float = OBS_NOISE_STD

    def __post_init__(self):
        if not self.horizons_hours:
            raise ValidationError("schedule needs at least one horizon")
        steps = [horizon_steps(h) for h in self.horizons_hours]
        if any(b <= a for a, b in zip(steps, steps[1:])):
            raise ValidationError("schedule horizons must be increasing")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")

    @classmethod
    def published(cls) -> "TrainingSchedule":
        """One epoch at 6 h, then one per horizon 12 h..72 h in 6 h steps."""
        return cls(horizons_hours=tuple(range(6, 73, 6)))


def init_ensemble(initial_coefficients, spread_std, ensemble_size: int,
                  seed: int = 0) -> EnsembleState:
    """Gaussian prior ensemble around the initial coefficients.

    ``spread_std`` is a scalar or per-coordinate vector of prior standard
    deviations; zero gives the degenerate all-equal ensemble.
    """
    init = np.asarray(initial_coefficients, dtype=float)
    spread = np.broadcast_to(np.asarray(spread_std, dtype=float), init.shape).copy()
    if np.any(spread < 0):
        raise ValidationError("spread_std must be >= 0")
    if ensemble_size < 2:
        raise ValidationError("ensemble_size must be >= 2")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    members = init[None, :] + spread[None, :] * rng.standard_normal(
        (ensemble_size, init.size)
    )
    return EnsembleState(
        members=members, prior_mean=init.copy(), prior_cov=np.diag(spread ** 2)
    )


def default_spread(initial_coefficients, fraction: float = 0.10,
                   floor: float = 1e-3) -> np.ndarray:
    """Default prior spread: a fraction of each coefficient magnitude, floored."""
    return np.maximum(fraction * np.abs(np.asarray(initial_coefficients, float)), floor)


def forecast_ensemble(ensemble: EnsembleState, basis: MonomialBasis,
                      batch: list[tuple[TrackSeries, int]], horizon_hours: float,
                      substeps: int = DEFAULT_SUBSTEPS, scales: Scales | None = None,
                      _forcings=None) -> np.ndarray:
    """Member-by-window endpoint forecasts Y (E x W), in m/s.

    Each member's drift is integrated (RK4, no diffusion) from the
    observed intensity at the window start, under the window's
    time-varying forcings.
    """
    scales = scales or Scales()
    series_list = [sw[0] for sw in batch]
    forcings = _forcings or [forcing_arrays(s) for s in series_list]
    wins = [(i, start) for i, (_, start) in enumerate(batch)]
    n = horizon_steps(horizon_hours)
    wb = window_batch(forcings, wins, n, scales)
    E, k = ensemble.members.shape
    W = len(wb)
    exps = basis.exponent_array()
    coeffs = np.repeat(ensemble.members, W, axis=0)          # (E*W, k)
    traj = _kernels.rollout_deterministic(
        exps, coeffs,
        np.tile(wb.v0_nd, E),
        np.tile(wb.z, (E, 1)), np.tile(wb.vp_nd, (E, 1)),
        np.tile(wb.chi_nd, (E, 1)), np.tile(wb.s_nd, (E, 1)),
        substeps, v_scale=scales.v,
    )
    return traj[:, -1].reshape(E, W) * scales.v


def kalman_update(ensemble: EnsembleState, predictions: np.ndarray,
                  y_obs: np.ndarray, obs_noise_std: float,
                  seed: int = 0) -> EnsembleState:
    """Perturbed-observation ensemble Kalman update of the coefficients.

    ``predictions`` is the (E x W) forecast matrix in m/s and ``y_obs``
    the W observed intensities.  Every member is updated against its own
    noisy copy of the observations; with ``obs_noise_std=0`` the update is
    deterministic and fails only if the innovation covariance is singular.
    """
    X = ensemble.members
    E, k = X.shape
    Y = np.asarray(predictions, dtype=float)
    y = np.asarray(y_obs, dtype=float)
    if Y.shape[0] != E or Y.shape[1] != y.shape[0]:
        raise ValidationError(f"prediction matrix {Y.shape} does not match E={E}, W={y.shape[0]}")
    xa = X - X.mean(axis=0)
    ya = Y - Y.mean(axis=0)
    pxy = xa.T @ ya / (E - 1)                        # (k, W)
    pyy = ya.T @ ya / (E - 1)                        # (W, W)
    pyy[np.diag_indices_from(pyy)] += obs_noise_std ** 2
    try:
        gain = np.linalg.solve(pyy.T, pxy.T).T       # (k, W)
    except np.linalg.LinAlgError:
        raise NumericsError(
            "singular innovation covariance (zero obs noise with rank-deficient spread)"
        ) from None
    if obs_noise_std > 0:
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))
        nu = obs_noise_std * rng.standard_normal((E, y.size))
    else:
        nu = np.zeros((E, y.size))
    innovations = y[None, :] + nu - Y                # (E, W)
    return EnsembleState(
        members=X + innovations @ gain.T,
        prior_mean=ensemble.prior_mean,
        prior_cov=ensemble.prior_cov,
    )


@dataclass
class EpochLog:
    epoch: int
    horizon_hours: int
    n_windows: int
    mean_abs_innovation: float   # m/s, against the ensemble-mean forecast
    ensemble_spread: float       # per-coordinate std, averaged


def train(tracks: list[TrackSeries], basis: MonomialBasis, initial_coefficients,
          schedule: TrainingSchedule, seed: int = 0,
          ensemble_size: int = DEFAULT_ENSEMBLE_SIZE, spread_std=None,
          substeps: int = DEFAULT_SUBSTEPS,
          scales: Scales | None = None) -> tuple[IntensityModel, list[EpochLog]]:
    """Epoch-wise EnKF training over growing horizons; returns the mean model.

    Within an epoch the valid windows are visited once in a seeded
    shuffled order, in batches of ``schedule.batch_size`` (the final
    partial batch included).  Only the posterior mean is kept; the
    stochastic component is calibrated separately.
    """
    if not tracks:
        raise ValidationError("no training tracks")
    scales = scales or Scales()
    if spread_std is None:
        spread_std = default_spread(initial_coefficients)
    ensemble = init_ensemble(initial_coefficients, spread_std, ensemble_size, seed)
    forcings = [forcing_arrays(s) for s in tracks]
    exps = basis.exponent_array()
    logs: list[EpochLog] = []
    for epoch, horizon in enumerate(schedule.horizons_hours):
        n = horizon_steps(horizon)
        wins = enumerate_windows(tracks, n)
        if not wins:
            raise ValidationError(f"no valid windows at horizon {horizon} h")
        order = np.random.default_rng(
            np.random.SeedSequence(seed, spawn_key=(2, epoch))
        ).permutation(len(wins))
        abs_innov_sum = 0.0
        for bi, lo in enumerate(range(0, len(order), schedule.batch_size)):
            chosen = [wins[j] for j in order[lo : lo + schedule.batch_size]]
            wb = window_batch(forcings, chosen, n, scales)
            E = ensemble.size
            W = len(wb)
            traj = _kernels.rollout_deterministic(
                exps, np.repeat(ensemble.members, W, axis=0),
                np.tile(wb.v0_nd, E),
                np.tile(wb.z, (E, 1)), np.tile(wb.vp_nd, (E, 1)),
                np.tile(wb.chi_nd, (E, 1)), np.tile(wb.s_nd, (E, 1)),
                substeps, v_scale=scales.v,
            )
            Y = traj[:, -1].reshape(E, W) * scales.v
            abs_innov_sum += float(np.abs(wb.v_end - Y.mean(axis=0)).sum())
            ensemble = kalman_update(
                ensemble, Y, wb.v_end, schedule.obs_noise_std,
                seed=_batch_seed(seed, epoch, bi),
            )
        logs.append(
            EpochLog(
                epoch=epoch,
                horizon_hours=int(horizon),
                n_windows=len(wins),
                mean_abs_innovation=abs_innov_sum / len(wins),
                ensemble_spread=ensemble.spread(),
            )
        )
    tuned = IntensityModel(basis=basis, coefficients=ensemble.mean(), scales=scales)
    return tuned, logs


def _batch_seed(seed: int, epoch: int, batch: int) -> int:
    # stable scalar seed for the per-batch observation perturbations
    return int(np.random.SeedSequence(seed, spawn_key=(3, epoch, batch)).generate_state(1)[0])

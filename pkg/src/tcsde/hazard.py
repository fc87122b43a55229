"""Climatological and hazard statistics over observed or simulated storms.

Conventions: power dissipation integrates the cubed intensity by
left-endpoint quadrature at the native 6-hour cadence; distances to
cities use the haversine great-circle formula; densities are Gaussian
KDEs with Scott's bandwidth; divergences are reported in bits; the total
variation distance uses the half-L1 integral convention (a pointwise
supremum variant is available behind a flag).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import gaussian_kde

from .errors import ValidationError
from .tracks import TrackSeries, forcing_arrays
from .windows import enumerate_windows, horizon_steps, window_batch

STEP_SECONDS = 21600.0        # 6 h
EARTH_RADIUS_KM = 6371.0
REPORTING_QUANTUM = 2.57      # m/s
DENSITY_FLOOR = 1e-12


@dataclass
class PositionedSeries:
    """Intensity series with per-step positions, for spatial statistics."""

    storm_id: str
    member_id: int
    times: np.ndarray
    v: np.ndarray        # m/s
    lat: np.ndarray
    lon: np.ndarray

    def __post_init__(self):
        n = self.v.shape[0]
        if not (self.times.shape[0] == self.lat.shape[0] == self.lon.shape[0] == n):
            raise ValidationError("positioned series arrays differ in length")


def attach_positions(series, track: TrackSeries) -> PositionedSeries:
    """Join an intensity series to its source track's positions by time."""
    f = forcing_arrays(track)
    if series.times.shape != f.times.shape or (series.times != f.times).any():
        raise ValidationError(
            f"series times do not match track {track.storm_id}"
        )
    return PositionedSeries(
        storm_id=series.storm_id, member_id=series.member_id,
        times=series.times, v=series.v, lat=f.lat, lon=f.lon,
    )


# ---------------------------------------------------------------- power dissipation

def pdi(series) -> float:
    """Lifetime integral of intensity cubed, in m^3/s^3 * s."""
    v = np.asarray(series.v, dtype=float)
    if v.size == 0:
        raise ValidationError("empty series")
    if v.size == 1:
        return 0.0
    return float(np.sum(v[:-1] ** 3) * STEP_SECONDS)


def gridded_pdi_climatology(series_set: list[PositionedSeries], cell_deg: float,
                            years: float) -> dict[tuple[int, int], float]:
    """Annual-mean PDI per (lat, lon) cell of ``cell_deg`` width.

    Cells are anchored at integer multiples of the cell width; each
    6-hour segment contributes at its starting position.  Keys are
    (floor(lat/cell), floor(lon/cell)).
    """
    if years <= 0:
        raise ValidationError("years must be positive")
    grid: dict[tuple[int, int], float] = {}
    for s in series_set:
        contrib = s.v[:-1] ** 3 * STEP_SECONDS
        ilat = np.floor(s.lat[:-1] / cell_deg).astype(int)
        ilon = np.floor(s.lon[:-1] / cell_deg).astype(int)
        for i, j, c in zip(ilat, ilon, contrib):
            grid[(int(i), int(j))] = grid.get((int(i), int(j)), 0.0) + float(c)
    return {key: val / years for key, val in grid.items()}


# ---------------------------------------------------------------- lifetime maxima

def lmi(series) -> float:
    """Lifetime maximum intensity, m/s."""
    v = np.asarray(series.v, dtype=float)
    if v.size == 0:
        raise ValidationError("empty series")
    return float(v.max())


@dataclass
class LmiDistribution:
    bin_centers: np.ndarray
    masses: np.ndarray             # normalized histogram of all storms
    band_low: np.ndarray | None    # 5th percentile across subsample draws
    band_high: np.ndarray | None   # 95th percentile


def quantized_histogram(samples, bin_width: float = REPORTING_QUANTUM,
                        centers: np.ndarray | None = None):
    """Normalized histogram on bins centered at multiples of ``bin_width``."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValidationError("no samples to histogram")
    if centers is None:
        lo = np.floor(x.min() / bin_width)
        hi = np.ceil(x.max() / bin_width)
        centers = np.arange(lo, hi + 1) * bin_width
    edges = np.concatenate([centers - bin_width / 2, [centers[-1] + bin_width / 2]])
    counts, _ = np.histogram(x, bins=edges)
    return centers, counts / counts.sum()


def lmi_distribution(series_set, subsample_to: int | None = None,
                     n_draws: int = 1000, seed: int = 0,
                     bin_width: float = REPORTING_QUANTUM) -> LmiDistribution:
    """LMI histogram with optional subsampling uncertainty bands.

    Bands come from repeated without-replacement draws of
    ``subsample_to`` storms, mimicking comparison against a shorter
    observational record.
    """
    maxima = np.array([lmi(s) for s in series_set])
    centers, masses = quantized_histogram(maxima, bin_width)
    band_low = band_high = None
    if subsample_to is not None:
        if not 1 <= subsample_to <= maxima.size:
            raise ValidationError("subsample_to outside [1, n_storms]")
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(13,)))
        draws = np.empty((n_draws, centers.size))
        for d in range(n_draws):
            pick = rng.choice(maxima.size, size=subsample_to, replace=False)
            _, draws[d] = quantized_histogram(maxima[pick], bin_width, centers=centers)
        band_low = np.quantile(draws, 0.05, axis=0)
        band_high = np.quantile(draws, 0.95, axis=0)
    return LmiDistribution(centers, masses, band_low, band_high)


# ---------------------------------------------------------------- return periods

def return_periods(storm_maxima, n_years: float) -> list[tuple[float, float]]:
    """Plotting-position annual exceedance: rank i of n gets i/(n+1) * n/m.

    Returns (intensity, return period in years) pairs, strongest first.
    """
    maxima = np.sort(np.asarray(storm_maxima, dtype=float))[::-1]
    if maxima.size == 0:
        raise ValidationError("no storm maxima")
    if n_years <= 0:
        raise ValidationError("n_years must be positive")
    n = maxima.size
    out = []
    for i, v in enumerate(maxima, start=1):
        p = (i / (n + 1.0)) * (n / n_years)
        out.append((float(v), 1.0 / p))
    return out


# ---------------------------------------------------------------- landfall statistics

def haversine_km(lat1, lon1, lat2, lon2):
    """Great-circle distance in km; accepts arrays."""
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dphi = p2 - p1
    dlam = np.radians(lon2) - np.radians(lon1)
    a = np.sin(dphi / 2) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dlam / 2) ** 2
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(a))


@dataclass(frozen=True)
class CityRegion:
    name: str
    lat: float
    lon: float
    radius_km: float = 150.0


@dataclass
class LandfallDensity:
    samples: np.ndarray
    kde: object | None      # gaussian_kde over the samples, None if too few


def landfall_samples(series_set: list[PositionedSeries], city: CityRegion) -> np.ndarray:
    """All intensity values recorded within the city radius."""
    out = []
    for s in series_set:
        d = haversine_km(s.lat, s.lon, city.lat, city.lon)
        out.append(s.v[d <= city.radius_km])
    return np.concatenate(out) if out else np.array([])


def landfall_distribution(series_set: list[PositionedSeries],
                          city: CityRegion) -> LandfallDensity:
    """In-radius intensity samples with a Scott-bandwidth Gaussian KDE."""
    samples = landfall_samples(series_set, city)
    if samples.size == 0:
        warnings.warn(f"no storms within {city.radius_km} km of {city.name}")
        return LandfallDensity(samples=samples, kde=None)
    if samples.size < 2 or np.ptp(samples) == 0:
        warnings.warn(f"too few distinct samples near {city.name} for a density")
        return LandfallDensity(samples=samples, kde=None)
    return LandfallDensity(samples=samples, kde=gaussian_kde(samples))


def storm_maxima_in_region(series_set: list[PositionedSeries],
                           city: CityRegion) -> np.ndarray:
    """Per-storm maximum intensity while inside the city radius."""
    maxima = []
    for s in series_set:
        d = haversine_km(s.lat, s.lon, city.lat, city.lon)
        inside = s.v[d <= city.radius_km]
        if inside.size:
            maxima.append(float(inside.max()))
    return np.array(maxima)


# ---------------------------------------------------------------- divergences

def entropy(p_masses) -> float:
    """Shannon entropy of a normalized histogram, in bits."""
    p = np.asarray(p_masses, dtype=float)
    _check_masses(p, "histogram")
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


def _check_masses(p: np.ndarray, what: str) -> None:
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-8:
        raise ValidationError(f"{what} is not a normalized mass vector")


def kl_divergence(obs_masses, synth, bin_centers=None,
                  bin_width: float = REPORTING_QUANTUM) -> float:
    """KL divergence (bits) of an observed histogram from a synthetic density.

    ``synth`` is either a mass vector aligned with the histogram bins or
    a callable density, discretized as density(center) * bin_width.  The
    synthetic mass is floored at 1e-12 (with a warning when the floor
    binds) so empty model bins give a large but finite divergence.
    """
    p = np.asarray(obs_masses, dtype=float)
    _check_masses(p, "observed histogram")
    if callable(synth):
        if bin_centers is None:
            raise ValidationError("bin_centers required when synth is a density")
        q = np.asarray(synth(np.asarray(bin_centers, dtype=float)), dtype=float) * bin_width
    else:
        q = np.asarray(synth, dtype=float)
    if q.shape != p.shape:
        raise ValidationError("histogram and density grids differ in length")
    if np.any((q < DENSITY_FLOOR) & (p > 0)):
        warnings.warn("synthetic density floored at 1e-12 under observed mass")
    q = np.maximum(q, DENSITY_FLOOR)
    mask = p > 0
    return float((p[mask] * np.log2(p[mask] / q[mask])).sum())


def tv_distance(samples_a, samples_b, grid=None, mode: str = "l1") -> float:
    """Total variation distance between KDE densities of two sample sets.

    ``mode="l1"`` (default) integrates half the absolute density
    difference; ``mode="sup"`` reports half the largest pointwise
    difference instead.
    """
    a = np.asarray(samples_a, dtype=float)
    b = np.asarray(samples_b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise ValidationError("need at least 2 samples on each side")
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise ValidationError("degenerate (constant) sample set")
    kde_a, kde_b = gaussian_kde(a), gaussian_kde(b)
    if grid is None:
        bw = max(np.sqrt(kde_a.covariance[0, 0]), np.sqrt(kde_b.covariance[0, 0]))
        lo = min(a.min(), b.min()) - 4 * bw
        hi = max(a.max(), b.max()) + 4 * bw
        grid = np.linspace(lo, hi, 2001)
    else:
        grid = np.asarray(grid, dtype=float)
    pa, pb = kde_a(grid), kde_b(grid)
    if mode == "l1":
        return float(0.5 * np.trapezoid(np.abs(pa - pb), grid))
    if mode == "sup":
        return float(0.5 * np.max(np.abs(pa - pb)))
    raise ValidationError(f"unknown tv mode {mode!r}")


def reflection_asymmetry(pred, obs, grid_n: int = 81) -> float:
    """Symmetry diagnostic for predicted-vs-observed scatter.

    Builds a 2-d Gaussian KDE of the (predicted, observed) pairs and
    returns the half-L1 distance between that density and its reflection
    across the diagonal; 0 means statistically indistinguishable axes.
    """
    x = np.asarray(pred, dtype=float)
    y = np.asarray(obs, dtype=float)
    if x.size != y.size or x.size < 3:
        raise ValidationError("need matched predicted/observed samples")
    kde = gaussian_kde(np.vstack([x, y]))
    lo = min(x.min(), y.min())
    hi = max(x.max(), y.max())
    pad = 0.1 * (hi - lo if hi > lo else 1.0)
    axis = np.linspace(lo - pad, hi + pad, grid_n)
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    pts = np.vstack([gx.ravel(), gy.ravel()])
    dens = kde(pts).reshape(grid_n, grid_n)
    step = axis[1] - axis[0]
    return float(0.5 * np.abs(dens - dens.T).sum() * step * step)


# ---------------------------------------------------------------- baselines

def persistence_baseline(tracks: list[TrackSeries], horizon_hours: float):
    """Constant-intensity forecasts: (predicted, observed) over valid windows."""
    from .model import Scales

    scales = Scales()
    n = horizon_steps(horizon_hours)
    wins = enumerate_windows(tracks, n)
    if not wins:
        raise ValidationError(f"no valid windows at horizon {horizon_hours} h")
    forcings = [forcing_arrays(s) for s in tracks]
    wb = window_batch(forcings, wins, n, scales)
    return wb.v0_nd * scales.v, wb.v_end


@dataclass
class HazardSummary:
    """Per-region aggregate bundle produced by the hazard stage."""

    region: CityRegion
    mean_annual_pdi: float
    lmi_samples: np.ndarray
    landfall_samples: np.ndarray
    exceedance_table: list[tuple[float, float]] = field(default_factory=list)

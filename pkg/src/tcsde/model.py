"""Intensity-model container, the published 10-term model, and JSON persistence.

Coefficients carry units of inverse 6-hour steps; the diffusion law is
``sigma'(v') = sigma_slope * v' + sigma_intercept`` in nondimensional
intensity, left unset (``None``) until a calibration pass supplies it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .basis import MonomialBasis, drift as _drift
from .errors import ValidationError

MODEL_FILE_VERSION = 1


@dataclass(frozen=True)
class Scales:
    """Characteristic scales used to nondimensionalize inputs."""

    v: float = 50.0       # m/s
    vp: float = 50.0      # m/s
    chi: float = 2.0      # J/(kg K)
    shear: float = 10.0   # m/s

    def __post_init__(self):
        if min(self.v, self.vp, self.chi, self.shear) <= 0:
            raise ValidationError("scales must be strictly positive")


@dataclass
class IntensityModel:
    """Sparse polynomial drift plus optional linear diffusion law."""

    basis: MonomialBasis
    coefficients: np.ndarray            # per-term, units of 1/(6 h)
    sigma_slope: float | None = None    # dimensionless
    sigma_intercept: float | None = None  # nondimensional intensity
    scales: Scales = field(default_factory=Scales)

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if self.coefficients.ndim != 1 or len(self.coefficients) != len(self.basis):
            raise ValidationError(
                f"coefficient length {self.coefficients.shape} does not match "
                f"basis length {len(self.basis)}"
            )
        if (self.sigma_slope is None) != (self.sigma_intercept is None):
            raise ValidationError("sigma_slope and sigma_intercept must be set together")

    def drift(self, state) -> float:
        """Deterministic tendency dv'/dtau at a nondimensional state."""
        return _drift(self, state)

    def sigma_nd(self, v_nd: float) -> float:
        """Diffusion amplitude sigma'(v') of the calibrated noise model."""
        if self.sigma_slope is None:
            raise ValidationError("model has no calibrated stochastic component")
        return self.sigma_slope * v_nd + self.sigma_intercept

    def with_sigma(self, slope: float, intercept_nd: float) -> "IntensityModel":
        return IntensityModel(
            basis=self.basis,
            coefficients=self.coefficients.copy(),
            sigma_slope=float(slope),
            sigma_intercept=float(intercept_nd),
            scales=self.scales,
        )

    def term_table(self) -> list[tuple[str, float]]:
        """(rendered term, coefficient) pairs, for reports."""
        return [
            (self.basis.render_term(j), float(c))
            for j, c in enumerate(self.coefficients)
        ]


# Published model: exponent tuples over (v', alpha, Vp', chi', S') with
# fitted coefficients per 6 h, stored in graded-lex term order.
PAPER_COEFFICIENTS: dict[tuple[int, int, int, int, int], float] = {
    (1, 0, 0, 0, 0): -7.06e-2,   # v'
    (0, 0, 0, 2, 0): -7.40e-3,   # chi'^2
    (0, 1, 1, 0, 0): 5.02e-2,    # alpha Vp'
    (0, 0, 0, 3, 0): 1.20e-3,    # chi'^3
    (0, 0, 2, 0, 1): -1.16e-2,   # Vp'^2 S'
    (0, 0, 3, 0, 0): 1.26e-2,    # Vp'^3
    (0, 1, 2, 0, 0): -4.70e-2,   # alpha Vp'^2
    (1, 1, 1, 0, 0): 1.53e-1,    # v' alpha Vp'
    (1, 2, 0, 0, 0): -6.70e-2,   # v' alpha^2
    (3, 0, 0, 0, 0): -5.94e-2,   # v'^3
}

PAPER_SIGMA_SLOPE = 0.110
PAPER_SIGMA_INTERCEPT_ND = 4.58e-3   # 0.229 m/s / 50 m/s


def builtin_paper_model() -> IntensityModel:
    """The published 10-term model with its calibrated diffusion law."""
    terms = tuple(sorted(PAPER_COEFFICIENTS, key=lambda t: (sum(t), t)))
    coeffs = np.array([PAPER_COEFFICIENTS[t] for t in terms])
    return IntensityModel(
        basis=MonomialBasis(terms, max_degree=3),
        coefficients=coeffs,
        sigma_slope=PAPER_SIGMA_SLOPE,
        sigma_intercept=PAPER_SIGMA_INTERCEPT_ND,
    )


def save_model(model: IntensityModel, path) -> None:
    """Write a model as JSON; floats round-trip exactly through repr."""
    payload = {
        "version": MODEL_FILE_VERSION,
        "basis": [list(t) for t in model.basis.terms],
        "coefficients": [float(c) for c in model.coefficients],
        "sigma_slope": model.sigma_slope,
        "sigma_intercept": model.sigma_intercept,
        "scales": {
            "v": model.scales.v,
            "vp": model.scales.vp,
            "chi": model.scales.chi,
            "shear": model.scales.shear,
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_model(path) -> IntensityModel:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    version = payload.get("version")
    if version != MODEL_FILE_VERSION:
        raise ValidationError(
            f"{path}: model file version {version!r}, expected {MODEL_FILE_VERSION}"
        )
    terms = tuple(tuple(int(k) for k in t) for t in payload["basis"])
    coeffs = np.asarray(payload["coefficients"], dtype=float)
    if len(coeffs) != len(terms):
        raise ValidationError(
            f"{path}: {len(coeffs)} coefficients for {len(terms)}-term basis"
        )
    max_degree = max((sum(t) for t in terms), default=0)
    scales = payload.get("scales", {})
    return IntensityModel(
        basis=MonomialBasis(terms, max_degree=max_degree),
        coefficients=coeffs,
        sigma_slope=payload.get("sigma_slope"),
        sigma_intercept=payload.get("sigma_intercept"),
        scales=Scales(
            v=float(scales.get("v", 50.0)),
            vp=float(scales.get("vp", 50.0)),
            chi=float(scales.get("chi", 2.0)),
            shear=float(scales.get("shear", 10.0)),
        ),
    )

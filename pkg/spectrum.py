"""
Bath coupling spectra.

Units: hbar = 1 and omega_a = 1, so frequencies, energies and rates are in
omega_a and times in 1/omega_a. G_0 carries units of rate (its integral over
frequency is a rate squared); temperature enters through alpha = beta*omega_a.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from errors import DomainError

logger = logging.getLogger(__name__)

# ---------------------------- Constants ------------------------------
# Frequency integrals over G_T skip |omega| < IR_CUTOFF; at finite
# temperature G_T ~ G_0(0+)/(beta*|omega|) there.
IR_CUTOFF = 1e-6
DEFAULT_COVERAGE = 5.0
PEAK_REACH = 40.0           # peak region omega0 +- PEAK_REACH * Gamma


@dataclass(frozen=True)
class InverseTemperature:
    alpha: float

    def __post_init__(self):
        if math.isnan(self.alpha) or self.alpha < 0:
            raise DomainError(f"alpha must be in [0, inf], got {self.alpha}")

    @classmethod
    def from_alpha(cls, alpha: float) -> "InverseTemperature":
        return cls(float(alpha))

    @property
    def beta(self) -> float:
        return self.alpha

    @property
    def is_zero(self) -> bool:
        """True for T = 0."""
        return math.isinf(self.alpha)


ZERO_TEMPERATURE = InverseTemperature(math.inf)


@dataclass(frozen=True)
class BathSpectrumSpec:
    """Lorentzian G_0(w) = eta_max^2 Gamma^2 / (Gamma^2 + (w - omega0)^2) on `band`."""

    eta_max: float
    omega0: float
    gamma: float
    omega_a: float = 1.0
    band: Tuple[float, float] = (0.0, math.inf)

    def __post_init__(self):
        if self.eta_max < 0:
            raise DomainError(f"eta_max must be >= 0, got {self.eta_max}")
        if self.gamma <= 0:
            raise DomainError(f"gamma must be > 0, got {self.gamma}")
        if self.omega0 <= 0:
            raise DomainError(f"omega0 must be > 0, got {self.omega0}")
        if self.omega_a != 1.0:
            raise DomainError("internal units require omega_a = 1")
        lo, hi = self.band
        if lo < 0 or hi <= lo:
            raise DomainError(f"invalid spectral band {self.band}")

    @classmethod
    def from_memory_time(
        cls,
        eta_max_sq: float,
        omega0: float,
        t_c: float,
        band: Optional[Tuple[float, float]] = None,
    ) -> "BathSpectrumSpec":
        if t_c <= 0:
            raise DomainError(f"t_c must be > 0, got {t_c}")
        if eta_max_sq < 0:
            raise DomainError(f"eta_max^2 must be >= 0, got {eta_max_sq}")
        return cls(
            eta_max=math.sqrt(eta_max_sq),
            omega0=omega0,
            gamma=1.0 / t_c,
            band=band if band is not None else (0.0, math.inf),
        )

    @property
    def eta_max_sq(self) -> float:
        return self.eta_max ** 2

    @property
    def t_c(self) -> float:
        return 1.0 / self.gamma

    def restricted(self, lo: float, hi: float) -> "BathSpectrumSpec":
        return replace(self, band=(max(lo, self.band[0]), min(hi, self.band[1])))

    def scaled(self, factor: float) -> "BathSpectrumSpec":
        """Same shape, eta_max^2 multiplied by `factor`."""
        return replace(self, eta_max=self.eta_max * math.sqrt(factor))


def _like(values: np.ndarray, template):
    return float(values) if np.ndim(template) == 0 else values


# ---------------------------- Spectra --------------------------------
def thermal_occupation(omega, beta: InverseTemperature):
    """Bose occupation 1/(exp(beta*omega) - 1); exact zeros for omega > 0 at T = 0."""
    w = np.asarray(omega, dtype=float)
    if np.any(w == 0):
        raise DomainError("thermal occupation has a pole at omega = 0")
    if beta.is_zero:
        return _like(np.where(w > 0, 0.0, -1.0), omega)
    if beta.beta == 0:
        raise DomainError("thermal occupation diverges at alpha = 0")
    x = beta.beta * w
    with np.errstate(over="ignore"):
        n = 1.0 / np.expm1(x)
    return _like(n, omega)


def g0(omega, spec: BathSpectrumSpec):
    w = np.asarray(omega, dtype=float)
    lo, hi = spec.band
    inside = (w > lo) & (w <= hi) & (w > 0)
    value = spec.eta_max_sq * spec.gamma ** 2 / (spec.gamma ** 2 + (w - spec.omega0) ** 2)
    return _like(np.where(inside, value, 0.0), omega)


def gT(omega, spec: BathSpectrumSpec, beta: InverseTemperature):
    """G_T(w) = G_0(w)(n(w)+1) + G_0(-w)n(-w) on the whole real line."""
    w = np.asarray(omega, dtype=float)
    if np.any(w == 0):
        raise DomainError("G_T is evaluated away from omega = 0")
    aw = np.abs(w)
    g = np.asarray(g0(aw, spec))
    n = np.asarray(thermal_occupation(aw, beta))
    return _like(np.where(w > 0, g * (n + 1.0), g * n), omega)


def lorentzian_weight(spec: BathSpectrumSpec, lo: float = 0.0, hi: float = math.inf) -> float:
    """Closed-form integral of G_0 over [lo, hi] intersected with the band."""
    a = max(lo, spec.band[0], 0.0)
    b = min(hi, spec.band[1])
    if b <= a:
        return 0.0
    g = spec.gamma
    upper = math.pi / 2 if math.isinf(b) else math.atan((b - spec.omega0) / g)
    return spec.eta_max_sq * g * (upper - math.atan((a - spec.omega0) / g))


# ---------------------------- Discretization -------------------------
@dataclass(frozen=True, eq=False)
class DiscreteBathModel:
    omegas: np.ndarray
    etas: np.ndarray
    spacing: float
    window: Tuple[float, float]
    spec: BathSpectrumSpec = field(repr=False)

    @property
    def n_modes(self) -> int:
        return int(self.omegas.size)

    @property
    def modes(self) -> List[Tuple[float, float]]:
        return list(zip(self.omegas.tolist(), self.etas.tolist()))

    @property
    def weight_sum(self) -> float:
        return float(np.sum(self.etas ** 2))

    def matching_spec(self) -> BathSpectrumSpec:
        """Continuum spectrum whose weight the mode sum reproduces (midpoint cells)."""
        lo, hi = self.window
        half = self.spacing / 2
        return self.spec.restricted(max(lo - half, 0.0), hi + half)


def discretize(spec: BathSpectrumSpec, n_modes: int, coverage: float = DEFAULT_COVERAGE) -> DiscreteBathModel:
    if n_modes < 2:
        raise DomainError(f"n_modes must be >= 2, got {n_modes}")
    if coverage <= 0:
        raise DomainError(f"coverage must be > 0, got {coverage}")

    hi = spec.omega0 + coverage * spec.gamma
    lo = spec.omega0 - coverage * spec.gamma
    if lo <= 0:
        spacing = hi / n_modes
        logger.warning(
            f"⚠️ window lower edge {lo:.4g} <= 0, clamped to the grid spacing {spacing:.4g}"
        )
        lo = spacing
        omegas = np.linspace(lo, hi, n_modes)
    else:
        omegas = np.linspace(lo, hi, n_modes)
        spacing = (hi - lo) / (n_modes - 1)

    etas = np.sqrt(np.asarray(g0(omegas, spec)) * spacing)
    model = DiscreteBathModel(omegas=omegas, etas=etas, spacing=spacing, window=(lo, hi), spec=spec)
    logger.info(
        f"discretized {n_modes} modes on [{lo:.4g}, {hi:.4g}], sum eta_k^2 = {model.weight_sum:.6g}"
    )
    return model


def frequency_breakpoints(spec: BathSpectrumSpec, extra=()) -> List[float]:
    """Split points for adaptive quadrature over the positive band, IR cutoff included."""
    lo = max(IR_CUTOFF, spec.band[0])
    hi = spec.band[1]
    g = spec.gamma
    marks = [1e-4, 1e-2, 0.5, spec.omega_a, spec.omega0 - g, spec.omega0, spec.omega0 + g,
             spec.omega0 + PEAK_REACH * g, *extra]
    inner = sorted({m for m in marks if lo < m < hi})
    return [lo, *inner, hi]

"""
Entropy distance of the qubit from a reference state, its rate, and the
cooling condition for a single measurement interval.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Union

import numpy as np
from scipy.optimize import bisect
from scipy.special import rel_entr

from equilibrium import corrected_purity
from errors import DomainError
from master_equation import RANGE_SLACK, QubitPopulations, SimulationTrace, gibbs_populations
from rates import SincQuadrature, sinc2_kernel, time_blocks
from spectrum import BathSpectrumSpec, InverseTemperature, thermal_occupation

logger = logging.getLogger(__name__)

# ---------------------------- Config ---------------------------------
SCAN_POINTS = 2000
SCAN_START = 1e-2
SCAN_END_TC = 20.0
BISECT_XTOL = 1e-8
POP_FLOOR = 1e-12            # rho_ee leaving a boundary is evaluated this far inside

Populations = Union[QubitPopulations, float]


def _rho_ee(p: Populations) -> float:
    return p.rho_ee if isinstance(p, QubitPopulations) else float(p)


# ---------------------------- Entropy --------------------------------
def relative_entropy(p: Populations, p0: Populations):
    """S(p || p0) in nats for diagonal qubit states; p may be an array of rho_ee values."""
    q = _rho_ee(p0)
    if not 0 < q < 1:
        raise DomainError(f"reference rho_ee must be strictly inside (0, 1), got {q}")
    x = np.clip(np.asarray(p.rho_ee if isinstance(p, QubitPopulations) else p, dtype=float), 0.0, 1.0)
    out = rel_entr(x, q) + rel_entr(1.0 - x, 1.0 - q)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class EntropyTrace:
    times: np.ndarray
    relative_entropy: np.ndarray
    sigma: np.ndarray
    reference: float

    COLUMNS = ("t [1/omega_a]", "S [nats]", "sigma [nats*omega_a]")

    def to_rows(self) -> np.ndarray:
        return np.column_stack([self.times, self.relative_entropy, self.sigma])


def sigma(trace: SimulationTrace, p0: Populations) -> EntropyTrace:
    """sigma = -dS/dt = -rho_ee_dot ln[rho_ee (1 - p0) / ((1 - rho_ee) p0)]."""
    q = _rho_ee(p0)
    rho = np.asarray(trace.rho_ee, dtype=float)
    rho_dot = np.asarray(trace.rho_ee_dot, dtype=float)
    entropy = relative_entropy(rho, q)

    if np.any(rho < -RANGE_SLACK) or np.any(rho > 1 + RANGE_SLACK):
        raise DomainError(f"rho_ee outside [0, 1]: range [{rho.min():.4g}, {rho.max():.4g}]")
    moving = rho_dot != 0
    r = np.clip(rho[moving], POP_FLOOR, 1.0 - POP_FLOOR)
    out = np.zeros_like(rho)
    out[moving] = -rho_dot[moving] * (np.log(r / (1 - r)) - math.log(q / (1 - q)))
    return EntropyTrace(times=np.asarray(trace.times), relative_entropy=np.asarray(entropy), sigma=out, reference=q)


def reference_populations(spec: BathSpectrumSpec, beta: InverseTemperature) -> QubitPopulations:
    """Gibbs state at finite temperature, coupled ground-state populations at T = 0."""
    if not beta.is_zero:
        return gibbs_populations(beta)
    p_eq = corrected_purity(spec, beta)
    return QubitPopulations((1.0 + p_eq) / 2.0)


# ---------------------------- Cooling --------------------------------
def _cooling_terms(beta: InverseTemperature):
    n_a = 0.0 if beta.is_zero else float(thermal_occupation(1.0, beta))
    # sin^2(x t/2)/x^2 = sinc2_kernel / 4
    return [
        (1.0, lambda g, n: 0.25 * g * (n_a - n)),
        (-1.0, lambda g, n: -0.25 * g * (n_a + n + 1.0)),
    ]


def _margins(spec: BathSpectrumSpec, beta: InverseTemperature, times: np.ndarray) -> np.ndarray:
    out = np.zeros(times.size)
    terms = _cooling_terms(beta)
    for sl, quad_rule in time_blocks(times, spec, beta):
        out[sl] = quad_rule.integrate(times[sl], terms, sinc2_kernel)
    return out


def cooling_condition(spec: BathSpectrumSpec, beta: InverseTemperature, t: float):
    """(margin, margin > 0) for a measurement after time t; margin = LHS - RHS."""
    if t <= 0:
        raise DomainError(f"t must be > 0, got {t}")
    if beta.beta == 0:
        raise DomainError("cooling condition needs alpha > 0")
    rule = SincQuadrature(spec, beta, t, t)
    margin = float(rule.integrate(t, _cooling_terms(beta), sinc2_kernel)[0])
    return margin, margin > 0


def high_t_bound(beta, omega_a: float = 1.0) -> float:
    """Omega with beta*Omega = 1 + [beta*omega_a + sqrt(4 + 12 beta*omega_a + (beta*omega_a)^2)]/2."""
    b = beta.beta if isinstance(beta, InverseTemperature) else float(beta)
    if not 0 < b < math.inf:
        raise DomainError(f"beta must be finite and > 0, got {b}")
    x = b * omega_a
    return (1.0 + (x + math.sqrt(4.0 + 12.0 * x + x * x)) / 2.0) / b


@dataclass(frozen=True, eq=False)
class CoolingScan:
    times: np.ndarray
    margins: np.ndarray
    crossings: np.ndarray

    COLUMNS = ("t [1/omega_a]", "margin [1]", "cooling [bool]")

    @property
    def cooling(self) -> np.ndarray:
        return self.margins > 0

    @property
    def any_cooling(self) -> bool:
        return bool(np.any(self.cooling))

    def to_rows(self) -> np.ndarray:
        return np.column_stack([self.times, self.margins, self.cooling.astype(float)])


def default_scan_grid(spec: BathSpectrumSpec, points: int = SCAN_POINTS) -> np.ndarray:
    return np.geomspace(SCAN_START, SCAN_END_TC * spec.t_c, points)


def cooling_scan(spec: BathSpectrumSpec, beta: InverseTemperature,
                 t_grid: Optional[np.ndarray] = None) -> CoolingScan:
    if beta.beta == 0:
        raise DomainError("cooling condition needs alpha > 0")
    times = default_scan_grid(spec) if t_grid is None else np.asarray(t_grid, dtype=float)
    if np.any(times <= 0) or np.any(np.diff(times) <= 0):
        raise DomainError("scan grid must be positive and strictly increasing")
    margins = _margins(spec, beta, times)

    crossings: List[float] = []
    flips = np.flatnonzero(np.sign(margins[:-1]) * np.sign(margins[1:]) < 0)
    for k in flips:
        root = bisect(lambda t: cooling_condition(spec, beta, t)[0], times[k], times[k + 1], xtol=BISECT_XTOL)
        crossings.append(root)
    logger.info(
        f"cooling scan at alpha={beta.alpha:g}: {int(np.sum(margins > 0))}/{times.size} cooling points, "
        f"{len(crossings)} sign changes"
    )
    return CoolingScan(times=times, margins=margins, crossings=np.asarray(crossings))

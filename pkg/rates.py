"""
Time-dependent relaxation rates after a correlation-erasing measurement.

    R_e(t) = 2 int G_T(w) sin((w - omega_a) t)/(w - omega_a) dw
    R_g(t) = 2 int G_T(w) sin((w + omega_a) t)/(w + omega_a) dw
    J(t)   = int_0^t R(s) ds = int G_T(w) 4 sin^2(x t/2)/x^2 dw,  x = w -+ omega_a

so R -> 2 Rdot0 t for t -> 0 and R -> 2 pi G_T(+-omega_a) for t >> t_c.
The negative-frequency half of G_T is folded onto w > 0, which swaps the
kernel centre: G_T(-w) = G_0(w) n(w) pairs with x = w +- omega_a.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid, quad
from scipy.interpolate import CubicSpline

from errors import DomainError, QuadratureError
from spectrum import (
    IR_CUTOFF,
    PEAK_REACH,
    BathSpectrumSpec,
    InverseTemperature,
    frequency_breakpoints,
    g0,
    gT,
    thermal_occupation,
)

logger = logging.getLogger(__name__)

# ---------------------------- Config ---------------------------------
GL_ORDER = 10
GL_CHECK_ORDER = 6
SINC_PERIODS = 60.0          # window reaches omega_a + SINC_PERIODS * pi / t
QUAD_ABS_TOL = 1e-12
QUAD_REL_TOL = 1e-9          # relative to the Zeno-limit magnitude of the integral
TABLE_STEP = 0.05            # uniform part of the rate table [1/omega_a]
TABLE_GEOMETRIC = (1e-3, 30)  # first nonzero time and number of geometric samples
MARKOV_AFTER_TC = 20.0       # default Markov horizon in units of t_c
TABLE_SLACK = 1e-9           # relative reach past the last table node
CHUNK_ELEMENTS = 2_000_000

WHICH = ("e", "g")


@functools.lru_cache(maxsize=None)
def _legendre(order: int) -> Tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(order)


def _check_which(which: str) -> str:
    if which not in WHICH:
        raise DomainError(f"which must be 'e' or 'g', got {which!r}")
    return which


def _kernel_centers(which: str) -> Tuple[float, float]:
    # (centre paired with G_0 (n+1), centre paired with G_0 n)
    return (1.0, -1.0) if which == "e" else (-1.0, 1.0)


# ---------------------------- Quadrature -----------------------------
def _panel_edges(spec: BathSpectrumSpec, beta: InverseTemperature, t_lo: float, t_hi: float,
                 refine: float) -> np.ndarray:
    lo = max(IR_CUTOFF, spec.band[0])
    cut = max(spec.omega0 + PEAK_REACH * spec.gamma, 1.0 + SINC_PERIODS * math.pi / t_lo)
    hi = min(spec.band[1], cut)
    if hi <= lo:
        return np.array([lo])

    h_osc = math.pi / (8.0 * t_hi)
    finite = not beta.is_zero
    h_thermal = 4.0 / beta.beta if finite else math.inf

    edges = [lo]
    x = lo
    while x < hi:
        h = min(h_osc, 0.25 * max(spec.gamma, abs(x - spec.omega0)))
        if finite:
            h = min(h, 0.5 * x, h_thermal)
        x = min(hi, x + h / refine)
        edges.append(x)
    return np.asarray(edges)


def _nodes(edges: np.ndarray, order: int) -> Tuple[np.ndarray, np.ndarray]:
    if edges.size < 2:
        return np.empty(0), np.empty(0)
    u, wu = _legendre(order)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    x = (mid[:, None] + half[:, None] * u[None, :]).ravel()
    w = (half[:, None] * wu[None, :]).ravel()
    return x, w


def sinc_kernel(x, t):
    """2 sin(x t)/x."""
    return 2.0 * t * np.sinc(x * t / np.pi)


def sinc2_kernel(x, t):
    """4 sin^2(x t/2)/x^2."""
    return (t * np.sinc(x * t / (2 * np.pi))) ** 2


class SincQuadrature:
    """Panel Gauss-Legendre rule for the rate kernels on a block of times [t_lo, t_hi].

    Panels are at most an eighth of the kernel period at t_hi and a quarter of the
    local Lorentzian scale; the window is wide enough for t_lo. A 6-point rule on the
    same panels gives the error estimate.
    """

    def __init__(self, spec: BathSpectrumSpec, beta: InverseTemperature, t_lo: float, t_hi: float,
                 refine: float = 1.0):
        if t_lo <= 0 or t_hi < t_lo:
            raise DomainError(f"invalid time block [{t_lo}, {t_hi}]")
        self.spec = spec
        self.beta = beta
        edges = _panel_edges(spec, beta, t_lo, t_hi, refine)
        self.n_panels = max(edges.size - 1, 0)
        self._rules = [self._sample(*_nodes(edges, order)) for order in (GL_ORDER, GL_CHECK_ORDER)]

    def _sample(self, x: np.ndarray, w: np.ndarray):
        if x.size == 0:
            return x, w, x, x
        return x, w, np.asarray(g0(x, self.spec)), np.asarray(thermal_occupation(x, self.beta))

    def integrate(self, times, terms: Sequence[Tuple[float, Callable]], kernel: Callable) -> np.ndarray:
        """sum over (center, weight) of int kernel(w - center, t) weight(G_0, n) dw, checked.

        `weight` maps the node samples of G_0 and n to the spectral factor of that term.
        """
        t_all = np.atleast_1d(np.asarray(times, dtype=float))
        results = []
        magnitude = np.zeros(t_all.size)
        for x, w, g, n in self._rules:
            out = np.zeros(t_all.size)
            if x.size:
                factors = [(center, weight(g, n) * w) for center, weight in terms]
                chunk = max(1, CHUNK_ELEMENTS // x.size)
                for start in range(0, t_all.size, chunk):
                    t = t_all[start:start + chunk, None]
                    for center, f in factors:
                        out[start:start + chunk] += kernel(x - center, t) @ f
                if not results:
                    bound = sum(float(np.sum(np.abs(f))) for _, f in factors)
                    magnitude = np.abs(kernel(np.zeros(1), t_all[:, None]))[:, 0] * bound
            results.append(out)

        errors = np.abs(results[0] - results[1])
        tol = QUAD_ABS_TOL + QUAD_REL_TOL * magnitude
        bad = errors > tol
        if np.any(bad):
            worst = float(np.max(errors[bad] / tol[bad]))
            raise QuadratureError(f"sinc quadrature missed tolerance by x{worst:.2g}", achieved=float(np.max(errors)))
        return results[0]

    def _terms(self, which: str):
        up, down = _kernel_centers(_check_which(which))
        return [(up, lambda g, n: g * (n + 1.0)), (down, lambda g, n: g * n)]

    def rates(self, times, which: str) -> np.ndarray:
        return self.integrate(times, self._terms(which), sinc_kernel)

    def exposures(self, times, which: str) -> np.ndarray:
        return self.integrate(times, self._terms(which), sinc2_kernel)


# ---------------------------- Operations -----------------------------
def rate(t: float, which: str, spec: BathSpectrumSpec, beta: InverseTemperature, refine: float = 1.0) -> float:
    if t < 0:
        raise DomainError(f"t must be >= 0, got {t}")
    if t == 0:
        return 0.0
    return float(SincQuadrature(spec, beta, t, t, refine).rates(t, which)[0])


def integrated_rate(t: float, which: str, spec: BathSpectrumSpec, beta: InverseTemperature,
                    refine: float = 1.0) -> float:
    """J_e or J_g: positive-frequency sin^2 form, (n+1) and n halves kept apart."""
    if t < 0:
        raise DomainError(f"t must be >= 0, got {t}")
    if t == 0:
        return 0.0
    return float(SincQuadrature(spec, beta, t, t, refine).exposures(t, which)[0])


def rdot0(spec: BathSpectrumSpec, beta: InverseTemperature) -> float:
    """Zeno slope: integral of G_T over the whole frequency axis."""
    if spec.eta_max == 0:
        return 0.0

    def integrand(w):
        if beta.is_zero:
            return g0(w, spec)
        # G_0 (n + 1) + G_0 n = G_0 coth(beta w / 2)
        return g0(w, spec) / math.tanh(beta.beta * w / 2)

    edges = frequency_breakpoints(spec)
    total = 0.0
    error = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        value, err = quad(integrand, a, b, epsabs=1e-13, epsrel=1e-11, limit=200)
        total += value
        error += err
    if error > 1e-9 * max(total, 1e-300):
        raise QuadratureError("Zeno slope integral did not converge", achieved=error)
    return total


def markov_rates(spec: BathSpectrumSpec, beta: InverseTemperature) -> Tuple[float, float]:
    return 2 * math.pi * gT(1.0, spec, beta), 2 * math.pi * gT(-1.0, spec, beta)


# ---------------------------- Rate table -----------------------------
def table_times(t_max: float, step: float = TABLE_STEP) -> np.ndarray:
    """0, a geometric run up to `step`, then a uniform grid ending exactly at t_max."""
    if t_max <= 0:
        raise DomainError(f"t_max must be > 0, got {t_max}")
    first, count = TABLE_GEOMETRIC
    head = np.geomspace(first, step, count, endpoint=False)
    body = np.arange(step, t_max, step)
    body = body[body < t_max - 1e-6 * step]
    times = np.concatenate(([0.0], head, body, [t_max]))
    times = times[times <= t_max]
    return np.unique(times)


def time_blocks(times: np.ndarray, spec: BathSpectrumSpec, beta: InverseTemperature,
                refine: float = 1.0) -> Iterator[Tuple[slice, SincQuadrature]]:
    """Split sorted times into blocks [t, 2t) sharing one panel layout; t = 0 is skipped."""
    positive = np.flatnonzero(times > 0)
    if positive.size == 0:
        return
    start = int(positive[0])
    while start < times.size:
        stop = int(np.searchsorted(times, 2.0 * times[start], side="left"))
        stop = max(stop, start + 1)
        yield slice(start, stop), SincQuadrature(spec, beta, float(times[start]), float(times[stop - 1]), refine)
        start = stop


@dataclass(frozen=True, eq=False)
class RateTable:
    times: np.ndarray
    r_e: np.ndarray
    r_g: np.ndarray
    j_e: np.ndarray
    j_g: np.ndarray
    rdot0: float
    markov_e: float
    markov_g: float
    markov_after: float

    COLUMNS = ("t [1/omega_a]", "R_e [omega_a]", "R_g [omega_a]", "J_e [1]", "J_g [1]")

    def to_rows(self) -> np.ndarray:
        return np.column_stack([self.times, self.r_e, self.r_g, self.j_e, self.j_g])

    def interpolator(self) -> "RateInterpolator":
        return RateInterpolator(
            spline_e=CubicSpline(self.times, self.r_e),
            spline_g=CubicSpline(self.times, self.r_g),
            t_end=float(self.times[-1]),
            markov_e=self.markov_e,
            markov_g=self.markov_g,
            markov_after=self.markov_after,
        )


@dataclass(frozen=True, eq=False)
class RateInterpolator:
    """Spline through the table, golden-rule constants past the Markov horizon."""

    spline_e: CubicSpline
    spline_g: CubicSpline
    t_end: float
    markov_e: float
    markov_g: float
    markov_after: float

    def _check_covered(self, t) -> None:
        past = (t < self.markov_after) & (t > self.t_end * (1 + TABLE_SLACK) + TABLE_SLACK)
        if np.any(past):
            raise DomainError(
                f"rate table ends at t={self.t_end:g} but the Markov tail starts at {self.markov_after:g}; "
                f"got t={float(np.max(np.where(past, t, -np.inf))):g}"
            )

    def __call__(self, t: float) -> Tuple[float, float]:
        if t >= self.markov_after:
            return self.markov_e, self.markov_g
        self._check_covered(t)
        t = min(t, self.t_end)
        return float(self.spline_e(t)), float(self.spline_g(t))

    def rates(self, times) -> Tuple[np.ndarray, np.ndarray]:
        t = np.asarray(times, dtype=float)
        self._check_covered(t)
        tail = t >= self.markov_after
        inner = np.minimum(t, self.t_end)
        r_e = np.where(tail, self.markov_e, self.spline_e(inner))
        r_g = np.where(tail, self.markov_g, self.spline_g(inner))
        return r_e, r_g


def default_markov_after(spec: BathSpectrumSpec) -> float:
    return MARKOV_AFTER_TC * spec.t_c


def build_rate_table(spec: BathSpectrumSpec, beta: InverseTemperature, t_max: float,
                     markov_after: float | None = None, step: float = TABLE_STEP) -> RateTable:
    """Rates on a geometric-then-uniform grid up to min(t_max, markov_after)."""
    horizon = default_markov_after(spec) if markov_after is None else markov_after
    if horizon <= 0:
        raise DomainError(f"markov_after must be > 0, got {horizon}")
    times = table_times(min(t_max, horizon), step)
    r_e = np.zeros_like(times)
    r_g = np.zeros_like(times)

    for sl, quad_rule in time_blocks(times, spec, beta):
        r_e[sl] = quad_rule.rates(times[sl], "e")
        r_g[sl] = quad_rule.rates(times[sl], "g")

    j_e = cumulative_trapezoid(r_e, times, initial=0.0)
    j_g = cumulative_trapezoid(r_g, times, initial=0.0)
    markov_e, markov_g = markov_rates(spec, beta)
    logger.info(
        f"rate table: {times.size} samples up to t={times[-1]:.4g}, "
        f"Markov rates ({markov_e:.4g}, {markov_g:.4g})"
    )
    return RateTable(
        times=times,
        r_e=r_e,
        r_g=r_g,
        j_e=j_e,
        j_g=j_g,
        rdot0=rdot0(spec, beta),
        markov_e=markov_e,
        markov_g=markov_g,
        markov_after=horizon,
    )
